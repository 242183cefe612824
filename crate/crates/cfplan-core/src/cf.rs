//! Piecewise-linear concave clearing functions.
//!
//! A clearing function bounds how many minutes of work a resource can clear
//! (process) in one period as a function of the load available to it in that
//! period: the pointwise minimum over line segments `slope · load + intercept`.
//! The first segment is always the diagonal (1, 0) — output cannot exceed the
//! available load — and the last is the capacity plateau (0, MC). Segments in
//! between shave output near saturation, modeling congestion.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One linear piece of a clearing function: `output ≤ slope · load + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub slope: f64,
    /// Minutes of output at zero load for this piece.
    pub intercept: f64,
}

/// Concave nondecreasing output bound for one resource.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClearingFunction {
    segments: Vec<Segment>,
    capacity: f64,
}

impl ClearingFunction {
    /// The ideal clearing function: output = min(load, capacity).
    pub fn ideal(capacity: f64) -> Result<Self> {
        Self::from_segments(
            vec![
                Segment { slope: 1.0, intercept: 0.0 },
                Segment { slope: 0.0, intercept: capacity },
            ],
            capacity,
        )
    }

    /// Three-segment family parameterized by the fraction `f` of capacity at
    /// which the middle segment leaves the diagonal.
    ///
    /// Segments: (1, 0), (0.5, f·mc/2), (0, mc). The middle piece departs the
    /// diagonal at load f·mc and meets the plateau at load (2 − f)·mc, so a
    /// smaller `f` bends away earlier and allows less output at the same load.
    pub fn three_segment(capacity: f64, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::Validation(format!(
                "three-segment fraction must lie in (0, 1), got {fraction}"
            )));
        }
        Self::from_segments(
            vec![
                Segment { slope: 1.0, intercept: 0.0 },
                Segment { slope: 0.5, intercept: fraction * capacity / 2.0 },
                Segment { slope: 0.0, intercept: capacity },
            ],
            capacity,
        )
    }

    /// Build from an explicit segment list, validating the shape invariants.
    pub fn from_segments(segments: Vec<Segment>, capacity: f64) -> Result<Self> {
        if !(capacity > 0.0) {
            return Err(Error::Validation(format!("capacity must be positive, got {capacity}")));
        }
        if segments.len() < 2 {
            return Err(Error::Validation("a clearing function needs at least two segments".into()));
        }
        let first = segments[0];
        if first.slope != 1.0 || first.intercept != 0.0 {
            return Err(Error::Validation(format!(
                "first segment must be the diagonal (1, 0), got ({}, {})",
                first.slope, first.intercept
            )));
        }
        let last = segments[segments.len() - 1];
        if last.slope != 0.0 || (last.intercept - capacity).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "last segment must be the capacity plateau (0, {capacity}), got ({}, {})",
                last.slope, last.intercept
            )));
        }
        for pair in segments.windows(2) {
            if !(pair[1].slope < pair[0].slope) {
                return Err(Error::Validation("segment slopes must be strictly decreasing".into()));
            }
            if !(pair[1].intercept > pair[0].intercept) {
                return Err(Error::Validation(
                    "segment intercepts must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self { segments, capacity })
    }

    /// Maximum processed load (minutes) permitted at the given available load.
    pub fn max_output(&self, load: f64) -> f64 {
        self.segments
            .iter()
            .map(|s| s.slope * load + s.intercept)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Segments strictly between the diagonal and the plateau. These become
    /// hard rows in the release model; the two boundary pieces are modeled
    /// separately with overload relief.
    pub fn interior_segments(&self) -> &[Segment] {
        &self.segments[1..self.segments.len() - 1]
    }
}

/// Clearing-function selection as it appears in experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum CfConfig {
    Ideal,
    ThreeSegment { fraction: f64 },
    /// Explicit segment list; the resource capacity supplies the plateau.
    Segments { segments: Vec<Segment> },
}

impl CfConfig {
    pub fn build(&self, capacity: f64) -> Result<ClearingFunction> {
        match self {
            CfConfig::Ideal => ClearingFunction::ideal(capacity),
            CfConfig::ThreeSegment { fraction } => {
                ClearingFunction::three_segment(capacity, *fraction)
            }
            CfConfig::Segments { segments } => {
                ClearingFunction::from_segments(segments.clone(), capacity)
            }
        }
    }

    /// Short label for CSV output ("ideal", "seg3-0.80", "custom").
    pub fn label(&self) -> String {
        match self {
            CfConfig::Ideal => "ideal".into(),
            CfConfig::ThreeSegment { fraction } => format!("seg3-{fraction:.2}"),
            CfConfig::Segments { .. } => "custom".into(),
        }
    }
}
