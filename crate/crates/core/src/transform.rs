//! Target transforms and the Jensen gap they induce.
//!
//! For a concave transform `f`, back-mapping the mean of `f(y)` lands below
//! the mean of `y`. [`jensen_gap`] measures that shortfall directly.

use serde::{Deserialize, Serialize};

use crate::domain::{TargetTransform, TransformKind};
use crate::error::{Error, Result};
use crate::numeric::mean;

pub fn forward(t: &TargetTransform, y: f64) -> Result<f64> {
    if !(y >= 0.0) {
        return Err(Error::Domain(format!("sales must be >= 0, got {y}")));
    }
    match t.kind {
        TransformKind::Identity => Ok(y),
        TransformKind::Log if t.offset == 1.0 => Ok(y.ln_1p()),
        TransformKind::Log => {
            let shifted = y + t.offset;
            if shifted <= 0.0 {
                return Err(Error::Domain(format!("log of non-positive value {shifted}")));
            }
            Ok(shifted.ln())
        }
        TransformKind::Sqrt => Ok(y.sqrt()),
    }
}

/// Back to sales units. Always `>= 0`; negative scores clamp to zero sales.
pub fn inverse(t: &TargetTransform, z: f64) -> f64 {
    match t.kind {
        TransformKind::Identity => z.max(0.0),
        TransformKind::Log if t.offset == 1.0 => z.exp_m1().max(0.0),
        TransformKind::Log => (z.exp() - t.offset).max(0.0),
        TransformKind::Sqrt => {
            let z = z.max(0.0);
            z * z
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JensenGapReport {
    /// `f⁻¹(mean(f(y)))`
    pub mean_of_transformed_backmapped: f64,
    pub mean_raw: f64,
    /// `mean_raw − backmapped`
    pub gap: f64,
    /// `gap / mean_raw`, zero when `mean_raw` is zero.
    pub relative_gap: f64,
}

pub fn jensen_gap(t: &TargetTransform, ys: &[f64]) -> Result<JensenGapReport> {
    if ys.is_empty() {
        return Err(Error::EmptyInput("jensen_gap needs at least one value"));
    }
    let transformed = ys.iter().map(|&y| forward(t, y)).collect::<Result<Vec<_>>>()?;
    // degenerate samples are exact on both sides; a summed mean can round away from ys[0]
    let (mean_raw, backmapped) = if ys.iter().all(|&y| y == ys[0]) {
        (ys[0], ys[0])
    } else {
        (mean(ys), inverse(t, mean(&transformed)))
    };
    let gap = mean_raw - backmapped;
    Ok(JensenGapReport {
        mean_of_transformed_backmapped: backmapped,
        mean_raw,
        gap,
        relative_gap: if mean_raw > 0.0 { gap / mean_raw } else { 0.0 },
    })
}
