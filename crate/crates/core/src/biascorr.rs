//! Post-hoc transformation-bias correction.
//!
//! Correctors are fitted on training-set residuals in transformed units and
//! multiply back-transformed predictions:
//!
//! - variance-based: `exp(σ²/2)`, exact for normal log-residuals;
//! - smearing: `mean(exp(εᵢ))`, distribution free;
//! - prediction-binned: one multiplier `Σy / Σŷ` per window of the
//!   transformed prediction, so larger forecasts can get larger lifts.

use serde::{Deserialize, Serialize};

use crate::domain::{SalesPanel, TargetTransform};
use crate::error::{Error, Result};
use crate::learner::{FitModel, ResidualStats};
use crate::numeric::{pairwise_sum, variance};
use crate::transform::{forward, inverse};

pub const DEFAULT_BIN_WIDTH: f64 = 2.0;
pub const DEFAULT_MIN_BIN_COUNT: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BiasCorrector {
    #[default]
    None,
    VarianceBased {
        bc: f64,
    },
    Smearing {
        bc: f64,
    },
    PredictionBinned {
        /// Lower bin edges in transformed units, strictly ascending from 0.
        /// Bin `k` is `[edges[k], edges[k+1])`; the last bin is open-ended.
        edges: Vec<f64>,
        multipliers: Vec<f64>,
        fallback: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CorrectorKind {
    #[default]
    None,
    VarianceBased,
    Smearing,
    PredictionBinned,
}

impl BiasCorrector {
    pub fn kind(&self) -> CorrectorKind {
        match self {
            BiasCorrector::None => CorrectorKind::None,
            BiasCorrector::VarianceBased { .. } => CorrectorKind::VarianceBased,
            BiasCorrector::Smearing { .. } => CorrectorKind::Smearing,
            BiasCorrector::PredictionBinned { .. } => CorrectorKind::PredictionBinned,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BiasCorrector::None => Ok(()),
            BiasCorrector::VarianceBased { bc } | BiasCorrector::Smearing { bc } => {
                if *bc > 0.0 && bc.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "bias correction factor must be positive, got {bc}"
                    )))
                }
            }
            BiasCorrector::PredictionBinned {
                edges,
                multipliers,
                fallback,
            } => {
                if edges.is_empty() || edges.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::Config(
                        "bin edges must be non-empty and strictly ascending".into(),
                    ));
                }
                if multipliers.len() != edges.len() {
                    return Err(Error::Config(format!(
                        "{} bin edges need {} multipliers, got {}",
                        edges.len(),
                        edges.len(),
                        multipliers.len()
                    )));
                }
                if multipliers
                    .iter()
                    .chain([fallback])
                    .any(|m| !(*m > 0.0 && m.is_finite()))
                {
                    return Err(Error::Config("bin multipliers must be positive".into()));
                }
                Ok(())
            }
        }
    }
}

/// `exp(σ²/2)` with `σ²` the population variance of the residuals.
pub fn fit_variance_based(residuals: &[f64]) -> Result<BiasCorrector> {
    if residuals.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: residuals.len(),
        });
    }
    Ok(BiasCorrector::VarianceBased {
        bc: (variance(residuals) / 2.0).exp(),
    })
}

/// `Σ exp(εᵢ) / N`.
pub fn fit_smearing(residuals: &[f64]) -> Result<BiasCorrector> {
    Ok(BiasCorrector::Smearing {
        bc: smearing_factor(residuals)?,
    })
}

fn smearing_factor(residuals: &[f64]) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let e: Vec<f64> = residuals.iter().map(|r| r.exp()).collect();
    Ok(pairwise_sum(&e) / residuals.len() as f64)
}

/// Bin index of a transformed prediction. Values below the first edge fall
/// in the first bin, values at or above the last edge in the overflow bin.
fn bin_of(edges: &[f64], z: f64) -> usize {
    edges.partition_point(|&e| e <= z).saturating_sub(1)
}

pub fn fit_prediction_binned(
    y_raw: &[f64],
    pred_transformed: &[f64],
    transform: &TargetTransform,
    bin_width: f64,
) -> Result<BiasCorrector> {
    fit_prediction_binned_with(y_raw, pred_transformed, transform, bin_width, DEFAULT_MIN_BIN_COUNT)
}

/// Prediction-binned corrector with an explicit minimum bin population.
/// Bins with fewer points, or with no signal in either sum, receive the
/// global smearing factor.
pub fn fit_prediction_binned_with(
    y_raw: &[f64],
    pred_transformed: &[f64],
    transform: &TargetTransform,
    bin_width: f64,
    min_bin_count: usize,
) -> Result<BiasCorrector> {
    if y_raw.len() != pred_transformed.len() {
        return Err(Error::LengthMismatch {
            left: y_raw.len(),
            right: pred_transformed.len(),
        });
    }
    if y_raw.is_empty() {
        return Err(Error::EmptyInput("prediction-binned corrector needs data"));
    }
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::Config(format!("bin width must be positive, got {bin_width}")));
    }
    let residuals = y_raw
        .iter()
        .zip(pred_transformed)
        .map(|(&y, &z)| Ok(forward(transform, y)? - z))
        .collect::<Result<Vec<_>>>()?;
    let fallback = smearing_factor(&residuals)?;

    let max_pred = pred_transformed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n_upper = if max_pred >= bin_width {
        (max_pred / bin_width).floor() as usize
    } else {
        0
    };
    let edges: Vec<f64> = (0..=n_upper).map(|k| k as f64 * bin_width).collect();

    let mut actual = vec![Vec::new(); edges.len()];
    let mut predicted = vec![Vec::new(); edges.len()];
    for (&y, &z) in y_raw.iter().zip(pred_transformed) {
        let b = bin_of(&edges, z);
        actual[b].push(y);
        predicted[b].push(inverse(transform, z));
    }
    let multipliers = actual
        .iter()
        .zip(&predicted)
        .map(|(a, p)| {
            let (sa, sp) = (pairwise_sum(a), pairwise_sum(p));
            if a.len() < min_bin_count || !(sa > 0.0) || !(sp > 0.0) {
                fallback
            } else {
                sa / sp
            }
        })
        .collect();
    Ok(BiasCorrector::PredictionBinned {
        edges,
        multipliers,
        fallback,
    })
}

/// Fit a corrector of `kind` from raw actuals and transformed-unit predictions.
pub fn fit_corrector(
    kind: CorrectorKind,
    y_raw: &[f64],
    pred_transformed: &[f64],
    transform: &TargetTransform,
) -> Result<BiasCorrector> {
    if kind == CorrectorKind::None {
        return Ok(BiasCorrector::None);
    }
    if kind == CorrectorKind::PredictionBinned {
        return fit_prediction_binned(y_raw, pred_transformed, transform, DEFAULT_BIN_WIDTH);
    }
    if y_raw.len() != pred_transformed.len() {
        return Err(Error::LengthMismatch {
            left: y_raw.len(),
            right: pred_transformed.len(),
        });
    }
    let residuals = y_raw
        .iter()
        .zip(pred_transformed)
        .map(|(&y, &z)| Ok(forward(transform, y)? - z))
        .collect::<Result<Vec<_>>>()?;
    match kind {
        CorrectorKind::VarianceBased => fit_variance_based(&residuals),
        _ => fit_smearing(&residuals),
    }
}

/// Corrected raw-unit forecast.
pub fn apply(corrector: &BiasCorrector, raw_prediction: f64, pred_transformed: f64) -> f64 {
    match corrector {
        BiasCorrector::None => raw_prediction,
        BiasCorrector::VarianceBased { bc } | BiasCorrector::Smearing { bc } => bc * raw_prediction,
        BiasCorrector::PredictionBinned { edges, multipliers, .. } => {
            multipliers[bin_of(edges, pred_transformed)] * raw_prediction
        }
    }
}

/// Raw-unit residuals (`y − ŷ`) before and after correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionReport {
    pub kind: CorrectorKind,
    pub before: ResidualStats,
    pub after: ResidualStats,
}

impl CorrectionReport {
    /// Fractional reduction of `|mean residual|`; 1 means fully removed.
    pub fn mean_reduction(&self) -> f64 {
        1.0 - self.after.mean.abs() / self.before.mean.abs()
    }
}

pub fn corrected_residual_report(
    corrector: &BiasCorrector,
    model: &FitModel,
    panel: &SalesPanel,
) -> Result<CorrectionReport> {
    let mut before = Vec::with_capacity(panel.len());
    let mut after = Vec::with_capacity(panel.len());
    for obs in panel.observations() {
        let score = model.predict(&obs.features, false)?;
        let raw = model.predict(&obs.features, true)?;
        before.push(obs.sales - raw);
        after.push(obs.sales - apply(corrector, raw, score));
    }
    if before.is_empty() {
        return Err(Error::EmptyInput("residual report needs observations"));
    }
    Ok(CorrectionReport {
        kind: corrector.kind(),
        before: ResidualStats::of(&before),
        after: ResidualStats::of(&after),
    })
}
