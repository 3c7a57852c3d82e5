//! Deviance-residual diagnostics for deviance-family models.

use serde::{Deserialize, Serialize};

use crate::domain::SalesPanel;
use crate::error::{Error, Result};
use crate::learner::FitModel;
use crate::loss::{deviance, LossSpec};
use crate::numeric::Moments;

/// `sign(y − μ) · √deviance(y, μ)`.
pub fn signed_deviance_residual(spec: &LossSpec, y: f64, mu: f64) -> Result<f64> {
    let d = deviance(spec, y, mu)?.sqrt();
    Ok(if y > mu {
        d
    } else if y < mu {
        -d
    } else {
        0.0
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevianceResidualReport {
    pub loss: String,
    pub n: usize,
    pub mean: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// `n/6 · (S² + K²/4)`; near zero for normal residuals.
    pub jarque_bera: f64,
}

pub fn deviance_residual_report(model: &FitModel, panel: &SalesPanel) -> Result<DevianceResidualReport> {
    if !model.loss.is_deviance_family() {
        return Err(Error::Config(format!(
            "deviance residuals need a deviance-family loss, model uses {}",
            model.loss
        )));
    }
    if panel.is_empty() {
        return Err(Error::EmptyInput("residual report needs observations"));
    }
    let r = panel
        .observations()
        .iter()
        .map(|o| {
            let mu = model.predict(&o.features, true)?;
            signed_deviance_residual(&model.loss, o.sales, mu)
        })
        .collect::<Result<Vec<_>>>()?;
    let m = Moments::of(&r);
    Ok(DevianceResidualReport {
        loss: model.loss.label(),
        n: m.n,
        mean: m.mean,
        skewness: m.skewness,
        excess_kurtosis: m.excess_kurtosis,
        jarque_bera: m.jarque_bera(),
    })
}
