//! Deviance family (squared error, pseudo-Huber, Poisson, Gamma, Tweedie)
//! with analytic derivatives for Newton boosting, plus sample weighting.
//!
//! All deviances carry the conventional factor 2, so Poisson, Gamma and
//! Tweedie values are directly comparable with the usual GLM deviances.
//! Derivatives are taken with respect to the learner's internal score `s`:
//! `μ = s` under the identity link and `μ = exp(s)` under the log link.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::WeightScheme;
use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;
use crate::numfmt::fmt_sig;

/// Floor applied to every hessian so Newton steps stay finite.
pub const HESS_FLOOR: f64 = 1e-16;

/// Added to every sales-derived weight so zero-sales rows keep a tiny, nonzero weight.
pub const WEIGHT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    PseudoHuber { delta: f64 },
    Poisson,
    Gamma,
    Tweedie { power: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Identity,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    #[serde(flatten)]
    pub kind: LossKind,
    pub link: Link,
}

impl LossSpec {
    pub fn mse() -> Self {
        Self {
            kind: LossKind::Mse,
            link: Link::Identity,
        }
    }

    pub fn pseudo_huber(delta: f64) -> Self {
        Self {
            kind: LossKind::PseudoHuber { delta },
            link: Link::Identity,
        }
    }

    pub fn poisson() -> Self {
        Self {
            kind: LossKind::Poisson,
            link: Link::Log,
        }
    }

    pub fn gamma() -> Self {
        Self {
            kind: LossKind::Gamma,
            link: Link::Log,
        }
    }

    pub fn tweedie(power: f64) -> Self {
        Self {
            kind: LossKind::Tweedie { power },
            link: Link::Log,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            LossKind::PseudoHuber { delta } if !(delta > 0.0 && delta.is_finite()) => {
                return Err(Error::Config(format!("pseudo-Huber delta must be > 0, got {delta}")));
            }
            LossKind::Tweedie { power } if !(power > 1.0 && power < 2.0) => {
                return Err(Error::Config(format!("Tweedie power must lie in (1, 2), got {power}")));
            }
            _ => {}
        }
        let expected = if self.is_deviance_family() {
            Link::Log
        } else {
            Link::Identity
        };
        if self.link != expected {
            return Err(Error::Config(format!("{self} requires the {expected:?} link")));
        }
        Ok(())
    }

    /// Poisson, Gamma and Tweedie: losses defined on positive means.
    pub fn is_deviance_family(&self) -> bool {
        matches!(
            self.kind,
            LossKind::Poisson | LossKind::Gamma | LossKind::Tweedie { .. }
        )
    }

    /// Mean implied by an internal score.
    pub fn mean_of(&self, score: f64) -> f64 {
        match self.link {
            Link::Identity => score,
            Link::Log => score.exp(),
        }
    }

    /// Score implied by a mean; the inverse of [`LossSpec::mean_of`].
    pub fn score_of(&self, mu: f64) -> f64 {
        match self.link {
            Link::Identity => mu,
            Link::Log => mu.ln(),
        }
    }

    /// Short column label, e.g. `tweedie(1.5)`.
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LossKind::Mse => write!(f, "mse"),
            LossKind::PseudoHuber { delta } => write!(f, "pseudo_huber({})", fmt_sig(delta)),
            LossKind::Poisson => write!(f, "poisson"),
            LossKind::Gamma => write!(f, "gamma"),
            LossKind::Tweedie { power } => write!(f, "tweedie({})", fmt_sig(power)),
        }
    }
}

/// First and second derivative of a per-sample deviance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradHess {
    pub grad: f64,
    pub hess: f64,
}

fn check_domain(spec: &LossSpec, y: f64, mu: f64) -> Result<()> {
    if !(y >= 0.0) || !y.is_finite() {
        return Err(Error::Domain(format!("target must be finite and >= 0, got {y}")));
    }
    if !mu.is_finite() {
        return Err(Error::Domain(format!("prediction must be finite, got {mu}")));
    }
    if spec.is_deviance_family() && !(mu > 0.0) {
        return Err(Error::Domain(format!("{spec} needs a positive mean, got {mu}")));
    }
    if matches!(spec.kind, LossKind::Gamma) && !(y > 0.0) {
        return Err(Error::Domain(format!("gamma deviance needs y > 0, got {y}")));
    }
    Ok(())
}

/// `(y^a − μ^a)/a` evaluated without cancellation for small `a`.
fn power_term(y: f64, mu: f64, a: f64) -> f64 {
    // y^a − μ^a = −y^a · expm1(a·ln(μ/y))
    -y.powf(a) * (a * (mu / y).ln()).exp_m1() / a
}

/// Per-sample deviance.
pub fn deviance(spec: &LossSpec, y: f64, mu: f64) -> Result<f64> {
    check_domain(spec, y, mu)?;
    let d = match spec.kind {
        LossKind::Mse => (y - mu) * (y - mu),
        LossKind::PseudoHuber { delta } => {
            let r = (y - mu) / delta;
            // δ²(√(1+r²) − 1) = δ² r² / (√(1+r²) + 1)
            delta * delta * r * r / ((1.0 + r * r).sqrt() + 1.0)
        }
        LossKind::Poisson => {
            let ylog = if y == 0.0 { 0.0 } else { y * (y / mu).ln() };
            2.0 * (ylog - y + mu)
        }
        LossKind::Gamma => 2.0 * (-(y / mu).ln() + (y - mu) / mu),
        LossKind::Tweedie { power: p } => {
            let first = if y == 0.0 { 0.0 } else { y * power_term(y, mu, 1.0 - p) };
            let second = if y == 0.0 {
                -mu.powf(2.0 - p) / (2.0 - p)
            } else {
                power_term(y, mu, 2.0 - p)
            };
            2.0 * (first - second)
        }
    };
    // round-off can leave a tiny negative value at a perfect fit
    Ok(d.max(0.0))
}

/// Derivatives of [`deviance`] with respect to the internal score.
pub fn grad_hess(spec: &LossSpec, y: f64, score: f64) -> Result<GradHess> {
    if !score.is_finite() {
        return Err(Error::Domain(format!("score must be finite, got {score}")));
    }
    let mu = spec.mean_of(score);
    check_domain(spec, y, mu)?;
    let (grad, hess) = match spec.kind {
        LossKind::Mse => (2.0 * (mu - y), 2.0),
        LossKind::PseudoHuber { delta } => {
            let r = (y - mu) / delta;
            let root = (1.0 + r * r).sqrt();
            (-(y - mu) / root, 1.0 / (root * root * root))
        }
        LossKind::Poisson => (2.0 * (mu - y), 2.0 * mu),
        LossKind::Gamma => {
            let ratio = y / mu;
            (2.0 * (1.0 - ratio), 2.0 * ratio)
        }
        LossKind::Tweedie { power: p } => {
            let a = ((2.0 - p) * score).exp();
            let b = ((1.0 - p) * score).exp();
            (2.0 * (a - y * b), 2.0 * ((2.0 - p) * a - (1.0 - p) * y * b))
        }
    };
    Ok(GradHess {
        grad,
        hess: hess.max(HESS_FLOOR),
    })
}

/// `Σ wᵢ · deviance(yᵢ, μᵢ)` with order-deterministic summation.
pub fn total_loss(spec: &LossSpec, weights: &[f64], ys: &[f64], mus: &[f64]) -> Result<f64> {
    if weights.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: weights.len(),
            right: ys.len(),
        });
    }
    if mus.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: mus.len(),
            right: ys.len(),
        });
    }
    let terms = weights
        .iter()
        .zip(ys)
        .zip(mus)
        .map(|((w, &y), &mu)| Ok(w * deviance(spec, y, mu)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&terms))
}

/// Sample weights derived from raw sales. Every weight is strictly positive.
pub fn weights_for(scheme: &WeightScheme, ys: &[f64]) -> Vec<f64> {
    ys.iter()
        .map(|&y| {
            let y = y.max(0.0);
            match *scheme {
                WeightScheme::Unit => 1.0,
                WeightScheme::LogSales => y.ln_1p() + WEIGHT_FLOOR,
                WeightScheme::SqrtSales => y.sqrt() + WEIGHT_FLOOR,
                WeightScheme::LinearSales => y + WEIGHT_FLOOR,
                WeightScheme::Power { alpha } => y.powf(alpha) + WEIGHT_FLOOR,
            }
        })
        .collect()
}

/// Score of the constant prediction minimizing `Σ wᵢ · deviance(yᵢ, μ)`.
///
/// For squared error and the log-link families this is the weighted mean of
/// `ys` (mapped through the link); pseudo-Huber is solved by bisection on
/// its monotone first-order condition.
pub fn constant_minimizer(spec: &LossSpec, ys: &[f64], weights: &[f64]) -> Result<f64> {
    if ys.is_empty() {
        return Err(Error::EmptyInput("constant minimizer needs data"));
    }
    if weights.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: weights.len(),
            right: ys.len(),
        });
    }
    let wsum = pairwise_sum(weights);
    let wy: Vec<f64> = weights.iter().zip(ys).map(|(w, y)| w * y).collect();
    let weighted_mean = pairwise_sum(&wy) / wsum;
    match spec.kind {
        LossKind::Mse => Ok(weighted_mean),
        LossKind::PseudoHuber { .. } => {
            let slope = |s: f64| -> f64 {
                let g: Vec<f64> = ys
                    .iter()
                    .zip(weights)
                    .map(|(&y, w)| w * grad_hess(spec, y, s).map(|gh| gh.grad).unwrap_or(0.0))
                    .collect();
                pairwise_sum(&g)
            };
            let (mut lo, mut hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
                (lo.min(y), hi.max(y))
            });
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if slope(mid) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(0.5 * (lo + hi))
        }
        LossKind::Poisson | LossKind::Gamma | LossKind::Tweedie { .. } => {
            if !(weighted_mean > 0.0) {
                return Err(Error::DegenerateData(
                    "log-link loss needs a positive weighted mean".into(),
                ));
            }
            Ok(weighted_mean.ln())
        }
    }
}

/// Deviance of several losses over a grid of predictions for one actual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityTable {
    pub actual: f64,
    pub mu: Vec<f64>,
    pub labels: Vec<String>,
    /// `columns[j][i]` is the deviance of spec `j` at `mu[i]`.
    pub columns: Vec<Vec<f64>>,
}

impl ConvexityTable {
    /// `mu,<label_1>,...` followed by one row per grid point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mu");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (i, mu) in self.mu.iter().enumerate() {
            out.push_str(&fmt_sig(*mu));
            for col in &self.columns {
                out.push(',');
                out.push_str(&fmt_sig(col[i]));
            }
            out.push('\n');
        }
        out
    }

    /// Central second difference of column `j` at grid index `i`.
    pub fn second_difference(&self, j: usize, i: usize) -> f64 {
        let c = &self.columns[j];
        c[i - 1] - 2.0 * c[i] + c[i + 1]
    }
}

pub fn convexity_profile(specs: &[LossSpec], actual: f64, mu_grid: &[f64]) -> Result<ConvexityTable> {
    let columns = specs
        .iter()
        .map(|spec| {
            spec.validate()?;
            mu_grid
                .iter()
                .map(|&mu| deviance(spec, actual, mu))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvexityTable {
        actual,
        mu: mu_grid.to_vec(),
        labels: specs.iter().map(LossSpec::label).collect(),
        columns,
    })
}
