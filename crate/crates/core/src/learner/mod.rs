//! Newton-boosted regressors: a tree ensemble and a boosted linear model.
//!
//! Both learners start from the weighted constant minimizer of the loss and
//! add one member per round fitted to per-sample gradients and hessians of
//! the weighted deviance. A step that would raise the training loss is
//! halved until it does not, or dropped.

mod linear;
mod tree;

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use tree::Node;

use crate::biascorr::{self, BiasCorrector};
use crate::domain::{SalesPanel, TargetTransform, TransformKind, WeightScheme};
use crate::error::{Error, Result};
use crate::loss::{self, Link, LossSpec};
use crate::numeric::{mean, pairwise_sum, variance};
use crate::numfmt::fmt_sig;
use crate::rng::KeyedRng;
use crate::transform::{forward, inverse};
use tree::{Columns, TreeParams};

pub const MODEL_FORMAT: &str = "skewcast-model-v1";

const MAX_HALVINGS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BaseLearner {
    #[default]
    Tree,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub base: BaseLearner,
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub l2_reg: f64,
    pub subsample: f64,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            base: BaseLearner::Tree,
            rounds: 200,
            learning_rate: 0.1,
            max_depth: 6,
            min_child_weight: 1.0,
            l2_reg: 1.0,
            subsample: 1.0,
            seed: 0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!(
                "learning_rate must be in (0,1], got {}",
                self.learning_rate
            )));
        }
        if self.max_depth == 0 {
            return Err(Error::Config("max_depth must be positive".into()));
        }
        if !(self.min_child_weight >= 0.0 && self.min_child_weight.is_finite()) {
            return Err(Error::Config("min_child_weight must be >= 0".into()));
        }
        if !(self.l2_reg >= 0.0 && self.l2_reg.is_finite()) {
            return Err(Error::Config("l2_reg must be >= 0".into()));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::Config(format!(
                "subsample must be in (0,1], got {}",
                self.subsample
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Members {
    Trees(Vec<Node>),
    Linear { intercept: f64, coefficients: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitModel {
    pub version: String,
    pub config: LearnerConfig,
    pub transform: TargetTransform,
    pub loss: LossSpec,
    pub weight_scheme: WeightScheme,
    pub base_score: f64,
    pub feature_names: Vec<String>,
    pub members: Members,
    #[serde(default)]
    pub bias_corrector: BiasCorrector,
}

/// Per-round training loss; entry 0 is the constant model.
pub type LossTrace = Vec<f64>;

fn columns_of(panel: &SalesPanel) -> Vec<Vec<f64>> {
    (0..panel.n_features())
        .map(|f| panel.observations().iter().map(|o| o.features[f]).collect())
        .collect()
}

fn check_compatible(transform: &TargetTransform, loss: &LossSpec) -> Result<()> {
    transform.validate()?;
    loss.validate()?;
    if loss.is_deviance_family() && transform.kind != TransformKind::Identity {
        return Err(Error::Config(format!(
            "{loss} models raw sales and needs the identity transform, got {transform}"
        )));
    }
    Ok(())
}

pub fn fit(
    panel: &SalesPanel,
    transform: &TargetTransform,
    loss: &LossSpec,
    ws: &WeightScheme,
    cfg: &LearnerConfig,
) -> Result<FitModel> {
    fit_traced(panel, transform, loss, ws, cfg).map(|(m, _)| m)
}

/// [`fit`], also returning the training loss after every round.
pub fn fit_traced(
    panel: &SalesPanel,
    transform: &TargetTransform,
    loss: &LossSpec,
    ws: &WeightScheme,
    cfg: &LearnerConfig,
) -> Result<(FitModel, LossTrace)> {
    check_compatible(transform, loss)?;
    ws.validate()?;
    cfg.validate()?;
    if panel.is_empty() {
        return Err(Error::EmptyInput("cannot fit on an empty panel"));
    }
    let raw: Vec<f64> = panel.sales().collect();
    let target = raw.iter().map(|&y| forward(transform, y)).collect::<Result<Vec<_>>>()?;
    if target.iter().all(|&t| t == target[0]) {
        return Err(Error::DegenerateData("all training targets are equal".into()));
    }
    let weights = loss::weights_for(ws, &raw);
    let base_score = loss::constant_minimizer(loss, &target, &weights)?;
    // surfaces domain errors such as zero sales under a gamma loss
    loss::grad_hess(loss, target[0], base_score)?;
    for &y in &target {
        loss::deviance(loss, y, loss.mean_of(base_score))?;
    }

    let data = Columns::new(columns_of(panel));
    let n = target.len();
    let mut scores = vec![base_score; n];
    let mut current = training_loss(loss, &weights, &target, &scores)?;
    let mut trace = vec![current];
    let params = TreeParams {
        max_depth: cfg.max_depth,
        min_child_weight: cfg.min_child_weight,
        l2_reg: cfg.l2_reg,
        learning_rate: cfg.learning_rate,
    };
    let mut trees = Vec::new();
    let (mut intercept, mut coefficients) = (0.0, vec![0.0; data.cols.len()]);

    for round in 0..cfg.rounds {
        let gh = scores
            .par_iter()
            .zip(target.par_iter())
            .zip(weights.par_iter())
            .map(|((&s, &y), &w)| loss::grad_hess(loss, y, s).map(|d| (w * d.grad, w * d.hess)))
            .collect::<Result<Vec<_>>>()?;
        let (g, h): (Vec<f64>, Vec<f64>) = gh.into_iter().unzip();
        let sample = subsample_mask(cfg, round, n);
        let sample = sample.as_deref();

        let (proposal, known) = match cfg.base {
            BaseLearner::Tree => {
                let (t, values) = tree::grow(&data, &g, &h, sample, &params);
                (Proposal::Tree(t), values)
            }
            BaseLearner::Linear => {
                let (b0, b) = linear::newton_step(&data, &g, &h, sample, cfg.l2_reg)?;
                let lr = cfg.learning_rate;
                (
                    Proposal::Linear(lr * b0, b.iter().map(|v| lr * v).collect()),
                    Vec::new(),
                )
            }
        };
        let mut row = Vec::with_capacity(data.cols.len());
        let delta: Vec<f64> = (0..n)
            .map(|i| match known.get(i) {
                Some(&Some(v)) => v,
                _ => {
                    data.row(i, &mut row);
                    proposal.eval(&row)
                }
            })
            .collect();

        // backtracking: accept the largest step 2^-k that does not raise the loss
        let mut factor = 1.0;
        for _ in 0..=MAX_HALVINGS {
            let cand: Vec<f64> = scores.iter().zip(&delta).map(|(s, d)| s + factor * d).collect();
            if let Ok(l) = training_loss(loss, &weights, &target, &cand) {
                if l <= current {
                    scores = cand;
                    current = l;
                    match proposal {
                        Proposal::Tree(mut t) => {
                            if factor != 1.0 {
                                t.scale(factor);
                            }
                            trees.push(t);
                        }
                        Proposal::Linear(b0, b) => {
                            intercept += factor * b0;
                            for (c, bk) in coefficients.iter_mut().zip(&b) {
                                *c += factor * bk;
                            }
                        }
                    }
                    break;
                }
            }
            factor *= 0.5;
        }
        trace.push(current);
    }

    let members = match cfg.base {
        BaseLearner::Tree => Members::Trees(trees),
        BaseLearner::Linear => Members::Linear {
            intercept,
            coefficients,
        },
    };
    Ok((
        FitModel {
            version: MODEL_FORMAT.to_string(),
            config: cfg.clone(),
            transform: *transform,
            loss: *loss,
            weight_scheme: *ws,
            base_score,
            feature_names: panel.feature_names().to_vec(),
            members,
            bias_corrector: BiasCorrector::None,
        },
        trace,
    ))
}

enum Proposal {
    Tree(Node),
    Linear(f64, Vec<f64>),
}

impl Proposal {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Proposal::Tree(t) => t.eval(x),
            Proposal::Linear(b0, b) => b0 + b.iter().zip(x).map(|(bk, xk)| bk * xk).sum::<f64>(),
        }
    }
}

fn training_loss(spec: &LossSpec, weights: &[f64], target: &[f64], scores: &[f64]) -> Result<f64> {
    let mus: Vec<f64> = scores.iter().map(|&s| spec.mean_of(s)).collect();
    loss::total_loss(spec, weights, target, &mus)
}

fn subsample_mask(cfg: &LearnerConfig, round: usize, n: usize) -> Option<Vec<bool>> {
    if cfg.subsample >= 1.0 {
        return None;
    }
    Some(
        (0..n)
            .map(|i| KeyedRng::new(cfg.seed, &[round as u64, i as u64]).next_f64() < cfg.subsample)
            .collect(),
    )
}

impl FitModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Internal score: transformed units, or log-mean under a log link.
    pub fn score(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.n_features() {
            return Err(Error::ShapeMismatch {
                expected: self.n_features(),
                got: features.len(),
            });
        }
        Ok(match &self.members {
            Members::Trees(trees) => {
                let parts: Vec<f64> = trees.iter().map(|t| t.eval(features)).collect();
                self.base_score + pairwise_sum(&parts)
            }
            Members::Linear {
                intercept,
                coefficients,
            } => self.base_score + intercept + coefficients.iter().zip(features).map(|(b, x)| b * x).sum::<f64>(),
        })
    }

    /// Raw-sales prediction implied by a score, before bias correction.
    pub fn raw_of(&self, score: f64) -> f64 {
        if self.transform.kind != TransformKind::Identity {
            inverse(&self.transform, score)
        } else if self.loss.link == Link::Log {
            score.exp()
        } else {
            score.max(0.0)
        }
    }

    pub fn predict(&self, features: &[f64], in_raw_units: bool) -> Result<f64> {
        let s = self.score(features)?;
        Ok(if in_raw_units { self.raw_of(s) } else { s })
    }

    /// Raw-sales forecast with the attached bias corrector applied.
    pub fn forecast(&self, features: &[f64]) -> Result<f64> {
        let s = self.score(features)?;
        Ok(biascorr::apply(&self.bias_corrector, self.raw_of(s), s))
    }

    /// Transformed-unit prediction: the fitted target's units.
    pub fn transformed_of(&self, score: f64) -> f64 {
        self.loss.mean_of(score)
    }

    pub fn with_corrector(mut self, corrector: BiasCorrector) -> Result<Self> {
        corrector.validate()?;
        self.bias_corrector = corrector;
        Ok(self)
    }

    /// Fit a corrector of `kind` on `panel` (normally the training panel).
    pub fn fit_corrector(&self, kind: biascorr::CorrectorKind, panel: &SalesPanel) -> Result<BiasCorrector> {
        let mut ys = Vec::with_capacity(panel.len());
        let mut zs = Vec::with_capacity(panel.len());
        for o in panel.observations() {
            ys.push(o.sales);
            zs.push(self.transformed_of(self.score(&o.features)?));
        }
        biascorr::fit_corrector(kind, &ys, &zs, &self.transform)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: FitModel = serde_json::from_str(s)?;
        if m.version != MODEL_FORMAT {
            return Err(Error::Config(format!("unsupported model format {:?}", m.version)));
        }
        check_compatible(&m.transform, &m.loss)?;
        m.bias_corrector.validate()?;
        let n = m.n_features();
        let bad = match &m.members {
            Members::Trees(ts) => ts.iter().any(|t| t.max_feature().is_some_and(|f| f >= n)),
            Members::Linear { coefficients, .. } => coefficients.len() != n,
        };
        if bad {
            return Err(Error::Config("model members do not match its feature list".into()));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
}

impl ResidualStats {
    pub fn of(xs: &[f64]) -> Self {
        ResidualStats {
            n: xs.len(),
            mean: mean(xs),
            variance: variance(xs),
        }
    }

    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub y_transformed: f64,
    pub pred_transformed: f64,
    pub y_raw: f64,
    pub pred_raw: f64,
}

/// Residuals `y − ŷ` in the fitted target's units and in raw sales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub transformed: ResidualStats,
    pub raw: ResidualStats,
    pub points: Vec<FitPoint>,
}

impl FitReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("y_transformed,pred_transformed,y_raw,pred_raw\n");
        for p in &self.points {
            s.push_str(&format!(
                "{},{},{},{}\n",
                fmt_sig(p.y_transformed),
                fmt_sig(p.pred_transformed),
                fmt_sig(p.y_raw),
                fmt_sig(p.pred_raw)
            ));
        }
        s
    }
}

pub fn in_sample_fit_report(model: &FitModel, panel: &SalesPanel) -> Result<FitReport> {
    if panel.is_empty() {
        return Err(Error::EmptyInput("fit report needs observations"));
    }
    let points = panel
        .observations()
        .iter()
        .map(|o| {
            let s = model.score(&o.features)?;
            Ok(FitPoint {
                y_transformed: forward(&model.transform, o.sales)?,
                pred_transformed: model.transformed_of(s),
                y_raw: o.sales,
                pred_raw: model.raw_of(s),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rt: Vec<f64> = points.iter().map(|p| p.y_transformed - p.pred_transformed).collect();
    let rr: Vec<f64> = points.iter().map(|p| p.y_raw - p.pred_raw).collect();
    Ok(FitReport {
        transformed: ResidualStats::of(&rt),
        raw: ResidualStats::of(&rr),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::SalesObservation;
    use chrono::NaiveDate;

    fn panel(rows: &[(f64, f64)]) -> SalesPanel {
        let d0 = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let obs = rows
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| SalesObservation {
                item_id: format!("i{i:03}"),
                day: d0,
                sales: y,
                features: vec![x],
            })
            .collect();
        SalesPanel::new(vec!["x".into()], obs).unwrap()
    }

    fn step_panel() -> SalesPanel {
        let rows: Vec<(f64, f64)> = (0..60)
            .map(|i| (i as f64, if i < 30 { 2.0 } else { 20.0 } + (i % 3) as f64))
            .collect();
        panel(&rows)
    }

    #[test]
    fn rounds_zero_predicts_weighted_mean() {
        let p = step_panel();
        let cfg = LearnerConfig {
            rounds: 0,
            ..Default::default()
        };
        let m = fit(
            &p,
            &TargetTransform::IDENTITY,
            &LossSpec::mse(),
            &WeightScheme::Unit,
            &cfg,
        )
        .unwrap();
        let ys: Vec<f64> = p.sales().collect();
        assert!((m.predict(&[7.0], true).unwrap() - mean(&ys)).abs() < 1e-12);
    }

    #[test]
    fn deviance_losses_need_identity_transform() {
        let e = fit(
            &step_panel(),
            &TargetTransform::log1p(),
            &LossSpec::tweedie(1.5),
            &WeightScheme::Unit,
            &LearnerConfig::default(),
        );
        assert!(matches!(e, Err(Error::Config(_))));
    }

    #[test]
    fn constant_target_is_degenerate() {
        let p = panel(&[(1.0, 3.0), (2.0, 3.0)]);
        let e = fit(
            &p,
            &TargetTransform::IDENTITY,
            &LossSpec::mse(),
            &WeightScheme::Unit,
            &LearnerConfig::default(),
        );
        assert!(matches!(e, Err(Error::DegenerateData(_))));
    }

    #[test]
    fn trees_learn_a_step() {
        let p = step_panel();
        let cfg = LearnerConfig {
            rounds: 100,
            learning_rate: 0.3,
            max_depth: 1,
            min_child_weight: 0.0,
            ..Default::default()
        };
        let m = fit(
            &p,
            &TargetTransform::IDENTITY,
            &LossSpec::mse(),
            &WeightScheme::Unit,
            &cfg,
        )
        .unwrap();
        assert!((m.predict(&[5.0], true).unwrap() - 3.0).abs() < 0.5);
        assert!((m.predict(&[50.0], true).unwrap() - 21.0).abs() < 0.5);
    }

    #[test]
    fn loss_trace_is_non_increasing() {
        let p = step_panel();
        for base in [BaseLearner::Tree, BaseLearner::Linear] {
            let cfg = LearnerConfig {
                base,
                rounds: 30,
                learning_rate: 1.0,
                l2_reg: 0.0,
                min_child_weight: 0.0,
                ..Default::default()
            };
            let (_, trace) = fit_traced(
                &p,
                &TargetTransform::IDENTITY,
                &LossSpec::tweedie(1.5),
                &WeightScheme::Unit,
                &cfg,
            )
            .unwrap();
            assert!(trace.windows(2).all(|w| w[1] <= w[0]), "{base:?}: {trace:?}");
            assert!(trace.last() < trace.first());
        }
    }

    #[test]
    fn linear_learner_fits_a_line() {
        let rows: Vec<(f64, f64)> = (0..50)
            .map(|i| (i as f64 / 10.0, 1.0 + 3.0 * i as f64 / 10.0))
            .collect();
        let cfg = LearnerConfig {
            base: BaseLearner::Linear,
            rounds: 300,
            l2_reg: 0.0,
            ..Default::default()
        };
        let m = fit(
            &panel(&rows),
            &TargetTransform::IDENTITY,
            &LossSpec::mse(),
            &WeightScheme::Unit,
            &cfg,
        )
        .unwrap();
        assert!((m.predict(&[2.0], true).unwrap() - 7.0).abs() < 1e-6);
    }

    #[test]
    fn raw_clamp_and_inverse() {
        let p = step_panel();
        let cfg = LearnerConfig {
            rounds: 0,
            ..Default::default()
        };
        let mut m = fit(
            &p,
            &TargetTransform::IDENTITY,
            &LossSpec::mse(),
            &WeightScheme::Unit,
            &cfg,
        )
        .unwrap();
        m.base_score = -5.0;
        assert_eq!(m.predict(&[1.0], true).unwrap(), 0.0);
        let m = fit(
            &p,
            &TargetTransform::log1p(),
            &LossSpec::mse(),
            &WeightScheme::Unit,
            &cfg,
        )
        .unwrap();
        let s = m.predict(&[1.0], false).unwrap();
        assert_eq!(m.predict(&[1.0], true).unwrap(), inverse(&TargetTransform::log1p(), s));
        assert!(matches!(m.predict(&[1.0, 2.0], true), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn json_round_trip() {
        let cfg = LearnerConfig {
            rounds: 5,
            ..Default::default()
        };
        let m = fit(
            &step_panel(),
            &TargetTransform::log1p(),
            &LossSpec::mse(),
            &WeightScheme::SqrtSales,
            &cfg,
        )
        .unwrap();
        let m = m.with_corrector(BiasCorrector::Smearing { bc: 1.1 }).unwrap();
        let back = FitModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(m.to_json().unwrap().contains("\"skewcast-model-v1\""));
        let bad = m.to_json().unwrap().replace("skewcast-model-v1", "v0");
        assert!(matches!(FitModel::from_json(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn subsampling_is_reproducible() {
        let cfg = LearnerConfig {
            rounds: 10,
            subsample: 0.5,
            seed: 9,
            min_child_weight: 0.0,
            ..Default::default()
        };
        let a = fit(
            &step_panel(),
            &TargetTransform::IDENTITY,
            &LossSpec::mse(),
            &WeightScheme::Unit,
            &cfg,
        )
        .unwrap();
        let b = fit(
            &step_panel(),
            &TargetTransform::IDENTITY,
            &LossSpec::mse(),
            &WeightScheme::Unit,
            &cfg,
        )
        .unwrap();
        assert_eq!(a, b);
    }
}
