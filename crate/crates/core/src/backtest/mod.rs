//! Rolling-origin backtests over experiment arms.
//!
//! Each forecast version trains on `[origin − window, origin)` and is scored
//! on `(origin, origin + 7h]` for every horizon `h`. Per-version metrics are
//! aggregated sales-weighted across versions and reported relative to a
//! baseline arm.

mod diagnostics;
mod trends;

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use diagnostics::{deviance_residual_report, signed_deviance_residual, DevianceResidualReport};
pub use trends::{run_power_sweep, run_weight_ladder, TrendKind, TrendRow, TrendTable, TrendVerdict};

use crate::biascorr::CorrectorKind;
use crate::datagen::{self, GenConfig};
use crate::domain::{ForecastVersion, Horizon, SalesObservation, SalesPanel, TargetTransform, WeightScheme};
use crate::error::{Error, Result};
use crate::learner::{self, LearnerConfig};
use crate::loss::LossSpec;
use crate::metrics::{self, HorizonSummary, PointForecast, RelativeMetrics, VersionMetrics};
use crate::numfmt::fmt_sig;
use crate::panel;
use crate::parallel;
use crate::rng::KeyedRng;

pub const DEFAULT_BASELINE: &str = "E5";
pub const TWEEDIE_POWERS: [f64; 5] = [1.1, 1.3, 1.5, 1.7, 1.9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentArm {
    pub id: String,
    pub transform: TargetTransform,
    pub loss: LossSpec,
    #[serde(default)]
    pub weight_scheme: WeightScheme,
    #[serde(default)]
    pub corrector: CorrectorKind,
}

impl ExperimentArm {
    pub fn new(
        id: impl Into<String>,
        transform: TargetTransform,
        loss: LossSpec,
        weight_scheme: WeightScheme,
        corrector: CorrectorKind,
    ) -> Self {
        ExperimentArm {
            id: id.into(),
            transform,
            loss,
            weight_scheme,
            corrector,
        }
    }

    /// Built-in arm by id: `E1`, `E2`, `E3-<p>`, `E4`, `E5`, `E4-S`, `E4-V`, `E4-PB`.
    pub fn standard(id: &str) -> Option<Self> {
        use CorrectorKind as C;
        let raw = TargetTransform::IDENTITY;
        let log = TargetTransform::log1p();
        let arm = |t, l, w, c| Some(ExperimentArm::new(id, t, l, w, c));
        match id {
            "E1" => arm(raw, LossSpec::mse(), WeightScheme::Unit, C::None),
            "E2" => arm(raw, LossSpec::pseudo_huber(1.0), WeightScheme::Unit, C::None),
            "E4" => arm(log, LossSpec::mse(), WeightScheme::Unit, C::None),
            "E5" => arm(log, LossSpec::mse(), WeightScheme::SqrtSales, C::None),
            "E4-S" => arm(log, LossSpec::mse(), WeightScheme::Unit, C::Smearing),
            "E4-V" => arm(log, LossSpec::mse(), WeightScheme::Unit, C::VarianceBased),
            "E4-PB" => arm(log, LossSpec::mse(), WeightScheme::Unit, C::PredictionBinned),
            _ => {
                let p: f64 = id.strip_prefix("E3-")?.parse().ok()?;
                let loss = LossSpec::tweedie(p);
                loss.validate().ok()?;
                arm(raw, loss, WeightScheme::Unit, C::None)
            }
        }
    }

    pub fn tweedie(power: f64) -> Self {
        ExperimentArm::new(
            format!("E3-{}", fmt_sig(power)),
            TargetTransform::IDENTITY,
            LossSpec::tweedie(power),
            WeightScheme::Unit,
            CorrectorKind::None,
        )
    }

    /// The five design choices plus the three bias-correction arms.
    pub fn grid() -> Vec<Self> {
        let mut arms = vec![Self::standard("E1").unwrap(), Self::standard("E2").unwrap()];
        arms.extend(TWEEDIE_POWERS.iter().map(|&p| Self::tweedie(p)));
        for id in ["E4", "E5", "E4-S", "E4-V", "E4-PB"] {
            arms.push(Self::standard(id).unwrap());
        }
        arms
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() || self.id.contains([',', '"', '\n']) {
            return Err(Error::Config(format!("invalid arm id {:?}", self.id)));
        }
        self.transform.validate()?;
        self.loss.validate()?;
        self.weight_scheme.validate()?;
        if self.loss.is_deviance_family() && self.transform != TargetTransform::IDENTITY {
            return Err(Error::Config(format!(
                "arm {}: {} needs the identity transform",
                self.id, self.loss
            )));
        }
        Ok(())
    }
}

/// An arm given either by built-in id or spelled out in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArmRef {
    Id(String),
    Arm(ExperimentArm),
}

impl ArmRef {
    pub fn resolve(&self) -> Result<ExperimentArm> {
        let arm = match self {
            ArmRef::Id(id) => {
                ExperimentArm::standard(id).ok_or_else(|| Error::Config(format!("unknown arm id {id:?}")))?
            }
            ArmRef::Arm(a) => a.clone(),
        };
        arm.validate()?;
        Ok(arm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PanelSource {
    Path(PathBuf),
    Generate(GenConfig),
}

impl PanelSource {
    pub fn load(&self) -> Result<SalesPanel> {
        match self {
            PanelSource::Path(p) => panel::read_panel(p),
            PanelSource::Generate(cfg) => datagen::generate(cfg),
        }
    }

    pub fn theoretical_power(&self) -> Option<f64> {
        match self {
            PanelSource::Path(_) => None,
            PanelSource::Generate(cfg) => Some(datagen::theoretical_tweedie_power(cfg)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestPlan {
    pub panel: PanelSource,
    pub train_window_days: u64,
    pub cadence_days: u64,
    pub n_versions: usize,
    pub horizons: Vec<Horizon>,
    pub arms: Vec<ArmRef>,
    pub baseline: String,
    pub learner: LearnerConfig,
    pub seed: u64,
    /// Worker cap; `SKEWCAST_THREADS` applies when unset.
    pub threads: Option<usize>,
}

impl Default for BacktestPlan {
    fn default() -> Self {
        BacktestPlan {
            panel: PanelSource::Generate(GenConfig::default()),
            train_window_days: 730,
            cadence_days: 7,
            n_versions: 8,
            horizons: Horizon::ALL.to_vec(),
            arms: ExperimentArm::grid().into_iter().map(|a| ArmRef::Id(a.id)).collect(),
            baseline: DEFAULT_BASELINE.to_string(),
            learner: LearnerConfig::default(),
            seed: 0,
            threads: None,
        }
    }
}

impl BacktestPlan {
    /// Read a JSON plan; a relative panel path resolves against the plan's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut plan: BacktestPlan = serde_json::from_str(&text)?;
        if let PanelSource::Path(p) = &mut plan.panel {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_window_days == 0 || self.cadence_days == 0 || self.n_versions == 0 {
            return Err(Error::Config(
                "train window, cadence and version count must be positive".into(),
            ));
        }
        if self.horizons.is_empty() {
            return Err(Error::Config("at least one horizon is required".into()));
        }
        let mut hs = self.horizons.clone();
        hs.sort();
        hs.dedup();
        if hs.len() != self.horizons.len() {
            return Err(Error::Config("horizons must be distinct".into()));
        }
        self.learner.validate()
    }

    fn resolved_arms(&self) -> Result<Vec<ExperimentArm>> {
        let arms = self.arms.iter().map(ArmRef::resolve).collect::<Result<Vec<_>>>()?;
        if arms.is_empty() {
            return Err(Error::Config("plan has no arms".into()));
        }
        for (i, a) in arms.iter().enumerate() {
            if arms[..i].iter().any(|b| b.id == a.id) {
                return Err(Error::Config(format!("duplicate arm id {:?}", a.id)));
            }
        }
        Ok(arms)
    }

    fn max_horizon(&self) -> Horizon {
        *self.horizons.iter().max().expect("validated non-empty")
    }

    /// Version origins, oldest first. The newest origin leaves room for
    /// the longest horizon; the oldest leaves room for a full training window.
    pub fn origins(&self, panel: &SalesPanel) -> Result<Vec<NaiveDate>> {
        self.validate()?;
        let (first, last) = panel
            .date_range()
            .ok_or_else(|| Error::InsufficientHistory("panel is empty".into()))?;
        let span =
            self.train_window_days + (self.n_versions as u64 - 1) * self.cadence_days + self.max_horizon().days();
        let have = (last - first).num_days() as u64;
        if have < span {
            return Err(Error::InsufficientHistory(format!(
                "plan needs {} days of history, panel covers {}",
                span + 1,
                have + 1
            )));
        }
        let newest = last - Days::new(self.max_horizon().days());
        Ok((0..self.n_versions)
            .map(|k| newest - Days::new((self.n_versions - 1 - k) as u64 * self.cadence_days))
            .collect())
    }
}

/// Produces raw-unit forecasts for one version.
pub trait Forecaster: Sync {
    fn id(&self) -> &str;
    fn forecast(&self, train: &SalesPanel, targets: &[SalesObservation], learner: &LearnerConfig) -> Result<Vec<f64>>;
}

impl Forecaster for ExperimentArm {
    fn id(&self) -> &str {
        &self.id
    }

    fn forecast(&self, train: &SalesPanel, targets: &[SalesObservation], cfg: &LearnerConfig) -> Result<Vec<f64>> {
        let model = learner::fit(train, &self.transform, &self.loss, &self.weight_scheme, cfg)?;
        let corrector = model.fit_corrector(self.corrector, train)?;
        let model = model.with_corrector(corrector)?;
        targets.iter().map(|o| model.forecast(&o.features)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmVersionMetrics {
    pub arm_id: String,
    pub metrics: VersionMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm_id: String,
    pub summary: HorizonSummary,
    /// Absent when the baseline's metrics cannot serve as a denominator.
    pub relative: Option<RelativeMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub baseline_id: String,
    pub versions: Vec<String>,
    pub horizons: Vec<Horizon>,
    pub theoretical_tweedie_power: Option<f64>,
    pub rows: Vec<ArmVersionMetrics>,
    pub summaries: Vec<ArmSummary>,
}

pub const SUMMARY_CSV_HEADER: &str = "config_id,horizon_weeks,wmape,wbias,total_actual,n_versions,wmape_rel,wbias_rel";

impl BacktestReport {
    pub fn metrics_csv(&self) -> String {
        metrics::metrics_csv(self.rows.iter().map(|r| (r.arm_id.as_str(), &r.metrics)))
    }

    pub fn summary_csv(&self) -> String {
        let mut out = format!("{SUMMARY_CSV_HEADER}\n");
        for s in &self.summaries {
            let (r1, r2) = match &s.relative {
                Some(r) => (fmt_sig(r.wmape_rel), fmt_sig(r.wbias_rel)),
                None => (String::new(), String::new()),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                s.arm_id,
                s.summary.horizon.weeks(),
                fmt_sig(s.summary.wmape),
                fmt_sig(s.summary.wbias),
                fmt_sig(s.summary.total_actual),
                s.summary.n_versions,
                r1,
                r2
            ));
        }
        out
    }

    pub fn summary(&self, arm_id: &str, horizon: Horizon) -> Option<&ArmSummary> {
        self.summaries
            .iter()
            .find(|s| s.arm_id == arm_id && s.summary.horizon == horizon)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `metrics.csv`, `summary.csv` and `report.json`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [
            ("metrics.csv", self.metrics_csv()),
            ("summary.csv", self.summary_csv()),
            ("report.json", self.to_json()?),
        ] {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

pub fn run_backtest(plan: &BacktestPlan) -> Result<BacktestReport> {
    let arms = plan.resolved_arms()?;
    let panel = plan.panel.load()?;
    let forecasters: Vec<&dyn Forecaster> = arms.iter().map(|a| a as &dyn Forecaster).collect();
    let mut report = run_backtest_with(plan, &panel, &forecasters)?;
    report.theoretical_tweedie_power = plan.panel.theoretical_power();
    Ok(report)
}

struct VersionData {
    origin: NaiveDate,
    train: SalesPanel,
    targets: Vec<SalesObservation>,
    learner: LearnerConfig,
}

/// Backtest arbitrary forecasters on an already loaded panel. The plan's
/// `arms` list is ignored; `baseline` must name one of `forecasters`.
pub fn run_backtest_with(
    plan: &BacktestPlan,
    panel: &SalesPanel,
    forecasters: &[&dyn Forecaster],
) -> Result<BacktestReport> {
    plan.validate()?;
    if forecasters.is_empty() {
        return Err(Error::Config("no arms to run".into()));
    }
    if !forecasters.iter().any(|f| f.id() == plan.baseline) {
        return Err(Error::Config(format!(
            "baseline arm {:?} is not in the plan",
            plan.baseline
        )));
    }
    let origins = plan.origins(panel)?;
    let max_h = plan.max_horizon().days();

    parallel::install(plan.threads, || {
        let versions: Vec<VersionData> = origins
            .iter()
            .enumerate()
            .map(|(k, &origin)| {
                let start = origin - Days::new(plan.train_window_days);
                let end = origin + Days::new(max_h);
                let train = panel.filter_days(|d| d >= start && d < origin);
                let targets = panel
                    .observations()
                    .iter()
                    .filter(|o| o.day > origin && o.day <= end)
                    .cloned()
                    .collect();
                let mut learner = plan.learner.clone();
                learner.seed = KeyedRng::new(plan.seed, &[k as u64]).next_u64();
                VersionData {
                    origin,
                    train,
                    targets,
                    learner,
                }
            })
            .collect();

        let jobs: Vec<(usize, usize)> = (0..forecasters.len())
            .flat_map(|a| (0..versions.len()).map(move |v| (a, v)))
            .collect();
        let results: Vec<Result<Vec<VersionMetrics>>> = jobs
            .par_iter()
            .map(|&(a, v)| run_job(forecasters[a], &versions[v], &plan.horizons))
            .collect();

        let mut rows = Vec::new();
        for (&(a, _), r) in jobs.iter().zip(results) {
            for m in r? {
                rows.push(ArmVersionMetrics {
                    arm_id: forecasters[a].id().to_string(),
                    metrics: m,
                });
            }
        }
        let summaries = summarize(&rows, forecasters, &plan.baseline)?;
        Ok(BacktestReport {
            baseline_id: plan.baseline.clone(),
            versions: versions
                .iter()
                .map(|v| crate::domain::version_label(v.origin))
                .collect(),
            horizons: plan.horizons.clone(),
            theoretical_tweedie_power: None,
            rows,
            summaries,
        })
    })?
}

fn run_job(f: &dyn Forecaster, v: &VersionData, horizons: &[Horizon]) -> Result<Vec<VersionMetrics>> {
    assert!(
        v.train.observations().iter().all(|o| o.day < v.origin),
        "training data leaks past the version origin"
    );
    let forecasts = f.forecast(&v.train, &v.targets, &v.learner)?;
    if forecasts.len() != v.targets.len() {
        return Err(Error::LengthMismatch {
            left: forecasts.len(),
            right: v.targets.len(),
        });
    }
    let points: Vec<PointForecast> = v
        .targets
        .iter()
        .zip(forecasts)
        .map(|(o, forecast)| PointForecast {
            item_id: o.item_id.clone(),
            day: o.day,
            forecast,
            actual: o.sales,
        })
        .collect();
    horizons
        .iter()
        .map(|&h| metrics::version_metrics(&points, &ForecastVersion::new(v.origin, h)))
        .collect()
}

fn summarize(rows: &[ArmVersionMetrics], forecasters: &[&dyn Forecaster], baseline: &str) -> Result<Vec<ArmSummary>> {
    let per_arm = |id: &str| -> Result<Vec<HorizonSummary>> {
        let ms: Vec<VersionMetrics> = rows
            .iter()
            .filter(|r| r.arm_id == id)
            .map(|r| r.metrics.clone())
            .collect();
        metrics::aggregate_versions(&ms)
    };
    let base = per_arm(baseline)?;
    let mut out = Vec::new();
    for f in forecasters {
        for s in per_arm(f.id())? {
            let relative = base
                .iter()
                .find(|b| b.horizon == s.horizon)
                .and_then(|b| metrics::relativize(&s, b, baseline).ok());
            out.push(ArmSummary {
                arm_id: f.id().to_string(),
                summary: s,
                relative,
            });
        }
    }
    Ok(out)
}
