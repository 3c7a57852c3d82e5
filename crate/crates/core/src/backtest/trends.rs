//! Weight-ladder and Tweedie power-sweep trend tables.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{run_backtest_with, BacktestPlan, ExperimentArm, Forecaster};
use crate::biascorr::CorrectorKind;
use crate::domain::{Horizon, TargetTransform, WeightScheme};
use crate::error::{Error, Result};
use crate::loss::LossSpec;
use crate::numfmt::fmt_sig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendKind {
    /// wbias should rise (toward zero) as weights grow more aggressive.
    WeightLadder,
    /// wbias should not rise as the variance power grows.
    PowerSweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub label: String,
    pub horizon: Horizon,
    pub wmape: f64,
    pub wbias: f64,
    pub total_actual: f64,
    pub n_versions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendVerdict {
    pub horizon: Horizon,
    /// Adjacent steps that go against the expected direction.
    pub inversions: usize,
    pub holds: bool,
    /// Label with the lowest wmape at this horizon.
    pub best_wmape: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendTable {
    pub kind: TrendKind,
    pub labels: Vec<String>,
    pub rows: Vec<TrendRow>,
    pub verdicts: Vec<TrendVerdict>,
    pub theoretical_tweedie_power: Option<f64>,
}

/// Trends tolerate this many adjacent inversions.
pub const MAX_INVERSIONS: usize = 1;

impl TrendTable {
    pub fn to_csv(&self) -> String {
        let key = match self.kind {
            TrendKind::WeightLadder => "scheme",
            TrendKind::PowerSweep => "power",
        };
        let mut out = format!("{key},horizon_weeks,wmape,wbias,total_actual,n_versions\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.label,
                r.horizon.weeks(),
                fmt_sig(r.wmape),
                fmt_sig(r.wbias),
                fmt_sig(r.total_actual),
                r.n_versions
            ));
        }
        out
    }

    pub fn holds(&self) -> bool {
        self.verdicts.iter().all(|v| v.holds)
    }

    pub fn rows_for(&self, horizon: Horizon) -> Vec<&TrendRow> {
        self.labels
            .iter()
            .filter_map(|l| self.rows.iter().find(|r| &r.label == l && r.horizon == horizon))
            .collect()
    }

    /// Writes `trend.csv` and `trend.json`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [
            ("trend.csv", self.to_csv()),
            ("trend.json", serde_json::to_string_pretty(self)?),
        ] {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

fn count_inversions(wbias: &[f64], kind: TrendKind) -> usize {
    wbias
        .windows(2)
        .filter(|w| match kind {
            TrendKind::WeightLadder => !(w[1] > w[0]),
            TrendKind::PowerSweep => w[1] > w[0],
        })
        .count()
}

fn run_trend(plan: &BacktestPlan, kind: TrendKind, arms: Vec<(String, ExperimentArm)>) -> Result<TrendTable> {
    let panel = plan.panel.load()?;
    let forecasters: Vec<&dyn Forecaster> = arms.iter().map(|(_, a)| a as &dyn Forecaster).collect();
    let mut plan = plan.clone();
    plan.baseline = arms[0].1.id.clone();
    let report = run_backtest_with(&plan, &panel, &forecasters)?;

    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    for &h in &plan.horizons {
        let mut wbias = Vec::new();
        let mut best: Option<(f64, &str)> = None;
        for (label, arm) in &arms {
            let s = &report
                .summary(&arm.id, h)
                .expect("every arm is summarized at every horizon")
                .summary;
            wbias.push(s.wbias);
            if best.is_none_or(|(w, _)| s.wmape < w) {
                best = Some((s.wmape, label));
            }
            rows.push(TrendRow {
                label: label.clone(),
                horizon: h,
                wmape: s.wmape,
                wbias: s.wbias,
                total_actual: s.total_actual,
                n_versions: s.n_versions,
            });
        }
        let inversions = count_inversions(&wbias, kind);
        verdicts.push(TrendVerdict {
            horizon: h,
            inversions,
            holds: inversions <= MAX_INVERSIONS,
            best_wmape: best.map(|(_, l)| l.to_string()).unwrap_or_default(),
        });
    }
    Ok(TrendTable {
        kind,
        labels: arms.into_iter().map(|(l, _)| l).collect(),
        rows,
        verdicts,
        theoretical_tweedie_power: plan.panel.theoretical_power(),
    })
}

/// Log-target squared-error arms under increasingly aggressive weights,
/// in the order given.
pub fn run_weight_ladder(plan: &BacktestPlan, schemes: &[WeightScheme]) -> Result<TrendTable> {
    if schemes.len() < 2 {
        return Err(Error::Config("a weight ladder needs at least two schemes".into()));
    }
    let arms = schemes
        .iter()
        .map(|s| {
            let arm = ExperimentArm::new(
                format!("W-{s}"),
                TargetTransform::log1p(),
                LossSpec::mse(),
                *s,
                CorrectorKind::None,
            );
            arm.validate()?;
            Ok((s.to_string(), arm))
        })
        .collect::<Result<Vec<_>>>()?;
    run_trend(plan, TrendKind::WeightLadder, arms)
}

/// Raw-target Tweedie arms over ascending variance powers.
pub fn run_power_sweep(plan: &BacktestPlan, powers: &[f64]) -> Result<TrendTable> {
    if powers.len() < 2 {
        return Err(Error::Config("a power sweep needs at least two powers".into()));
    }
    if powers.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("sweep powers must be strictly ascending".into()));
    }
    let arms = powers
        .iter()
        .map(|&p| {
            let arm = ExperimentArm::tweedie(p);
            arm.validate()?;
            Ok((fmt_sig(p), arm))
        })
        .collect::<Result<Vec<_>>>()?;
    run_trend(plan, TrendKind::PowerSweep, arms)
}
