use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use skewcast::backtest::{self, ArmRef, BacktestPlan, ExperimentArm, TWEEDIE_POWERS};
use skewcast::datagen::{self, GenConfig};
use skewcast::learner::{self, LearnerConfig};
use skewcast::loss::{convexity_profile, LossSpec};
use skewcast::{panel, parallel, Error, Result, WeightScheme};

/// Transformation bias in skewed sales forecasting: generate panels, fit
/// models, run backtests.
#[derive(Parser)]
#[command(name = "skewcast", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic compound Poisson-Gamma sales panel.
    Gen {
        /// JSON generator config; omitted fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one arm on a whole panel and save the model as JSON.
    Fit {
        #[arg(long)]
        panel: PathBuf,
        /// Built-in arm id (E1, E2, E3-<p>, E4, E5, E4-S, E4-V, E4-PB), an arm
        /// JSON document, or a path to one.
        #[arg(long)]
        arm: String,
        #[arg(long)]
        model_out: PathBuf,
        /// JSON learner config; omitted fields take defaults.
        #[arg(long)]
        learner: Option<PathBuf>,
        /// Also write the in-sample (y, ŷ) CSV here.
        #[arg(long)]
        report_out: Option<PathBuf>,
    },
    /// Run every arm of a plan over rolling forecast versions.
    Backtest {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Log-target squared error under Unit, LogSales, SqrtSales and LinearSales weights.
    Ladder {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Raw-target Tweedie regression over a range of variance powers.
    Sweep {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Comma-separated, ascending.
        #[arg(long, value_delimiter = ',')]
        powers: Option<Vec<f64>>,
    },
    /// Deviance of several losses over a grid of predictions for one actual.
    Convexity {
        #[arg(long)]
        actual: f64,
        /// `start:stop:step`, inclusive.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn parse_arm(spec: &str) -> Result<ExperimentArm> {
    let text = spec.trim();
    let r = if text.starts_with('{') {
        ArmRef::Arm(serde_json::from_str(text)?)
    } else if Path::new(text).is_file() {
        read_json(Path::new(text))?
    } else {
        ArmRef::Id(text.to_string())
    };
    r.resolve()
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("bad grid {s:?}: {e}")))?;
    let [start, stop, step] = parts[..] else {
        return Err(Error::Config(format!("grid must be start:stop:step, got {s:?}")));
    };
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::Config(format!("grid {s:?} must ascend with a positive step")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { config, out } => {
            let cfg: GenConfig = match config {
                Some(p) => read_json(&p)?,
                None => GenConfig::default(),
            };
            let p = parallel::install(None, || datagen::generate(&cfg))??;
            panel::write_panel(&p, &out)
        }
        Command::Fit {
            panel: panel_path,
            arm,
            model_out,
            learner: learner_path,
            report_out,
        } => {
            let arm = parse_arm(&arm)?;
            let cfg: LearnerConfig = match learner_path {
                Some(p) => read_json(&p)?,
                None => LearnerConfig::default(),
            };
            let p = panel::read_panel(&panel_path)?;
            parallel::install(None, || -> Result<()> {
                let model = learner::fit(&p, &arm.transform, &arm.loss, &arm.weight_scheme, &cfg)?;
                let corrector = model.fit_corrector(arm.corrector, &p)?;
                let model = model.with_corrector(corrector)?;
                if let Some(path) = report_out {
                    write(&path, &learner::in_sample_fit_report(&model, &p)?.to_csv())?;
                }
                write(&model_out, &model.to_json()?)
            })?
        }
        Command::Backtest { plan, out_dir } => {
            let plan = BacktestPlan::from_file(&plan)?;
            backtest::run_backtest(&plan)?.write_to(&out_dir)
        }
        Command::Ladder { plan, out_dir } => {
            let plan = BacktestPlan::from_file(&plan)?;
            let schemes = [
                WeightScheme::Unit,
                WeightScheme::LogSales,
                WeightScheme::SqrtSales,
                WeightScheme::LinearSales,
            ];
            backtest::run_weight_ladder(&plan, &schemes)?.write_to(&out_dir)
        }
        Command::Sweep { plan, out_dir, powers } => {
            let plan = BacktestPlan::from_file(&plan)?;
            let powers = powers.unwrap_or_else(|| TWEEDIE_POWERS.to_vec());
            backtest::run_power_sweep(&plan, &powers)?.write_to(&out_dir)
        }
        Command::Convexity { actual, grid, out } => {
            let specs = [
                LossSpec::tweedie(1.1),
                LossSpec::tweedie(1.5),
                LossSpec::tweedie(1.9),
                LossSpec::mse(),
                LossSpec::pseudo_huber(1.0),
            ];
            let table = convexity_profile(&specs, actual, &parse_grid(&grid)?)?;
            write(&out, &table.to_csv())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("skewcast: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
