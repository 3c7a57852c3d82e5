//! Synthetic sales panels with right-skewed daily sales.
//!
//! Each item has a lognormal popularity. On day `d` the expected number of
//! purchase events is
//!
//! ```text
//! λ = popularity · weekly[weekday] · spike[d] · price^elasticity
//! ```
//!
//! and sales are a compound Poisson–Gamma sum: `N ~ Poisson(λ)` events, each
//! contributing a `Gamma(shape, scale)` amount. That makes the generating
//! process an exact Tweedie with variance power `(shape + 2)/(shape + 1)`.

use chrono::{Datelike, Days, NaiveDate};
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{SalesObservation, SalesPanel};
use crate::error::{Error, Result};
use crate::rng::KeyedRng;

pub const FEATURE_NAMES: [&str; 4] = ["log_price", "weekly_index", "spike_flag", "popularity_proxy"];

// stream ids for the keyed RNG
const STREAM_POPULARITY: u64 = 1;
const STREAM_PROXY: u64 = 2;
const STREAM_PRICE: u64 = 3;
const STREAM_EVENTS: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub n_items: usize,
    pub n_days: usize,
    pub seed: u64,
    pub start_day: NaiveDate,
    /// `(μ, σ)` of log-popularity.
    pub base_rate_lognormal: (f64, f64),
    pub gamma_shape: f64,
    pub gamma_scale: f64,
    pub price_elasticity: f64,
    /// Std. dev. of the daily log-price random walk step.
    pub price_volatility: f64,
    /// Std. dev. of the noise added to log-popularity in the proxy feature.
    pub popularity_noise: f64,
    /// `(day offset, multiplier)`; repeated offsets multiply.
    pub spike_days: Vec<(u32, f64)>,
    /// Multipliers indexed Monday..Sunday.
    pub weekly_seasonality: [f64; 7],
}

impl Default for GenConfig {
    fn default() -> Self {
        let start_day = NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date");
        Self {
            n_items: 200,
            n_days: 950,
            seed: 20_190_101,
            start_day,
            base_rate_lognormal: (0.5, 0.4),
            gamma_shape: 1.0,
            gamma_scale: 8.0,
            price_elasticity: -1.5,
            price_volatility: 0.01,
            popularity_noise: 0.2,
            spike_days: yearly_spikes(start_day, 4),
            weekly_seasonality: [0.9, 0.85, 0.9, 0.95, 1.1, 1.3, 1.2],
        }
    }
}

/// Recurring retail peaks (a mid-July event, late-November event and the
/// Christmas run-up) for `years` years from `start`.
pub fn yearly_spikes(start: NaiveDate, years: i32) -> Vec<(u32, f64)> {
    let mut spikes = Vec::new();
    for k in 0..years {
        let year = start.year() + k;
        let mut push = |month: u32, day: u32, mult: f64| {
            if let Some(date) = NaiveDate::from_ymd_opt(year, month, day) {
                if date >= start {
                    spikes.push(((date - start).num_days() as u32, mult));
                }
            }
        };
        push(7, 15, 4.0);
        push(7, 16, 3.0);
        push(11, 27, 5.0);
        push(11, 28, 3.0);
        for day in 18..=23 {
            push(12, day, 2.0);
        }
    }
    spikes.sort_by_key(|s| s.0);
    spikes
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_items == 0 || self.n_days == 0 {
            return bad("n_items and n_days must be positive".into());
        }
        let (mu, sigma) = self.base_rate_lognormal;
        if !mu.is_finite() || !(sigma >= 0.0 && sigma.is_finite()) {
            return bad(format!("invalid popularity lognormal ({mu}, {sigma})"));
        }
        if !(self.gamma_shape > 0.0 && self.gamma_shape.is_finite()) {
            return bad(format!("gamma_shape must be > 0, got {}", self.gamma_shape));
        }
        if !(self.gamma_scale > 0.0 && self.gamma_scale.is_finite()) {
            return bad(format!("gamma_scale must be > 0, got {}", self.gamma_scale));
        }
        if !(self.price_elasticity <= 0.0) {
            return bad(format!("price_elasticity must be <= 0, got {}", self.price_elasticity));
        }
        if !(self.price_volatility >= 0.0) || !(self.popularity_noise >= 0.0) {
            return bad("price_volatility and popularity_noise must be >= 0".into());
        }
        if let Some(&(day, m)) = self.spike_days.iter().find(|(_, m)| !(*m >= 1.0 && m.is_finite())) {
            return bad(format!("spike multiplier at day {day} must be >= 1, got {m}"));
        }
        if self.weekly_seasonality.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return bad("weekly_seasonality multipliers must be > 0".into());
        }
        if self.start_day.checked_add_days(Days::new(self.n_days as u64)).is_none() {
            return bad("date range overflows".into());
        }
        Ok(())
    }

    /// Same config with `n_days` changed and the spike calendar extended to cover it.
    pub fn with_days(mut self, n_days: usize) -> Self {
        self.n_days = n_days;
        self.spike_days = yearly_spikes(self.start_day, (n_days / 365 + 1) as i32);
        self
    }

    fn spike_multipliers(&self) -> Vec<f64> {
        let mut mult = vec![1.0; self.n_days];
        for &(day, m) in &self.spike_days {
            if let Some(slot) = mult.get_mut(day as usize) {
                *slot *= m;
            }
        }
        mult
    }
}

/// Variance power of the generating process: `(α + 2)/(α + 1)` with `α = gamma_shape`.
pub fn theoretical_tweedie_power(cfg: &GenConfig) -> f64 {
    let a = cfg.gamma_shape;
    (a + 2.0) / (a + 1.0)
}

/// Expected sales per purchase event.
pub fn mean_event_size(cfg: &GenConfig) -> f64 {
    cfg.gamma_shape * cfg.gamma_scale
}

pub fn generate(cfg: &GenConfig) -> Result<SalesPanel> {
    cfg.validate()?;
    let spikes = cfg.spike_multipliers();
    let width = cfg.n_items.saturating_sub(1).to_string().len().max(4);

    let per_item: Vec<Vec<SalesObservation>> = (0..cfg.n_items)
        .into_par_iter()
        .map(|item| generate_item(cfg, item, width, &spikes))
        .collect::<Result<_>>()?;

    SalesPanel::new(
        FEATURE_NAMES.iter().map(|s| (*s).to_owned()).collect(),
        per_item.into_iter().flatten().collect(),
    )
}

fn normal(rng: &mut KeyedRng) -> f64 {
    StandardNormal.sample(rng)
}

fn generate_item(cfg: &GenConfig, item: usize, width: usize, spikes: &[f64]) -> Result<Vec<SalesObservation>> {
    let key = item as u64;
    let (mu, sigma) = cfg.base_rate_lognormal;
    let log_popularity = mu + sigma * normal(&mut KeyedRng::new(cfg.seed, &[key, STREAM_POPULARITY]));
    let popularity = log_popularity.exp();
    let proxy = log_popularity + cfg.popularity_noise * normal(&mut KeyedRng::new(cfg.seed, &[key, STREAM_PROXY]));
    let item_id = format!("item_{item:0width$}");

    let mut log_price = 0.1 * normal(&mut KeyedRng::new(cfg.seed, &[key, STREAM_PRICE, u64::MAX]));
    let mut out = Vec::with_capacity(cfg.n_days);
    for (d, &spike) in spikes.iter().enumerate().take(cfg.n_days) {
        let day = cfg.start_day + Days::new(d as u64);
        if d > 0 {
            log_price += cfg.price_volatility * normal(&mut KeyedRng::new(cfg.seed, &[key, STREAM_PRICE, d as u64]));
        }
        let weekly = cfg.weekly_seasonality[day.weekday().num_days_from_monday() as usize];
        let rate = popularity * weekly * spike * (cfg.price_elasticity * log_price).exp();

        let mut rng = KeyedRng::new(cfg.seed, &[key, STREAM_EVENTS, d as u64]);
        let sales = compound_poisson_gamma(rate, cfg.gamma_shape, cfg.gamma_scale, &mut rng)?;
        out.push(SalesObservation {
            item_id: item_id.clone(),
            day,
            sales,
            features: vec![log_price, weekly, if spike > 1.0 { 1.0 } else { 0.0 }, proxy],
        });
    }
    Ok(out)
}

/// One draw of `Σ_{k=1..N} Gamma(shape, scale)` with `N ~ Poisson(rate)`.
///
/// The sum of `N` iid gammas is drawn directly as `Gamma(N·shape, scale)`.
pub fn compound_poisson_gamma(rate: f64, shape: f64, scale: f64, rng: &mut KeyedRng) -> Result<f64> {
    if !(rate > 0.0) {
        return Ok(0.0);
    }
    let events: f64 = Poisson::new(rate)
        .map_err(|e| Error::Config(format!("poisson rate {rate}: {e}")))?
        .sample(rng);
    if events == 0.0 {
        return Ok(0.0);
    }
    let total = Gamma::new(events * shape, scale).map_err(|e| Error::Config(e.to_string()))?;
    Ok(total.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Moments;
    use crate::panel::panel_to_csv;

    #[test]
    fn zero_popularity_gives_zero_sales() {
        let cfg = GenConfig {
            n_items: 1,
            n_days: 1,
            base_rate_lognormal: (-1000.0, 0.0),
            ..GenConfig::default()
        };
        let p = generate(&cfg).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.observations()[0].sales, 0.0);
    }

    #[test]
    fn tweedie_power_of_generator() {
        let mut cfg = GenConfig {
            gamma_shape: 1.0,
            ..Default::default()
        };
        assert_eq!(theoretical_tweedie_power(&cfg), 1.5);
        cfg.gamma_shape = 1e9;
        assert!((theoretical_tweedie_power(&cfg) - 1.0).abs() < 1e-8);
        cfg.gamma_shape = 1e-9;
        assert!((theoretical_tweedie_power(&cfg) - 2.0).abs() < 1e-8);
    }

    #[test]
    fn default_panel_is_skewed_and_log_is_not() {
        let p = generate(&GenConfig::default()).unwrap();
        assert_eq!(p.len(), 200 * 950);
        let raw: Vec<f64> = p.sales().collect();
        let logged: Vec<f64> = raw.iter().map(|y| y.ln_1p()).collect();
        let raw_m = Moments::of(&raw);
        let log_m = Moments::of(&logged);
        assert!(raw_m.skewness > 2.0, "raw skewness {}", raw_m.skewness);
        assert!(log_m.skewness < 1.0, "log skewness {}", log_m.skewness);
        assert!(raw.iter().all(|&y| y >= 0.0));
        assert!(raw.contains(&0.0), "expected some zero-sales days");
    }

    #[test]
    fn spike_days_lift_sales() {
        let cfg = GenConfig {
            n_items: 300,
            n_days: 21,
            spike_days: vec![(10, 5.0)],
            ..GenConfig::default()
        };
        let p = generate(&cfg).unwrap();
        let day_mean = |offset: u64| {
            let day = cfg.start_day + Days::new(offset);
            let v: Vec<f64> = p
                .observations()
                .iter()
                .filter(|o| o.day == day)
                .map(|o| o.sales)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let adjacent = (day_mean(9) + day_mean(11)) / 2.0;
        assert!(day_mean(10) > 3.0 * adjacent, "{} vs {}", day_mean(10), adjacent);
    }

    #[test]
    fn generation_is_byte_identical() {
        let cfg = GenConfig {
            n_items: 20,
            n_days: 60,
            ..GenConfig::default()
        };
        let a = panel_to_csv(&generate(&cfg).unwrap());
        let b = panel_to_csv(&generate(&cfg).unwrap());
        assert_eq!(a, b);
        let other = panel_to_csv(&generate(&GenConfig { seed: 1, ..cfg }).unwrap());
        assert_ne!(a, other);
    }

    #[test]
    fn sampler_mean_converges() {
        let (rate, shape, scale) = (1.7, 2.0, 3.0);
        let n = 1_000_000u64;
        let mut total = 0.0;
        for i in 0..n {
            let mut rng = KeyedRng::new(99, &[i]);
            total += compound_poisson_gamma(rate, shape, scale, &mut rng).unwrap();
        }
        let mean = total / n as f64;
        let expected = rate * shape * scale;
        assert!((mean - expected).abs() / expected < 0.02, "{mean} vs {expected}");
    }

    #[test]
    fn invalid_configs() {
        assert!(generate(&GenConfig {
            n_items: 0,
            ..GenConfig::default()
        })
        .is_err());
        assert!(generate(&GenConfig {
            gamma_shape: 0.0,
            ..GenConfig::default()
        })
        .is_err());
        assert!(generate(&GenConfig {
            price_elasticity: 0.5,
            ..GenConfig::default()
        })
        .is_err());
        assert!(generate(&GenConfig {
            spike_days: vec![(3, 0.5)],
            ..GenConfig::default()
        })
        .is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = GenConfig::default();
        let s = serde_json::to_string(&cfg).unwrap();
        let back: GenConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(cfg, back);
        // every field is optional
        let partial: GenConfig = serde_json::from_str(r#"{"n_items": 3, "gamma_shape": 1.0}"#).unwrap();
        assert_eq!(partial.n_items, 3);
        assert_eq!(partial.n_days, 950);
    }
}
