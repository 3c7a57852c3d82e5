//! Shared data model: observations, panels, target transforms, weight
//! schemes and forecast versions.

use std::collections::HashSet;
use std::fmt;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One item on one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalesObservation {
    pub item_id: String,
    pub day: NaiveDate,
    pub sales: f64,
    pub features: Vec<f64>,
}

/// Item × day observations sharing one feature layout.
///
/// Observations are kept in canonical order (item id, then day ascending),
/// and `(item_id, day)` keys are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct SalesPanel {
    observations: Vec<SalesObservation>,
    feature_names: Vec<String>,
    date_range: Option<(NaiveDate, NaiveDate)>,
}

impl SalesPanel {
    pub fn new(feature_names: Vec<String>, mut observations: Vec<SalesObservation>) -> Result<Self> {
        for (i, obs) in observations.iter().enumerate() {
            if !(obs.sales >= 0.0) || !obs.sales.is_finite() {
                return Err(Error::Domain(format!(
                    "observation {i} ({}, {}) has invalid sales {}",
                    obs.item_id, obs.day, obs.sales
                )));
            }
            if obs.features.len() != feature_names.len() {
                return Err(Error::ShapeMismatch {
                    expected: feature_names.len(),
                    got: obs.features.len(),
                });
            }
        }
        observations.sort_by(|a, b| a.item_id.cmp(&b.item_id).then(a.day.cmp(&b.day)));
        for pair in observations.windows(2) {
            if pair[0].item_id == pair[1].item_id && pair[0].day == pair[1].day {
                return Err(Error::DuplicateKey {
                    item: pair[0].item_id.clone(),
                    day: pair[0].day,
                });
            }
        }
        let date_range = observations
            .iter()
            .fold(None, |acc: Option<(NaiveDate, NaiveDate)>, o| {
                Some(match acc {
                    None => (o.day, o.day),
                    Some((lo, hi)) => (lo.min(o.day), hi.max(o.day)),
                })
            });
        Ok(Self {
            observations,
            feature_names,
            date_range,
        })
    }

    pub fn observations(&self) -> &[SalesObservation] {
        &self.observations
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// First and last day present, `None` for an empty panel.
    pub fn date_range(&self) -> Option<(NaiveDate, NaiveDate)> {
        self.date_range
    }

    pub fn sales(&self) -> impl Iterator<Item = f64> + '_ {
        self.observations.iter().map(|o| o.sales)
    }

    /// Distinct item ids in ascending order.
    pub fn item_ids(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        let mut ids: Vec<&str> = self
            .observations
            .iter()
            .filter(|o| seen.insert(o.item_id.as_str()))
            .map(|o| o.item_id.as_str())
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Sub-panel of the observations whose day satisfies `keep`.
    pub fn filter_days(&self, mut keep: impl FnMut(NaiveDate) -> bool) -> SalesPanel {
        let observations: Vec<_> = self.observations.iter().filter(|o| keep(o.day)).cloned().collect();
        // already canonical and unique
        let date_range = observations
            .iter()
            .fold(None, |acc: Option<(NaiveDate, NaiveDate)>, o| {
                Some(match acc {
                    None => (o.day, o.day),
                    Some((lo, hi)) => (lo.min(o.day), hi.max(o.day)),
                })
            });
        SalesPanel {
            observations,
            feature_names: self.feature_names.clone(),
            date_range,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Identity,
    Log,
    Sqrt,
}

/// Transformation applied to raw sales before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetTransform {
    pub kind: TransformKind,
    /// Added to sales before taking the log. Ignored for other kinds.
    #[serde(default = "default_offset")]
    pub offset: f64,
}

fn default_offset() -> f64 {
    1.0
}

impl TargetTransform {
    pub const IDENTITY: TargetTransform = TargetTransform {
        kind: TransformKind::Identity,
        offset: 1.0,
    };
    pub const SQRT: TargetTransform = TargetTransform {
        kind: TransformKind::Sqrt,
        offset: 1.0,
    };

    /// `log(1 + sales)`.
    pub fn log1p() -> Self {
        Self::log(1.0)
    }

    pub fn log(offset: f64) -> Self {
        Self {
            kind: TransformKind::Log,
            offset,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == TransformKind::Log && !(self.offset >= 0.0 && self.offset.is_finite()) {
            return Err(Error::Config(format!(
                "log offset must be finite and >= 0, got {}",
                self.offset
            )));
        }
        Ok(())
    }
}

impl Default for TargetTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl fmt::Display for TargetTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TransformKind::Identity => write!(f, "identity"),
            TransformKind::Log => write!(f, "log(y+{})", self.offset),
            TransformKind::Sqrt => write!(f, "sqrt"),
        }
    }
}

/// Per-sample weight as a function of raw sales.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightScheme {
    #[default]
    Unit,
    LogSales,
    SqrtSales,
    LinearSales,
    Power {
        alpha: f64,
    },
}

impl WeightScheme {
    pub fn validate(&self) -> Result<()> {
        match self {
            WeightScheme::Power { alpha } if !(alpha.is_finite() && *alpha >= 0.0) => Err(Error::Config(format!(
                "weight power must be finite and >= 0, got {alpha}"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightScheme::Unit => write!(f, "unit"),
            WeightScheme::LogSales => write!(f, "log_sales"),
            WeightScheme::SqrtSales => write!(f, "sqrt_sales"),
            WeightScheme::LinearSales => write!(f, "sales"),
            WeightScheme::Power { alpha } => write!(f, "sales^{alpha}"),
        }
    }
}

/// Evaluation horizon in weeks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Horizon {
    W6,
    W12,
    W24,
}

impl Horizon {
    pub const ALL: [Horizon; 3] = [Horizon::W6, Horizon::W12, Horizon::W24];

    pub fn weeks(self) -> u32 {
        match self {
            Horizon::W6 => 6,
            Horizon::W12 => 12,
            Horizon::W24 => 24,
        }
    }

    pub fn days(self) -> u64 {
        7 * u64::from(self.weeks())
    }
}

impl TryFrom<u32> for Horizon {
    type Error = String;

    fn try_from(weeks: u32) -> std::result::Result<Self, String> {
        match weeks {
            6 => Ok(Horizon::W6),
            12 => Ok(Horizon::W12),
            24 => Ok(Horizon::W24),
            other => Err(format!("horizon must be 6, 12 or 24 weeks, got {other}")),
        }
    }
}

impl From<Horizon> for u32 {
    fn from(h: Horizon) -> u32 {
        h.weeks()
    }
}

/// A forecast issued at `origin_day`, evaluated over `horizon`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForecastVersion {
    pub label: String,
    pub origin_day: NaiveDate,
    pub horizon: Horizon,
}

impl ForecastVersion {
    pub fn new(origin_day: NaiveDate, horizon: Horizon) -> Self {
        Self {
            label: version_label(origin_day),
            origin_day,
            horizon,
        }
    }

    /// Last day of the forecast window; the window is `(origin_day, end]`.
    pub fn window_end(&self) -> NaiveDate {
        self.origin_day + Days::new(self.horizon.days())
    }

    pub fn contains(&self, day: NaiveDate) -> bool {
        day > self.origin_day && day <= self.window_end()
    }
}

/// `VDP_YYYYMMDD` label for a forecast origin.
pub fn version_label(origin_day: NaiveDate) -> String {
    format!("VDP_{}", origin_day.format("%Y%m%d"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(item: &str, day: &str, sales: f64) -> SalesObservation {
        SalesObservation {
            item_id: item.into(),
            day: day.parse().unwrap(),
            sales,
            features: vec![1.0],
        }
    }

    #[test]
    fn panel_is_canonically_ordered() {
        let p = SalesPanel::new(
            vec!["f".into()],
            vec![
                obs("b", "2020-01-02", 1.0),
                obs("a", "2020-01-03", 2.0),
                obs("a", "2020-01-01", 3.0),
            ],
        )
        .unwrap();
        let keys: Vec<_> = p
            .observations()
            .iter()
            .map(|o| (o.item_id.as_str(), o.day.to_string()))
            .collect();
        assert_eq!(
            keys,
            vec![
                ("a", "2020-01-01".into()),
                ("a", "2020-01-03".into()),
                ("b", "2020-01-02".into())
            ]
        );
        assert_eq!(p.date_range().unwrap().0.to_string(), "2020-01-01");
        assert_eq!(p.date_range().unwrap().1.to_string(), "2020-01-03");
        assert_eq!(p.item_ids(), vec!["a", "b"]);
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let err = SalesPanel::new(
            vec!["f".into()],
            vec![obs("a", "2020-01-01", 1.0), obs("a", "2020-01-01", 2.0)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateKey { .. }));
    }

    #[test]
    fn negative_sales_and_ragged_features_are_rejected() {
        assert!(SalesPanel::new(vec!["f".into()], vec![obs("a", "2020-01-01", -1.0)]).is_err());
        let mut o = obs("a", "2020-01-01", 1.0);
        o.features.push(2.0);
        assert!(matches!(
            SalesPanel::new(vec!["f".into()], vec![o]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn version_label_and_window() {
        let v = ForecastVersion::new("2021-03-07".parse().unwrap(), Horizon::W6);
        assert_eq!(v.label, "VDP_20210307");
        assert_eq!(v.window_end().to_string(), "2021-04-18");
        assert!(!v.contains(v.origin_day));
        assert!(v.contains("2021-03-08".parse().unwrap()));
        assert!(v.contains("2021-04-18".parse().unwrap()));
        assert!(!v.contains("2021-04-19".parse().unwrap()));
    }

    #[test]
    fn horizon_serde() {
        assert_eq!(serde_json::to_string(&Horizon::W12).unwrap(), "12");
        assert!(serde_json::from_str::<Horizon>("7").is_err());
    }
}
