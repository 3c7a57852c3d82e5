//! Forecast accuracy: WMAPE and WBias per forecast version, sales-weighted
//! aggregation across versions, and reporting relative to a baseline.
//!
//! For item `i` over the horizon days, `PE_i = (ΣF − ΣA)/ΣA`. A version's
//! WMAPE and WBias are the `ΣA`-weighted means of `|PE_i|` and `PE_i`.
//! Negative WBias means under-forecasting.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::domain::{ForecastVersion, Horizon};
use crate::error::{Error, Result};
use crate::numfmt::fmt_sig;

/// One item-day forecast with its realized actual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointForecast {
    pub item_id: String,
    pub day: NaiveDate,
    pub forecast: f64,
    pub actual: f64,
}

/// `(ΣF − ΣA)/ΣA` over the supplied horizon days.
pub fn percent_error(forecast_by_day: &[f64], actual_by_day: &[f64]) -> Result<f64> {
    if forecast_by_day.len() != actual_by_day.len() {
        return Err(Error::LengthMismatch {
            left: forecast_by_day.len(),
            right: actual_by_day.len(),
        });
    }
    let f: f64 = forecast_by_day.iter().sum();
    let a: f64 = actual_by_day.iter().sum();
    if !(a > 0.0) {
        return Err(Error::ZeroActual);
    }
    Ok((f - a) / a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionMetrics {
    pub version: ForecastVersion,
    pub wmape: f64,
    pub wbias: f64,
    /// `Σᵢ A_i`, the weight of this version in cross-version aggregation.
    pub total_actual: f64,
    pub n_items: usize,
    /// Items whose horizon actuals sum to zero; excluded from both sums.
    pub skipped_items: usize,
}

impl VersionMetrics {
    pub fn horizon(&self) -> Horizon {
        self.version.horizon
    }
}

/// Metrics of one version over the days in its forecast window. Records
/// outside the window are ignored.
pub fn version_metrics(points: &[PointForecast], version: &ForecastVersion) -> Result<VersionMetrics> {
    let mut per_item: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for p in points.iter().filter(|p| version.contains(p.day)) {
        let slot = per_item.entry(p.item_id.as_str()).or_default();
        slot.0.push(p.forecast);
        slot.1.push(p.actual);
    }
    let mut weighted_abs = 0.0;
    let mut weighted = 0.0;
    let mut total_actual = 0.0;
    let mut n_items = 0;
    let mut skipped_items = 0;
    for (f, a) in per_item.values() {
        let pe = match percent_error(f, a) {
            Ok(pe) => pe,
            Err(Error::ZeroActual) => {
                skipped_items += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let item_actual: f64 = a.iter().sum();
        weighted_abs += item_actual * pe.abs();
        weighted += item_actual * pe;
        total_actual += item_actual;
        n_items += 1;
    }
    if n_items == 0 {
        return Err(Error::NoValidItems);
    }
    Ok(VersionMetrics {
        version: version.clone(),
        wmape: weighted_abs / total_actual,
        wbias: weighted / total_actual,
        total_actual,
        n_items,
        skipped_items,
    })
}

/// Cross-version summary for one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonSummary {
    pub horizon: Horizon,
    pub wmape: f64,
    pub wbias: f64,
    pub total_actual: f64,
    pub n_versions: usize,
}

/// Sales-weighted average of each horizon's versions, ordered by horizon.
pub fn aggregate_versions(per_version: &[VersionMetrics]) -> Result<Vec<HorizonSummary>> {
    if per_version.is_empty() {
        return Err(Error::EmptyInput("aggregate_versions needs at least one version"));
    }
    let mut groups: BTreeMap<Horizon, Vec<&VersionMetrics>> = BTreeMap::new();
    for v in per_version {
        groups.entry(v.horizon()).or_default().push(v);
    }
    Ok(groups
        .into_iter()
        .map(|(horizon, vs)| {
            let total: f64 = vs.iter().map(|v| v.total_actual).sum();
            let wmape = vs.iter().map(|v| v.total_actual * v.wmape).sum::<f64>() / total;
            let wbias = vs.iter().map(|v| v.total_actual * v.wbias).sum::<f64>() / total;
            HorizonSummary {
                horizon,
                wmape,
                wbias,
                total_actual: total,
                n_versions: vs.len(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeMetrics {
    pub wmape_rel: f64,
    pub wbias_rel: f64,
    pub baseline_id: String,
}

/// `wmape / baseline.wmape` and `wbias / |baseline.wbias|`; the target keeps its sign.
pub fn relativize(target: &HorizonSummary, baseline: &HorizonSummary, baseline_id: &str) -> Result<RelativeMetrics> {
    if !(baseline.wmape > 0.0) || baseline.wbias == 0.0 || !baseline.wbias.is_finite() {
        return Err(Error::DegenerateBaseline);
    }
    Ok(RelativeMetrics {
        wmape_rel: target.wmape / baseline.wmape,
        wbias_rel: target.wbias / baseline.wbias.abs(),
        baseline_id: baseline_id.to_owned(),
    })
}

pub const METRICS_CSV_HEADER: &str = "config_id,version,horizon_weeks,wmape,wbias,total_actual,skipped_items";

/// Metric export CSV, one row per `(config_id, version)` in the order given.
pub fn metrics_csv<'a>(rows: impl IntoIterator<Item = (&'a str, &'a VersionMetrics)>) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for (config_id, m) in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            config_id,
            m.version.label,
            m.horizon().weeks(),
            fmt_sig(m.wmape),
            fmt_sig(m.wbias),
            fmt_sig(m.total_actual),
            m.skipped_items
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn origin() -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 1, 3).unwrap()
    }

    fn point(item: &str, day_offset: u64, forecast: f64, actual: f64) -> PointForecast {
        PointForecast {
            item_id: item.into(),
            day: origin() + chrono::Days::new(day_offset),
            forecast,
            actual,
        }
    }

    fn v6() -> ForecastVersion {
        ForecastVersion::new(origin(), Horizon::W6)
    }

    #[test]
    fn percent_error_examples() {
        assert!((percent_error(&[60.0, 50.0], &[50.0, 50.0]).unwrap() - 0.10).abs() < 1e-15);
        assert_eq!(percent_error(&[5.0, 5.0], &[5.0, 5.0]).unwrap(), 0.0);
        assert_eq!(percent_error(&[0.0, 0.0], &[50.0, 50.0]).unwrap(), -1.0);
        assert!(matches!(percent_error(&[1.0], &[0.0]), Err(Error::ZeroActual)));
    }

    #[test]
    fn two_item_version() {
        // item a: A=100, PE=+0.1; item b: A=300, PE=-0.2
        let pts = vec![point("a", 1, 110.0, 100.0), point("b", 2, 240.0, 300.0)];
        let m = version_metrics(&pts, &v6()).unwrap();
        assert!((m.wmape - 0.175).abs() < 1e-15);
        assert!((m.wbias - (-0.125)).abs() < 1e-15);
        assert_eq!(m.total_actual, 400.0);
    }

    #[test]
    fn single_item_and_perfect_versions() {
        let m = version_metrics(&[point("a", 1, 80.0, 100.0)], &v6()).unwrap();
        assert!((m.wmape - 0.2).abs() < 1e-15 && (m.wbias + 0.2).abs() < 1e-15);
        let m = version_metrics(&[point("a", 1, 7.0, 7.0), point("b", 3, 2.0, 2.0)], &v6()).unwrap();
        assert_eq!((m.wmape, m.wbias), (0.0, 0.0));
    }

    #[test]
    fn window_and_zero_actual_items() {
        let pts = vec![
            point("a", 0, 1000.0, 1.0), // origin day: outside window
            point("a", 1, 10.0, 10.0),
            point("a", 43, 1000.0, 1.0), // day 43 > 42: outside
            point("z", 5, 3.0, 0.0),
        ];
        let m = version_metrics(&pts, &v6()).unwrap();
        assert_eq!(m.wmape, 0.0);
        assert_eq!(m.skipped_items, 1);
        assert_eq!(m.n_items, 1);
        assert!(matches!(
            version_metrics(&[point("z", 5, 3.0, 0.0)], &v6()),
            Err(Error::NoValidItems)
        ));
    }

    fn vm(h: Horizon, wmape: f64, wbias: f64, total: f64) -> VersionMetrics {
        VersionMetrics {
            version: ForecastVersion::new(origin(), h),
            wmape,
            wbias,
            total_actual: total,
            n_items: 1,
            skipped_items: 0,
        }
    }

    #[test]
    fn aggregation() {
        let one = aggregate_versions(&[vm(Horizon::W6, 0.3, -0.1, 5.0)]).unwrap();
        assert_eq!((one[0].wmape, one[0].wbias), (0.3, -0.1));
        let two = aggregate_versions(&[vm(Horizon::W6, 0.1, -0.1, 5.0), vm(Horizon::W6, 0.3, 0.1, 5.0)]).unwrap();
        assert!((two[0].wmape - 0.2).abs() < 1e-15 && two[0].wbias.abs() < 1e-15);
        let w = aggregate_versions(&[vm(Horizon::W6, 0.1, 0.0, 1.0), vm(Horizon::W6, 0.2, 0.0, 3.0)]).unwrap();
        assert!((w[0].wmape - 0.175).abs() < 1e-15);
        let split = aggregate_versions(&[vm(Horizon::W24, 0.1, 0.0, 1.0), vm(Horizon::W6, 0.2, 0.0, 3.0)]).unwrap();
        assert_eq!(
            split.iter().map(|s| s.horizon).collect::<Vec<_>>(),
            vec![Horizon::W6, Horizon::W24]
        );
        assert!(matches!(aggregate_versions(&[]), Err(Error::EmptyInput(_))));
    }

    fn summary(wmape: f64, wbias: f64) -> HorizonSummary {
        HorizonSummary {
            horizon: Horizon::W6,
            wmape,
            wbias,
            total_actual: 1.0,
            n_versions: 1,
        }
    }

    #[test]
    fn relative_metrics() {
        let base = summary(0.6, -0.02);
        let r = relativize(&base, &base, "E5").unwrap();
        assert_eq!((r.wmape_rel, r.wbias_rel), (1.0, -1.0));
        let r = relativize(&summary(0.3, -0.04), &base, "E5").unwrap();
        assert_eq!(r.wmape_rel, 0.5);
        assert_eq!(r.wbias_rel, -2.0);
        assert!(matches!(
            relativize(&base, &summary(0.0, 0.1), "x"),
            Err(Error::DegenerateBaseline)
        ));
        assert!(matches!(
            relativize(&base, &summary(0.1, 0.0), "x"),
            Err(Error::DegenerateBaseline)
        ));
    }

    #[test]
    fn csv_export() {
        let m = vm(Horizon::W12, 0.25, -0.125, 400.0);
        let csv = metrics_csv([("E4", &m)]);
        assert_eq!(
            csv,
            "config_id,version,horizon_weeks,wmape,wbias,total_actual,skipped_items\nE4,VDP_20210103,12,0.25,-0.125,400,0\n"
        );
    }

    fn arb_points() -> impl Strategy<Value = Vec<PointForecast>> {
        proptest::collection::vec((0usize..6, 1u64..42, 0.0f64..100.0, 0.0f64..100.0), 1..60).prop_map(|rows| {
            rows.into_iter()
                .map(|(item, day, f, a)| point(&format!("i{item}"), day, f, a + 0.5))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn bias_bounded_by_wmape(pts in arb_points()) {
            let m = version_metrics(&pts, &v6()).unwrap();
            prop_assert!(m.wmape >= 0.0);
            prop_assert!(m.wbias.abs() <= m.wmape + 1e-12);
        }

        #[test]
        fn invariant_to_relabeling(pts in arb_points()) {
            let m = version_metrics(&pts, &v6()).unwrap();
            let relabeled: Vec<_> = pts
                .iter()
                .map(|p| {
                    // bijective relabeling that reverses the item order
                    let k: usize = p.item_id[1..].parse().unwrap();
                    PointForecast { item_id: format!("sku-{}", 5 - k), ..p.clone() }
                })
                .collect();
            let r = version_metrics(&relabeled, &v6()).unwrap();
            prop_assert!((m.wmape - r.wmape).abs() < 1e-12);
            prop_assert!((m.wbias - r.wbias).abs() < 1e-12);
        }

        #[test]
        fn scale_invariant(pts in arb_points(), c in 0.01f64..100.0) {
            let m = version_metrics(&pts, &v6()).unwrap();
            let scaled: Vec<_> = pts
                .iter()
                .map(|p| PointForecast { forecast: c * p.forecast, actual: c * p.actual, ..p.clone() })
                .collect();
            let s = version_metrics(&scaled, &v6()).unwrap();
            prop_assert!((m.wmape - s.wmape).abs() < 1e-12);
            prop_assert!((m.wbias - s.wbias).abs() < 1e-12);
        }

        #[test]
        fn aggregation_idempotent(wmape in 0.0f64..2.0, frac in -1.0f64..1.0, total in 0.1f64..1e6, copies in 1usize..10) {
            let v = vm(Horizon::W6, wmape, frac * wmape, total);
            let agg = aggregate_versions(&vec![v.clone(); copies]).unwrap();
            prop_assert!((agg[0].wmape - wmape).abs() <= 1e-12 * wmape.max(1.0));
            prop_assert!((agg[0].wbias - v.wbias).abs() <= 1e-12);
        }
    }
}
