//! Forecasting on skewed sales: measure the under-forecast introduced by
//! concave target transforms, correct it, or avoid it with Tweedie
//! regression.
//!
//! The crate is organized bottom-up:
//!
//! - [`domain`] and [`panel`]: the sales panel and its CSV format.
//! - [`transform`]: log/sqrt target transforms and the Jensen gap.
//! - [`loss`]: squared error, pseudo-Huber and the Tweedie deviance family.
//! - [`learner`]: Newton-boosted trees and a boosted linear model.
//! - [`biascorr`]: variance-based, smearing and prediction-binned correctors.
//! - [`metrics`]: WMAPE / WBias per forecast version and their aggregation.
//! - [`datagen`]: deterministic compound Poisson–Gamma sales panels.
//! - [`backtest`]: rolling-origin experiments over arms, weights and powers.

pub mod backtest;
pub mod biascorr;
pub mod datagen;
pub mod domain;
pub mod error;
pub mod learner;
pub mod loss;
pub mod metrics;
pub mod numeric;
pub mod numfmt;
pub mod panel;
pub mod parallel;
pub mod rng;
pub mod transform;

pub use domain::{
    ForecastVersion, Horizon, SalesObservation, SalesPanel, TargetTransform, TransformKind, WeightScheme,
};
pub use error::{Error, Result};
pub use loss::{Link, LossKind, LossSpec};
