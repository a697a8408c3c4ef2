//! Forecasting engine for hourly day-ahead electricity prices.
//!
//! The central model treats each of the 24 delivery hours as its own daily
//! series and regresses it on price lags, end-of-day power futures (day,
//! week, weekend and month products in base and peak variants), weekday
//! dummies and four seasonal spline curves. Coefficients are estimated by
//! coordinate-descent lasso with BIC penalty selection. On top of the
//! estimator sit a rolling-window backtest harness with Diebold-Mariano
//! model comparison and a residual-bootstrap path simulator for quantile
//! forecasts.

pub mod backtest;
pub mod calendar;
pub mod error;
pub mod features;
pub mod lasso;
pub mod market;
pub mod models;
pub mod simulate;
pub mod synth;

pub use backtest::{BacktestConfig, Dataset, DmResult, ErrorTensor, ModelKind, Window};
pub use calendar::{DateRange, HolidaySet, SeasonBasis};
pub use error::{Error, Result};
pub use features::{AlignedRow, DesignMatrix, FeatureColumn, FeatureSpec};
pub use lasso::{LassoConfig, LassoFit, PathResult, ScalingParams};
pub use market::{
    ExchangeCalendar, FilledFuturesBook, FuturesBook, PricePanel, Product, Variant,
};
pub use models::{Ar24Model, FutureModel, HowModel};
pub use simulate::{PathSet, QuantileFan, ResidualSampling, SimulationConfig};
pub use synth::SynthConfig;
