//! Rolling-window out-of-sample study: window scheduling, error tensor
//! collection, MAE/MMAE metrics and the multivariate Diebold-Mariano test
//! on daily L1 losses.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{Days, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calendar::{DateRange, HolidaySet};
use crate::error::{Error, Result};
use crate::features::FeatureColumn;
use crate::lasso::LassoConfig;
use crate::market::{FilledFuturesBook, PricePanel};
use crate::models::{
    fit_ar24, fit_future_model, fit_how, forecast_ar24, forecast_future_model, forecast_how,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Future,
    Ar24,
    ArHow,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Future => "future",
            ModelKind::Ar24 => "ar24",
            ModelKind::ArHow => "ar_how",
        }
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "future" => Ok(ModelKind::Future),
            "ar24" => Ok(ModelKind::Ar24),
            "ar_how" => Ok(ModelKind::ArHow),
            other => Err(format!("unknown model {other:?} (expected future, ar24, ar_how)")),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Market inputs shared by every window.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub panel: PricePanel,
    pub book: FilledFuturesBook,
    pub holidays: HolidaySet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BacktestConfig {
    /// In-sample length per window, in days.
    pub window_length: usize,
    pub num_windows: usize,
    /// Forecast horizon per window, in days.
    pub horizon_days: usize,
    /// Last in-sample day of the first window; derived from the data
    /// extent when absent.
    pub first_origin: Option<NaiveDate>,
    pub models: Vec<ModelKind>,
    pub lasso: LassoConfig,
    /// The run aborts when more than this fraction of windows fails.
    pub max_skipped_fraction: f64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        BacktestConfig {
            window_length: 365,
            num_windows: 30,
            horizon_days: 28,
            first_origin: None,
            models: vec![ModelKind::Future, ModelKind::Ar24],
            lasso: LassoConfig::default(),
            max_skipped_fraction: 0.05,
        }
    }
}

/// One rolling window: train on `train`, forecast `eval`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    /// 1-based shift index.
    pub index: usize,
    pub train: DateRange,
    pub origin: NaiveDate,
    pub eval: DateRange,
}

/// Window n trains on `[D - window_length + n, D - 1 + n]` and forecasts
/// the following `horizon_days` days, the whole schedule shifting one day
/// per window.
pub fn schedule_windows(config: &BacktestConfig, data_extent: DateRange) -> Result<Vec<Window>> {
    if config.window_length < 8 {
        return Err(Error::domain(
            "window_length must be at least 8 days (7 lag days plus one row)",
        ));
    }
    if config.num_windows == 0 || config.horizon_days == 0 {
        return Err(Error::domain("need at least one window and one horizon day"));
    }
    let first_origin = match config.first_origin {
        Some(d) => d,
        None => data_extent.start + Days::new(config.window_length as u64 - 1),
    };
    let need_start = first_origin - Days::new(config.window_length as u64 - 1);
    let need_end = first_origin
        + Days::new(config.num_windows as u64 - 1)
        + Days::new(config.horizon_days as u64);
    if need_start < data_extent.start || need_end > data_extent.end {
        return Err(Error::domain(format!(
            "data {}..{} too short for the schedule: needs {}..{} \
             ({} windows of {} days plus {}-day horizon)",
            data_extent.start,
            data_extent.end,
            need_start,
            need_end,
            config.num_windows,
            config.window_length,
            config.horizon_days
        )));
    }
    let mut windows = Vec::with_capacity(config.num_windows);
    for n in 1..=config.num_windows {
        let origin = first_origin + Days::new(n as u64 - 1);
        let train = DateRange::new(origin - Days::new(config.window_length as u64 - 1), origin)?;
        let eval = DateRange::new(
            origin + Days::new(1),
            origin + Days::new(config.horizon_days as u64),
        )?;
        windows.push(Window {
            index: n,
            train,
            origin,
            eval,
        });
    }
    Ok(windows)
}

/// Forecast errors (forecast minus actual) indexed by horizon day, hour
/// and window; NaN marks skipped windows.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTensor {
    pub horizon_days: usize,
    pub num_windows: usize,
    values: Vec<f64>,
}

impl ErrorTensor {
    pub fn new(horizon_days: usize, num_windows: usize) -> Self {
        ErrorTensor {
            horizon_days,
            num_windows,
            values: vec![f64::NAN; horizon_days * 24 * num_windows],
        }
    }

    fn offset(&self, c_idx: usize, hour_idx: usize, window_idx: usize) -> usize {
        debug_assert!(c_idx < self.horizon_days && hour_idx < 24 && window_idx < self.num_windows);
        (c_idx * 24 + hour_idx) * self.num_windows + window_idx
    }

    pub fn get(&self, c_idx: usize, hour_idx: usize, window_idx: usize) -> f64 {
        self.values[self.offset(c_idx, hour_idx, window_idx)]
    }

    pub fn set(&mut self, c_idx: usize, hour_idx: usize, window_idx: usize, value: f64) {
        let i = self.offset(c_idx, hour_idx, window_idx);
        self.values[i] = value;
    }

    pub fn nan_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }
}

/// `MAE[c][h] = mean_n |error|`, NaN cells excluded.
pub fn mae_ch(tensor: &ErrorTensor) -> Vec<[f64; 24]> {
    (0..tensor.horizon_days)
        .map(|c| {
            std::array::from_fn(|h| {
                let mut acc = 0.0;
                let mut used = 0usize;
                for n in 0..tensor.num_windows {
                    let v = tensor.get(c, h, n);
                    if !v.is_nan() {
                        acc += v.abs();
                        used += 1;
                    }
                }
                if used == 0 {
                    f64::NAN
                } else {
                    acc / used as f64
                }
            })
        })
        .collect()
}

/// Hourly flattening `k = 24 (c - 1) + h`, k = 1..horizon*24.
pub fn mae_k(tensor: &ErrorTensor) -> Vec<f64> {
    mae_ch(tensor).into_iter().flatten().collect()
}

/// Cumulative mean of `MAE_k` over the first `k_max` horizon hours.
pub fn mmae(tensor: &ErrorTensor, k_max: usize) -> Result<f64> {
    let flat = mae_k(tensor);
    if k_max == 0 || k_max > flat.len() {
        return Err(Error::domain(format!(
            "K = {k_max} outside 1..={}",
            flat.len()
        )));
    }
    Ok(flat[..k_max].iter().sum::<f64>() / k_max as f64)
}

/// Diebold-Mariano comparison at one horizon day.
#[derive(Debug, Clone, PartialEq)]
pub struct DmResult {
    /// 1-based horizon day.
    pub horizon_day: usize,
    pub mean_diff: f64,
    pub std_error: f64,
    /// Undefined when degenerate.
    pub dm: Option<f64>,
    pub p_two_sided: f64,
    pub p_one_sided: f64,
    pub degenerate: bool,
    /// Windows where both tensors held values.
    pub n_used: usize,
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// DM test on the L1 norms of the daily error vectors:
/// `L_{c,n} = sum_h |e_{c,h,n}|`, `Delta_n = L^A - L^B`, statistic
/// `mean(Delta) / (sd(Delta)/sqrt(N))`, asymptotically standard normal.
/// Negative values favor model A.
pub fn dm_test(a: &ErrorTensor, b: &ErrorTensor, horizon_day: usize) -> Result<DmResult> {
    if a.num_windows != b.num_windows {
        return Err(Error::domain(format!(
            "window counts differ: {} vs {}",
            a.num_windows, b.num_windows
        )));
    }
    if horizon_day == 0 || horizon_day > a.horizon_days || horizon_day > b.horizon_days {
        return Err(Error::domain(format!("horizon day {horizon_day} out of range")));
    }
    let c = horizon_day - 1;
    let mut deltas = Vec::with_capacity(a.num_windows);
    for n in 0..a.num_windows {
        let mut la = 0.0;
        let mut lb = 0.0;
        let mut valid = true;
        for h in 0..24 {
            let va = a.get(c, h, n);
            let vb = b.get(c, h, n);
            if va.is_nan() || vb.is_nan() {
                valid = false;
                break;
            }
            la += va.abs();
            lb += vb.abs();
        }
        if valid {
            deltas.push(la - lb);
        }
    }
    let n_used = deltas.len();
    if n_used < 2 {
        return Err(Error::domain(format!(
            "DM test needs at least 2 windows, got {n_used}"
        )));
    }
    let mean = deltas.iter().sum::<f64>() / n_used as f64;
    let ss: f64 = deltas.iter().map(|d| (d - mean) * (d - mean)).sum();
    let sd = (ss / (n_used - 1) as f64).sqrt();
    let degenerate = deltas.iter().all(|&d| d == deltas[0]);
    if degenerate || sd == 0.0 {
        return Ok(DmResult {
            horizon_day,
            mean_diff: mean,
            std_error: 0.0,
            dm: None,
            p_two_sided: 1.0,
            p_one_sided: 0.5,
            degenerate: true,
            n_used,
        });
    }
    let std_error = sd / (n_used as f64).sqrt();
    let dm = mean / std_error;
    Ok(DmResult {
        horizon_day,
        mean_diff: mean,
        std_error,
        dm: Some(dm),
        p_two_sided: 2.0 * (1.0 - normal_cdf(dm.abs())),
        p_one_sided: normal_cdf(dm),
        degenerate: false,
        n_used,
    })
}

/// How often each (hour, column) pair was available to fits and how often
/// it entered with a nonzero coefficient, aggregated over windows and
/// horizon slots.
#[derive(Debug, Clone)]
pub struct InclusionStats {
    pub columns: Vec<FeatureColumn>,
    /// `[hour_idx * p + column]`.
    pub chances: Vec<u64>,
    pub included: Vec<u64>,
}

impl InclusionStats {
    fn new(columns: Vec<FeatureColumn>) -> Self {
        let len = columns.len() * 24;
        InclusionStats {
            columns,
            chances: vec![0; len],
            included: vec![0; len],
        }
    }

    fn absorb(&mut self, other: &InclusionStats) {
        debug_assert_eq!(self.chances.len(), other.chances.len());
        for (a, b) in self.chances.iter_mut().zip(&other.chances) {
            *a += b;
        }
        for (a, b) in self.included.iter_mut().zip(&other.included) {
            *a += b;
        }
    }
}

/// One window's forecast for one model.
pub struct WindowForecast {
    /// `days[c][hour_idx]`, a row per horizon day.
    pub days: Vec<[f64; 24]>,
    pub inclusion: Option<InclusionStats>,
}

/// Anything that can train on a window and forecast its horizon.
pub trait Forecaster: Sync {
    fn forecast_window(
        &self,
        data: &Dataset,
        window: &Window,
        horizon_days: usize,
        lasso: &LassoConfig,
    ) -> Result<WindowForecast>;
}

struct FutureForecaster;
struct Ar24Forecaster;
struct ArHowForecaster;

impl Forecaster for FutureForecaster {
    fn forecast_window(
        &self,
        data: &Dataset,
        window: &Window,
        horizon_days: usize,
        lasso: &LassoConfig,
    ) -> Result<WindowForecast> {
        let model = fit_future_model(
            &data.panel,
            &data.book,
            &data.holidays,
            window.train,
            horizon_days,
            lasso,
        )?;
        let days = forecast_future_model(&model, &data.panel)?;
        let mut stats = InclusionStats::new(model.columns.clone());
        let p = model.columns.len();
        for (h, hour_slots) in model.slots.iter().enumerate() {
            for slot in hour_slots {
                for &j in &slot.retained {
                    stats.chances[h * p + j] += 1;
                }
                for &(j, _) in &slot.coefficients {
                    stats.included[h * p + j] += 1;
                }
            }
        }
        Ok(WindowForecast {
            days,
            inclusion: Some(stats),
        })
    }
}

impl Forecaster for Ar24Forecaster {
    fn forecast_window(
        &self,
        data: &Dataset,
        window: &Window,
        horizon_days: usize,
        lasso: &LassoConfig,
    ) -> Result<WindowForecast> {
        let model = fit_ar24(&data.panel, &data.holidays, window.train, lasso)?;
        let days = forecast_ar24(&model, &data.panel, &data.holidays, horizon_days)?;
        let mut stats = InclusionStats::new(model.columns.clone());
        let p = model.columns.len();
        for (h, slot) in model.slots.iter().enumerate() {
            for &j in &slot.retained {
                stats.chances[h * p + j] += 1;
            }
            for &(j, _) in &slot.coefficients {
                stats.included[h * p + j] += 1;
            }
        }
        Ok(WindowForecast {
            days,
            inclusion: Some(stats),
        })
    }
}

impl Forecaster for ArHowForecaster {
    fn forecast_window(
        &self,
        data: &Dataset,
        window: &Window,
        horizon_days: usize,
        _lasso: &LassoConfig,
    ) -> Result<WindowForecast> {
        let model = fit_how(&data.panel, &data.holidays, window.train)?;
        let days = forecast_how(&model, &data.panel, &data.holidays, window.origin, horizon_days)?;
        Ok(WindowForecast {
            days,
            inclusion: None,
        })
    }
}

fn builtin(kind: ModelKind) -> &'static dyn Forecaster {
    match kind {
        ModelKind::Future => &FutureForecaster,
        ModelKind::Ar24 => &Ar24Forecaster,
        ModelKind::ArHow => &ArHowForecaster,
    }
}

#[derive(Debug)]
pub struct BacktestResult {
    pub windows: Vec<Window>,
    pub tensors: BTreeMap<ModelKind, ErrorTensor>,
    pub inclusion: BTreeMap<ModelKind, InclusionStats>,
    /// (window index, error message) for skipped windows.
    pub skipped: Vec<(usize, String)>,
}

/// Fit and forecast every scheduled window for every configured model.
/// Windows run in parallel; per-window failures are recorded and skipped
/// unless they exceed the configured fraction.
pub fn run_backtest(config: &BacktestConfig, data: &Dataset) -> Result<BacktestResult> {
    let named: Vec<(ModelKind, &dyn Forecaster)> =
        config.models.iter().map(|&k| (k, builtin(k))).collect();
    run_backtest_with(config, data, &named)
}

/// Backtest over caller-supplied forecasters (the built-in models are a
/// special case; tests inject stubs here).
pub fn run_backtest_with(
    config: &BacktestConfig,
    data: &Dataset,
    models: &[(ModelKind, &dyn Forecaster)],
) -> Result<BacktestResult> {
    if models.is_empty() {
        return Err(Error::domain("no models configured"));
    }
    let windows = schedule_windows(config, data.panel.range())?;
    type WindowOutcome = std::result::Result<Vec<(ModelKind, WindowForecast)>, String>;
    let outcomes: Vec<WindowOutcome> = windows
        .par_iter()
        .map(|window| {
            let mut per_model = Vec::with_capacity(models.len());
            for (kind, forecaster) in models {
                match forecaster.forecast_window(data, window, config.horizon_days, &config.lasso)
                {
                    Ok(f) => {
                        if f.days.len() != config.horizon_days {
                            return Err(format!(
                                "model {kind} returned {} days, expected {}",
                                f.days.len(),
                                config.horizon_days
                            ));
                        }
                        per_model.push((*kind, f));
                    }
                    Err(e) => return Err(format!("model {kind}: {e}")),
                }
            }
            Ok(per_model)
        })
        .collect();

    let mut tensors: BTreeMap<ModelKind, ErrorTensor> = models
        .iter()
        .map(|(k, _)| (*k, ErrorTensor::new(config.horizon_days, windows.len())))
        .collect();
    let mut inclusion: BTreeMap<ModelKind, InclusionStats> = BTreeMap::new();
    let mut skipped = Vec::new();
    for (w_idx, (window, outcome)) in windows.iter().zip(outcomes).enumerate() {
        match outcome {
            Err(message) => skipped.push((window.index, message)),
            Ok(per_model) => {
                for (kind, forecast) in per_model {
                    let tensor = tensors.get_mut(&kind).expect("model registered");
                    for (c, day) in forecast.days.iter().enumerate() {
                        let target = window.origin + Days::new(c as u64 + 1);
                        for (h, &predicted) in day.iter().enumerate() {
                            let actual = data
                                .panel
                                .value(target, h)
                                .ok_or_else(|| {
                                    Error::domain(format!("panel misses actual for {target}"))
                                })?;
                            tensor.set(c, h, w_idx, predicted - actual);
                        }
                    }
                    if let Some(stats) = forecast.inclusion {
                        inclusion
                            .entry(kind)
                            .and_modify(|agg| agg.absorb(&stats))
                            .or_insert(stats);
                    }
                }
            }
        }
    }
    let max_skipped = (config.max_skipped_fraction * windows.len() as f64).floor() as usize;
    if skipped.len() > max_skipped {
        let detail: Vec<String> = skipped
            .iter()
            .take(3)
            .map(|(i, m)| format!("window {i}: {m}"))
            .collect();
        return Err(Error::domain(format!(
            "{} of {} windows failed (allowed {max_skipped}): {}",
            skipped.len(),
            windows.len(),
            detail.join("; ")
        )));
    }
    Ok(BacktestResult {
        windows,
        tensors,
        inclusion,
        skipped,
    })
}
