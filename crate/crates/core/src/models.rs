//! The futures-augmented hourly model and its benchmarks: the pure
//! autoregressive AR24 variant and the hour-of-week mean model with an
//! autoregressive residual correction.

use chrono::{Days, NaiveDate};

use crate::calendar::{effective_dow, DateRange, HolidaySet, SeasonBasis};
use crate::error::{Error, Result};
use crate::features::{
    build_feature_table, exogenous_row, response_for_hour, slot_observable_columns, AlignedRow,
    ColumnKind, FeatureColumn, FeatureSpec, FeatureTable,
};
use crate::lasso::{
    dot, select_path_on_gram, standardize_design, standardize_response, Design, GramContext,
    LassoConfig,
};
use crate::market::{ExchangeCalendar, FilledFuturesBook, PricePanel};

/// One fitted lasso slot: sparse coefficients on the original scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotFit {
    /// (column index, coefficient), nonzero entries only.
    pub coefficients: Vec<(usize, f64)>,
    pub intercept: f64,
    pub lambda: f64,
    pub df: usize,
    pub bic: f64,
    pub converged: bool,
    /// Columns that were candidates for this fit (observable, non-missing,
    /// non-constant); the inclusion report counts chances from these.
    pub retained: Vec<usize>,
}

impl SlotFit {
    pub fn predict(&self, values: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .map(|&(j, b)| b * values[j])
                .sum::<f64>()
    }
}

/// The per-hour, per-horizon-day fitted futures model for one origin.
#[derive(Debug, Clone)]
pub struct FutureModel {
    pub train_range: DateRange,
    pub origin: NaiveDate,
    pub horizon_days: usize,
    pub columns: Vec<FeatureColumn>,
    /// `slots[hour_idx][c-1]`.
    pub slots: Vec<Vec<SlotFit>>,
    /// In-sample residuals per hour from the horizon-1 slot, original units,
    /// one entry per regression row.
    pub residuals: Vec<Vec<f64>>,
    /// Exogenous regressor rows for targets origin+1 ..= origin+horizon.
    pub forecast_rows: Vec<AlignedRow>,
}

/// Fitted benchmark without futures: one slot per hour.
#[derive(Debug, Clone)]
pub struct Ar24Model {
    pub train_range: DateRange,
    pub origin: NaiveDate,
    pub columns: Vec<FeatureColumn>,
    pub slots: Vec<SlotFit>,
    pub residuals: Vec<Vec<f64>>,
}

/// Shared per-window design state: the feature table, its standardized
/// design and Gram matrix. The regressor rows are identical for all 24
/// hourly models, so this is built once per window.
struct WindowDesign {
    table: FeatureTable,
    x_scaled: Design,
    col_means: Vec<f64>,
    col_sds: Vec<f64>,
    /// Unusable within this window: zero variance or missing cells.
    unusable: Vec<bool>,
    gram: GramContext,
}

impl WindowDesign {
    fn build(
        panel: &PricePanel,
        book: &FilledFuturesBook,
        holidays: &HolidaySet,
        spec: FeatureSpec,
        train_range: DateRange,
    ) -> Result<Self> {
        if train_range.num_days() < 8 {
            return Err(Error::domain(format!(
                "training window of {} days is shorter than the 8 days needed for lag-7 history",
                train_range.num_days()
            )));
        }
        // The first 7 days of the window serve as lag history only, so no
        // data before the window is ever touched.
        let reg_range = DateRange::new(train_range.start + Days::new(7), train_range.end)?;
        let table = build_feature_table(panel, book, holidays, spec, reg_range)?;
        let n = table.num_rows();
        let p = table.num_columns();
        let x = Design::from_col_major(table.column_major(), n, p);
        let (x_scaled, col_means, col_sds, dropped) = standardize_design(&x);
        let missing = table.missing_columns();
        let unusable: Vec<bool> = dropped
            .iter()
            .zip(&missing)
            .map(|(d, m)| *d || *m)
            .collect();
        if unusable.iter().all(|&u| u) {
            return Err(Error::domain("no usable regressor columns in window"));
        }
        let gram = GramContext::new(&x_scaled);
        Ok(WindowDesign {
            table,
            x_scaled,
            col_means,
            col_sds,
            unusable,
            gram,
        })
    }

    /// Fit one (response, column subset) slot and rescale to original units.
    fn fit_slot(
        &self,
        xty: &[f64],
        yty: f64,
        y_mean: f64,
        y_sd: f64,
        active: &[usize],
        cfg: &LassoConfig,
    ) -> SlotFit {
        let sol = select_path_on_gram(&self.gram, xty, yty, active, cfg);
        let coefficients: Vec<(usize, f64)> = sol
            .beta_scaled
            .iter()
            .map(|&(j, b)| (j, b * y_sd / self.col_sds[j]))
            .collect();
        let intercept = y_mean
            - coefficients
                .iter()
                .map(|&(j, b)| b * self.col_means[j])
                .sum::<f64>();
        SlotFit {
            coefficients,
            intercept,
            lambda: sol.lambda,
            df: sol.df,
            bic: sol.bic,
            converged: sol.converged,
            retained: active.to_vec(),
        }
    }

    /// In-sample residuals of a slot fit, original units.
    fn residuals(&self, slot: &SlotFit, y: &[f64]) -> Vec<f64> {
        self.table
            .rows
            .iter()
            .zip(y)
            .map(|(row, &obs)| obs - slot.predict(&row.values))
            .collect()
    }
}

/// Fit the futures model: for every hour and every forecast day of the
/// horizon a separate penalized fit, restricted to the columns observable
/// at that horizon from the window's origin.
pub fn fit_future_model(
    panel: &PricePanel,
    book: &FilledFuturesBook,
    holidays: &HolidaySet,
    train_range: DateRange,
    horizon_days: usize,
    cfg: &LassoConfig,
) -> Result<FutureModel> {
    assert!(horizon_days >= 1);
    let spec = FeatureSpec::full();
    let design = WindowDesign::build(panel, book, holidays, spec, train_range)?;
    let origin = train_range.end;
    let calendar = ExchangeCalendar::new(holidays.clone());
    let basis = SeasonBasis::standard();
    let forecast_rows: Vec<AlignedRow> = (1..=horizon_days as u64)
        .map(|c| exogenous_row(book, holidays, &calendar, spec, &basis, origin + Days::new(c)))
        .collect();
    let slot_masks = slot_observable_columns(&forecast_rows, origin);

    // Candidate columns per horizon slot.
    let actives: Vec<Vec<usize>> = (0..horizon_days)
        .map(|c| {
            (0..design.table.num_columns())
                .filter(|&j| {
                    !design.unusable[j] && slot_masks[c][j] && !forecast_rows[c].missing[j]
                })
                .collect()
        })
        .collect();

    let mut slots = Vec::with_capacity(24);
    let mut residuals = Vec::with_capacity(24);
    for hour in 1..=24u8 {
        let y = response_for_hour(panel, &design.table, hour)?;
        let (y_scaled, y_mean, y_sd) = standardize_response(&y);
        let xty = design.gram.xty(&design.x_scaled, &y_scaled);
        let yty = dot(&y_scaled, &y_scaled);
        let mut hour_slots: Vec<SlotFit> = Vec::with_capacity(actives.len());
        for (c, active) in actives.iter().enumerate() {
            // Consecutive horizons often share the exact candidate set
            // (futures only drop at day/week/month boundaries); the fit is
            // then identical.
            if c > 0 && actives[c - 1] == *active {
                let prev = hour_slots[c - 1].clone();
                hour_slots.push(prev);
            } else {
                hour_slots.push(design.fit_slot(&xty, yty, y_mean, y_sd, active, cfg));
            }
        }
        residuals.push(design.residuals(&hour_slots[0], &y));
        slots.push(hour_slots);
    }
    Ok(FutureModel {
        train_range,
        origin,
        horizon_days,
        columns: design.table.columns,
        slots,
        residuals,
        forecast_rows,
    })
}

impl FutureModel {
    /// JSON summary: per hour and horizon day the selected penalty, the
    /// nonzero-coefficient count and the named coefficients.
    pub fn dump_json(&self) -> serde_json::Value {
        let hours: Vec<serde_json::Value> = self
            .slots
            .iter()
            .enumerate()
            .map(|(h, hour_slots)| {
                let slots: Vec<serde_json::Value> = hour_slots
                    .iter()
                    .enumerate()
                    .map(|(c, slot)| {
                        let coefficients: serde_json::Map<String, serde_json::Value> = slot
                            .coefficients
                            .iter()
                            .map(|&(j, b)| {
                                (self.columns[j].name.clone(), serde_json::json!(b))
                            })
                            .collect();
                        serde_json::json!({
                            "horizon_day": c + 1,
                            "lambda": slot.lambda,
                            "df": slot.df,
                            "bic": slot.bic,
                            "intercept": slot.intercept,
                            "converged": slot.converged,
                            "coefficients": coefficients,
                        })
                    })
                    .collect();
                serde_json::json!({ "hour": h + 1, "slots": slots })
            })
            .collect();
        serde_json::json!({
            "origin": self.origin.to_string(),
            "train_start": self.train_range.start.to_string(),
            "train_end": self.train_range.end.to_string(),
            "horizon_days": self.horizon_days,
            "hours": hours,
        })
    }
}

/// Ring buffer of daily price vectors driving the ar-block recursion.
pub(crate) struct RecursionState {
    origin: NaiveDate,
    /// Days origin-6 ..= origin, then one appended entry per forecast day.
    history: Vec<[f64; 24]>,
}

impl RecursionState {
    pub(crate) fn new(panel: &PricePanel, origin: NaiveDate) -> Result<Self> {
        let mut history = Vec::new();
        for back in (0..7u64).rev() {
            let date = origin - Days::new(back);
            let day = panel
                .day(date)
                .ok_or_else(|| Error::domain(format!("panel misses {date} before origin")))?;
            history.push(std::array::from_fn(|h| day[h]));
        }
        Ok(RecursionState { origin, history })
    }

    /// Price of (target - lag, hour) where forecast days override the panel.
    pub(crate) fn lagged(&self, target: NaiveDate, lag: u8, hour_idx: usize) -> f64 {
        let date = target - Days::new(lag as u64);
        let idx = (date - self.origin).num_days() + 6;
        self.history[idx as usize][hour_idx]
    }

    pub(crate) fn push_day(&mut self, values: [f64; 24]) {
        self.history.push(values);
    }
}

/// Prediction of one slot with ar entries resolved through the recursion
/// state and exogenous entries taken from the precomputed row.
pub(crate) fn predict_slot(
    slot: &SlotFit,
    columns: &[FeatureColumn],
    exog: &AlignedRow,
    state: &RecursionState,
    target: NaiveDate,
) -> f64 {
    let mut acc = slot.intercept;
    for &(j, b) in &slot.coefficients {
        let v = match columns[j].kind {
            ColumnKind::Ar { hour, lag } => state.lagged(target, lag, hour as usize - 1),
            _ => exog.values[j],
        };
        acc += b * v;
    }
    acc
}

/// Day-by-day recursion: forecast day c with slot (h, c), feeding forecast
/// days back in as lag inputs.
pub fn forecast_future_model(model: &FutureModel, panel: &PricePanel) -> Result<Vec<[f64; 24]>> {
    let mut state = RecursionState::new(panel, model.origin)?;
    let mut out = Vec::with_capacity(model.horizon_days);
    for c in 0..model.horizon_days {
        let exog = &model.forecast_rows[c];
        let day: [f64; 24] = std::array::from_fn(|h| {
            predict_slot(
                &model.slots[h][c],
                &model.columns,
                exog,
                &state,
                exog.target_date,
            )
        });
        state.push_day(day);
        out.push(day);
    }
    Ok(out)
}

/// Fit the no-futures benchmark: one fit per hour on price lags and
/// weekday dummies. Every regressor is deterministic at forecast time, so
/// no per-horizon refit is needed.
pub fn fit_ar24(
    panel: &PricePanel,
    holidays: &HolidaySet,
    train_range: DateRange,
    cfg: &LassoConfig,
) -> Result<Ar24Model> {
    let spec = FeatureSpec::ar24();
    let book = FilledFuturesBook::default();
    let design = WindowDesign::build(panel, &book, holidays, spec, train_range)?;
    let active: Vec<usize> = (0..design.table.num_columns())
        .filter(|&j| !design.unusable[j])
        .collect();
    let mut slots = Vec::with_capacity(24);
    let mut residuals = Vec::with_capacity(24);
    for hour in 1..=24u8 {
        let y = response_for_hour(panel, &design.table, hour)?;
        let (y_scaled, y_mean, y_sd) = standardize_response(&y);
        let xty = design.gram.xty(&design.x_scaled, &y_scaled);
        let yty = dot(&y_scaled, &y_scaled);
        let slot = design.fit_slot(&xty, yty, y_mean, y_sd, &active, cfg);
        residuals.push(design.residuals(&slot, &y));
        slots.push(slot);
    }
    Ok(Ar24Model {
        train_range,
        origin: train_range.end,
        columns: design.table.columns,
        slots,
        residuals,
    })
}

pub fn forecast_ar24(
    model: &Ar24Model,
    panel: &PricePanel,
    holidays: &HolidaySet,
    horizon_days: usize,
) -> Result<Vec<[f64; 24]>> {
    let mut state = RecursionState::new(panel, model.origin)?;
    let calendar = ExchangeCalendar::new(holidays.clone());
    let basis = SeasonBasis::standard();
    let book = FilledFuturesBook::default();
    let mut out = Vec::with_capacity(horizon_days);
    for c in 1..=horizon_days as u64 {
        let target = model.origin + Days::new(c);
        let exog = exogenous_row(&book, holidays, &calendar, FeatureSpec::ar24(), &basis, target);
        let day: [f64; 24] = std::array::from_fn(|h| {
            predict_slot(&model.slots[h], &model.columns, &exog, &state, target)
        });
        state.push_day(day);
        out.push(day);
    }
    Ok(out)
}

/// Hour-of-week benchmark: 168 slot means plus a Yule-Walker AR(p) on the
/// hourly residual series, p picked by AIC out of 1..=168.
#[derive(Debug, Clone, PartialEq)]
pub struct HowModel {
    /// Slot means, indexed (effective weekday Mon=0) * 24 + hour_idx.
    pub gamma: Vec<f64>,
    /// AR coefficients phi_1..phi_p on the residual series.
    pub phi: Vec<f64>,
    pub order: usize,
    /// Innovation variance at the selected order.
    pub sigma2: f64,
    pub train_range: DateRange,
}

pub const HOW_SLOTS: usize = 168;
pub const HOW_MAX_ORDER: usize = 168;

fn how_index(date: NaiveDate, hour_idx: usize, holidays: &HolidaySet) -> usize {
    effective_dow(date, holidays).num_days_from_monday() as usize * 24 + hour_idx
}

/// Biased (1/n) autocovariances of a zero-mean series up to `max_lag`.
fn autocovariances(series: &[f64], max_lag: usize) -> Vec<f64> {
    let n = series.len();
    (0..=max_lag)
        .map(|l| {
            let mut acc = 0.0;
            for t in 0..n - l {
                acc += series[t] * series[t + l];
            }
            acc / n as f64
        })
        .collect()
}

/// Levinson-Durbin recursion: AR coefficients and innovation variance for
/// every order 1..=pmax from the autocovariance sequence.
fn levinson_durbin(acov: &[f64], pmax: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut phis: Vec<Vec<f64>> = Vec::with_capacity(pmax + 1);
    phis.push(Vec::new());
    let mut sigma = vec![acov[0]];
    for p in 1..=pmax {
        let prev = &phis[p - 1];
        let mut num = acov[p];
        for (j, &phi_j) in prev.iter().enumerate() {
            num -= phi_j * acov[p - 1 - j];
        }
        let kappa = if sigma[p - 1] > 0.0 { num / sigma[p - 1] } else { 0.0 };
        let mut phi = Vec::with_capacity(p);
        for j in 0..p - 1 {
            phi.push(prev[j] - kappa * prev[p - 2 - j]);
        }
        phi.push(kappa);
        sigma.push((sigma[p - 1] * (1.0 - kappa * kappa)).max(0.0));
        phis.push(phi);
    }
    (phis, sigma)
}

/// Two-step fit: slot means by OLS (one-hot regressors reduce to means),
/// then Yule-Walker AR(p) on the residuals with AIC order selection,
/// `AIC = n ln(sigma^2_p) + 2p` over p = 1..=168.
pub fn fit_how(panel: &PricePanel, holidays: &HolidaySet, train_range: DateRange) -> Result<HowModel> {
    if !panel.range().contains(train_range.start) || !panel.range().contains(train_range.end) {
        return Err(Error::domain("training range outside the price panel"));
    }
    let n_hours = train_range.num_days() * 24;
    if n_hours < 10 * HOW_SLOTS {
        return Err(Error::domain(format!(
            "hour-of-week fit needs at least 10 weeks of hourly data, got {n_hours} hours"
        )));
    }
    let mut sums = vec![0.0f64; HOW_SLOTS];
    let mut counts = vec![0usize; HOW_SLOTS];
    for date in train_range.iter() {
        let day = panel.day(date).expect("range checked");
        for (h, &v) in day.iter().enumerate() {
            let i = how_index(date, h, holidays);
            sums[i] += v;
            counts[i] += 1;
        }
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::domain(format!(
            "hour-of-week slot {empty} has no observations in the training range"
        )));
    }
    let gamma: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();

    let mut residuals = Vec::with_capacity(n_hours);
    for date in train_range.iter() {
        let day = panel.day(date).expect("range checked");
        for (h, &v) in day.iter().enumerate() {
            residuals.push(v - gamma[how_index(date, h, holidays)]);
        }
    }

    let pmax = HOW_MAX_ORDER.min(residuals.len() - 1);
    let acov = autocovariances(&residuals, pmax);
    if acov[0] <= 1e-12 {
        // Degenerate: the weekly profile explains everything.
        return Ok(HowModel {
            gamma,
            phi: vec![0.0],
            order: 1,
            sigma2: 0.0,
            train_range,
        });
    }
    let (phis, sigma) = levinson_durbin(&acov, pmax);
    let n = residuals.len() as f64;
    let mut best_p = 1;
    let mut best_aic = f64::INFINITY;
    for p in 1..=pmax {
        let aic = n * sigma[p].max(1e-300).ln() + 2.0 * p as f64;
        if aic < best_aic {
            best_aic = aic;
            best_p = p;
        }
    }
    Ok(HowModel {
        gamma,
        phi: phis[best_p].clone(),
        order: best_p,
        sigma2: sigma[best_p],
        train_range,
    })
}

/// Mean-reverting recursion around the slot means:
/// `y_hat(t+k) = gamma + sum_j phi_j (y(t+k-j) - gamma)`, with forecasts
/// substituted for observations past the origin.
pub fn forecast_how(
    model: &HowModel,
    panel: &PricePanel,
    holidays: &HolidaySet,
    origin: NaiveDate,
    horizon_days: usize,
) -> Result<Vec<[f64; 24]>> {
    let p = model.phi.len();
    // Residual history for the last p hours before the first forecast hour.
    let hist_days = p.div_ceil(24) + 1;
    let mut hist = Vec::with_capacity(hist_days * 24);
    for back in (0..hist_days as u64).rev() {
        let date = origin - Days::new(back);
        let day = panel
            .day(date)
            .ok_or_else(|| Error::domain(format!("panel misses {date} before origin")))?;
        for (h, &v) in day.iter().enumerate() {
            hist.push(v - model.gamma[how_index(date, h, holidays)]);
        }
    }
    let mut out = Vec::with_capacity(horizon_days);
    for c in 1..=horizon_days as u64 {
        let date = origin + Days::new(c);
        let mut day = [0.0f64; 24];
        for (h, slot) in day.iter_mut().enumerate() {
            let mut eps = 0.0;
            for (j, &phi) in model.phi.iter().enumerate() {
                eps += phi * hist[hist.len() - 1 - j];
            }
            hist.push(eps);
            *slot = model.gamma[how_index(date, h, holidays)] + eps;
        }
        out.push(day);
    }
    Ok(out)
}
