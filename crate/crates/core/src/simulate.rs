//! Residual-bootstrap path simulation: rerun the forecast recursion many
//! times, adding a resampled in-sample residual at every simulated day, and
//! reduce the paths to empirical quantile surfaces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::PricePanel;
use crate::models::{predict_slot, FutureModel, RecursionState};

/// Identifier of the portable generator recorded in output metadata.
pub const RNG_NAME: &str = "chacha12";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualSampling {
    /// One training-day index per simulated day; its full 24-hour residual
    /// vector is applied, preserving cross-hour correlation.
    DayBlock,
    /// A fresh draw per simulated hour.
    IndependentPerHour,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub num_paths: usize,
    pub horizon_days: usize,
    pub seed: u64,
    pub residual_sampling: ResidualSampling,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            num_paths: 1000,
            horizon_days: 28,
            seed: 0,
            residual_sampling: ResidualSampling::DayBlock,
        }
    }
}

/// Simulated hourly price paths, `[path][day][hour]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub num_paths: usize,
    pub horizon_days: usize,
    pub seed: u64,
    pub rng_name: &'static str,
    pub residual_sampling: ResidualSampling,
    values: Vec<f64>,
}

impl PathSet {
    pub fn from_values(values: Vec<f64>, num_paths: usize, horizon_days: usize) -> Self {
        assert_eq!(values.len(), num_paths * horizon_days * 24);
        PathSet {
            num_paths,
            horizon_days,
            seed: 0,
            rng_name: RNG_NAME,
            residual_sampling: ResidualSampling::DayBlock,
            values,
        }
    }

    pub fn get(&self, path: usize, day_idx: usize, hour_idx: usize) -> f64 {
        self.values[(path * self.horizon_days + day_idx) * 24 + hour_idx]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Bootstrap the forecast recursion: each path feeds its own simulated days
/// back in as lag inputs and adds a resampled in-sample residual per hour.
/// Path i draws from stream i of the seeded generator, so the result is
/// independent of thread count and bit-reproducible for a fixed seed.
pub fn simulate_paths(
    model: &FutureModel,
    panel: &PricePanel,
    config: &SimulationConfig,
) -> Result<PathSet> {
    if config.num_paths == 0 {
        return Err(Error::domain("num_paths must be at least 1"));
    }
    if config.horizon_days > model.horizon_days {
        return Err(Error::domain(format!(
            "simulation horizon {} exceeds the fitted horizon {}",
            config.horizon_days, model.horizon_days
        )));
    }
    let pool = model.residuals[0].len();
    if pool == 0 || model.residuals.iter().any(Vec::is_empty) {
        return Err(Error::domain("empty in-sample residual pool"));
    }
    let mut values = vec![0.0; config.num_paths * config.horizon_days * 24];
    values
        .par_chunks_mut(config.horizon_days * 24)
        .enumerate()
        .try_for_each(|(path_idx, out)| -> Result<()> {
            let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
            rng.set_stream(path_idx as u64 + 1);
            let mut state = RecursionState::new(panel, model.origin)?;
            for c in 0..config.horizon_days {
                let exog = &model.forecast_rows[c];
                let mut day = [0.0f64; 24];
                let block_row = match config.residual_sampling {
                    ResidualSampling::DayBlock => Some(rng.gen_range(0..pool)),
                    ResidualSampling::IndependentPerHour => None,
                };
                for (h, slot_value) in day.iter_mut().enumerate() {
                    let mean = predict_slot(
                        &model.slots[h][c],
                        &model.columns,
                        exog,
                        &state,
                        exog.target_date,
                    );
                    let row = match block_row {
                        Some(r) => r,
                        None => rng.gen_range(0..pool),
                    };
                    *slot_value = mean + model.residuals[h][row];
                }
                state.push_day(day);
                out[c * 24..(c + 1) * 24].copy_from_slice(&day);
            }
            Ok(())
        })?;
    Ok(PathSet {
        num_paths: config.num_paths,
        horizon_days: config.horizon_days,
        seed: config.seed,
        rng_name: RNG_NAME,
        residual_sampling: config.residual_sampling,
        values,
    })
}

/// Empirical quantile surfaces, `[level][day][hour]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFan {
    pub levels: Vec<f64>,
    pub horizon_days: usize,
    values: Vec<f64>,
}

impl QuantileFan {
    pub fn get(&self, level_idx: usize, day_idx: usize, hour_idx: usize) -> f64 {
        self.values[(level_idx * self.horizon_days + day_idx) * 24 + hour_idx]
    }
}

/// Per-cell empirical quantiles by linear interpolation of the order
/// statistics.
pub fn quantile_fan(paths: &PathSet, levels: &[f64]) -> Result<QuantileFan> {
    if paths.num_paths == 0 {
        return Err(Error::domain("no paths to summarize"));
    }
    if levels.is_empty() {
        return Err(Error::domain("no quantile levels requested"));
    }
    for &q in levels {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain(format!("quantile level {q} outside (0, 1)")));
        }
    }
    let n = paths.num_paths;
    let mut values = vec![0.0; levels.len() * paths.horizon_days * 24];
    let mut cell = Vec::with_capacity(n);
    for day in 0..paths.horizon_days {
        for hour in 0..24 {
            cell.clear();
            cell.extend((0..n).map(|p| paths.get(p, day, hour)));
            cell.sort_unstable_by(f64::total_cmp);
            for (li, &q) in levels.iter().enumerate() {
                let pos = q * (n - 1) as f64;
                let lo = pos.floor() as usize;
                let frac = pos - lo as f64;
                let v = if lo + 1 < n {
                    cell[lo] * (1.0 - frac) + cell[lo + 1] * frac
                } else {
                    cell[n - 1]
                };
                values[(li * paths.horizon_days + day) * 24 + hour] = v;
            }
        }
    }
    Ok(QuantileFan {
        levels: levels.to_vec(),
        horizon_days: paths.horizon_days,
        values,
    })
}

/// The default reporting grid: percentiles 1..=99.
pub fn percent_levels() -> Vec<f64> {
    (1..=99).map(|p| p as f64 / 100.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::{DateRange, HolidaySet};
    use crate::features::{DAY_MATURITIES, WEEK_MATURITIES};
    use crate::lasso::LassoConfig;
    use crate::market::{
        forward_fill, ExchangeCalendar, FuturesBook, Product, QuoteKey, Variant,
    };
    use crate::models::fit_future_model;
    use chrono::NaiveDate;
    use proptest::prelude::*;
    use rand::Rng;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn fitted_model() -> (FutureModel, PricePanel) {
        let holidays = HolidaySet::empty();
        let cal = ExchangeCalendar::new(holidays.clone());
        let rows: Vec<[f64; 24]> = (0..200)
            .map(|t| {
                std::array::from_fn(|h| {
                    30.0 + 6.0 * ((t as f64) / 40.0 * std::f64::consts::TAU).sin()
                        + ((t * 13 + h * 7) as f64 * 0.63).sin() * 1.5
                })
            })
            .collect();
        let panel = PricePanel::from_rows(d("2016-01-01"), rows).unwrap();
        let mut book = FuturesBook::new();
        let mut day = d("2015-11-01");
        while day <= panel.last_date() {
            if cal.is_trading_day(day) {
                let t = (day - d("2015-11-01")).num_days() as f64;
                for variant in Variant::ALL {
                    for m in DAY_MATURITIES {
                        book.insert(
                            QuoteKey::new(day, Product::Day, variant, m),
                            28.0 + (t * 0.21 + m as f64).sin() * 2.0,
                        );
                    }
                    for m in WEEK_MATURITIES {
                        book.insert(
                            QuoteKey::new(day, Product::Week, variant, m),
                            28.0 + (t * 0.11 + m as f64).sin() * 2.0,
                        );
                    }
                    for m in 1..=12 {
                        book.insert(
                            QuoteKey::new(day, Product::Weekend, variant, m),
                            28.0 + (t * 0.17 + m as f64).sin() * 2.0,
                        );
                    }
                    for m in 1..=31 {
                        book.insert(
                            QuoteKey::new(day, Product::Month, variant, m),
                            28.0 + (t * 0.05 + m as f64).sin(),
                        );
                    }
                }
            }
            day = day.succ_opt().unwrap();
        }
        let book = forward_fill(&book, &cal, 7);
        let train = DateRange::new(d("2016-01-05"), d("2016-06-15")).unwrap();
        let cfg = LassoConfig {
            grid_size: 10,
            span_exponent: 8.0,
            ..LassoConfig::default()
        };
        let model = fit_future_model(&panel, &book, &holidays, train, 3, &cfg).unwrap();
        (model, panel)
    }

    #[test]
    fn zero_residuals_reproduce_mean_forecast() {
        let (mut model, panel) = fitted_model();
        for r in model.residuals.iter_mut() {
            for v in r.iter_mut() {
                *v = 0.0;
            }
        }
        let cfg = SimulationConfig {
            num_paths: 5,
            horizon_days: 3,
            seed: 9,
            residual_sampling: ResidualSampling::DayBlock,
        };
        let paths = simulate_paths(&model, &panel, &cfg).unwrap();
        let mean = crate::models::forecast_future_model(&model, &panel).unwrap();
        for p in 0..5 {
            for c in 0..3 {
                for h in 0..24 {
                    assert_eq!(paths.get(p, c, h), mean[c][h]);
                }
            }
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let (model, panel) = fitted_model();
        let cfg = SimulationConfig {
            num_paths: 40,
            horizon_days: 3,
            seed: 123,
            residual_sampling: ResidualSampling::DayBlock,
        };
        let a = simulate_paths(&model, &panel, &cfg).unwrap();
        let b = simulate_paths(&model, &panel, &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate_paths(
            &model,
            &panel,
            &SimulationConfig {
                seed: 124,
                ..cfg
            },
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn path_mean_tracks_forecast_within_clt_band() {
        let (model, panel) = fitted_model();
        let cfg = SimulationConfig {
            num_paths: 1000,
            horizon_days: 1,
            seed: 7,
            residual_sampling: ResidualSampling::DayBlock,
        };
        let paths = simulate_paths(&model, &panel, &cfg).unwrap();
        let mean = crate::models::forecast_future_model(&model, &panel).unwrap();
        for h in 0..24 {
            let m: f64 = (0..1000).map(|p| paths.get(p, 0, h)).sum::<f64>() / 1000.0;
            let pool = &model.residuals[h];
            let mu = pool.iter().sum::<f64>() / pool.len() as f64;
            let sd = (pool.iter().map(|r| (r - mu) * (r - mu)).sum::<f64>()
                / (pool.len() - 1) as f64)
                .sqrt();
            let bound = 3.0 * sd / (1000f64).sqrt() + mu.abs() + 1e-9;
            assert!(
                (m - mean[0][h]).abs() <= bound,
                "hour {h}: |{m} - {}| > {bound}",
                mean[0][h]
            );
        }
    }

    #[test]
    fn day_block_shares_the_draw_across_hours() {
        let (mut model, panel) = fitted_model();
        // Encode the drawn row index into every hour's residual.
        let rows = model.residuals[0].len();
        for h in 0..24 {
            model.residuals[h] = (0..rows).map(|i| i as f64 * 1000.0).collect();
        }
        let base = crate::models::forecast_future_model(&model, &panel).unwrap();
        let cfg = SimulationConfig {
            num_paths: 8,
            horizon_days: 1,
            seed: 3,
            residual_sampling: ResidualSampling::DayBlock,
        };
        let paths = simulate_paths(&model, &panel, &cfg).unwrap();
        for p in 0..8 {
            let drawn: Vec<f64> = (0..24).map(|h| paths.get(p, 0, h) - base[0][h]).collect();
            for h in 1..24 {
                assert_eq!(drawn[h], drawn[0], "path {p} hour {h}");
            }
        }
        let independent = simulate_paths(
            &model,
            &panel,
            &SimulationConfig {
                residual_sampling: ResidualSampling::IndependentPerHour,
                ..cfg
            },
        )
        .unwrap();
        let spread: Vec<f64> = (0..24)
            .map(|h| independent.get(0, 0, h) - base[0][h])
            .collect();
        assert!(spread.iter().any(|&v| v != spread[0]));
    }

    #[test]
    fn quantiles_of_trivial_path_sets() {
        // A single path is its own quantile at every level.
        let vals: Vec<f64> = (0..24).map(|h| h as f64).collect();
        let single = PathSet::from_values(vals.clone(), 1, 1);
        let fan = quantile_fan(&single, &[0.01, 0.5, 0.99]).unwrap();
        for (li, _) in [0.01, 0.5, 0.99].iter().enumerate() {
            for h in 0..24 {
                assert_eq!(fan.get(li, 0, h), vals[h]);
            }
        }
        // Symmetric +-1 pair has median zero everywhere.
        let mut two = vec![1.0; 24];
        two.extend(vec![-1.0; 24]);
        let pair = PathSet::from_values(two, 2, 1);
        let fan = quantile_fan(&pair, &[0.5]).unwrap();
        for h in 0..24 {
            assert_eq!(fan.get(0, 0, h), 0.0);
        }

        assert!(quantile_fan(&pair, &[0.0]).is_err());
        assert!(quantile_fan(&pair, &[1.0]).is_err());
        assert!(quantile_fan(&pair, &[]).is_err());
    }

    proptest! {
        #[test]
        fn quantiles_monotone_in_level(seed in 0u64..50) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let paths = 17;
            let days = 2;
            let vals: Vec<f64> = (0..paths * days * 24).map(|_| rng.gen_range(-30.0..80.0)).collect();
            let set = PathSet::from_values(vals, paths, days);
            let levels = percent_levels();
            let fan = quantile_fan(&set, &levels).unwrap();
            for day in 0..days {
                for h in 0..24 {
                    for li in 1..levels.len() {
                        prop_assert!(fan.get(li, day, h) >= fan.get(li - 1, day, h));
                    }
                }
            }
        }
    }

    #[test]
    fn negative_prices_are_producible() {
        // Residual pool deep enough below the mean forecast drives paths
        // negative; nothing may clamp them.
        let (mut model, panel) = fitted_model();
        for h in 0..24 {
            for v in model.residuals[h].iter_mut() {
                *v = -100.0;
            }
        }
        let cfg = SimulationConfig {
            num_paths: 3,
            horizon_days: 2,
            seed: 1,
            residual_sampling: ResidualSampling::DayBlock,
        };
        let paths = simulate_paths(&model, &panel, &cfg).unwrap();
        assert!(paths.values().iter().all(|&v| v < 0.0));
    }
}
