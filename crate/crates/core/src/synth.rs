//! Synthetic market generator: an hourly price panel with annual, weekly
//! and daily structure plus an autoregressive daily factor, and a futures
//! book quoted against realized delivery-period means so the quotes carry
//! genuine forward information when the signal strength is positive.

use chrono::{Datelike, Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::calendar::{HolidaySet, SeasonBasis, YEAR_PERIOD};
use crate::error::{Error, Result};
use crate::market::{ExchangeCalendar, FuturesBook, PricePanel, Product, QuoteKey, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub start: NaiveDate,
    pub num_days: usize,
    pub seed: u64,
    pub base_level: f64,
    /// Amplitude of the within-day hourly shape.
    pub daily_amplitude: f64,
    /// Amplitude of the weekday/weekend profile.
    pub weekly_amplitude: f64,
    /// Amplitude of the annual sinusoid.
    pub annual_amplitude: f64,
    /// AR(1) coefficient of the daily latent factor, in (-1, 1).
    pub latent_ar: f64,
    /// Innovation standard deviation of the latent factor.
    pub latent_sd: f64,
    /// Per-cell Gaussian noise standard deviation.
    pub noise_sd: f64,
    /// 0 = quotes are pure noise; 1 = quotes equal realized delivery means.
    pub futures_signal_strength: f64,
    pub futures_noise_sd: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            start: NaiveDate::from_ymd_opt(2015, 1, 1).expect("valid date"),
            num_days: 800,
            seed: 0,
            base_level: 40.0,
            daily_amplitude: 8.0,
            weekly_amplitude: 5.0,
            annual_amplitude: 10.0,
            latent_ar: 0.7,
            latent_sd: 3.0,
            noise_sd: 2.0,
            futures_signal_strength: 0.9,
            futures_noise_sd: 1.0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.num_days < 400 {
            return Err(Error::domain(format!(
                "num_days = {} too short; the generator needs at least 400",
                self.num_days
            )));
        }
        if !(self.latent_ar > -1.0 && self.latent_ar < 1.0) {
            return Err(Error::domain("latent_ar must lie in (-1, 1)"));
        }
        for (name, v) in [
            ("daily_amplitude", self.daily_amplitude),
            ("weekly_amplitude", self.weekly_amplitude),
            ("annual_amplitude", self.annual_amplitude),
            ("latent_sd", self.latent_sd),
            ("noise_sd", self.noise_sd),
            ("futures_noise_sd", self.futures_noise_sd),
        ] {
            if v < 0.0 {
                return Err(Error::domain(format!("{name} must be non-negative")));
            }
        }
        if !(0.0..=1.0).contains(&self.futures_signal_strength) {
            return Err(Error::domain("futures_signal_strength must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub panel: PricePanel,
    pub book: FuturesBook,
    pub holidays: HolidaySet,
}

/// Relative weekday levels, Mon..Sun.
const WEEKLY_WEIGHTS: [f64; 7] = [0.35, 0.4, 0.4, 0.35, 0.25, -0.7, -1.0];

/// Morning/evening double peak, scaled to a maximum magnitude of one.
fn hourly_shape(hour_idx: usize) -> f64 {
    let t = (hour_idx as f64 + 0.5) / 24.0 * std::f64::consts::TAU;
    (0.8 * (t - 2.4).sin() + 0.45 * (2.0 * t - 0.8).sin()) / 1.25
}

/// Peak-load hours 9..=20 as zero-based index bounds.
const PEAK_HOURS: std::ops::Range<usize> = 8..20;

/// Deterministic generator: identical config and seed give bit-identical
/// output. Futures are quoted on every weekday for all products in the
/// model's maturity sets, only while the delivery period stays inside the
/// panel.
pub fn generate(config: &SynthConfig) -> Result<SynthData> {
    config.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);

    // Daily latent AR(1), started from its stationary distribution.
    let mut latent = Vec::with_capacity(config.num_days);
    let stationary_sd = config.latent_sd / (1.0 - config.latent_ar * config.latent_ar).sqrt();
    let mut x: f64 = rng.sample::<f64, _>(StandardNormal) * stationary_sd;
    latent.push(x);
    for _ in 1..config.num_days {
        x = config.latent_ar * x + rng.sample::<f64, _>(StandardNormal) * config.latent_sd;
        latent.push(x);
    }

    let annual = |date: NaiveDate| {
        let pos = SeasonBasis::position(date);
        config.annual_amplitude * (std::f64::consts::TAU * pos / YEAR_PERIOD).cos()
    };

    let mut rows = Vec::with_capacity(config.num_days);
    for (day, &factor) in latent.iter().enumerate() {
        let date = config.start + Days::new(day as u64);
        let level = config.base_level
            + annual(date)
            + config.weekly_amplitude
                * WEEKLY_WEIGHTS[date.weekday().num_days_from_monday() as usize]
            + factor;
        let row: [f64; 24] = std::array::from_fn(|h| {
            level
                + config.daily_amplitude * hourly_shape(h)
                + rng.sample::<f64, _>(StandardNormal) * config.noise_sd
        });
        rows.push(row);
    }
    let panel = PricePanel::from_rows(config.start, rows)?;

    let holidays = HolidaySet::empty();
    let calendar = ExchangeCalendar::new(holidays.clone());
    let last = panel.last_date();

    let delivery_mean = |first: NaiveDate, days: u64, variant: Variant| -> Option<f64> {
        let mut acc = 0.0;
        let mut count = 0.0;
        for offset in 0..days {
            let day = panel.day(first + Days::new(offset))?;
            let hours = match variant {
                Variant::Base => &day[..],
                Variant::Peak => &day[PEAK_HOURS],
            };
            acc += hours.iter().sum::<f64>();
            count += hours.len() as f64;
        }
        Some(acc / count)
    };

    let mut book = FuturesBook::new();
    let mut trade = config.start;
    while trade <= last {
        if calendar.is_trading_day(trade) {
            let mut quote = |product: Product, variant: Variant, maturity: u32, days: u64| {
                if let Some(mean) = delivery_mean(trade + Days::new(maturity as u64), days, variant)
                {
                    let price = config.futures_signal_strength * mean
                        + rng.sample::<f64, _>(StandardNormal) * config.futures_noise_sd;
                    book.insert(QuoteKey::new(trade, product, variant, maturity), price);
                }
            };
            for variant in Variant::ALL {
                for m in crate::features::DAY_MATURITIES {
                    quote(Product::Day, variant, m, 1);
                }
                for m in crate::features::WEEK_MATURITIES {
                    quote(Product::Week, variant, m, 7);
                }
                // Weekend quotes exist for the maturities that land on the
                // next two Saturdays.
                let till_saturday = (chrono::Weekday::Sat.num_days_from_monday() + 7
                    - trade.weekday().num_days_from_monday())
                    % 7;
                for m in [till_saturday, till_saturday + 7] {
                    for variant_set in [crate::features::weekend_maturities(variant)] {
                        if variant_set.contains(&m) {
                            quote(Product::Weekend, variant, m, 2);
                        }
                    }
                }
                // The month quote refers to the whole next calendar month.
                let first_next = first_of_next_month(trade);
                let month_days =
                    (first_of_next_month(first_next) - first_next).num_days() as u64;
                let maturity = (first_next - trade).num_days() as u32;
                quote(Product::Month, variant, maturity, month_days);
            }
        }
        trade = trade.succ_opt().expect("date arithmetic");
    }

    Ok(SynthData {
        panel,
        book,
        holidays,
    })
}

fn first_of_next_month(date: NaiveDate) -> NaiveDate {
    let (y, m) = (date.year(), date.month());
    if m == 12 {
        NaiveDate::from_ymd_opt(y + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(y, m + 1, 1)
    }
    .expect("first of month")
}
