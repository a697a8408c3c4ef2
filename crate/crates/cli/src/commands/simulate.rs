//! Fit the futures model at one origin and bootstrap quantile forecasts.

use std::path::PathBuf;

use chrono::{Days, NaiveDate};
use clap::Args as ClapArgs;

use powercast::calendar::DateRange;
use powercast::error::{Error, Result};
use powercast::models::fit_future_model;
use powercast::simulate::{percent_levels, quantile_fan, simulate_paths, RNG_NAME};
use powercast::{LassoConfig, ResidualSampling};

use crate::config::RunContext;
use crate::output;

#[derive(Debug, ClapArgs)]
pub struct Args {
    #[arg(long)]
    prices: Option<PathBuf>,
    #[arg(long)]
    futures: Option<PathBuf>,
    #[arg(long)]
    holidays: Option<PathBuf>,
    /// Forecast origin; defaults to the last panel date.
    #[arg(long)]
    origin: Option<NaiveDate>,
    #[arg(long, default_value_t = 365)]
    window_length: usize,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    paths: Option<usize>,
    /// Comma-separated quantile levels in (0,1); defaults to the
    /// percentiles 0.01..0.99.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    sampling: Option<SamplingArg>,
    /// Additionally write the raw paths as a flat binary dump.
    #[arg(long)]
    dump_paths: bool,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum SamplingArg {
    DayBlock,
    IndependentPerHour,
}

impl From<SamplingArg> for ResidualSampling {
    fn from(v: SamplingArg) -> Self {
        match v {
            SamplingArg::DayBlock => ResidualSampling::DayBlock,
            SamplingArg::IndependentPerHour => ResidualSampling::IndependentPerHour,
        }
    }
}

pub fn run(ctx: &RunContext, args: Args) -> Result<()> {
    let data = super::backtest::load_dataset(
        ctx,
        args.prices.clone(),
        args.futures.clone(),
        args.holidays.clone(),
    )?;
    let mut sim = ctx.file.simulation.unwrap_or_default();
    if let Some(v) = args.paths {
        sim.num_paths = v;
    }
    if let Some(v) = args.horizon {
        sim.horizon_days = v;
    }
    if let Some(v) = args.sampling {
        sim.residual_sampling = v.into();
    }
    if let Some(seed) = ctx.seed_override {
        sim.seed = seed;
    }
    let origin = args.origin.unwrap_or_else(|| data.panel.last_date());
    if args.window_length < 8 {
        return Err(Error::domain("window_length must be at least 8"));
    }
    let train = DateRange::new(
        origin - Days::new(args.window_length as u64 - 1),
        origin,
    )?;
    let lasso = ctx
        .file
        .backtest
        .as_ref()
        .map(|b| b.lasso)
        .unwrap_or_else(LassoConfig::default);

    let model = fit_future_model(
        &data.panel,
        &data.book,
        &data.holidays,
        train,
        sim.horizon_days,
        &lasso,
    )?;
    let paths = simulate_paths(&model, &data.panel, &sim)?;
    let levels = args.levels.unwrap_or_else(percent_levels);
    let fan = quantile_fan(&paths, &levels)?;

    let out = ctx.ensure_out_dir()?;
    output::write_text(&out.join("quantiles.csv"), &output::quantiles_csv(origin, &fan))?;
    let meta = serde_json::json!({
        "origin": origin.to_string(),
        "window_length": args.window_length,
        "num_paths": sim.num_paths,
        "horizon_days": sim.horizon_days,
        "seed": sim.seed,
        "rng": RNG_NAME,
        "residual_sampling": sim.residual_sampling,
        "levels": fan.levels,
    });
    output::write_text(
        &out.join("sim_meta.json"),
        &serde_json::to_string_pretty(&meta).expect("serializable"),
    )?;
    if args.dump_paths {
        let mut bytes = Vec::with_capacity(24 + paths.values().len() * 8);
        for dim in [sim.num_paths as u64, sim.horizon_days as u64, 24u64] {
            bytes.extend_from_slice(&dim.to_le_bytes());
        }
        for v in paths.values() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(out.join("paths.bin"), bytes)
            .map_err(|e| Error::io(out.join("paths.bin"), e))?;
    }
    println!(
        "simulate: {} paths, horizon {} days, origin {origin}, seed {} -> {}",
        sim.num_paths,
        sim.horizon_days,
        sim.seed,
        out.display()
    );
    Ok(())
}
