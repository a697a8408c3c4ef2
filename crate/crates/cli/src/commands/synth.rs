//! Synthetic dataset emission in the loader schemas.

use chrono::NaiveDate;
use clap::Args as ClapArgs;

use powercast::error::Result;
use powercast::synth::generate;

use crate::config::RunContext;
use crate::output::write_text;

#[derive(Debug, ClapArgs)]
pub struct Args {
    #[arg(long)]
    days: Option<usize>,
    #[arg(long)]
    start: Option<NaiveDate>,
    /// Futures signal strength in [0, 1].
    #[arg(long)]
    signal: Option<f64>,
    #[arg(long)]
    noise_sd: Option<f64>,
    #[arg(long)]
    futures_noise_sd: Option<f64>,
    #[arg(long)]
    latent_ar: Option<f64>,
    #[arg(long)]
    latent_sd: Option<f64>,
}

pub fn run(ctx: &RunContext, args: Args) -> Result<()> {
    let mut cfg = ctx.file.synth.unwrap_or_default();
    if let Some(v) = args.days {
        cfg.num_days = v;
    }
    if let Some(v) = args.start {
        cfg.start = v;
    }
    if let Some(v) = args.signal {
        cfg.futures_signal_strength = v;
    }
    if let Some(v) = args.noise_sd {
        cfg.noise_sd = v;
    }
    if let Some(v) = args.futures_noise_sd {
        cfg.futures_noise_sd = v;
    }
    if let Some(v) = args.latent_ar {
        cfg.latent_ar = v;
    }
    if let Some(v) = args.latent_sd {
        cfg.latent_sd = v;
    }
    if let Some(seed) = ctx.seed_override {
        cfg.seed = seed;
    }

    let data = generate(&cfg)?;
    let out = ctx.ensure_out_dir()?;
    data.panel.save(out.join("prices.csv"))?;
    data.book.save(out.join("futures.csv"))?;
    data.holidays.save(out.join("holidays.csv"))?;
    let meta = serde_json::json!({ "generator": "synth", "config": cfg });
    write_text(
        &out.join("synth_meta.json"),
        &serde_json::to_string_pretty(&meta).expect("serializable"),
    )?;
    println!(
        "synth: {} days from {}, {} quotes -> {}",
        cfg.num_days,
        cfg.start,
        data.book.len(),
        out.display()
    );
    Ok(())
}
