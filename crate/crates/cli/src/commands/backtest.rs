//! Rolling-window backtest end-to-end: error tensors, metrics, model
//! comparison and per-model coefficient reports.

use std::path::PathBuf;

use chrono::NaiveDate;
use clap::Args as ClapArgs;

use powercast::backtest::{run_backtest, Dataset};
use powercast::error::Result;
use powercast::market::{fmt_f64, forward_fill, ExchangeCalendar, FuturesBook, PricePanel};
use powercast::models::{fit_ar24, fit_future_model};
use powercast::calendar::HolidaySet;
use powercast::{BacktestConfig, ModelKind};

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
    /// Number of rolling windows.
    #[arg(long)]
    windows: Option<usize>,
    /// Forecast horizon in days.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    window_length: Option<usize>,
    /// Last in-sample day of the first window.
    #[arg(long)]
    first_origin: Option<NaiveDate>,
    /// Comma-separated subset of future,ar24,ar_how.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<ModelKind>>,
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long)]
    span_exponent: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    path_patience: Option<usize>,
}

pub fn load_dataset(
    ctx: &RunContext,
    prices: Option<PathBuf>,
    futures: Option<PathBuf>,
    holidays: Option<PathBuf>,
) -> Result<Dataset> {
    let prices_path = ctx.input(prices, ctx.file.prices.as_ref(), "prices")?;
    let futures_path = ctx.input(futures, ctx.file.futures.as_ref(), "futures")?;
    let holidays = match holidays.or_else(|| ctx.file.holidays.clone()) {
        Some(p) => HolidaySet::load(p)?,
        None => HolidaySet::empty(),
    };
    let (panel, _) = PricePanel::load(prices_path)?;
    let book = FuturesBook::load(futures_path)?;
    let calendar = ExchangeCalendar::new(holidays.clone());
    let book = forward_fill(&book, &calendar, ctx.max_fill_days());
    Ok(Dataset {
        panel,
        book,
        holidays,
    })
}

fn apply_overrides(cfg: &mut BacktestConfig, args: &Args) {
    if let Some(v) = args.windows {
        cfg.num_windows = v;
    }
    if let Some(v) = args.horizon {
        cfg.horizon_days = v;
    }
    if let Some(v) = args.window_length {
        cfg.window_length = v;
    }
    if let Some(v) = args.first_origin {
        cfg.first_origin = Some(v);
    }
    if let Some(v) = &args.models {
        cfg.models = v.clone();
    }
    if let Some(v) = args.grid_size {
        cfg.lasso.grid_size = v;
    }
    if let Some(v) = args.span_exponent {
        cfg.lasso.span_exponent = v;
    }
    if let Some(v) = args.tol {
        cfg.lasso.tol = v;
    }
    if let Some(v) = args.path_patience {
        cfg.lasso.path_patience = v;
    }
}

pub fn run(ctx: &RunContext, args: Args) -> Result<()> {
    let data = load_dataset(
        ctx,
        args.prices.clone(),
        args.futures.clone(),
        args.holidays.clone(),
    )?;
    let mut cfg = ctx.file.backtest.clone().unwrap_or_default();
    apply_overrides(&mut cfg, &args);

    let result = run_backtest(&cfg, &data)?;
    let out = ctx.ensure_out_dir()?;

    output::write_text(&out.join("errors.csv"), &output::errors_csv(&result))?;
    output::write_text(
        &out.join("metrics.json"),
        &serde_json::to_string_pretty(&output::metrics_json(&result)).expect("serializable"),
    )?;
    output::write_text(&out.join("inclusion.csv"), &output::inclusion_csv(&result))?;

    // Pairwise DM comparisons when several models ran.
    let kinds: Vec<ModelKind> = result.tensors.keys().copied().collect();
    for i in 0..kinds.len() {
        for j in i + 1..kinds.len() {
            let rows = output::dm_rows(&result.tensors[&kinds[i]], &result.tensors[&kinds[j]])?;
            let name = format!("dm_{}_{}.csv", kinds[i], kinds[j]);
            output::write_text(&out.join(name), &output::dm_csv(kinds[i], kinds[j], rows.as_slice()))?;
        }
    }

    // Coefficient reports from the first window's fits.
    let first = &result.windows[0];
    let mut coeffs = String::from("model,hour,column,beta,selected_lambda,bic\n");
    if cfg.models.contains(&ModelKind::Future) {
        let model = fit_future_model(
            &data.panel,
            &data.book,
            &data.holidays,
            first.train,
            cfg.horizon_days,
            &cfg.lasso,
        )?;
        for (h, slots) in model.slots.iter().enumerate() {
            let slot = &slots[0];
            for &(j, b) in &slot.coefficients {
                coeffs.push_str(&format!(
                    "future,{},{},{},{},{}\n",
                    h + 1,
                    model.columns[j].name,
                    fmt_f64(b),
                    fmt_f64(slot.lambda),
                    fmt_f64(slot.bic)
                ));
            }
        }
        output::write_text(
            &out.join("model_dump.json"),
            &serde_json::to_string_pretty(&model.dump_json()).expect("serializable"),
        )?;
    }
    if cfg.models.contains(&ModelKind::Ar24) {
        let model = fit_ar24(&data.panel, &data.holidays, first.train, &cfg.lasso)?;
        for (h, slot) in model.slots.iter().enumerate() {
            for &(j, b) in &slot.coefficients {
                coeffs.push_str(&format!(
                    "ar24,{},{},{},{},{}\n",
                    h + 1,
                    model.columns[j].name,
                    fmt_f64(b),
                    fmt_f64(slot.lambda),
                    fmt_f64(slot.bic)
                ));
            }
        }
    }
    output::write_text(&out.join("coefficients.csv"), &coeffs)?;

    // Headline table.
    println!("windows: {} (skipped {})", result.windows.len(), result.skipped.len());
    let k_final = cfg.horizon_days * 24;
    println!("model      MMAE_{k_final}");
    for (kind, tensor) in &result.tensors {
        let m = powercast::backtest::mmae(tensor, k_final)?;
        println!("{:<10} {:.4}", kind.to_string(), m);
    }
    println!("outputs -> {}", out.display());
    Ok(())
}
