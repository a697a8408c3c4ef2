//! Regression-matrix dump for external inspection.

use std::fmt::Write as _;
use std::path::PathBuf;

use chrono::NaiveDate;
use clap::Args as ClapArgs;

use powercast::calendar::DateRange;
use powercast::error::{Error, Result};
use powercast::features::build_matrix;
use powercast::market::fmt_f64;

use crate::config::RunContext;
use crate::output::write_text;

#[derive(Debug, ClapArgs)]
pub struct Args {
    #[arg(long)]
    prices: Option<PathBuf>,
    #[arg(long)]
    futures: Option<PathBuf>,
    #[arg(long)]
    holidays: Option<PathBuf>,
    /// Hour of the day, 1..=24.
    #[arg(long)]
    hour: u8,
    #[arg(long)]
    from: NaiveDate,
    #[arg(long)]
    to: NaiveDate,
}

pub fn run(ctx: &RunContext, args: Args) -> Result<()> {
    if !(1..=24).contains(&args.hour) {
        return Err(Error::domain(format!("hour {} outside 1..24", args.hour)));
    }
    let data = super::backtest::load_dataset(
        ctx,
        args.prices.clone(),
        args.futures.clone(),
        args.holidays.clone(),
    )?;
    let range = DateRange::new(args.from, args.to)?;
    let matrix = build_matrix(&data.panel, &data.book, &data.holidays, args.hour, range)?;

    let mut out = String::from("date,response");
    for col in &matrix.table.columns {
        out.push(',');
        out.push_str(&col.name);
    }
    out.push('\n');
    for (row, y) in matrix.table.rows.iter().zip(&matrix.response) {
        write!(out, "{},{}", row.target_date, fmt_f64(*y)).expect("write to string");
        for v in &row.values {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    let dir = ctx.ensure_out_dir()?;
    let path = dir.join(format!("features_h{:02}.csv", args.hour));
    write_text(&path, &out)?;
    println!(
        "features: {} rows x {} columns -> {}",
        matrix.table.num_rows(),
        matrix.table.num_columns(),
        path.display()
    );
    Ok(())
}
