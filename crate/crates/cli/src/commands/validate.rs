//! Input validation and coverage report.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args as ClapArgs;

use powercast::calendar::HolidaySet;
use powercast::error::Result;
use powercast::market::{ExchangeCalendar, FuturesBook, PricePanel, Product, Variant};

use crate::config::RunContext;

/// Series trade at least this often on business days in healthy data; the
/// report flags anything below, it does not reject.
const COVERAGE_SCREEN: f64 = 0.75;

#[derive(Debug, ClapArgs)]
pub struct Args {
    #[arg(long)]
    prices: Option<PathBuf>,
    #[arg(long)]
    futures: Option<PathBuf>,
    #[arg(long)]
    holidays: Option<PathBuf>,
}

pub fn run(ctx: &RunContext, args: Args) -> Result<()> {
    let prices_path = ctx.input(args.prices, ctx.file.prices.as_ref(), "prices")?;
    let futures_path = ctx.input(args.futures, ctx.file.futures.as_ref(), "futures")?;
    let holidays = match args.holidays.or_else(|| ctx.file.holidays.clone()) {
        Some(p) => HolidaySet::load(p)?,
        None => HolidaySet::empty(),
    };

    let (panel, report) = PricePanel::load(&prices_path)?;
    println!(
        "prices: {} .. {} ({} days, {} hourly values)",
        report.first_date,
        report.last_date,
        panel.num_days(),
        panel.num_days() * 24
    );
    if report.repaired_duplicates > 0 {
        println!("  repaired duplicates: {}", report.repaired_duplicates);
    }
    println!("holidays: {} dates", holidays.len());

    let book = FuturesBook::load(&futures_path)?;
    if book.is_empty() {
        println!("futures: empty book");
        return Ok(());
    }
    let first = book.first_trade_date().expect("non-empty");
    let last = book.last_trade_date().expect("non-empty");
    println!("futures: {} quotes, {} .. {}", book.len(), first, last);

    let calendar = ExchangeCalendar::new(holidays);
    let mut trading_days = 0usize;
    let mut day = first;
    while day <= last {
        if calendar.is_trading_day(day) {
            trading_days += 1;
        }
        day = day.succ_opt().expect("date arithmetic");
    }

    // Quote counts per maturity series and distinct trade dates per product.
    let mut series: BTreeMap<(Product, Variant, u32), usize> = BTreeMap::new();
    let mut product_days: BTreeMap<(Product, Variant), std::collections::BTreeSet<chrono::NaiveDate>> =
        BTreeMap::new();
    for (key, _) in book.iter() {
        if calendar.is_trading_day(key.trade_date) {
            *series.entry((key.product, key.variant, key.maturity)).or_default() += 1;
            product_days
                .entry((key.product, key.variant))
                .or_default()
                .insert(key.trade_date);
        }
    }
    // Some maturities can only trade on specific weekdays (a weekend
    // future five days out exists on Mondays only), so the trading-ratio
    // screen applies per product, not per maturity.
    println!("trading ratio per product ({trading_days} trading days):");
    for ((product, variant), days) in &product_days {
        let ratio = days.len() as f64 / trading_days.max(1) as f64;
        let flag = if ratio < COVERAGE_SCREEN { "  WARN below 75%" } else { "" };
        println!("  {product},{variant}: {} active days, ratio {ratio:.3}{flag}", days.len());
    }
    println!("coverage per maturity series:");
    for ((product, variant, maturity), count) in &series {
        println!("  {product},{variant},m{maturity}: {count} quotes");
    }
    Ok(())
}
