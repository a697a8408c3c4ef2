//! Spot price panel and futures book: ingestion, validation, persistence,
//! and the forward-fill rule for non-trading days.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::calendar::{DateRange, HolidaySet};
use crate::error::{Error, Result};

/// Floating point formatting used by every emitted file: 17 significant
/// digits, enough to round-trip an f64 exactly and keep reruns byte-identical.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Hourly day-ahead prices on a gapless range of dates. Hours carry the
/// published labels 1..=24; exactly 24 slots per day are required.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    start: NaiveDate,
    /// Row-major `[day][hour]`, 24 entries per day.
    data: Vec<f64>,
}

/// Ingestion summary for a prices file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriceLoadReport {
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
    /// Duplicate (date, hour) rows that repeated the same price.
    pub repaired_duplicates: usize,
}

impl PricePanel {
    pub fn from_rows(start: NaiveDate, rows: Vec<[f64; 24]>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::domain("price panel must contain at least one day"));
        }
        let mut data = Vec::with_capacity(rows.len() * 24);
        for row in &rows {
            data.extend_from_slice(row);
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "non-finite price at day {} hour {}",
                bad / 24,
                bad % 24 + 1
            )));
        }
        Ok(PricePanel { start, data })
    }

    pub fn first_date(&self) -> NaiveDate {
        self.start
    }

    pub fn last_date(&self) -> NaiveDate {
        self.start + Days::new(self.num_days() as u64 - 1)
    }

    pub fn num_days(&self) -> usize {
        self.data.len() / 24
    }

    pub fn range(&self) -> DateRange {
        DateRange {
            start: self.first_date(),
            end: self.last_date(),
        }
    }

    /// Price for `date` and zero-based hour index (hour label minus one).
    pub fn value(&self, date: NaiveDate, hour_idx: usize) -> Option<f64> {
        debug_assert!(hour_idx < 24);
        let off = (date - self.start).num_days();
        if off < 0 || off as usize >= self.num_days() {
            return None;
        }
        Some(self.data[off as usize * 24 + hour_idx])
    }

    pub fn day(&self, date: NaiveDate) -> Option<&[f64]> {
        let off = (date - self.start).num_days();
        if off < 0 || off as usize >= self.num_days() {
            return None;
        }
        let i = off as usize * 24;
        Some(&self.data[i..i + 24])
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, PriceLoadReport)> {
        let path = path.as_ref();
        let mut reader = open_csv(path, &["date", "hour", "price"])?;
        let mut cells: BTreeMap<NaiveDate, [Option<f64>; 24]> = BTreeMap::new();
        let mut repaired = 0usize;
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| Error::schema(path, line, e.to_string()))?;
            if record.len() != 3 {
                return Err(Error::schema(
                    path,
                    line,
                    format!("expected 3 fields, got {}", record.len()),
                ));
            }
            let date = parse_date(path, line, &record[0])?;
            let hour: u8 = record[1]
                .trim()
                .parse()
                .map_err(|e| Error::schema(path, line, format!("bad hour: {e}")))?;
            if !(1..=24).contains(&hour) {
                return Err(Error::schema(path, line, format!("hour {hour} outside 1..24")));
            }
            let price = parse_price(path, line, &record[2])?;
            let slot = &mut cells.entry(date).or_insert([None; 24])[hour as usize - 1];
            match slot {
                None => *slot = Some(price),
                Some(existing) if *existing == price => repaired += 1,
                Some(existing) => {
                    return Err(Error::schema(
                        path,
                        line,
                        format!(
                            "conflicting duplicate for ({date}, {hour}): {existing} vs {price}"
                        ),
                    ))
                }
            }
        }
        let first = *cells
            .keys()
            .next()
            .ok_or_else(|| Error::domain(format!("{}: no price rows", path.display())))?;
        let last = *cells.keys().next_back().expect("non-empty");
        let mut missing_dates = Vec::new();
        let mut rows = Vec::with_capacity(cells.len());
        let mut date = first;
        while date <= last {
            match cells.get(&date) {
                None => missing_dates.push(date),
                Some(day) => {
                    if let Some(h) = day.iter().position(Option::is_none) {
                        return Err(Error::domain(format!(
                            "{}: missing price for ({date}, {})",
                            path.display(),
                            h + 1
                        )));
                    }
                    rows.push(std::array::from_fn(|h| day[h].unwrap()));
                }
            }
            date = date.succ_opt().expect("date arithmetic");
        }
        if !missing_dates.is_empty() {
            let shown: Vec<String> = missing_dates.iter().take(10).map(|d| d.to_string()).collect();
            let more = missing_dates.len().saturating_sub(10);
            let suffix = if more > 0 { format!(" (+{more} more)") } else { String::new() };
            return Err(Error::domain(format!(
                "{}: gap in dates, missing {}{suffix}",
                path.display(),
                shown.join(", ")
            )));
        }
        let panel = PricePanel::from_rows(first, rows)?;
        Ok((
            panel,
            PriceLoadReport {
                first_date: first,
                last_date: last,
                repaired_duplicates: repaired,
            },
        ))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("date,hour,price\n");
        let mut date = self.first_date();
        for day in 0..self.num_days() {
            for h in 0..24 {
                writeln!(out, "{date},{},{}", h + 1, fmt_f64(self.data[day * 24 + h]))
                    .expect("write to string");
            }
            date = date.succ_opt().expect("date arithmetic");
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Product {
    Day,
    Week,
    Weekend,
    Month,
}

impl Product {
    pub const ALL: [Product; 4] = [Product::Day, Product::Week, Product::Weekend, Product::Month];

    pub fn as_str(self) -> &'static str {
        match self {
            Product::Day => "day",
            Product::Week => "week",
            Product::Weekend => "weekend",
            Product::Month => "month",
        }
    }
}

impl FromStr for Product {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "day" => Ok(Product::Day),
            "week" => Ok(Product::Week),
            "weekend" => Ok(Product::Weekend),
            "month" => Ok(Product::Month),
            other => Err(format!("unknown product {other:?}")),
        }
    }
}

impl fmt::Display for Product {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Base,
    Peak,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::Base, Variant::Peak];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::Peak => "peak",
        }
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "base" => Ok(Variant::Base),
            "peak" => Ok(Variant::Peak),
            other => Err(format!("unknown variant {other:?}")),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identity of one end-of-day settlement quote in Musiela parameterization:
/// maturity counts days from trade date to the start of delivery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QuoteKey {
    pub trade_date: NaiveDate,
    pub product: Product,
    pub variant: Variant,
    pub maturity: u32,
}

impl QuoteKey {
    pub fn new(trade_date: NaiveDate, product: Product, variant: Variant, maturity: u32) -> Self {
        QuoteKey {
            trade_date,
            product,
            variant,
            maturity,
        }
    }

    fn series(&self) -> (Product, Variant, u32) {
        (self.product, self.variant, self.maturity)
    }
}

/// End-of-day futures settlements as observed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FuturesBook {
    quotes: BTreeMap<QuoteKey, f64>,
}

impl FuturesBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: QuoteKey, price: f64) {
        self.quotes.insert(key, price);
    }

    pub fn get(&self, key: &QuoteKey) -> Option<f64> {
        self.quotes.get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.quotes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quotes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&QuoteKey, &f64)> {
        self.quotes.iter()
    }

    pub fn first_trade_date(&self) -> Option<NaiveDate> {
        self.quotes.keys().next().map(|k| k.trade_date)
    }

    pub fn last_trade_date(&self) -> Option<NaiveDate> {
        self.quotes.keys().next_back().map(|k| k.trade_date)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if raw.trim().is_empty() {
            return Ok(FuturesBook::new());
        }
        let mut reader = open_csv(path, &["trade_date", "product", "variant", "maturity", "price"])?;
        let mut quotes = BTreeMap::new();
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| Error::schema(path, line, e.to_string()))?;
            if record.len() != 5 {
                return Err(Error::schema(
                    path,
                    line,
                    format!("expected 5 fields, got {}", record.len()),
                ));
            }
            let trade_date = parse_date(path, line, &record[0])?;
            let product: Product = record[1]
                .trim()
                .parse()
                .map_err(|e| Error::schema(path, line, e))?;
            let variant: Variant = record[2]
                .trim()
                .parse()
                .map_err(|e| Error::schema(path, line, e))?;
            let maturity: i64 = record[3]
                .trim()
                .parse()
                .map_err(|e| Error::schema(path, line, format!("bad maturity: {e}")))?;
            if maturity < 1 {
                return Err(Error::schema(
                    path,
                    line,
                    format!("maturity {maturity} must be >= 1"),
                ));
            }
            let price = parse_price(path, line, &record[4])?;
            let key = QuoteKey::new(trade_date, product, variant, maturity as u32);
            if let Some(existing) = quotes.insert(key, price) {
                if existing != price {
                    return Err(Error::schema(
                        path,
                        line,
                        format!(
                            "conflicting duplicate for ({trade_date},{product},{variant},{maturity}): {existing} vs {price}"
                        ),
                    ));
                }
            }
        }
        Ok(FuturesBook { quotes })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("trade_date,product,variant,maturity,price\n");
        for (k, v) in &self.quotes {
            writeln!(
                out,
                "{},{},{},{},{}",
                k.trade_date,
                k.product,
                k.variant,
                k.maturity,
                fmt_f64(*v)
            )
            .expect("write to string");
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Trading-day calendar: weekdays minus the public holidays.
#[derive(Debug, Clone, Default)]
pub struct ExchangeCalendar {
    holidays: HolidaySet,
}

impl ExchangeCalendar {
    pub fn new(holidays: HolidaySet) -> Self {
        ExchangeCalendar { holidays }
    }

    pub fn is_trading_day(&self, date: NaiveDate) -> bool {
        !matches!(date.weekday(), Weekday::Sat | Weekday::Sun) && !self.holidays.contains(date)
    }

    /// Most recent trading day at or before `date`. Gives up after one year,
    /// which only happens with a degenerate holiday file.
    pub fn last_trading_day_on_or_before(&self, date: NaiveDate) -> Option<NaiveDate> {
        let mut d = date;
        for _ in 0..366 {
            if self.is_trading_day(d) {
                return Some(d);
            }
            d = d.pred_opt()?;
        }
        None
    }
}

/// Whether a quote was observed or carried over a non-trading day.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Observed,
    ForwardFilled { source: NaiveDate },
}

/// Futures book with non-trading days filled from the most recent observed
/// settlement of the identical (product, variant, maturity) series.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilledFuturesBook {
    entries: BTreeMap<QuoteKey, (f64, Provenance)>,
}

impl FilledFuturesBook {
    pub fn get(&self, key: &QuoteKey) -> Option<(f64, Provenance)> {
        self.entries.get(key).copied()
    }

    pub fn price(&self, key: &QuoteKey) -> Option<f64> {
        self.entries.get(key).map(|(p, _)| *p)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&QuoteKey, &(f64, Provenance))> {
        self.entries.iter()
    }

    /// Flatten back into a plain book, keeping filled prices.
    pub fn to_book(&self) -> FuturesBook {
        FuturesBook {
            quotes: self.entries.iter().map(|(k, (p, _))| (*k, *p)).collect(),
        }
    }
}

/// Insert, for every non-trading date between the book's first and last
/// trade date, the most recent prior settlement of each series, as long as
/// the source lies within `max_fill_days`. Observed quotes are never
/// overwritten; series without a prior observation stay absent.
pub fn forward_fill(
    book: &FuturesBook,
    calendar: &ExchangeCalendar,
    max_fill_days: u32,
) -> FilledFuturesBook {
    let mut entries: BTreeMap<QuoteKey, (f64, Provenance)> = book
        .quotes
        .iter()
        .map(|(k, p)| (*k, (*p, Provenance::Observed)))
        .collect();
    let Some(last) = book.last_trade_date() else {
        return FilledFuturesBook { entries };
    };

    // Observed dates per series, in trade-date order (BTreeMap key order).
    let mut series: BTreeMap<(Product, Variant, u32), Vec<(NaiveDate, f64)>> = BTreeMap::new();
    for (k, p) in &book.quotes {
        series.entry(k.series()).or_default().push((k.trade_date, *p));
    }

    for ((product, variant, maturity), observed) in &series {
        for (idx, (date, price)) in observed.iter().enumerate() {
            let next_observed = observed.get(idx + 1).map(|(d, _)| *d);
            for offset in 1..=max_fill_days as u64 {
                let d = *date + Days::new(offset);
                if d > last || next_observed.is_some_and(|n| d >= n) {
                    break;
                }
                if calendar.is_trading_day(d) {
                    continue;
                }
                let key = QuoteKey::new(d, *product, *variant, *maturity);
                entries
                    .entry(key)
                    .or_insert((*price, Provenance::ForwardFilled { source: *date }));
            }
        }
    }
    FilledFuturesBook { entries }
}

fn open_csv(path: &Path, expected_header: &[&str]) -> Result<csv::Reader<std::fs::File>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::schema(path, 1, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::schema(path, 1, e.to_string()))?;
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected_header {
        return Err(Error::schema(
            path,
            1,
            format!("expected header {expected_header:?}, got {got:?}"),
        ));
    }
    Ok(reader)
}

fn parse_date(path: &Path, line: usize, field: &str) -> Result<NaiveDate> {
    field
        .trim()
        .parse::<NaiveDate>()
        .map_err(|e| Error::schema(path, line, format!("bad date {field:?}: {e}")))
}

fn parse_price(path: &Path, line: usize, field: &str) -> Result<f64> {
    let price: f64 = field
        .trim()
        .parse()
        .map_err(|e| Error::schema(path, line, format!("bad price: {e}")))?;
    if !price.is_finite() {
        return Err(Error::schema(path, line, format!("non-finite price {price}")));
    }
    Ok(price)
}
