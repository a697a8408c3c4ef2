//! Regressor assembly: for each target day the full row of price lags,
//! aligned futures quotes, weekday dummies and season splines, with
//! per-column trade-date metadata for observability checks.

use chrono::{Datelike, Days, NaiveDate, Weekday};

use crate::calendar::{
    dow_dummies, monday_of_week, DateRange, HolidaySet, SeasonBasis, SEASON_NAMES,
};
use crate::error::{Error, Result};
use crate::market::{
    ExchangeCalendar, FilledFuturesBook, PricePanel, Product, Provenance, QuoteKey, Variant,
};

/// Price lags per hour.
pub const NUM_PRICE_LAGS: usize = 7;
/// Historic values (lags) for day futures.
pub const NUM_DAY_LAGS: usize = 7;
/// Weekly lags for week futures.
pub const NUM_WEEK_LAGS: usize = 3;
/// Weekly lags for weekend futures.
pub const NUM_WEEKEND_LAGS: usize = 1;
/// Day-future maturities.
pub const DAY_MATURITIES: [u32; 5] = [2, 3, 4, 5, 6];
/// Week-future maturities (Friday-traded quotes for the next four weeks).
pub const WEEK_MATURITIES: [u32; 4] = [3, 10, 17, 24];
/// Weekend-future maturities, base variant: current and following weekend.
pub const WEEKEND_MATURITIES_BASE: [u32; 10] = [1, 2, 3, 4, 5, 8, 9, 10, 11, 12];
/// Weekend-future maturities, peak variant: the 8..12 series trade too
/// rarely and are excluded.
pub const WEEKEND_MATURITIES_PEAK: [u32; 5] = [1, 2, 3, 4, 5];

/// Which regressor blocks a model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureSpec {
    pub include_futures: bool,
    pub include_splines: bool,
}

impl FeatureSpec {
    /// Full futures-augmented set: 168 ar + 144 futures + 7 dummies + 4 splines.
    pub fn full() -> Self {
        FeatureSpec {
            include_futures: true,
            include_splines: true,
        }
    }

    /// Pure autoregressive benchmark set: 168 ar + 7 dummies.
    pub fn ar24() -> Self {
        FeatureSpec {
            include_futures: false,
            include_splines: false,
        }
    }

    pub fn num_columns(&self) -> usize {
        168 + if self.include_futures { 144 } else { 0 }
            + 7
            + if self.include_splines { 4 } else { 0 }
    }

    /// Column layout: ar block (hour-major, lag-minor), then per variant
    /// (base first) day / week / weekend / month futures, then weekday
    /// dummies Mon..Sun, then season splines.
    pub fn columns(&self) -> Vec<FeatureColumn> {
        let mut cols = Vec::with_capacity(self.num_columns());
        for hour in 1..=24u8 {
            for lag in 1..=NUM_PRICE_LAGS as u8 {
                cols.push(FeatureColumn::new(ColumnKind::Ar { hour, lag }));
            }
        }
        if self.include_futures {
            for variant in Variant::ALL {
                for m in DAY_MATURITIES {
                    for lag in 0..=NUM_DAY_LAGS as u8 {
                        cols.push(FeatureColumn::new(ColumnKind::Future {
                            product: Product::Day,
                            variant,
                            maturity: m,
                            lag,
                        }));
                    }
                }
                for m in WEEK_MATURITIES {
                    for lag in 0..=NUM_WEEK_LAGS as u8 {
                        cols.push(FeatureColumn::new(ColumnKind::Future {
                            product: Product::Week,
                            variant,
                            maturity: m,
                            lag,
                        }));
                    }
                }
                for &m in weekend_maturities(variant) {
                    for lag in 0..=NUM_WEEKEND_LAGS as u8 {
                        cols.push(FeatureColumn::new(ColumnKind::Future {
                            product: Product::Weekend,
                            variant,
                            maturity: m,
                            lag,
                        }));
                    }
                }
                cols.push(FeatureColumn::new(ColumnKind::Future {
                    product: Product::Month,
                    variant,
                    maturity: 1,
                    lag: 0,
                }));
            }
        }
        for wd in [
            Weekday::Mon,
            Weekday::Tue,
            Weekday::Wed,
            Weekday::Thu,
            Weekday::Fri,
            Weekday::Sat,
            Weekday::Sun,
        ] {
            cols.push(FeatureColumn::new(ColumnKind::Dummy { weekday: wd }));
        }
        if self.include_splines {
            for season in 0..4 {
                cols.push(FeatureColumn::new(ColumnKind::Spline { season }));
            }
        }
        debug_assert_eq!(cols.len(), self.num_columns());
        cols
    }
}

pub fn weekend_maturities(variant: Variant) -> &'static [u32] {
    match variant {
        Variant::Base => &WEEKEND_MATURITIES_BASE,
        Variant::Peak => &WEEKEND_MATURITIES_PEAK,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    /// Price of `hour` on the target day minus `lag` days.
    Ar { hour: u8, lag: u8 },
    /// Aligned futures quote; `lag` counts days for day futures and weeks
    /// for week/weekend futures.
    Future {
        product: Product,
        variant: Variant,
        maturity: u32,
        lag: u8,
    },
    /// Effective-weekday indicator (holidays fold onto Sunday).
    Dummy { weekday: Weekday },
    /// Season spline component, 0..4 = winter, spring, summer, autumn.
    Spline { season: u8 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureColumn {
    pub name: String,
    pub kind: ColumnKind,
}

impl FeatureColumn {
    fn new(kind: ColumnKind) -> Self {
        let name = match kind {
            ColumnKind::Ar { hour, lag } => format!("ar.h{hour:02}.l{lag}"),
            ColumnKind::Future {
                product,
                variant,
                maturity,
                lag,
            } => {
                let p = match product {
                    Product::Day => "day",
                    Product::Week => "week",
                    Product::Weekend => "wkend",
                    Product::Month => "month",
                };
                format!("fut.{p}.{variant}.m{maturity}.l{lag}")
            }
            ColumnKind::Dummy { weekday } => {
                let wd = match weekday {
                    Weekday::Mon => "mon",
                    Weekday::Tue => "tue",
                    Weekday::Wed => "wed",
                    Weekday::Thu => "thu",
                    Weekday::Fri => "fri",
                    Weekday::Sat => "sat",
                    Weekday::Sun => "sun",
                };
                format!("dummy.{wd}")
            }
            ColumnKind::Spline { season } => format!("spline.{}", SEASON_NAMES[season as usize]),
        };
        FeatureColumn { name, kind }
    }

    pub fn is_future(&self) -> bool {
        matches!(self.kind, ColumnKind::Future { .. })
    }
}

/// One aligned futures cell: the value entering the design matrix, the
/// nominal trade date that decides observability, and the date the price
/// was actually observed (fill source). Deterministic cells (ar, dummies,
/// splines, structural zeros) carry no dates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignedValue {
    pub value: f64,
    pub trade_date: Option<NaiveDate>,
    pub source_date: Option<NaiveDate>,
    pub missing: bool,
}

impl AlignedValue {
    fn deterministic(value: f64) -> Self {
        AlignedValue {
            value,
            trade_date: None,
            source_date: None,
            missing: false,
        }
    }

    fn absent() -> Self {
        AlignedValue {
            value: 0.0,
            trade_date: None,
            source_date: None,
            missing: true,
        }
    }

    fn lookup(book: &FilledFuturesBook, key: QuoteKey) -> Self {
        match book.get(&key) {
            Some((price, prov)) => AlignedValue {
                value: price,
                trade_date: Some(key.trade_date),
                source_date: Some(match prov {
                    Provenance::Observed => key.trade_date,
                    Provenance::ForwardFilled { source } => source,
                }),
                missing: false,
            },
            None => AlignedValue {
                value: 0.0,
                trade_date: Some(key.trade_date),
                source_date: None,
                missing: true,
            },
        }
    }
}

/// Full regressor row for one target day.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedRow {
    pub target_date: NaiveDate,
    pub values: Vec<f64>,
    pub trade_dates: Vec<Option<NaiveDate>>,
    pub source_dates: Vec<Option<NaiveDate>>,
    pub missing: Vec<bool>,
}

impl AlignedRow {
    fn with_capacity(target_date: NaiveDate, p: usize) -> Self {
        AlignedRow {
            target_date,
            values: Vec::with_capacity(p),
            trade_dates: Vec::with_capacity(p),
            source_dates: Vec::with_capacity(p),
            missing: Vec::with_capacity(p),
        }
    }

    fn push(&mut self, v: AlignedValue) {
        self.values.push(v.value);
        self.trade_dates.push(v.trade_date);
        self.source_dates.push(v.source_date);
        self.missing.push(v.missing);
    }
}

/// Price lags: entry (hour j, lag k) = price of hour j on `target - k`,
/// hour-major and lag-minor, 24 x 7 = 168 values. The block is shared by
/// all 24 hourly models; only the response differs per hour.
pub fn ar_block(panel: &PricePanel, target: NaiveDate) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(24 * NUM_PRICE_LAGS);
    for hour_idx in 0..24 {
        for lag in 1..=NUM_PRICE_LAGS as u64 {
            let date = target - Days::new(lag);
            let v = panel.value(date, hour_idx).ok_or_else(|| {
                Error::domain(format!(
                    "insufficient history: no price for {date} (target {target})"
                ))
            })?;
            out.push(v);
        }
    }
    Ok(out)
}

/// Day futures: quote of maturity m at nominal trade date `target - 2 - k`.
/// End-of-day settlements publish at 18:00 while the day-ahead auction
/// closes at 12:00, so the freshest usable settlement is two days old.
pub fn align_day_futures(
    book: &FilledFuturesBook,
    target: NaiveDate,
    variant: Variant,
) -> Vec<AlignedValue> {
    let mut out = Vec::with_capacity(DAY_MATURITIES.len() * (NUM_DAY_LAGS + 1));
    for m in DAY_MATURITIES {
        for k in 0..=NUM_DAY_LAGS as u64 {
            let trade = target - Days::new(2 + k);
            out.push(AlignedValue::lookup(
                book,
                QuoteKey::new(trade, Product::Day, variant, m),
            ));
        }
    }
    out
}

/// Week futures: the last settlement observable before the target's week
/// (usually the previous Friday, earlier when holidays intervene), plus the
/// same maturities quoted 7k days before that.
pub fn align_week_futures(
    book: &FilledFuturesBook,
    calendar: &ExchangeCalendar,
    target: NaiveDate,
    variant: Variant,
) -> Vec<AlignedValue> {
    let before_week = monday_of_week(target).pred_opt().expect("date arithmetic");
    let base = calendar.last_trading_day_on_or_before(before_week);
    let mut out = Vec::with_capacity(WEEK_MATURITIES.len() * (NUM_WEEK_LAGS + 1));
    for m in WEEK_MATURITIES {
        for k in 0..=NUM_WEEK_LAGS as u64 {
            match base {
                Some(base) => {
                    let trade = base - Days::new(7 * k);
                    out.push(AlignedValue::lookup(
                        book,
                        QuoteKey::new(trade, Product::Week, variant, m),
                    ));
                }
                None => out.push(AlignedValue::absent()),
            }
        }
    }
    out
}

/// The rearranged weekend series: zero on business days; on weekend days
/// the quote of maturity m traded m days before the weekend's Saturday.
/// Saturday itself cannot see the maturity-1 settlement (published after
/// its auction closed), so that entry is zero as well.
fn weekend_series(
    book: &FilledFuturesBook,
    date: NaiveDate,
    variant: Variant,
    maturity: u32,
) -> AlignedValue {
    let saturday = match date.weekday() {
        Weekday::Sat => date,
        Weekday::Sun => date.pred_opt().expect("date arithmetic"),
        _ => return AlignedValue::deterministic(0.0),
    };
    if date.weekday() == Weekday::Sat && maturity == 1 {
        return AlignedValue::deterministic(0.0);
    }
    let trade = saturday - Days::new(maturity as u64);
    AlignedValue::lookup(book, QuoteKey::new(trade, Product::Weekend, variant, maturity))
}

/// Weekend futures: the rearranged series at the target and one week back.
pub fn align_weekend_futures(
    book: &FilledFuturesBook,
    target: NaiveDate,
    variant: Variant,
) -> Vec<AlignedValue> {
    let maturities = weekend_maturities(variant);
    let mut out = Vec::with_capacity(maturities.len() * (NUM_WEEKEND_LAGS + 1));
    for &m in maturities {
        for k in 0..=NUM_WEEKEND_LAGS as u64 {
            let date = target - Days::new(7 * k);
            out.push(weekend_series(book, date, variant, m));
        }
    }
    out
}

/// Month future: the settlement at the last trading day of the previous
/// calendar month, looked up with the maturity that points at the first of
/// the target's month. Constant across every target day of the month.
pub fn align_month_future(
    book: &FilledFuturesBook,
    calendar: &ExchangeCalendar,
    target: NaiveDate,
    variant: Variant,
) -> AlignedValue {
    let first_of_month =
        NaiveDate::from_ymd_opt(target.year(), target.month(), 1).expect("first of month");
    let prev = first_of_month.pred_opt().expect("date arithmetic");
    match calendar.last_trading_day_on_or_before(prev) {
        Some(trade) => {
            let maturity = (first_of_month - trade).num_days() as u32;
            AlignedValue::lookup(book, QuoteKey::new(trade, Product::Month, variant, maturity))
        }
        None => AlignedValue::absent(),
    }
}

/// Hour-independent regressor rows for a date range, one per target day.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub spec: FeatureSpec,
    pub columns: Vec<FeatureColumn>,
    pub rows: Vec<AlignedRow>,
}

impl FeatureTable {
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    /// Columns with at least one missing cell across the rows.
    pub fn missing_columns(&self) -> Vec<bool> {
        let mut out = vec![false; self.num_columns()];
        for row in &self.rows {
            for (flag, m) in out.iter_mut().zip(&row.missing) {
                *flag |= *m;
            }
        }
        out
    }

    /// Dense column-major copy of the values, n x p.
    pub fn column_major(&self) -> Vec<f64> {
        let (n, p) = (self.num_rows(), self.num_columns());
        let mut out = vec![0.0; n * p];
        for (i, row) in self.rows.iter().enumerate() {
            for (j, v) in row.values.iter().enumerate() {
                out[j * n + i] = *v;
            }
        }
        out
    }
}

fn push_exogenous(
    row: &mut AlignedRow,
    book: &FilledFuturesBook,
    holidays: &HolidaySet,
    calendar: &ExchangeCalendar,
    spec: FeatureSpec,
    season_basis: &SeasonBasis,
    target: NaiveDate,
) {
    if spec.include_futures {
        for variant in Variant::ALL {
            for v in align_day_futures(book, target, variant) {
                row.push(v);
            }
            for v in align_week_futures(book, calendar, target, variant) {
                row.push(v);
            }
            for v in align_weekend_futures(book, target, variant) {
                row.push(v);
            }
            row.push(align_month_future(book, calendar, target, variant));
        }
    }
    for v in dow_dummies(target, holidays) {
        row.push(AlignedValue::deterministic(v));
    }
    if spec.include_splines {
        for v in season_basis.values(target) {
            row.push(AlignedValue::deterministic(v));
        }
    }
}

/// Build the aligned regressor row for one target day.
pub fn aligned_row(
    panel: &PricePanel,
    book: &FilledFuturesBook,
    holidays: &HolidaySet,
    calendar: &ExchangeCalendar,
    spec: FeatureSpec,
    season_basis: &SeasonBasis,
    target: NaiveDate,
) -> Result<AlignedRow> {
    let mut row = AlignedRow::with_capacity(target, spec.num_columns());
    for v in ar_block(panel, target)? {
        row.push(AlignedValue::deterministic(v));
    }
    push_exogenous(&mut row, book, holidays, calendar, spec, season_basis, target);
    Ok(row)
}

/// Regressor row for a forecast target: futures, dummies and splines are
/// filled in, ar entries are zero placeholders to be substituted by the
/// forecast recursion.
pub fn exogenous_row(
    book: &FilledFuturesBook,
    holidays: &HolidaySet,
    calendar: &ExchangeCalendar,
    spec: FeatureSpec,
    season_basis: &SeasonBasis,
    target: NaiveDate,
) -> AlignedRow {
    let mut row = AlignedRow::with_capacity(target, spec.num_columns());
    for _ in 0..24 * NUM_PRICE_LAGS {
        row.push(AlignedValue::deterministic(0.0));
    }
    push_exogenous(&mut row, book, holidays, calendar, spec, season_basis, target);
    row
}

/// Assemble rows for every day of `range`. The panel must reach back 7 days
/// before the range start for the price lags.
pub fn build_feature_table(
    panel: &PricePanel,
    book: &FilledFuturesBook,
    holidays: &HolidaySet,
    spec: FeatureSpec,
    range: DateRange,
) -> Result<FeatureTable> {
    let calendar = ExchangeCalendar::new(holidays.clone());
    let season_basis = SeasonBasis::standard();
    let columns = spec.columns();
    let mut rows = Vec::with_capacity(range.num_days());
    for target in range.iter() {
        let row = aligned_row(panel, book, holidays, &calendar, spec, &season_basis, target)?;
        debug_assert_eq!(row.values.len(), columns.len());
        rows.push(row);
    }
    Ok(FeatureTable { spec, columns, rows })
}

/// Per-hour regression panel: shared regressor rows plus that hour's
/// response series.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub hour: u8,
    pub table: FeatureTable,
    pub response: Vec<f64>,
}

/// Response vector for one hour over the table's target dates.
pub fn response_for_hour(panel: &PricePanel, table: &FeatureTable, hour: u8) -> Result<Vec<f64>> {
    assert!((1..=24).contains(&hour));
    table
        .rows
        .iter()
        .map(|row| {
            panel
                .value(row.target_date, hour as usize - 1)
                .ok_or_else(|| Error::domain(format!("no price for target {}", row.target_date)))
        })
        .collect()
}

/// Full per-hour design matrix over `range`.
pub fn build_matrix(
    panel: &PricePanel,
    book: &FilledFuturesBook,
    holidays: &HolidaySet,
    hour: u8,
    range: DateRange,
) -> Result<DesignMatrix> {
    let table = build_feature_table(panel, book, holidays, FeatureSpec::full(), range)?;
    let response = response_for_hour(panel, &table, hour)?;
    Ok(DesignMatrix {
        hour,
        table,
        response,
    })
}

/// Per-row, per-column observability at a forecast origin: futures cells
/// are observable when their nominal trade date is at or before the origin;
/// deterministic cells always are.
pub fn observability_mask(table: &FeatureTable, origin: NaiveDate) -> Vec<Vec<bool>> {
    table
        .rows
        .iter()
        .map(|row| observable_columns(row, origin))
        .collect()
}

/// Column observability for a single forecast target, from the aligned row
/// built at that target.
pub fn observable_columns(row: &AlignedRow, origin: NaiveDate) -> Vec<bool> {
    row.trade_dates
        .iter()
        .map(|td| td.map_or(true, |t| t <= origin))
        .collect()
}

/// Column sets usable by the per-horizon model fits: the intersection of
/// per-target observability over horizons 1..=c. Per-target observability
/// alone is not monotone in the horizon (weekend columns are structural
/// zeros on weekday targets but carry future trade dates on a weekend in
/// between); intersecting up to each horizon restores monotonicity, and a
/// column dropped this way was either zero or unobservable at the horizon
/// that dropped it.
pub fn slot_observable_columns(forecast_rows: &[AlignedRow], origin: NaiveDate) -> Vec<Vec<bool>> {
    let mut out: Vec<Vec<bool>> = Vec::with_capacity(forecast_rows.len());
    for row in forecast_rows {
        let mut mask = observable_columns(row, origin);
        if let Some(prev) = out.last() {
            for (m, p) in mask.iter_mut().zip(prev) {
                *m &= *p;
            }
        }
        out.push(mask);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{forward_fill, FuturesBook};

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn constant_panel(start: &str, days: usize, value: f64) -> PricePanel {
        PricePanel::from_rows(d(start), vec![[value; 24]; days]).unwrap()
    }

    /// Book with quotes for every product/maturity on every trading day of
    /// [start, end], then forward-filled. Prices encode the trade date and
    /// maturity so tests can recognize what a lookup returned.
    fn dense_filled_book(
        start: &str,
        end: &str,
        cal: &ExchangeCalendar,
    ) -> (FilledFuturesBook, impl Fn(NaiveDate, u32) -> f64) {
        let price = |trade: NaiveDate, m: u32| {
            (trade - d("2016-01-01")).num_days() as f64 + m as f64 / 100.0
        };
        let mut book = FuturesBook::new();
        let mut day = d(start);
        while day <= d(end) {
            if cal.is_trading_day(day) {
                for variant in Variant::ALL {
                    for m in DAY_MATURITIES {
                        book.insert(QuoteKey::new(day, Product::Day, variant, m), price(day, m));
                    }
                    for m in WEEK_MATURITIES {
                        book.insert(QuoteKey::new(day, Product::Week, variant, m), price(day, m));
                    }
                    for &m in weekend_maturities(variant) {
                        book.insert(
                            QuoteKey::new(day, Product::Weekend, variant, m),
                            price(day, m),
                        );
                    }
                    for m in 1..=31 {
                        book.insert(QuoteKey::new(day, Product::Month, variant, m), price(day, m));
                    }
                }
            }
            day = day.succ_opt().unwrap();
        }
        (forward_fill(&book, cal, 7), price)
    }

    #[test]
    fn column_accounting() {
        let cols = FeatureSpec::full().columns();
        assert_eq!(cols.len(), 323);
        let count =
            |pred: &dyn Fn(&ColumnKind) -> bool| cols.iter().filter(|c| pred(&c.kind)).count();
        assert_eq!(count(&|k| matches!(k, ColumnKind::Ar { .. })), 168);
        for (product, variant, expect) in [
            (Product::Day, Variant::Base, 40),
            (Product::Day, Variant::Peak, 40),
            (Product::Week, Variant::Base, 16),
            (Product::Week, Variant::Peak, 16),
            (Product::Weekend, Variant::Base, 20),
            (Product::Weekend, Variant::Peak, 10),
            (Product::Month, Variant::Base, 1),
            (Product::Month, Variant::Peak, 1),
        ] {
            assert_eq!(
                count(&|k| matches!(k, ColumnKind::Future { product: p, variant: v, .. }
                    if *p == product && *v == variant)),
                expect,
                "{product} {variant}"
            );
        }
        assert_eq!(count(&|k| matches!(k, ColumnKind::Dummy { .. })), 7);
        assert_eq!(count(&|k| matches!(k, ColumnKind::Spline { .. })), 4);
        let mut names: Vec<&str> = cols.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), 323, "column names must be unique");

        assert_eq!(FeatureSpec::ar24().columns().len(), 175);
    }

    #[test]
    fn ar_block_values_and_errors() {
        let panel = constant_panel("2016-09-01", 40, 30.0);
        let block = ar_block(&panel, d("2016-09-20")).unwrap();
        assert_eq!(block.len(), 168);
        assert!(block.iter().all(|&v| v == 30.0));

        // Plant Y(target-1, hour 24) = 55: hour-major layout puts it at
        // index (24-1)*7 + (1-1).
        let mut rows = vec![[30.0; 24]; 40];
        rows[18][23] = 55.0; // 2016-09-19
        let panel = PricePanel::from_rows(d("2016-09-01"), rows).unwrap();
        let block = ar_block(&panel, d("2016-09-20")).unwrap();
        assert_eq!(block[23 * 7], 55.0);

        assert!(ar_block(&panel, d("2016-09-05")).is_err());
    }

    #[test]
    fn day_alignment_nominal_dates() {
        let cal = ExchangeCalendar::new(HolidaySet::empty());
        let (book, price) = dense_filled_book("2016-09-01", "2016-10-31", &cal);
        let vals = align_day_futures(&book, d("2016-09-30"), Variant::Base);
        assert_eq!(vals.len(), 40);
        // First maturity block (m=2), lag 0: traded two days before.
        assert_eq!(vals[0].trade_date, Some(d("2016-09-28")));
        assert_eq!(vals[0].value, price(d("2016-09-28"), 2));
        // Lags 3 and 4 land on the weekend and resolve to Friday's value.
        assert_eq!(vals[3].trade_date, Some(d("2016-09-25")));
        assert_eq!(vals[3].source_date, Some(d("2016-09-23")));
        assert_eq!(vals[3].value, price(d("2016-09-23"), 2));
        assert_eq!(vals[4].source_date, Some(d("2016-09-23")));
    }

    #[test]
    fn week_alignment_uses_last_trading_day_before_week() {
        let cal = ExchangeCalendar::new(HolidaySet::empty());
        let (book, price) = dense_filled_book("2016-09-01", "2016-10-31", &cal);
        let vals = align_week_futures(&book, &cal, d("2016-10-22"), Variant::Base);
        assert_eq!(vals.len(), 16);
        assert_eq!(vals[0].trade_date, Some(d("2016-10-14")));
        assert_eq!(vals[0].value, price(d("2016-10-14"), 3));
        // Lag steps go back whole weeks.
        assert_eq!(vals[1].trade_date, Some(d("2016-10-07")));
        assert_eq!(vals[3].trade_date, Some(d("2016-09-23")));

        // A Friday holiday moves the base to Thursday.
        let cal_hol = ExchangeCalendar::new(HolidaySet::new([d("2016-10-14")]));
        let (book_hol, _) = dense_filled_book("2016-09-01", "2016-10-31", &cal_hol);
        let vals = align_week_futures(&book_hol, &cal_hol, d("2016-10-22"), Variant::Base);
        assert_eq!(vals[0].trade_date, Some(d("2016-10-13")));
    }

    #[test]
    fn weekend_alignment_rules() {
        let cal = ExchangeCalendar::new(HolidaySet::empty());
        let (book, price) = dense_filled_book("2016-09-01", "2016-10-31", &cal);

        // Business-day targets: every cell is a deterministic zero.
        let fri = align_weekend_futures(&book, d("2016-09-30"), Variant::Base);
        assert_eq!(fri.len(), 20);
        assert!(fri
            .iter()
            .all(|v| v.value == 0.0 && v.trade_date.is_none() && !v.missing));

        // Sunday: maturity 1 traded the preceding Friday, maturity 2 Thursday.
        let sun = align_weekend_futures(&book, d("2016-10-02"), Variant::Base);
        assert_eq!(sun[0].trade_date, Some(d("2016-09-30")));
        assert_eq!(sun[0].value, price(d("2016-09-30"), 1));
        assert_eq!(sun[2].trade_date, Some(d("2016-09-29")));
        // Lag 1 points at the previous weekend's series value.
        assert_eq!(sun[1].trade_date, Some(d("2016-09-23")));

        // Saturday: maturity 1 unobservable, zero at both lags.
        let sat = align_weekend_futures(&book, d("2016-10-01"), Variant::Base);
        assert!(sat[0].value == 0.0 && sat[0].trade_date.is_none());
        assert!(sat[1].value == 0.0 && sat[1].trade_date.is_none());
        // Maturity 2 on Saturday is Thursday's settlement.
        assert_eq!(sat[2].trade_date, Some(d("2016-09-29")));

        let peak = align_weekend_futures(&book, d("2016-10-01"), Variant::Peak);
        assert_eq!(peak.len(), 10);
    }

    #[test]
    fn month_alignment_fixed_over_month() {
        let cal = ExchangeCalendar::new(HolidaySet::empty());
        let (book, price) = dense_filled_book("2016-08-01", "2016-10-31", &cal);

        // Independent route: walk back from Sep 30 to the last weekday.
        let mut oracle = d("2016-09-30");
        while matches!(oracle.weekday(), Weekday::Sat | Weekday::Sun) {
            oracle = oracle.pred_opt().unwrap();
        }
        assert_eq!(oracle, d("2016-09-30"));

        let a = align_month_future(&book, &cal, d("2016-10-05"), Variant::Base);
        let b = align_month_future(&book, &cal, d("2016-10-29"), Variant::Base);
        assert_eq!(a.trade_date, Some(oracle));
        assert_eq!(a.value, price(oracle, 1)); // Oct 1 is one day after Sep 30
        assert_eq!(a, b);
    }

    #[test]
    fn matrix_shape_and_structure() {
        let holidays = HolidaySet::new([d("2016-10-03")]);
        let cal = ExchangeCalendar::new(holidays.clone());
        let (book, _) = dense_filled_book("2016-01-01", "2017-01-31", &cal);
        let panel = constant_panel("2016-01-01", 400, 30.0);
        let range = DateRange::new(d("2016-01-08"), d("2017-01-06")).unwrap();
        assert_eq!(range.num_days(), 365);
        let m = build_matrix(&panel, &book, &holidays, 1, range).unwrap();
        assert_eq!(m.table.num_rows(), 365);
        assert_eq!(m.table.num_columns(), 323);
        assert_eq!(m.response.len(), 365);

        // The holiday target row sets the Sunday dummy.
        let hol_row = m
            .table
            .rows
            .iter()
            .find(|r| r.target_date == d("2016-10-03"))
            .unwrap();
        let sunday_col = m
            .table
            .columns
            .iter()
            .position(|c| c.name == "dummy.sun")
            .unwrap();
        assert_eq!(hol_row.values[sunday_col], 1.0);

        // Hour only changes the response, not the regressor rows.
        let m2 = build_matrix(&panel, &book, &holidays, 13, range).unwrap();
        assert_eq!(m.table.rows, m2.table.rows);
    }

    fn row_for_horizon(
        panel: &PricePanel,
        book: &FilledFuturesBook,
        holidays: &HolidaySet,
        cal: &ExchangeCalendar,
        origin: NaiveDate,
        c: u64,
    ) -> AlignedRow {
        aligned_row(
            panel,
            book,
            holidays,
            cal,
            FeatureSpec::full(),
            &SeasonBasis::standard(),
            origin + Days::new(c),
        )
        .unwrap()
    }

    #[test]
    fn observability_arithmetic() {
        let holidays = HolidaySet::empty();
        let cal = ExchangeCalendar::new(holidays.clone());
        let (book, _) = dense_filled_book("2016-08-01", "2016-11-30", &cal);
        let panel = constant_panel("2016-08-01", 120, 30.0);
        let origin = d("2016-09-29");

        let cols = FeatureSpec::full().columns();
        let idx = |name: &str| cols.iter().position(|c| c.name == name).unwrap();

        // Horizon 1: day future lag 0 traded origin-1, observable.
        let obs1 = observable_columns(
            &row_for_horizon(&panel, &book, &holidays, &cal, origin, 1),
            origin,
        );
        assert!(obs1[idx("fut.day.base.m2.l0")]);
        // Horizon 3: lag 0 would trade the day after the origin.
        let obs3 = observable_columns(
            &row_for_horizon(&panel, &book, &holidays, &cal, origin, 3),
            origin,
        );
        assert!(!obs3[idx("fut.day.base.m2.l0")]);
        assert!(obs3[idx("fut.day.base.m2.l1")]);
        // Deterministic columns observable at any horizon.
        assert!(obs3[idx("dummy.mon")] && obs3[idx("spline.winter")] && obs3[idx("ar.h01.l1")]);
    }

    #[test]
    fn slot_retention_monotone_in_horizon() {
        let holidays = HolidaySet::empty();
        let cal = ExchangeCalendar::new(holidays.clone());
        let (book, _) = dense_filled_book("2016-08-01", "2016-11-30", &cal);
        let panel = constant_panel("2016-08-01", 120, 30.0);
        let cols = FeatureSpec::full().columns();
        for origin in ["2016-09-27", "2016-09-29", "2016-10-05"] {
            let origin = d(origin);
            let rows: Vec<AlignedRow> = (1..=28)
                .map(|c| row_for_horizon(&panel, &book, &holidays, &cal, origin, c))
                .collect();
            let masks = slot_observable_columns(&rows, origin);
            // Horizon 1 keeps the complete futures set.
            assert!(masks[0].iter().all(|&m| m));
            for c in 1..masks.len() {
                for j in 0..masks[c].len() {
                    if masks[c][j] {
                        assert!(
                            masks[c - 1][j],
                            "column {} usable at horizon {} but not {}",
                            cols[j].name,
                            c + 1,
                            c
                        );
                    }
                }
            }
            // Deterministic columns survive to the last horizon.
            let last = &masks[27];
            for (j, col) in cols.iter().enumerate() {
                if !col.is_future() {
                    assert!(last[j], "{}", col.name);
                }
            }
            // Day futures at horizon 28: every nominal trade date is past
            // the origin, so the whole block is gone.
            for (j, col) in cols.iter().enumerate() {
                if matches!(col.kind, ColumnKind::Future { product: Product::Day, .. }) {
                    assert!(!last[j], "{}", col.name);
                }
            }
        }
    }

    #[test]
    fn missing_mask_set_for_absent_series() {
        let cal = ExchangeCalendar::new(HolidaySet::empty());
        // Book with base day futures only: other lookups come back missing.
        let mut book = FuturesBook::new();
        let mut day = d("2016-09-01");
        while day <= d("2016-10-31") {
            if cal.is_trading_day(day) {
                for m in DAY_MATURITIES {
                    book.insert(QuoteKey::new(day, Product::Day, Variant::Base, m), 25.0);
                }
            }
            day = day.succ_opt().unwrap();
        }
        let filled = forward_fill(&book, &cal, 7);
        let vals = align_week_futures(&filled, &cal, d("2016-10-22"), Variant::Base);
        assert!(vals.iter().all(|v| v.missing && v.value == 0.0));
        let day_vals = align_day_futures(&filled, d("2016-10-22"), Variant::Peak);
        assert!(day_vals.iter().all(|v| v.missing));
    }
}
