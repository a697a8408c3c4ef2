//! Deterministic calendar regressors: weekday dummies with holiday folding
//! and the four periodic seasonal spline curves.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};

use crate::error::{Error, Result};

/// Inclusive range of calendar dates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::domain(format!(
                "invalid date range: {start} after {end}"
            )));
        }
        Ok(DateRange { start, end })
    }

    pub fn num_days(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    pub fn iter(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.start.iter_days().take(self.num_days())
    }
}

/// Set of public holidays, loaded from a one-column CSV (`date` header).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HolidaySet {
    dates: BTreeSet<NaiveDate>,
}

impl HolidaySet {
    pub fn new(dates: impl IntoIterator<Item = NaiveDate>) -> Self {
        HolidaySet {
            dates: dates.into_iter().collect(),
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.dates.contains(&date)
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.dates.iter().copied()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| Error::schema(path, 1, e.to_string()))?;
        {
            let headers = reader
                .headers()
                .map_err(|e| Error::schema(path, 1, e.to_string()))?;
            if headers.iter().map(str::trim).collect::<Vec<_>>() != ["date"] {
                return Err(Error::schema(
                    path,
                    1,
                    format!("expected header `date`, got {headers:?}"),
                ));
            }
        }
        let mut dates = BTreeSet::new();
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| Error::schema(path, line, e.to_string()))?;
            let field = record.get(0).unwrap_or("").trim();
            let date = field
                .parse::<NaiveDate>()
                .map_err(|e| Error::schema(path, line, format!("bad date {field:?}: {e}")))?;
            dates.insert(date);
        }
        Ok(HolidaySet { dates })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("date\n");
        for d in &self.dates {
            writeln!(out, "{d}").expect("write to string");
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Weekday of `date`, with every public holiday folded onto Sunday.
pub fn effective_dow(date: NaiveDate, holidays: &HolidaySet) -> Weekday {
    if holidays.contains(date) {
        Weekday::Sun
    } else {
        date.weekday()
    }
}

/// One-hot weekday vector ordered Mon..Sun, holidays counted as Sunday.
pub fn dow_dummies(date: NaiveDate, holidays: &HolidaySet) -> [f64; 7] {
    let mut out = [0.0; 7];
    out[effective_dow(date, holidays).num_days_from_monday() as usize] = 1.0;
    out
}

/// Days in one mean year; the period of the seasonal basis.
pub const YEAR_PERIOD: f64 = 365.25;

/// Four periodic cubic B-spline season curves on a circle of one mean year.
///
/// The knot circle is equidistant (spacing one quarter period) and anchored
/// so the winter curve peaks on January 15. Each curve is the uniform cubic
/// B-spline bump centered at its peak, scaled to a maximum of exactly 1; it
/// decays through the neighbouring seasons and vanishes at the opposite
/// season's peak.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonBasis {
    /// Peak positions on the `[0, YEAR_PERIOD)` circle: winter, spring,
    /// summer, autumn.
    peaks: [f64; 4],
}

pub const SEASON_NAMES: [&str; 4] = ["winter", "spring", "summer", "autumn"];

impl Default for SeasonBasis {
    fn default() -> Self {
        Self::standard()
    }
}

impl SeasonBasis {
    /// Basis with the winter peak anchored at January 15 of a common year.
    pub fn standard() -> Self {
        // Ordinal 15 in a 365-day year, mapped to the mean-year circle.
        let winter = 14.0 / 365.0 * YEAR_PERIOD;
        let step = YEAR_PERIOD / 4.0;
        SeasonBasis {
            peaks: [winter, winter + step, winter + 2.0 * step, winter + 3.0 * step],
        }
    }

    pub fn peaks(&self) -> [f64; 4] {
        self.peaks
    }

    /// Position of a date on the mean-year circle, as fraction-of-year
    /// times the mean period. Feb 29 interpolates smoothly instead of
    /// introducing a jump.
    pub fn position(date: NaiveDate) -> f64 {
        let days_in_year = NaiveDate::from_ymd_opt(date.year(), 12, 31)
            .expect("Dec 31 exists")
            .ordinal() as f64;
        (date.ordinal() - 1) as f64 / days_in_year * YEAR_PERIOD
    }

    /// Season values for a calendar date, ordered winter/spring/summer/autumn.
    pub fn values(&self, date: NaiveDate) -> [f64; 4] {
        self.values_at_position(Self::position(date))
    }

    /// Season values at a raw circle position in `[0, YEAR_PERIOD)` units.
    pub fn values_at_position(&self, pos: f64) -> [f64; 4] {
        let quarter = YEAR_PERIOD / 4.0;
        let mut out = [0.0; 4];
        for (v, peak) in out.iter_mut().zip(self.peaks) {
            let mut d = (pos - peak) % YEAR_PERIOD;
            if d > YEAR_PERIOD / 2.0 {
                d -= YEAR_PERIOD;
            } else if d < -YEAR_PERIOD / 2.0 {
                d += YEAR_PERIOD;
            }
            *v = cubic_bump(d / quarter);
        }
        out
    }
}

/// Uniform cubic B-spline bump on `[-2, 2]`, scaled so the peak value is 1.
fn cubic_bump(t: f64) -> f64 {
    let a = t.abs();
    let raw = if a >= 2.0 {
        0.0
    } else if a >= 1.0 {
        let u = 2.0 - a;
        u * u * u / 6.0
    } else {
        (3.0 * a * a * a - 6.0 * a * a + 4.0) / 6.0
    };
    // Unnormalized peak is 2/3.
    raw * 1.5
}

/// Last day of the month containing `date` for which `is_trading(day)`.
pub fn last_day_of_month(date: NaiveDate) -> NaiveDate {
    let (y, m) = (date.year(), date.month());
    let first_next = if m == 12 {
        NaiveDate::from_ymd_opt(y + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(y, m + 1, 1)
    }
    .expect("first of month exists");
    first_next - Days::new(1)
}

/// Monday of the ISO week containing `date`.
pub fn monday_of_week(date: NaiveDate) -> NaiveDate {
    date - Days::new(date.weekday().num_days_from_monday() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn effective_dow_plain_and_folded() {
        let none = HolidaySet::empty();
        assert_eq!(effective_dow(d("2016-07-29"), &none), Weekday::Fri);
        assert_eq!(effective_dow(d("2016-10-22"), &none), Weekday::Sat);
        let unity = HolidaySet::new([d("2016-10-03")]);
        assert_eq!(effective_dow(d("2016-10-03"), &unity), Weekday::Sun);
        // A holiday set never rewrites other dates.
        assert_eq!(effective_dow(d("2016-10-04"), &unity), Weekday::Tue);
    }

    #[test]
    fn dummies_one_hot_positions() {
        let none = HolidaySet::empty();
        assert_eq!(
            dow_dummies(d("2016-07-29"), &none),
            [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]
        );
        let hol = HolidaySet::new([d("2016-10-03")]);
        assert_eq!(
            dow_dummies(d("2016-10-03"), &hol),
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]
        );
    }

    proptest! {
        #[test]
        fn dummies_are_one_hot(offset in 0i64..73_048) {
            // 1900-01-01 .. 2099-12-30
            let date = d("1900-01-01") + chrono::Duration::days(offset);
            let hol = HolidaySet::new([d("1950-06-01"), d("2001-12-24")]);
            let v = dow_dummies(date, &hol);
            prop_assert_eq!(v.iter().filter(|&&x| x == 1.0).count(), 1);
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn winter_peak_values() {
        // Non-leap year: Jan 15 lands exactly on the winter peak. The
        // adjacent seasons sit one knot away (basis value 1/6, normalized
        // 0.25); the opposite season sits two knots away (exactly 0).
        let basis = SeasonBasis::standard();
        let v = basis.values(d("2017-01-15"));
        assert!((v[0] - 1.0).abs() < 1e-12, "winter {}", v[0]);
        assert!((v[1] - 0.25).abs() < 1e-12, "spring {}", v[1]);
        assert!(v[2].abs() < 1e-12, "summer {}", v[2]);
        assert!((v[3] - 0.25).abs() < 1e-12, "autumn {}", v[3]);
    }

    #[test]
    fn season_values_bounded_and_positive_sum() {
        let basis = SeasonBasis::standard();
        let mut date = d("2015-01-01");
        for _ in 0..800 {
            let v = basis.values(date);
            assert!(v.iter().sum::<f64>() > 0.0, "{date}");
            for x in v {
                assert!((0.0..=1.0).contains(&x), "{date}: {x}");
            }
            date = date.succ_opt().unwrap();
        }
    }

    #[test]
    fn season_continuity_day_to_day() {
        let basis = SeasonBasis::standard();
        let mut date = d("2015-06-01");
        for _ in 0..1200 {
            let next = date.succ_opt().unwrap();
            let a = basis.values(date);
            let b = basis.values(next);
            for k in 0..4 {
                assert!((a[k] - b[k]).abs() < 0.05, "{date} component {k}");
            }
            date = next;
        }
    }

    #[test]
    fn season_periodicity_one_year() {
        let basis = SeasonBasis::standard();
        let mut date = d("2015-03-01");
        for _ in 0..730 {
            let a = basis.values(date);
            let b = basis.values(date + chrono::Duration::days(365));
            for k in 0..4 {
                assert!((a[k] - b[k]).abs() < 0.02, "{date} component {k}");
            }
            date = date.succ_opt().unwrap();
        }
    }

    #[test]
    fn peak_normalization_on_dense_grid() {
        let basis = SeasonBasis::standard();
        let mut max = [0.0f64; 4];
        let steps = 365_250;
        for i in 0..steps {
            let pos = i as f64 * YEAR_PERIOD / steps as f64;
            let v = basis.values_at_position(pos);
            for k in 0..4 {
                max[k] = max[k].max(v[k]);
            }
        }
        for (k, m) in max.iter().enumerate() {
            assert!((m - 1.0).abs() < 1e-9, "component {k}: max {m}");
        }
    }

    /// Independent route: Cox-de Boor recursion on the unrolled periodic
    /// knot vector, periodized by summing translated copies.
    mod de_boor_oracle {
        use super::*;

        fn de_boor_basis(knots: &[f64], j: usize, order: usize, x: f64) -> f64 {
            if order == 1 {
                return if knots[j] <= x && x < knots[j + 1] {
                    1.0
                } else {
                    0.0
                };
            }
            let d1 = knots[j + order - 1] - knots[j];
            let d2 = knots[j + order] - knots[j + 1];
            let left = if d1 > 0.0 {
                (x - knots[j]) / d1 * de_boor_basis(knots, j, order - 1, x)
            } else {
                0.0
            };
            let right = if d2 > 0.0 {
                (knots[j + order] - x) / d2 * de_boor_basis(knots, j + 1, order - 1, x)
            } else {
                0.0
            };
            left + right
        }

        #[test]
        fn matches_closed_form_bump() {
            let basis = SeasonBasis::standard();
            let peaks = basis.peaks();
            let quarter = YEAR_PERIOD / 4.0;
            // Unrolled uniform knots across three periods; season k's bump
            // on copy m starts two knots before its peak.
            for season in 0..4 {
                let mut knots = Vec::new();
                let start = peaks[season] - 2.0 * quarter - YEAR_PERIOD;
                for i in 0..16 {
                    knots.push(start + i as f64 * quarter);
                }
                for i in 0..200 {
                    let x = i as f64 * YEAR_PERIOD / 200.0;
                    // Periodization: sum the three unrolled copies.
                    let mut oracle = 0.0;
                    for copy in 0..3 {
                        oracle += de_boor_basis(&knots, copy * 4, 4, x);
                    }
                    oracle *= 1.5;
                    let got = basis.values_at_position(x)[season];
                    assert!(
                        (oracle - got).abs() < 1e-12,
                        "season {season} at {x}: oracle {oracle} vs {got}"
                    );
                }
            }
        }
    }

    #[test]
    fn holiday_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("holidays.csv");
        let set = HolidaySet::new([d("2016-10-03"), d("2016-12-26")]);
        set.save(&path).unwrap();
        assert_eq!(HolidaySet::load(&path).unwrap(), set);
    }

    #[test]
    fn holiday_csv_rejects_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("holidays.csv");
        std::fs::write(&path, "day\n2016-10-03\n").unwrap();
        assert!(HolidaySet::load(&path).is_err());
    }

    #[test]
    fn month_and_week_helpers() {
        assert_eq!(last_day_of_month(d("2016-09-12")), d("2016-09-30"));
        assert_eq!(last_day_of_month(d("2016-02-01")), d("2016-02-29"));
        assert_eq!(last_day_of_month(d("2015-12-31")), d("2015-12-31"));
        assert_eq!(monday_of_week(d("2016-10-22")), d("2016-10-17"));
        assert_eq!(monday_of_week(d("2016-10-17")), d("2016-10-17"));
        assert_eq!(monday_of_week(d("2016-10-23")), d("2016-10-17"));
    }
}
