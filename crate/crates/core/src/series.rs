//! Annual time series with contiguous year indexing.

use std::path::Path;

use crate::{Error, Result};

/// An annual real-valued series: one value per consecutive calendar year.
///
/// Index `i` holds the value for year `start_year + i`. The series is never
/// empty, has no gaps, and contains only finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnualSeries {
    start_year: i32,
    values: Vec<f64>,
}

impl AnnualSeries {
    pub fn new(start_year: i32, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("series must be non-empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value at year {}",
                start_year + i as i32
            )));
        }
        Ok(Self { start_year, values })
    }

    pub fn start_year(&self) -> i32 {
        self.start_year
    }

    /// Final year covered by the series (inclusive).
    pub fn end_year(&self) -> i32 {
        self.start_year + (self.values.len() as i32 - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: never empty
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn covers(&self, year: i32) -> bool {
        year >= self.start_year && year <= self.end_year()
    }

    /// Whether every year of `[from, to]` (inclusive) is present.
    pub fn covers_range(&self, from: i32, to: i32) -> bool {
        from <= to && self.covers(from) && self.covers(to)
    }

    pub fn value_for_year(&self, year: i32) -> Option<f64> {
        if self.covers(year) {
            Some(self.values[(year - self.start_year) as usize])
        } else {
            None
        }
    }

    pub fn last_value(&self) -> f64 {
        *self.values.last().expect("series is non-empty")
    }

    /// The sub-series covering `[from, to]` inclusive.
    pub fn window(&self, from: i32, to: i32) -> Result<AnnualSeries> {
        if !self.covers_range(from, to) {
            return Err(Error::InvalidArgument(format!(
                "window {from}..={to} outside series {}..={}",
                self.start_year,
                self.end_year()
            )));
        }
        let a = (from - self.start_year) as usize;
        let b = (to - self.start_year) as usize;
        AnnualSeries::new(from, self.values[a..=b].to_vec())
    }

    /// Iterate `(year, value)` pairs.
    pub fn iter_years(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (self.start_year + i as i32, v))
    }

    /// Append the value for the year immediately after the current end.
    pub fn push(&mut self, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite value for year {}",
                self.end_year() + 1
            )));
        }
        self.values.push(value);
        Ok(())
    }

    /// Element-wise map preserving years; `f` must return finite values.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<AnnualSeries> {
        AnnualSeries::new(self.start_year, self.values.iter().map(|&v| f(v)).collect())
    }
}

/// Load an annual series from a headered CSV file.
///
/// The file must contain the named year and value columns; years must be
/// strictly consecutive ascending integers. Parse errors name the offending
/// line (1-based, counting the header).
pub fn load_series_csv(path: &Path, year_col: &str, value_col: &str) -> Result<AnnualSeries> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io {
                path: path.to_path_buf(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => parse_err(1, e.to_string()),
        })?;

    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?;
    let find = |name: &str| headers.iter().position(|h| h == name);
    let year_idx = find(year_col)
        .ok_or_else(|| parse_err(1, format!("missing column '{year_col}'")))?;
    let value_idx = find(value_col)
        .ok_or_else(|| parse_err(1, format!("missing column '{value_col}'")))?;

    let mut start_year: Option<i32> = None;
    let mut values: Vec<f64> = Vec::new();

    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());

        let year_str = record
            .get(year_idx)
            .ok_or_else(|| parse_err(line, "missing year field".into()))?;
        let year: i32 = year_str
            .parse()
            .map_err(|_| parse_err(line, format!("invalid year '{year_str}'")))?;

        let value_str = record
            .get(value_idx)
            .ok_or_else(|| parse_err(line, "missing value field".into()))?;
        let value: f64 = value_str
            .parse()
            .map_err(|_| parse_err(line, format!("invalid value '{value_str}'")))?;
        if !value.is_finite() {
            return Err(parse_err(line, format!("non-finite value '{value_str}'")));
        }

        match start_year {
            None => start_year = Some(year),
            Some(start) => {
                let expected = start + values.len() as i32;
                if year == expected {
                    // consecutive
                } else if year < expected {
                    return Err(parse_err(
                        line,
                        format!("duplicate or non-ascending year {year} (expected {expected})"),
                    ));
                } else {
                    return Err(parse_err(
                        line,
                        format!("year gap: got {year}, expected {expected}"),
                    ));
                }
            }
        }
        values.push(value);
    }

    let start_year = start_year.ok_or_else(|| parse_err(1, "no data rows".into()))?;
    AnnualSeries::new(start_year, values)
}
