//! Price and return panels: ingestion, alignment, return computation and
//! calendar slicing.

mod ingest;
mod synth;

use std::fmt;

use chrono::{Datelike, NaiveDate};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ingest::{ingest_per_ticker_dir, ingest_wide_csv, write_wide_csv, Ingested};
pub use synth::{business_days, synth_panel, CorrelationRecipe, SynthSpec};

/// Aligned close prices, rows are dates and columns are tickers.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    prices: DMatrix<f64>,
}

impl PricePanel {
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, prices: DMatrix<f64>) -> Result<Self> {
        check_shape(&dates, &tickers, &prices)?;
        if let Some(bad) = prices.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::BadParameter(format!("price {bad} is not finite and positive")));
        }
        Ok(PricePanel { dates, tickers, prices })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    /// T×N matrix of prices.
    pub fn prices(&self) -> &DMatrix<f64> {
        &self.prices
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReturnKind {
    Linear,
    Log,
}

impl fmt::Display for ReturnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReturnKind::Linear => f.write_str("linear"),
            ReturnKind::Log => f.write_str("log"),
        }
    }
}

/// Per-period returns, rows dated by the later endpoint of each period.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    returns: DMatrix<f64>,
    kind: ReturnKind,
}

impl ReturnPanel {
    pub fn new(
        dates: Vec<NaiveDate>,
        tickers: Vec<String>,
        returns: DMatrix<f64>,
        kind: ReturnKind,
    ) -> Result<Self> {
        check_shape(&dates, &tickers, &returns)?;
        if let Some(bad) = returns.iter().find(|r| !r.is_finite()) {
            return Err(Error::BadParameter(format!("return {bad} is not finite")));
        }
        if kind == ReturnKind::Linear {
            if let Some(bad) = returns.iter().find(|r| **r <= -1.0) {
                return Err(Error::BadParameter(format!("linear return {bad} is not above -1")));
            }
        }
        Ok(ReturnPanel { dates, tickers, returns, kind })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    /// T×N matrix of returns.
    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn kind(&self) -> ReturnKind {
        self.kind
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn ticker_index(&self, ticker: &str) -> Option<usize> {
        self.tickers.iter().position(|t| t == ticker)
    }

    /// Restricts the panel to `tickers`, in the order given.
    pub fn select(&self, tickers: &[String]) -> Result<ReturnPanel> {
        let idx = tickers
            .iter()
            .map(|t| self.ticker_index(t).ok_or_else(|| Error::MissingTicker(t.clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok(ReturnPanel {
            dates: self.dates.clone(),
            tickers: tickers.to_vec(),
            returns: self.returns.select_columns(idx.iter()),
            kind: self.kind,
        })
    }

    /// Converts between linear and log returns (`log = ln(1 + linear)`).
    pub fn to_kind(&self, kind: ReturnKind) -> ReturnPanel {
        let returns = match (self.kind, kind) {
            (a, b) if a == b => self.returns.clone(),
            (ReturnKind::Linear, ReturnKind::Log) => self.returns.map(f64::ln_1p),
            _ => self.returns.map(f64::exp_m1),
        };
        ReturnPanel { returns, kind, ..self.clone() }
    }

    /// Rebuilds prices from `base` prices observed on `base_date`.
    /// Only meaningful for single-period returns.
    pub fn reconstruct_prices(&self, base_date: NaiveDate, base: &[f64]) -> Result<PricePanel> {
        if base.len() != self.n_assets() {
            return Err(Error::DimensionMismatch { expected: self.n_assets(), got: base.len() });
        }
        let linear = self.to_kind(ReturnKind::Linear);
        let t = self.n_rows();
        let mut prices = DMatrix::zeros(t + 1, self.n_assets());
        for (j, &p0) in base.iter().enumerate() {
            prices[(0, j)] = p0;
            for i in 0..t {
                prices[(i + 1, j)] = prices[(i, j)] * (1.0 + linear.returns[(i, j)]);
            }
        }
        let mut dates = Vec::with_capacity(t + 1);
        dates.push(base_date);
        dates.extend_from_slice(&self.dates);
        PricePanel::new(dates, self.tickers.clone(), prices)
    }
}

fn check_shape<T>(dates: &[NaiveDate], tickers: &[String], m: &DMatrix<T>) -> Result<()> {
    if m.nrows() != dates.len() {
        return Err(Error::DimensionMismatch { expected: dates.len(), got: m.nrows() });
    }
    if m.ncols() != tickers.len() {
        return Err(Error::DimensionMismatch { expected: tickers.len(), got: m.ncols() });
    }
    if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::BadParameter(format!("dates not strictly increasing at {}", w[1])));
    }
    let mut seen = std::collections::HashSet::new();
    for t in tickers {
        if !seen.insert(t.as_str()) {
            return Err(Error::DuplicateTicker(t.clone()));
        }
    }
    Ok(())
}

/// Computes returns over `horizon` rows.
pub fn compute_returns(prices: &PricePanel, kind: ReturnKind, horizon: usize) -> Result<ReturnPanel> {
    if horizon == 0 {
        return Err(Error::BadParameter("horizon must be positive".into()));
    }
    let t = prices.n_rows();
    if t < horizon + 1 {
        return Err(Error::TooFewRows { needed: horizon + 1, got: t });
    }
    let p = &prices.prices;
    let returns = DMatrix::from_fn(t - horizon, prices.n_assets(), |i, j| {
        let (from, to) = (p[(i, j)], p[(i + horizon, j)]);
        match kind {
            ReturnKind::Linear => (to - from) / from,
            ReturnKind::Log => to.ln() - from.ln(),
        }
    });
    ReturnPanel::new(prices.dates[horizon..].to_vec(), prices.tickers.clone(), returns, kind)
}

/// A labelled, inclusive calendar window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub label: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl WindowSpec {
    pub fn new(label: impl Into<String>, start: NaiveDate, end: NaiveDate) -> Result<Self> {
        let label = label.into();
        if start > end {
            return Err(Error::BadWindow(format!("{label}: start {start} after end {end}")));
        }
        Ok(WindowSpec { label, start, end })
    }

    /// The calendar year `year`, labelled by the year number.
    pub fn year(year: i32) -> Result<Self> {
        let bad = || Error::BadWindow(format!("year {year}"));
        let start = NaiveDate::from_ymd_opt(year, 1, 1).ok_or_else(bad)?;
        let end = NaiveDate::from_ymd_opt(year, 12, 31).ok_or_else(bad)?;
        WindowSpec::new(year.to_string(), start, end)
    }

    /// Parses `YYYY`, or `FROM:TO` where each side is `YYYY` or `YYYY-MM-DD`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.split_once(':') {
            None if is_year(s) => WindowSpec::year(s.parse().unwrap()),
            None => Err(Error::BadWindow(s.to_string())),
            Some((from, to)) => {
                let start = parse_bound(from, true).ok_or_else(|| Error::BadWindow(s.to_string()))?;
                let end = parse_bound(to, false).ok_or_else(|| Error::BadWindow(s.to_string()))?;
                WindowSpec::new(s, start, end)
            }
        }
    }

    /// Window spanning the first and last dates of `panel`.
    pub fn covering(panel: &ReturnPanel) -> Option<Self> {
        let (start, end) = (*panel.dates.first()?, *panel.dates.last()?);
        Some(WindowSpec { label: format!("{start}:{end}"), start, end })
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    /// Calendar year of the window start, when the window is exactly one year.
    pub fn as_year(&self) -> Option<i32> {
        let y = self.start.year();
        (self.start == NaiveDate::from_ymd_opt(y, 1, 1)? && self.end == NaiveDate::from_ymd_opt(y, 12, 31)?)
            .then_some(y)
    }
}

impl fmt::Display for WindowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

fn is_year(s: &str) -> bool {
    s.len() == 4 && s.bytes().all(|b| b.is_ascii_digit())
}

fn parse_bound(s: &str, start: bool) -> Option<NaiveDate> {
    let s = s.trim();
    if is_year(s) {
        let y: i32 = s.parse().ok()?;
        return if start { NaiveDate::from_ymd_opt(y, 1, 1) } else { NaiveDate::from_ymd_opt(y, 12, 31) };
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
}

/// Rows of `panel` dated inside `window`.
pub fn slice(panel: &ReturnPanel, window: &WindowSpec) -> Result<ReturnPanel> {
    let lo = panel.dates.partition_point(|d| *d < window.start);
    let hi = panel.dates.partition_point(|d| *d <= window.end);
    if lo >= hi {
        return Err(Error::EmptyWindow(window.label.clone()));
    }
    Ok(ReturnPanel {
        dates: panel.dates[lo..hi].to_vec(),
        tickers: panel.tickers.clone(),
        returns: panel.returns.rows(lo, hi - lo).into_owned(),
        kind: panel.kind,
    })
}

/// Column means of a return panel.
pub(crate) fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let t = m.nrows() as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / t))
}
