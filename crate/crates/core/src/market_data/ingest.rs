use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use log::warn;
use nalgebra::DMatrix;

use super::PricePanel;
use crate::error::{Error, Result};
use crate::fmt::sig12;

/// A price panel together with the number of source rows it discarded.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub panel: PricePanel,
    pub dropped_rows: usize,
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv { path: path.to_path_buf(), source }
}

fn open(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    Ok(csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(file))
}

/// Accepts ISO dates, ISO timestamps (time part ignored) and the two
/// day-first / month-first layouts common in vendor dumps.
fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d);
    }
    if s.len() > 10 && s.is_char_boundary(10) {
        if let Ok(d) = NaiveDate::parse_from_str(&s[..10], "%Y-%m-%d") {
            return Some(d);
        }
    }
    NaiveDate::parse_from_str(s, "%d-%m-%Y")
        .or_else(|_| NaiveDate::parse_from_str(s, "%m/%d/%Y"))
        .ok()
}

fn parse_price(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|p| p.is_finite() && *p > 0.0)
}

/// Reads a wide `Date,<T1>,<T2>,...` file. Rows with any missing or
/// non-positive cell are dropped; columns are reordered lexicographically.
pub fn ingest_wide_csv(path: impl AsRef<Path>) -> Result<Ingested> {
    let path = path.as_ref();
    let mut rdr = open(path)?;
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    if headers.get(0).map(str::trim) != Some("Date") {
        return Err(Error::Malformed { path: path.into(), message: "first column must be \"Date\"".into() });
    }
    let raw: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    if raw.is_empty() {
        return Err(Error::Malformed { path: path.into(), message: "no ticker columns".into() });
    }
    let mut seen = BTreeSet::new();
    for t in &raw {
        if !seen.insert(t.as_str()) {
            return Err(Error::DuplicateTicker(t.clone()));
        }
    }
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| raw[a].cmp(&raw[b]));

    let mut rows: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    let mut dropped = 0;
    for record in rdr.records() {
        let record = record.map_err(csv_err(path))?;
        let Some(date) = record.get(0).and_then(parse_date) else {
            dropped += 1;
            continue;
        };
        let cells: Option<Vec<f64>> = order.iter().map(|&j| record.get(j + 1).and_then(parse_price)).collect();
        match cells {
            Some(cells) => {
                if rows.insert(date, cells).is_some() {
                    return Err(Error::Malformed { path: path.into(), message: format!("duplicate date {date}") });
                }
            }
            None => dropped += 1,
        }
    }
    if rows.is_empty() {
        return Err(Error::NoUsableRows(path.into()));
    }
    if dropped > 0 {
        warn!("{}: dropped {dropped} incomplete row(s)", path.display());
    }
    let tickers = order.iter().map(|&j| raw[j].clone()).collect();
    let n = raw.len();
    let dates: Vec<NaiveDate> = rows.keys().copied().collect();
    let prices = DMatrix::from_row_iterator(dates.len(), n, rows.into_values().flatten());
    Ok(Ingested { panel: PricePanel::new(dates, tickers, prices)?, dropped_rows: dropped })
}

/// Reads one CSV per ticker (file stem is the ticker) and inner-joins them
/// on `Date`.
pub fn ingest_per_ticker_dir(dir: impl AsRef<Path>, price_column: &str) -> Result<Ingested> {
    let dir = dir.as_ref();
    let entries = fs::read_dir(dir).map_err(|source| Error::Io { path: dir.into(), source })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::EmptyDirectory(dir.into()));
    }

    let mut series: BTreeMap<String, BTreeMap<NaiveDate, f64>> = BTreeMap::new();
    let mut total_rows = 0;
    for file in &files {
        let ticker = file.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let mut rdr = open(file)?;
        let headers = rdr.headers().map_err(csv_err(file))?.clone();
        let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
        let missing = |column: &str| Error::MissingColumn { file: file.clone(), column: column.into() };
        let date_col = find("Date").ok_or_else(|| missing("Date"))?;
        let price_col = find(price_column).ok_or_else(|| missing(price_column))?;

        let mut points = BTreeMap::new();
        for record in rdr.records() {
            let record = record.map_err(csv_err(file))?;
            total_rows += 1;
            let date = record.get(date_col).and_then(parse_date);
            let price = record.get(price_col).and_then(parse_price);
            if let (Some(date), Some(price)) = (date, price) {
                points.entry(date).or_insert(price);
            }
        }
        if series.insert(ticker.clone(), points).is_some() {
            return Err(Error::DuplicateTicker(ticker));
        }
    }

    let mut common: Option<BTreeSet<NaiveDate>> = None;
    for points in series.values() {
        let keys: BTreeSet<NaiveDate> = points.keys().copied().collect();
        common = Some(match common {
            None => keys,
            Some(c) => c.intersection(&keys).copied().collect(),
        });
    }
    let dates: Vec<NaiveDate> = common.unwrap_or_default().into_iter().collect();
    if dates.is_empty() {
        return Err(Error::NoCommonDates);
    }
    let dropped = total_rows - dates.len() * series.len();
    let tickers: Vec<String> = series.keys().cloned().collect();
    let prices = DMatrix::from_fn(dates.len(), tickers.len(), |i, j| series[&tickers[j]][&dates[i]]);
    Ok(Ingested { panel: PricePanel::new(dates, tickers, prices)?, dropped_rows: dropped })
}

/// Writes the panel in wide layout with `\n` line endings and 12 significant
/// digits per price.
pub fn write_wide_csv<W: Write>(panel: &PricePanel, out: W) -> Result<()> {
    let path = PathBuf::from("<output>");
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let header = std::iter::once("Date").chain(panel.tickers().iter().map(String::as_str));
    w.write_record(header).map_err(csv_err(&path))?;
    for (i, date) in panel.dates().iter().enumerate() {
        let prices = panel.prices().row(i);
        let row = std::iter::once(date.format("%Y-%m-%d").to_string()).chain(prices.iter().map(|p| sig12(*p)));
        w.write_record(row).map_err(csv_err(&path))?;
    }
    w.flush().map_err(|source| Error::Io { path, source })?;
    Ok(())
}
