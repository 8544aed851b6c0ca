//! Hedge scores from daily sign graphs and the top-K selection built on them.
//!
//! For each day the return of every asset is demeaned by its own window mean.
//! Asset `n` "hedges" asset `j` on that day when the two deviations have
//! strictly opposite signs; the hedge score is the fraction of
//! `(day, other asset)` pairs where that happens.

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::sig12;
use crate::market_data::{column_means, ReturnPanel, WindowSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeReport {
    pub tickers: Vec<String>,
    pub scores: Vec<f64>,
    pub means: Vec<f64>,
    /// Raw count of hedging (day, other asset) pairs per asset.
    pub counts: Vec<u64>,
    pub window: WindowSpec,
    pub sample_size: usize,
}

impl HedgeReport {
    /// Builds a report from given scores and means, e.g. for synthetic tests.
    pub fn from_scores(tickers: Vec<String>, scores: Vec<f64>, means: Vec<f64>) -> Result<Self> {
        let n = tickers.len();
        for len in [scores.len(), means.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::BadParameter(format!("hedge score {s} outside [0, 1]")));
        }
        let window = WindowSpec { label: String::new(), start: chrono::NaiveDate::MIN, end: chrono::NaiveDate::MAX };
        Ok(HedgeReport { tickers, scores, means, counts: vec![0; n], window, sample_size: 0 })
    }

    pub fn len(&self) -> usize {
        self.tickers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tickers.is_empty()
    }

    /// `score * mean` per asset, the quantity the selection maximizes.
    pub fn products(&self) -> Vec<f64> {
        self.scores.iter().zip(&self.means).map(|(h, m)| h * m).collect()
    }

    /// Asset indices by product descending, ties by ticker ascending.
    pub fn ranking(&self) -> Vec<usize> {
        let products = self.products();
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            products[b].total_cmp(&products[a]).then_with(|| self.tickers[a].cmp(&self.tickers[b]))
        });
        order
    }

    /// CSV `ticker,hedge_score,mean_return,product` in ranking order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(b"ticker,hedge_score,mean_return,product\n")?;
        let products = self.products();
        for i in self.ranking() {
            writeln!(
                out,
                "{},{},{},{}",
                self.tickers[i],
                sig12(self.scores[i]),
                sig12(self.means[i]),
                sig12(products[i])
            )?;
        }
        Ok(())
    }
}

/// Hedge scores over the whole panel, counting on the current rayon pool's
/// thread count.
pub fn hedge_scores(panel: &ReturnPanel) -> Result<HedgeReport> {
    hedge_scores_with_workers(panel, rayon::current_num_threads())
}

/// Same as [`hedge_scores`] with an explicit number of worker threads. Days
/// are split into contiguous chunks; integer counts are merged before the
/// single final division, so the result does not depend on `workers`.
pub fn hedge_scores_with_workers(panel: &ReturnPanel, workers: usize) -> Result<HedgeReport> {
    let (t, n) = (panel.n_rows(), panel.n_assets());
    if t < 2 {
        return Err(Error::TooFewRows { needed: 2, got: t });
    }
    if n < 2 {
        return Err(Error::TooFewAssets { needed: 2, got: n });
    }
    let returns = panel.returns();
    let means = column_means(returns);

    let count_rows = |rows: std::ops::Range<usize>| {
        let mut counts = vec![0u64; n];
        let mut dev = vec![0.0; n];
        for day in rows {
            let (mut up, mut down) = (0u64, 0u64);
            for j in 0..n {
                dev[j] = returns[(day, j)] - means[j];
                if dev[j] > 0.0 {
                    up += 1;
                } else if dev[j] < 0.0 {
                    down += 1;
                }
            }
            // negative degree of j in the day's graph: assets deviating the other way
            for j in 0..n {
                match dev[j].partial_cmp(&0.0) {
                    Some(Ordering::Greater) => counts[j] += down,
                    Some(Ordering::Less) => counts[j] += up,
                    _ => {}
                }
            }
        }
        counts
    };

    let workers = workers.clamp(1, t);
    let chunk = t.div_ceil(workers);
    let counts = if workers == 1 {
        count_rows(0..t)
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..t)
                .step_by(chunk)
                .map(|lo| {
                    let count_rows = &count_rows;
                    s.spawn(move || count_rows(lo..(lo + chunk).min(t)))
                })
                .collect();
            let mut total = vec![0u64; n];
            for h in handles {
                for (acc, c) in total.iter_mut().zip(h.join().expect("hedge worker panicked")) {
                    *acc += c;
                }
            }
            total
        })
    };

    let denom = (t * (n - 1)) as f64;
    Ok(HedgeReport {
        tickers: panel.tickers().to_vec(),
        scores: counts.iter().map(|&c| c as f64 / denom).collect(),
        means: means.iter().copied().collect(),
        counts,
        window: WindowSpec::covering(panel).expect("panel has rows"),
        sample_size: t,
    })
}

/// A chosen subset of tickers (lexicographic order) and its objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub chosen: Vec<String>,
    pub k: usize,
    pub objective: f64,
}

impl Selection {
    fn from_indices(report: &HedgeReport, mut picked: Vec<usize>) -> Selection {
        let products = report.products();
        let objective = picked.iter().map(|&i| products[i]).sum();
        picked.sort_by(|&a, &b| report.tickers[a].cmp(&report.tickers[b]));
        Selection { k: picked.len(), chosen: picked.into_iter().map(|i| report.tickers[i].clone()).collect(), objective }
    }
}

/// The `k` assets with the largest `score * mean`; ties go to the
/// lexicographically smaller ticker.
pub fn select_top_k(report: &HedgeReport, k: usize) -> Result<Selection> {
    let n = report.len();
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    let mut ranking = report.ranking();
    ranking.truncate(k);
    Ok(Selection::from_indices(report, ranking))
}

/// Maximizes the objective over all subsets: every asset with a strictly
/// positive product.
pub fn select_unconstrained(report: &HedgeReport) -> Selection {
    let picked = report.products().iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(i, _)| i).collect();
    Selection::from_indices(report, picked)
}
