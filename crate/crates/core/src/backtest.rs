//! Year-over-year backtests: form a portfolio on one window, hold it on the
//! next, and report total return, annualized return and volatility, and
//! the Sharpe ratio.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocate::{
    ewp, omv1_no_short, omv1_short, omv2_closed_form, omv2_no_short, with_jitter, AllocationResult, Method,
};
use crate::error::{Error, Result};
use crate::estimators::{sample_cov, CovEstimate};
use crate::fmt::fixed2;
use crate::hedge_select::{hedge_scores, select_top_k, Selection};
use crate::market_data::{slice, ReturnKind, ReturnPanel, WindowSpec};

pub const TRADING_DAYS: f64 = 252.0;

/// How the target return of the mean-variance allocators is chosen from the
/// training-window means of the allocation universe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonRule {
    /// Largest asset mean.
    MaxMean,
    /// Average of the asset means at or above their 75th percentile.
    Q75Mean,
    Explicit(f64),
}

impl EpsilonRule {
    pub fn target(&self, means: &[f64]) -> Result<f64> {
        if means.is_empty() {
            return Err(Error::EmptyUniverse);
        }
        Ok(match *self {
            EpsilonRule::MaxMean => means.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            EpsilonRule::Q75Mean => {
                let q = percentile(means, 0.75);
                let upper: Vec<f64> = means.iter().copied().filter(|m| *m >= q).collect();
                upper.iter().sum::<f64>() / upper.len() as f64
            }
            EpsilonRule::Explicit(v) => v,
        })
    }
}

/// Percentile with linear interpolation between order statistics.
fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Size of the hedge-score reduction; `None` allocates on the full universe.
    pub k: Option<usize>,
    pub allocator: Method,
    /// Switches MP/MPNS to the risk-aversion formulation.
    pub gamma: Option<f64>,
    pub epsilon_rule: EpsilonRule,
    pub return_kind: ReturnKind,
    /// Opt-in diagonal regularization of the training covariance.
    pub jitter: bool,
}

impl PipelineConfig {
    pub fn new(k: Option<usize>, allocator: Method) -> Self {
        PipelineConfig {
            k,
            allocator,
            gamma: None,
            epsilon_rule: EpsilonRule::MaxMean,
            return_kind: ReturnKind::Linear,
            jitter: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == Some(0) {
            return Err(Error::KOutOfRange { k: 0, n: 0 });
        }
        if let Some(g) = self.gamma {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::BadParameter(format!("gamma must be positive, got {g}")));
            }
        }
        Ok(())
    }

    /// Table label, e.g. `PM+MPNS` or `EWP`.
    pub fn label(&self) -> String {
        match self.k {
            Some(_) => format!("PM+{}", self.allocator),
            None => self.allocator.to_string(),
        }
    }

    fn sort_key(&self) -> (bool, Method, Option<usize>) {
        (self.k.is_none(), self.allocator, self.k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub total_return_pct: f64,
    pub annual_return_pct: f64,
    pub annual_vol_pct: f64,
    pub sharpe: f64,
    /// False when volatility is zero; `sharpe` is then reported as 0.
    pub sharpe_defined: bool,
    /// Compounded wealth reached zero; total return is floored at -100.
    pub wiped_out: bool,
}

/// Performance of fixed weights rebalanced daily over `test`.
pub fn evaluate(weights: &AllocationResult, test: &ReturnPanel) -> Result<Metrics> {
    let t = test.n_rows();
    if t < 2 {
        return Err(Error::TooFewRows { needed: 2, got: t });
    }
    let idx = weights
        .tickers
        .iter()
        .map(|name| test.ticker_index(name).ok_or_else(|| Error::MissingTicker(name.clone())))
        .collect::<Result<Vec<_>>>()?;
    let linear = test.to_kind(ReturnKind::Linear);
    let r = linear.returns();
    let daily: Vec<f64> =
        (0..t).map(|day| idx.iter().zip(&weights.weights).map(|(&j, w)| w * r[(day, j)]).sum()).collect();
    Ok(metrics_from_daily(&daily))
}

/// The four statistics of a daily portfolio return series.
pub fn metrics_from_daily(daily: &[f64]) -> Metrics {
    let t = daily.len();
    let mut wealth = 1.0;
    let mut wiped_out = false;
    for r in daily {
        wealth *= 1.0 + r;
        if wealth <= 0.0 {
            wiped_out = true;
            break;
        }
    }
    let total_return_pct = if wiped_out { -100.0 } else { ((wealth - 1.0) * 100.0).max(-100.0) };

    let mean = daily.iter().sum::<f64>() / t as f64;
    let var = daily.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (t - 1) as f64;
    let mut sd = var.sqrt();
    // rounding residue of a constant series
    let peak = daily.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if sd <= 1e-12 * peak {
        sd = 0.0;
    }
    let annual_return_pct = mean * TRADING_DAYS * 100.0;
    let annual_vol_pct = sd * TRADING_DAYS.sqrt() * 100.0;
    let sharpe_defined = annual_vol_pct > 0.0;
    Metrics {
        total_return_pct,
        annual_return_pct,
        annual_vol_pct,
        sharpe: if sharpe_defined { annual_return_pct / annual_vol_pct } else { 0.0 },
        sharpe_defined,
        wiped_out,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub selection: Option<Selection>,
    pub estimate: Option<CovEstimate>,
    pub allocation: AllocationResult,
    pub metrics: Metrics,
}

/// Reduce (optionally), estimate and allocate on `train`; evaluate on `test`.
pub fn run_pipeline(
    panel: &ReturnPanel,
    train: &WindowSpec,
    test: &WindowSpec,
    cfg: &PipelineConfig,
) -> Result<PipelineOutcome> {
    cfg.validate()?;
    if train.end >= test.start {
        return Err(Error::BadWindow(format!("train window {train} must end before test window {test}")));
    }
    let panel = panel.to_kind(cfg.return_kind);
    let train_panel = slice(&panel, train)?;
    let test_panel = slice(&panel, test)?;

    let selection = match cfg.k {
        Some(k) => Some(select_top_k(&hedge_scores(&train_panel)?, k)?),
        None => None,
    };
    let universe = match &selection {
        Some(s) => s.chosen.clone(),
        None => panel.tickers().to_vec(),
    };

    let (allocation, estimate) = if cfg.allocator == Method::EWP {
        (ewp(&universe)?, None)
    } else {
        let mut est = sample_cov(&train_panel.select(&universe)?)?;
        if cfg.jitter {
            est = with_jitter(&est)?;
        }
        let means: Vec<f64> = est.mean().iter().copied().collect();
        let alloc = match (cfg.allocator, cfg.gamma) {
            (Method::MP, Some(g)) => omv2_closed_form(&est, g)?,
            (Method::MP, None) => omv1_short(&est, cfg.epsilon_rule.target(&means)?)?,
            (_, Some(g)) => omv2_no_short(&est, g)?,
            (_, None) => omv1_no_short(&est, Some(cfg.epsilon_rule.target(&means)?))?,
        };
        (alloc, Some(est))
    };
    let metrics = evaluate(&allocation, &test_panel)?;
    Ok(PipelineOutcome { selection, estimate, allocation, metrics })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub train: String,
    pub test: String,
    pub method: String,
    pub k: Option<usize>,
    pub metrics: Option<Metrics>,
    pub error: Option<String>,
    pub error_message: Option<String>,
    pub universe: Vec<String>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub rows: Vec<ReportRow>,
}

impl BacktestReport {
    /// Table CSV with two decimals; failed cells carry `ERR:<code>`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(b"train,test,method,k,total_return_pct,annual_return_pct,annual_vol_pct,sharpe\n")?;
        for row in &self.rows {
            let k = row.k.map(|k| k.to_string()).unwrap_or_default();
            let cells: [String; 4] = match (&row.metrics, &row.error) {
                (Some(m), _) => [m.total_return_pct, m.annual_return_pct, m.annual_vol_pct, m.sharpe].map(fixed2),
                (None, err) => {
                    let e = format!("ERR:{}", err.as_deref().unwrap_or("Unknown"));
                    [e.clone(), e.clone(), e.clone(), e]
                }
            };
            writeln!(out, "{},{},{},{},{}", row.train, row.test, row.method, k, cells.join(","))?;
        }
        Ok(())
    }
}

fn row_for(panel: &ReturnPanel, train: &WindowSpec, test: &WindowSpec, cfg: &PipelineConfig) -> ReportRow {
    let mut row = ReportRow {
        train: train.label.clone(),
        test: test.label.clone(),
        method: cfg.label(),
        k: cfg.k,
        metrics: None,
        error: None,
        error_message: None,
        universe: Vec::new(),
        weights: Vec::new(),
    };
    match run_pipeline(panel, train, test, cfg) {
        Ok(out) => {
            row.metrics = Some(out.metrics);
            row.universe = out.allocation.tickers;
            row.weights = out.allocation.weights;
        }
        Err(e) => {
            row.error = Some(e.code().to_string());
            row.error_message = Some(e.to_string());
        }
    }
    row
}

/// Every consecutive window pair against every config. Cells fail
/// independently; rows are ordered by test window, then method, then `k`.
pub fn run_grid(panel: &ReturnPanel, years: &[WindowSpec], cfgs: &[PipelineConfig]) -> Result<BacktestReport> {
    if years.len() < 2 {
        return Err(Error::BadWindow(format!("need at least 2 windows, got {}", years.len())));
    }
    if let Some(w) = years.windows(2).find(|w| w[0].end >= w[1].start) {
        return Err(Error::BadWindow(format!("windows {} and {} are not consecutive", w[0], w[1])));
    }
    for cfg in cfgs {
        cfg.validate()?;
    }
    let mut order: Vec<usize> = (0..cfgs.len()).collect();
    order.sort_by(|&a, &b| cfgs[a].sort_key().partial_cmp(&cfgs[b].sort_key()).unwrap_or(Ordering::Equal));

    let cells: Vec<(usize, usize)> = (0..years.len() - 1).flat_map(|y| order.iter().map(move |&c| (y, c))).collect();
    let rows = cells.par_iter().map(|&(y, c)| row_for(panel, &years[y], &years[y + 1], &cfgs[c])).collect();
    Ok(BacktestReport { rows })
}
