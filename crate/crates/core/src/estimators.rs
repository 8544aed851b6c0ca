//! Sample moments of a return panel and correlation dead-band thresholding.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{column_means, ReturnPanel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateKind {
    Covariance,
    Correlation,
}

const SYMMETRY_TOL: f64 = 1e-12;

/// A symmetric estimator matrix with the mean vector it was centred on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CovEstimateWire", into = "CovEstimateWire")]
pub struct CovEstimate {
    tickers: Vec<String>,
    mean: DVector<f64>,
    matrix: DMatrix<f64>,
    kind: EstimateKind,
    sample_size: usize,
}

impl CovEstimate {
    pub fn new(
        tickers: Vec<String>,
        mean: DVector<f64>,
        matrix: DMatrix<f64>,
        kind: EstimateKind,
        sample_size: usize,
    ) -> Result<Self> {
        let n = tickers.len();
        if mean.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: mean.len() });
        }
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: matrix.nrows() });
        }
        if sample_size < 2 {
            return Err(Error::TooFewRows { needed: 2, got: sample_size });
        }
        for i in 0..n {
            let d = matrix[(i, i)];
            let diag_ok = match kind {
                EstimateKind::Covariance => d >= 0.0,
                EstimateKind::Correlation => d == 1.0,
            };
            if !diag_ok {
                return Err(Error::BadParameter(format!("invalid diagonal entry {d} at {i}")));
            }
            for j in 0..i {
                let (a, b) = (matrix[(i, j)], matrix[(j, i)]);
                if !(a.is_finite() && (a - b).abs() <= SYMMETRY_TOL) {
                    return Err(Error::BadParameter(format!("matrix not symmetric at ({i},{j})")));
                }
                if kind == EstimateKind::Correlation && a.abs() > 1.0 {
                    return Err(Error::CorrelationOutOfRange { i, j, value: a });
                }
            }
        }
        Ok(CovEstimate { tickers, mean, matrix, kind, sample_size })
    }

    /// Covariance estimate with generated tickers `A0, A1, ...`; handy for
    /// hand-built inputs.
    pub fn from_parts(mean: &[f64], matrix: DMatrix<f64>) -> Result<Self> {
        let tickers = (0..mean.len()).map(|i| format!("A{i}")).collect();
        CovEstimate::new(tickers, DVector::from_column_slice(mean), matrix, EstimateKind::Covariance, 2)
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn kind(&self) -> EstimateKind {
        self.kind
    }

    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    pub fn dim(&self) -> usize {
        self.tickers.len()
    }

    /// Entrywise absolute value of the matrix.
    pub fn abs(&self) -> CovEstimate {
        CovEstimate { matrix: self.matrix.abs(), ..self.clone() }
    }

    /// Principal sub-estimate on `tickers`, in the order given.
    pub fn select(&self, tickers: &[String]) -> Result<CovEstimate> {
        let idx = tickers
            .iter()
            .map(|t| self.tickers.iter().position(|x| x == t).ok_or_else(|| Error::MissingTicker(t.clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok(CovEstimate {
            tickers: tickers.to_vec(),
            mean: DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.mean[i])),
            matrix: DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.matrix[(idx[a], idx[b])]),
            kind: self.kind,
            sample_size: self.sample_size,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct CovEstimateWire {
    tickers: Vec<String>,
    kind: EstimateKind,
    sample_size: usize,
    mean: Vec<f64>,
    matrix: Vec<Vec<f64>>,
}

impl From<CovEstimate> for CovEstimateWire {
    fn from(e: CovEstimate) -> Self {
        CovEstimateWire {
            matrix: e.matrix.row_iter().map(|r| r.iter().copied().collect()).collect(),
            mean: e.mean.iter().copied().collect(),
            tickers: e.tickers,
            kind: e.kind,
            sample_size: e.sample_size,
        }
    }
}

impl TryFrom<CovEstimateWire> for CovEstimate {
    type Error = Error;

    fn try_from(w: CovEstimateWire) -> Result<Self> {
        let n = w.tickers.len();
        if w.matrix.len() != n || w.matrix.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: w.matrix.len() });
        }
        let matrix = DMatrix::from_fn(n, n, |i, j| w.matrix[i][j]);
        CovEstimate::new(w.tickers, DVector::from_vec(w.mean), matrix, w.kind, w.sample_size)
    }
}

pub fn sample_mean(panel: &ReturnPanel) -> Result<DVector<f64>> {
    if panel.n_rows() == 0 {
        return Err(Error::TooFewRows { needed: 1, got: 0 });
    }
    Ok(column_means(panel.returns()))
}

/// Unbiased sample covariance (divides by `T - 1`).
pub fn sample_cov(panel: &ReturnPanel) -> Result<CovEstimate> {
    let t = panel.n_rows();
    if t < 2 {
        return Err(Error::TooFewRows { needed: 2, got: t });
    }
    let mean = sample_mean(panel)?;
    let n = panel.n_assets();
    let mut centred = panel.returns().clone();
    for (j, mut col) in centred.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    let denom = (t - 1) as f64;
    let mut cov = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = centred.column(i).dot(&centred.column(j)) / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    CovEstimate::new(panel.tickers().to_vec(), mean, cov, EstimateKind::Covariance, t)
}

/// Normalizes a covariance estimate to unit diagonal.
///
/// Entries that leave `[-1, 1]` by no more than `1e-12` are clamped; anything
/// further out is reported as an error.
pub fn sample_corr(cov: &CovEstimate) -> Result<CovEstimate> {
    if cov.kind != EstimateKind::Covariance {
        return Err(Error::WrongEstimateKind { expected: "covariance" });
    }
    let n = cov.dim();
    let scale = cov.matrix.diagonal().max().max(0.0).sqrt();
    let var: Vec<f64> = (0..n)
        .map(|i| {
            let v = cov.matrix[(i, i)];
            let s = v.sqrt();
            // a spread this small is rounding residue from centring a constant column
            if s == 0.0 || s <= 1e-13 * (cov.mean[i].abs() + scale) {
                Err(Error::ZeroVariance(cov.tickers[i].clone()))
            } else {
                Ok(v)
            }
        })
        .collect::<Result<_>>()?;
    let mut corr = DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..i {
            let mut r = cov.matrix[(i, j)] / (var[i] * var[j]).sqrt();
            if r.abs() > 1.0 {
                if r.abs() > 1.0 + 1e-12 {
                    return Err(Error::CorrelationOutOfRange { i, j, value: r });
                }
                r = r.signum();
            }
            corr[(i, j)] = r;
            corr[(j, i)] = r;
        }
    }
    CovEstimate::new(cov.tickers.clone(), cov.mean.clone(), corr, EstimateKind::Correlation, cov.sample_size)
}

/// Correlation dead band: `0 < tau_plus < 1`, `-1 < tau_minus < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub tau_plus: f64,
    pub tau_minus: f64,
}

impl Thresholds {
    pub fn new(tau_plus: f64, tau_minus: f64) -> Result<Self> {
        if !(tau_plus > 0.0 && tau_plus < 1.0 && tau_minus > -1.0 && tau_minus < 0.0) {
            return Err(Error::BadThreshold { tau_plus, tau_minus });
        }
        Ok(Thresholds { tau_plus, tau_minus })
    }

    /// True when `value` falls in the closed dead band `[tau_minus, tau_plus]`.
    pub fn suppresses(&self, value: f64) -> bool {
        self.tau_minus <= value && value <= self.tau_plus
    }
}

/// Zeroes off-diagonal correlations inside `[tau_minus, tau_plus]`.
pub fn threshold(est: &CovEstimate, tau_plus: f64, tau_minus: f64) -> Result<CovEstimate> {
    let band = Thresholds::new(tau_plus, tau_minus)?;
    if est.kind != EstimateKind::Correlation {
        return Err(Error::WrongEstimateKind { expected: "correlation" });
    }
    let n = est.dim();
    let matrix = DMatrix::from_fn(n, n, |i, j| {
        let v = est.matrix[(i, j)];
        if i != j && band.suppresses(v) {
            0.0
        } else {
            v
        }
    });
    Ok(CovEstimate { matrix, ..est.clone() })
}
