//! Portfolio weights on a fixed universe: equal weighting, the two
//! Markowitz formulations with short selling (closed forms) and on the
//! simplex (active-set QP).

mod active_set;

use std::fmt;
use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{CovEstimate, EstimateKind};
use crate::fmt::sig12;
use active_set::{snap_small, SimplexQp};

/// Largest accepted condition number for matrices that get inverted.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Mean-variance with short selling.
    MP,
    /// Mean-variance restricted to the simplex.
    MPNS,
    /// Equal weights.
    EWP,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::MP => "MP",
            Method::MPNS => "MPNS",
            Method::EWP => "EWP",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub objective: f64,
    pub iterations: usize,
    pub max_kkt_violation: f64,
    /// Budget-constraint multiplier of the closed-form solutions.
    pub nu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub tickers: Vec<String>,
    pub weights: Vec<f64>,
    pub method: Method,
    pub params: Params,
    pub diagnostics: Diagnostics,
}

impl AllocationResult {
    /// CSV `ticker,weight`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(b"ticker,weight\n")?;
        for (t, w) in self.tickers.iter().zip(&self.weights) {
            writeln!(out, "{t},{}", sig12(*w))?;
        }
        Ok(())
    }
}

pub fn ewp(tickers: &[String]) -> Result<AllocationResult> {
    if tickers.is_empty() {
        return Err(Error::EmptyUniverse);
    }
    let k = tickers.len();
    Ok(AllocationResult {
        tickers: tickers.to_vec(),
        weights: vec![1.0 / k as f64; k],
        method: Method::EWP,
        params: Params::default(),
        diagnostics: Diagnostics::default(),
    })
}

/// Adds `1e-10 · trace / N` to the diagonal. Opt-in only.
pub fn with_jitter(cov: &CovEstimate) -> Result<CovEstimate> {
    let n = cov.dim();
    if n == 0 {
        return Err(Error::EmptyUniverse);
    }
    let lambda = 1e-10 * cov.matrix().trace() / n as f64;
    let m = cov.matrix() + DMatrix::identity(n, n) * lambda;
    CovEstimate::new(cov.tickers().to_vec(), cov.mean().clone(), m, cov.kind(), cov.sample_size())
}

fn require_covariance(cov: &CovEstimate) -> Result<()> {
    if cov.dim() == 0 {
        return Err(Error::EmptyUniverse);
    }
    if cov.kind() != EstimateKind::Covariance {
        return Err(Error::WrongEstimateKind { expected: "covariance" });
    }
    Ok(())
}

/// Cholesky factor of a well-conditioned covariance matrix.
fn factor(cov: &CovEstimate) -> Result<Cholesky<f64, Dyn>> {
    let eig = cov.matrix().clone().symmetric_eigen();
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition.is_nan() || condition > MAX_CONDITION {
        return Err(Error::SingularCovariance { condition });
    }
    Cholesky::new(cov.matrix().clone()).ok_or(Error::SingularCovariance { condition })
}

fn check_psd(cov: &CovEstimate) -> Result<()> {
    let eig = cov.matrix().clone().symmetric_eigen();
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.amax());
    if lo < -1e-10 * hi.max(f64::MIN_POSITIVE) {
        return Err(Error::NotPsd { min_eigenvalue: lo });
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::BadParameter(format!("gamma must be positive, got {gamma}")));
    }
    Ok(())
}

fn quad(m: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    w.dot(&(m * w))
}

fn finish(cov: &CovEstimate, mut w: DVector<f64>, method: Method, params: Params, diagnostics: Diagnostics) -> AllocationResult {
    snap_small(&mut w);
    AllocationResult {
        tickers: cov.tickers().to_vec(),
        weights: w.iter().copied().collect(),
        method,
        params,
        diagnostics,
    }
}

/// Closed-form risk-aversion portfolio with short selling:
/// `w = Σ⁻¹(μ + ν𝟙) / 2γ`, `ν = (2γ − 𝟙ᵀΣ⁻¹μ) / 𝟙ᵀΣ⁻¹𝟙`.
pub fn omv2_closed_form(cov: &CovEstimate, gamma: f64) -> Result<AllocationResult> {
    require_covariance(cov)?;
    check_gamma(gamma)?;
    let chol = factor(cov)?;
    let n = cov.dim();
    let ones = DVector::from_element(n, 1.0);
    let mu = cov.mean();
    let inv_ones = chol.solve(&ones);
    let inv_mu = chol.solve(mu);
    let nu = (2.0 * gamma - inv_mu.sum()) / inv_ones.sum();
    let w = (inv_mu + inv_ones * nu) / (2.0 * gamma);

    let sigma = cov.matrix();
    let stationarity = (sigma * &w * (2.0 * gamma) - mu - &ones * nu).amax();
    let diagnostics = Diagnostics {
        objective: -mu.dot(&w) + gamma * quad(sigma, &w),
        iterations: 0,
        max_kkt_violation: stationarity.max((w.sum() - 1.0).abs()),
        nu: Some(nu),
    };
    let params = Params { gamma: Some(gamma), epsilon: None };
    Ok(finish(cov, w, Method::MP, params, diagnostics))
}

/// Minimum variance at target return `epsilon`, short selling allowed.
pub fn omv1_short(cov: &CovEstimate, epsilon: f64) -> Result<AllocationResult> {
    require_covariance(cov)?;
    let chol = factor(cov)?;
    let n = cov.dim();
    let ones = DVector::from_element(n, 1.0);
    let mu = cov.mean();
    let inv_ones = chol.solve(&ones);
    let inv_mu = chol.solve(mu);
    let a = inv_ones.sum();
    let b = inv_mu.sum();
    let c = mu.dot(&inv_mu);
    let det = a * c - b * b;

    let (w, lambda_budget, lambda_target) = if det <= 1e-12 * (a * c).max(f64::MIN_POSITIVE) {
        // μ ∥ 𝟙: the target is forced to the common mean
        let forced = b / a;
        if (epsilon - forced).abs() > 1e-9 * forced.abs().max(1.0) {
            return Err(Error::DegenerateTarget { epsilon, forced });
        }
        (&inv_ones / a, 2.0 / a, 0.0)
    } else {
        let l1 = (c - b * epsilon) / det;
        let l2 = (a * epsilon - b) / det;
        (&inv_ones * l1 + &inv_mu * l2, 2.0 * l1, 2.0 * l2)
    };

    let sigma = cov.matrix();
    let stationarity = (sigma * &w * 2.0 - &ones * lambda_budget - mu * lambda_target).amax();
    let diagnostics = Diagnostics {
        objective: quad(sigma, &w),
        iterations: 0,
        max_kkt_violation: stationarity.max((w.sum() - 1.0).abs()).max((mu.dot(&w) - epsilon).abs()),
        nu: Some(lambda_budget),
    };
    let params = Params { gamma: None, epsilon: Some(epsilon) };
    Ok(finish(cov, w, Method::MP, params, diagnostics))
}

fn budget_rows(n: usize) -> (DMatrix<f64>, DVector<f64>) {
    (DMatrix::from_element(1, n, 1.0), DVector::from_element(1, 1.0))
}

/// Minimum variance over the simplex, optionally at target return `epsilon`
/// (feasible only for `min μ ≤ ε ≤ max μ`).
pub fn omv1_no_short(cov: &CovEstimate, epsilon: Option<f64>) -> Result<AllocationResult> {
    require_covariance(cov)?;
    check_psd(cov)?;
    let n = cov.dim();
    let mu = cov.mean();
    let params = Params { gamma: None, epsilon };
    let q = cov.matrix() * 2.0;

    let Some(eps) = epsilon else {
        let (e, b) = budget_rows(n);
        let qp = SimplexQp { q, c: DVector::zeros(n), e, b };
        return solved(cov, qp.solve(DVector::from_element(n, 1.0 / n as f64))?, params);
    };

    let (lo, hi) = (mu.min(), mu.max());
    let tol = 1e-12 * mu.amax().max(f64::MIN_POSITIVE);
    if !eps.is_finite() || eps < lo - tol || eps > hi + tol {
        return Err(Error::InfeasibleTarget { epsilon: eps, min: lo, max: hi });
    }
    let at_edge = if hi - lo <= tol {
        None
    } else if eps >= hi - tol {
        Some(hi)
    } else if eps <= lo + tol {
        Some(lo)
    } else {
        let (i, j) = (mu.imin(), mu.imax());
        let theta = (eps - lo) / (hi - lo);
        let mut start = DVector::zeros(n);
        start[i] = 1.0 - theta;
        start[j] = theta;
        let mut e = DMatrix::from_element(2, n, 1.0);
        e.row_mut(1).copy_from(&mu.transpose());
        let qp = SimplexQp { q, c: DVector::zeros(n), e, b: DVector::from_vec(vec![1.0, eps]) };
        return solved(cov, qp.solve(start)?, params);
    };

    // The target pins all weight to the assets whose mean equals the bound,
    // or the target is implied by the budget when every mean is equal.
    let support: Vec<usize> = match at_edge {
        Some(edge) => (0..n).filter(|&i| (mu[i] - edge).abs() <= tol).collect(),
        None => (0..n).collect(),
    };
    let names: Vec<String> = support.iter().map(|&i| cov.tickers()[i].clone()).collect();
    let sub = cov.select(&names)?;
    let m = support.len();
    let (e, b) = budget_rows(m);
    let qp = SimplexQp { q: sub.matrix() * 2.0, c: DVector::zeros(m), e, b };
    let sol = qp.solve(DVector::from_element(m, 1.0 / m as f64))?;
    let mut w = DVector::zeros(n);
    for (a, &i) in support.iter().enumerate() {
        w[i] = sol.w[a];
    }
    let full = active_set::QpSolution { w, ..sol };
    solved(cov, full, params)
}

/// Risk-aversion portfolio over the simplex: minimize `−μᵀw + γ wᵀΣw`.
pub fn omv2_no_short(cov: &CovEstimate, gamma: f64) -> Result<AllocationResult> {
    require_covariance(cov)?;
    check_gamma(gamma)?;
    check_psd(cov)?;
    let n = cov.dim();
    let (e, b) = budget_rows(n);
    let qp = SimplexQp { q: cov.matrix() * (2.0 * gamma), c: -cov.mean(), e, b };
    let sol = qp.solve(DVector::from_element(n, 1.0 / n as f64))?;
    let w = &sol.w;
    let objective = -cov.mean().dot(w) + gamma * quad(cov.matrix(), w);
    let mut result = solved(cov, sol, Params { gamma: Some(gamma), epsilon: None })?;
    result.diagnostics.objective = objective;
    Ok(result)
}

fn solved(cov: &CovEstimate, sol: active_set::QpSolution, params: Params) -> Result<AllocationResult> {
    let diagnostics = Diagnostics {
        objective: quad(cov.matrix(), &sol.w),
        iterations: sol.iterations,
        max_kkt_violation: sol.max_kkt_violation,
        nu: None,
    };
    Ok(finish(cov, sol.w, Method::MPNS, params, diagnostics))
}
