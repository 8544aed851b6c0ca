//! Primal active-set method for convex QPs over the simplex:
//!
//! ```text
//! minimize ½ wᵀQw + cᵀw   subject to   E w = b,  w ≥ 0
//! ```
//!
//! where the first row of `E` is the all-ones budget row. The working set
//! holds the coordinates pinned at zero; each iteration solves the
//! equality-constrained subproblem on the free coordinates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) struct SimplexQp {
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub e: DMatrix<f64>,
    pub b: DVector<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct QpSolution {
    pub w: DVector<f64>,
    pub iterations: usize,
    pub max_kkt_violation: f64,
}

/// Solution of a KKT system by LU, falling back to a truncated SVD when the
/// system is singular (e.g. duplicated assets or dependent constraint rows).
fn solve_kkt(k: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    if let Some(x) = k.clone().lu().solve(rhs) {
        let resid = (k * &x - rhs).amax();
        if x.iter().all(|v| v.is_finite()) && resid <= 1e-10 * (1.0 + rhs.amax()) {
            return x;
        }
    }
    let svd = k.clone().svd(true, true);
    let eps = 1e-13 * svd.singular_values.max();
    svd.solve(rhs, eps).expect("svd computed with both factors")
}

impl SimplexQp {
    fn n(&self) -> usize {
        self.c.len()
    }

    fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.q * w + &self.c
    }

    fn scale(&self) -> f64 {
        (self.q.amax() + self.c.amax()).max(f64::MIN_POSITIVE)
    }

    /// Newton step on the free coordinates and the equality multipliers
    /// (convention: `∇f = Eᵀλ + z`).
    fn subproblem(&self, w: &DVector<f64>, free: &[usize]) -> (DVector<f64>, DVector<f64>) {
        let (f, m) = (free.len(), self.e.nrows());
        let g = self.gradient(w);
        let mut k = DMatrix::zeros(f + m, f + m);
        let mut rhs = DVector::zeros(f + m);
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                k[(a, b)] = self.q[(i, j)];
            }
            for r in 0..m {
                k[(a, f + r)] = self.e[(r, i)];
                k[(f + r, a)] = self.e[(r, i)];
            }
            rhs[a] = -g[i];
        }
        let x = solve_kkt(&k, &rhs);
        let mut p = DVector::zeros(self.n());
        for (a, &i) in free.iter().enumerate() {
            p[i] = x[a];
        }
        let lambda = -x.rows(f, m).into_owned();
        (p, lambda)
    }

    /// Bound multipliers `z = ∇f - Eᵀλ`.
    fn bound_multipliers(&self, w: &DVector<f64>, lambda: &DVector<f64>) -> DVector<f64> {
        self.gradient(w) - self.e.transpose() * lambda
    }

    /// Largest violation of stationarity, primal feasibility and dual
    /// feasibility at `w`, with multipliers fitted by least squares on the
    /// free coordinates.
    pub fn kkt_violation(&self, w: &DVector<f64>) -> f64 {
        let n = self.n();
        let free: Vec<usize> = (0..n).filter(|&i| w[i] > 0.0).collect();
        let g = self.gradient(w);
        let lambda = if free.is_empty() {
            DVector::zeros(self.e.nrows())
        } else {
            let ef = DMatrix::from_fn(free.len(), self.e.nrows(), |a, r| self.e[(r, free[a])]);
            let gf = DVector::from_iterator(free.len(), free.iter().map(|&i| g[i]));
            let svd = ef.svd(true, true);
            let eps = 1e-13 * svd.singular_values.max().max(f64::MIN_POSITIVE);
            svd.solve(&gf, eps).expect("svd computed with both factors")
        };
        let z = self.bound_multipliers(w, &lambda);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            if w[i] > 0.0 {
                worst = worst.max(z[i].abs());
            } else {
                worst = worst.max(-z[i]).max(-w[i]);
            }
        }
        let primal = (&self.e * w - &self.b).amax();
        worst.max(primal)
    }

    pub fn solve(&self, start: DVector<f64>) -> Result<QpSolution> {
        let n = self.n();
        let cap = (n * n).max(10);
        let dual_tol = 1e-10 * self.scale();
        let mut w = start;
        let mut pinned: Vec<bool> = w.iter().map(|&x| x == 0.0).collect();
        let mut at_face_minimum = false;

        for iteration in 1..=cap {
            let free: Vec<usize> = (0..n).filter(|&i| !pinned[i]).collect();
            let (p, lambda) = self.subproblem(&w, &free);
            if at_face_minimum || p.amax() <= 1e-12 {
                let z = self.bound_multipliers(&w, &lambda);
                let release = (0..n)
                    .filter(|&i| pinned[i] && z[i] < -dual_tol)
                    .min_by(|&a, &b| z[a].total_cmp(&z[b]));
                match release {
                    Some(i) => {
                        pinned[i] = false;
                        at_face_minimum = false;
                        continue;
                    }
                    None => return Ok(self.finish(w, iteration)),
                }
            }

            let mut alpha = 1.0;
            let mut blocking = None;
            for &i in &free {
                if p[i] < 0.0 {
                    let ratio = -w[i] / p[i];
                    if ratio < alpha {
                        alpha = ratio;
                        blocking = Some(i);
                    }
                }
            }
            w.axpy(alpha, &p, 1.0);
            for i in 0..n {
                if w[i] < 0.0 {
                    w[i] = 0.0;
                }
            }
            match blocking {
                Some(i) => {
                    w[i] = 0.0;
                    pinned[i] = true;
                    at_face_minimum = false;
                }
                None => at_face_minimum = true,
            }
        }
        Err(Error::IterationCap(cap))
    }

    fn finish(&self, mut w: DVector<f64>, iterations: usize) -> QpSolution {
        snap_small(&mut w);
        let max_kkt_violation = self.kkt_violation(&w);
        QpSolution { w, iterations, max_kkt_violation }
    }
}

/// Zeroes entries below `1e-12` in magnitude and rescales to unit sum.
pub(crate) fn snap_small(w: &mut DVector<f64>) {
    for x in w.iter_mut() {
        if x.abs() < 1e-12 {
            *x = 0.0;
        }
    }
    let s = w.sum();
    if s != 0.0 && s != 1.0 {
        *w /= s;
    }
}
