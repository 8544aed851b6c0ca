//! Seeded synthetic return panels with a prescribed correlation structure.

use chrono::{Datelike, NaiveDate, Weekday};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ReturnKind, ReturnPanel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationRecipe {
    /// Every off-diagonal entry equals `rho`.
    Equicorrelated { rho: f64 },
    /// Consecutive blocks of the given sizes; `within` inside a block,
    /// `between` across blocks.
    Block { sizes: Vec<usize>, within: f64, between: f64 },
    /// Row-major explicit correlation matrix.
    Explicit { rows: Vec<Vec<f64>> },
}

impl CorrelationRecipe {
    pub fn matrix(&self, n: usize) -> Result<DMatrix<f64>> {
        let m = match self {
            CorrelationRecipe::Equicorrelated { rho } => {
                DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { *rho })
            }
            CorrelationRecipe::Block { sizes, within, between } => {
                if sizes.iter().sum::<usize>() != n {
                    return Err(Error::BadParameter(format!("block sizes {sizes:?} do not sum to {n}")));
                }
                let block: Vec<usize> =
                    sizes.iter().enumerate().flat_map(|(b, &s)| std::iter::repeat_n(b, s)).collect();
                DMatrix::from_fn(n, n, |i, j| match (i == j, block[i] == block[j]) {
                    (true, _) => 1.0,
                    (false, true) => *within,
                    (false, false) => *between,
                })
            }
            CorrelationRecipe::Explicit { rows } => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::DimensionMismatch { expected: n, got: rows.len() });
                }
                DMatrix::from_fn(n, n, |i, j| rows[i][j])
            }
        };
        for i in 0..n {
            if (m[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::BadParameter(format!("diagonal entry {i} is not 1")));
            }
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 || m[(i, j)].abs() > 1.0 {
                    return Err(Error::BadParameter(format!("entry ({i},{j}) is not a valid correlation")));
                }
            }
        }
        Ok(m)
    }
}

/// Parameters of a synthetic panel. Returns are Gaussian with the given
/// daily drift and volatility and the recipe's correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub recipe: CorrelationRecipe,
    pub daily_drift: f64,
    pub daily_vol: f64,
    pub start: NaiveDate,
}

impl SynthSpec {
    pub fn new(recipe: CorrelationRecipe) -> Self {
        SynthSpec {
            recipe,
            daily_drift: 0.0,
            daily_vol: 0.01,
            start: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
        }
    }
}

/// Weekdays from `start` onward (inclusive when `start` is a weekday).
pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    start
        .iter_days()
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .take(n)
        .collect()
}

/// Linear returns for `n_days` business days starting at `spec.start`.
/// Tickers are `S00`, `S01`, ...
pub fn synth_panel(seed: u64, n_assets: usize, n_days: usize, spec: &SynthSpec) -> Result<ReturnPanel> {
    if n_assets < 2 {
        return Err(Error::TooFewAssets { needed: 2, got: n_assets });
    }
    if n_days < 2 {
        return Err(Error::TooFewRows { needed: 2, got: n_days });
    }
    if !(spec.daily_vol.is_finite() && spec.daily_vol >= 0.0) {
        return Err(Error::BadParameter("daily_vol must be finite and non-negative".into()));
    }
    let corr = spec.recipe.matrix(n_assets)?;
    let eig = corr.clone().symmetric_eigen();
    let min_eigenvalue = eig.eigenvalues.min();
    if min_eigenvalue < -1e-10 {
        return Err(Error::NotPsd { min_eigenvalue });
    }
    // Symmetric square root also covers singular (but PSD) recipes.
    let sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    let factor = &eig.eigenvectors * sqrt;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::from_fn(n_assets, n_days, |_, _| StandardNormal.sample(&mut rng));
    let correlated = (factor * z).transpose();
    let returns = correlated.map(|x: f64| spec.daily_drift + spec.daily_vol * x);

    let width = if n_assets > 100 { 3 } else { 2 };
    let tickers = (0..n_assets).map(|j| format!("S{j:0width$}")).collect();
    ReturnPanel::new(business_days(spec.start, n_days), tickers, returns, ReturnKind::Linear)
}
