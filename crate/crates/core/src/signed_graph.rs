//! Weighted signed graphs built from estimator matrices or from a single
//! day's cross-section of demeaned returns, plus triangle and balance
//! analytics.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{CovEstimate, EstimateKind, Thresholds};
use crate::fmt::sig12;

/// Matrix entries with magnitude at or below this are treated as absent edges.
pub const DEFAULT_ZERO_CUTOFF: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Pos,
    Neg,
}

impl Sign {
    fn as_str(self) -> &'static str {
        match self {
            Sign::Pos => "+",
            Sign::Neg => "-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
    pub sign: Sign,
}

/// Undirected signed graph; edges are stored once with `i < j`, sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedGraph {
    n: usize,
    edges: Vec<Edge>,
    labels: Option<Vec<String>>,
    // dense lookup, row-major n*n
    adjacency: Vec<Option<Sign>>,
}

impl SignedGraph {
    /// Builds a graph from `(i, j, weight)` triples; the sign follows the
    /// weight (`>= 0` is positive).
    pub fn from_weighted_edges(n: usize, triples: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut g = SignedGraph { n, edges: Vec::new(), labels: None, adjacency: vec![None; n * n] };
        for (a, b, weight) in triples {
            let (i, j) = (a.min(b), a.max(b));
            if j >= n {
                return Err(Error::VertexOutOfRange { vertex: j, n });
            }
            if i == j {
                return Err(Error::BadParameter(format!("self-loop at {i}")));
            }
            if g.adjacency[i * n + j].is_some() {
                return Err(Error::BadParameter(format!("duplicate edge ({i},{j})")));
            }
            let sign = if weight >= 0.0 { Sign::Pos } else { Sign::Neg };
            g.adjacency[i * n + j] = Some(sign);
            g.adjacency[j * n + i] = Some(sign);
            g.edges.push(Edge { i, j, weight, sign });
        }
        g.edges.sort_by_key(|e| (e.i, e.j));
        Ok(g)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: labels.len() });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn sign(&self, i: usize, j: usize) -> Option<Sign> {
        if i >= self.n || j >= self.n {
            return None;
        }
        self.adjacency[i * self.n + j]
    }

    pub fn negative_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| e.sign == Sign::Neg).count()
    }
}

/// Graph of an estimator matrix. Without thresholds every entry with
/// magnitude above the cutoff is an edge; with thresholds only entries above
/// `tau_plus` (positive) or below `tau_minus` (negative) are.
pub fn from_matrix(est: &CovEstimate, taus: Option<Thresholds>) -> Result<SignedGraph> {
    from_matrix_with_cutoff(est, taus, DEFAULT_ZERO_CUTOFF)
}

pub fn from_matrix_with_cutoff(est: &CovEstimate, taus: Option<Thresholds>, cutoff: f64) -> Result<SignedGraph> {
    if let Some(t) = taus {
        Thresholds::new(t.tau_plus, t.tau_minus)?;
        if est.kind() != EstimateKind::Correlation {
            return Err(Error::WrongEstimateKind { expected: "correlation" });
        }
    }
    let n = est.dim();
    let m = est.matrix();
    let mut triples = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let v = m[(i, j)];
            let keep = match taus {
                None => v.abs() > cutoff,
                Some(t) => v > t.tau_plus || v < t.tau_minus,
            };
            if keep {
                triples.push((i, j, v));
            }
        }
    }
    SignedGraph::from_weighted_edges(n, triples)?.with_labels(est.tickers().to_vec())
}

/// Complete graph of one day: edge `(i, j)` is negative iff the product of
/// the two deviations is strictly negative.
pub fn daily_sign_graph(deviations: &[f64]) -> Result<SignedGraph> {
    let n = deviations.len();
    if n < 2 {
        return Err(Error::TooFewAssets { needed: 2, got: n });
    }
    if deviations.iter().any(|d| !d.is_finite()) {
        return Err(Error::BadParameter("deviations must be finite".into()));
    }
    let triples = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j, deviations[i] * deviations[j])));
    SignedGraph::from_weighted_edges(n, triples)
}

pub fn negative_degree(g: &SignedGraph, v: usize) -> Result<usize> {
    if v >= g.n {
        return Err(Error::VertexOutOfRange { vertex: v, n: g.n });
    }
    Ok((0..g.n).filter(|&u| g.sign(v, u) == Some(Sign::Neg)).count())
}

/// Triangle counts bucketed by number of negative edges.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriangleCensus {
    pub t0: u64,
    pub t1: u64,
    pub t2: u64,
    pub t3: u64,
}

impl TriangleCensus {
    pub fn total(&self) -> u64 {
        self.t0 + self.t1 + self.t2 + self.t3
    }

    /// Triangles with an odd number of negative edges.
    pub fn unbalanced(&self) -> u64 {
        self.t1 + self.t3
    }
}

pub fn triangle_census(g: &SignedGraph) -> TriangleCensus {
    let n = g.n;
    let mut counts = [0u64; 4];
    for e in &g.edges {
        // each triangle is visited once, from its lowest-index edge (i, j) with k > j
        for k in e.j + 1..n {
            if let (Some(a), Some(b)) = (g.sign(e.i, k), g.sign(e.j, k)) {
                let neg = [e.sign, a, b].iter().filter(|s| **s == Sign::Neg).count();
                counts[neg] += 1;
            }
        }
    }
    TriangleCensus { t0: counts[0], t1: counts[1], t2: counts[2], t3: counts[3] }
}

/// Two-colouring witnessing structural balance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bipartition {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

/// Signed BFS per connected component: positive edges keep the colour,
/// negative edges flip it. `None` when some cycle has an odd number of
/// negative edges.
pub fn is_balanced(g: &SignedGraph) -> Option<Bipartition> {
    let n = g.n;
    let mut neighbours: Vec<Vec<(usize, Sign)>> = vec![Vec::new(); n];
    for e in &g.edges {
        neighbours[e.i].push((e.j, e.sign));
        neighbours[e.j].push((e.i, e.sign));
    }
    let mut colour: Vec<Option<bool>> = vec![None; n];
    let mut queue = VecDeque::new();
    for root in 0..n {
        if colour[root].is_some() {
            continue;
        }
        colour[root] = Some(false);
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            let cv = colour[v].unwrap();
            for &(u, s) in &neighbours[v] {
                let want = if s == Sign::Neg { !cv } else { cv };
                match colour[u] {
                    None => {
                        colour[u] = Some(want);
                        queue.push_back(u);
                    }
                    Some(c) if c != want => return None,
                    Some(_) => {}
                }
            }
        }
    }
    let (a, b): (Vec<usize>, Vec<usize>) = (0..n).partition(|&v| colour[v] == Some(false));
    Some(Bipartition { a, b })
}

/// `wᵀ Σ w`.
pub fn portfolio_variance(cov: &CovEstimate, w: &[f64]) -> Result<f64> {
    let n = cov.dim();
    if w.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: w.len() });
    }
    let m = cov.matrix();
    let mut total = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += m[(i, j)] * w[j];
        }
        total += w[i] * row;
    }
    Ok(total)
}

/// Writes the edge list as `i,j,weight,sign`.
pub fn write_edge_csv<W: Write>(g: &SignedGraph, mut out: W) -> std::io::Result<()> {
    out.write_all(b"i,j,weight,sign\n")?;
    for e in &g.edges {
        writeln!(out, "{},{},{},{}", e.i, e.j, sig12(e.weight), e.sign.as_str())?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphSummary<'a> {
    pub n: usize,
    pub labels: Option<&'a [String]>,
    pub edges: &'a [Edge],
    pub negative_edges: usize,
    pub census: TriangleCensus,
    pub balanced: bool,
    pub bipartition: Option<Bipartition>,
}

/// JSON-ready view of a graph with its census and balance verdict.
pub fn summarize(g: &SignedGraph) -> GraphSummary<'_> {
    let bipartition = is_balanced(g);
    GraphSummary {
        n: g.n,
        labels: g.labels(),
        edges: &g.edges,
        negative_edges: g.negative_edge_count(),
        census: triangle_census(g),
        balanced: bipartition.is_some(),
        bipartition,
    }
}
