//! Bradley-Terry-Luce model primitives.
//!
//! Items are 0-based indices. Time indices are 1-based: a series of length
//! `T` holds one comparison for each `t` in `1..=T`, and intervals are
//! closed [`Span`]s over those indices.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

const ZERO_SUM_TOL: f64 = 1e-8;
const BOX_TOL: f64 = 1e-8;

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse of [`sigmoid`].
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Smallest pairwise win probability attainable when `|θ_i| ≤ bound_b`.
pub fn p_lb(bound_b: f64) -> Result<f64> {
    if !(bound_b >= 0.0) || !bound_b.is_finite() {
        return Err(Error::invalid(format!(
            "dynamic range must be finite and nonnegative; got {bound_b}"
        )));
    }
    Ok(sigmoid(-2.0 * bound_b))
}

/// Preference scores on the log scale, centred and box-bounded.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta {
    scores: Vec<f64>,
    bound_b: f64,
}

impl Theta {
    pub fn new(scores: Vec<f64>, bound_b: f64) -> Result<Self> {
        if !(bound_b >= 0.0) || !bound_b.is_finite() {
            return Err(Error::invalid(format!("bound must be finite and >= 0; got {bound_b}")));
        }
        if scores.is_empty() {
            return Err(Error::invalid("theta needs at least one item"));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("theta contains a non-finite score".into()));
        }
        let sum: f64 = scores.iter().sum();
        if sum.abs() > ZERO_SUM_TOL {
            return Err(Error::invalid(format!("scores must sum to zero; sum = {sum:e}")));
        }
        let max_abs = scores.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
        if max_abs > bound_b + BOX_TOL {
            return Err(Error::invalid(format!(
                "max |score| = {max_abs} exceeds bound {bound_b}"
            )));
        }
        Ok(Self { scores, bound_b })
    }

    /// Centres `scores` first, then validates.
    pub fn centered(mut scores: Vec<f64>, bound_b: f64) -> Result<Self> {
        center(&mut scores);
        Self::new(scores, bound_b)
    }

    pub fn zeros(n: usize, bound_b: f64) -> Result<Self> {
        Self::new(vec![0.0; n], bound_b)
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn bound(&self) -> f64 {
        self.bound_b
    }

    pub fn n(&self) -> usize {
        self.scores.len()
    }

    pub fn into_scores(self) -> Vec<f64> {
        self.scores
    }

    /// Same scores under a different (still valid) bound.
    pub fn with_bound(&self, bound_b: f64) -> Result<Self> {
        Self::new(self.scores.clone(), bound_b)
    }

    /// Items ordered from strongest to weakest; ties keep index order.
    pub fn ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n()).collect();
        order.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]));
        order
    }

    pub(crate) fn from_parts_unchecked(scores: Vec<f64>, bound_b: f64) -> Self {
        Self { scores, bound_b }
    }
}

pub(crate) fn center(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Euclidean projection onto `{θ : Σθ = 0, |θ_i| ≤ b}`.
///
/// The projection has the form `clip(v - τ, -b, b)`; the shift `τ` is found
/// exactly on the piecewise-linear sum function.
pub fn project_zero_sum_box(v: &[f64], b: f64) -> Vec<f64> {
    project_with_shift(v, b).0
}

/// Projection plus the shift `τ` it applied.
pub(crate) fn project_with_shift(v: &[f64], b: f64) -> (Vec<f64>, f64) {
    let n = v.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    if b <= 0.0 {
        return (vec![0.0; n], v.iter().sum::<f64>() / n as f64);
    }
    let clipped_sum = |tau: f64| -> f64 { v.iter().map(|&x| (x - tau).clamp(-b, b)).sum() };

    let mut knots: Vec<f64> = v.iter().flat_map(|&x| [x - b, x + b]).collect();
    knots.sort_by(f64::total_cmp);

    // clipped_sum is non-increasing: +nb at the first knot, -nb at the last.
    let (mut lo, mut hi) = (0usize, knots.len() - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if clipped_sum(knots[mid]) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (t_lo, t_hi) = (knots[lo], knots[hi]);
    let (h_lo, h_hi) = (clipped_sum(t_lo), clipped_sum(t_hi));
    let tau = if h_lo - h_hi > 0.0 {
        t_lo + h_lo / (h_lo - h_hi) * (t_hi - t_lo)
    } else {
        t_lo
    };
    (v.iter().map(|&x| (x - tau).clamp(-b, b)).collect(), tau)
}

/// Fixed undirected graph of pairs eligible for comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    /// Dense `n × n` lookup into `edges`; `u32::MAX` marks a non-edge.
    index: Vec<u32>,
    degree: Vec<usize>,
}

impl ComparisonGraph {
    /// Builds a graph from unordered pairs. Pairs may be given in either
    /// orientation; self-loops, duplicates and disconnected graphs are rejected.
    pub fn new(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("need at least 2 items; got {n}")));
        }
        let mut index = vec![u32::MAX; n * n];
        let mut degree = vec![0usize; n];
        let mut edges = Vec::new();
        for (a, b) in pairs {
            for x in [a, b] {
                if x >= n {
                    return Err(Error::IndexOutOfRange { index: x, n });
                }
            }
            if a == b {
                return Err(Error::invalid(format!("self-loop on item {a}")));
            }
            let (i, j) = (a.min(b), a.max(b));
            if index[i * n + j] != u32::MAX {
                return Err(Error::invalid(format!("duplicate edge ({i}, {j})")));
            }
            index[i * n + j] = 0;
            edges.push((i, j));
        }
        edges.sort_unstable();
        for (k, &(i, j)) in edges.iter().enumerate() {
            index[i * n + j] = k as u32;
            index[j * n + i] = k as u32;
            degree[i] += 1;
            degree[j] += 1;
        }
        let graph = Self {
            n,
            edges,
            index,
            degree,
        };
        if !graph.is_connected() {
            return Err(Error::DisconnectedGraph);
        }
        Ok(graph)
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn max_degree(&self) -> usize {
        self.degree.iter().copied().max().unwrap_or(0)
    }

    pub fn degree(&self, i: usize) -> usize {
        self.degree[i]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.edge_id(i, j).is_some()
    }

    /// Position of the unordered pair `{i, j}` in [`Self::edges`].
    pub fn edge_id(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n || j >= self.n {
            return None;
        }
        match self.index[i * self.n + j] {
            u32::MAX => None,
            k => Some(k as usize),
        }
    }

    /// Combinatorial Laplacian `D - A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            l[(i, i)] += 1.0;
            l[(j, j)] += 1.0;
            l[(i, j)] -= 1.0;
            l[(j, i)] -= 1.0;
        }
        l
    }

    fn is_connected(&self) -> bool {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.n
    }
}

/// One comparison: at `time`, `winner` beat `loser`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub time: usize,
    pub winner: usize,
    pub loser: usize,
}

/// Closed interval `[first, last]` of 1-based time indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub first: usize,
    pub last: usize,
}

impl Span {
    pub fn new(first: usize, last: usize) -> Self {
        Self { first, last }
    }

    pub fn len(&self) -> usize {
        if self.last >= self.first {
            self.last - self.first + 1
        } else {
            0
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A comparison stream with exactly one record per time index `1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    graph: ComparisonGraph,
    records: Vec<Observation>,
    /// Per record: edge id and whether the lower-indexed endpoint won.
    keys: Vec<(u32, bool)>,
}

impl ObservationSeries {
    pub fn new(graph: ComparisonGraph, records: Vec<Observation>) -> Result<Self> {
        let n = graph.n();
        let mut keys = Vec::with_capacity(records.len());
        for (pos, r) in records.iter().enumerate() {
            if r.time != pos + 1 {
                return Err(Error::invalid(format!(
                    "record {} has time {}; times must be exactly 1..=T in order",
                    pos + 1,
                    r.time
                )));
            }
            for x in [r.winner, r.loser] {
                if x >= n {
                    return Err(Error::IndexOutOfRange { index: x, n });
                }
            }
            if r.winner == r.loser {
                return Err(Error::invalid(format!("time {}: item compared with itself", r.time)));
            }
            let edge = graph.edge_id(r.winner, r.loser).ok_or_else(|| {
                Error::invalid(format!(
                    "time {}: pair ({}, {}) is not an edge of the comparison graph",
                    r.time, r.winner, r.loser
                ))
            })?;
            keys.push((edge as u32, r.winner < r.loser));
        }
        Ok(Self {
            graph,
            records,
            keys,
        })
    }

    /// Assigns times `1..=T` to `(winner, loser)` pairs in order.
    pub fn from_pairs(graph: ComparisonGraph, pairs: &[(usize, usize)]) -> Result<Self> {
        let records = pairs
            .iter()
            .enumerate()
            .map(|(k, &(winner, loser))| Observation {
                time: k + 1,
                winner,
                loser,
            })
            .collect();
        Self::new(graph, records)
    }

    pub fn graph(&self) -> &ComparisonGraph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// Series length `T`.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Observation] {
        &self.records
    }

    pub fn full_span(&self) -> Span {
        Span::new(1, self.len())
    }

    pub fn check_span(&self, span: Span) -> Result<()> {
        if span.first == 0 || span.is_empty() || span.last > self.len() {
            return Err(Error::BadInterval {
                first: span.first,
                last: span.last,
                t_max: self.len(),
            });
        }
        Ok(())
    }

    /// Records with times in `span` (unchecked bounds are clamped).
    pub fn window(&self, span: Span) -> &[Observation] {
        let lo = span.first.saturating_sub(1).min(self.len());
        let hi = span.last.min(self.len()).max(lo);
        &self.records[lo..hi]
    }

    pub(crate) fn keys(&self, span: Span) -> &[(u32, bool)] {
        let lo = span.first.saturating_sub(1).min(self.len());
        let hi = span.last.min(self.len()).max(lo);
        &self.keys[lo..hi]
    }

    /// Re-times a subset of records (given by 1-based original times) as a
    /// new series on the same graph.
    pub fn subsample(&self, times: impl IntoIterator<Item = usize>) -> Result<Self> {
        let records: Vec<Observation> = times
            .into_iter()
            .enumerate()
            .map(|(k, t)| {
                let r = self.records[t - 1];
                Observation {
                    time: k + 1,
                    winner: r.winner,
                    loser: r.loser,
                }
            })
            .collect();
        Self::new(self.graph.clone(), records)
    }
}

/// Win probability matrix: `P[i][j]` is the probability that `i` beats `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl ProbMatrix {
    /// Validates `P + Pᵀ = 1` off the diagonal, a 0.5 diagonal and entries in (0, 1).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n < 2 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("probability matrix must be square with n >= 2"));
        }
        let entries: Vec<f64> = rows.iter().flatten().copied().collect();
        for i in 0..n {
            if (entries[i * n + i] - 0.5).abs() > 1e-12 {
                return Err(Error::invalid(format!("diagonal entry {i} must be 0.5")));
            }
            for j in 0..n {
                let p = entries[i * n + j];
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::invalid(format!("entry ({i}, {j}) = {p} not in (0, 1)")));
                }
                if (p + entries[j * n + i] - 1.0).abs() > 1e-12 {
                    return Err(Error::invalid(format!("P[{i}][{j}] + P[{j}][{i}] != 1")));
                }
            }
        }
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row_difference_sums(&self, other: &ProbMatrix) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (0..self.n)
                    .filter(|&j| j != i)
                    .map(|j| self.get(i, j) - other.get(i, j))
                    .sum()
            })
            .collect()
    }
}

/// `P(i beats j) = sigmoid(θ_i - θ_j)`.
pub fn win_prob(theta: &Theta, i: usize, j: usize) -> Result<f64> {
    let n = theta.n();
    for x in [i, j] {
        if x >= n {
            return Err(Error::IndexOutOfRange { index: x, n });
        }
    }
    if i == j {
        return Err(Error::invalid("win probability needs two distinct items"));
    }
    Ok(sigmoid(theta.scores[i] - theta.scores[j]))
}

pub fn prob_matrix(theta: &Theta) -> ProbMatrix {
    let n = theta.n();
    let s = theta.scores();
    let mut entries = vec![0.5; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                entries[i * n + j] = sigmoid(s[i] - s[j]);
            }
        }
    }
    ProbMatrix { n, entries }
}

fn check_theta_for(theta: &Theta, series: &ObservationSeries, span: Span) -> Result<()> {
    if theta.n() != series.n() {
        return Err(Error::invalid(format!(
            "theta has {} items but the series has {}",
            theta.n(),
            series.n()
        )));
    }
    series.check_span(span)
}

/// Negative log-likelihood of the comparisons in `span`.
pub fn neg_log_lik(theta: &Theta, series: &ObservationSeries, span: Span) -> Result<f64> {
    check_theta_for(theta, series, span)?;
    let s = theta.scores();
    Ok(series
        .window(span)
        .iter()
        .map(|r| softplus(s[r.loser] - s[r.winner]))
        .sum())
}

/// Gradient of [`neg_log_lik`] with respect to the scores.
pub fn grad_neg_log_lik(theta: &Theta, series: &ObservationSeries, span: Span) -> Result<DVector<f64>> {
    check_theta_for(theta, series, span)?;
    let s = theta.scores();
    let mut g = DVector::zeros(theta.n());
    for r in series.window(span) {
        // residual ψ(xᵀθ) - y with x = e_winner - e_loser, y = 1
        let resid = sigmoid(s[r.winner] - s[r.loser]) - 1.0;
        g[r.winner] += resid;
        g[r.loser] -= resid;
    }
    Ok(g)
}

/// Hessian of [`neg_log_lik`]: a graph Laplacian weighted by `ψ'(xᵀθ)`.
pub fn hess_neg_log_lik(theta: &Theta, series: &ObservationSeries, span: Span) -> Result<DMatrix<f64>> {
    check_theta_for(theta, series, span)?;
    let s = theta.scores();
    let n = theta.n();
    let mut h = DMatrix::zeros(n, n);
    for r in series.window(span) {
        let p = sigmoid(s[r.winner] - s[r.loser]);
        let w = p * (1.0 - p);
        let (a, b) = (r.winner, r.loser);
        h[(a, a)] += w;
        h[(b, b)] += w;
        h[(a, b)] -= w;
        h[(b, a)] -= w;
    }
    Ok(h)
}

/// The two-sided bound relating score distance to probability-matrix distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichBounds {
    /// `n p_lb² / 16 · ‖θ¹ - θ²‖²`
    pub lower: f64,
    /// `Σ_{i<j} (P¹_ij - P²_ij)²`, one term per unordered pair.
    pub middle: f64,
    /// `n / 16 · ‖θ¹ - θ²‖²`
    pub upper: f64,
    /// `‖P¹ - P²‖_F²` over the full matrix, i.e. `2 · middle`.
    pub frobenius_sq: f64,
}

impl SandwichBounds {
    pub fn holds(&self, tol: f64) -> bool {
        self.lower <= self.middle + tol && self.middle <= self.upper + tol
    }
}

pub fn prob_matrix_bounds_check(theta1: &Theta, theta2: &Theta) -> Result<SandwichBounds> {
    if theta1.n() != theta2.n() {
        return Err(Error::invalid("thetas have different item counts"));
    }
    if theta1.bound() != theta2.bound() {
        return Err(Error::invalid("thetas have different bounds"));
    }
    let n = theta1.n();
    let (a, b) = (theta1.scores(), theta2.scores());
    let dist_sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let mut middle = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d = sigmoid(a[i] - a[j]) - sigmoid(b[i] - b[j]);
            middle += d * d;
        }
    }
    let plb = p_lb(theta1.bound())?;
    let nf = n as f64;
    Ok(SandwichBounds {
        lower: nf * plb * plb / 16.0 * dist_sq,
        middle,
        upper: nf / 16.0 * dist_sq,
        frobenius_sq: 2.0 * middle,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphSpectrum {
    /// Algebraic connectivity: second-smallest Laplacian eigenvalue.
    pub lambda2: f64,
    pub lambda_max: f64,
    pub d_max: usize,
    pub edge_count: usize,
}

/// Laplacian spectrum summary by dense symmetric eigen-decomposition.
pub fn laplacian_spectrum(graph: &ComparisonGraph) -> Result<GraphSpectrum> {
    let eig = SymmetricEigen::new(graph.laplacian());
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    let lambda2 = values[1];
    let lambda_max = values[values.len() - 1];
    if lambda2 <= 1e-9 * lambda_max.max(1.0) {
        return Err(Error::DisconnectedGraph);
    }
    Ok(GraphSpectrum {
        lambda2,
        lambda_max,
        d_max: graph.max_degree(),
        edge_count: graph.edge_count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_item_series(pairs: &[(usize, usize)]) -> ObservationSeries {
        ObservationSeries::from_pairs(ComparisonGraph::complete(2).unwrap(), pairs).unwrap()
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        let s = sigmoid(50.0);
        assert!(s <= 1.0 && 1.0 - s < 1e-20);
        assert!((sigmoid(9f64.ln()) - 0.9).abs() < 1e-15);
        assert!(sigmoid(-700.0) > 0.0);
        assert!(sigmoid(-700.0).is_finite() && sigmoid(700.0).is_finite());
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
    }

    #[test]
    fn p_lb_values() {
        assert_eq!(p_lb(0.0).unwrap(), 0.5);
        assert!((p_lb(1.0).unwrap() - 0.119_202_922_022_117_6).abs() < 1e-12);
        assert!(p_lb(2.0).unwrap() < p_lb(1.0).unwrap());
        assert!(p_lb(-1.0).is_err());
    }

    #[test]
    fn win_prob_values() {
        let t = Theta::new(vec![1.0, -1.0], 1.0).unwrap();
        assert!((win_prob(&t, 0, 1).unwrap() - 0.880_797_077_977_882_3).abs() < 1e-12);
        assert!(win_prob(&t, 0, 2).is_err());
        assert!(win_prob(&t, 1, 1).is_err());
        let z = Theta::zeros(3, 1.0).unwrap();
        assert_eq!(win_prob(&z, 0, 2).unwrap(), 0.5);
    }

    #[test]
    fn theta_invariants_enforced() {
        assert!(Theta::new(vec![1.0, 0.0], 2.0).is_err());
        assert!(Theta::new(vec![1.5, -1.5], 1.0).is_err());
        assert!(Theta::centered(vec![3.0, 1.0], 1.0).is_ok());
    }

    #[test]
    fn projection_lands_in_feasible_set() {
        let p = project_zero_sum_box(&[5.0, -1.0, -1.0, -1.0, -2.0], 1.0);
        assert!(p.iter().sum::<f64>().abs() < 1e-12);
        assert!(p.iter().all(|x| x.abs() <= 1.0 + 1e-12));
        // already feasible points are fixed
        let q = project_zero_sum_box(&[0.3, -0.1, -0.2], 1.0);
        assert!((q[0] - 0.3).abs() < 1e-12 && (q[2] + 0.2).abs() < 1e-12);
    }

    #[test]
    fn graph_validation() {
        assert!(matches!(
            ComparisonGraph::new(4, [(0, 1), (2, 3)]),
            Err(Error::DisconnectedGraph)
        ));
        assert!(ComparisonGraph::new(3, [(0, 1), (1, 0)]).is_err());
        assert!(ComparisonGraph::new(3, [(0, 0), (1, 2)]).is_err());
        let g = ComparisonGraph::new(3, [(1, 0), (2, 1)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert!(g.contains(2, 1));
        assert!(!g.contains(0, 2));
    }

    #[test]
    fn series_validation() {
        let g = ComparisonGraph::new(3, [(0, 1), (1, 2)]).unwrap();
        assert!(ObservationSeries::from_pairs(g.clone(), &[(0, 2)]).is_err());
        assert!(ObservationSeries::from_pairs(g.clone(), &[(1, 1)]).is_err());
        let bad_time = vec![Observation { time: 2, winner: 0, loser: 1 }];
        assert!(ObservationSeries::new(g, bad_time).is_err());
    }

    #[test]
    fn neg_log_lik_values() {
        let s = two_item_series(&[(0, 1)]);
        let z = Theta::zeros(2, 1.0).unwrap();
        let one = neg_log_lik(&z, &s, Span::new(1, 1)).unwrap();
        assert!((one - 2f64.ln()).abs() < 1e-15);

        let s5 = two_item_series(&[(0, 1); 5]);
        let five = neg_log_lik(&z, &s5, Span::new(1, 5)).unwrap();
        assert!((five - 5.0 * one).abs() < 1e-12);

        let gap = 9f64.ln();
        let t = Theta::new(vec![gap / 2.0, -gap / 2.0], 2.0).unwrap();
        let v = neg_log_lik(&t, &s, Span::new(1, 1)).unwrap();
        assert!((v - 0.105_360_515_657_826_3).abs() < 1e-12);

        assert!(neg_log_lik(&z, &s, Span::new(1, 2)).is_err());
        assert!(neg_log_lik(&z, &s, Span::new(1, 0)).is_err());
    }

    #[test]
    fn hessian_kills_ones() {
        let s = two_item_series(&[(0, 1), (1, 0), (0, 1)]);
        let t = Theta::new(vec![0.2, -0.2], 1.0).unwrap();
        let h = hess_neg_log_lik(&t, &s, s.full_span()).unwrap();
        let ones = DVector::from_element(2, 1.0);
        assert!((h * ones).amax() < 1e-15);
    }

    #[test]
    fn prob_matrix_values() {
        let z = Theta::zeros(4, 1.0).unwrap();
        let p = prob_matrix(&z);
        assert!((0..4).all(|i| (0..4).all(|j| p.get(i, j) == 0.5)));

        let h = 3f64.ln() / 2.0;
        let t = Theta::new(vec![h, -h], 1.0).unwrap();
        let p = prob_matrix(&t);
        assert!((p.get(0, 1) - 0.75).abs() < 1e-15);
        assert!((p.get(0, 1) + p.get(1, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sandwich_identical_is_zero() {
        let t = Theta::new(vec![0.5, -0.2, -0.3], 1.0).unwrap();
        let b = prob_matrix_bounds_check(&t, &t).unwrap();
        assert_eq!((b.lower, b.middle, b.upper), (0.0, 0.0, 0.0));
        let other = Theta::zeros(3, 2.0).unwrap();
        assert!(prob_matrix_bounds_check(&t, &other).is_err());
    }

    #[test]
    fn full_frobenius_exceeds_upper_bound_for_small_moves() {
        // Near θ = 0, ψ' ≈ 1/4, so the unordered sum approaches the upper bound
        // and the two-orientation Frobenius norm is twice that.
        let a = Theta::zeros(4, 1.0).unwrap();
        let b = Theta::new(vec![1e-3, -1e-3, 2e-3, -2e-3], 1.0).unwrap();
        let s = prob_matrix_bounds_check(&a, &b).unwrap();
        assert!(s.holds(0.0));
        assert!(s.middle / s.upper > 0.99);
        assert!(s.frobenius_sq > s.upper);
    }

    #[test]
    fn zero_bound_gap_is_factor_four() {
        // B → 0 gives p_lb → 1/2, so lower = upper / 4.
        let b = 1e-9;
        let t1 = Theta::new(vec![b, -b], b).unwrap();
        let t2 = Theta::new(vec![-b, b], b).unwrap();
        let s = prob_matrix_bounds_check(&t1, &t2).unwrap();
        assert!((s.upper / s.lower - 4.0).abs() < 1e-6);
    }

    #[test]
    fn spectrum_known_graphs() {
        let k5 = laplacian_spectrum(&ComparisonGraph::complete(5).unwrap()).unwrap();
        assert!((k5.lambda2 - 5.0).abs() < 1e-10);
        let path = ComparisonGraph::new(3, [(0, 1), (1, 2)]).unwrap();
        let sp = laplacian_spectrum(&path).unwrap();
        assert!((sp.lambda2 - 1.0).abs() < 1e-10);
        assert!((sp.lambda_max - 3.0).abs() < 1e-10);
        let k10 = laplacian_spectrum(&ComparisonGraph::complete(10).unwrap()).unwrap();
        assert_eq!((k10.d_max, k10.edge_count), (9, 45));
    }

    #[test]
    fn ranking_orders_by_score() {
        let t = Theta::new(vec![-0.5, 0.7, -0.2], 1.0).unwrap();
        assert_eq!(t.ranking(), vec![1, 2, 0]);
    }
}
