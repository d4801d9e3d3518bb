//! Interval maximum-likelihood fits.
//!
//! Both modes run a damped Newton method on per-edge win counts, so the cost
//! of a fit is independent of the interval length once the counts are known.

use std::sync::Arc;

use dashmap::DashMap;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{
    center, project_with_shift, sigmoid, softplus, ComparisonGraph, ObservationSeries, Span,
    Theta,
};

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACK: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    /// Minimise the likelihood over the zero-sum box directly.
    Constrained,
    /// Minimise likelihood plus an ℓ2 penalty, then project into the box.
    Ridge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub bound_b: f64,
    pub ridge_lambda: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub mode: FitMode,
    /// Turn a non-converged fit into [`Error::NonConvergence`].
    pub require_convergence: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            bound_b: 10.0,
            ridge_lambda: 0.1,
            max_iter: 100,
            grad_tol: 1e-9,
            mode: FitMode::Ridge,
            require_convergence: false,
        }
    }
}

impl SolverConfig {
    pub fn ridge(ridge_lambda: f64) -> Self {
        Self {
            ridge_lambda,
            ..Self::default()
        }
    }

    pub fn constrained(bound_b: f64) -> Self {
        Self {
            bound_b,
            ridge_lambda: 0.0,
            mode: FitMode::Constrained,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bound_b >= 0.0) || !self.bound_b.is_finite() {
            return Err(Error::invalid(format!("bound_b must be finite and >= 0; got {}", self.bound_b)));
        }
        if !(self.ridge_lambda >= 0.0) || !self.ridge_lambda.is_finite() {
            return Err(Error::invalid(format!(
                "ridge_lambda must be finite and >= 0; got {}",
                self.ridge_lambda
            )));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::invalid("grad_tol must be > 0"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta_hat: Theta,
    /// Negative log-likelihood at `theta_hat`; never includes the ridge term.
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Per-edge win tallies: `wins[e] = [low beats high, high beats low]` for
/// edge `e = (low, high)` of the comparison graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WinCounts {
    wins: Vec<[u32; 2]>,
}

impl WinCounts {
    pub fn zeros(edge_count: usize) -> Self {
        Self {
            wins: vec![[0, 0]; edge_count],
        }
    }

    pub fn from_series(series: &ObservationSeries, span: Span) -> Result<Self> {
        series.check_span(span)?;
        let mut c = Self::zeros(series.graph().edge_count());
        for &key in series.keys(span) {
            c.push(key);
        }
        Ok(c)
    }

    #[inline]
    pub(crate) fn push(&mut self, (edge, low_won): (u32, bool)) {
        self.wins[edge as usize][usize::from(!low_won)] += 1;
    }

    /// `(low beats high, high beats low)` for edge `e`.
    pub fn get(&self, e: usize) -> (u32, u32) {
        let [a, b] = self.wins[e];
        (a, b)
    }

    pub fn total(&self) -> u64 {
        self.wins.iter().map(|w| u64::from(w[0]) + u64::from(w[1])).sum()
    }
}

/// Cumulative per-edge counts, giving the counts of any interval in `O(|E|)`.
#[derive(Debug, Clone)]
pub struct CountIndex {
    edge_count: usize,
    prefix: Vec<u32>,
}

impl CountIndex {
    pub fn new(series: &ObservationSeries) -> Self {
        let e = series.graph().edge_count();
        let t = series.len();
        let mut prefix = vec![0u32; (t + 1) * e * 2];
        for (k, &(edge, low_won)) in series.keys(series.full_span()).iter().enumerate() {
            let (prev, next) = prefix.split_at_mut((k + 1) * e * 2);
            next[..e * 2].copy_from_slice(&prev[k * e * 2..]);
            next[edge as usize * 2 + usize::from(!low_won)] += 1;
        }
        Self {
            edge_count: e,
            prefix,
        }
    }

    /// Counts over `span`; the caller guarantees `span` lies in `1..=T`.
    pub fn counts(&self, span: Span) -> WinCounts {
        let mut c = WinCounts::zeros(self.edge_count);
        self.fill(span, &mut c);
        c
    }

    pub(crate) fn fill(&self, span: Span, out: &mut WinCounts) {
        let w = self.edge_count * 2;
        let hi = &self.prefix[span.last * w..(span.last + 1) * w];
        let lo = &self.prefix[(span.first - 1) * w..span.first * w];
        for (e, slot) in out.wins.iter_mut().enumerate() {
            *slot = [hi[2 * e] - lo[2 * e], hi[2 * e + 1] - lo[2 * e + 1]];
        }
    }
}

/// Edges with at least one comparison, as `(i, j, wins of i, wins of j)`.
struct Problem {
    n: usize,
    terms: Vec<(usize, usize, f64, f64)>,
    total: f64,
}

impl Problem {
    fn new(graph: &ComparisonGraph, counts: &WinCounts) -> Self {
        let terms: Vec<_> = graph
            .edges()
            .iter()
            .zip(&counts.wins)
            .filter(|(_, w)| w[0] + w[1] > 0)
            .map(|(&(i, j), w)| (i, j, f64::from(w[0]), f64::from(w[1])))
            .collect();
        let total = terms.iter().map(|t| t.2 + t.3).sum();
        Self {
            n: graph.n(),
            terms,
            total,
        }
    }

    fn nll(&self, th: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|&(i, j, a, b)| {
                let x = th[i] - th[j];
                let mut v = 0.0;
                if a > 0.0 {
                    v += a * softplus(-x);
                }
                if b > 0.0 {
                    v += b * softplus(x);
                }
                v
            })
            .sum()
    }

    fn grad_hess(&self, th: &[f64], g: &mut DVector<f64>, h: &mut DMatrix<f64>) {
        g.fill(0.0);
        h.fill(0.0);
        for &(i, j, a, b) in &self.terms {
            let p = sigmoid(th[i] - th[j]);
            let m = a + b;
            let r = m * p - a;
            g[i] += r;
            g[j] -= r;
            let w = m * p * (1.0 - p);
            h[(i, i)] += w;
            h[(j, j)] += w;
            h[(i, j)] -= w;
            h[(j, i)] -= w;
        }
    }
}

/// Fits the interval `span` of `series` from a zero start.
pub fn fit_interval(series: &ObservationSeries, span: Span, config: &SolverConfig) -> Result<FitResult> {
    let counts = WinCounts::from_series(series, span)?;
    fit_counts(series.graph(), &counts, config, None)
}

/// Fits win counts directly, optionally warm-started from `warm`.
pub fn fit_counts(
    graph: &ComparisonGraph,
    counts: &WinCounts,
    config: &SolverConfig,
    warm: Option<&[f64]>,
) -> Result<FitResult> {
    config.validate()?;
    if counts.wins.len() != graph.edge_count() {
        return Err(Error::invalid("win counts do not match the comparison graph"));
    }
    if counts.total() == 0 {
        return Err(Error::invalid("cannot fit an interval with no comparisons"));
    }
    let problem = Problem::new(graph, counts);
    let n = graph.n();
    let b = config.bound_b;
    let start = match warm {
        Some(w) if w.len() == n => w.to_vec(),
        Some(w) => {
            return Err(Error::invalid(format!("warm start has {} scores, expected {n}", w.len())))
        }
        None => vec![0.0; n],
    };

    let (raw, converged, iterations) = match config.mode {
        FitMode::Ridge => {
            let mut th = start;
            center(&mut th);
            ridge_newton(&problem, th, config)
        }
        FitMode::Constrained => {
            let th = project_with_shift(&start, b).0;
            projected_newton(&problem, th, config)
        }
    };

    let scores = project_with_shift(&raw, b).0;
    let objective = problem.nll(&scores);
    if !objective.is_finite() || scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("interval fit diverged".into()));
    }
    if !converged && config.require_convergence {
        let residual = projected_residual(&problem, &scores, config);
        return Err(Error::NonConvergence {
            iterations,
            residual,
        });
    }
    Ok(FitResult {
        theta_hat: Theta::new(scores, b)?,
        objective,
        converged,
        iterations,
    })
}

/// Norm of the stationarity residual that the chosen mode drives to zero.
fn projected_residual(p: &Problem, th: &[f64], config: &SolverConfig) -> f64 {
    let mut g = DVector::zeros(p.n);
    let mut h = DMatrix::zeros(p.n, p.n);
    p.grad_hess(th, &mut g, &mut h);
    match config.mode {
        FitMode::Ridge => (0..p.n)
            .map(|i| (g[i] + config.ridge_lambda * th[i]).powi(2))
            .sum::<f64>()
            .sqrt(),
        FitMode::Constrained => {
            let step: Vec<f64> = (0..p.n).map(|i| th[i] - g[i]).collect();
            let (proj, _) = project_with_shift(&step, config.bound_b);
            th.iter().zip(&proj).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        }
    }
}

/// Predicted decrease below which the objective cannot resolve a step.
fn resolvable(f: f64) -> f64 {
    1e-12 * (1.0 + f.abs())
}

/// Gradient norm at which a failed line search is treated as round-off.
fn stagnation_tol(p: &Problem) -> f64 {
    1e-7 * p.total.max(1.0)
}

/// Newton direction restricted to `free`, with the step summing to zero:
/// `d = y₁ - (1ᵀy₁ / 1ᵀy₂) y₂` where `M y₁ = -g_F`, `M y₂ = 1`.
fn free_newton_step(h: &DMatrix<f64>, g: &DVector<f64>, free: &[usize], extra_diag: f64) -> Option<Vec<f64>> {
    let k = free.len();
    if k < 2 {
        return None;
    }
    let scale = free.iter().map(|&i| h[(i, i)]).fold(0.0_f64, f64::max).max(1.0);
    // ρ11ᵀ removes the constant null direction without changing the
    // solution on the zero-sum subspace.
    let rho = scale / k as f64;
    let mut shift = 0.0;
    for _ in 0..8 {
        let m = DMatrix::from_fn(k, k, |a, b| {
            let mut v = h[(free[a], free[b])] + rho;
            if a == b {
                v += extra_diag + shift;
            }
            v
        });
        if let Some(chol) = m.cholesky() {
            let rhs = DVector::from_fn(k, |a, _| -g[free[a]]);
            let y1 = chol.solve(&rhs);
            let y2 = chol.solve(&DVector::from_element(k, 1.0));
            let c = y1.sum() / y2.sum();
            let d: Vec<f64> = (0..k).map(|a| y1[a] - c * y2[a]).collect();
            if d.iter().all(|x| x.is_finite()) {
                return Some(d);
            }
        }
        shift = if shift == 0.0 { 1e-10 * scale } else { shift * 100.0 };
    }
    None
}

fn ridge_newton(p: &Problem, mut th: Vec<f64>, config: &SolverConfig) -> (Vec<f64>, bool, usize) {
    let n = p.n;
    let lam = config.ridge_lambda;
    let all: Vec<usize> = (0..n).collect();
    let mut g = DVector::zeros(n);
    let mut h = DMatrix::zeros(n, n);
    let obj = |t: &[f64]| p.nll(t) + 0.5 * lam * t.iter().map(|x| x * x).sum::<f64>();
    let mut f = obj(&th);
    for it in 0..config.max_iter {
        p.grad_hess(&th, &mut g, &mut h);
        for i in 0..n {
            g[i] += lam * th[i];
        }
        let gnorm = g.norm();
        if gnorm <= config.grad_tol {
            return (th, true, it);
        }
        let Some(d) = free_newton_step(&h, &g, &all, lam) else {
            return (th, gnorm <= stagnation_tol(p), it);
        };
        let slope: f64 = (0..n).map(|i| g[i] * d[i]).sum();
        let mut alpha = 1.0;
        let mut accepted = None;
        if slope < 0.0 && -slope <= resolvable(f) {
            // Objective differences are below round-off; trust the full step.
            let trial: Vec<f64> = (0..n).map(|i| th[i] + d[i]).collect();
            let ft = obj(&trial);
            accepted = Some((trial, ft));
        } else if slope < 0.0 {
            for _ in 0..MAX_BACKTRACK {
                let trial: Vec<f64> = (0..n).map(|i| th[i] + alpha * d[i]).collect();
                let ft = obj(&trial);
                if ft <= f + ARMIJO_C * alpha * slope {
                    accepted = Some((trial, ft));
                    break;
                }
                alpha *= 0.5;
            }
        }
        match accepted {
            Some((t, ft)) => {
                th = t;
                f = ft;
            }
            None => return (th, gnorm <= stagnation_tol(p), it + 1),
        }
    }
    p.grad_hess(&th, &mut g, &mut h);
    let gnorm = (0..n).map(|i| (g[i] + lam * th[i]).powi(2)).sum::<f64>().sqrt();
    (th, gnorm <= config.grad_tol, config.max_iter)
}

fn projected_newton(p: &Problem, mut th: Vec<f64>, config: &SolverConfig) -> (Vec<f64>, bool, usize) {
    let n = p.n;
    let b = config.bound_b;
    if b == 0.0 {
        return (vec![0.0; n], true, 0);
    }
    let eps_bound = 1e-10 * b.max(1.0);
    let mut g = DVector::zeros(n);
    let mut h = DMatrix::zeros(n, n);
    let mut f = p.nll(&th);
    for it in 0..config.max_iter {
        p.grad_hess(&th, &mut g, &mut h);
        let step: Vec<f64> = (0..n).map(|i| th[i] - g[i]).collect();
        let (proj, tau) = project_with_shift(&step, b);
        let resid = th.iter().zip(&proj).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
        if resid <= config.grad_tol {
            return (th, true, it);
        }

        // Coordinates pinned at a bound whose descent direction points outward.
        let free: Vec<usize> = (0..n)
            .filter(|&i| {
                let outward = -(g[i] + tau);
                !((th[i] >= b - eps_bound && outward > 0.0) || (th[i] <= -b + eps_bound && outward < 0.0))
            })
            .collect();

        let mut accepted = None;
        if let Some(dfree) = free_newton_step(&h, &g, &free, 0.0) {
            let mut d = vec![0.0; n];
            for (a, &i) in free.iter().enumerate() {
                d[i] = dfree[a];
            }
            let slope: f64 = (0..n).map(|i| g[i] * d[i]).sum();
            if slope < 0.0 && -slope <= resolvable(f) {
                let (trial, _) = project_with_shift(&(0..n).map(|i| th[i] + d[i]).collect::<Vec<_>>(), b);
                let ft = p.nll(&trial);
                accepted = Some((trial, ft));
            } else {
                accepted = arc_search(p, &th, f, &g, b, |alpha| {
                    (0..n).map(|i| th[i] + alpha * d[i]).collect()
                });
            }
        }
        if accepted.is_none() {
            accepted = arc_search(p, &th, f, &g, b, |alpha| {
                (0..n).map(|i| th[i] - alpha * g[i]).collect()
            });
        }
        match accepted {
            Some((t, ft)) => {
                th = t;
                f = ft;
            }
            None => return (th, resid <= stagnation_tol(p), it + 1),
        }
    }
    p.grad_hess(&th, &mut g, &mut h);
    let step: Vec<f64> = (0..n).map(|i| th[i] - g[i]).collect();
    let (proj, _) = project_with_shift(&step, b);
    let resid = th.iter().zip(&proj).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
    (th, resid <= config.grad_tol, config.max_iter)
}

/// Armijo backtracking along `α ↦ Π(point(α))`.
fn arc_search(
    p: &Problem,
    th: &[f64],
    f: f64,
    g: &DVector<f64>,
    b: f64,
    point: impl Fn(f64) -> Vec<f64>,
) -> Option<(Vec<f64>, f64)> {
    let mut alpha = 1.0;
    for _ in 0..MAX_BACKTRACK {
        let (trial, _) = project_with_shift(&point(alpha), b);
        let decrease: f64 = (0..th.len()).map(|i| g[i] * (trial[i] - th[i])).sum();
        if decrease < 0.0 {
            let ft = p.nll(&trial);
            if ft <= f + ARMIJO_C * decrease {
                return Some((trial, ft));
            }
        }
        alpha *= 0.5;
    }
    None
}

/// Concurrent memo of cold-start interval fits keyed by span.
///
/// Every entry is computed from a zero start, so a value never depends on
/// which thread inserted it.
#[derive(Debug, Default)]
pub struct IntervalCache {
    map: DashMap<Span, Arc<FitResult>>,
}

impl IntervalCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get_or_fit(
        &self,
        series: &ObservationSeries,
        span: Span,
        config: &SolverConfig,
    ) -> Result<Arc<FitResult>> {
        if let Some(hit) = self.map.get(&span) {
            return Ok(Arc::clone(hit.value()));
        }
        let fit = Arc::new(fit_interval(series, span, config)?);
        self.map.insert(span, Arc::clone(&fit));
        Ok(fit)
    }
}

/// `L(θ̂(I), I)` for `I = span`, memoised in `cache` when given.
pub fn interval_objective(
    series: &ObservationSeries,
    span: Span,
    config: &SolverConfig,
    cache: Option<&IntervalCache>,
) -> Result<f64> {
    match cache {
        Some(c) => Ok(c.get_or_fit(series, span, config)?.objective),
        None => Ok(fit_interval(series, span, config)?.objective),
    }
}
