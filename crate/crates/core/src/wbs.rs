//! Wild binary segmentation with pluggable split statistics.
//!
//! A split at `t` of the closed interval `[s, e]` compares `[s, t-1]`
//! against `[t, e]`, so an accepted split is directly a change point.

use std::str::FromStr;

use dashmap::DashMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dp::Segmentation;
use crate::error::{Error, Result};
use crate::model::{ObservationSeries, Span};
use crate::solver::{fit_counts, CountIndex, SolverConfig, WinCounts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statistic {
    /// Generalized likelihood ratio of the BTL fits.
    Glr,
    /// Two-sample test for stochastically transitive models.
    Sst,
    /// CUSUM of normalized Borda counts.
    Borda,
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "glr" => Ok(Self::Glr),
            "sst" => Ok(Self::Sst),
            "borda" | "mean" => Ok(Self::Borda),
            other => Err(Error::invalid(format!("unknown statistic '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WbsConfig {
    pub intervals_m: usize,
    pub threshold_gamma: f64,
    pub statistic: Statistic,
    pub rng_seed: u64,
    /// Minimum length of each side of a split.
    pub min_gap: usize,
}

impl WbsConfig {
    /// `M = 50` intervals and `min_gap = max(2, n / 4)`.
    pub fn new(n: usize, statistic: Statistic, threshold_gamma: f64, rng_seed: u64) -> Self {
        Self {
            intervals_m: 50,
            threshold_gamma,
            statistic,
            rng_seed,
            min_gap: default_min_gap(n),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.intervals_m == 0 {
            return Err(Error::invalid("WBS needs at least one interval"));
        }
        if !(self.threshold_gamma >= 0.0) {
            return Err(Error::invalid(format!(
                "threshold must be >= 0; got {}",
                self.threshold_gamma
            )));
        }
        Ok(())
    }
}

pub fn default_min_gap(n: usize) -> usize {
    (n / 4).max(2)
}

/// Best split of one interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalStat {
    pub value: f64,
    /// First index of the right-hand side.
    pub split: usize,
}

/// Draws `m` intervals with endpoints uniform on `[1, T]` and
/// `β - α ≥ 2·min_gap`. Returns nothing when no such interval exists.
pub fn sample_intervals(t_max: usize, m: usize, min_gap: usize, seed: u64) -> Vec<Span> {
    let need = 2 * min_gap.max(1);
    if t_max < 2 || t_max - 1 < need {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(m);
    while out.len() < m {
        let a = rng.gen_range(1..=t_max);
        let b = rng.gen_range(1..=t_max);
        let (lo, hi) = (a.min(b), a.max(b));
        if hi - lo >= need {
            out.push(Span::new(lo, hi));
        }
    }
    out
}

/// One ordered-pair term of the SST two-sample statistic. `x` and `y` are
/// the wins of `i` over `j` among `kp` and `kq` comparisons of the pair.
pub fn sst_term(kp: u32, x: u32, kq: u32, y: u32) -> f64 {
    if kp <= 1 || kq <= 1 {
        return 0.0;
    }
    let (kp, kq, x, y) = (f64::from(kp), f64::from(kq), f64::from(x), f64::from(y));
    let num = kq * (kq - 1.0) * (x * x - x) + kp * (kp - 1.0) * (y * y - y)
        - 2.0 * (kp - 1.0) * (kq - 1.0) * x * y;
    num / ((kp - 1.0) * (kq - 1.0) * (kp + kq))
}

fn sst_from_counts(left: &WinCounts, right: &WinCounts, edge_count: usize) -> f64 {
    (0..edge_count)
        .map(|e| {
            let (xa, xb) = left.get(e);
            let (ya, yb) = right.get(e);
            let (kp, kq) = (xa + xb, ya + yb);
            sst_term(kp, xa, kq, ya) + sst_term(kp, xb, kq, yb)
        })
        .sum()
}

/// SST statistic between two disjoint intervals, summed over ordered pairs.
pub fn sst_stat(series: &ObservationSeries, left: Span, right: Span) -> Result<f64> {
    if left.first <= right.last && right.first <= left.last {
        return Err(Error::invalid("SST intervals must be disjoint"));
    }
    let x = WinCounts::from_series(series, left)?;
    let y = WinCounts::from_series(series, right)?;
    Ok(sst_from_counts(&x, &y, series.graph().edge_count()))
}

fn borda_from_counts(series: &ObservationSeries, counts: &WinCounts, len: usize) -> Vec<f64> {
    let mut beta = vec![0.0; series.n()];
    for (e, &(i, j)) in series.graph().edges().iter().enumerate() {
        let (a, b) = counts.get(e);
        let d = f64::from(a) - f64::from(b);
        beta[i] += d;
        beta[j] -= d;
    }
    beta.iter_mut().for_each(|v| *v /= len as f64);
    beta
}

/// `β_i = (wins_i - losses_i) / |I|`.
pub fn borda_vector(series: &ObservationSeries, span: Span) -> Result<Vec<f64>> {
    let c = WinCounts::from_series(series, span)?;
    Ok(borda_from_counts(series, &c, span.len()))
}

fn check_split(series: &ObservationSeries, s: usize, e: usize, t: usize) -> Result<()> {
    series.check_span(Span::new(s, e))?;
    if !(s < t && t <= e) {
        return Err(Error::invalid(format!(
            "split {t} leaves an empty side of [{s}, {e}]"
        )));
    }
    Ok(())
}

/// `|L|·|R| / |I| · ‖β(L) - β(R)‖²` with `L = [s, t-1]`, `R = [t, e]`.
pub fn borda_cusum(series: &ObservationSeries, s: usize, e: usize, t: usize) -> Result<f64> {
    check_split(series, s, e, t)?;
    let l = borda_vector(series, Span::new(s, t - 1))?;
    let r = borda_vector(series, Span::new(t, e))?;
    let weight = ((t - s) * (e - t + 1)) as f64 / (e - s + 1) as f64;
    Ok(weight * l.iter().zip(&r).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
}

/// Likelihood gain from fitting `[s, t-1]` and `[t, e]` separately, floored at 0.
pub fn glr_stat(series: &ObservationSeries, s: usize, e: usize, t: usize, solver: &SolverConfig) -> Result<f64> {
    check_split(series, s, e, t)?;
    let g = series.graph();
    let fit = |span: Span| -> Result<f64> {
        Ok(fit_counts(g, &WinCounts::from_series(series, span)?, solver, None)?.objective)
    };
    let joint = fit(Span::new(s, e))?;
    let split = fit(Span::new(s, t - 1))? + fit(Span::new(t, e))?;
    Ok((joint - split).max(0.0))
}

/// Statistic path over the splits of `span` leaving at least `min_side`
/// points on each side, as `(t, value)` pairs in increasing `t`.
pub fn scan_statistic(
    series: &ObservationSeries,
    span: Span,
    statistic: Statistic,
    solver: &SolverConfig,
    min_side: usize,
) -> Result<Vec<(usize, f64)>> {
    series.check_span(span)?;
    let index = CountIndex::new(series);
    scan_with_index(series, &index, span, statistic, solver, min_side.max(1))
}

fn scan_with_index(
    series: &ObservationSeries,
    index: &CountIndex,
    span: Span,
    statistic: Statistic,
    solver: &SolverConfig,
    side: usize,
) -> Result<Vec<(usize, f64)>> {
    let (s, e) = (span.first, span.last);
    if span.len() < 2 * side {
        return Ok(Vec::new());
    }
    let cands: Vec<usize> = (s + side..=e + 1 - side).collect();
    let g = series.graph();
    let ec = g.edge_count();
    let mut left = WinCounts::zeros(ec);
    let mut right = WinCounts::zeros(ec);
    match statistic {
        Statistic::Sst => Ok(cands
            .iter()
            .map(|&t| {
                index.fill(Span::new(s, t - 1), &mut left);
                index.fill(Span::new(t, e), &mut right);
                (t, sst_from_counts(&left, &right, ec))
            })
            .collect()),
        Statistic::Borda => Ok(cands
            .iter()
            .map(|&t| {
                index.fill(Span::new(s, t - 1), &mut left);
                index.fill(Span::new(t, e), &mut right);
                let bl = borda_from_counts(series, &left, t - s);
                let br = borda_from_counts(series, &right, e - t + 1);
                let w = ((t - s) * (e - t + 1)) as f64 / span.len() as f64;
                (t, w * bl.iter().zip(&br).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            })
            .collect()),
        Statistic::Glr => {
            index.fill(span, &mut left);
            let joint = fit_counts(g, &left, solver, None)?.objective;
            let mut lv = Vec::with_capacity(cands.len());
            let mut warm: Option<Vec<f64>> = None;
            for &t in &cands {
                index.fill(Span::new(s, t - 1), &mut left);
                let f = fit_counts(g, &left, solver, warm.as_deref())?;
                lv.push(f.objective);
                warm = Some(f.theta_hat.into_scores());
            }
            let mut rv = vec![0.0; cands.len()];
            warm = None;
            for (k, &t) in cands.iter().enumerate().rev() {
                index.fill(Span::new(t, e), &mut right);
                let f = fit_counts(g, &right, solver, warm.as_deref())?;
                rv[k] = f.objective;
                warm = Some(f.theta_hat.into_scores());
            }
            Ok(cands
                .iter()
                .enumerate()
                .map(|(k, &t)| (t, (joint - lv[k] - rv[k]).max(0.0)))
                .collect())
        }
    }
}

/// First maximiser of a scan path.
fn argmax(path: &[(usize, f64)]) -> Option<IntervalStat> {
    let mut best: Option<IntervalStat> = None;
    for &(t, v) in path {
        if best.map_or(true, |b| v > b.value) {
            best = Some(IntervalStat { value: v, split: t });
        }
    }
    best
}

/// Sampled intervals plus a memo of per-interval best splits.
///
/// The best split of an interval does not depend on the threshold, so one
/// engine can serve a whole grid of thresholds.
pub struct WbsEngine<'a> {
    series: &'a ObservationSeries,
    statistic: Statistic,
    solver: SolverConfig,
    min_gap: usize,
    intervals: Vec<Span>,
    index: CountIndex,
    cache: DashMap<Span, Option<IntervalStat>>,
}

impl<'a> WbsEngine<'a> {
    /// Uses every field of `config` except the threshold.
    pub fn new(series: &'a ObservationSeries, config: &WbsConfig, solver: &SolverConfig) -> Result<Self> {
        config.validate()?;
        solver.validate()?;
        let intervals = sample_intervals(series.len(), config.intervals_m, config.min_gap, config.rng_seed);
        Ok(Self {
            series,
            statistic: config.statistic,
            solver: solver.clone(),
            min_gap: config.min_gap.max(1),
            intervals,
            index: CountIndex::new(series),
            cache: DashMap::new(),
        })
    }

    pub fn intervals(&self) -> &[Span] {
        &self.intervals
    }

    fn best_split(&self, span: Span) -> Result<Option<IntervalStat>> {
        if let Some(hit) = self.cache.get(&span) {
            return Ok(*hit);
        }
        let path = scan_with_index(self.series, &self.index, span, self.statistic, &self.solver, self.min_gap)?;
        let best = argmax(&path);
        self.cache.insert(span, best);
        Ok(best)
    }

    pub fn detect(&self, gamma: f64) -> Result<Segmentation> {
        if !(gamma >= 0.0) {
            return Err(Error::invalid(format!("threshold must be >= 0; got {gamma}")));
        }
        let mut found = Vec::new();
        let mut stack = vec![self.series.full_span()];
        while let Some(seg) = stack.pop() {
            if seg.len() < 2 * self.min_gap {
                continue;
            }
            let restricted: Vec<Span> = self
                .intervals
                .iter()
                .map(|iv| Span::new(seg.first.max(iv.first), seg.last.min(iv.last)))
                .collect();
            let stats: Vec<Option<IntervalStat>> = restricted
                .par_iter()
                .map(|&sp| {
                    if sp.first > sp.last || sp.len() < 2 * self.min_gap {
                        Ok(None)
                    } else {
                        self.best_split(sp)
                    }
                })
                .collect::<Result<_>>()?;
            let mut best: Option<IntervalStat> = None;
            for st in stats.into_iter().flatten() {
                if best.map_or(true, |b| st.value > b.value) {
                    best = Some(st);
                }
            }
            if let Some(b) = best.filter(|b| b.value > gamma) {
                found.push(b.split);
                // right pushed first so the left child is processed first
                stack.push(Span::new(b.split, seg.last));
                stack.push(Span::new(seg.first, b.split - 1));
            }
        }
        found.sort_unstable();
        Segmentation::new(self.series.len(), found)
    }
}

pub fn wbs_detect(series: &ObservationSeries, config: &WbsConfig, solver: &SolverConfig) -> Result<Segmentation> {
    WbsEngine::new(series, config, solver)?.detect(config.threshold_gamma)
}
