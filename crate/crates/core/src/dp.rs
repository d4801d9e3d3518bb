//! Penalized dynamic-programming segmentation.
//!
//! Minimises `Σ_I L(θ̂(I), I) + γ·|𝒫|` over partitions `𝒫` of `[1, T]`.
//! The Bellman vector is indexed by prefix length: `b[0] = 0` is the empty
//! prefix and `b[r]` is the best penalized cost of `[1, r]`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ObservationSeries, Span};
use crate::solver::{fit_counts, interval_objective, CountIndex, IntervalCache, SolverConfig, WinCounts};

/// Estimated change points; each is the first time index of a new regime.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Segmentation {
    t_max: usize,
    change_points: Vec<usize>,
}

impl Segmentation {
    pub fn new(t_max: usize, change_points: Vec<usize>) -> Result<Self> {
        if t_max == 0 {
            return Err(Error::invalid("segmentation needs t_max >= 1"));
        }
        for w in change_points.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::invalid(format!(
                    "change points must be strictly increasing; got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(&bad) = change_points.iter().find(|&&c| c <= 1 || c > t_max) {
            return Err(Error::invalid(format!(
                "change point {bad} outside (1, {t_max}]"
            )));
        }
        Ok(Self {
            t_max,
            change_points,
        })
    }

    pub fn empty(t_max: usize) -> Self {
        Self {
            t_max,
            change_points: Vec::new(),
        }
    }

    pub fn t_max(&self) -> usize {
        self.t_max
    }

    pub fn change_points(&self) -> &[usize] {
        &self.change_points
    }

    /// Number of change points `K`.
    pub fn len(&self) -> usize {
        self.change_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.change_points.is_empty()
    }

    /// The `K + 1` intervals induced on `[1, T]`.
    pub fn spans(&self) -> Vec<Span> {
        let mut out = Vec::with_capacity(self.len() + 1);
        let mut first = 1;
        for &c in &self.change_points {
            out.push(Span::new(first, c - 1));
            first = c;
        }
        out.push(Span::new(first, self.t_max));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpTrace {
    /// `bellman[r]`: optimal penalized cost of `[1, r]`, for `r = 0..=T`.
    pub bellman: Vec<f64>,
    /// `backpointers[r]`: length of the prefix preceding the last segment
    /// of the optimum for `[1, r]`; `usize::MAX` where unreachable.
    pub backpointers: Vec<usize>,
}

/// Interval costs `L(θ̂((l, r]), (l, r])` for every admissible `(l, r)`.
///
/// Built once and reused across penalties. Within a column `r` the fits for
/// different `l` are independent and run in parallel; each is warm-started
/// from the fit of `(l, r-1]`, so results do not depend on scheduling.
#[derive(Debug, Clone)]
pub struct IntervalCostTable {
    t_max: usize,
    min_seg: usize,
    max_lookback: Option<usize>,
    /// `offsets[r]` indexes the first cost of column `r`.
    offsets: Vec<usize>,
    costs: Vec<f64>,
}

impl IntervalCostTable {
    pub fn build(
        series: &ObservationSeries,
        solver: &SolverConfig,
        min_seg: usize,
        max_lookback: Option<usize>,
    ) -> Result<Self> {
        solver.validate()?;
        let t = series.len();
        if t < 2 {
            return Err(Error::invalid(format!("series too short for segmentation: T = {t}")));
        }
        if min_seg == 0 {
            return Err(Error::invalid("min_seg must be >= 1"));
        }
        let min_seg = min_seg.min(t);
        if let Some(lb) = max_lookback {
            if lb < min_seg {
                return Err(Error::invalid(format!(
                    "max_lookback {lb} is shorter than min_seg {min_seg}"
                )));
            }
        }
        let graph = series.graph();
        let index = CountIndex::new(series);

        let mut offsets = vec![0usize; t + 2];
        let mut costs = Vec::new();
        let mut prev: Vec<Option<Vec<f64>>> = vec![None; t + 1];
        for r in 1..=t {
            offsets[r] = costs.len();
            let range = Self::l_range(r, min_seg, max_lookback);
            let column: Vec<(f64, Vec<f64>)> = range
                .clone()
                .into_par_iter()
                .map_init(
                    || WinCounts::zeros(graph.edge_count()),
                    |counts, l| {
                        index.fill(Span::new(l + 1, r), counts);
                        let warm = prev[l].as_deref();
                        let fit = fit_counts(graph, counts, solver, warm)?;
                        Ok((fit.objective, fit.theta_hat.into_scores()))
                    },
                )
                .collect::<Result<_>>()?;
            for (l, (obj, theta)) in range.zip(column) {
                if !obj.is_finite() {
                    return Err(Error::NonFinite(format!("cost of ({l}, {r}]")));
                }
                costs.push(obj);
                prev[l] = Some(theta);
            }
        }
        offsets[t + 1] = costs.len();
        Ok(Self {
            t_max: t,
            min_seg,
            max_lookback,
            offsets,
            costs,
        })
    }

    fn l_range(r: usize, min_seg: usize, max_lookback: Option<usize>) -> std::ops::Range<usize> {
        if r < min_seg {
            return 0..0;
        }
        let lo = max_lookback.map_or(0, |lb| r.saturating_sub(lb));
        lo..r - min_seg + 1
    }

    pub fn t_max(&self) -> usize {
        self.t_max
    }

    pub fn min_seg(&self) -> usize {
        self.min_seg
    }

    /// Cost of `(l, r]`, or `None` when that interval is not admissible.
    pub fn cost(&self, l: usize, r: usize) -> Option<f64> {
        if r == 0 || r > self.t_max {
            return None;
        }
        let range = Self::l_range(r, self.min_seg, self.max_lookback);
        range
            .contains(&l)
            .then(|| self.costs[self.offsets[r] + (l - range.start)])
    }

    /// Runs the Bellman recursion for one penalty value.
    pub fn solve(&self, gamma: f64) -> Result<(Segmentation, DpTrace)> {
        if !(gamma >= 0.0) || gamma.is_nan() {
            return Err(Error::invalid(format!("gamma must be >= 0; got {gamma}")));
        }
        let t = self.t_max;
        let mut bellman = vec![f64::INFINITY; t + 1];
        let mut backpointers = vec![usize::MAX; t + 1];
        bellman[0] = 0.0;
        for r in 1..=t {
            let range = Self::l_range(r, self.min_seg, self.max_lookback);
            let (start, base) = (range.start, self.offsets[r]);
            let (mut best, mut arg) = (f64::INFINITY, usize::MAX);
            for l in range {
                let prior = bellman[l];
                if !prior.is_finite() {
                    continue;
                }
                let cand = prior + gamma + self.costs[base + (l - start)];
                // strict: the earliest l wins ties
                if cand < best {
                    best = cand;
                    arg = l;
                }
            }
            bellman[r] = best;
            backpointers[r] = arg;
        }
        if !bellman[t].is_finite() {
            return Err(Error::invalid(
                "no admissible partition under the given min_seg and max_lookback",
            ));
        }
        let mut change_points = Vec::new();
        let mut k = t;
        while k > 0 {
            let l = backpointers[k];
            if l > 0 {
                change_points.push(l + 1);
            }
            k = l;
        }
        change_points.reverse();
        let seg = Segmentation::new(t, change_points)?;
        Ok((
            seg,
            DpTrace {
                bellman,
                backpointers,
            },
        ))
    }
}

/// Default minimum segment length for `n` items: `max(2, n / 4)`.
pub fn default_min_seg(n: usize) -> usize {
    (n / 4).max(2)
}

pub fn dp_detect(
    series: &ObservationSeries,
    gamma: f64,
    solver: &SolverConfig,
    min_seg: usize,
) -> Result<(Segmentation, DpTrace)> {
    IntervalCostTable::build(series, solver, min_seg, None)?.solve(gamma)
}

pub fn dp_detect_with_table(table: &IntervalCostTable, gamma: f64) -> Result<(Segmentation, DpTrace)> {
    table.solve(gamma)
}

/// Penalized objective `Σ L(θ̂(I), I) + γ (K + 1)` of any segmentation.
pub fn dp_objective(
    series: &ObservationSeries,
    segmentation: &Segmentation,
    gamma: f64,
    solver: &SolverConfig,
    cache: Option<&IntervalCache>,
) -> Result<f64> {
    if segmentation.t_max() != series.len() {
        return Err(Error::invalid(format!(
            "segmentation covers T = {} but the series has T = {}",
            segmentation.t_max(),
            series.len()
        )));
    }
    let mut total = gamma * (segmentation.len() + 1) as f64;
    for span in segmentation.spans() {
        total += interval_objective(series, span, solver, cache)?;
    }
    Ok(total)
}
