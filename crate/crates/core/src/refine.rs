//! Local refinement of preliminary change points.
//!
//! Each preliminary point is rescanned inside a window reaching two thirds of
//! the way towards its neighbours, choosing the split that minimises the sum
//! of the two side fits.

use rayon::prelude::*;

use crate::dp::Segmentation;
use crate::error::{Error, Result};
use crate::model::{ObservationSeries, Span};
use crate::solver::{fit_counts, CountIndex, SolverConfig, WinCounts};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefineOptions {
    /// Scan every `stride`-th candidate; 1 scans all of them.
    pub stride: usize,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self { stride: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineReport {
    pub segmentation: Segmentation,
    /// Scan window `(s, e)` per preliminary point; the candidates are the
    /// first indices `s + 2 ..= e` of the right-hand side.
    pub windows: Vec<(usize, usize)>,
    /// Refined points that landed on an already chosen point.
    pub collapsed: usize,
}

/// Window `(s, e)` around `mid` given its neighbours `prev` and `next`:
/// `s = ⌊(2·prev + mid)/3⌋`, `e = ⌈(mid + 2·next)/3⌉`.
pub fn refine_window(prev: usize, mid: usize, next: usize) -> (usize, usize) {
    let s = (2 * prev + mid) / 3;
    let e = (mid + 2 * next).div_ceil(3);
    (s, e)
}

pub fn refine(series: &ObservationSeries, prelim: &Segmentation, solver: &SolverConfig) -> Result<Segmentation> {
    Ok(refine_with(series, prelim, solver, RefineOptions::default())?.segmentation)
}

pub fn refine_with(
    series: &ObservationSeries,
    prelim: &Segmentation,
    solver: &SolverConfig,
    options: RefineOptions,
) -> Result<RefineReport> {
    solver.validate()?;
    let t = series.len();
    if prelim.t_max() != t {
        return Err(Error::invalid(format!(
            "preliminary segmentation covers T = {} but the series has T = {t}",
            prelim.t_max()
        )));
    }
    if options.stride == 0 {
        return Err(Error::invalid("stride must be >= 1"));
    }
    let cps = prelim.change_points();
    if cps.is_empty() {
        return Ok(RefineReport {
            segmentation: prelim.clone(),
            windows: Vec::new(),
            collapsed: 0,
        });
    }

    let mut anchors = Vec::with_capacity(cps.len() + 2);
    anchors.push(1);
    anchors.extend_from_slice(cps);
    anchors.push(t);
    let windows: Vec<(usize, usize)> = anchors
        .windows(3)
        .map(|w| {
            let (s, e) = refine_window(w[0], w[1], w[2]);
            (s.clamp(1, t), e.clamp(1, t))
        })
        .collect();
    if let Some(&(s, e)) = windows.iter().find(|&&(s, e)| e < s + 3) {
        return Err(Error::invalid(format!(
            "refinement window ({s}, {e}] is too short to scan"
        )));
    }

    let index = CountIndex::new(series);
    let refined: Vec<usize> = windows
        .par_iter()
        .map(|&(s, e)| scan_window(series, &index, s, e, solver, options.stride).map(|(c, _)| c))
        .collect::<Result<_>>()?;

    let mut sorted = refined;
    sorted.sort_unstable();
    let before = sorted.len();
    sorted.dedup();
    let collapsed = before - sorted.len();
    if collapsed > 0 {
        log::warn!("local refinement merged {collapsed} coinciding change point(s)");
    }
    Ok(RefineReport {
        segmentation: Segmentation::new(t, sorted)?,
        windows,
        collapsed,
    })
}

/// Two-sample cost of splitting `(s, e]` so that `c` starts the right side.
pub fn split_cost(
    series: &ObservationSeries,
    s: usize,
    e: usize,
    c: usize,
    solver: &SolverConfig,
) -> Result<f64> {
    if !(s + 2 <= c && c <= e) {
        return Err(Error::invalid(format!("split {c} not inside window ({s}, {e}]")));
    }
    let left = WinCounts::from_series(series, Span::new(s + 1, c - 1))?;
    let right = WinCounts::from_series(series, Span::new(c, e))?;
    let g = series.graph();
    Ok(fit_counts(g, &left, solver, None)?.objective + fit_counts(g, &right, solver, None)?.objective)
}

/// Best split of `(s, e]`, ties to the smallest candidate.
///
/// Left fits are chained in increasing `c` and right fits in decreasing `c`,
/// each warm-started from its neighbour.
pub(crate) fn scan_window(
    series: &ObservationSeries,
    index: &CountIndex,
    s: usize,
    e: usize,
    solver: &SolverConfig,
    stride: usize,
) -> Result<(usize, f64)> {
    let g = series.graph();
    let cands: Vec<usize> = (s + 2..=e).step_by(stride).collect();
    let mut counts = WinCounts::zeros(g.edge_count());

    let mut left = Vec::with_capacity(cands.len());
    let mut warm: Option<Vec<f64>> = None;
    for &c in &cands {
        index.fill(Span::new(s + 1, c - 1), &mut counts);
        let fit = fit_counts(g, &counts, solver, warm.as_deref())?;
        left.push(fit.objective);
        warm = Some(fit.theta_hat.into_scores());
    }
    let mut right = vec![0.0; cands.len()];
    warm = None;
    for (k, &c) in cands.iter().enumerate().rev() {
        index.fill(Span::new(c, e), &mut counts);
        let fit = fit_counts(g, &counts, solver, warm.as_deref())?;
        right[k] = fit.objective;
        warm = Some(fit.theta_hat.into_scores());
    }

    let (mut best, mut arg) = (f64::INFINITY, cands[0]);
    for (k, &c) in cands.iter().enumerate() {
        let v = left[k] + right[k];
        if v < best {
            best = v;
            arg = c;
        }
    }
    Ok((arg, best))
}
