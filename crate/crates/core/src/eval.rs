//! Localization error metrics and cross-validated penalty selection.

use rayon::prelude::*;

use crate::detect::{DetectOptions, Detector, Method};
use crate::dp::Segmentation;
use crate::error::{Error, Result};
use crate::model::{laplacian_spectrum, neg_log_lik, p_lb, ComparisonGraph, ObservationSeries, Span};
use crate::solver::{fit_interval, SolverConfig};

/// Hausdorff distance between two change point sets.
///
/// Both empty gives 0; exactly one empty gives `f64::INFINITY`.
pub fn hausdorff(est: &Segmentation, truth: &Segmentation) -> f64 {
    hausdorff_points(est.change_points(), truth.change_points())
}

pub fn hausdorff_points(a: &[usize], b: &[usize]) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return f64::INFINITY,
        _ => {}
    }
    let directed = |x: &[usize], y: &[usize]| -> usize {
        x.iter()
            .map(|&p| y.iter().map(|&q| p.abs_diff(q)).min().unwrap())
            .max()
            .unwrap()
    };
    directed(a, b).max(directed(b, a)) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KCategory {
    Under,
    Exact,
    Over,
}

pub fn count_k(est: &Segmentation, truth: &Segmentation) -> KCategory {
    match est.len().cmp(&truth.len()) {
        std::cmp::Ordering::Less => KCategory::Under,
        std::cmp::Ordering::Equal => KCategory::Exact,
        std::cmp::Ordering::Greater => KCategory::Over,
    }
}

/// Odd times become the training series and even times the test series,
/// both re-indexed from 1.
#[derive(Debug, Clone)]
pub struct OddEvenSplit {
    pub train: ObservationSeries,
    pub test: ObservationSeries,
    pub t_original: usize,
}

impl OddEvenSplit {
    /// Original time of training index `k`: `2k - 1`.
    pub fn train_to_original(k: usize) -> usize {
        2 * k - 1
    }

    /// Maps a segmentation on the training axis onto the original axis.
    pub fn to_original(&self, train_seg: &Segmentation) -> Result<Segmentation> {
        let cps = train_seg
            .change_points()
            .iter()
            .map(|&k| Self::train_to_original(k))
            .collect();
        Segmentation::new(self.t_original, cps)
    }

    /// Training segments carried to the test axis by index, dropping any
    /// segment that falls past the end of the (possibly shorter) test half.
    pub fn test_pairs(&self, train_seg: &Segmentation) -> Vec<(Span, Span)> {
        let t_test = self.test.len();
        train_seg
            .spans()
            .into_iter()
            .filter(|sp| sp.first <= t_test)
            .map(|sp| (sp, Span::new(sp.first, sp.last.min(t_test))))
            .collect()
    }
}

pub fn odd_even_split(series: &ObservationSeries) -> Result<OddEvenSplit> {
    let t = series.len();
    if t < 2 {
        return Err(Error::invalid("need T >= 2 to split into odd and even halves"));
    }
    Ok(OddEvenSplit {
        train: series.subsample((1..=t).step_by(2))?,
        test: series.subsample((2..=t).step_by(2))?,
        t_original: t,
    })
}

/// Which fit is scored on each test interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TestLoss {
    /// Fit on the training interval, score on the matching test interval.
    #[default]
    TrainFitted,
    /// Fit and score on the test interval itself.
    TestFitted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvRow {
    pub gamma: f64,
    pub k_hat: usize,
    pub test_loss: f64,
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub best_gamma: f64,
    /// Selected change points on the original time axis.
    pub segmentation: Segmentation,
    pub table: Vec<CvRow>,
}

/// Held-out negative log-likelihood of a training-axis segmentation.
pub fn test_loss(
    split: &OddEvenSplit,
    train_seg: &Segmentation,
    solver: &SolverConfig,
    mode: TestLoss,
) -> Result<f64> {
    split
        .test_pairs(train_seg)
        .par_iter()
        .map(|&(train_span, test_span)| {
            let fit_on = match mode {
                TestLoss::TrainFitted => (&split.train, train_span),
                TestLoss::TestFitted => (&split.test, test_span),
            };
            let fit = fit_interval(fit_on.0, fit_on.1, solver)?;
            neg_log_lik(&fit.theta_hat, &split.test, test_span)
        })
        .collect::<Result<Vec<f64>>>()
        .map(|v| v.iter().sum())
}

/// Picks the grid value whose training-half segmentation has the smallest
/// held-out loss; ties go to the smaller value.
pub fn cv_select(
    series: &ObservationSeries,
    gamma_grid: &[f64],
    method: Method,
    solver: &SolverConfig,
    options: &DetectOptions,
    mode: TestLoss,
) -> Result<CvResult> {
    if gamma_grid.is_empty() {
        return Err(Error::invalid("gamma grid is empty"));
    }
    if let Some(g) = gamma_grid.iter().find(|g| !(**g >= 0.0)) {
        return Err(Error::invalid(format!("grid value {g} is not >= 0")));
    }
    let split = odd_even_split(series)?;
    let detector = Detector::new(&split.train, method, solver, options)?;
    let mut rows = Vec::with_capacity(gamma_grid.len());
    let mut segs = Vec::with_capacity(gamma_grid.len());
    for &gamma in gamma_grid {
        let seg = detector.detect(gamma)?;
        let loss = test_loss(&split, &seg, solver, mode)?;
        rows.push(CvRow {
            gamma,
            k_hat: seg.len(),
            test_loss: loss,
        });
        segs.push(seg);
    }
    let mut best = 0;
    for k in 1..rows.len() {
        let (a, b) = (&rows[k], &rows[best]);
        if a.test_loss < b.test_loss || (a.test_loss == b.test_loss && a.gamma < b.gamma) {
            best = k;
        }
    }
    Ok(CvResult {
        best_gamma: rows[best].gamma,
        segmentation: split.to_original(&segs[best])?,
        table: rows,
    })
}

/// Penalty scale `p_lb⁻² (K+1) (n d_max / λ₂) log(Tn)` with unit constant.
pub fn theory_gamma(n: usize, k_guess: usize, bound_b: f64, graph: &ComparisonGraph, t_max: usize) -> Result<f64> {
    if n == 0 || t_max == 0 {
        return Err(Error::invalid("n and T must be positive"));
    }
    let spec = laplacian_spectrum(graph)?;
    let plb = p_lb(bound_b)?;
    Ok(plb.powi(-2)
        * (k_guess + 1) as f64
        * (n as f64 * spec.d_max as f64 / spec.lambda2)
        * (t_max as f64 * n as f64).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(t: usize, cps: &[usize]) -> Segmentation {
        Segmentation::new(t, cps.to_vec()).unwrap()
    }

    #[test]
    fn hausdorff_values() {
        let a = seg(1000, &[100, 400]);
        assert_eq!(hausdorff(&a, &a), 0.0);
        assert_eq!(hausdorff(&seg(200, &[100]), &seg(200, &[110])), 10.0);
        assert_eq!(hausdorff_points(&[2, 5], &[2]), 3.0);
        assert_eq!(hausdorff_points(&[1, 5], &[1]), 4.0);
        assert_eq!(hausdorff(&seg(10, &[]), &seg(10, &[])), 0.0);
        assert!(hausdorff(&seg(10, &[]), &seg(10, &[5])).is_infinite());
    }

    #[test]
    fn k_categories() {
        assert_eq!(count_k(&seg(9, &[]), &seg(9, &[5])), KCategory::Under);
        assert_eq!(count_k(&seg(9, &[5]), &seg(9, &[5])), KCategory::Exact);
        assert_eq!(count_k(&seg(9, &[3, 5]), &seg(9, &[5])), KCategory::Over);
    }

    #[test]
    fn split_indices() {
        let g = ComparisonGraph::complete(2).unwrap();
        let s = ObservationSeries::from_pairs(g, &[(0, 1), (1, 0), (1, 0), (0, 1), (0, 1)]).unwrap();
        let sp = odd_even_split(&s).unwrap();
        assert_eq!(sp.train.len() + sp.test.len(), 5);
        assert_eq!(sp.train.records()[1].winner, 1); // original t = 3
        assert_eq!(sp.test.records()[1].winner, 0); // original t = 4
        assert_eq!(OddEvenSplit::train_to_original(2), 3);
        let mapped = sp.to_original(&seg(3, &[2])).unwrap();
        assert_eq!(mapped.change_points(), &[3]);
        // the last training segment [3, 3] has no test counterpart
        assert_eq!(sp.test_pairs(&seg(3, &[3])).len(), 1);
    }

    #[test]
    fn theory_gamma_arithmetic() {
        let g = ComparisonGraph::complete(10).unwrap();
        let v = theory_gamma(10, 0, 0.0, &g, 100).unwrap();
        assert!((v - 4.0 * 9.0 * 1000f64.ln()).abs() < 1e-9);
        let v2 = theory_gamma(10, 1, 0.0, &g, 100).unwrap();
        assert!((v2 / v - 2.0).abs() < 1e-12);
    }

    fn two_regime(half: usize) -> ObservationSeries {
        let mut pairs = vec![(0, 1); half];
        pairs.extend(std::iter::repeat((1, 0)).take(half));
        ObservationSeries::from_pairs(ComparisonGraph::complete(2).unwrap(), &pairs).unwrap()
    }

    #[test]
    fn cv_prefers_detecting_the_change() {
        let s = two_regime(40);
        let cfg = SolverConfig::default();
        let r = cv_select(&s, &[0.5, 1e12], Method::Dp, &cfg, &DetectOptions::default(), TestLoss::TrainFitted).unwrap();
        assert_eq!(r.best_gamma, 0.5);
        assert!(r.table[0].test_loss < r.table[1].test_loss);
        assert_eq!(r.segmentation.change_points(), &[41]);
        let best = r.table.iter().map(|row| row.test_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(best, r.table[0].test_loss);
    }

    #[test]
    fn cv_single_value_grid() {
        let s = two_regime(10);
        let r = cv_select(&s, &[3.0], Method::Dp, &SolverConfig::default(), &DetectOptions::default(), TestLoss::TestFitted).unwrap();
        assert_eq!(r.best_gamma, 3.0);
        assert!(cv_select(&s, &[], Method::Dp, &SolverConfig::default(), &DetectOptions::default(), TestLoss::TrainFitted).is_err());
    }
}
