use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use btl_cpd::detect::{DetectOptions, Method};
use btl_cpd::dp::{dp_detect, dp_objective, IntervalCostTable, Segmentation};
use btl_cpd::eval::{cv_select, hausdorff_points, TestLoss};
use btl_cpd::model::{
    neg_log_lik, p_lb, sigmoid, win_prob, ComparisonGraph, Observation, ObservationSeries, Span, Theta,
};
use btl_cpd::refine::{refine_with, RefineOptions};
use btl_cpd::simulate::{apply_change, base_theta, generate, ChangeSpec, Scenario};
use btl_cpd::solver::{fit_interval, SolverConfig};
use btl_cpd::wbs::{borda_cusum, glr_stat, sst_stat, wbs_detect, Statistic, WbsConfig};

fn theta_in_box(n: usize, b: f64) -> impl Strategy<Value = Theta> {
    prop::collection::vec(-1.0f64..1.0, n).prop_map(move |raw| {
        let mean = raw.iter().sum::<f64>() / n as f64;
        let mut v: Vec<f64> = raw.iter().map(|x| x - mean).collect();
        let m = v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        if m > 0.0 {
            v.iter_mut().for_each(|x| *x *= b / m * 0.999);
        }
        Theta::centered(v, b).unwrap()
    })
}

/// Series over a complete graph on `n` items from `(edge, low item wins)` draws.
fn series_from(n: usize, draws: &[(usize, bool)]) -> ObservationSeries {
    let g = ComparisonGraph::complete(n).unwrap();
    let pairs: Vec<(usize, usize)> = draws
        .iter()
        .map(|&(e, low)| {
            let (i, j) = g.edges()[e % g.edge_count()];
            if low { (i, j) } else { (j, i) }
        })
        .collect();
    ObservationSeries::from_pairs(g, &pairs).unwrap()
}

fn draws(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<(usize, bool)>> {
    prop::collection::vec((0usize..1000, any::<bool>()), len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn win_prob_within_bounds(n in 2usize..12, b in 0.1f64..3.0, seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..n).map(|_| r.gen_range(-b..b)).collect();
        let mean = raw.iter().sum::<f64>() / n as f64;
        let v: Vec<f64> = raw.iter().map(|x| (x - mean).clamp(-b, b)).collect();
        let v = {
            let mean = v.iter().sum::<f64>() / n as f64;
            v.iter().map(|x| x - mean).collect::<Vec<_>>()
        };
        prop_assume!(v.iter().all(|x| x.abs() <= b));
        let theta = Theta::new(v, b).unwrap();
        let lo = p_lb(b).unwrap();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let p = win_prob(&theta, i, j).unwrap();
                    prop_assert!(p >= lo - 1e-15 && p <= 1.0 - lo + 1e-15);
                    prop_assert!((p + win_prob(&theta, j, i).unwrap() - 1.0).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn neg_log_lik_convex(
        ta in theta_in_box(5, 2.0),
        tb in theta_in_box(5, 2.0),
        lam in 0.01f64..0.99,
        d in draws(1..60),
    ) {
        let s = series_from(5, &d);
        let span = s.full_span();
        let mix: Vec<f64> = ta.scores().iter().zip(tb.scores()).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
        let tm = Theta::centered(mix, 2.0).unwrap();
        let lhs = neg_log_lik(&tm, &s, span).unwrap();
        let rhs = lam * neg_log_lik(&ta, &s, span).unwrap() + (1.0 - lam) * neg_log_lik(&tb, &s, span).unwrap();
        prop_assert!(lhs <= rhs + 1e-9);
    }

    #[test]
    fn neg_log_lik_additive(t in theta_in_box(4, 1.0), d in draws(2..80), cut in 0.0f64..1.0) {
        let s = series_from(4, &d);
        let len = s.len();
        let m = 1 + ((len - 1) as f64 * cut) as usize;
        prop_assume!(m < len);
        let whole = neg_log_lik(&t, &s, Span::new(1, len)).unwrap();
        let parts = neg_log_lik(&t, &s, Span::new(1, m)).unwrap() + neg_log_lik(&t, &s, Span::new(m + 1, len)).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-9 * whole.max(1.0));
    }

    #[test]
    fn fits_are_deterministic(d in draws(1..60)) {
        let s = series_from(4, &d);
        let cfg = SolverConfig::default();
        let a = fit_interval(&s, s.full_span(), &cfg).unwrap();
        let b = fit_interval(&s, s.full_span(), &cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn dp_objective_matches_bellman(d in draws(2..30), gamma in 0.0f64..6.0) {
        let s = series_from(3, &d);
        let cfg = SolverConfig::default();
        let (seg, trace) = dp_detect(&s, gamma, &cfg, 1).unwrap();
        let obj = dp_objective(&s, &seg, gamma, &cfg, None).unwrap();
        prop_assert!((obj - trace.bellman[s.len()]).abs() <= 1e-9);
        // backpointer chain reaches the origin in at most T steps
        let (mut k, mut steps) = (s.len(), 0);
        while k > 0 {
            k = trace.backpointers[k];
            steps += 1;
            prop_assert!(steps <= s.len());
        }
    }

    #[test]
    fn glr_split_never_loses(d in draws(4..50), cut in 0.0f64..1.0) {
        let s = series_from(4, &d);
        let t = 2 + ((s.len() - 2) as f64 * cut) as usize;
        prop_assume!(t <= s.len());
        let g = glr_stat(&s, 1, s.len(), t, &SolverConfig::constrained(5.0)).unwrap();
        prop_assert!(g >= 0.0);
    }

    #[test]
    fn sst_swap_symmetry(d in draws(4..120), cut in 0.1f64..0.9) {
        let s = series_from(4, &d);
        let m = ((s.len() as f64) * cut) as usize;
        prop_assume!(m >= 1 && m < s.len());
        let (l, r) = (Span::new(1, m), Span::new(m + 1, s.len()));
        let a = sst_stat(&s, l, r).unwrap();
        let b = sst_stat(&s, r, l).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn borda_relabel_invariant(d in draws(3..80), seed in any::<u64>(), cut in 0.0f64..1.0) {
        let n = 5;
        let s = series_from(n, &d);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let relabeled: Vec<(usize, usize)> = s.records().iter().map(|r| (perm[r.winner], perm[r.loser])).collect();
        let s2 = ObservationSeries::from_pairs(s.graph().clone(), &relabeled).unwrap();
        let t = 2 + ((s.len() - 2) as f64 * cut) as usize;
        prop_assume!(t <= s.len());
        let a = borda_cusum(&s, 1, s.len(), t).unwrap();
        let b = borda_cusum(&s2, 1, s.len(), t).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn wbs_points_increasing_and_in_range(d in draws(10..80), seed in any::<u64>(), gamma in 0.0f64..3.0) {
        let s = series_from(3, &d);
        for stat in [Statistic::Glr, Statistic::Sst, Statistic::Borda] {
            let cfg = WbsConfig { min_gap: 2, ..WbsConfig::new(3, stat, gamma, seed) };
            let seg = wbs_detect(&s, &cfg, &SolverConfig::default()).unwrap();
            let cps = seg.change_points();
            prop_assert!(cps.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(cps.iter().all(|&c| c > 1 && c <= s.len()));
        }
    }

    #[test]
    fn hausdorff_symmetric(a in prop::collection::btree_set(1usize..500, 1..8), b in prop::collection::btree_set(1usize..500, 1..8)) {
        let (a, b): (Vec<usize>, Vec<usize>) = (a.into_iter().collect(), b.into_iter().collect());
        prop_assert_eq!(hausdorff_points(&a, &b), hausdorff_points(&b, &a));
        prop_assert_eq!(hausdorff_points(&a, &b) == 0.0, a == b);
    }

    #[test]
    fn permutation_changes_keep_the_score_multiset(n in 2usize..15, seed in any::<u64>(), frac in 0.05f64..1.0) {
        let base = base_theta(n, 0.9).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        for spec in [ChangeSpec::Reverse, ChangeSpec::BlockReverse, ChangeSpec::BlockExchange,
                     ChangeSpec::RandomPerm, ChangeSpec::PartialRandomPerm(frac)] {
            let next = apply_change(&base, &base, spec, &mut r).unwrap();
            let mut a = base.scores().to_vec();
            let mut b = next.scores().to_vec();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn simulated_pairs_are_graph_edges(seed in any::<u64>()) {
        let g = ComparisonGraph::new(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)]).unwrap();
        let sc = Scenario { graph: g.clone(), ..Scenario::complete(5, 40, vec![ChangeSpec::Reverse], seed).unwrap() };
        let sim = generate(&sc).unwrap();
        prop_assert!(sim.series.records().iter().all(|r| g.contains(r.winner, r.loser)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn refine_keeps_count_unless_collapsing(seed in 0u64..1000, jitter in prop::collection::vec(-15i64..15, 2)) {
        let sim = generate(&Scenario::complete(4, 60, vec![ChangeSpec::Reverse, ChangeSpec::BlockExchange], seed).unwrap()).unwrap();
        let prelim: Vec<usize> = sim.truth.change_points().iter().zip(&jitter).map(|(&c, &j)| (c as i64 + j) as usize).collect();
        let prelim = Segmentation::new(sim.series.len(), prelim).unwrap();
        let rep = refine_with(&sim.series, &prelim, &SolverConfig::default(), RefineOptions::default()).unwrap();
        prop_assert_eq!(rep.segmentation.len() + rep.collapsed, prelim.len());
    }
}

#[test]
fn change_count_non_increasing_in_gamma() {
    let sim = generate(&Scenario::complete(6, 150, vec![ChangeSpec::Reverse, ChangeSpec::BlockReverse], 4).unwrap()).unwrap();
    let table = IntervalCostTable::build(&sim.series, &SolverConfig::default(), 2, None).unwrap();
    let grid = [0.5, 1.0, 2.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 48.0];
    let counts: Vec<usize> = grid.iter().map(|&g| table.solve(g).unwrap().0.len()).collect();
    assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
    assert!(counts[0] > counts[9]);
}

#[test]
fn sst_mean_is_zero_without_change() {
    // Monte Carlo over resampled splits of one stationary regime.
    let n = 4;
    let theta = base_theta(n, 0.8).unwrap();
    let g = ComparisonGraph::complete(n).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(77);
    let vals: Vec<f64> = (0..500)
        .map(|_| {
            let recs: Vec<Observation> = (1..=120)
                .map(|t| {
                    let (i, j) = g.edges()[r.gen_range(0..g.edge_count())];
                    let p = sigmoid(theta.scores()[i] - theta.scores()[j]);
                    let (w, l) = if r.gen::<f64>() < p { (i, j) } else { (j, i) };
                    Observation { time: t, winner: w, loser: l }
                })
                .collect();
            let s = ObservationSeries::new(g.clone(), recs).unwrap();
            sst_stat(&s, Span::new(1, 60), Span::new(61, 120)).unwrap()
        })
        .collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
    let se = (var / vals.len() as f64).sqrt();
    assert!(mean.abs() <= 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn cv_is_deterministic() {
    let sim = generate(&Scenario::complete(5, 80, vec![ChangeSpec::Reverse], 9).unwrap()).unwrap();
    let grid = [2.0, 5.0, 10.0];
    for method in [Method::Dplr, Method::Wbs(Statistic::Glr)] {
        let opts = DetectOptions { seed: 3, ..DetectOptions::default() };
        let a = cv_select(&sim.series, &grid, method, &SolverConfig::default(), &opts, TestLoss::TrainFitted).unwrap();
        let b = cv_select(&sim.series, &grid, method, &SolverConfig::default(), &opts, TestLoss::TrainFitted).unwrap();
        assert_eq!(a.table, b.table);
        assert_eq!(a.segmentation, b.segmentation);
        // the selected value has the smallest held-out loss
        let best = a.table.iter().map(|r| r.test_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(a.table.iter().find(|r| r.gamma == a.best_gamma).unwrap().test_loss, best);
    }
}
