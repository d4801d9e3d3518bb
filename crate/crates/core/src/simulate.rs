//! Synthetic comparison streams with piecewise-constant scores.
//!
//! At each time an edge is drawn uniformly from the comparison graph, its
//! orientation is a fair coin, and the outcome is Bernoulli under the
//! current regime. Regime `k` starts at `kΔ + 1`.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dp::Segmentation;
use crate::error::{Error, Result};
use crate::model::{
    center, laplacian_spectrum, logit, p_lb, ComparisonGraph, Observation, ObservationSeries,
    ProbMatrix, Theta,
};

const STREAM_PARAMS: u64 = 0;
const STREAM_EDGES: u64 = 1;
const STREAM_ORIENT: u64 = 2;
const STREAM_OUTCOME: u64 = 3;

fn stage_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChangeSpec {
    /// Item `i` takes the base score of item `n + 1 - i`.
    Reverse,
    /// Each half of the base vector is reversed in place.
    BlockReverse,
    /// The base vector is cyclically shifted by `⌊n/2⌋`.
    BlockExchange,
    /// Uniform permutation of the current scores.
    RandomPerm,
    /// Cyclic random permutation of a random subset holding this fraction
    /// of the items; every selected item moves.
    PartialRandomPerm(f64),
}

impl ChangeSpec {
    fn validate(&self) -> Result<()> {
        if let ChangeSpec::PartialRandomPerm(f) = *self {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::invalid(format!("partial permutation fraction {f} not in (0, 1]")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for ChangeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChangeSpec::Reverse => write!(f, "I"),
            ChangeSpec::BlockReverse => write!(f, "II"),
            ChangeSpec::BlockExchange => write!(f, "III"),
            ChangeSpec::RandomPerm => write!(f, "random"),
            ChangeSpec::PartialRandomPerm(x) => write!(f, "partial:{x}"),
        }
    }
}

impl FromStr for ChangeSpec {
    type Err = Error;

    /// Accepts `I`/`II`/`III` (or `reverse`, `block-reverse`,
    /// `block-exchange`), `random`, and `partial:<fraction>`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let spec = match t.to_ascii_lowercase().as_str() {
            "i" | "1" | "reverse" => ChangeSpec::Reverse,
            "ii" | "2" | "block-reverse" => ChangeSpec::BlockReverse,
            "iii" | "3" | "block-exchange" => ChangeSpec::BlockExchange,
            "random" | "perm" => ChangeSpec::RandomPerm,
            other => match other.strip_prefix("partial:") {
                Some(x) => ChangeSpec::PartialRandomPerm(
                    x.parse().map_err(|_| Error::invalid(format!("bad fraction in '{t}'")))?,
                ),
                None => return Err(Error::invalid(format!("unknown change kind '{t}'"))),
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// How the first regime's scores are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseKind {
    /// Evenly spaced scores.
    Arithmetic,
    /// I.i.d. uniform scores rescaled to the same extreme win probability.
    RandomUniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub n: usize,
    pub delta_spacing: usize,
    pub changes: Vec<ChangeSpec>,
    pub graph: ComparisonGraph,
    pub max_win_prob: f64,
    pub rng_seed: u64,
    pub base: BaseKind,
}

impl Scenario {
    /// Complete graph, `p = 0.9`, arithmetic base.
    pub fn complete(n: usize, delta_spacing: usize, changes: Vec<ChangeSpec>, rng_seed: u64) -> Result<Self> {
        Ok(Self {
            n,
            delta_spacing,
            changes,
            graph: ComparisonGraph::complete(n)?,
            max_win_prob: 0.9,
            rng_seed,
            base: BaseKind::Arithmetic,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta_spacing == 0 {
            return Err(Error::invalid("spacing must be >= 1"));
        }
        if !(self.max_win_prob > 0.5 && self.max_win_prob < 1.0) {
            return Err(Error::invalid(format!(
                "max win probability {} not in (0.5, 1)",
                self.max_win_prob
            )));
        }
        if self.graph.n() != self.n {
            return Err(Error::invalid("graph size does not match n"));
        }
        self.changes.iter().try_for_each(ChangeSpec::validate)
    }

    pub fn t_max(&self) -> usize {
        (self.changes.len() + 1) * self.delta_spacing
    }

    pub fn truth(&self) -> Segmentation {
        let cps = (1..=self.changes.len()).map(|k| k * self.delta_spacing + 1).collect();
        Segmentation::new(self.t_max(), cps).expect("truth points lie in (1, T]")
    }

    /// Scores of each of the `K + 1` regimes.
    pub fn regime_thetas(&self) -> Result<Vec<Theta>> {
        self.validate()?;
        let mut rng = stage_rng(self.rng_seed, STREAM_PARAMS);
        let base = match self.base {
            BaseKind::Arithmetic => base_theta(self.n, self.max_win_prob)?,
            BaseKind::RandomUniform => random_base_theta(self.n, self.max_win_prob, &mut rng)?,
        };
        let mut out = vec![base.clone()];
        for spec in &self.changes {
            let next = apply_change(&base, out.last().unwrap(), *spec, &mut rng)?;
            out.push(next);
        }
        Ok(out)
    }
}

/// Evenly spaced, centred scores whose extreme pair has win probability `p`.
pub fn base_theta(n: usize, p: f64) -> Result<Theta> {
    if n < 2 {
        return Err(Error::invalid("need at least 2 items"));
    }
    if !(p > 0.5 && p < 1.0) {
        return Err(Error::invalid(format!("p = {p} not in (0.5, 1)")));
    }
    let delta = logit(p) / (n - 1) as f64;
    let mut s: Vec<f64> = (0..n).map(|i| i as f64 * delta).collect();
    center(&mut s);
    let b = s.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    Theta::new(s, b)
}

pub fn random_base_theta(n: usize, p: f64, rng: &mut impl Rng) -> Result<Theta> {
    if n < 2 {
        return Err(Error::invalid("need at least 2 items"));
    }
    if !(p > 0.5 && p < 1.0) {
        return Err(Error::invalid(format!("p = {p} not in (0.5, 1)")));
    }
    let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let (lo, hi) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let scale = if hi > lo { logit(p) / (hi - lo) } else { 0.0 };
    let mut s: Vec<f64> = raw.iter().map(|x| x * scale).collect();
    center(&mut s);
    let b = s.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    Theta::new(s, b)
}

fn permuted(src: &Theta, idx: impl Fn(usize) -> usize) -> Theta {
    let s = src.scores();
    Theta::from_parts_unchecked((0..s.len()).map(|i| s[idx(i)]).collect(), src.bound())
}

/// Next regime's scores. Deterministic kinds act on `base`; random
/// permutations act on `current`.
pub fn apply_change(base: &Theta, current: &Theta, spec: ChangeSpec, rng: &mut impl Rng) -> Result<Theta> {
    spec.validate()?;
    let n = base.n();
    if current.n() != n {
        return Err(Error::invalid("base and current scores differ in length"));
    }
    let h = n / 2;
    Ok(match spec {
        ChangeSpec::Reverse => permuted(base, |i| n - 1 - i),
        ChangeSpec::BlockReverse => permuted(base, |i| if i < h { h - 1 - i } else { h + n - 1 - i }),
        ChangeSpec::BlockExchange => permuted(base, |i| (i + h) % n),
        ChangeSpec::RandomPerm => {
            let mut pi: Vec<usize> = (0..n).collect();
            pi.shuffle(rng);
            permuted(current, |i| pi[i])
        }
        ChangeSpec::PartialRandomPerm(f) => {
            let k = ((f * n as f64).round() as usize).clamp(0, n);
            let mut items: Vec<usize> = (0..n).collect();
            items.shuffle(rng);
            let chosen = &items[..k];
            // Sattolo's algorithm: a uniformly random single cycle, so no
            // chosen item keeps its own score.
            let mut cycle: Vec<usize> = chosen.to_vec();
            for i in (1..cycle.len()).rev() {
                let j = rng.gen_range(0..i);
                cycle.swap(i, j);
            }
            let mut pi: Vec<usize> = (0..n).collect();
            for (a, &dst) in chosen.iter().enumerate() {
                pi[dst] = cycle[a];
            }
            permuted(current, |i| pi[i])
        }
    })
}

#[derive(Debug, Clone)]
pub struct Simulated {
    pub series: ObservationSeries,
    pub truth: Segmentation,
    pub thetas: Vec<Theta>,
}

pub fn generate(scenario: &Scenario) -> Result<Simulated> {
    let thetas = scenario.regime_thetas()?;
    let delta = scenario.delta_spacing;
    let series = sample_series(&scenario.graph, thetas.len(), delta, scenario.rng_seed, |k, a, b| {
        crate::model::sigmoid(thetas[k].scores()[a] - thetas[k].scores()[b])
    })?;
    Ok(Simulated {
        series,
        truth: scenario.truth(),
        thetas,
    })
}

/// Like [`generate`] but with arbitrary win-probability matrices per regime.
pub fn generate_from_prob_matrices(
    graph: &ComparisonGraph,
    regimes: &[ProbMatrix],
    delta_spacing: usize,
    seed: u64,
) -> Result<(ObservationSeries, Segmentation)> {
    if regimes.is_empty() || delta_spacing == 0 {
        return Err(Error::invalid("need at least one regime and a positive spacing"));
    }
    if regimes.iter().any(|p| p.n() != graph.n()) {
        return Err(Error::invalid("probability matrix size does not match the graph"));
    }
    let series = sample_series(graph, regimes.len(), delta_spacing, seed, |k, a, b| regimes[k].get(a, b))?;
    let t = regimes.len() * delta_spacing;
    let truth = Segmentation::new(t, (1..regimes.len()).map(|k| k * delta_spacing + 1).collect())?;
    Ok((series, truth))
}

fn sample_series(
    graph: &ComparisonGraph,
    regimes: usize,
    delta: usize,
    seed: u64,
    prob: impl Fn(usize, usize, usize) -> f64,
) -> Result<ObservationSeries> {
    let mut edge_rng = stage_rng(seed, STREAM_EDGES);
    let mut orient_rng = stage_rng(seed, STREAM_ORIENT);
    let mut outcome_rng = stage_rng(seed, STREAM_OUTCOME);
    let edges = graph.edges();
    let t_max = regimes * delta;
    let mut records = Vec::with_capacity(t_max);
    for t in 1..=t_max {
        let k = (t - 1) / delta;
        let (i, j) = edges[edge_rng.gen_range(0..edges.len())];
        let (a, b) = if orient_rng.gen::<bool>() { (i, j) } else { (j, i) };
        let (winner, loser) = if outcome_rng.gen::<f64>() < prob(k, a, b) { (a, b) } else { (b, a) };
        records.push(Observation { time: t, winner, loser });
    }
    ObservationSeries::new(graph.clone(), records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrReport {
    pub delta: usize,
    /// Smallest ℓ2 jump between consecutive regimes; `None` without changes.
    pub kappa: Option<f64>,
    /// `p_lb⁻⁴ · K · |E| · n · d_max / λ₂² · log(Tn)`.
    pub rhs_factor: f64,
    /// `Δκ² / rhs_factor`; `None` without changes.
    pub implied_b_t: Option<f64>,
    pub lambda2: f64,
    pub d_max: usize,
    pub edge_count: usize,
}

/// Signal-to-noise summary of a scenario. Informational only.
pub fn snr_diagnostic(scenario: &Scenario, bound_b: f64) -> Result<SnrReport> {
    let thetas = scenario.regime_thetas()?;
    let spec = laplacian_spectrum(&scenario.graph)?;
    let k = scenario.changes.len();
    let n = scenario.n as f64;
    let t = scenario.t_max() as f64;
    let plb = p_lb(bound_b)?;
    let rhs_factor = plb.powi(-4)
        * k as f64
        * (spec.edge_count as f64 * n * spec.d_max as f64 / spec.lambda2.powi(2))
        * (t * n).ln();
    let kappa = thetas
        .windows(2)
        .map(|w| {
            w[0].scores()
                .iter()
                .zip(w[1].scores())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .reduce(f64::min);
    let implied_b_t = kappa.map(|kp| scenario.delta_spacing as f64 * kp * kp / rhs_factor);
    Ok(SnrReport {
        delta: scenario.delta_spacing,
        kappa,
        rhs_factor,
        implied_b_t,
        lambda2: spec.lambda2,
        d_max: spec.d_max,
        edge_count: spec.edge_count,
    })
}
