//! Uniform entry point over the segmentation methods.

use std::fmt;
use std::str::FromStr;

use crate::dp::{default_min_seg, IntervalCostTable, Segmentation};
use crate::error::{Error, Result};
use crate::model::ObservationSeries;
use crate::refine::refine;
use crate::solver::SolverConfig;
use crate::wbs::{default_min_gap, Statistic, WbsConfig, WbsEngine};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Penalized dynamic programming.
    Dp,
    /// Dynamic programming followed by local refinement.
    Dplr,
    Wbs(Statistic),
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dp" => Ok(Self::Dp),
            "dplr" => Ok(Self::Dplr),
            other => match other.strip_prefix("wbs-") {
                Some(stat) => Ok(Self::Wbs(stat.parse()?)),
                None => Err(Error::invalid(format!("unknown method '{s}'"))),
            },
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Dp => write!(f, "dp"),
            Method::Dplr => write!(f, "dplr"),
            Method::Wbs(Statistic::Glr) => write!(f, "wbs-glr"),
            Method::Wbs(Statistic::Sst) => write!(f, "wbs-sst"),
            Method::Wbs(Statistic::Borda) => write!(f, "wbs-borda"),
        }
    }
}

/// Method-specific knobs; `None` picks the size-dependent default.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectOptions {
    pub min_seg: Option<usize>,
    pub max_lookback: Option<usize>,
    pub wbs_m: usize,
    pub seed: u64,
    pub min_gap: Option<usize>,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            min_seg: None,
            max_lookback: None,
            wbs_m: 50,
            seed: 0,
            min_gap: None,
        }
    }
}

enum Prepared<'a> {
    Dp { table: IntervalCostTable, refine: bool },
    Wbs(WbsEngine<'a>),
}

/// A method bound to one series. Penalty-independent work (interval costs,
/// sampled intervals, split statistics) is done once and shared by every
/// call to [`Detector::detect`].
pub struct Detector<'a> {
    series: &'a ObservationSeries,
    solver: SolverConfig,
    prepared: Prepared<'a>,
}

impl<'a> Detector<'a> {
    pub fn new(
        series: &'a ObservationSeries,
        method: Method,
        solver: &SolverConfig,
        options: &DetectOptions,
    ) -> Result<Self> {
        let n = series.n();
        let prepared = match method {
            Method::Dp | Method::Dplr => {
                let min_seg = options.min_seg.unwrap_or_else(|| default_min_seg(n));
                let table = IntervalCostTable::build(series, solver, min_seg, options.max_lookback)?;
                Prepared::Dp {
                    table,
                    refine: method == Method::Dplr,
                }
            }
            Method::Wbs(statistic) => {
                let config = WbsConfig {
                    intervals_m: options.wbs_m,
                    threshold_gamma: 0.0,
                    statistic,
                    rng_seed: options.seed,
                    min_gap: options.min_gap.unwrap_or_else(|| default_min_gap(n)),
                };
                Prepared::Wbs(WbsEngine::new(series, &config, solver)?)
            }
        };
        Ok(Self {
            series,
            solver: solver.clone(),
            prepared,
        })
    }

    pub fn detect(&self, gamma: f64) -> Result<Segmentation> {
        match &self.prepared {
            Prepared::Dp { table, refine: false } => Ok(table.solve(gamma)?.0),
            Prepared::Dp { table, refine: true } => {
                let prelim = table.solve(gamma)?.0;
                refine(self.series, &prelim, &self.solver)
            }
            Prepared::Wbs(engine) => engine.detect(gamma),
        }
    }
}

/// One-shot detection with penalty (or threshold) `gamma`.
pub fn run_method(
    series: &ObservationSeries,
    method: Method,
    gamma: f64,
    solver: &SolverConfig,
    options: &DetectOptions,
) -> Result<Segmentation> {
    Detector::new(series, method, solver, options)?.detect(gamma)
}

/// Dynamic programming then local refinement.
pub fn run_dplr(series: &ObservationSeries, gamma: f64, solver: &SolverConfig) -> Result<Segmentation> {
    run_method(series, Method::Dplr, gamma, solver, &DetectOptions::default())
}
