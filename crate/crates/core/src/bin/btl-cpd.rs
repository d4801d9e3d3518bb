use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use btl_cpd::detect::{DetectOptions, Detector, Method};
use btl_cpd::eval::{count_k, cv_select, hausdorff, KCategory, TestLoss};
use btl_cpd::io::{
    parse_scenario_config, read_edge_list, read_observations, segmentation_from_json, segmentation_to_json,
    truth_sidecar_path, write_cv_table, write_observations, IngestOptions, Labels, LabeledSeries,
};
use btl_cpd::model::Span;
use btl_cpd::refine::refine;
use btl_cpd::simulate::generate;
use btl_cpd::solver::{fit_interval, SolverConfig};
use btl_cpd::{Error, Result};

#[derive(Parser)]
#[command(name = "btl-cpd", version, about = "Change point localization for pairwise comparison streams")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a comparison stream from a scenario config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Detect change points with a fixed penalty.
    Detect {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        method: MethodArgs,
        #[arg(long)]
        gamma: f64,
        #[command(flatten)]
        solver: SolverArgs,
        /// Segmentation JSON (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Refine an existing segmentation locally.
    Refine {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        est: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Choose the penalty by odd/even cross-validation.
    Tune {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        method: MethodArgs,
        /// Comma-separated candidate penalties.
        #[arg(long, value_delimiter = ',', required = true)]
        gamma_grid: Vec<f64>,
        #[arg(long, value_enum, default_value_t = LossArg::Train)]
        loss: LossArg,
        #[command(flatten)]
        solver: SolverArgs,
        /// Table CSV `gamma,k_hat,test_loss` (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Selected segmentation as JSON.
        #[arg(long)]
        est_out: Option<PathBuf>,
    },
    /// Compare an estimate with the truth.
    Evaluate {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Fit scores on one interval and print the ranking.
    Fit {
        #[command(flatten)]
        input: InputArgs,
        /// Inclusive interval `s:e`.
        #[arg(long)]
        interval: String,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Args)]
struct InputArgs {
    /// Observation CSV with header `t,winner,loser`.
    #[arg(long = "in")]
    input: PathBuf,
    /// Fixed item order, comma-separated; unknown labels are rejected.
    #[arg(long, value_delimiter = ',')]
    items: Option<Vec<String>>,
    /// Edge-list file restricting the comparison graph.
    #[arg(long)]
    graph: Option<PathBuf>,
}

#[derive(Args)]
struct MethodArgs {
    #[arg(long, default_value = "dplr")]
    method: String,
    /// Random intervals for WBS.
    #[arg(long, default_value_t = 50)]
    wbs_m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    min_seg: Option<usize>,
    #[arg(long)]
    min_gap: Option<usize>,
    #[arg(long)]
    max_lookback: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Ridge,
    Constrained,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    /// Fit on the training interval, score on the test interval.
    Train,
    /// Fit and score on the test interval.
    Test,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Ridge)]
    mode: ModeArg,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Score bound; defaults to 10.
    #[arg(long)]
    bound_b: Option<f64>,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        let mut cfg = match self.mode {
            ModeArg::Ridge => SolverConfig::ridge(self.lambda),
            ModeArg::Constrained => SolverConfig {
                require_convergence: true,
                ..SolverConfig::constrained(10.0)
            },
        };
        if let Some(b) = self.bound_b {
            cfg.bound_b = b;
        }
        cfg.max_iter = self.max_iter;
        cfg
    }
}

impl MethodArgs {
    fn parse(&self) -> Result<(Method, DetectOptions)> {
        let opts = DetectOptions {
            min_seg: self.min_seg,
            max_lookback: self.max_lookback,
            wbs_m: self.wbs_m,
            seed: self.seed,
            min_gap: self.min_gap,
        };
        Ok((self.method.parse()?, opts))
    }
}

fn open(p: &Path) -> Result<File> {
    File::open(p).map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display())))
}

fn read_text(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display())))
}

fn load(input: &InputArgs) -> Result<LabeledSeries> {
    let items = input.items.clone().map(Labels::new).transpose()?;
    let edges = match &input.graph {
        Some(p) => Some(read_edge_list(BufReader::new(open(p)?))?),
        None => None,
    };
    let ls = read_observations(BufReader::new(open(&input.input)?), &IngestOptions { items, edges })?;
    info!(
        "loaded T = {} over {} items; labels by index: {}",
        ls.series.len(),
        ls.labels.len(),
        ls.labels.names().join(",")
    );
    Ok(ls)
}

fn emit(path: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            write(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            write(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn parse_interval(s: &str) -> Result<Span> {
    let bad = || Error::InvalidInput(format!("interval '{s}' is not of the form s:e"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok(Span::new(a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out, seed } => {
            let text = read_text(&config)?;
            let mut sc = parse_scenario_config(&text, config.parent().unwrap_or(Path::new(".")))?;
            if let Some(s) = seed {
                sc.rng_seed = s;
            }
            let sim = generate(&sc)?;
            emit(Some(&out), |w| write_observations(w, &sim.series, &Labels::indices(sc.n)))?;
            let sidecar = truth_sidecar_path(&out);
            std::fs::write(&sidecar, segmentation_to_json(&sim.truth)?)?;
            info!("wrote T = {} to {} and truth to {}", sim.series.len(), out.display(), sidecar.display());
        }
        Command::Detect { input, method, gamma, solver, out } => {
            let ls = load(&input)?;
            let (method, opts) = method.parse()?;
            let seg = Detector::new(&ls.series, method, &solver.config(), &opts)?.detect(gamma)?;
            info!("{method} with gamma {gamma}: {} change points", seg.len());
            emit(out.as_deref(), |w| Ok(w.write_all(segmentation_to_json(&seg)?.as_bytes())?))?;
        }
        Command::Refine { input, est, solver, out } => {
            let ls = load(&input)?;
            let prelim = segmentation_from_json(&read_text(&est)?)?;
            let seg = refine(&ls.series, &prelim, &solver.config())?;
            emit(out.as_deref(), |w| Ok(w.write_all(segmentation_to_json(&seg)?.as_bytes())?))?;
        }
        Command::Tune { input, method, gamma_grid, loss, solver, out, est_out } => {
            let ls = load(&input)?;
            let (method, opts) = method.parse()?;
            let mode = match loss {
                LossArg::Train => TestLoss::TrainFitted,
                LossArg::Test => TestLoss::TestFitted,
            };
            let cv = cv_select(&ls.series, &gamma_grid, method, &solver.config(), &opts, mode)?;
            info!("selected gamma {} with {} change points", cv.best_gamma, cv.segmentation.len());
            emit(out.as_deref(), |w| write_cv_table(w, &cv.table))?;
            if let Some(p) = est_out {
                std::fs::write(p, segmentation_to_json(&cv.segmentation)?)?;
            }
        }
        Command::Evaluate { est, truth } => {
            let est = segmentation_from_json(&read_text(&est)?)?;
            let truth = segmentation_from_json(&read_text(&truth)?)?;
            if est.t_max() != truth.t_max() {
                return Err(Error::InvalidInput(format!(
                    "estimate covers T = {} but truth covers T = {}",
                    est.t_max(),
                    truth.t_max()
                )));
            }
            let category = match count_k(&est, &truth) {
                KCategory::Under => "under",
                KCategory::Exact => "exact",
                KCategory::Over => "over",
            };
            println!("hausdorff {}", hausdorff(&est, &truth));
            println!("k_hat {}", est.len());
            println!("k_true {}", truth.len());
            println!("category {category}");
        }
        Command::Fit { input, interval, solver } => {
            let ls = load(&input)?;
            let span = parse_interval(&interval)?;
            let fit = fit_interval(&ls.series, span, &solver.config())?;
            info!(
                "objective {} after {} iterations (converged: {})",
                fit.objective, fit.iterations, fit.converged
            );
            let scores = fit.theta_hat.scores();
            emit(None, |w| {
                writeln!(w, "rank,item,theta")?;
                for (r, i) in fit.theta_hat.ranking().into_iter().enumerate() {
                    writeln!(w, "{},{},{}", r + 1, ls.labels.name(i), scores[i])?;
                }
                Ok(())
            })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
