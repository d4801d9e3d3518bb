//! Long-running simulation benchmark over the four standard settings.
//!
//! ```text
//! cargo run --release -p btl-cpd --example benchmark -- --setting ii --seeds 100
//! ```
//!
//! For each setting and method it prints the mean (sd) Hausdorff error over
//! the seeds and how often K̂ is under, exact or over. Settings (iii) and
//! (iv) take hours on a single core.

use clap::Parser;

use btl_cpd::detect::{DetectOptions, Method};
use btl_cpd::eval::{count_k, cv_select, hausdorff, KCategory, TestLoss};
use btl_cpd::simulate::{generate, ChangeSpec, Scenario};
use btl_cpd::solver::SolverConfig;

const GAMMA_GRID: [f64; 14] = [8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0, 23.0, 26.0, 30.0, 35.0, 40.0, 50.0, 60.0];

#[derive(Parser)]
struct Args {
    /// One of i, ii, iii, iv, all.
    #[arg(long, default_value = "all")]
    setting: String,
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', default_value = "dplr,wbs-glr")]
    methods: Vec<String>,
    /// Replace the structured changes with uniform random permutations.
    #[arg(long)]
    random_change: bool,
}

fn settings(which: &str) -> Vec<(&'static str, usize, usize, usize)> {
    let all = [("i", 10, 500, 3), ("ii", 20, 800, 3), ("iii", 100, 1000, 2), ("iv", 100, 2000, 3)];
    all.into_iter().filter(|s| which == "all" || s.0 == which).collect()
}

fn main() -> btl_cpd::Result<()> {
    let args = Args::parse();
    let methods: Vec<Method> = args.methods.iter().map(|m| m.parse()).collect::<btl_cpd::Result<_>>()?;
    let table = settings(&args.setting);
    if table.is_empty() {
        return Err(btl_cpd::Error::InvalidInput(format!("unknown setting '{}'", args.setting)));
    }
    println!("setting,n,delta,method,mean_h,sd_h,under,exact,over");
    for (name, n, delta, k) in table {
        let changes = if args.random_change {
            vec![ChangeSpec::RandomPerm; k]
        } else {
            [ChangeSpec::Reverse, ChangeSpec::BlockReverse, ChangeSpec::BlockExchange][..k].to_vec()
        };
        for &method in &methods {
            let mut h = Vec::new();
            let mut cats = [0usize; 3];
            for seed in 0..args.seeds {
                let sim = generate(&Scenario::complete(n, delta, changes.clone(), seed)?)?;
                let opts = DetectOptions { seed, ..DetectOptions::default() };
                let cv = cv_select(&sim.series, &GAMMA_GRID, method, &SolverConfig::default(), &opts, TestLoss::TrainFitted)?;
                h.push(hausdorff(&cv.segmentation, &sim.truth));
                cats[match count_k(&cv.segmentation, &sim.truth) {
                    KCategory::Under => 0,
                    KCategory::Exact => 1,
                    KCategory::Over => 2,
                }] += 1;
                eprintln!("setting {name} {method} seed {seed}: H = {}", h[h.len() - 1]);
            }
            let mean = h.iter().sum::<f64>() / h.len() as f64;
            let sd = (h.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (h.len().max(2) - 1) as f64).sqrt();
            println!("{name},{n},{delta},{method},{mean},{sd},{},{},{}", cats[0], cats[1], cats[2]);
        }
    }
    Ok(())
}
