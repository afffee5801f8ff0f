use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use reas::circuit::{ideal_unitary, parse_text, IDEAL_UNITARY_CAP};
use reas::dress::dress;
use reas::linalg::{phase_free_distance, FULL_UNITARY_CAP};
use reas_bench::calibrate::run_calibration_study;
use reas_bench::config::ExperimentConfig;
use reas_bench::fit::fit_power_law;
use reas_bench::output::ScenarioOutput;
use reas_bench::scenarios::{run_scenario, BenchError};
use reas_bench::table::{read_points, Aggregation, Filter};

const EXIT_INPUT: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser)]
#[command(name = "reas-bench", version, about = "Benchmarks for robust error accumulation suppression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a config file.
    Run(RunArgs),
    /// Fit a power law to two columns of a CSV file.
    Fit(FitArgs),
    /// Compare twirled and naive calibration over independent noise draws.
    Calibrate(RunArgs),
    /// Parse and check a circuit file.
    Validate {
        circuit: PathBuf,
        /// Seed for the dressing used in the noiseless check.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Restores full depth and sample counts.
    #[arg(long)]
    full: bool,
    /// Output directory; defaults to the config's `output` or `results`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    threads: Option<usize>,
    /// Exit with status 3 when a self-check fails.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct FitArgs {
    csv: PathBuf,
    #[arg(long)]
    x: String,
    #[arg(long)]
    y: String,
    /// Keep only rows with `column=value`; repeatable.
    #[arg(long = "filter")]
    filters: Vec<Filter>,
    /// `none`, `mean` or `rms` of y per distinct x.
    #[arg(long, default_value = "none")]
    aggregate: Aggregation,
    #[arg(long)]
    min_x: Option<f64>,
    #[arg(long)]
    max_x: Option<f64>,
}

enum Failure {
    Input(anyhow::Error),
    Runtime(anyhow::Error),
    Check,
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Config(c) => Failure::Input(c.into()),
            BenchError::Runtime(r) => Failure::Runtime(r),
        }
    }
}

fn load(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(&args.config).map_err(|e| Failure::Input(e.into()))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.full {
        cfg = cfg.full_scale();
    }
    cfg.validate().map_err(|e| Failure::Input(e.into()))?;
    Ok(cfg)
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Failure::Runtime(e.into()))?;
    Ok(pool.install(f))
}

fn report(out: &ScenarioOutput, dir: &Path, stem: &str, check: bool) -> Result<(), Failure> {
    let (csv, json) = out
        .write(dir, stem)
        .with_context(|| format!("writing results to {}", dir.display()))
        .map_err(Failure::Runtime)?;
    println!("wrote {} and {}", csv.display(), json.display());
    for f in &out.summary.fits {
        match &f.fit {
            Some(fit) => println!(
                "fit {}/{}: exponent {:.4}, r2 {:.4}, window {:?}",
                f.method, f.statistic, fit.exponent, fit.r2, fit.window
            ),
            None => println!("fit {}/{}: {}", f.method, f.statistic, f.error.as_deref().unwrap_or("unavailable")),
        }
    }
    for c in &out.summary.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if check && !out.summary.all_passed() {
        return Err(Failure::Check);
    }
    Ok(())
}

fn out_dir(args: &RunArgs, cfg: &ExperimentConfig) -> PathBuf {
    args.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("results"))
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let cfg = load(&args)?;
    log::info!("running {} with seed {} ({} samples)", cfg.scenario, cfg.seed, cfg.samples);
    let out = with_pool(args.threads, || run_scenario(&cfg))??;
    report(&out, &out_dir(&args, &cfg), cfg.scenario.name(), args.check)
}

fn calibrate(args: RunArgs) -> Result<(), Failure> {
    let cfg = load(&args)?;
    cfg.gamma().map_err(|e| Failure::Input(e.into()))?;
    let out = with_pool(args.threads, || run_calibration_study(&cfg))?.map_err(Failure::Runtime)?;
    report(&out, &out_dir(&args, &cfg), "calibration", args.check)
}

fn fit(args: FitArgs) -> Result<(), Failure> {
    let file = std::fs::File::open(&args.csv)
        .with_context(|| format!("cannot open {}", args.csv.display()))
        .map_err(Failure::Input)?;
    let points =
        read_points(file, &args.x, &args.y, &args.filters, args.aggregate).map_err(|e| Failure::Input(e.into()))?;
    let window = match (args.min_x, args.max_x) {
        (None, None) => None,
        (lo, hi) => Some((lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY))),
    };
    let f = fit_power_law(&points, window).map_err(|e| Failure::Input(e.into()))?;
    println!("{}", serde_json::to_string_pretty(&f).map_err(|e| Failure::Runtime(e.into()))?);
    Ok(())
}

fn validate(path: &Path, seed: u64) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::Input)?;
    let c = parse_text(&text).map_err(|e| Failure::Input(e.into()))?;
    c.validate().map_err(|e| Failure::Input(e.into()))?;
    let layers: usize = c.blocks.iter().map(|b| b.layers.len()).sum();
    println!("qubits {}, blocks {}, layers {layers}, gates {}", c.n, c.blocks.len(), c.gate_count());
    if c.n <= FULL_UNITARY_CAP.min(IDEAL_UNITARY_CAP) {
        let d = dress(&c, &mut reas::rng::Rng::seed_from_u64(seed));
        let ideal = ideal_unitary(&c).map_err(|e| Failure::Runtime(e.into()))?;
        let dressed = d.noiseless_unitary().map_err(|e| Failure::Runtime(e.into()))?;
        let dist = phase_free_distance(&dressed, &ideal);
        println!("noiseless dressed circuit matches ideal up to phase: distance {dist:.3e}");
        if dist > 1e-10 {
            return Err(Failure::Runtime(anyhow::anyhow!("dressed circuit deviates from the ideal unitary")));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn,reas::circuit=error")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Fit(a) => fit(a),
        Command::Validate { circuit, seed } => validate(&circuit, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Check) => {
            eprintln!("one or more self-checks failed");
            ExitCode::from(EXIT_CHECK)
        }
    }
}
