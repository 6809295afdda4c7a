//! `ising-pairs` command-line tool.
//!
//! Exit status: 0 on success, 2 on a usage or configuration error, 1 on any
//! other failure. Diagnostics go to stderr.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ising_pairs::{
    bernstein, coupled_truncation_chains, coupling_bound, estimate_neighborhood,
    misid_bound_finite, misid_bound_infinite, run_experiment_on, ExperimentConfig, GibbsSampler,
    LatticePoint, PairwisePotential, Sample, ScheduleKind, ThresholdSchedule,
};

#[derive(Parser)]
#[command(
    name = "ising-pairs",
    version,
    about = "Simulate pairwise Ising models and recover interaction neighborhoods"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the configured random interaction graph and print it as a potential file.
    Graph {
        #[command(flatten)]
        common: Common,
    },
    /// Draw an i.i.d. sample with the coupled Gibbs sampler.
    Sample {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelSource,
        /// Number of draws.
        #[arg(short, long)]
        n: usize,
        #[arg(long)]
        step_cap: Option<u64>,
    },
    /// Estimate the interaction neighborhood of one site from a sample file.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Sample file produced by `sample`.
        #[arg(long)]
        sample: PathBuf,
        /// Center site, e.g. `0,0`; defaults to the config center or the origin.
        #[arg(long, allow_hyphen_values = true)]
        center: Option<LatticePoint>,
        /// Ball radius L.
        #[arg(short = 'L', long = "L", alias = "radius")]
        radius: Option<u32>,
        /// Fixed threshold; overrides the schedule.
        #[arg(long)]
        eps: Option<f64>,
        /// Schedule constant; defaults to the first C of the config.
        #[arg(short = 'C', long = "C")]
        c: Option<f64>,
        #[arg(long, value_enum)]
        schedule: Option<Schedule>,
    },
    /// Evaluate a bound formula and print its value.
    Bounds(BoundsArgs),
    /// Run the full and truncated chains side by side and report per-site disagreement rates.
    Coupling {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelSource,
        /// Truncation radius L.
        #[arg(short = 'L', long = "L", alias = "radius", default_value_t = 1)]
        radius: u32,
        #[arg(long, default_value_t = 10_000)]
        burn_in: u64,
        #[arg(long, default_value_t = 100_000)]
        sweeps: u64,
    },
    /// Run the replicated recovery experiment and write the rate table as CSV.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Worker count; 0 uses the config value.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment config file (TOML).
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(short, long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelSource {
    /// Potential file; takes precedence over the config's graph.
    #[arg(long)]
    potential: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    common: Common,
    /// 3: finite-range misidentification bound, 2: infinite-range.
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=3), conflicts_with = "kind")]
    theorem: Option<u8>,
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[arg(short, long)]
    n: Option<u64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    v: Option<f64>,
    #[arg(short = 'L', long = "L")]
    radius: Option<u32>,
    #[arg(short, long)]
    d: Option<usize>,
    /// Dobrushin coefficient (infinite-range bound).
    #[arg(long)]
    r: Option<f64>,
    /// Tail sum beyond L (infinite-range bound).
    #[arg(long)]
    tail: Option<f64>,
    /// Range bound of the summands (Bernstein).
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[command(flatten)]
    model: ModelSource,
}

#[derive(Clone, Copy, ValueEnum)]
enum Schedule {
    Simple,
    Theoretical,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Bernstein,
    Finite,
    Infinite,
    Coupling,
}

enum Failure {
    Config(String),
    Runtime(String),
}

type Outcome<T> = std::result::Result<T, Failure>;

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn config_error(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("ising-pairs: configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("ising-pairs: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load_config(common: &Common) -> Outcome<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => {
            if !path.is_file() {
                return Err(config_error(format!(
                    "config file {} not found",
                    path.display()
                )));
            }
            ExperimentConfig::read(path)
                .map_err(|e| config_error(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    Ok(config)
}

fn load_potential(config: &ExperimentConfig, model: &ModelSource) -> Outcome<PairwisePotential> {
    match &model.potential {
        Some(path) => PairwisePotential::read(path)
            .map_err(|e| config_error(format!("{}: {e}", path.display()))),
        None => config.fixed_potential().map_err(|e| match e {
            ising_pairs::Error::Io(_) | ising_pairs::Error::Parse { .. } => config_error(e),
            other => runtime(other),
        }),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Outcome<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| runtime(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(runtime),
    }
}

fn required<T>(value: Option<T>, flag: &str) -> Outcome<T> {
    value.ok_or_else(|| config_error(format!("--{flag} is required for this bound")))
}

fn run(command: Command) -> Outcome<()> {
    match command {
        Command::Graph { common } => {
            let config = load_config(&common)?;
            let potential = load_potential(&config, &ModelSource { potential: None })?;
            emit(common.out.as_deref(), &potential.to_toml())
        }
        Command::Sample {
            common,
            model,
            n,
            step_cap,
        } => {
            let config = load_config(&common)?;
            let potential = load_potential(&config, &model)?;
            let cap = step_cap.unwrap_or(config.step_cap);
            let sampler =
                GibbsSampler::new(&potential, potential.volume(), cap).map_err(runtime)?;
            let (sample, steps) = sampler.sample(n, config.master_seed).map_err(runtime)?;
            eprintln!("{n} draws, {steps} single-site steps in total");
            emit(common.out.as_deref(), &sample.to_text())
        }
        Command::Estimate {
            common,
            sample,
            center,
            radius,
            eps,
            c,
            schedule,
        } => {
            let config = load_config(&common)?;
            let data =
                Sample::read(&sample).map_err(|e| runtime(format!("{}: {e}", sample.display())))?;
            let dimension = data.sites().dimension().unwrap_or(config.dimension);
            let center = center.unwrap_or_else(|| {
                if common.config.is_some() {
                    config.center()
                } else {
                    LatticePoint::origin(dimension)
                }
            });
            let radius = radius.unwrap_or(config.radius);
            let eps = match eps {
                Some(e) => e,
                None => {
                    let kind = match schedule {
                        Some(Schedule::Simple) => ScheduleKind::Simple,
                        Some(Schedule::Theoretical) => ScheduleKind::Theoretical,
                        None => config.threshold.kind,
                    };
                    let c = c.unwrap_or(config.threshold.c[0]);
                    ThresholdSchedule::new(kind, c, dimension)
                        .and_then(|s| s.threshold(radius, data.len() as u64))
                        .map_err(config_error)?
                }
            };
            let estimate = estimate_neighborhood(&data, &center, radius, eps).map_err(runtime)?;
            emit(common.out.as_deref(), &estimate.to_toml())
        }
        Command::Bounds(args) => bounds(args),
        Command::Coupling {
            common,
            model,
            radius,
            burn_in,
            sweeps,
        } => {
            let config = load_config(&common)?;
            let potential = load_potential(&config, &model)?;
            let trace = coupled_truncation_chains(
                &potential,
                radius,
                potential.volume(),
                burn_in,
                sweeps,
                config.master_seed,
            )
            .map_err(runtime)?;
            let mut text = String::new();
            match coupling_bound(&potential, radius) {
                Ok(b) => writeln!(text, "# bound: {:.6e}", b.value).unwrap(),
                Err(e) => writeln!(text, "# bound: NA ({e})").unwrap(),
            }
            writeln!(text, "site,rate,se").unwrap();
            for (k, p) in trace.sites.iter().enumerate() {
                writeln!(
                    text,
                    "\"{p}\",{:.6},{:.6}",
                    trace.rate(k),
                    trace.standard_error(k)
                )
                .unwrap();
            }
            emit(common.out.as_deref(), &text)
        }
        Command::Experiment { common, threads } => {
            let mut config = load_config(&common)?;
            if common.config.is_none() {
                return Err(config_error("experiment needs --config"));
            }
            if threads > 0 {
                config.threads = threads;
            }
            let potential = load_potential(&config, &ModelSource { potential: None })?;
            let result = run_experiment_on(&config, &potential).map_err(runtime)?;
            emit(common.out.as_deref(), &result.to_csv())
        }
    }
}

fn bounds(args: BoundsArgs) -> Outcome<()> {
    let kind = match (args.theorem, args.kind) {
        (Some(3), _) => Kind::Finite,
        (Some(_), _) => Kind::Infinite,
        (None, Some(k)) => k,
        (None, None) => return Err(config_error("give --theorem or --kind")),
    };
    let value = match kind {
        Kind::Bernstein => bernstein(
            required(args.n, "n")?,
            required(args.eps, "eps")?,
            required(args.v, "v")?,
            args.b,
        ),
        Kind::Finite => misid_bound_finite(
            required(args.n, "n")?,
            required(args.eps, "eps")?,
            required(args.v, "v")?,
            required(args.radius, "L")?,
            required(args.d, "d")?,
        )
        .map(|r| r.value),
        Kind::Infinite => misid_bound_infinite(
            required(args.n, "n")?,
            required(args.eps, "eps")?,
            required(args.v, "v")?,
            required(args.radius, "L")?,
            required(args.d, "d")?,
            required(args.r, "r")?,
            required(args.tail, "tail")?,
        )
        .map(|r| r.value),
        Kind::Coupling => {
            let config = load_config(&args.common)?;
            let potential = load_potential(&config, &args.model)?;
            coupling_bound(&potential, required(args.radius, "L")?).map(|r| r.value)
        }
    }
    .map_err(|e| match e {
        ising_pairs::Error::InvalidArgument(_) => config_error(e),
        other => runtime(other),
    })?;
    emit(args.common.out.as_deref(), &format!("{value:e}\n"))
}
