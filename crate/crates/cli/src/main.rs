mod bench;
mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use outabs::bounds::{BoundMethods, E1Method, E2Method, DEFAULT_DECAY_TOL, DEFAULT_GAMMA, DEFAULT_VERTEX_CAP};

/// Exit code for runtime failures (bad input files, numerical errors).
const EXIT_ERROR: u8 = 3;
/// Exit code for malformed command lines.
const EXIT_USAGE: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "outabs",
    version,
    about = "Safety verification of linear and periodically switched systems through reduced-order abstractions",
    after_help = "Exit codes: 0 safe, 1 unsafe, 2 indeterminate, 3 error, 4 usage error."
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Seed for every randomized step (witness search, instance generation).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the result here instead of standard output. For `reduce` and
    /// `gen` this is the manifest path; matrices are written next to it.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum E1Arg {
    #[value(name = "norm_bound")]
    NormBound,
    Lyapunov,
    Simulation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum E2Arg {
    Hankel,
    Simulation,
}

#[derive(Debug, Clone, Args)]
pub struct MethodArgs {
    /// Routes for the initial-state error, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [E1Arg::NormBound, E1Arg::Lyapunov, E1Arg::Simulation])]
    pub e1: Vec<E1Arg>,
    /// Routes for the input error, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [E2Arg::Hankel, E2Arg::Simulation])]
    pub e2: Vec<E2Arg>,
    /// Relative bloat applied to simulation-derived components.
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
    /// Most initial-set vertices enumerated before relaxing.
    #[arg(long, default_value_t = DEFAULT_VERTEX_CAP)]
    pub vertex_cap: usize,
    /// Relative decay at which the input-error simulation stops.
    #[arg(long, default_value_t = DEFAULT_DECAY_TOL)]
    pub decay_tol: f64,
}

impl MethodArgs {
    pub fn to_methods(&self) -> BoundMethods {
        BoundMethods {
            e1: self
                .e1
                .iter()
                .map(|m| match m {
                    E1Arg::NormBound => E1Method::NormBound,
                    E1Arg::Lyapunov => E1Method::Lyapunov,
                    E1Arg::Simulation => E1Method::Simulation,
                })
                .collect(),
            e2: self
                .e2
                .iter()
                .map(|m| match m {
                    E2Arg::Hankel => E2Method::Hankel,
                    E2Arg::Simulation => E2Method::Simulation,
                })
                .collect(),
            gamma: self.gamma,
            vertex_cap: self.vertex_cap,
            decay_tol: self.decay_tol,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ReachArgs {
    /// Reach step; min(t_f/200, 0.1/‖A‖₂) when omitted.
    #[arg(long)]
    pub step_h: Option<f64>,
    /// Generators kept per dimension before order reduction.
    #[arg(long, default_value_t = outabs::reach::DEFAULT_ORDER_CAP)]
    pub order_cap: usize,
    /// Candidate runs simulated when searching for a counterexample.
    #[arg(long, default_value_t = outabs::reach::DEFAULT_WITNESS_BUDGET)]
    pub witness_budget: usize,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Manifest of the problem.
    #[arg(long, short)]
    pub input: PathBuf,
    /// First abstraction order; p + 1 when omitted.
    #[arg(long)]
    pub k0: Option<usize>,
    /// Last abstraction order; n when omitted.
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Grow k geometrically instead of by one.
    #[arg(long)]
    pub geometric: bool,
    /// Wall-clock budget in seconds; overrunning gives an indeterminate verdict.
    #[arg(long)]
    pub time_budget: Option<f64>,
    #[command(flatten)]
    pub methods: MethodArgs,
    #[command(flatten)]
    pub reach: ReachArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Balance a model, truncate it and report Hankel singular values.
    Reduce {
        /// Manifest of the problem.
        #[arg(long, short)]
        input: PathBuf,
        /// Abstraction order; p + 1 when omitted.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Output error bounds between a model and its abstraction.
    Bounds {
        /// Manifest of the problem.
        #[arg(long, short)]
        input: PathBuf,
        /// Abstraction order; p + 1 when omitted.
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        methods: MethodArgs,
    },
    /// Restate specifications for an abstraction with per-output error δ.
    TransformSpec {
        /// JSON file holding one specification or a list of them.
        #[arg(long)]
        spec: PathBuf,
        /// Per-output error bound, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        delta: Vec<f64>,
    },
    /// Output reach sets of a (low-order) model checked against its specification.
    Reach {
        /// Manifest of the problem.
        #[arg(long, short)]
        input: PathBuf,
        /// Also write per-step output bounding boxes as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        reach: ReachArgs,
    },
    /// Verify an LTI problem.
    Verify(VerifyArgs),
    /// Verify a periodically switched problem.
    VerifyPss(VerifyArgs),
    /// Error-bound table for the bundled motor system and optional extra models.
    Bench {
        /// Abstraction orders, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [4usize, 5])]
        k: Vec<usize>,
        /// Extra manifests to include; missing files are skipped with a notice.
        #[arg(long)]
        extra: Vec<PathBuf>,
        /// Leave wall-clock times out so reports compare byte for byte.
        #[arg(long)]
        no_timing: bool,
    },
    /// Random stable test instance.
    Gen {
        /// State dimension.
        #[arg(long)]
        n: usize,
        /// Input dimension.
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// Output dimension.
        #[arg(long, default_value_t = 1)]
        p: usize,
        /// Safe-box half-width relative to a proven reach bound.
        #[arg(long, default_value_t = 1.0)]
        spec_scale: f64,
        /// Time horizon.
        #[arg(long, default_value_t = 5.0)]
        t_f: f64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(t) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let g = &cli.global;
    let result = match cli.command {
        Command::Reduce { input, k } => commands::reduce(g, &input, k),
        Command::Bounds { input, k, methods } => commands::bounds(g, &input, k, &methods),
        Command::TransformSpec { spec, delta } => commands::transform_spec(g, &spec, &delta),
        Command::Reach { input, csv, reach } => commands::reach(g, &input, csv.as_deref(), &reach),
        Command::Verify(args) => commands::verify(g, &args, false),
        Command::VerifyPss(args) => commands::verify(g, &args, true),
        Command::Bench { k, extra, no_timing } => commands::bench(g, &k, &extra, no_timing),
        Command::Gen { n, m, p, spec_scale, t_f } => commands::gen(g, n, m, p, spec_scale, t_f),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(commands::CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(commands::CliError::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
