mod commands;
mod io;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ebspline::spectral::DesignConvention;

/// Adaptive empirical Bayesian smoothing splines.
#[derive(Parser)]
#[command(name = "ebspline", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit λ̂ and q̂ to a `y` or `x,y` CSV.
    Fit {
        input: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        /// Also write x, y, fitted as CSV.
        #[arg(long)]
        fitted: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Credible ball around the adaptive fit, with optional posterior draws.
    Credible {
        input: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        ball: BallArgs,
        /// Posterior curves to sample.
        #[arg(long, default_value_t = 0)]
        draws: usize,
        /// Destination of the posterior curves (default samples.csv).
        #[arg(long)]
        samples: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Monte-Carlo study from a JSON config; writes report.json and table.csv.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides M from the config.
        #[arg(long = "replicates")]
        replicates: Option<usize>,
        /// Table destination (default table.csv).
        #[arg(long)]
        table: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Coverage of GCV-centred balls against the adaptive credible ball.
    Compare {
        config: PathBuf,
        #[command(flatten)]
        ball: BallArgs,
        #[command(flatten)]
        out: Output,
    },
    /// Oracle λ_q per order for a generator config.
    Oracle {
        config: PathBuf,
        #[command(flatten)]
        grid: QArgs,
        #[command(flatten)]
        out: Output,
    },
    /// Table of κ_q(m, l).
    Kappa {
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 3)]
        m_max: u32,
        #[arg(long, default_value_t = 3)]
        l_max: u32,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    /// Maximise the profile marginal likelihood over the grid.
    Profile,
    /// First sign change of T_q.
    Crossing,
}

#[derive(Args)]
struct QArgs {
    #[arg(long, default_value_t = 1.0)]
    qmin: f64,
    #[arg(long, default_value_t = 6.0)]
    qmax: f64,
    #[arg(long, default_value_t = 1.0)]
    qstep: f64,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    q: QArgs,
    #[arg(long, default_value_t = DesignConvention::Midpoint)]
    design: DesignConvention,
    #[arg(long, value_enum, default_value_t = RuleArg::Profile)]
    rule: RuleArg,
}

#[derive(Args)]
struct BallArgs {
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Inflation factor of the credible ball.
    #[arg(long = "L", default_value_t = 2.0)]
    l: f64,
    #[arg(long, default_value_t = 10_000)]
    mc_draws: usize,
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
}

#[derive(Args)]
struct Output {
    /// Destination of the JSON payload.
    #[arg(long, conflicts_with = "stdout")]
    out: Option<PathBuf>,
    /// Print the JSON payload to stdout instead of writing it.
    #[arg(long)]
    stdout: bool,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Numeric(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl From<ebspline::Error> for CliError {
    fn from(e: ebspline::Error) -> Self {
        match e {
            ebspline::Error::Numerical(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit {
            input,
            grid,
            fitted,
            out,
        } => commands::fit_cmd(&input, &grid, fitted.as_deref(), &out),
        Command::Credible {
            input,
            grid,
            ball,
            draws,
            samples,
            out,
        } => commands::credible_cmd(&input, &grid, &ball, draws, samples.as_deref(), &out),
        Command::Simulate {
            config,
            sigma,
            seed,
            replicates,
            table,
            out,
        } => {
            let o = commands::SimulateOverrides {
                sigma,
                seed,
                replicates,
            };
            commands::simulate_cmd(&config, &o, table.as_deref(), &out)
        }
        Command::Compare { config, ball, out } => commands::compare_cmd(&config, &ball, &out),
        Command::Oracle { config, grid, out } => commands::oracle_cmd(&config, &grid, &out),
        Command::Kappa {
            q,
            m_max,
            l_max,
            out,
        } => commands::kappa_cmd(q, m_max, l_max, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ebspline: {e}");
            ExitCode::from(e.code())
        }
    }
}
