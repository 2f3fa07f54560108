use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;

/// Shooting solver for r²f'' + f = f³, f(1) = 0, f(∞) = 1.
#[derive(Parser, Debug)]
#[command(name = "ymbvp", version, about)]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Relative tolerance of the integrator
    #[arg(long, global = true, visible_alias = "ctrl-rtol")]
    pub rtol: Option<f64>,

    /// Absolute tolerance of the integrator
    #[arg(long, global = true, visible_alias = "ctrl-atol")]
    pub atol: Option<f64>,

    /// Integration horizon in x = ln r
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub x_max: Option<f64>,

    /// Output prefix; files are written as PREFIX.<kind>.<ext>
    #[arg(long, global = true)]
    pub out: Option<String>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Flat key = value file; command-line flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one shot and write it in both x and r coordinates
    Solve {
        #[arg(long, allow_negative_numbers = true)]
        a: f64,
    },
    /// Decide which event a shot reaches first
    Classify {
        #[arg(long, allow_negative_numbers = true)]
        a: f64,
    },
    /// Bisect for the connecting slope a*
    Astar {
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Starting bracket; seeded automatically when omitted
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
        bracket: Option<Vec<f64>>,
    },
    /// Run the verification suite
    Verify {
        /// Comma-separated subset of checks
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<String>>,
        /// Use this slope instead of the default sample sets
        #[arg(long)]
        a: Option<f64>,
    },
    /// Classify a grid of slopes and record the crossing curve
    Sweep {
        /// Comma list `a,b,c` or range `start:stop:step`
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
    },
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub msg: String,
}

pub const EXIT_VERIFY: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INTEGRATION: u8 = 3;
pub const EXIT_CAP: u8 = 4;

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            msg: msg.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl From<ymbvp::Error> for CliError {
    fn from(e: ymbvp::Error) -> Self {
        use ymbvp::Error as E;
        let code = match &e {
            E::InvalidInput(_) | E::Precondition(_) | E::ProbeOutOfRange(_) | E::NotInSPlus(_) => {
                EXIT_CONFIG
            }
            E::StepLimitExceeded { .. } | E::StiffnessSuspected { .. } | E::SeedFailure { .. } => {
                EXIT_INTEGRATION
            }
            E::XMaxCapExceeded { .. } => EXIT_CAP,
            E::CheckFailed { .. } | E::WindowTooShort { .. } => EXIT_VERIFY,
        };
        Self {
            code,
            msg: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = config::resolve(&cli.common).and_then(|s| match cli.cmd {
        Command::Solve { a } => commands::solve(&s, a),
        Command::Classify { a } => commands::classify(&s, a),
        Command::Astar { tol, bracket } => commands::astar(&s, tol, bracket.map(|b| (b[0], b[1]))),
        Command::Verify { only, a } => commands::verify(&s, only, a),
        Command::Sweep { grid } => commands::sweep(&s, &grid),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
