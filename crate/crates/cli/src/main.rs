//! `conjugacy`: command-line front end for conjugacy-core.
//!
//! Exit codes: 0 ok, 1 selftest failure, 2 usage or parse error, 3 domain
//! error, 4 no conjugate exists, 5 bad matrix input.

mod commands;
mod input;
mod output;

use std::io::{self, Write};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use output::Format;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Parse(String),
    Domain(String),
    NonIntegrable(String),
    BadMatrix(String),
    Io(io::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Parse(_) => 2,
            CliError::Domain(_) => 3,
            CliError::NonIntegrable(_) => 4,
            CliError::BadMatrix(_) => 5,
            CliError::Io(_) => 2,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => format!("usage error: {m}"),
            CliError::Parse(m) => format!("parse error: {m}"),
            CliError::Domain(m) => format!("domain error: {m}"),
            CliError::NonIntegrable(m) => format!("no conjugate: {m}"),
            CliError::BadMatrix(m) => format!("bad matrix: {m}"),
            CliError::Io(e) => format!("i/o error: {e}"),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

#[derive(Parser, Debug)]
#[command(name = "conjugacy", version, about = "Conjugate functions and conformal invariants on R^3")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct FnArgs {
    /// Expression in x1, x2, x3
    #[arg(long = "f", value_name = "EXPR", allow_hyphen_values = true)]
    pub f: Option<String>,
    /// Named gallery entry
    #[arg(long, value_name = "NAME")]
    pub gallery: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct PointArgs {
    /// A single point a,b,c
    #[arg(long, value_name = "A,B,C", allow_hyphen_values = true)]
    pub point: Option<String>,
    /// Grid axes as min:max:steps, one spec for all axes or three
    #[arg(long, value_name = "MIN:MAX:STEPS", num_args = 1..=3, allow_hyphen_values = true)]
    pub grid: Vec<String>,
    /// Random domain samples for a gallery entry when no point or grid is given
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct OutArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// The eighteen scalar invariants at each point
    Invariants {
        #[command(flatten)]
        src: FnArgs,
        #[command(flatten)]
        pts: PointArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Direction class, verdict and residuals at each point
    Classify {
        #[command(flatten)]
        src: FnArgs,
        #[command(flatten)]
        pts: PointArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Candidate conjugate directions at each point
    Directions {
        #[command(flatten)]
        src: FnArgs,
        #[command(flatten)]
        pts: PointArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Reconstruct a conjugate g on a grid by path integration
    Reconstruct {
        #[command(flatten)]
        src: FnArgs,
        #[arg(long, value_name = "MIN:MAX:STEPS", num_args = 1..=3, required = true, allow_hyphen_values = true)]
        grid: Vec<String>,
        /// Known conjugate to compare against; also fixes the branch
        #[arg(long, value_name = "EXPR", allow_hyphen_values = true)]
        reference: Option<String>,
        /// Pole fixing the axis field where every direction is admissible
        #[arg(long, value_name = "A,B,C", allow_hyphen_values = true)]
        pole: Option<String>,
        /// Largest acceptable difference from the reference
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Check that f and g are conjugate on sample points
    VerifyPair {
        #[command(flatten)]
        src: FnArgs,
        /// The partner; defaults to the gallery entry's conjugate
        #[arg(long = "g", value_name = "EXPR", allow_hyphen_values = true)]
        g: Option<String>,
        #[command(flatten)]
        pts: PointArgs,
        #[arg(long, default_value_t = conjugacy_core::reconstruct::PAIR_TOL)]
        tol: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Residuals of the relations satisfied by a conjugate pair
    Relations {
        #[command(flatten)]
        src: FnArgs,
        #[arg(long = "g", value_name = "EXPR", allow_hyphen_values = true)]
        g: Option<String>,
        #[command(flatten)]
        pts: PointArgs,
        /// Values of the mixing parameter in f + eps g
        #[arg(long, value_delimiter = ',', default_value = "0.7", allow_hyphen_values = true)]
        eps: Vec<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Canonical form of a Lorentzian form and a skew matrix
    Canon {
        /// JSON file {"h": [[..]], "n": [[..]]}, or - for stdin
        #[arg(long, value_name = "FILE")]
        matrix: String,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Which standard model an X = Y = 0 function is Möbius equivalent to
    ClassifyXyzero {
        #[command(flatten)]
        src: FnArgs,
        /// Centre of the sample cube
        #[arg(long, value_name = "A,B,C", allow_hyphen_values = true)]
        point: Option<String>,
        #[arg(long, default_value_t = 0.1)]
        radius: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Conformal weight test for each invariant under random Möbius maps
    Weights {
        #[command(flatten)]
        src: FnArgs,
        #[command(flatten)]
        pts: PointArgs,
        /// Maps per point
        #[arg(long, default_value_t = 20)]
        maps: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run the identity battery
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Restrict to these suites (repeat or comma-separate)
        #[arg(long, value_delimiter = ',')]
        suite: Vec<String>,
        /// Perturb the coefficients under test; every suite should then fail
        #[arg(long)]
        corrupt: bool,
        /// Random samples per identity
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[command(flatten)]
        out: OutArgs,
    },
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let code = match cli.command {
        Command::Invariants { src, pts, out: o } => commands::invariants(&mut out, &src, &pts, o.format)?,
        Command::Classify { src, pts, out: o } => commands::classify(&mut out, &src, &pts, o.format)?,
        Command::Directions { src, pts, out: o } => commands::directions(&mut out, &src, &pts, o.format)?,
        Command::Reconstruct { src, grid, reference, pole, tol, out: o } => commands::reconstruct(
            &mut out,
            &src,
            &grid,
            reference.as_deref(),
            pole.as_deref(),
            tol,
            o.format,
        )?,
        Command::VerifyPair { src, g, pts, tol, out: o } => {
            commands::verify_pair(&mut out, &src, g.as_deref(), &pts, tol, o.format)?
        }
        Command::Relations { src, g, pts, eps, out: o } => {
            commands::relations(&mut out, &src, g.as_deref(), &pts, &eps, o.format)?
        }
        Command::Canon { matrix, out: o } => commands::canon(&mut out, &matrix, o.format)?,
        Command::ClassifyXyzero { src, point, radius, seed, out: o } => {
            commands::classify_xyzero(&mut out, &src, point.as_deref(), radius, seed, o.format)?
        }
        Command::Weights { src, pts, maps, tol, out: o } => {
            commands::weights(&mut out, &src, &pts, maps, tol, o.format)?
        }
        Command::Selftest { seed, suite, corrupt, samples, out: o } => {
            commands::selftest(&mut out, seed, suite, corrupt, samples, o.format)?
        }
    };
    out.flush()?;
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        // a closed pipe downstream (`| head`) is not an error
        Err(CliError::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("conjugacy: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
