//! `bergmanlab`: run one experiment and write its report as JSON or CSV.
//!
//! Exit status: 0 when every checked invariant holds, 2 when one is violated, 1 on usage
//! or runtime errors.

mod commands;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use bergmanlab::dyadic::Shift;

#[derive(Parser, Debug)]
#[command(name = "bergmanlab", version, about = "Dyadic and analytic experiments on the Bergman projection")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Grid or testing depth (levels of dyadic intervals).
    #[arg(long, global = true)]
    depth: Option<u32>,
    /// Depth of the cell mesh.
    #[arg(long, global = true)]
    mesh_depth: Option<u32>,
    /// Gauss-Legendre order for cell quadrature.
    #[arg(long, global = true)]
    quad_order: Option<usize>,
    /// Quadrature tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

fn parse_shift(s: &str) -> Result<Shift, String> {
    s.parse().map_err(|e: bergmanlab::Error| e.to_string())
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"))).collect()
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the intervals of the shifted dyadic grids.
    Grids {
        /// Grid shift, 0 or 1/3; both grids when absent.
        #[arg(long, value_parser = parse_shift)]
        beta: Option<Shift>,
    },
    /// Compare the Bergman kernel with the dyadic kernels on random pairs.
    KernelCompare {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Check the closed-form kernel identity on random pairs.
    KernelIdentities {
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Testing constants against exact norms on random two-weight instances.
    TwoWeightVerify {
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// B₂ and B∞ constants of random and power weights.
    Bekolle {
        #[arg(long, default_value_t = 50)]
        trials: usize,
        /// Exponents of the power weights.
        #[arg(long, value_parser = parse_list, default_value = "-0.9,-0.6,-0.3,0,0.3,0.6,0.9")]
        alphas: Vec<f64>,
    },
    /// Weighted norms of the dyadic projections for power weights.
    SharpSweep {
        #[arg(long, value_parser = parse_list, default_value = "-0.9,-0.6,-0.3,0,0.3,0.6,0.9")]
        alphas: Vec<f64>,
    },
    /// Sarason quantities of a pair of analytic symbols.
    SarasonPair {
        /// Comma-separated Taylor coefficients, or `quarter-pole`.
        #[arg(long, default_value = "1")]
        f: String,
        #[arg(long, default_value = "1")]
        g: String,
        /// Truncation size of the Toeplitz product.
        #[arg(long, default_value_t = 16)]
        m: usize,
        /// Rings of the sample lattice.
        #[arg(long, default_value_t = 8)]
        levels: u32,
        #[arg(long, default_value_t = 4)]
        angles: usize,
    },
    /// Exact generation points and metrics of the Cantor set.
    StegengaSet {
        #[arg(long, default_value_t = 6)]
        nmax: u32,
        /// Random intervals for the porosity check.
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
    /// The counterexample table for n = 1..nmax.
    Counterexample {
        #[arg(long, default_value_t = 4)]
        nmax: u32,
        /// Trapezoid resolution exponent of the outer symbol.
        #[arg(long, default_value_t = 13)]
        resolution: u32,
        #[arg(long, default_value_t = 10)]
        levels: u32,
        #[arg(long, default_value_t = 4)]
        angles: usize,
        /// Polynomial degree of the δ search space.
        #[arg(long, default_value_t = 8)]
        degree: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Grids { .. } => "grids",
            Command::KernelCompare { .. } => "kernel-compare",
            Command::KernelIdentities { .. } => "kernel-identities",
            Command::TwoWeightVerify { .. } => "two-weight-verify",
            Command::Bekolle { .. } => "bekolle",
            Command::SharpSweep { .. } => "sharp-sweep",
            Command::SarasonPair { .. } => "sarason-pair",
            Command::StegengaSet { .. } => "stegenga-set",
            Command::Counterexample { .. } => "counterexample",
        }
    }
}

/// Effective settings of a run, recorded in every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub depth: Option<u32>,
    pub mesh_depth: Option<u32>,
    pub quad_order: Option<usize>,
    pub tol: Option<f64>,
    pub seed: u64,
    pub format: &'static str,
}

/// A finished report: the JSON document, the CSV table and whether its checks passed.
pub struct Outcome {
    pub passed: bool,
    pub json: String,
    pub csv: String,
}

fn threads_from_env() -> Result<(), String> {
    let Ok(v) = std::env::var("BERGMANLAB_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("BERGMANLAB_THREADS={v:?} is not a thread count"))?;
    if n == 0 {
        return Err("BERGMANLAB_THREADS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn emit(text: &str, out: Option<&PathBuf>) -> io::Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            w.write_all(text.as_bytes())?;
            w.flush()
        }
        None => {
            let mut w = io::stdout().lock();
            w.write_all(text.as_bytes())?;
            w.flush()
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = threads_from_env() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let outcome = match commands::run(&cli.command, &cli.common) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let text = match cli.common.format {
        Format::Json => &outcome.json,
        Format::Csv => &outcome.csv,
    };
    if let Err(e) = emit(text, cli.common.out.as_ref()) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    if outcome.passed {
        ExitCode::SUCCESS
    } else {
        eprintln!("{}: invariant check failed", cli.command.name());
        ExitCode::from(2)
    }
}
