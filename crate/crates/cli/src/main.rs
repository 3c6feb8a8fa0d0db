//! `latwce`: worst-case errors of unshifted rank-1 lattice rules in weighted
//! unanchored Sobolev spaces.
//!
//! Exit codes: 0 success, 1 usage or domain error, 2 a verified inequality
//! or acceptance check failed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod output;

#[derive(Parser, Debug)]
#[command(
    name = "latwce",
    version,
    about = "Worst-case errors of unshifted rank-1 lattice rules in weighted unanchored Sobolev spaces"
)]
pub struct Cli {
    /// Worker threads (default: machine parallelism).
    #[arg(long, global = true, env = "LATWCE_THREADS")]
    pub threads: Option<usize>,

    /// Write the result to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

/// Weight specification help shared by several subcommands.
const WEIGHTS_HELP: &str = "Weights γ_u: JSON ({\"type\":\"product\",\"gammas\":[\"1\",\"1/4\"]}, \
{\"type\":\"order\",\"Gammas\":[..]}, {\"type\":\"explicit\",\"d\":2,\"entries\":[{\"u\":[1,2],\"gamma\":\"1/2\"}]}), \
shorthand product:[1,1/4] or order:[..], the presets unit / inverse-square (need --d), or a path to a file holding any of these";

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Lattice nodes x_i = ({i z_1 / n}, ..., {i z_d / n}) as CSV.
    Points {
        #[arg(long)]
        n: u64,
        /// Generating vector z, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        z: Vec<u64>,
        #[arg(long, value_enum, default_value_t = PointFormat::Dec)]
        format: PointFormat,
    },
    /// Squared worst-case error e²(n, z) = (1/n²) Σ_i Σ_k K(x_i, x_k) - 1.
    Wce {
        #[arg(long)]
        n: u64,
        #[arg(long, value_delimiter = ',', required = true)]
        z: Vec<u64>,
        /// Dimension; must match z and the weights when given.
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, help = WEIGHTS_HELP)]
        weights: String,
        /// Exact rational arithmetic (default: f64).
        #[arg(long)]
        exact: bool,
        #[arg(long, value_enum, default_value_t = WceRoute::DoubleSum)]
        method: WceRoute,
    },
    /// Mean squared worst-case error ē²(n) over all z ∈ {1, ..., n-1}^d.
    AvgWce {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, help = WEIGHTS_HELP)]
        weights: String,
        #[arg(long)]
        exact: bool,
        #[arg(long, value_enum, default_value_t = AvgRoute::Factorized)]
        method: AvgRoute,
    },
    /// T_n(κ) = Σ_{q <= (n-1)/2} 1 / (q |r(qκ, n)|) for an odd prime n.
    Tn {
        #[arg(long)]
        n: u64,
        /// A single κ instead of the whole table.
        #[arg(long)]
        kappa: Option<u64>,
        /// Mean, closed-form mean, maximum and the two threshold counts.
        #[arg(long)]
        stats: bool,
        #[arg(long)]
        exact: bool,
        /// CSV `kappa,T` instead of JSON.
        #[arg(long)]
        csv: bool,
    },
    /// Inequality chain ē²(n) <= proposition_rhs <= intermediate_rhs <= final_rhs
    /// for every odd prime n in [n-min, n-max].
    Verify {
        #[arg(long)]
        n_min: u64,
        #[arg(long)]
        n_max: u64,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, help = WEIGHTS_HELP)]
        weights: String,
    },
    /// Generating vector z minimizing e²(n, z).
    Search {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, help = WEIGHTS_HELP)]
        weights: String,
        #[arg(long, value_enum, default_value_t = SearchKind::Cbc)]
        method: SearchKind,
        /// Vectors drawn by the random search.
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Lattice rule Q_{d,n,z}(f) = (1/n) Σ_i f(x_i) for built-in integrands.
    Integrate {
        #[arg(long)]
        n: u64,
        #[arg(long, value_delimiter = ',', required = true)]
        z: Vec<u64>,
        /// CONST, PROD_LINEAR, PROD_CENTERED, PROD_B2 or all.
        #[arg(long, default_value = "all")]
        integrand: String,
        #[arg(long)]
        exact: bool,
    },
    /// Run every verification check and emit a JSON pass/fail report.
    Suite {
        /// Restrict the sweeps to n <= 101.
        #[arg(long)]
        quick: bool,
        /// Print per-check wall-clock timings to stderr.
        #[arg(long)]
        timings: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PointFormat {
    Frac,
    Dec,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum WceRoute {
    DoubleSum,
    Quadrature,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AvgRoute {
    Factorized,
    Exhaustive,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SearchKind {
    Exhaustive,
    Random,
    Cbc,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(commands::Outcome::Pass) => ExitCode::SUCCESS,
        Ok(commands::Outcome::Fail) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
