use std::path::Path;

use latwce::bounds::{verify_chain, BoundReport};
use latwce::lattice::{builtin_integrands, qmc_quadrature, IntegrandKind, TestIntegrand};
use latwce::numeric::{is_odd_prime, odd_primes_in};
use latwce::search::{cbc_search, exhaustive_search, random_search};
use latwce::suite::{run_suite, SuiteConfig};
use latwce::tn::{tn_stats, tn_value};
use latwce::wce::{
    avg_wce_squared_exhaustive, avg_wce_squared_factorized, wce_squared,
    wce_squared_via_quadrature_identity,
};
use latwce::{lattice_points, tn_table, BigRational, GeneratingVector, Mode, Real, Scalar, Weights};
use serde::Serialize;

use crate::output::{csv, emit, json};
use crate::{AvgRoute, Cli, Command, PointFormat, SearchKind, WceRoute};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(latwce::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<latwce::Error> for CliError {
    fn from(e: latwce::Error) -> Self {
        CliError::Lib(e)
    }
}

pub enum Outcome {
    Pass,
    Fail,
}

fn mode(exact: bool) -> Mode {
    if exact {
        Mode::Exact
    } else {
        Mode::Float
    }
}

/// Resolves `--weights` (preset, file or inline) and checks it against `--d`.
pub fn load_weights(spec: &str, d: Option<usize>) -> Result<Weights, CliError> {
    let preset = |f: fn(i64) -> (i64, i64)| -> Result<Weights, CliError> {
        let d = d.ok_or_else(|| CliError::Usage(format!("--weights {spec} needs --d")))?;
        let g: Vec<(i64, i64)> = (1..=d as i64).map(f).collect();
        Ok(Weights::product_ratios(&g, Mode::Exact)?)
    };
    let w = match spec.trim() {
        "unit" => preset(|_| (1, 1))?,
        "inverse-square" => preset(|j| (1, j * j))?,
        text => {
            let path = Path::new(text);
            let body = if path.is_file() {
                std::fs::read_to_string(path).map_err(|e| {
                    CliError::Usage(format!("--weights: cannot read {}: {e}", path.display()))
                })?
            } else {
                text.to_string()
            };
            Weights::from_spec(&body, Mode::Exact)
                .map_err(|e| CliError::Usage(format!("--weights: {e}")))?
        }
    };
    if let Some(d) = d {
        if d != w.d() {
            return Err(CliError::Usage(format!(
                "--d {d} does not match the weights' dimension {}",
                w.d()
            )));
        }
    }
    Ok(w)
}

fn check_z(z: &[u64], d: Option<usize>, w: Option<&Weights>) -> Result<(), CliError> {
    if let Some(d) = d {
        if d != z.len() {
            return Err(CliError::Usage(format!("--d {d} but --z has {} entries", z.len())));
        }
    }
    if let Some(w) = w {
        if w.d() != z.len() {
            return Err(CliError::Usage(format!(
                "--z has {} entries but the weights have d = {}",
                z.len(),
                w.d()
            )));
        }
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Points { n, z, format } => {
            let gv = GeneratingVector::new(*n, z.clone())?;
            let pts = lattice_points(&gv);
            let mut header = vec!["i".to_string()];
            header.extend((1..=gv.d()).map(|j| format!("x{j}")));
            let rows = (0..pts.len()).map(|i| {
                let mut row = vec![i.to_string()];
                row.extend(pts.numerators(i).iter().map(|&a| match format {
                    PointFormat::Frac => reduced_fraction(a, *n),
                    PointFormat::Dec => format!("{}", a as f64 / *n as f64),
                }));
                row
            });
            emit(out, &csv(&header, rows))?;
            Ok(Outcome::Pass)
        }
        Command::Wce { n, z, d, weights, exact, method } => {
            let w = load_weights(weights, *d)?;
            check_z(z, *d, Some(&w))?;
            let gv = GeneratingVector::new(*n, z.clone())?;
            let r = match method {
                WceRoute::DoubleSum => wce_squared(&gv, &w, mode(*exact))?,
                WceRoute::Quadrature => wce_squared_via_quadrature_identity(&gv, &w, mode(*exact))?,
            };
            emit(out, &json(&r)?)?;
            Ok(Outcome::Pass)
        }
        Command::AvgWce { n, d, weights, exact, method } => {
            let w = load_weights(weights, *d)?;
            let r = match method {
                AvgRoute::Factorized => avg_wce_squared_factorized(*n, &w, mode(*exact))?,
                AvgRoute::Exhaustive => avg_wce_squared_exhaustive(*n, &w, mode(*exact))?,
            };
            emit(out, &json(&r)?)?;
            Ok(Outcome::Pass)
        }
        Command::Tn { n, kappa, stats, exact, csv: as_csv } => tn(out, *n, *kappa, *stats, *exact, *as_csv),
        Command::Verify { n_min, n_max, d, weights } => {
            let w = load_weights(weights, *d)?;
            let primes = odd_primes_in(*n_min, *n_max);
            if primes.is_empty() {
                return Err(CliError::Usage(format!("no odd primes in [{n_min}, {n_max}]")));
            }
            let reports = primes
                .iter()
                .map(|&n| verify_chain(n, &w))
                .collect::<latwce::Result<Vec<BoundReport>>>()?;
            let pass = reports.iter().all(|r| r.pass);
            #[derive(Serialize)]
            struct VerifyOutput<'a> {
                n_min: u64,
                n_max: u64,
                d: usize,
                weights: String,
                pass: bool,
                reports: &'a [BoundReport],
            }
            let body = VerifyOutput {
                n_min: *n_min,
                n_max: *n_max,
                d: w.d(),
                weights: w.descriptor(),
                pass,
                reports: &reports,
            };
            emit(out, &json(&body)?)?;
            Ok(if pass { Outcome::Pass } else { Outcome::Fail })
        }
        Command::Search { n, d, weights, method, trials, seed } => {
            let w = load_weights(weights, *d)?;
            let r = match method {
                SearchKind::Exhaustive => exhaustive_search(*n, &w)?,
                SearchKind::Random => random_search(*n, &w, *trials, *seed)?,
                SearchKind::Cbc => cbc_search(*n, &w)?,
            };
            emit(out, &json(&r)?)?;
            Ok(Outcome::Pass)
        }
        Command::Integrate { n, z, integrand, exact } => integrate(out, *n, z, integrand, *exact),
        Command::Suite { quick, timings } => {
            let (report, times) = run_suite(SuiteConfig { quick: *quick });
            emit(out, &json(&report)?)?;
            if *timings {
                for t in &times {
                    eprintln!("check {:>2}: {:.3} s", t.id, t.seconds);
                }
            }
            Ok(if report.pass { Outcome::Pass } else { Outcome::Fail })
        }
    }
}

fn tn(out: Option<&Path>, n: u64, kappa: Option<u64>, stats: bool, exact: bool, as_csv: bool) -> Result<Outcome, CliError> {
    if !is_odd_prime(n) {
        return Err(CliError::Usage(format!("--n {n} is not an odd prime")));
    }
    let m = mode(exact);
    if let Some(k) = kappa {
        let value = match m {
            Mode::Exact => tn_value::<BigRational>(n, k)?.to_scalar(),
            Mode::Float => tn_value::<f64>(n, k)?.to_scalar(),
        };
        let text = if as_csv {
            csv(&["kappa".into(), "T".into()], [vec![k.to_string(), value.to_string()]])
        } else {
            #[derive(Serialize)]
            struct One {
                n: u64,
                kappa: u64,
                mode: Mode,
                value: Scalar,
            }
            json(&One { n, kappa: k, mode: m, value })?
        };
        emit(out, &text)?;
        return Ok(Outcome::Pass);
    }
    let table = tn_table(n, m)?;
    if stats {
        emit(out, &json(&tn_stats(&table)?)?)?;
        return Ok(Outcome::Pass);
    }
    let values: Vec<Scalar> = (1..n).map(|k| table.value(k)).collect::<latwce::Result<_>>()?;
    let text = if as_csv {
        csv(
            &["kappa".into(), "T".into()],
            values.iter().enumerate().map(|(i, v)| vec![(i + 1).to_string(), v.to_string()]),
        )
    } else {
        #[derive(Serialize)]
        struct Table {
            n: u64,
            mode: Mode,
            values: Vec<Scalar>,
        }
        json(&Table { n, mode: m, values })?
    };
    emit(out, &text)?;
    Ok(Outcome::Pass)
}

fn integrate(out: Option<&Path>, n: u64, z: &[u64], name: &str, exact: bool) -> Result<Outcome, CliError> {
    let gv = GeneratingVector::new(n, z.to_vec())?;
    let d = gv.d();
    let integrands: Vec<TestIntegrand> = if name.eq_ignore_ascii_case("all") {
        builtin_integrands(d)
    } else {
        let kind = IntegrandKind::from_name(name)
            .ok_or_else(|| CliError::Usage(format!("unknown --integrand {name:?}")))?;
        vec![TestIntegrand::new(kind, d)]
    };
    let pts = lattice_points(&gv);
    #[derive(Serialize)]
    struct Row {
        integrand: &'static str,
        estimate: Scalar,
        integral: Scalar,
        error: Scalar,
    }
    fn row<R: Real>(f: &TestIntegrand, pts: &latwce::LatticePointSet) -> latwce::Result<Row> {
        let est: R = qmc_quadrature(|x| f.eval(x), pts)?;
        let exact: R = f.exact_integral();
        let err = est.clone() - exact.clone();
        Ok(Row { integrand: f.name(), estimate: est.to_scalar(), integral: exact.to_scalar(), error: err.to_scalar() })
    }
    let rows = integrands
        .iter()
        .map(|f| if exact { row::<BigRational>(f, &pts) } else { row::<f64>(f, &pts) })
        .collect::<latwce::Result<Vec<Row>>>()?;
    #[derive(Serialize)]
    struct Integration {
        n: u64,
        z: Vec<u64>,
        mode: Mode,
        results: Vec<Row>,
    }
    emit(out, &json(&Integration { n, z: z.to_vec(), mode: mode(exact), results: rows })?)?;
    Ok(Outcome::Pass)
}

/// `a/n` in lowest terms, `0` for zero.
fn reduced_fraction(a: u64, n: u64) -> String {
    if a == 0 {
        return "0".into();
    }
    let (mut x, mut y) = (a, n);
    while y != 0 {
        (x, y) = (y, x % y);
    }
    format!("{}/{}", a / x, n / x)
}
