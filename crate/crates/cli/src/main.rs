// `!(a <= b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hamcert_core::bounds::{estimate_ranges, falsify_bounds, FalsifyReport, RangesReport, Witness};
use hamcert_core::certify::{existence_certificate, nonexistence_certificate, sweep, Axis, Certificate, Mode, NonexistenceSetup, SweepSetup};
use hamcert_core::constants::{assemble_cone_constants, ConeConstants, ConstantsReport};
use hamcert_core::problem::{Params, ProblemSpec};
use hamcert_core::solver::{solve_fixed_point, SolveReport};
use hamcert_core::{Error, Result};

const EXIT_NOT_CERTIFIED: u8 = 10;
const EXIT_NO_CONVERGENCE: u8 = 20;
const MEMBERSHIP_SLACK: f64 = 1e-9;

/// Existence and nonexistence certificates for perturbed Hammerstein systems.
#[derive(Debug, Parser)]
#[command(name = "hamcert", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON problem description.
    config: PathBuf,
    /// Override a parameter, e.g. `--param lambda1=0.05` or `--param eta21=0.5`.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Kernel and cone constants.
    Constants {
        #[command(flatten)]
        common: Common,
    },
    /// Existence certificate on the annulus rho1 <= ||u|| <= rho2.
    Certify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_mode)]
        mode: Mode,
        #[arg(long)]
        rho1: f64,
        #[arg(long)]
        rho2: f64,
        /// Component (one-based) for mode Sstar; default tries each.
        #[arg(long)]
        i0: Option<usize>,
    },
    /// Nonexistence certificate on the closed ball of radius rho.
    CertifyNonexistence {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        rho: f64,
        /// One-based components, comma separated; may be empty.
        #[arg(long = "setI", value_parser = parse_set)]
        set_i: ComponentSet,
        #[arg(long = "setJ", value_parser = parse_set)]
        set_j: ComponentSet,
    },
    /// Try to refute the declared bounds by sampling; also prints
    /// non-rigorous empirical ranges.
    Falsify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Damped Picard iteration for a fixed point.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, requires = "rho2")]
        rho1: Option<f64>,
        #[arg(long, requires = "rho1")]
        rho2: Option<f64>,
    },
    /// Classify a parameter grid; writes a CSV table.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `name:min:max:steps`, repeatable.
        #[arg(long = "axis", required = true, value_parser = parse_axis)]
        axes: Vec<Axis>,
        #[arg(long, value_parser = parse_mode, default_value = "Sstar")]
        mode: Mode,
        #[arg(long)]
        rho1: f64,
        #[arg(long)]
        rho2: f64,
        #[arg(long)]
        i0: Option<usize>,
        /// Also evaluate nonexistence on this radius (needs setI/setJ).
        #[arg(long, requires_all = ["set_i", "set_j"])]
        rho: Option<f64>,
        #[arg(long = "setI", value_parser = parse_set, requires = "rho")]
        set_i: Option<ComponentSet>,
        #[arg(long = "setJ", value_parser = parse_set, requires = "rho")]
        set_j: Option<ComponentSet>,
    },
}

#[derive(Debug, Clone)]
struct ComponentSet(Vec<usize>);

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_axis(s: &str) -> std::result::Result<Axis, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_set(s: &str) -> std::result::Result<ComponentSet, String> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| match x.parse::<usize>() {
            Ok(i) if i >= 1 => Ok(i - 1),
            _ => Err(format!("`{x}` is not a one-based component index")),
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(ComponentSet)
}

/// Every report carries the config hash and the parameters it was run with.
#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    config_hash: &'a str,
    params: &'a Params,
    #[serde(flatten)]
    report: T,
}

#[derive(Serialize)]
struct FalsifyOutput {
    falsify: FalsifyReport,
    ranges: RangesReport,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    witness_files: Vec<String>,
}

fn load(common: &Common) -> Result<ProblemSpec> {
    let mut spec = ProblemSpec::load(&common.config)?;
    let mut p = spec.params();
    for kv in &common.params {
        let (name, value) = kv
            .split_once('=')
            .ok_or_else(|| Error::Precondition(format!("--param expects NAME=VALUE, got `{kv}`")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Precondition(format!("--param {name}: `{value}` is not a number")))?;
        p.set(name.trim(), v)?;
    }
    spec.set_params(&p)?;
    Ok(spec)
}

fn constants(spec: &ProblemSpec) -> Result<ConeConstants> {
    assemble_cone_constants(spec, &spec.quadrature(), &spec.optimizer)
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// `report.json` -> `report.<suffix>`.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn verdict_code(cert: &Certificate) -> u8 {
    if cert.certified() {
        0
    } else {
        EXIT_NOT_CERTIFIED
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Constants { common } => {
            let spec = load(&common)?;
            let cc = constants(&spec)?;
            emit(common.out.as_deref(), &ConstantsReport::new(&spec.config_hash, &cc))?;
            Ok(0)
        }
        Command::Certify {
            common,
            mode,
            rho1,
            rho2,
            i0,
        } => {
            let spec = load(&common)?;
            let i0 = i0.map(|i| i.checked_sub(1).ok_or_else(|| Error::Precondition("--i0 is one-based".into()))).transpose()?;
            if !(rho1 < rho2) {
                return Err(Error::Precondition(format!("need rho1 < rho2, got {rho1} and {rho2}")));
            }
            let cc = constants(&spec)?;
            let db1 = spec.bounds_at(rho1)?;
            let db2 = spec.bounds_at(rho2)?;
            let cert = existence_certificate(&spec, &cc, &db1, &db2, mode, i0)?;
            let p = spec.params();
            emit(
                common.out.as_deref(),
                &Tagged {
                    config_hash: &spec.config_hash,
                    params: &p,
                    report: &cert,
                },
            )?;
            Ok(verdict_code(&cert))
        }
        Command::CertifyNonexistence { common, rho, set_i, set_j } => {
            let spec = load(&common)?;
            let cc = constants(&spec)?;
            let db = spec.bounds_at(rho)?;
            let p = spec.params();
            let cert = nonexistence_certificate(&spec, &cc, &db, &set_i.0, &set_j.0, &p)?;
            emit(
                common.out.as_deref(),
                &Tagged {
                    config_hash: &spec.config_hash,
                    params: &p,
                    report: &cert,
                },
            )?;
            Ok(verdict_code(&cert))
        }
        Command::Falsify {
            common,
            rho,
            samples,
            seed,
        } => {
            let spec = load(&common)?;
            let seed = seed.unwrap_or(spec.seed);
            let cc = constants(&spec)?;
            let db = spec.bounds_at(rho)?;
            let falsify = falsify_bounds(&spec, &cc, &db, samples, seed)?;
            let ranges = estimate_ranges(&spec, &cc, rho, samples, seed)?;
            let mut witness_files = Vec::new();
            if let Some(out) = &common.out {
                for (k, v) in falsify.violations.iter().enumerate() {
                    if let Witness::State { state, .. } = &v.witness {
                        let path = sibling(out, &format!("witness{k}.csv"));
                        state.write_csv(File::create(&path)?)?;
                        witness_files.push(path.display().to_string());
                    }
                }
            }
            let code = if falsify.falsified() { EXIT_NOT_CERTIFIED } else { 0 };
            let p = spec.params();
            emit(
                common.out.as_deref(),
                &Tagged {
                    config_hash: &spec.config_hash,
                    params: &p,
                    report: FalsifyOutput {
                        falsify,
                        ranges,
                        witness_files,
                    },
                },
            )?;
            Ok(code)
        }
        Command::Solve { common, rho1, rho2 } => {
            let spec = load(&common)?;
            let cc = constants(&spec)?;
            let mut report: SolveReport =
                solve_fixed_point(&spec, &spec.solver, &spec.quadrature())?.with_membership(&cc, MEMBERSHIP_SLACK);
            if let (Some(r1), Some(r2)) = (rho1, rho2) {
                report = report.with_localization(r1, r2);
            }
            if let Some(out) = &common.out {
                report.state.write_csv(File::create(sibling(out, "csv"))?)?;
            }
            let p = spec.params();
            emit(
                common.out.as_deref(),
                &Tagged {
                    config_hash: &spec.config_hash,
                    params: &p,
                    report: &report,
                },
            )?;
            Ok(if report.converged { 0 } else { EXIT_NO_CONVERGENCE })
        }
        Command::Sweep {
            common,
            axes,
            mode,
            rho1,
            rho2,
            i0,
            rho,
            set_i,
            set_j,
        } => {
            let spec = load(&common)?;
            let cc = constants(&spec)?;
            let i0 = i0.map(|i| i.checked_sub(1).ok_or_else(|| Error::Precondition("--i0 is one-based".into()))).transpose()?;
            let nonexistence = match (rho, set_i, set_j) {
                (Some(rho), Some(i), Some(j)) => Some(NonexistenceSetup {
                    rho,
                    set_i: i.0,
                    set_j: j.0,
                }),
                _ => None,
            };
            let setup = SweepSetup {
                axes,
                mode,
                rho1,
                rho2,
                i0,
                nonexistence,
            };
            let report = sweep(&spec, &cc, &setup)?;
            match &common.out {
                Some(path) => report.write_csv(File::create(path)?)?,
                None => report.write_csv(io::stdout().lock())?,
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
