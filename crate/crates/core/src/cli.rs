//! The `csa` command line.
//!
//! Exit codes: 0 on success, 1 on invalid input or I/O failure, 2 when the
//! solver reports non-convergence (results are still written).

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use crate::audit::{audit_analytic, audit_point, AuditOptions, Flag};
use crate::error::{Error, Result};
use crate::linalg::{helstrom_probability, DensityMatrix};
use crate::multicopy::{inequality_chain_report, MultiCopyProblem};
use crate::qubit::{
    analytic_b3, b1_solution, canonical_reduce, pauli_b1, pauli_b3, weights_feasible, QubitParams,
};
use crate::solver::{minimize, SolverOptions};
use crate::state_set::{density_from_json_file, StateSet};

/// Analytic and numerical distances may differ by this much and still agree.
pub const AGREEMENT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(
    name = "csa",
    version,
    about = "Optimal convex approximation of quantum states"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closest mixture of a state set to one target state.
    Approx {
        #[command(flatten)]
        target: TargetArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Distance over B3 on a grid of qubit parameters, as CSV.
    Sweep {
        /// Fixed parameter, e.g. `k=2/3` or `phi=pi/3`.
        #[arg(long)]
        fix: String,
        /// Points along the two swept parameters, e.g. `41x41`.
        #[arg(long, default_value = "41x41")]
        grid: String,
        /// Grid search resolution mixed into the oracle; 0 disables it.
        #[arg(long, default_value_t = 10)]
        oracle_resolution: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Compare the closed-form B3 solution with the oracle on a canonical grid.
    Audit {
        /// Points per axis.
        #[arg(long, default_value_t = 21)]
        grid: usize,
        /// Only audit points inside the exact-decomposition region.
        #[arg(long)]
        zero_region_only: bool,
        /// Grid search resolution mixed into the oracle; 0 disables it.
        #[arg(long, default_value_t = 10)]
        oracle_resolution: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Correlated, factorized and product distances for several copies.
    Multicopy {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long, default_value_t = 2)]
        copies: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Debug, Args)]
pub struct TargetArgs {
    #[arg(long, requires_all = ["k", "phi"], conflicts_with = "matrix")]
    pub a: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    /// Radians; accepts forms like `pi/3`, `2pi/3`, `0.5`.
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<String>,
    /// Target density matrix as a JSON document.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// `B1`, `B3`, or a path to a state-set JSON document.
    #[arg(long, default_value = "B3")]
    pub set: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Write the result here instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

impl CommonArgs {
    fn solver_options(&self) -> SolverOptions {
        let mut opts = SolverOptions {
            seed: self.seed,
            ..Default::default()
        };
        if let Some(r) = self.restarts {
            opts.random_restarts = r;
        }
        if let Some(m) = self.max_iterations {
            opts.max_iterations = m;
        }
        opts
    }
}

/// Parses an angle in radians, allowing multiples and fractions of `pi`.
pub fn parse_angle(s: &str) -> Result<f64> {
    let t: String = s
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect::<String>()
        .to_lowercase();
    let bad = || Error::InvalidParameter(format!("cannot parse angle {s:?}"));
    let Some(pos) = t.find("pi") else {
        return parse_number(&t).ok_or_else(bad);
    };
    let coeff = t[..pos].trim_end_matches('*');
    let coeff = match coeff {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => parse_number(c).ok_or_else(bad)?,
    };
    let rest = &t[pos + 2..];
    let divisor = match rest.strip_prefix('/') {
        Some(d) => parse_number(d).filter(|d| *d != 0.0).ok_or_else(bad)?,
        None if rest.is_empty() => 1.0,
        None => return Err(bad()),
    };
    Ok(coeff * PI / divisor)
}

/// Decimal number or simple fraction such as `2/3`.
fn parse_number(s: &str) -> Option<f64> {
    let v = match s.split_once('/') {
        Some((n, d)) => n.parse::<f64>().ok()? / d.parse::<f64>().ok()?,
        None => s.parse().ok()?,
    };
    v.is_finite().then_some(v)
}

/// Either a builtin name or a path to a JSON document.
pub fn load_set(name: &str) -> Result<StateSet> {
    match name.to_ascii_uppercase().as_str() {
        "B1" => Ok(pauli_b1()),
        "B3" => Ok(pauli_b3()),
        _ => StateSet::from_json_file(name),
    }
}

fn qubit_params(t: &TargetArgs) -> Result<Option<QubitParams>> {
    match (t.a, t.k, &t.phi) {
        (Some(a), Some(k), Some(phi)) => Ok(Some(QubitParams::new(a, k, parse_angle(phi)?)?)),
        (None, None, None) => Ok(None),
        _ => Err(Error::InvalidParameter(
            "--a, --k and --phi go together".into(),
        )),
    }
}

fn load_target(t: &TargetArgs) -> Result<(DensityMatrix, Option<QubitParams>)> {
    match (qubit_params(t)?, &t.matrix) {
        (Some(p), None) => Ok((p.density(), Some(p))),
        (None, Some(path)) => Ok((density_from_json_file(path)?, None)),
        _ => Err(Error::InvalidParameter(
            "give exactly one target: --a/--k/--phi or --matrix".into(),
        )),
    }
}

fn emit(output: Option<&Path>, body: &str) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, body)?,
        None => std::io::stdout().write_all(body.as_bytes())?,
    }
    Ok(())
}

/// Human-readable summary: on stdout when the data went to a file, on
/// stderr when stdout carries the data itself.
fn report_line(common: &CommonArgs, line: &str) {
    if common.output.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

/// Runs one parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Approx { target, common } => cmd_approx(&target, &common),
        Command::Sweep {
            fix,
            grid,
            oracle_resolution,
            common,
        } => cmd_sweep(&fix, &grid, oracle_resolution, &common),
        Command::Audit {
            grid,
            zero_region_only,
            oracle_resolution,
            common,
        } => cmd_audit(grid, zero_region_only, oracle_resolution, &common),
        Command::Multicopy {
            target,
            copies,
            common,
        } => cmd_multicopy(&target, copies, &common),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn cmd_approx(target: &TargetArgs, common: &CommonArgs) -> Result<i32> {
    let (rho, params) = load_target(target)?;
    let set = load_set(&common.set)?;
    let opts = common.solver_options();
    let r = minimize(&rho, &set, &opts)?;
    let sigma = set.mixture(&r.weights)?;
    let mut doc = json!({
        "schema": 1,
        "distance": r.distance,
        "labels": set.labels(),
        "weights": r.weights,
        "helstrom_probability": helstrom_probability(&rho, &sigma)?,
        "converged": r.converged,
        "bound_gap": r.bound_gap,
        "iterations": r.iterations,
        "solver": opts,
    });

    let builtin = common.set.to_ascii_uppercase();
    if let Some(p) = params {
        let analytic = match builtin.as_str() {
            "B1" => {
                let (d, w) = b1_solution(&p);
                Some(json!({
                    "case_label": "b1",
                    "claimed_distance": d,
                    "claimed_weights": w,
                    "weights_feasible": true,
                    "agrees": (d - r.distance).abs() <= AGREEMENT_TOLERANCE,
                }))
            }
            "B3" => {
                let red = canonical_reduce(&p);
                let a = analytic_b3(&red.params)?;
                let w = red.pull_back_raw(&a.claimed_weights);
                Some(json!({
                    "case_label": a.case_label.label(),
                    "claimed_distance": a.claimed_distance,
                    "claimed_weights": w,
                    "weights_feasible": weights_feasible(&w),
                    "agrees": (a.claimed_distance - r.distance).abs() <= AGREEMENT_TOLERANCE,
                }))
            }
            _ => None,
        };
        if let Some(a) = analytic {
            doc["analytic"] = a;
        }
    }

    let body = serde_json::to_string_pretty(&doc)? + "\n";
    emit(common.output.as_deref(), &body)?;
    report_line(
        common,
        &format!("distance {:.9} converged {}", r.distance, r.converged),
    );
    if !r.converged {
        eprintln!("warning: solver did not converge");
        return Ok(2);
    }
    Ok(0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Param {
    A,
    K,
    Phi,
}

impl Param {
    fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(Param::A),
            "k" => Ok(Param::K),
            "phi" => Ok(Param::Phi),
            _ => Err(Error::InvalidParameter(format!("unknown parameter {s:?}"))),
        }
    }

    /// Canonical range swept when the parameter is free.
    fn range(self) -> (f64, f64) {
        match self {
            Param::A => (0.0, 0.5),
            Param::K => (0.0, 1.0),
            Param::Phi => (0.0, FRAC_PI_2),
        }
    }
}

/// Sweep points in row-major order over the two free parameters.
pub fn sweep_points(fix: &str, grid: &str) -> Result<Vec<QubitParams>> {
    let (name, value) = fix
        .split_once('=')
        .ok_or_else(|| Error::InvalidParameter(format!("--fix expects name=value, got {fix:?}")))?;
    let fixed = Param::parse(name)?;
    let value = parse_angle(value)?;
    let (n1, n2) = grid
        .split_once(['x', 'X'])
        .and_then(|(a, b)| {
            Some((
                a.trim().parse::<usize>().ok()?,
                b.trim().parse::<usize>().ok()?,
            ))
        })
        .ok_or_else(|| Error::InvalidParameter(format!("--grid expects NxM, got {grid:?}")))?;
    if n1 < 2 || n2 < 2 {
        return Err(Error::InvalidParameter(
            "grid sizes must be at least 2".into(),
        ));
    }
    let free: Vec<Param> = [Param::A, Param::K, Param::Phi]
        .into_iter()
        .filter(|&p| p != fixed)
        .collect();
    let mut points = Vec::with_capacity(n1 * n2);
    for i in 0..n1 {
        for j in 0..n2 {
            let mut v = [0.0; 3];
            v[fixed as usize] = value;
            let (lo, hi) = free[0].range();
            v[free[0] as usize] = crate::audit::grid_value(lo, hi, i, n1);
            let (lo, hi) = free[1].range();
            v[free[1] as usize] = crate::audit::grid_value(lo, hi, j, n2);
            points.push(QubitParams::new(v[0], v[1], v[2])?);
        }
    }
    Ok(points)
}

pub const CSV_HEADER: &str = "a,phi,k,D_oracle,D_analytic,case_label,p0,p1,p2,p3,p4,p5,flags";

/// CSV rows for the sweep: oracle and analytic distance over B3, the
/// analytic weights for the original labels, and audit flags joined by `|`.
pub fn sweep_csv(points: &[QubitParams], opts: &AuditOptions) -> Result<String> {
    let rows = points
        .par_iter()
        .map(|p| {
            let red = canonical_reduce(p);
            let e = audit_point(&red.params, [0; 3], opts)?;
            let w = red.pull_back_raw(&e.claimed_weights);
            let mut row = String::new();
            write!(
                row,
                "{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{}",
                p.a, p.phi, p.k, e.oracle_distance, e.claimed_distance, e.case_label
            )
            .expect("write to string");
            for x in w {
                write!(row, ",{:.8e}", x).expect("write to string");
            }
            let flags: Vec<&str> = e.flags.iter().map(Flag::name).collect();
            writeln!(row, ",{}", flags.join("|")).expect("write to string");
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    out.extend(rows);
    Ok(out)
}

pub fn cmd_sweep(
    fix: &str,
    grid: &str,
    oracle_resolution: usize,
    common: &CommonArgs,
) -> Result<i32> {
    if !common.set.eq_ignore_ascii_case("B3") {
        return Err(Error::InvalidParameter(
            "sweep is defined over B3 only".into(),
        ));
    }
    let points = sweep_points(fix, grid)?;
    let opts = AuditOptions {
        solver: common.solver_options(),
        oracle_resolution: (oracle_resolution > 0).then_some(oracle_resolution),
        ..Default::default()
    };
    let csv = sweep_csv(&points, &opts)?;
    emit(common.output.as_deref(), &csv)?;
    report_line(common, &format!("{} rows", points.len()));
    Ok(0)
}

pub fn cmd_audit(
    grid: usize,
    zero_region_only: bool,
    oracle_resolution: usize,
    common: &CommonArgs,
) -> Result<i32> {
    if grid < 5 {
        return Err(Error::InvalidParameter(format!("audit grid {grid} < 5")));
    }
    let opts = AuditOptions {
        resolution: grid,
        zero_region_only,
        solver: common.solver_options(),
        oracle_resolution: (oracle_resolution > 0).then_some(oracle_resolution),
    };
    let report = audit_analytic(&opts)?;
    emit(common.output.as_deref(), &(report.to_json_pretty()? + "\n"))?;
    let s = &report.summary;
    let mut summary = format!("points {} flagged {}", s.points, s.flagged_points);
    for (name, count) in &s.flag_counts {
        write!(summary, "\n  {name} {count}").expect("write to string");
    }
    report_line(common, &summary);
    Ok(0)
}

pub fn cmd_multicopy(target: &TargetArgs, copies: usize, common: &CommonArgs) -> Result<i32> {
    let (rho, _) = load_target(target)?;
    let set = load_set(&common.set)?;
    let prob = MultiCopyProblem::new(rho, set, copies)?;
    let report = inequality_chain_report(&prob, &common.solver_options())?;
    let line = format!(
        "d_corr {:.9} d_fact {:.9} d_prod {:.9}",
        report.d_corr, report.d_fact, report.d_prod
    );
    emit(
        common.output.as_deref(),
        &(serde_json::to_string_pretty(&report)? + "\n"),
    )?;
    report_line(common, &line);
    Ok(0)
}

/// Caps the global worker pool at `CSA_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("CSA_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("CSA_THREADS={v:?} is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    }
    Ok(())
}
