//! Checks the closed-form B3 solution against numerical optima.
//!
//! Every point of a canonical `(a, k, φ)` grid gets the closed-form answer,
//! the distance its weights actually achieve, and an oracle distance. Flags
//! record where the formulas break down; they are findings, not errors.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubit::{analytic_b3, pauli_b3, weights_feasible, zero_distance_condition, QubitParams};
use crate::solver::{grid_oracle, minimize, ConvexProblem, SolverOptions};

/// Claimed and achieved distance may differ by this much before a point is
/// flagged as internally inconsistent.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-6;
/// Achieved distance may exceed the oracle by this much before a point is
/// flagged as suboptimal.
pub const OPTIMALITY_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    WeightInfeasible,
    InternallyInconsistent,
    Suboptimal,
    /// The same three checks for the cos φ-inside-the-root reading of the
    /// two-state cases.
    RadicalReadingInfeasible,
    RadicalReadingInconsistent,
    RadicalReadingSuboptimal,
}

impl Flag {
    pub const ALL: [Flag; 6] = [
        Flag::WeightInfeasible,
        Flag::InternallyInconsistent,
        Flag::Suboptimal,
        Flag::RadicalReadingInfeasible,
        Flag::RadicalReadingInconsistent,
        Flag::RadicalReadingSuboptimal,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Flag::WeightInfeasible => "weight_infeasible",
            Flag::InternallyInconsistent => "internally_inconsistent",
            Flag::Suboptimal => "suboptimal",
            Flag::RadicalReadingInfeasible => "radical_reading_infeasible",
            Flag::RadicalReadingInconsistent => "radical_reading_inconsistent",
            Flag::RadicalReadingSuboptimal => "radical_reading_suboptimal",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditOptions {
    /// Points per axis; `a` spans `[0, 1/2]`, `k` spans `[0, 1]`, `φ` spans `[0, π/2]`.
    pub resolution: usize,
    /// Skip points outside the exact-decomposition region.
    pub zero_region_only: bool,
    pub solver: SolverOptions,
    /// The oracle is the smaller of the solver result and a grid search at
    /// this resolution; `None` uses the solver alone.
    pub oracle_resolution: Option<usize>,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            resolution: 21,
            zero_region_only: false,
            solver: SolverOptions::default(),
            oracle_resolution: Some(10),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    /// Grid indices `(i_a, i_k, i_φ)`.
    pub index: [usize; 3],
    pub a: f64,
    pub k: f64,
    pub phi: f64,
    pub case_label: String,
    pub claimed_distance: f64,
    pub claimed_weights: Vec<f64>,
    pub achieved_distance: f64,
    pub radical_reading_weights: Option<Vec<f64>>,
    pub radical_reading_distance: Option<f64>,
    pub oracle_distance: f64,
    pub oracle_weights: Vec<f64>,
    pub flags: Vec<Flag>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub points: usize,
    pub flagged_points: usize,
    /// Count per flag name, in [`Flag::ALL`] order.
    pub flag_counts: Vec<(String, usize)>,
    /// Count per case label.
    pub case_counts: Vec<(String, usize)>,
    /// Largest amount by which a feasible claimed distance exceeds the oracle.
    pub max_excess_over_oracle: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema: u32,
    pub options: AuditOptions,
    pub summary: AuditSummary,
    pub entries: Vec<AuditEntry>,
}

impl AuditReport {
    pub fn flagged(&self) -> impl Iterator<Item = &AuditEntry> {
        self.entries.iter().filter(|e| !e.flags.is_empty())
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `i`-th of `n` evenly spaced points on `[lo, hi]`, hitting both ends exactly.
pub(crate) fn grid_value(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    if i + 1 == n {
        hi
    } else {
        lo + (hi - lo) * i as f64 / (n - 1) as f64
    }
}

/// Audits one canonical parameter triple.
pub fn audit_point(p: &QubitParams, index: [usize; 3], opts: &AuditOptions) -> Result<AuditEntry> {
    let set = pauli_b3();
    let rho = p.density();
    let problem = ConvexProblem::new(&rho, &set)?;
    let analytic = analytic_b3(p)?;

    let mut oracle = minimize(&rho, &set, &opts.solver)?;
    if let Some(res) = opts.oracle_resolution {
        let g = grid_oracle(&rho, &set, res)?;
        if g.distance < oracle.distance {
            oracle = g;
        }
    }

    let achieved = problem.value_at(&analytic.claimed_weights)?;
    let mut flags = Vec::new();
    if !weights_feasible(&analytic.claimed_weights) {
        flags.push(Flag::WeightInfeasible);
    }
    if (analytic.claimed_distance - achieved).abs() > CONSISTENCY_TOLERANCE {
        flags.push(Flag::InternallyInconsistent);
    }
    if achieved > oracle.distance + OPTIMALITY_TOLERANCE {
        flags.push(Flag::Suboptimal);
    }

    let radical_distance = match &analytic.radical_reading_weights {
        Some(w) => {
            let d = problem.value_at(w)?;
            if !weights_feasible(w) {
                flags.push(Flag::RadicalReadingInfeasible);
            }
            if (analytic.claimed_distance - d).abs() > CONSISTENCY_TOLERANCE {
                flags.push(Flag::RadicalReadingInconsistent);
            }
            if d > oracle.distance + OPTIMALITY_TOLERANCE {
                flags.push(Flag::RadicalReadingSuboptimal);
            }
            Some(d)
        }
        None => None,
    };

    Ok(AuditEntry {
        index,
        a: p.a,
        k: p.k,
        phi: p.phi,
        case_label: analytic.case_label.label().to_string(),
        claimed_distance: analytic.claimed_distance,
        claimed_weights: analytic.claimed_weights,
        achieved_distance: achieved,
        radical_reading_weights: analytic.radical_reading_weights,
        radical_reading_distance: radical_distance,
        oracle_distance: oracle.distance,
        oracle_weights: oracle.weights.into_vec(),
        flags,
    })
}

/// Runs the audit over the canonical grid. Points are evaluated in parallel
/// and reported in grid order, so the report does not depend on scheduling.
pub fn audit_analytic(opts: &AuditOptions) -> Result<AuditReport> {
    let n = opts.resolution;
    if n < 2 {
        return Err(Error::InvalidParameter(format!("audit resolution {n} < 2")));
    }
    let mut points = Vec::new();
    for ia in 0..n {
        for ik in 0..n {
            for ip in 0..n {
                let p = QubitParams::new(
                    grid_value(0.0, 0.5, ia, n),
                    grid_value(0.0, 1.0, ik, n),
                    grid_value(0.0, FRAC_PI_2, ip, n),
                )?;
                if opts.zero_region_only && !zero_distance_condition(&p) {
                    continue;
                }
                points.push((p, [ia, ik, ip]));
            }
        }
    }

    let entries = points
        .par_iter()
        .map(|(p, idx)| audit_point(p, *idx, opts))
        .collect::<Result<Vec<_>>>()?;

    Ok(AuditReport {
        schema: 1,
        options: opts.clone(),
        summary: summarize(&entries),
        entries,
    })
}

fn summarize(entries: &[AuditEntry]) -> AuditSummary {
    let flag_counts = Flag::ALL
        .iter()
        .map(|f| {
            (
                f.name().to_string(),
                entries.iter().filter(|e| e.flags.contains(f)).count(),
            )
        })
        .collect();
    let case_counts = ["exact", "case_i", "case_ii", "case_iii"]
        .iter()
        .map(|c| {
            (
                c.to_string(),
                entries.iter().filter(|e| e.case_label == *c).count(),
            )
        })
        .collect();
    let max_excess_over_oracle = entries
        .iter()
        .filter(|e| !e.flags.contains(&Flag::WeightInfeasible))
        .map(|e| e.achieved_distance - e.oracle_distance)
        .fold(0.0, f64::max);
    AuditSummary {
        points: entries.len(),
        flagged_points: entries.iter().filter(|e| !e.flags.is_empty()).count(),
        flag_counts,
        case_counts,
        max_excess_over_oracle,
    }
}
