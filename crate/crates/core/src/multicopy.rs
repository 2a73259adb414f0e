//! Approximating `N` copies of a state: correlated mixtures over the tensor
//! set, products of per-copy mixtures, and the product of single-copy optima.
//!
//! For any target the three distances are ordered
//! `d_corr <= d_fact <= d_prod`, since each feasible set contains the next.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::DensityMatrix;
use crate::solver::{minimize, random_simplex_point, ApproximationResult, SolverOptions};
use crate::state_set::{StateSet, Weights};

/// Largest tensor set [`tensor_set`] will build.
pub const MAX_TENSOR_SET: usize = 4096;
/// Largest number of free weights (copies times set size) in [`factorized_minimize`].
pub const MAX_FACTORIZED_VARIABLES: usize = 24;
/// Random starts of the alternating solver, besides the single-copy optimum.
pub const FACTORIZED_RANDOM_STARTS: usize = 10;
/// Per-copy grid resolution of the exhaustive cross-check.
pub const CROSS_CHECK_RESOLUTION: usize = 50;
/// The cross-check is skipped when the product grid has more points than this.
pub const CROSS_CHECK_BUDGET: usize = 200_000;

const MAX_SWEEPS: usize = 100;
const SWEEP_TOLERANCE: f64 = 1e-12;

/// All ordered `n`-fold tensor products of `set`, in Kronecker order, with
/// concatenated labels.
pub fn tensor_set(set: &StateSet, n: usize) -> Result<StateSet> {
    if n == 0 {
        return Err(Error::InvalidParameter("copies must be at least 1".into()));
    }
    let size = set
        .len()
        .checked_pow(n as u32)
        .filter(|&s| s <= MAX_TENSOR_SET);
    if size.is_none() {
        return Err(Error::Budget(format!(
            "{}^{n} tensor elements exceed {MAX_TENSOR_SET}",
            set.len()
        )));
    }
    let mut entries: Vec<(String, DensityMatrix)> = set
        .labels()
        .iter()
        .cloned()
        .zip(set.elements().iter().cloned())
        .collect();
    for _ in 1..n {
        entries = entries
            .iter()
            .flat_map(|(l, m)| {
                set.labels()
                    .iter()
                    .zip(set.elements())
                    .map(move |(l2, m2)| (format!("{l}{l2}"), m.tensor(m2)))
            })
            .collect();
    }
    StateSet::new(entries)
}

#[derive(Clone, Debug)]
pub struct MultiCopyProblem {
    pub base_state: DensityMatrix,
    pub base_set: StateSet,
    pub copies: usize,
}

impl MultiCopyProblem {
    pub fn new(base_state: DensityMatrix, base_set: StateSet, copies: usize) -> Result<Self> {
        if copies == 0 {
            return Err(Error::InvalidParameter("copies must be at least 1".into()));
        }
        if base_state.dim() != base_set.dim() {
            return Err(Error::DimensionMismatch {
                expected: base_set.dim(),
                found: base_state.dim(),
            });
        }
        Ok(Self {
            base_state,
            base_set,
            copies,
        })
    }

    pub fn target(&self) -> DensityMatrix {
        self.base_state.tensor_power(self.copies)
    }

    /// `||ρ^⊗N - ⊗_j σ_j||_1` with `σ_j` the mixture given by `per_copy[j]`.
    pub fn factorized_objective(&self, per_copy: &[Weights]) -> Result<f64> {
        if per_copy.len() != self.copies {
            return Err(Error::DimensionMismatch {
                expected: self.copies,
                found: per_copy.len(),
            });
        }
        let mut product = self.base_set.mixture(&per_copy[0])?;
        for w in &per_copy[1..] {
            product = product.tensor(&self.base_set.mixture(w)?);
        }
        self.target().difference(&product)?.trace_norm()
    }
}

/// Best mixture of `N`-fold products of set elements: an ordinary convex
/// problem over the tensor set.
pub fn correlated_minimize(
    prob: &MultiCopyProblem,
    opts: &SolverOptions,
) -> Result<ApproximationResult> {
    let set = tensor_set(&prob.base_set, prob.copies)?;
    minimize(&prob.target(), &set, opts)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FactorizedResult {
    pub per_copy_weights: Vec<Weights>,
    pub distance: f64,
    /// Every alternating run reached a fixed point and every inner solve converged.
    pub converged: bool,
    /// Whether the exhaustive grid cross-check ran (it is skipped over budget).
    pub grid_checked: bool,
    /// Best value found on the cross-check grid, if it ran.
    pub grid_distance: Option<f64>,
}

/// Best product `⊗_j (sum_i p^(j)_i ν_i)`.
///
/// The objective is not jointly convex, but it is convex in each copy's
/// weights with the others fixed. Block-coordinate descent runs from the
/// single-copy optimum and from random starts; the best fixed point is then
/// compared with an exhaustive grid when that grid is small enough.
pub fn factorized_minimize(
    prob: &MultiCopyProblem,
    opts: &SolverOptions,
) -> Result<FactorizedResult> {
    let n = prob.base_set.len();
    if prob.copies * n > MAX_FACTORIZED_VARIABLES {
        return Err(Error::Budget(format!(
            "{} copies of {n} weights exceed {MAX_FACTORIZED_VARIABLES} variables",
            prob.copies
        )));
    }

    let single = minimize(&prob.base_state, &prob.base_set, opts)?;
    let mut starts = vec![vec![single.weights.clone(); prob.copies]];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xfac7);
    for _ in 0..FACTORIZED_RANDOM_STARTS {
        starts.push(
            (0..prob.copies)
                .map(|_| Weights::new(random_simplex_point(&mut rng, n)).expect("simplex point"))
                .collect(),
        );
    }

    let runs = starts
        .into_par_iter()
        .map(|start| alternate(prob, start, opts))
        .collect::<Result<Vec<_>>>()?;
    // Strict comparison keeps the earliest start among ties.
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.1 < runs[best].1 {
            best = i;
        }
    }
    let converged = runs.iter().all(|r| r.2);
    let (mut per_copy, mut distance, _) = runs.into_iter().nth(best).expect("at least one start");

    let grid = cross_check(prob)?;
    if let Some((w, d)) = &grid {
        if *d < distance {
            // A grid point beat the fixed point; polish from there.
            let (pw, pd, _) = alternate(prob, w.clone(), opts)?;
            (per_copy, distance) = if pd < *d { (pw, pd) } else { (w.clone(), *d) };
        }
    }

    Ok(FactorizedResult {
        per_copy_weights: per_copy,
        distance,
        converged,
        grid_checked: grid.is_some(),
        grid_distance: grid.map(|g| g.1),
    })
}

/// Cycles through the copies, solving each convex block exactly.
fn alternate(
    prob: &MultiCopyProblem,
    mut w: Vec<Weights>,
    opts: &SolverOptions,
) -> Result<(Vec<Weights>, f64, bool)> {
    let target = prob.target();
    // Each block is convex, so one start per block solve suffices.
    let opts = SolverOptions {
        random_restarts: 0,
        ..opts.clone()
    };
    let mut value = prob.factorized_objective(&w)?;
    let mut converged = true;
    let mut settled = false;
    for _ in 0..MAX_SWEEPS {
        let before = value;
        for j in 0..prob.copies {
            let block = block_set(prob, &w, j)?;
            let r = minimize(&target, &block, &opts)?;
            converged &= r.converged;
            if r.distance < value {
                value = r.distance;
                w[j] = r.weights;
            }
        }
        if before - value <= SWEEP_TOLERANCE {
            settled = true;
            break;
        }
    }
    Ok((w, value, converged && settled))
}

/// Elements `σ_1 ⊗ .. ⊗ ν_i ⊗ .. ⊗ σ_N` with every copy but `j` frozen.
fn block_set(prob: &MultiCopyProblem, w: &[Weights], j: usize) -> Result<StateSet> {
    let mixtures = w
        .iter()
        .map(|wi| prob.base_set.mixture(wi))
        .collect::<Result<Vec<_>>>()?;
    let entries = prob
        .base_set
        .labels()
        .iter()
        .zip(prob.base_set.elements())
        .map(|(label, nu)| {
            let mut m: Option<DensityMatrix> = None;
            for (c, mix) in mixtures.iter().enumerate() {
                let factor = if c == j { nu } else { mix };
                m = Some(match m {
                    None => factor.clone(),
                    Some(acc) => acc.tensor(factor),
                });
            }
            (label.clone(), m.expect("at least one copy"))
        })
        .collect();
    StateSet::new(entries)
}

/// Exhaustive search over products of per-copy grid points, or `None` when
/// the product grid is over budget.
fn cross_check(prob: &MultiCopyProblem) -> Result<Option<(Vec<Weights>, f64)>> {
    let points = simplex_grid(prob.base_set.len(), CROSS_CHECK_RESOLUTION);
    let total = points.len().checked_pow(prob.copies as u32);
    if total.is_none_or(|t| t > CROSS_CHECK_BUDGET) {
        return Ok(None);
    }
    let total = total.expect("checked above");
    let values = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let w: Vec<Weights> = (0..prob.copies)
                .map(|_| {
                    let p = points[idx % points.len()].clone();
                    idx /= points.len();
                    p
                })
                .collect();
            prob.factorized_objective(&w).map(|d| (w, d))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(Vec<Weights>, f64)> = None;
    for (w, d) in values {
        if best.as_ref().is_none_or(|b| d < b.1) {
            best = Some((w, d));
        }
    }
    Ok(best)
}

/// All weight vectors with entries in multiples of `1/resolution`.
fn simplex_grid(n: usize, resolution: usize) -> Vec<Weights> {
    fn fill(n: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == n {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in 0..=left {
            prefix.push(c);
            fill(n, left - c, prefix, out);
            prefix.pop();
        }
    }
    let mut counts = Vec::new();
    fill(n, resolution, &mut Vec::new(), &mut counts);
    counts
        .into_iter()
        .map(|c| {
            Weights::new(c.iter().map(|&x| x as f64 / resolution as f64).collect())
                .expect("grid point on simplex")
        })
        .collect()
}

/// `||ρ^⊗N - σ^⊗N||_1` for the single-copy optimum `σ`; no optimization at
/// the `N`-copy level.
pub fn product_of_single_opt(prob: &MultiCopyProblem, opts: &SolverOptions) -> Result<f64> {
    let single = minimize(&prob.base_state, &prob.base_set, opts)?;
    let sigma = prob.base_set.mixture(&single.weights)?;
    prob.target()
        .difference(&sigma.tensor_power(prob.copies))?
        .trace_norm()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceFlags {
    pub correlated: bool,
    pub factorized: bool,
    pub factorized_grid_checked: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainReport {
    pub schema: u32,
    pub copies: usize,
    pub d_corr: f64,
    pub d_fact: f64,
    pub d_prod: f64,
    pub labels_corr: Vec<String>,
    pub weights_corr: Weights,
    pub per_copy_weights: Vec<Weights>,
    pub convergence: ConvergenceFlags,
}

impl ChainReport {
    /// `d_corr <= d_fact <= d_prod` up to `slack`.
    pub fn ordered(&self, slack: f64) -> bool {
        self.d_corr <= self.d_fact + slack && self.d_fact <= self.d_prod + slack
    }
}

/// The three distances of the chain `d_corr <= d_fact <= d_prod`.
pub fn inequality_chain_report(
    prob: &MultiCopyProblem,
    opts: &SolverOptions,
) -> Result<ChainReport> {
    let corr = correlated_minimize(prob, opts)?;
    let fact = factorized_minimize(prob, opts)?;
    let d_prod = product_of_single_opt(prob, opts)?;
    Ok(ChainReport {
        schema: 1,
        copies: prob.copies,
        d_corr: corr.distance,
        d_fact: fact.distance,
        d_prod,
        labels_corr: tensor_set(&prob.base_set, prob.copies)?.labels().to_vec(),
        weights_corr: corr.weights,
        per_copy_weights: fact.per_copy_weights,
        convergence: ConvergenceFlags {
            correlated: corr.converged,
            factorized: fact.converged,
            factorized_grid_checked: fact.grid_checked,
        },
    })
}
