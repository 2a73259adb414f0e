//! Trace-norm distance from a target state to the convex hull of a state set.
//!
//! [`minimize`] runs projected subgradient descent over the probability
//! simplex. [`grid_oracle`] is an independent exhaustive search used as
//! ground truth in audits and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eigensystem, trace_norm, ComplexMatrix, DensityMatrix, HermitianMatrix,
};
use crate::state_set::{project_simplex, StateSet, Weights};

/// Eigenvalues smaller than this in modulus get sign zero in the subgradient.
pub const SIGN_ZERO: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// `c` in the step schedule `c / sqrt(t)`.
    pub step_scale: f64,
    /// Iteration cap per start.
    pub max_iterations: usize,
    /// Random starts in addition to the nearest-vertex start.
    pub random_restarts: usize,
    pub seed: u64,
    /// Stop once distance minus the best dual lower bound falls below this.
    pub gap_tolerance: f64,
    /// Give up on a start after this many iterations without the incumbent
    /// improving by more than `1e-13`.
    pub stall_window: usize,
    /// Number of random feasible perturbations in the final optimality probe.
    pub perturbation_trials: usize,
    pub perturbation_radius: f64,
    /// Largest improvement a probe may find before the result counts as unconverged.
    pub perturbation_slack: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            step_scale: 0.1,
            max_iterations: 20_000,
            random_restarts: 5,
            seed: 0,
            gap_tolerance: 1e-10,
            stall_window: 500,
            perturbation_trials: 20,
            perturbation_radius: 1e-3,
            perturbation_slack: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApproximationResult {
    pub weights: Weights,
    pub distance: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Distance minus the best dual lower bound found.
    pub bound_gap: f64,
}

/// Value, subgradient and dual lower bound at one point.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub value: f64,
    pub subgradient: Vec<f64>,
    pub lower_bound: f64,
    /// `S = sum_j sign(λ_j) P_j` of the residual.
    pub sign: ComplexMatrix,
}

/// `f(p) = ||ρ - sum_i p_i ν_i||_1`, extended affinely to all real `p`.
#[derive(Clone, Debug)]
pub struct ConvexProblem<'a> {
    rho: &'a DensityMatrix,
    set: &'a StateSet,
}

impl<'a> ConvexProblem<'a> {
    pub fn new(rho: &'a DensityMatrix, set: &'a StateSet) -> Result<Self> {
        if rho.dim() != set.dim() {
            return Err(Error::DimensionMismatch {
                expected: set.dim(),
                found: rho.dim(),
            });
        }
        Ok(Self { rho, set })
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    /// `ρ - sum_i p_i ν_i`.
    pub fn residual(&self, p: &[f64]) -> Result<HermitianMatrix> {
        self.set.check_len(p.len())?;
        let mut acc = self.rho.matrix().clone();
        for (&w, e) in p.iter().zip(self.set.elements()) {
            if w != 0.0 {
                acc = acc.sub(&e.matrix().scale(w));
            }
        }
        Ok(HermitianMatrix::symmetrized(acc))
    }

    pub fn value_at(&self, p: &[f64]) -> Result<f64> {
        trace_norm(&self.residual(p)?)
    }

    /// Component `i` is `-Tr[S ν_i]` with `S = sum_j sign(λ_j) P_j` from the
    /// spectral decomposition of the residual.
    pub fn evaluate(&self, p: &[f64]) -> Result<Evaluation> {
        let eig = hermitian_eigensystem(&self.residual(p)?)?;
        let value = eig.values.iter().map(|l| l.abs()).sum();
        let sign = eig.apply(|l| if l.abs() < SIGN_ZERO { 0.0 } else { l.signum() });
        let subgradient: Vec<f64> = self
            .set
            .elements()
            .iter()
            .map(|e| -sign.trace_product(e.matrix()).re)
            .collect();
        let min_g = subgradient.iter().copied().fold(f64::INFINITY, f64::min);
        let lower_bound = (sign.trace_product(self.rho.matrix()).re + min_g).max(0.0);
        Ok(Evaluation {
            value,
            subgradient,
            lower_bound,
            sign,
        })
    }

    /// Weak-duality bound `max(0, Tr[S ρ] - max_i Tr[S ν_i])`, valid on the
    /// whole simplex for any Hermitian `S` with operator norm at most one.
    pub fn dual_bound(&self, witness: &ComplexMatrix) -> f64 {
        let max_overlap = self
            .set
            .elements()
            .iter()
            .map(|e| witness.trace_product(e.matrix()).re)
            .fold(f64::NEG_INFINITY, f64::max);
        (witness.trace_product(self.rho.matrix()).re - max_overlap).max(0.0)
    }

    pub fn subgradient_at(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(p)?.subgradient)
    }
}

/// `||ρ - sum_i p_i ν_i||_1`.
pub fn objective(rho: &DensityMatrix, set: &StateSet, p: &Weights) -> Result<f64> {
    ConvexProblem::new(rho, set)?.value_at(p.as_slice())
}

pub fn subgradient(rho: &DensityMatrix, set: &StateSet, p: &Weights) -> Result<Vec<f64>> {
    ConvexProblem::new(rho, set)?.subgradient_at(p.as_slice())
}

struct Incumbent {
    point: Vec<f64>,
    value: f64,
}

impl Incumbent {
    fn offer(&mut self, point: &[f64], value: f64) {
        if value < self.value {
            self.value = value;
            self.point.clear();
            self.point.extend_from_slice(point);
        }
    }
}

/// Projected subgradient from one start. Returns iterations used.
fn descend(
    problem: &ConvexProblem<'_>,
    start: Vec<f64>,
    opts: &SolverOptions,
    best: &mut Incumbent,
    lower_bound: &mut f64,
) -> Result<usize> {
    let n = problem.len();
    let mut x = start;
    let mut avg = vec![0.0; n];
    let mut avg_weight = 0.0;
    // Step-weighted average of sign operators since the last power of two;
    // a convex combination of contractions is a contraction, so it is a
    // valid dual witness.
    let mut witness = ComplexMatrix::zeros(problem.rho.dim());
    let mut witness_weight = 0.0;
    let mut iterations = 0;
    let mut mark = (0usize, f64::INFINITY);
    // Shrinks the Polyak cap while the incumbent is not improving; without it
    // a loose lower bound can trap the iterates in a cycle of equal steps.
    let mut damping = 1.0;

    for t in 1..=opts.max_iterations {
        iterations = t;
        let e = problem.evaluate(&x)?;
        best.offer(&x, e.value);
        if best.value < mark.1 - 1e-13 {
            mark = (t, best.value);
        } else if t - mark.0 >= opts.stall_window {
            break;
        } else if (t - mark.0) % 16 == 0 {
            damping *= 0.5;
        }
        *lower_bound = lower_bound.max(e.lower_bound);
        let gap = best.value - *lower_bound;
        if gap <= opts.gap_tolerance {
            break;
        }

        let dir = descent_direction(&x, &e.subgradient);
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        if norm <= f64::EPSILON {
            // No feasible descent direction: x satisfies the optimality conditions.
            *lower_bound = lower_bound.max(e.value);
            break;
        }
        // The c/sqrt(t) schedule, capped by the Polyak length toward the
        // certified lower bound.
        let step =
            (opts.step_scale / (t as f64).sqrt()).min(damping * (e.value - *lower_bound) / norm);
        let moved: Vec<f64> = x
            .iter()
            .zip(&dir)
            .map(|(xi, d)| xi + step * d / norm)
            .collect();
        x = project_simplex(&moved).into_vec();

        for (a, xi) in avg.iter_mut().zip(&x) {
            *a += step * xi;
        }
        avg_weight += step;

        if t.is_power_of_two() {
            witness = ComplexMatrix::zeros(witness.dim());
            witness_weight = 0.0;
        }
        witness = witness.add(&e.sign.scale(step));
        witness_weight += step;
        if t % 32 == 0 {
            *lower_bound =
                lower_bound.max(problem.dual_bound(&witness.scale(1.0 / witness_weight)));
        }
        if t % 256 == 0 {
            let mean_point: Vec<f64> = avg.iter().map(|a| a / avg_weight).collect();
            let v = problem.value_at(&mean_point)?;
            best.offer(&mean_point, v);
        }
    }

    if avg_weight > 0.0 {
        let mean_point = project_simplex(&avg.iter().map(|a| a / avg_weight).collect::<Vec<_>>());
        let v = problem.value_at(mean_point.as_slice())?;
        best.offer(mean_point.as_slice(), v);
    }
    Ok(iterations)
}

/// Negative subgradient projected onto the tangent cone of the simplex at
/// `x`: coordinates sitting at zero that would be pushed negative are frozen.
fn descent_direction(x: &[f64], g: &[f64]) -> Vec<f64> {
    let mut free: Vec<bool> = vec![true; x.len()];
    loop {
        let count = free.iter().filter(|&&f| f).count();
        let mean = g
            .iter()
            .zip(&free)
            .filter(|(_, &f)| f)
            .map(|(gi, _)| gi)
            .sum::<f64>()
            / count as f64;
        let mut changed = false;
        for i in 0..x.len() {
            if free[i] && x[i] <= 0.0 && g[i] > mean {
                free[i] = false;
                changed = true;
            }
        }
        if !changed {
            return g
                .iter()
                .zip(&free)
                .map(|(gi, &f)| if f { mean - gi } else { 0.0 })
                .collect();
        }
    }
}

pub(crate) fn random_simplex_point(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / s).collect()
}

/// Checks that no small random feasible move improves the objective by more
/// than `perturbation_slack`.
pub fn perturbation_check(
    problem: &ConvexProblem<'_>,
    p: &[f64],
    opts: &SolverOptions,
) -> Result<bool> {
    let n = problem.len();
    if n == 1 {
        return Ok(true);
    }
    let base = problem.value_at(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed_c0de);
    for _ in 0..opts.perturbation_trials {
        let raw: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mean = raw.iter().sum::<f64>() / n as f64;
        let dir: Vec<f64> = raw.iter().map(|r| r - mean).collect();
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let moved: Vec<f64> = p
            .iter()
            .zip(&dir)
            .map(|(x, d)| x + opts.perturbation_radius * d / norm)
            .collect();
        let q = project_simplex(&moved);
        if problem.value_at(q.as_slice())? < base - opts.perturbation_slack {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Minimizes the trace distance from `rho` to the convex hull of `set`.
///
/// Starts from the best single element and then from seeded random points,
/// stopping early once the duality gap closes. The result is marked
/// unconverged if a random feasible perturbation still improves it.
pub fn minimize(
    rho: &DensityMatrix,
    set: &StateSet,
    opts: &SolverOptions,
) -> Result<ApproximationResult> {
    let problem = ConvexProblem::new(rho, set)?;
    let n = set.len();

    let mut best = Incumbent {
        point: Vec::new(),
        value: f64::INFINITY,
    };
    let mut vertex_start = 0;
    for i in 0..n {
        let v = Weights::vertex(n, i);
        let d = problem.value_at(v.as_slice())?;
        if d < best.value {
            vertex_start = i;
        }
        best.offer(v.as_slice(), d);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut lower_bound = 0.0f64;
    let mut iterations = 0;
    let mut starts = vec![Weights::vertex(n, vertex_start).into_vec()];
    starts.extend((0..opts.random_restarts).map(|_| random_simplex_point(&mut rng, n)));

    for start in starts {
        if best.value - lower_bound <= opts.gap_tolerance {
            break;
        }
        iterations += descend(&problem, start, opts, &mut best, &mut lower_bound)?;
    }

    let weights = project_simplex(&best.point);
    let distance = problem.value_at(weights.as_slice())?;
    let converged = perturbation_check(&problem, weights.as_slice(), opts)?;
    Ok(ApproximationResult {
        weights,
        distance,
        iterations,
        converged,
        bound_gap: (distance - lower_bound).max(0.0),
    })
}

/// Largest grid the oracle will enumerate.
pub const GRID_POINT_BUDGET: f64 = 2.0e8;

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Hermitian matrices as real coordinates so the enumeration can update them
/// with plain float arithmetic.
#[derive(Clone)]
enum Coords {
    /// `[p, q, Re b, Im b]` for `[[p, b], [b*, q]]`.
    Qubit(Vec<[f64; 4]>),
    General(usize, Vec<Vec<f64>>),
}

impl Coords {
    fn from_matrices(ms: &[&ComplexMatrix]) -> Self {
        let dim = ms[0].dim();
        if dim == 2 {
            Coords::Qubit(
                ms.iter()
                    .map(|m| [m[(0, 0)].re, m[(1, 1)].re, m[(0, 1)].re, m[(0, 1)].im])
                    .collect(),
            )
        } else {
            Coords::General(
                dim,
                ms.iter()
                    .map(|m| m.as_slice().iter().flat_map(|z| [z.re, z.im]).collect())
                    .collect(),
            )
        }
    }
}

#[inline]
fn qubit_trace_norm(c: &[f64; 4]) -> f64 {
    let half = 0.5 * (c[0] - c[1]);
    let radius = 2.0 * (half * half + c[2] * c[2] + c[3] * c[3]).sqrt();
    (c[0] + c[1]).abs().max(radius)
}

fn general_trace_norm(dim: usize, c: &[f64]) -> f64 {
    let data = c
        .chunks_exact(2)
        .map(|z| num_complex::Complex64::new(z[0], z[1]))
        .collect();
    let m = ComplexMatrix::from_vec(data).expect("square");
    debug_assert_eq!(m.dim(), dim);
    trace_norm(&HermitianMatrix::symmetrized(m)).unwrap_or(f64::INFINITY)
}

struct GridSearch {
    n: usize,
    resolution: usize,
    h: f64,
    best_value: f64,
    best_counts: Vec<usize>,
    evaluated: usize,
}

impl GridSearch {
    /// Enumerates all compositions of `resolution` into `n` parts.
    fn run_qubit(&mut self, target: [f64; 4], elems: &[[f64; 4]]) {
        let n = self.n;
        let mut counts = vec![0usize; n];
        if n == 1 {
            counts[0] = self.resolution;
            let mut a = target;
            for (ai, e) in a.iter_mut().zip(&elems[0]) {
                *ai -= e;
            }
            self.best_value = qubit_trace_norm(&a);
            self.best_counts = counts;
            self.evaluated = 1;
            return;
        }
        let mut partial = vec![[0.0; 4]; n];
        partial[0] = target;
        self.qubit_level(0, self.resolution, &mut counts, &mut partial, elems);
    }

    fn qubit_level(
        &mut self,
        level: usize,
        remaining: usize,
        counts: &mut Vec<usize>,
        partial: &mut Vec<[f64; 4]>,
        elems: &[[f64; 4]],
    ) {
        let n = self.n;
        let h = self.h;
        if level == n - 2 {
            let last = &elems[n - 1];
            let second = &elems[n - 2];
            let base = partial[level];
            let rem = remaining as f64 * h;
            let start = [
                base[0] - rem * last[0],
                base[1] - rem * last[1],
                base[2] - rem * last[2],
                base[3] - rem * last[3],
            ];
            let delta = [
                h * (second[0] - last[0]),
                h * (second[1] - last[1]),
                h * (second[2] - last[2]),
                h * (second[3] - last[3]),
            ];
            let mut best_j = None;
            for j in 0..=remaining {
                let jf = j as f64;
                let a = [
                    start[0] - jf * delta[0],
                    start[1] - jf * delta[1],
                    start[2] - jf * delta[2],
                    start[3] - jf * delta[3],
                ];
                let v = qubit_trace_norm(&a);
                if v < self.best_value {
                    self.best_value = v;
                    best_j = Some(j);
                }
            }
            self.evaluated += remaining + 1;
            if let Some(j) = best_j {
                counts[n - 2] = j;
                counts[n - 1] = remaining - j;
                self.best_counts.clone_from(counts);
            }
            return;
        }
        let e = elems[level];
        for k in 0..=remaining {
            let kf = k as f64 * h;
            let base = partial[level];
            partial[level + 1] = [
                base[0] - kf * e[0],
                base[1] - kf * e[1],
                base[2] - kf * e[2],
                base[3] - kf * e[3],
            ];
            counts[level] = k;
            self.qubit_level(level + 1, remaining - k, counts, partial, elems);
        }
    }

    fn run_general(&mut self, dim: usize, target: &[f64], elems: &[Vec<f64>]) {
        let n = self.n;
        let mut counts = vec![0usize; n];
        let mut partial = vec![target.to_vec(); n];
        self.general_level(dim, 0, self.resolution, &mut counts, &mut partial, elems);
    }

    fn general_level(
        &mut self,
        dim: usize,
        level: usize,
        remaining: usize,
        counts: &mut Vec<usize>,
        partial: &mut Vec<Vec<f64>>,
        elems: &[Vec<f64>],
    ) {
        let n = self.n;
        if level == n - 1 {
            counts[level] = remaining;
            let w = remaining as f64 * self.h;
            let a: Vec<f64> = partial[level]
                .iter()
                .zip(&elems[level])
                .map(|(p, e)| p - w * e)
                .collect();
            let v = general_trace_norm(dim, &a);
            self.evaluated += 1;
            if v < self.best_value {
                self.best_value = v;
                self.best_counts.clone_from(counts);
            }
            return;
        }
        for k in 0..=remaining {
            let w = k as f64 * self.h;
            let next: Vec<f64> = partial[level]
                .iter()
                .zip(&elems[level])
                .map(|(p, e)| p - w * e)
                .collect();
            partial[level + 1] = next;
            counts[level] = k;
            self.general_level(dim, level + 1, remaining - k, counts, partial, elems);
        }
    }
}

/// Integer offsets summing to zero used for local refinement.
fn refinement_offsets(n: usize) -> Vec<Vec<i32>> {
    if n <= 6 {
        let mut out = Vec::new();
        let total = 5usize.pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let z: Vec<i32> = (0..n)
                .map(|_| {
                    let d = (c % 5) as i32 - 2;
                    c /= 5;
                    d
                })
                .collect();
            if z.iter().sum::<i32>() == 0 && z.iter().any(|&d| d != 0) {
                out.push(z);
            }
        }
        out
    } else {
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    for m in 1..=2 {
                        let mut z = vec![0; n];
                        z[i] = m;
                        z[j] = -m;
                        out.push(z);
                    }
                }
            }
        }
        out
    }
}

/// Number of local refinement rounds after the exhaustive pass.
pub const ORACLE_REFINE_ROUNDS: u32 = 3;

/// Exhaustive search over simplex grid points with spacing `1/resolution`,
/// followed by local refinement on successively halved grids around the
/// incumbent. The returned distance is always achieved by the returned
/// weights, so it is an upper bound on the true minimum.
pub fn grid_oracle(
    rho: &DensityMatrix,
    set: &StateSet,
    resolution: usize,
) -> Result<ApproximationResult> {
    let problem = ConvexProblem::new(rho, set)?;
    let n = set.len();
    if resolution == 0 {
        return Err(Error::InvalidParameter(
            "grid resolution must be positive".into(),
        ));
    }
    if n > 6 && resolution >= 50 {
        return Err(Error::Budget(format!(
            "grid oracle over {n} states is limited to resolution < 50"
        )));
    }
    let points = binomial((resolution + n - 1) as u64, (n - 1) as u64);
    if points > GRID_POINT_BUDGET {
        return Err(Error::Budget(format!(
            "grid oracle would enumerate {points:.3e} points (limit {GRID_POINT_BUDGET:.1e})"
        )));
    }

    let mats: Vec<&ComplexMatrix> = std::iter::once(rho.matrix())
        .chain(set.elements().iter().map(DensityMatrix::matrix))
        .collect();
    let coords = Coords::from_matrices(&mats);
    let mut search = GridSearch {
        n,
        resolution,
        h: 1.0 / resolution as f64,
        best_value: f64::INFINITY,
        best_counts: vec![0; n],
        evaluated: 0,
    };
    match &coords {
        Coords::Qubit(c) => search.run_qubit(c[0], &c[1..]),
        Coords::General(dim, c) => search.run_general(*dim, &c[0], &c[1..]),
    }

    let mut point: Vec<f64> = search
        .best_counts
        .iter()
        .map(|&k| k as f64 / resolution as f64)
        .collect();
    let mut value = problem.value_at(&point)?;
    let mut evaluated = search.evaluated;

    let offsets = refinement_offsets(n);
    for round in 1..=ORACLE_REFINE_ROUNDS {
        let spacing = search.h / f64::from(1u32 << round);
        let centre = point.clone();
        for z in &offsets {
            let cand: Vec<f64> = centre
                .iter()
                .zip(z)
                .map(|(c, &d)| c + spacing * f64::from(d))
                .collect();
            if cand.iter().any(|&c| c < -1e-15) {
                continue;
            }
            let cand: Vec<f64> = cand.into_iter().map(|c| c.max(0.0)).collect();
            let v = problem.value_at(&cand)?;
            evaluated += 1;
            if v < value {
                value = v;
                point = cand;
            }
        }
    }

    let weights = project_simplex(&point);
    let eval = problem.evaluate(weights.as_slice())?;
    Ok(ApproximationResult {
        weights,
        distance: eval.value,
        iterations: evaluated,
        converged: true,
        bound_gap: (eval.value - eval.lower_bound).max(0.0),
    })
}
