//! Test-only oracles and helpers, independent of the solver code paths.
#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, TAU};

use convex_approx::linalg::{ComplexMatrix, DensityMatrix, HermitianMatrix};
use convex_approx::qubit::QubitParams;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

/// Euclidean distance from `r` to the octahedron `|x| + |y| + |z| <= 1`,
/// by enumerating the closest face, edge or vertex.
///
/// For qubits `||ρ - σ||_1` equals the Bloch-vector distance, and the convex
/// hull of the six Pauli eigenstates is this octahedron, so this is the exact
/// distance over B3.
pub fn octahedron_distance(r: [f64; 3]) -> f64 {
    let r = [r[0].abs(), r[1].abs(), r[2].abs()];
    if r.iter().sum::<f64>() <= 1.0 {
        return 0.0;
    }
    let dist = |q: [f64; 3]| {
        ((r[0] - q[0]).powi(2) + (r[1] - q[1]).powi(2) + (r[2] - q[2]).powi(2)).sqrt()
    };
    let mut best = f64::INFINITY;
    // Face x + y + z = 1.
    let shift = (r.iter().sum::<f64>() - 1.0) / 3.0;
    let face = [r[0] - shift, r[1] - shift, r[2] - shift];
    if face.iter().all(|&c| c >= 0.0) {
        best = best.min(dist(face));
    }
    // Edges between two vertices e_i, e_j.
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let t = ((r[i] - r[j]) + 1.0) / 2.0;
        if (0.0..=1.0).contains(&t) {
            let mut q = [0.0; 3];
            q[i] = t;
            q[j] = 1.0 - t;
            best = best.min(dist(q));
        }
    }
    for i in 0..3 {
        let mut q = [0.0; 3];
        q[i] = 1.0;
        best = best.min(dist(q));
    }
    best
}

/// Distance from `r` to the segment between the poles `(0, 0, ±1)`.
pub fn z_axis_distance(r: [f64; 3]) -> f64 {
    let z = r[2].clamp(-1.0, 1.0);
    (r[0] * r[0] + r[1] * r[1] + (r[2] - z).powi(2)).sqrt()
}

pub fn random_params(rng: &mut impl Rng) -> QubitParams {
    QubitParams::new(
        rng.gen_range(0.0..=1.0),
        rng.gen_range(0.0..=1.0),
        rng.gen_range(0.0..TAU),
    )
    .unwrap()
}

pub fn random_canonical(rng: &mut impl Rng) -> QubitParams {
    QubitParams::new(
        rng.gen_range(0.0..=0.5),
        rng.gen_range(0.0..=1.0),
        rng.gen_range(0.0..=FRAC_PI_2),
    )
    .unwrap()
}

/// Bloch vectors of `|0>, |1>, |+>, |->, |+i>, |-i>`.
pub const PAULI_BLOCH: [[f64; 3]; 6] = [
    [0.0, 0.0, 1.0],
    [0.0, 0.0, -1.0],
    [1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, -1.0, 0.0],
];

/// `||ρ - sum_i w_i ν_i||_1` over B3 for weights summing to one, as a
/// Bloch-vector distance. Weights may be negative.
pub fn b3_weight_distance(r: [f64; 3], w: &[f64]) -> f64 {
    let mut s = [0.0; 3];
    for (wi, v) in w.iter().zip(PAULI_BLOCH) {
        for c in 0..3 {
            s[c] += wi * v[c];
        }
    }
    ((r[0] - s[0]).powi(2) + (r[1] - s[1]).powi(2) + (r[2] - s[2]).powi(2)).sqrt()
}

/// `(sx, sy, sz)` straight from the parametrization.
pub fn bloch(p: &QubitParams) -> [f64; 3] {
    let off = 2.0 * p.k * (p.a * (1.0 - p.a)).sqrt();
    [off * p.phi.cos(), off * p.phi.sin(), 1.0 - 2.0 * p.a]
}

/// Random density matrix `G G† / Tr` with Gaussian `G`.
pub fn random_density(rng: &mut impl Rng, dim: usize) -> DensityMatrix {
    let g = ComplexMatrix::from_fn(dim, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let m = g.matmul(&g.adjoint());
    let tr = m.trace().re;
    DensityMatrix::new(m.scale(1.0 / tr)).unwrap()
}

/// Haar-ish random unitary from the eigenvectors of a random Hermitian matrix.
pub fn random_unitary(rng: &mut impl Rng, dim: usize) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(dim, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let h = HermitianMatrix::new(g.add(&g.adjoint())).unwrap();
    h.eigensystem().unwrap().vectors
}
