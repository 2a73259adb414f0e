//! Closed-form results for qubit targets over Pauli eigenstates.
//!
//! A qubit state is parametrized as
//!
//! ```text
//! ρ(a, k, φ) = [[1 - a,               k sqrt(a(1-a)) e^{-iφ}],
//!               [k sqrt(a(1-a)) e^{iφ}, a                   ]]
//! ```
//!
//! The six Pauli eigenstates are labeled `0..=5`: `|0>`, `|1>`, `|±>` (2, 3)
//! and `(|0> ± i|1>)/sqrt 2` (4, 5). The case formulas returned by
//! [`analytic_b3`] are known to fail in parts of the parameter
//! space; nothing in this crate treats them as ground truth.
//! Use [`crate::audit`] to compare them against the numerical solver.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pauli_x, pauli_y, pauli_z, ComplexMatrix, DensityMatrix};
use crate::state_set::{StateSet, Weights};

/// Slack on range checks and on the zero-distance condition.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitParams {
    pub a: f64,
    pub k: f64,
    pub phi: f64,
}

impl QubitParams {
    /// Validates `a, k ∈ [0, 1]` and wraps `phi` into `[0, 2π)`.
    pub fn new(a: f64, k: f64, phi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::InvalidParameter(format!("a = {a} outside [0, 1]")));
        }
        if !(0.0..=1.0).contains(&k) {
            return Err(Error::InvalidParameter(format!("k = {k} outside [0, 1]")));
        }
        if !phi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "phi = {phi} is not finite"
            )));
        }
        let phi = phi.rem_euclid(TAU);
        Ok(Self {
            a,
            k,
            phi: if phi >= TAU { 0.0 } else { phi },
        })
    }

    /// `sqrt(a(1-a))`.
    fn coherence_scale(&self) -> f64 {
        (self.a * (1.0 - self.a)).sqrt()
    }

    /// Off-diagonal modulus `k sqrt(a(1-a))`.
    fn off_diagonal(&self) -> f64 {
        self.k * self.coherence_scale()
    }

    pub fn is_canonical(&self) -> bool {
        self.a <= 0.5 + BOUNDARY_TOLERANCE && self.phi <= FRAC_PI_2 + BOUNDARY_TOLERANCE
    }

    pub fn density(&self) -> DensityMatrix {
        qubit_from_params(self)
    }
}

pub fn qubit_from_params(p: &QubitParams) -> DensityMatrix {
    let off = p.off_diagonal();
    let m = ComplexMatrix::from_rows(vec![
        vec![
            Complex64::new(1.0 - p.a, 0.0),
            Complex64::from_polar(off, -p.phi),
        ],
        vec![Complex64::from_polar(off, p.phi), Complex64::new(p.a, 0.0)],
    ])
    .expect("2x2");
    DensityMatrix::from_trusted(m)
}

/// `(<σx>, <σy>, <σz>)` in closed form.
pub fn bloch_expectations(p: &QubitParams) -> [f64; 3] {
    let off = p.off_diagonal();
    [
        2.0 * off * p.phi.cos(),
        2.0 * off * p.phi.sin(),
        1.0 - 2.0 * p.a,
    ]
}

/// `(<σx>, <σy>, <σz>)` computed as `Tr[ρ σ]`.
pub fn measured_expectations(rho: &DensityMatrix) -> [f64; 3] {
    [
        rho.expectation(&pauli_x()),
        rho.expectation(&pauli_y()),
        rho.expectation(&pauli_z()),
    ]
}

/// Bloch vectors of the six Pauli eigenstates, by label.
pub const B3_BLOCH: [[f64; 3]; 6] = [
    [0.0, 0.0, 1.0],
    [0.0, 0.0, -1.0],
    [1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, -1.0, 0.0],
];

fn b3_kets() -> [[Complex64; 2]; 6] {
    let r = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let ir = Complex64::new(0.0, FRAC_1_SQRT_2);
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    [[one, zero], [zero, one], [r, r], [r, -r], [r, ir], [r, -ir]]
}

/// `{|0>, |1>}`.
pub fn pauli_b1() -> StateSet {
    let kets = b3_kets();
    StateSet::new(
        (0..2)
            .map(|i| {
                (
                    i.to_string(),
                    DensityMatrix::pure(&kets[i]).expect("unit ket"),
                )
            })
            .collect(),
    )
    .expect("uniform dimension")
}

/// All six Pauli eigenstates, labels `"0"` to `"5"`.
pub fn pauli_b3() -> StateSet {
    StateSet::new(
        b3_kets()
            .iter()
            .enumerate()
            .map(|(i, ket)| (i.to_string(), DensityMatrix::pure(ket).expect("unit ket")))
            .collect(),
    )
    .expect("uniform dimension")
}

/// Optimal approximation over `{|0>, |1>}`: the diagonal part of ρ, at
/// distance `2k sqrt(a(1-a))`.
pub fn b1_solution(p: &QubitParams) -> (f64, Weights) {
    let weights = Weights::new(vec![1.0 - p.a, p.a]).expect("a in [0, 1]");
    (2.0 * p.off_diagonal(), weights)
}

/// Result of mapping arbitrary parameters into `a ∈ [0, 1/2]`, `φ ∈ [0, π/2]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CanonicalReduction {
    pub params: QubitParams,
    /// `permutation[j]` is the label for the original parameters that plays
    /// the role of label `j` for the reduced ones.
    pub permutation: [usize; 6],
    /// Sign flips applied to the Bloch axes `(x, y, z)`.
    pub flips: [bool; 3],
}

impl CanonicalReduction {
    /// Carries B3 weights for the reduced parameters back to the original ones.
    pub fn pull_back(&self, w: &Weights) -> Weights {
        w.permuted(&self.permutation)
    }

    pub fn pull_back_raw(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; w.len()];
        for (j, &x) in w.iter().enumerate() {
            out[self.permutation[j]] = x;
        }
        out
    }
}

/// Reduces to the canonical region using Bloch-axis reflections.
///
/// `a -> 1-a` flips `z` (conjugation by `σx` composed with complex
/// conjugation); `φ -> π-φ` flips `x` and `φ -> -φ` flips `y` (phase gate
/// and complex conjugation). Each flip swaps one antipodal pair of Pauli
/// eigenstates, so the distance over B3 is unchanged.
pub fn canonical_reduce(p: &QubitParams) -> CanonicalReduction {
    let flip_z = p.a > 0.5;
    let a = if flip_z { 1.0 - p.a } else { p.a };
    let (phi, flip_x, flip_y) = if p.phi <= FRAC_PI_2 {
        (p.phi, false, false)
    } else if p.phi <= PI {
        (PI - p.phi, true, false)
    } else if p.phi <= 3.0 * FRAC_PI_2 {
        (p.phi - PI, true, true)
    } else {
        (TAU - p.phi, false, true)
    };
    let mut permutation = [0, 1, 2, 3, 4, 5];
    for (flip, pair) in [(flip_z, 0), (flip_x, 2), (flip_y, 4)] {
        if flip {
            permutation.swap(pair, pair + 1);
        }
    }
    CanonicalReduction {
        params: QubitParams { a, k: p.k, phi },
        permutation,
        flips: [flip_x, flip_y, flip_z],
    }
}

/// Coherence threshold `a / (sqrt(a(1-a)) (cos φ + sin φ))` below which the
/// state is an exact mixture of Pauli eigenstates. Returns 0 at `a = 0` and
/// infinity at `a = 1`.
pub fn k_threshold(a: f64, phi: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::InvalidParameter(format!("a = {a} outside [0, 1]")));
    }
    if !(-BOUNDARY_TOLERANCE..=FRAC_PI_2 + BOUNDARY_TOLERANCE).contains(&phi) {
        return Err(Error::InvalidParameter(format!(
            "phi = {phi} outside [0, π/2]; reduce to the canonical region first"
        )));
    }
    if a == 0.0 {
        return Ok(0.0);
    }
    let scale = (a * (1.0 - a)).sqrt();
    if scale == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(a / (scale * (phi.cos() + phi.sin())))
}

/// `<σx> + <σy> + <σz> <= 1`, evaluated after canonical reduction so that it
/// is the octahedron test `|x| + |y| + |z| <= 1` for any input.
pub fn zero_distance_condition(p: &QubitParams) -> bool {
    let [x, y, z] = bloch_expectations(&canonical_reduce(p).params);
    x + y + z <= 1.0 + BOUNDARY_TOLERANCE
}

fn require_canonical(p: &QubitParams) -> Result<()> {
    if p.is_canonical() {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "parameters (a = {}, phi = {}) are outside the canonical region",
            p.a, p.phi
        )))
    }
}

fn b3_raw_exact(p: &QubitParams) -> Vec<f64> {
    let off = p.off_diagonal();
    let (c, s) = (p.phi.cos(), p.phi.sin());
    vec![
        1.0 - p.a - off * (c + s),
        p.a - off * (c + s),
        2.0 * off * c,
        0.0,
        2.0 * off * s,
        0.0,
    ]
}

/// Four-state exact decomposition, valid when [`zero_distance_condition`]
/// holds in the canonical region.
pub fn exact_decomposition_weights(p: &QubitParams) -> Result<Weights> {
    require_canonical(p)?;
    if !zero_distance_condition(p) {
        return Err(Error::Precondition(format!(
            "k = {} exceeds the exact-decomposition threshold",
            p.k
        )));
    }
    let mut raw = b3_raw_exact(p);
    // At the threshold p1 can come out as -1e-17.
    for w in raw.iter_mut() {
        if *w < 0.0 && *w >= -BOUNDARY_TOLERANCE {
            *w = 0.0;
        }
    }
    Weights::new(raw)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum B3Case {
    Exact,
    CaseI,
    CaseIi,
    CaseIii,
}

impl B3Case {
    pub fn label(&self) -> &'static str {
        match self {
            B3Case::Exact => "exact",
            B3Case::CaseI => "case_i",
            B3Case::CaseIi => "case_ii",
            B3Case::CaseIii => "case_iii",
        }
    }
}

/// Closed-form answer over B3. The weights are kept raw so that
/// negative entries can be reported rather than clipped.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalyticB3Result {
    pub case_label: B3Case,
    pub claimed_distance: f64,
    pub claimed_weights: Vec<f64>,
    /// Cases ii and iii admit a second reading with `cos φ` (resp. `sin φ`)
    /// inside the square root; `claimed_weights` takes it as a factor
    /// outside, and this holds the inside-the-radical reading.
    pub radical_reading_weights: Option<Vec<f64>>,
}

impl AnalyticB3Result {
    pub fn weights_feasible(&self) -> bool {
        weights_feasible(&self.claimed_weights)
    }
}

/// Nonnegative within [`BOUNDARY_TOLERANCE`] and summing to one.
pub fn weights_feasible(w: &[f64]) -> bool {
    w.iter().all(|&x| x >= -BOUNDARY_TOLERANCE)
        && (w.iter().sum::<f64>() - 1.0).abs() <= BOUNDARY_TOLERANCE
}

/// Phase boundary between the three-state case and the two-state cases.
pub fn phase_threshold(a: f64, k: f64) -> f64 {
    let off = k * (a * (1.0 - a)).sqrt();
    let num = (5.0 * off * off - a * a).sqrt() - 2.0 * off;
    2.0 * (num / (a + off)).atan()
}

/// The piecewise closed-form solution over B3 for canonical parameters.
pub fn analytic_b3(p: &QubitParams) -> Result<AnalyticB3Result> {
    require_canonical(p)?;
    if zero_distance_condition(p) {
        let w = exact_decomposition_weights(p)?;
        return Ok(AnalyticB3Result {
            case_label: B3Case::Exact,
            claimed_distance: 0.0,
            claimed_weights: w.into_vec(),
            radical_reading_weights: None,
        });
    }

    let QubitParams { a, k, phi } = *p;
    let scale = p.coherence_scale();
    let off = p.off_diagonal();
    let (c, s) = (phi.cos(), phi.sin());
    let k_th = k_threshold(a, phi)?;
    // a / sqrt(a(1-a)); boundary ties go to case i.
    let k_edge = a / scale;

    let case = if k <= k_edge {
        B3Case::CaseI
    } else {
        let phi_th = phase_threshold(a, k);
        if phi >= phi_th && phi <= FRAC_PI_2 - phi_th {
            B3Case::CaseI
        } else if phi < phi_th {
            B3Case::CaseIi
        } else {
            B3Case::CaseIii
        }
    };

    let result = match case {
        B3Case::CaseI => AnalyticB3Result {
            case_label: case,
            claimed_distance: 2.0 / 3f64.sqrt()
                * (a * (1.0 - a) * (1.0 + (2.0 * phi).sin())).sqrt()
                * (k - k_th),
            claimed_weights: vec![
                1.0 - 4.0 / 3.0 * a - 2.0 / 3.0 * off * (c + s),
                0.0,
                2.0 / 3.0 * (a + off * (2.0 * c - s)),
                0.0,
                2.0 / 3.0 * (a + off * (2.0 * s - c)),
                0.0,
            ],
            radical_reading_weights: None,
        },
        B3Case::CaseIi | B3Case::CaseIii => {
            let trig = if case == B3Case::CaseIi { c } else { s };
            let slot = if case == B3Case::CaseIi { 2 } else { 4 };
            let distance =
                (2.0 * a * (a - 2.0 * off * trig + k * k * (1.0 - a) * (2.0 - trig * trig))).sqrt();
            let two_state = |m: f64| {
                let mut w = vec![0.0; 6];
                w[0] = 1.0 - a - m;
                w[slot] = a + m;
                w
            };
            AnalyticB3Result {
                case_label: case,
                claimed_distance: distance,
                claimed_weights: two_state(off * trig),
                radical_reading_weights: Some(two_state(k * (a * (1.0 - a) * trig).sqrt())),
            }
        }
        B3Case::Exact => unreachable!("handled above"),
    };
    Ok(result)
}
