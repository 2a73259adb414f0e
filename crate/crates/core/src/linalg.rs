//! Dense complex matrices, Hermitian eigendecomposition and the trace norm.
//!
//! Matrices are stored row-major as `Complex64` values. The eigensolver is a
//! cyclic complex Jacobi method, which is plenty for the dimensions used here
//! (at most a few tens).

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Maximum number of full Jacobi sweeps before giving up.
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Off-diagonal Frobenius norm threshold, relative to the full Frobenius norm.
pub const JACOBI_TOLERANCE: f64 = 1e-14;
/// Deviations from Hermiticity above this are rejected; below it they are
/// symmetrized away.
pub const HERMITIAN_REJECT: f64 = 1e-8;
/// Trace and positivity tolerance for density matrices.
pub const DENSITY_TOLERANCE: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Square complex matrix in row-major layout.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Real diagonal matrix.
    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from row-major data of length `dim * dim`.
    pub fn from_vec(data: Vec<Complex64>) -> Result<Self> {
        let len = data.len();
        let dim = (len as f64).sqrt().round() as usize;
        if dim == 0 || dim * dim != len {
            return Err(Error::NotSquare { len });
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::NotSquare {
                len: rows.iter().map(Vec::len).sum(),
            });
        }
        Ok(Self {
            dim,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// Rank-one outer product `|v><v|` (no normalization).
    pub fn outer(v: &[Complex64]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in matmul");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.data[i * n + k];
                if aik == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += aik * rhs.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in add");
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in sub");
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    /// `U A U^dagger`.
    pub fn conjugate_by(&self, u: &Self) -> Self {
        u.matmul(self).matmul(&u.adjoint())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise modulus of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &Self) -> f64 {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `Tr[self * rhs]`.
    pub fn trace_product(&self, rhs: &Self) -> Complex64 {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let n = self.dim;
        let mut acc = ZERO;
        for i in 0..n {
            for k in 0..n {
                acc += self.data[i * n + k] * rhs.data[k * n + i];
            }
        }
        acc
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Kronecker product with `(A⊗B)[i*dimB + k, j*dimB + l] = A[i,j] * B[k,l]`.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (na, nb) = (a.dim, b.dim);
    let n = na * nb;
    let mut out = ComplexMatrix::zeros(n);
    for i in 0..na {
        for j in 0..na {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..nb {
                for l in 0..nb {
                    out.data[(i * nb + k) * n + j * nb + l] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// A Hermitian matrix. Construction symmetrizes small floating-point drift.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        let n = m.dim;
        let mut dev = 0.0f64;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        if !dev.is_finite() || dev > HERMITIAN_REJECT {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self::symmetrized(m))
    }

    /// `(A + A^dagger) / 2` without the deviation check.
    pub(crate) fn symmetrized(mut m: ComplexMatrix) -> Self {
        let n = m.dim;
        for i in 0..n {
            m[(i, i)].im = 0.0;
            for j in (i + 1)..n {
                let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
                m[(i, j)] = avg;
                m[(j, i)] = avg.conj();
            }
        }
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        Self(self.0.sub(&rhs.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    pub fn eigensystem(&self) -> Result<Eigensystem> {
        hermitian_eigensystem(self)
    }

    pub fn trace_norm(&self) -> Result<f64> {
        trace_norm(self)
    }
}

/// A density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(HermitianMatrix);

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::from_hermitian(HermitianMatrix::new(m)?)
    }

    pub fn from_hermitian(h: HermitianMatrix) -> Result<Self> {
        let tr = h.0.trace().re;
        if (tr - 1.0).abs() > DENSITY_TOLERANCE {
            return Err(Error::NotDensity(format!("trace {tr} differs from 1")));
        }
        let eig = hermitian_eigensystem(&h)?;
        let min = eig.values.last().copied().unwrap_or(0.0);
        if min < -DENSITY_TOLERANCE {
            return Err(Error::NotDensity(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self(h))
    }

    /// Pure state `|v><v|`; `v` is normalized first.
    pub fn pure(v: &[Complex64]) -> Result<Self> {
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if v.is_empty() || !norm.is_finite() || norm <= 0.0 {
            return Err(Error::NotDensity("pure state vector has zero norm".into()));
        }
        let unit: Vec<Complex64> = v.iter().map(|z| z / norm).collect();
        Ok(Self(HermitianMatrix::symmetrized(ComplexMatrix::outer(
            &unit,
        ))))
    }

    /// Qubit state `(I + x σx + y σy + z σz) / 2`.
    pub fn from_bloch(r: [f64; 3]) -> Result<Self> {
        let len = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        if !len.is_finite() || len > 1.0 + 1e-12 {
            return Err(Error::NotDensity(format!(
                "Bloch vector length {len} exceeds 1"
            )));
        }
        let [x, y, z] = r;
        let m = ComplexMatrix::from_rows(vec![
            vec![
                Complex64::new((1.0 + z) / 2.0, 0.0),
                Complex64::new(x / 2.0, -y / 2.0),
            ],
            vec![
                Complex64::new(x / 2.0, y / 2.0),
                Complex64::new((1.0 - z) / 2.0, 0.0),
            ],
        ])?;
        Ok(Self(HermitianMatrix::symmetrized(m)))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(HermitianMatrix::symmetrized(
            ComplexMatrix::identity(dim).scale(1.0 / dim as f64),
        ))
    }

    /// Trusted constructor for matrices that are density matrices by
    /// construction (convex mixtures, tensor products of states).
    pub(crate) fn from_trusted(m: ComplexMatrix) -> Self {
        Self(HermitianMatrix::symmetrized(m))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn hermitian(&self) -> &HermitianMatrix {
        &self.0
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0 .0
    }

    /// `self - rhs` as a Hermitian matrix.
    pub fn difference(&self, rhs: &Self) -> Result<HermitianMatrix> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: rhs.dim(),
            });
        }
        Ok(self.0.sub(&rhs.0))
    }

    pub fn tensor(&self, rhs: &Self) -> Self {
        Self::from_trusted(tensor_product(self.matrix(), rhs.matrix()))
    }

    /// `self^{⊗n}` for `n >= 1`.
    pub fn tensor_power(&self, n: usize) -> Self {
        assert!(n >= 1, "tensor power needs at least one copy");
        let mut out = self.clone();
        for _ in 1..n {
            out = out.tensor(self);
        }
        out
    }

    /// `U ρ U^dagger`.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Self {
        Self::from_trusted(self.matrix().conjugate_by(u))
    }

    /// `Re Tr[ρ O]`.
    pub fn expectation(&self, op: &ComplexMatrix) -> f64 {
        self.matrix().trace_product(op).re
    }
}

/// Eigenvalues in descending order with the matching unitary of column
/// eigenvectors.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl Eigensystem {
    /// `V diag(f(λ)) V^dagger`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.vectors.dim;
        let w: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        ComplexMatrix::from_fn(n, |i, j| {
            (0..n)
                .filter(|&k| w[k] != 0.0)
                .map(|k| self.vectors[(i, k)] * self.vectors[(j, k)].conj() * w[k])
                .sum()
        })
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply(|l| l)
    }
}

pub fn hermitian_eigensystem(a: &HermitianMatrix) -> Result<Eigensystem> {
    let n = a.dim();
    let mut work = a.0.data.clone();
    let mut vecs = ComplexMatrix::identity(n);
    jacobi(&mut work, n, Some(&mut vecs.data))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| work[j * n + j].re.total_cmp(&work[i * n + i].re));
    let values = order.iter().map(|&i| work[i * n + i].re).collect();
    let vectors = ComplexMatrix::from_fn(n, |r, c| vecs[(r, order[c])]);
    Ok(Eigensystem { values, vectors })
}

/// Eigenvalues only, descending.
pub fn hermitian_eigenvalues(a: &HermitianMatrix) -> Result<Vec<f64>> {
    let n = a.dim();
    let mut work = a.0.data.clone();
    jacobi(&mut work, n, None)?;
    let mut values: Vec<f64> = (0..n).map(|i| work[i * n + i].re).collect();
    values.sort_by(|x, y| y.total_cmp(x));
    Ok(values)
}

/// Sum of absolute eigenvalues.
pub fn trace_norm(a: &HermitianMatrix) -> Result<f64> {
    let m = &a.0;
    if m.dim == 2 {
        return Ok(trace_norm_2x2(m[(0, 0)].re, m[(1, 1)].re, m[(0, 1)]));
    }
    Ok(hermitian_eigenvalues(a)?.iter().map(|l| l.abs()).sum())
}

/// Closed form for `[[p, b], [b*, q]]`: eigenvalues are
/// `(p+q)/2 ± sqrt(((p-q)/2)^2 + |b|^2)`.
#[inline]
pub(crate) fn trace_norm_2x2(p: f64, q: f64, b: Complex64) -> f64 {
    let radius = 2.0 * ((p - q) * 0.5).hypot(b.norm());
    (p + q).abs().max(radius)
}

/// Optimal success probability for telling apart two equiprobable states.
pub fn helstrom_probability(rho0: &DensityMatrix, rho1: &DensityMatrix) -> Result<f64> {
    let diff = rho0.difference(rho1)?;
    Ok(0.5 + 0.25 * trace_norm(&diff)?)
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_fn(2, |i, j| if i != j { ONE } else { ZERO })
}

pub fn pauli_y() -> ComplexMatrix {
    let i = Complex64::new(0.0, 1.0);
    ComplexMatrix::from_vec(vec![ZERO, -i, i, ZERO]).expect("2x2")
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::diag(&[1.0, -1.0])
}

fn off_diagonal_norm(a: &[Complex64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Cyclic complex Jacobi on a Hermitian matrix stored row-major in `a`.
/// On return `a` is diagonal; `v`, when given, accumulates the rotations.
fn jacobi(a: &mut [Complex64], n: usize, mut v: Option<&mut [Complex64]>) -> Result<()> {
    let fro = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if fro == 0.0 || n == 1 {
        return Ok(());
    }
    if !fro.is_finite() {
        return Err(Error::NoConvergence(0));
    }
    let tol = JACOBI_TOLERANCE * fro;

    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(a, n) <= tol {
            return Ok(());
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                // Phase that makes the (p, q) entry real and positive, then a
                // real Jacobi rotation annihilating it.
                let phase = (apq / mag).conj();
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                let theta = (aqq - app) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                let u_pp = Complex64::new(c, 0.0);
                let u_pq = Complex64::new(s, 0.0);
                let u_qp = phase * (-s);
                let u_qq = phase * c;

                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp * u_pp + akq * u_qp;
                    a[k * n + q] = akp * u_pq + akq * u_qq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = u_pp.conj() * apk + u_qp.conj() * aqk;
                    a[q * n + k] = u_pq.conj() * apk + u_qq.conj() * aqk;
                }
                a[p * n + q] = ZERO;
                a[q * n + p] = ZERO;
                a[p * n + p].im = 0.0;
                a[q * n + q].im = 0.0;

                if let Some(v) = v.as_deref_mut() {
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = vkp * u_pp + vkq * u_qp;
                        v[k * n + q] = vkp * u_pq + vkq * u_qq;
                    }
                }
            }
        }
    }
    if off_diagonal_norm(a, n) <= tol {
        Ok(())
    } else {
        Err(Error::NoConvergence(JACOBI_MAX_SWEEPS))
    }
}
