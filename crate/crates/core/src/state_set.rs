//! Available state sets, probability weights over them, and their JSON form.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, DensityMatrix};

/// Tolerance on `sum(p) = 1`.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// Ordered, labeled list of density matrices of a common dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSet {
    labels: Vec<String>,
    elements: Vec<DensityMatrix>,
}

impl StateSet {
    pub fn new(entries: Vec<(String, DensityMatrix)>) -> Result<Self> {
        let Some(first) = entries.first() else {
            return Err(Error::InvalidParameter("state set is empty".into()));
        };
        let dim = first.1.dim();
        if let Some((_, bad)) = entries.iter().find(|(_, s)| s.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        let (labels, elements) = entries.into_iter().unzip();
        Ok(Self { labels, elements })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn elements(&self) -> &[DensityMatrix] {
        &self.elements
    }

    pub fn get(&self, i: usize) -> &DensityMatrix {
        &self.elements[i]
    }

    /// Conjugates every element by `u`.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Self {
        Self {
            labels: self.labels.clone(),
            elements: self.elements.iter().map(|e| e.conjugate_by(u)).collect(),
        }
    }

    /// `sum_i p_i ν_i`.
    pub fn mixture(&self, p: &Weights) -> Result<DensityMatrix> {
        self.check_len(p.len())?;
        let mut acc = ComplexMatrix::zeros(self.dim());
        for (w, e) in p.iter().zip(&self.elements) {
            if w != 0.0 {
                acc = acc.add(&e.matrix().scale(w));
            }
        }
        Ok(DensityMatrix::from_trusted(acc))
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: n,
            });
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: StateSetDoc = serde_json::from_str(s)?;
        doc.into_state_set()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let doc = StateSetDoc {
            schema: Some(1),
            dimension: self.dim(),
            elements: self
                .labels
                .iter()
                .zip(&self.elements)
                .map(|(label, e)| ElementDoc {
                    label: label.clone(),
                    matrix: Some(MatrixDoc::from_matrix(e.matrix())),
                    bloch: None,
                })
                .collect(),
        };
        serde_json::to_value(doc).expect("state set serializes")
    }
}

/// A probability vector: nonnegative entries summing to one.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("empty weight vector".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "weight {bad} is negative or not finite"
            )));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "weights sum to {sum}, not 1"
            )));
        }
        Ok(Self(values))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn vertex(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Reorders so that `out[perm[j]] = self[j]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = vec![0.0; self.0.len()];
        for (j, &w) in self.0.iter().enumerate() {
            out[perm[j]] = w;
        }
        Self(out)
    }
}

impl std::ops::Index<usize> for Weights {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Euclidean projection onto the probability simplex (sort and threshold).
pub fn project_simplex(v: &[f64]) -> Weights {
    assert!(!v.is_empty(), "cannot project an empty vector");
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    let mut out: Vec<f64> = v.iter().map(|&x| (x - theta).max(0.0)).collect();
    // Absorb rounding so the sum invariant holds tightly.
    let sum: f64 = out.iter().sum();
    if sum > 0.0 && sum != 1.0 {
        out.iter_mut().for_each(|x| *x /= sum);
    }
    Weights(out)
}

#[derive(Serialize, Deserialize)]
struct StateSetDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    schema: Option<u32>,
    dimension: usize,
    elements: Vec<ElementDoc>,
}

#[derive(Serialize, Deserialize)]
struct ElementDoc {
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bloch: Option<[f64; 3]>,
}

/// A matrix as `[re, im]` pairs, either nested by row or flat row-major.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixDoc {
    Rows(Vec<Vec<[f64; 2]>>),
    Flat(Vec<[f64; 2]>),
}

impl MatrixDoc {
    fn from_matrix(m: &ComplexMatrix) -> Self {
        let n = m.dim();
        MatrixDoc::Rows(
            (0..n)
                .map(|i| (0..n).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect(),
        )
    }

    fn into_matrix(self) -> Result<ComplexMatrix> {
        let pair = |[re, im]: [f64; 2]| Complex64::new(re, im);
        match self {
            MatrixDoc::Rows(rows) => ComplexMatrix::from_rows(
                rows.into_iter()
                    .map(|r| r.into_iter().map(pair).collect())
                    .collect(),
            ),
            MatrixDoc::Flat(flat) => ComplexMatrix::from_vec(flat.into_iter().map(pair).collect()),
        }
    }
}

fn density_from_parts(
    dimension: usize,
    matrix: Option<MatrixDoc>,
    bloch: Option<[f64; 3]>,
    what: &str,
) -> Result<DensityMatrix> {
    let state = match (matrix, bloch) {
        (Some(m), None) => DensityMatrix::new(m.into_matrix()?)?,
        (None, Some(r)) => {
            if dimension != 2 {
                return Err(Error::InvalidParameter(format!(
                    "{what}: Bloch vectors need dimension 2, document says {dimension}"
                )));
            }
            DensityMatrix::from_bloch(r)?
        }
        _ => {
            return Err(Error::InvalidParameter(format!(
                "{what}: exactly one of `matrix` or `bloch` is required"
            )))
        }
    };
    if state.dim() != dimension {
        return Err(Error::DimensionMismatch {
            expected: dimension,
            found: state.dim(),
        });
    }
    Ok(state)
}

impl StateSetDoc {
    fn into_state_set(self) -> Result<StateSet> {
        if let Some(v) = self.schema {
            if v != 1 {
                return Err(Error::InvalidParameter(format!(
                    "unsupported schema version {v}"
                )));
            }
        }
        let dim = self.dimension;
        let entries = self
            .elements
            .into_iter()
            .map(|e| {
                let what = format!("element `{}`", e.label);
                density_from_parts(dim, e.matrix, e.bloch, &what).map(|s| (e.label, s))
            })
            .collect::<Result<Vec<_>>>()?;
        StateSet::new(entries)
    }
}

#[derive(Deserialize)]
struct TargetDoc {
    #[serde(default)]
    schema: Option<u32>,
    dimension: usize,
    #[serde(default)]
    matrix: Option<MatrixDoc>,
    #[serde(default)]
    bloch: Option<[f64; 3]>,
}

/// Parses a single target state: `{dimension, matrix}` or `{dimension: 2, bloch}`.
pub fn density_from_json_str(s: &str) -> Result<DensityMatrix> {
    let doc: TargetDoc = serde_json::from_str(s)?;
    if let Some(v) = doc.schema {
        if v != 1 {
            return Err(Error::InvalidParameter(format!(
                "unsupported schema version {v}"
            )));
        }
    }
    density_from_parts(doc.dimension, doc.matrix, doc.bloch, "target")
}

pub fn density_from_json_file(path: impl AsRef<Path>) -> Result<DensityMatrix> {
    density_from_json_str(&std::fs::read_to_string(path)?)
}
