//! Elementary Fisher matrices, their convex combinations, determinants and
//! the dispersion function.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::design_space::{AmplitudeGrid, FrequencyVector, SubseqSpace};
use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Relative eigenvalue cutoff below which an information matrix is singular.
pub const SINGULAR_CUTOFF: f64 = 1e-12;

/// A finite family of symmetric positive semidefinite information matrices
/// over which designs are convex weights.
pub trait InformationSet {
    /// Number of matrices in the family.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Matrix dimension (number of free parameters).
    fn n_params(&self) -> usize;

    /// `acc += weight * M_k`.
    fn accumulate(&self, k: usize, weight: f64, acc: &mut DMatrix<f64>);

    /// `trace(inv * M_k)` for a symmetric `inv`.
    fn trace_product(&self, k: usize, inv: &DMatrix<f64>) -> f64;

    fn matrix(&self, k: usize) -> DMatrix<f64> {
        let p = self.n_params();
        let mut m = DMatrix::zeros(p, p);
        self.accumulate(k, 1.0, &mut m);
        m
    }
}

/// Per-subsequence information matrices `M_k = g_k g_k^T / sigma^2`, stored
/// through their gradient factors `g_k`.
#[derive(Debug, Clone)]
pub struct ElementaryFisherSet {
    space: SubseqSpace,
    memory: usize,
    n_params: usize,
    noise_variance: f64,
    gradients: Vec<f64>,
}

/// Computes one elementary matrix per length-`length` subsequence.
///
/// When `length` exceeds the model memory only the trailing `memory` samples
/// of each subsequence reach the output.
pub fn build_elementary_set(
    model: &ModelSpec,
    grid: &AmplitudeGrid,
    length: usize,
) -> Result<ElementaryFisherSet> {
    let memory = model.memory();
    if length < memory {
        return Err(Error::domain(format!(
            "subsequence length {length} is shorter than the model memory {memory}"
        )));
    }
    let space = SubseqSpace::new(grid.len(), length)?;
    let n_params = model.n_free();
    let mut gradients = Vec::with_capacity(space.size() * n_params);
    for k in 0..space.size() {
        let values = space.values(k, grid)?;
        gradients.extend(model.gradient(&values[length - memory..])?);
    }
    Ok(ElementaryFisherSet {
        space,
        memory,
        n_params,
        noise_variance: model.noise_variance(),
        gradients,
    })
}

impl ElementaryFisherSet {
    pub fn space(&self) -> SubseqSpace {
        self.space
    }

    pub fn levels(&self) -> usize {
        self.space.levels()
    }

    pub fn length(&self) -> usize {
        self.space.length()
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Gradient factor of subsequence `k`.
    pub fn gradient(&self, k: usize) -> &[f64] {
        &self.gradients[k * self.n_params..(k + 1) * self.n_params]
    }
}

impl InformationSet for ElementaryFisherSet {
    fn len(&self) -> usize {
        self.space.size()
    }

    fn n_params(&self) -> usize {
        self.n_params
    }

    fn accumulate(&self, k: usize, weight: f64, acc: &mut DMatrix<f64>) {
        let g = self.gradient(k);
        let s = weight / self.noise_variance;
        for i in 0..self.n_params {
            let gi = s * g[i];
            for j in 0..self.n_params {
                acc[(i, j)] += gi * g[j];
            }
        }
    }

    fn trace_product(&self, k: usize, inv: &DMatrix<f64>) -> f64 {
        let g = self.gradient(k);
        let mut q = 0.0;
        for i in 0..self.n_params {
            let row: f64 = (0..self.n_params).map(|j| inv[(i, j)] * g[j]).sum();
            q += g[i] * row;
        }
        q / self.noise_variance
    }
}

/// A normalized (per-sample) information matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InformationMatrix {
    matrix: DMatrix<f64>,
}

impl InformationMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::domain("information matrix must be square"));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn eigenvalues(&self) -> Vec<f64> {
        let sym = (&self.matrix + self.matrix.transpose()) * 0.5;
        SymmetricEigen::new(sym).eigenvalues.iter().copied().collect()
    }

    pub fn is_singular(&self) -> bool {
        eigen_singular(&self.eigenvalues())
    }

    /// Natural log of the determinant, `-inf` when singular.
    pub fn log_det(&self) -> f64 {
        let eig = self.eigenvalues();
        if eigen_singular(&eig) {
            f64::NEG_INFINITY
        } else {
            eig.iter().map(|l| l.ln()).sum()
        }
    }

    /// Determinant, `0` when singular.
    pub fn det(&self) -> f64 {
        self.log_det().exp()
    }

    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        if self.is_singular() {
            return Err(Error::Singular(
                "the design does not determine all free parameters; add support points \
                 or regularize the design"
                    .into(),
            ));
        }
        let chol = self.matrix.clone().cholesky().ok_or_else(|| {
            Error::Singular("information matrix is not positive definite".into())
        })?;
        Ok(chol.inverse())
    }
}

fn eigen_singular(eig: &[f64]) -> bool {
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    !(max > 0.0) || min < SINGULAR_CUTOFF * max
}

/// `sum_k weights[k] * M_k`, skipping zero weights.
pub(crate) fn aggregate_weights<S: InformationSet + ?Sized>(
    weights: &[f64],
    set: &S,
) -> DMatrix<f64> {
    let p = set.n_params();
    let mut acc = DMatrix::zeros(p, p);
    for (k, &w) in weights.iter().enumerate() {
        if w != 0.0 {
            set.accumulate(k, w, &mut acc);
        }
    }
    acc
}

/// Information matrix of a design: the convex combination of the family.
pub fn aggregate<S: InformationSet + ?Sized>(
    design: &FrequencyVector,
    set: &S,
) -> Result<InformationMatrix> {
    if design.len() != set.len() {
        return Err(Error::domain(format!(
            "design has {} entries but the information set has {}",
            design.len(),
            set.len()
        )));
    }
    InformationMatrix::new(aggregate_weights(design.weights(), set))
}

pub fn log_det(m: &InformationMatrix) -> f64 {
    m.log_det()
}

/// Dispersion `v(k) = trace(M^-1 M_k)` for every member of the family.
pub fn dispersion<S: InformationSet + ?Sized>(
    m: &InformationMatrix,
    set: &S,
) -> Result<Vec<f64>> {
    if m.dim() != set.n_params() {
        return Err(Error::domain(format!(
            "matrix is {}x{} but the set has {} parameters",
            m.dim(),
            m.dim(),
            set.n_params()
        )));
    }
    let inv = m.inverse()?;
    Ok((0..set.len()).map(|k| set.trace_product(k, &inv)).collect())
}
