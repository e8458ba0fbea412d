//! Non-overlapping symmetric corner designs.
//!
//! There is one basis vector per multiset of `n` level indices. It spreads
//! unit mass uniformly over the distinct orderings of that multiset. The
//! supports partition the subsequence space and every vector is invariant
//! under permutation of tuple positions, which makes any convex combination
//! of them balanced and therefore realizable (given connectivity).

use std::io::Write;

use nalgebra::DMatrix;

use crate::design_space::{FrequencyVector, SubseqSpace};
use crate::error::{Error, Result};
use crate::fisher::{ElementaryFisherSet, InformationSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisVector {
    /// Sorted level indices generating the vector.
    pub multiset: Vec<usize>,
    /// Ascending subsequence indices of the distinct permutations.
    pub support: Vec<usize>,
}

impl BasisVector {
    /// Weight placed on each support index.
    pub fn weight(&self) -> f64 {
        1.0 / self.support.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct SymmetricBasis {
    space: SubseqSpace,
    vectors: Vec<BasisVector>,
}

/// Rearranges `digits` into the next lexicographic permutation; returns
/// `false` after the last one. Repeated digits yield each distinct ordering
/// once.
fn next_permutation(digits: &mut [usize]) -> bool {
    let Some(i) = digits.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = digits.iter().rposition(|&d| d > digits[i]).unwrap();
    digits.swap(i, j);
    digits[i + 1..].reverse();
    true
}

/// Advances a non-decreasing tuple to the next one in lexicographic order.
fn next_multiset(digits: &mut [usize], levels: usize) -> bool {
    let Some(i) = digits.iter().rposition(|&d| d + 1 < levels) else {
        return false;
    };
    let v = digits[i] + 1;
    for d in &mut digits[i..] {
        *d = v;
    }
    true
}

pub fn build_symmetric_basis(levels: usize, length: usize) -> Result<SymmetricBasis> {
    let space = SubseqSpace::new(levels, length)?;
    let mut vectors = Vec::new();
    let mut multiset = vec![0usize; length];
    loop {
        let mut perm = multiset.clone();
        let mut support = Vec::new();
        loop {
            support.push(space.encode(&perm)?);
            if !next_permutation(&mut perm) {
                break;
            }
        }
        support.sort_unstable();
        vectors.push(BasisVector {
            multiset: multiset.clone(),
            support,
        });
        if !next_multiset(&mut multiset, levels) {
            break;
        }
    }
    Ok(SymmetricBasis { space, vectors })
}

impl SymmetricBasis {
    pub fn space(&self) -> SubseqSpace {
        self.space
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[BasisVector] {
        &self.vectors
    }

    /// Basis vector `j` as a dense frequency vector.
    pub fn dense(&self, j: usize) -> FrequencyVector {
        let v = &self.vectors[j];
        let mut w = vec![0.0; self.space.size()];
        for &k in &v.support {
            w[k] = v.weight();
        }
        FrequencyVector::from_raw(w)
    }

    /// Writes one row per vector: one-based multiset label, one-based support
    /// indices and their weights.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["j", "multiset", "support", "weight"])?;
        for (j, v) in self.vectors.iter().enumerate() {
            let label = join(v.multiset.iter().map(|d| d + 1));
            let support = join(v.support.iter().map(|k| k + 1));
            w.write_record([
                (j + 1).to_string(),
                label,
                support,
                format!("{:.12}", v.weight()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn join(it: impl Iterator<Item = usize>) -> String {
    it.map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// Information matrices of the basis vectors.
#[derive(Debug, Clone)]
pub struct BasisElementarySet {
    matrices: Vec<DMatrix<f64>>,
    n_params: usize,
}

impl BasisElementarySet {
    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }
}

impl InformationSet for BasisElementarySet {
    fn len(&self) -> usize {
        self.matrices.len()
    }

    fn n_params(&self) -> usize {
        self.n_params
    }

    fn accumulate(&self, k: usize, weight: f64, acc: &mut DMatrix<f64>) {
        for (a, m) in acc.iter_mut().zip(self.matrices[k].iter()) {
            *a += weight * m;
        }
    }

    fn trace_product(&self, k: usize, inv: &DMatrix<f64>) -> f64 {
        // both symmetric: trace(A B) = sum of elementwise products
        inv.dot(&self.matrices[k])
    }

    fn matrix(&self, k: usize) -> DMatrix<f64> {
        self.matrices[k].clone()
    }
}

/// `M_j = sum_k xi_j(k) M_k` for every basis vector.
pub fn basis_elementary_matrices(
    set: &ElementaryFisherSet,
    basis: &SymmetricBasis,
) -> Result<BasisElementarySet> {
    if set.space() != basis.space() {
        return Err(Error::domain(format!(
            "basis spans {}^{} subsequences but the elementary set has {}^{}",
            basis.space().levels(),
            basis.space().length(),
            set.levels(),
            set.length()
        )));
    }
    let p = set.n_params();
    let matrices = basis
        .vectors()
        .iter()
        .map(|v| {
            let mut m = DMatrix::zeros(p, p);
            let w = v.weight();
            for &k in &v.support {
                set.accumulate(k, w, &mut m);
            }
            m
        })
        .collect();
    Ok(BasisElementarySet {
        matrices,
        n_params: p,
    })
}

/// Maps basis coefficients to the design they represent in the full space.
pub fn expand(gamma: &FrequencyVector, basis: &SymmetricBasis) -> Result<FrequencyVector> {
    if gamma.len() != basis.len() {
        return Err(Error::domain(format!(
            "{} coefficients for {} basis vectors",
            gamma.len(),
            basis.len()
        )));
    }
    let mut w = vec![0.0; basis.space().size()];
    for (g, v) in gamma.weights().iter().zip(basis.vectors()) {
        let share = g * v.weight();
        for &k in &v.support {
            w[k] += share;
        }
    }
    Ok(FrequencyVector::from_raw(w))
}
