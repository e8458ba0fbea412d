//! Multiplicative dispersion-based maximization of `det M(xi)` over the
//! simplex of design weights.
//!
//! Each iteration rescales every weight by its dispersion relative to the
//! number of free parameters, `xi(k) <- xi(k) * v(xi, k) / N_theta`. Because
//! `sum_k xi(k) v(xi, k) = N_theta` this stays on the simplex, and the
//! determinant never decreases. The loop stops once the maximal dispersion is
//! within `tolerance` of `N_theta`, which certifies D-optimality.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::design_space::FrequencyVector;
use crate::error::{Error, Result};
use crate::fisher::{aggregate, aggregate_weights, dispersion, InformationSet, SINGULAR_CUTOFF};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Stop when `max_k v - N_theta` falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Weights below this are set to zero and stay there.
    pub prune_threshold: f64,
    pub record_trace: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 10_000,
            prune_threshold: 1e-12,
            record_trace: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::domain(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations < 1 {
            return Err(Error::domain("max_iterations must be at least 1"));
        }
        if !(self.prune_threshold >= 0.0 && self.prune_threshold < 1.0) {
            return Err(Error::domain(format!(
                "prune_threshold must lie in [0, 1), got {}",
                self.prune_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub weights: FrequencyVector,
    /// `max_k v - N_theta` at `weights`.
    pub gap: f64,
    /// Number of dispersion evaluations performed.
    pub iterations: usize,
    pub det_trace: Vec<f64>,
    pub maxdisp_trace: Vec<f64>,
    pub converged: bool,
    /// Dispersion of every family member at `weights`.
    pub dispersion: Vec<f64>,
    pub det: f64,
}

impl DesignResult {
    pub fn support(&self, threshold: f64) -> Vec<usize> {
        self.weights.support(threshold)
    }
}

/// Inverse and log-determinant of a symmetric matrix, `None` if singular.
fn factor(m: &DMatrix<f64>) -> Option<(DMatrix<f64>, f64)> {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let max = eig.max();
    if !(max > 0.0) || eig.min() < SINGULAR_CUTOFF * max {
        return None;
    }
    let logdet = eig.iter().map(|l| l.ln()).sum();
    let inv = m.clone().cholesky()?.inverse();
    Some((inv, logdet))
}

pub fn optimize<S: InformationSet + ?Sized>(
    set: &S,
    config: &OptimizerConfig,
) -> Result<DesignResult> {
    config.validate()?;
    let size = set.len();
    if size == 0 {
        return Err(Error::domain("cannot optimize over an empty family"));
    }
    let p = set.n_params() as f64;
    let mut weights = vec![1.0 / size as f64; size];
    let mut det_trace = Vec::new();
    let mut maxdisp_trace = Vec::new();
    let mut v = vec![0.0; size];

    let mut iteration = 0;
    loop {
        iteration += 1;
        let m = aggregate_weights(&weights, set);
        let (inv, logdet) = factor(&m).ok_or_else(|| {
            if iteration == 1 {
                Error::Singular(
                    "the uniform design is singular; the model is not identifiable from \
                     these subsequences"
                        .into(),
                )
            } else {
                Error::Singular(format!("design became singular at iteration {iteration}"))
            }
        })?;
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = set.trace_product(k, &inv);
        }
        let max_disp = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if config.record_trace {
            det_trace.push(logdet.exp());
            maxdisp_trace.push(max_disp);
        }
        let gap = max_disp - p;
        let converged = gap < config.tolerance;
        if converged || iteration >= config.max_iterations {
            return Ok(DesignResult {
                weights: FrequencyVector::from_raw(weights),
                gap,
                iterations: iteration,
                det_trace,
                maxdisp_trace,
                converged,
                dispersion: v,
                det: logdet.exp(),
            });
        }

        for (w, vk) in weights.iter_mut().zip(&v) {
            if *w > 0.0 {
                *w *= vk / p;
            }
        }
        renormalize(&mut weights);
        let mut pruned = false;
        for w in weights.iter_mut() {
            if *w > 0.0 && *w < config.prune_threshold {
                *w = 0.0;
                pruned = true;
            }
        }
        if pruned {
            renormalize(&mut weights);
        }
    }
}

fn renormalize(weights: &mut [f64]) {
    let sum: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= sum;
    }
}

/// `max_k v(xi, k) - N_theta`; zero exactly at a D-optimal design.
pub fn optimality_gap<S: InformationSet + ?Sized>(design: &FrequencyVector, set: &S) -> Result<f64> {
    let m = aggregate(design, set)?;
    let v = dispersion(&m, set)?;
    Ok(v.into_iter().fold(f64::NEG_INFINITY, f64::max) - set.n_params() as f64)
}
