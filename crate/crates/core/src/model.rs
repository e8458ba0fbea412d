//! Nonlinear FIR-type models: the output at time `t` is a static function of
//! the last `n` input samples.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Output map `(theta, window) -> y` of a user-supplied model. The window is
/// ordered oldest sample first.
pub type OutputFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// FIR filter followed by a polynomial with explicit powers:
/// `w = sum_j b_j u(t-j+1)`, `y = sum_i c_i w^(p_i)`.
///
/// Parameters are laid out as `(b_1, ..., b_n, c_1, ..., c_P)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WienerFir {
    pub b: Vec<f64>,
    pub powers: Vec<u32>,
    pub c: Vec<f64>,
}

impl WienerFir {
    fn filter(&self, b: &[f64], window: &[f64]) -> f64 {
        // b_1 multiplies the newest sample
        b.iter().zip(window.iter().rev()).map(|(b, u)| b * u).sum()
    }

    fn output(&self, theta: &[f64], window: &[f64]) -> f64 {
        let (b, c) = theta.split_at(self.b.len());
        let w = self.filter(b, window);
        c.iter().zip(&self.powers).map(|(c, &p)| c * w.powi(p as i32)).sum()
    }

    /// Gradient with respect to every parameter, free or not.
    fn full_gradient(&self, theta: &[f64], window: &[f64]) -> Vec<f64> {
        let (b, c) = theta.split_at(self.b.len());
        let w = self.filter(b, window);
        let slope: f64 = c
            .iter()
            .zip(&self.powers)
            .filter(|(_, &p)| p > 0)
            .map(|(c, &p)| c * p as f64 * w.powi(p as i32 - 1))
            .sum();
        window
            .iter()
            .rev()
            .map(|u| slope * u)
            .chain(self.powers.iter().map(|&p| w.powi(p as i32)))
            .collect()
    }
}

#[derive(Clone)]
pub enum ModelFamily {
    Wiener(WienerFir),
    Custom(OutputFn),
}

impl fmt::Debug for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelFamily::Wiener(w) => f.debug_tuple("Wiener").field(w).finish(),
            ModelFamily::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// A model together with its nominal parameters, the set of parameters to be
/// estimated, and the output noise variance.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    memory: usize,
    theta: Vec<f64>,
    free_mask: Vec<bool>,
    noise_variance: f64,
    family: ModelFamily,
}

impl ModelSpec {
    pub fn wiener(
        b: Vec<f64>,
        powers: Vec<u32>,
        c: Vec<f64>,
        free_mask: Vec<bool>,
        noise_variance: f64,
    ) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::domain("the FIR part needs at least one coefficient"));
        }
        if powers.len() != c.len() {
            return Err(Error::domain(format!(
                "{} polynomial powers but {} coefficients",
                powers.len(),
                c.len()
            )));
        }
        let memory = b.len();
        let theta = b.iter().chain(&c).copied().collect();
        Self::build(
            memory,
            theta,
            free_mask,
            noise_variance,
            ModelFamily::Wiener(WienerFir { b, powers, c }),
        )
    }

    /// A model with an arbitrary output map; gradients use central finite
    /// differences.
    pub fn custom(
        memory: usize,
        theta: Vec<f64>,
        free_mask: Vec<bool>,
        noise_variance: f64,
        output: OutputFn,
    ) -> Result<Self> {
        Self::build(
            memory,
            theta,
            free_mask,
            noise_variance,
            ModelFamily::Custom(output),
        )
    }

    fn build(
        memory: usize,
        theta: Vec<f64>,
        free_mask: Vec<bool>,
        noise_variance: f64,
        family: ModelFamily,
    ) -> Result<Self> {
        if memory < 1 {
            return Err(Error::domain("model memory must be at least 1"));
        }
        if free_mask.len() != theta.len() {
            return Err(Error::domain(format!(
                "free mask has {} entries for {} parameters",
                free_mask.len(),
                theta.len()
            )));
        }
        if !free_mask.iter().any(|&f| f) {
            return Err(Error::domain("at least one parameter must be free"));
        }
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::domain(format!(
                "noise variance must be positive, got {noise_variance}"
            )));
        }
        Ok(Self {
            memory,
            theta,
            free_mask,
            noise_variance,
            family,
        })
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn free_mask(&self) -> &[bool] {
        &self.free_mask
    }

    /// Number of free parameters.
    pub fn n_free(&self) -> usize {
        self.free_mask.iter().filter(|&&f| f).count()
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn family(&self) -> &ModelFamily {
        &self.family
    }

    /// Same model with a different noise variance.
    pub fn with_noise_variance(&self, noise_variance: f64) -> Result<Self> {
        Self::build(
            self.memory,
            self.theta.clone(),
            self.free_mask.clone(),
            noise_variance,
            self.family.clone(),
        )
    }

    fn check_window(&self, window: &[f64]) -> Result<()> {
        if window.len() != self.memory {
            return Err(Error::domain(format!(
                "model memory is {} but the input window has {} samples",
                self.memory,
                window.len()
            )));
        }
        Ok(())
    }

    fn output_at(&self, theta: &[f64], window: &[f64]) -> f64 {
        match &self.family {
            ModelFamily::Wiener(w) => w.output(theta, window),
            ModelFamily::Custom(f) => f(theta, window),
        }
    }

    /// Noiseless output for one input window (oldest sample first).
    pub fn evaluate(&self, window: &[f64]) -> Result<f64> {
        self.check_window(window)?;
        Ok(self.output_at(&self.theta, window))
    }

    /// Partial derivatives of the output with respect to the free parameters,
    /// in parameter order.
    pub fn gradient(&self, window: &[f64]) -> Result<Vec<f64>> {
        self.check_window(window)?;
        let full = match &self.family {
            ModelFamily::Wiener(w) => w.full_gradient(&self.theta, window),
            ModelFamily::Custom(_) => self.central_difference(window),
        };
        Ok(full
            .into_iter()
            .zip(&self.free_mask)
            .filter(|(_, &free)| free)
            .map(|(g, _)| g)
            .collect())
    }

    fn central_difference(&self, window: &[f64]) -> Vec<f64> {
        let mut theta = self.theta.clone();
        (0..theta.len())
            .map(|i| {
                if !self.free_mask[i] {
                    return 0.0;
                }
                let t0 = theta[i];
                let h = 1e-6 * t0.abs().max(1.0);
                theta[i] = t0 + h;
                let up = self.output_at(&theta, window);
                theta[i] = t0 - h;
                let down = self.output_at(&theta, window);
                theta[i] = t0;
                (up - down) / (2.0 * h)
            })
            .collect()
    }
}
