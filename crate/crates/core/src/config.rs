//! Run configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//!
//! [model]
//! family = "wiener"
//! b = [3.0, 1.0]
//! powers = [3, 1]
//! c = [1.0, -0.25]
//! free_mask = [true, true, true, false]
//! noise_variance = 1.0
//!
//! [grid]
//! levels = 10
//! lo = -1.0
//! hi = 1.0
//!
//! [design]
//! mode = "unconstrained"
//!
//! [realize]
//! length = 100
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::design_space::AmplitudeGrid;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::optimizer::OptimizerConfig;
use crate::realization::Rounding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Optimize over all subsequence frequencies.
    #[default]
    Unconstrained,
    /// Optimize over the symmetric corner designs.
    Constrained,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "unconstrained" => Ok(Mode::Unconstrained),
            "constrained" => Ok(Mode::Constrained),
            other => Err(format!("unknown mode `{other}` (expected unconstrained|constrained)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_family")]
    pub family: String,
    /// Optional; must equal the number of FIR coefficients when given.
    pub memory: Option<usize>,
    pub b: Vec<f64>,
    #[serde(default = "default_powers")]
    pub powers: Vec<u32>,
    pub c: Vec<f64>,
    /// One flag per parameter `(b_1, ..., b_n, c_1, ..., c_P)`.
    pub free_mask: Vec<bool>,
    #[serde(default = "default_noise")]
    pub noise_variance: f64,
}

fn default_family() -> String {
    "wiener".into()
}

fn default_powers() -> Vec<u32> {
    vec![3, 1]
}

fn default_noise() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub levels: Option<usize>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    /// Explicit levels; excludes `levels`, `lo` and `hi`.
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignConfig {
    pub mode: Mode,
    /// Defaults to the model memory.
    pub subsequence_length: Option<usize>,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub prune_threshold: f64,
    pub record_trace: bool,
    /// Weights above this are reported as support points.
    pub support_threshold: f64,
}

impl Default for DesignConfig {
    fn default() -> Self {
        let opt = OptimizerConfig::default();
        Self {
            mode: Mode::default(),
            subsequence_length: None,
            tolerance: opt.tolerance,
            max_iterations: opt.max_iterations,
            prune_threshold: opt.prune_threshold,
            record_trace: opt.record_trace,
            support_threshold: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RealizeConfig {
    pub length: u64,
    pub rounding: Rounding,
}

impl Default for RealizeConfig {
    fn default() -> Self {
        Self {
            length: 100,
            rounding: Rounding::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Dot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: Option<PathBuf>,
    pub formats: Vec<Format>,
    /// Wall-clock timings make `report.json` vary between runs.
    pub include_timings: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: None,
            formats: vec![Format::Csv, Format::Json, Format::Dot],
            include_timings: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub model: ModelConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub design: DesignConfig,
    #[serde(default)]
    pub realize: RealizeConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::config("<config>", e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: RunConfig = toml::from_str(&text).map_err(|e| {
            Error::config(path.display().to_string(), e.to_string().trim_end().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.model_spec()?;
        let grid = self.grid()?;
        if let Some(m) = self.model.memory {
            if m != self.model.b.len() {
                return Err(Error::config(
                    "model.memory",
                    format!("memory {m} but model.b has {} coefficients", self.model.b.len()),
                ));
            }
        }
        let length = self.subsequence_length();
        if length < model.memory() {
            return Err(Error::config(
                "design.subsequence_length",
                format!("{length} is shorter than the model memory {}", model.memory()),
            ));
        }
        crate::design_space::SubseqSpace::new(grid.len(), length)
            .map_err(|e| Error::config("design.subsequence_length", e.to_string()))?;
        self.optimizer_config()
            .validate()
            .map_err(|e| Error::config("design", e.to_string()))?;
        if !(self.design.support_threshold >= 0.0 && self.design.support_threshold < 1.0) {
            return Err(Error::config(
                "design.support_threshold",
                "must lie in [0, 1)",
            ));
        }
        if self.realize.length < 1 {
            return Err(Error::config("realize.length", "must be at least 1"));
        }
        Ok(())
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let m = &self.model;
        if m.family != "wiener" {
            return Err(Error::config(
                "model.family",
                format!("unknown family `{}` (supported: wiener)", m.family),
            ));
        }
        let n_params = m.b.len() + m.c.len();
        if m.free_mask.len() != n_params {
            return Err(Error::config(
                "model.free_mask",
                format!("{} flags for {n_params} parameters", m.free_mask.len()),
            ));
        }
        ModelSpec::wiener(
            m.b.clone(),
            m.powers.clone(),
            m.c.clone(),
            m.free_mask.clone(),
            m.noise_variance,
        )
        .map_err(|e| {
            let field = if m.powers.len() != m.c.len() {
                "model.powers"
            } else if !(m.noise_variance > 0.0) {
                "model.noise_variance"
            } else if m.b.is_empty() {
                "model.b"
            } else {
                "model.free_mask"
            };
            Error::config(field, e.to_string())
        })
    }

    pub fn grid(&self) -> Result<AmplitudeGrid> {
        let g = &self.grid;
        match (&g.values, g.levels, g.lo, g.hi) {
            (Some(values), None, None, None) => AmplitudeGrid::new(values.clone())
                .map_err(|e| Error::config("grid.values", e.to_string())),
            (Some(_), ..) => Err(Error::config(
                "grid",
                "give either `values` or `levels`/`lo`/`hi`, not both",
            )),
            (None, Some(levels), lo, hi) => {
                AmplitudeGrid::uniform(levels, lo.unwrap_or(-1.0), hi.unwrap_or(1.0))
                    .map_err(|e| Error::config("grid.levels", e.to_string()))
            }
            (None, None, ..) => Err(Error::config("grid.levels", "missing")),
        }
    }

    pub fn subsequence_length(&self) -> usize {
        self.design
            .subsequence_length
            .unwrap_or(self.model.b.len())
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            tolerance: self.design.tolerance,
            max_iterations: self.design.max_iterations,
            prune_threshold: self.design.prune_threshold,
            record_trace: self.design.record_trace,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
        seed = 3
        [model]
        b = [3.0, 1.0]
        c = [1.0, -0.25]
        free_mask = [true, true, true, false]
        [grid]
        levels = 10
    "#;

    #[test]
    fn parses_with_defaults() {
        let cfg = RunConfig::from_toml_str(BASE).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.model.powers, vec![3, 1]);
        assert_eq!(cfg.design.mode, Mode::Unconstrained);
        assert_eq!(cfg.subsequence_length(), 2);
        assert_eq!(cfg.realize.length, 100);
        assert_eq!(cfg.grid().unwrap().len(), 10);
        assert_eq!(cfg.model_spec().unwrap().n_free(), 3);
    }

    fn config_error_path(text: &str) -> String {
        match RunConfig::from_toml_str(text) {
            Err(Error::Config { path, .. }) => path,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_carry_field_paths() {
        let short = format!("{BASE}\n[design]\nsubsequence_length = 1\n");
        assert_eq!(config_error_path(&short), "design.subsequence_length");
        let mask = BASE.replace("free_mask = [true, true, true, false]", "free_mask = [true]");
        assert_eq!(config_error_path(&mask), "model.free_mask");
        let grid = BASE.replace("levels = 10", "levels = 1");
        assert_eq!(config_error_path(&grid), "grid.levels");
        let noise = BASE.replace("[grid]", "noise_variance = -1.0\n[grid]");
        assert_eq!(config_error_path(&noise), "model.noise_variance");
        let family = BASE.replace("[model]", "[model]\nfamily = \"volterra\"");
        assert_eq!(config_error_path(&family), "model.family");
        let unknown = format!("{BASE}\n[design]\nfoo = 1\n");
        assert_eq!(config_error_path(&unknown), "<config>");
        let tol = format!("{BASE}\n[design]\ntolerance = 0.0\n");
        assert_eq!(config_error_path(&tol), "design");
    }

    #[test]
    fn explicit_grid_values() {
        let text = BASE.replace("levels = 10", "values = [-1.0, 0.0, 1.0]");
        let cfg = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg.grid().unwrap().values(), &[-1.0, 0.0, 1.0]);
        let both = BASE.replace("levels = 10", "levels = 3\nvalues = [-1.0, 1.0]");
        assert_eq!(config_error_path(&both), "grid");
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("constrained".parse::<Mode>().unwrap(), Mode::Constrained);
        assert!("other".parse::<Mode>().is_err());
        let text = format!("{BASE}\n[design]\nmode = \"constrained\"\n");
        assert_eq!(RunConfig::from_toml_str(&text).unwrap().design.mode, Mode::Constrained);
    }
}
