//! End-to-end runs: design, realization, random baselines, timing sweeps and
//! the subsequence-length experiment.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Mode, RunConfig};
use crate::design_space::{count_subsequences, AmplitudeGrid, FrequencyVector};
use crate::error::{Error, Result};
use crate::fisher::{aggregate, build_elementary_set, dispersion, ElementaryFisherSet, InformationSet};
use crate::model::ModelSpec;
use crate::optimizer::{optimize, OptimizerConfig};
use crate::realization::{realize, RealizationReport, Rounding};
use crate::symmetric_basis::{basis_elementary_matrices, build_symmetric_basis, expand};

/// Name of the generator used for random baselines.
pub const BASELINE_RNG: &str = "ChaCha8Rng";

#[derive(Debug, Clone, Serialize)]
pub struct SupportEntry {
    /// One-based subsequence index.
    pub k: usize,
    /// Amplitudes, oldest sample first.
    pub values: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trace {
    pub det: Vec<f64>,
    pub max_dispersion: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RealizationSummary {
    pub length: u64,
    pub rounding: Rounding,
    pub sequence: Vec<f64>,
    pub det: f64,
    pub max_frequency_error: f64,
    pub max_design_error: f64,
    /// One-based subsequence index and multiplicity of every added edge.
    pub added_edges: Vec<(usize, u64)>,
    #[serde(skip)]
    pub report: RealizationReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub mode: Mode,
    pub levels: usize,
    pub memory: usize,
    pub subsequence_length: usize,
    pub n_params: usize,
    pub design: Vec<SupportEntry>,
    pub det: f64,
    pub log_det: f64,
    /// Optimality gap in the optimized space.
    pub gap: f64,
    /// `max_k v(xi, k) - N_theta` over all subsequences at the final design.
    pub full_space_gap: f64,
    pub basis_size: Option<usize>,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Option<Trace>,
    pub realization: Option<RealizationSummary>,
    pub timings: Option<BTreeMap<String, f64>>,
    #[serde(skip)]
    pub weights: FrequencyVector,
    #[serde(skip)]
    pub grid: AmplitudeGrid,
    #[serde(skip)]
    pub stage_times: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn support_len(&self) -> usize {
        self.design.len()
    }
}

/// The problem a config describes.
struct Problem {
    model: ModelSpec,
    grid: AmplitudeGrid,
    length: usize,
    optimizer: OptimizerConfig,
}

fn problem(config: &RunConfig) -> Result<Problem> {
    config.validate()?;
    Ok(Problem {
        model: config.model_spec()?,
        grid: config.grid()?,
        length: config.subsequence_length(),
        optimizer: config.optimizer_config(),
    })
}

fn timed<T>(times: &mut BTreeMap<String, f64>, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f()?;
    times.insert(stage.to_string(), start.elapsed().as_secs_f64());
    Ok(out)
}

fn max_gap(set: &ElementaryFisherSet, design: &FrequencyVector) -> Result<f64> {
    let m = aggregate(design, set)?;
    let v = dispersion(&m, set)?;
    Ok(v.into_iter().fold(f64::NEG_INFINITY, f64::max) - set.n_params() as f64)
}

/// Optimizes the design described by `config`.
pub fn run_design(config: &RunConfig) -> Result<RunReport> {
    let p = problem(config)?;
    let mut times = BTreeMap::new();
    let set = timed(&mut times, "elementary", || build_elementary_set(&p.model, &p.grid, p.length))?;
    let (weights, result, basis_size) = match config.design.mode {
        Mode::Unconstrained => {
            let r = timed(&mut times, "optimize", || optimize(&set, &p.optimizer))?;
            (r.weights.clone(), r, None)
        }
        Mode::Constrained => {
            let basis = timed(&mut times, "basis", || {
                build_symmetric_basis(p.grid.len(), p.length)
            })?;
            let basis_set = timed(&mut times, "basis_matrices", || {
                basis_elementary_matrices(&set, &basis)
            })?;
            let r = timed(&mut times, "optimize", || optimize(&basis_set, &p.optimizer))?;
            let xi = expand(&r.weights, &basis)?;
            (xi, r, Some(basis.len()))
        }
    };
    let space = set.space();
    let design = weights
        .support(config.design.support_threshold)
        .into_iter()
        .map(|k| {
            Ok(SupportEntry {
                k: k + 1,
                values: space.values(k, &p.grid)?,
                weight: weights.weights()[k],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let info = aggregate(&weights, &set)?;
    let trace = config.design.record_trace.then(|| Trace {
        det: result.det_trace.clone(),
        max_dispersion: result.maxdisp_trace.clone(),
    });
    Ok(RunReport {
        mode: config.design.mode,
        levels: p.grid.len(),
        memory: p.model.memory(),
        subsequence_length: p.length,
        n_params: set.n_params(),
        design,
        det: info.det(),
        log_det: info.log_det(),
        gap: result.gap,
        full_space_gap: max_gap(&set, &weights)?,
        basis_size,
        converged: result.converged,
        iterations: result.iterations,
        trace,
        realization: None,
        timings: config.output.include_timings.then(|| times.clone()),
        weights,
        grid: p.grid,
        stage_times: times,
    })
}

/// Determinant of the relative-frequency design of a periodic sequence.
fn sequence_det(set: &ElementaryFisherSet, grid: &AmplitudeGrid, sequence: &[f64]) -> Result<f64> {
    let counts = count_subsequences(sequence, grid, set.length())?;
    Ok(aggregate(&FrequencyVector::from_counts(&counts)?, set)?.det())
}

/// Optimizes and then realizes the design as a periodic sequence.
pub fn run_realize(config: &RunConfig) -> Result<RunReport> {
    let mut report = run_design(config)?;
    let p = problem(config)?;
    let length = config.realize.length;
    let start = Instant::now();
    let realized = realize(
        &report.weights,
        length,
        &report.grid,
        p.length,
        config.realize.rounding,
    )?;
    report
        .stage_times
        .insert("realize".into(), start.elapsed().as_secs_f64());
    let set = build_elementary_set(&p.model, &p.grid, p.length)?;
    let det = sequence_det(&set, &p.grid, &realized.sequence)?;
    report.realization = Some(RealizationSummary {
        length: realized.sequence.len() as u64,
        rounding: config.realize.rounding,
        sequence: realized.sequence.clone(),
        det,
        max_frequency_error: realized.max_frequency_error,
        max_design_error: realized.max_design_error,
        added_edges: realized.added_edges.iter().map(|&(k, m)| (k + 1, m)).collect(),
        report: realized,
    });
    if config.output.include_timings {
        report.timings = Some(report.stage_times.clone());
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub length: usize,
    pub det: f64,
    pub log_det: f64,
    /// `None` when the design is singular.
    pub gap: Option<f64>,
    pub distinct_subsequences: usize,
}

/// Scores a given periodic sequence against the model of `config`.
pub fn run_evaluate(config: &RunConfig, sequence: &[f64]) -> Result<EvaluationReport> {
    let p = problem(config)?;
    let set = build_elementary_set(&p.model, &p.grid, p.length)?;
    let counts = count_subsequences(sequence, &p.grid, p.length)?;
    let xi = FrequencyVector::from_counts(&counts)?;
    let m = aggregate(&xi, &set)?;
    let gap = if m.is_singular() {
        None
    } else {
        Some(max_gap(&set, &xi)?)
    };
    Ok(EvaluationReport {
        length: sequence.len(),
        det: m.det(),
        log_det: m.log_det(),
        gap,
        distinct_subsequences: counts.counts().iter().filter(|&&c| c > 0).count(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineReport {
    pub generator: String,
    pub seed: u64,
    pub count: usize,
    pub length: u64,
    pub best_det: f64,
    /// Zero-based draw that achieved `best_det`.
    pub best_draw: usize,
    pub median_det: f64,
    pub best_sequence: Vec<f64>,
}

/// Best determinant among `count` i.i.d. uniform random level sequences.
pub fn run_baseline(config: &RunConfig, count: usize) -> Result<BaselineReport> {
    if count < 1 {
        return Err(Error::config("count", "must be at least 1"));
    }
    let p = problem(config)?;
    let set = build_elementary_set(&p.model, &p.grid, p.length)?;
    let length = config.realize.length;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut dets = Vec::with_capacity(count);
    let mut best: Option<(usize, f64, Vec<f64>)> = None;
    for draw in 0..count {
        let seq: Vec<f64> = (0..length)
            .map(|_| p.grid.level(rng.random_range(0..p.grid.len())))
            .collect();
        let det = sequence_det(&set, &p.grid, &seq)?;
        dets.push(det);
        if best.as_ref().is_none_or(|(_, b, _)| det > *b) {
            best = Some((draw, det, seq));
        }
    }
    let (best_draw, best_det, best_sequence) = best.unwrap();
    dets.sort_by(f64::total_cmp);
    Ok(BaselineReport {
        generator: BASELINE_RNG.into(),
        seed: config.seed,
        count,
        length,
        best_det,
        best_draw,
        median_det: dets[dets.len() / 2],
        best_sequence,
    })
}

/// Model used in timing sweeps: FIR taps `1, ..., n` into a cubic-plus-linear
/// polynomial with the cubic coefficient fixed.
pub fn bench_model(memory: usize) -> Result<ModelSpec> {
    let b: Vec<f64> = (1..=memory).map(|j| j as f64).collect();
    let mut free = vec![true; memory];
    free.extend([false, true]);
    ModelSpec::wiener(b, vec![3, 1], vec![1.0, -0.25], free, 1.0)
}

#[derive(Debug, Clone)]
pub struct BenchSweep {
    /// `(levels, memory)` pairs.
    pub problems: Vec<(usize, usize)>,
    pub repetitions: usize,
    pub optimizer: OptimizerConfig,
}

impl BenchSweep {
    pub fn amplitude(levels: impl IntoIterator<Item = usize>) -> Self {
        Self::new(levels.into_iter().map(|a| (a, 2)).collect())
    }

    pub fn memory(memories: impl IntoIterator<Item = usize>) -> Self {
        Self::new(memories.into_iter().map(|n| (3, n)).collect())
    }

    pub fn new(problems: Vec<(usize, usize)>) -> Self {
        Self {
            problems,
            repetitions: 10,
            optimizer: OptimizerConfig {
                record_trace: false,
                ..OptimizerConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub levels: usize,
    pub memory: usize,
    pub basis_size: usize,
    /// Median seconds for the elementary matrices, the symmetric basis and
    /// the basis matrices.
    pub basis_seconds: f64,
    /// Median seconds for the optimization alone.
    pub optimize_seconds: f64,
    pub iterations: usize,
    pub converged: bool,
    pub det: f64,
}

fn median(mut xs: Vec<Duration>) -> f64 {
    xs.sort();
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2].as_secs_f64()
    } else {
        (xs[n / 2 - 1].as_secs_f64() + xs[n / 2].as_secs_f64()) / 2.0
    }
}

/// Times constrained designs on uniform grids over `[-1, 1]`.
pub fn run_bench(sweep: &BenchSweep) -> Result<Vec<BenchRow>> {
    let reps = sweep.repetitions.max(1);
    sweep
        .problems
        .iter()
        .map(|&(levels, memory)| {
            let model = bench_model(memory)?;
            let grid = AmplitudeGrid::uniform(levels, -1.0, 1.0)?;
            let mut basis_times = Vec::with_capacity(reps);
            let mut opt_times = Vec::with_capacity(reps);
            let mut last = None;
            for _ in 0..reps {
                let start = Instant::now();
                let set = build_elementary_set(&model, &grid, memory)?;
                let basis = build_symmetric_basis(levels, memory)?;
                let basis_set = basis_elementary_matrices(&set, &basis)?;
                basis_times.push(start.elapsed());
                let start = Instant::now();
                let r = optimize(&basis_set, &sweep.optimizer)?;
                opt_times.push(start.elapsed());
                last = Some((basis.len(), r));
            }
            let (basis_size, r) = last.unwrap();
            Ok(BenchRow {
                levels,
                memory,
                basis_size,
                basis_seconds: median(basis_times),
                optimize_seconds: median(opt_times),
                iterations: r.iterations,
                converged: r.converged,
                det: r.det,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct MemlenRow {
    pub subsequence_length: usize,
    pub space_size: usize,
    pub det: f64,
    pub gap: f64,
    pub iterations: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MemlenReport {
    pub memory: usize,
    pub rows: Vec<MemlenRow>,
    /// Largest `|det(L) - det(n)| / det(n)` over the rows.
    pub max_relative_deviation: f64,
    pub consistent: bool,
}

/// Relative determinant deviation allowed between subsequence lengths.
pub const MEMLEN_TOLERANCE: f64 = 1e-6;

/// Unconstrained designs at several subsequence lengths `L >= n`, each
/// compared against the design at `L = n`.
pub fn run_memory_experiment(config: &RunConfig, lengths: &[usize]) -> Result<MemlenReport> {
    let p = problem(config)?;
    let n = p.model.memory();
    if let Some(&bad) = lengths.iter().find(|&&l| l < n) {
        return Err(Error::config(
            "lengths",
            format!("subsequence length {bad} is shorter than the model memory {n}"),
        ));
    }
    let optimizer = OptimizerConfig {
        record_trace: false,
        ..p.optimizer.clone()
    };
    let run = |length: usize| -> Result<MemlenRow> {
        let start = Instant::now();
        let set = build_elementary_set(&p.model, &p.grid, length)?;
        let r = optimize(&set, &optimizer)?;
        Ok(MemlenRow {
            subsequence_length: length,
            space_size: set.space().size(),
            det: r.det,
            gap: r.gap,
            iterations: r.iterations,
            seconds: start.elapsed().as_secs_f64(),
        })
    };
    let reference = run(n)?;
    let rows = lengths
        .iter()
        .map(|&l| if l == n { Ok(reference.clone()) } else { run(l) })
        .collect::<Result<Vec<_>>>()?;
    let max_relative_deviation = rows
        .iter()
        .map(|r| (r.det - reference.det).abs() / reference.det)
        .fold(0.0, f64::max);
    Ok(MemlenReport {
        memory: n,
        rows,
        max_relative_deviation,
        consistent: max_relative_deviation <= MEMLEN_TOLERANCE,
    })
}
