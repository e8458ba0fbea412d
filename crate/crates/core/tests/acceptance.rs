//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits with a
//! nonzero status if any criterion fails.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use firdesign::config::{Mode, RunConfig};
use firdesign::design_space::count_subsequences;
use firdesign::fisher::{aggregate, build_elementary_set, dispersion};
use firdesign::optimizer::optimize;
use firdesign::pipeline::{
    run_baseline, run_bench, run_design, run_memory_experiment, run_realize, BenchSweep,
    RunReport,
};
use firdesign::realization::{build_graph, check_balance, euler_cycle, path_to_sequence};
use firdesign::symmetric_basis::build_symmetric_basis;
use firdesign::{
    AmplitudeGrid, CountVector, FrequencyVector, InformationSet, ModelSpec, OptimizerConfig,
};

const WEIGHT_TOL: f64 = 1e-3;
const GAP_TOL: f64 = 1e-3;
const DET_REL_TOL: f64 = 0.01;
const UNCONSTRAINED_DET: f64 = 1.83e3;
const CONSTRAINED_DET: f64 = 1.17e3;
const CONSTRAINED_FREQ_TOL: f64 = 0.01;
const FULL_SPACE_MARGIN: f64 = 1e-3;
const REALIZED_FREQ_TOL: f64 = 1e-2;
const REPAIRED_DET_MIN: f64 = 1.0e3;
const BASELINE_DET_MAX: f64 = 2e2;
const BASELINE_RATIO: f64 = 5.0;
const TRACE_IDENTITY_TOL: f64 = 1e-8;
const FD_REL_TOL: f64 = 1e-5;
const BRUTE_FORCE_REL_TOL: f64 = 1e-3;
const MEMLEN_REL_TOL: f64 = 1e-6;
const BUDGET_SECONDS: f64 = 60.0;
// Optimal moment matrices have condition numbers near 3e6, so determinants
// are resolved only to about 1e-9 relative.
const MONOTONE_REL_TOL: f64 = 1e-8;

struct Gate {
    failures: usize,
}

impl Gate {
    fn check(&mut self, id: &str, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{tag} [{id}] {name}: {detail}");
    }
}

fn shipped() -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/wiener_fir.toml");
    RunConfig::from_path(&path).expect("shipped config parses")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Tuples in ninths so they compare exactly.
fn ninths(values: &[f64]) -> Vec<i64> {
    values.iter().map(|v| (v * 9.0).round() as i64).collect()
}

fn reversed(set: &BTreeSet<Vec<i64>>) -> BTreeSet<Vec<i64>> {
    set.iter()
        .map(|t| t.iter().rev().copied().collect())
        .collect()
}

fn example_model() -> ModelSpec {
    ModelSpec::wiener(
        vec![3.0, 1.0],
        vec![3, 1],
        vec![1.0, -0.25],
        vec![true, true, true, false],
        1.0,
    )
    .unwrap()
}

fn monotone(trace: &[f64]) -> bool {
    trace.windows(2).all(|w| w[1] >= w[0] * (1.0 - MONOTONE_REL_TOL))
}

fn criterion_1(gate: &mut Gate, report: &RunReport) {
    let table: BTreeSet<Vec<i64>> = [
        vec![-9, -9],
        vec![-9, -5],
        vec![-3, 9],
        vec![3, -9],
        vec![9, 5],
        vec![9, 9],
    ]
    .into_iter()
    .collect();
    let found: BTreeSet<Vec<i64>> = report.design.iter().map(|e| ninths(&e.values)).collect();
    let weights_ok = report
        .design
        .iter()
        .all(|e| (e.weight - 1.0 / 6.0).abs() <= WEIGHT_TOL);
    let tuples_ok = found == table || found == reversed(&table);
    let pass = report.design.len() == 6
        && weights_ok
        && tuples_ok
        && report.gap < GAP_TOL
        && rel(report.det, UNCONSTRAINED_DET) <= DET_REL_TOL;
    gate.check(
        "1",
        "unconstrained design",
        pass,
        format!(
            "support {} (tuples match: {tuples_ok}, weights 1/6: {weights_ok}), gap {:.2e}, det {:.4e}",
            report.design.len(),
            report.gap,
            report.det
        ),
    );
}

fn criterion_2(gate: &mut Gate, report: &RunReport) {
    let table: Vec<(Vec<i64>, f64)> = vec![
        (vec![-9, -9], 0.15),
        (vec![-9, -3], 0.13),
        (vec![-9, 9], 0.09),
        (vec![-3, -9], 0.13),
        (vec![3, 9], 0.13),
        (vec![9, -9], 0.09),
        (vec![9, 3], 0.13),
        (vec![9, 9], 0.15),
    ];
    let found: Vec<(Vec<i64>, f64)> = report
        .design
        .iter()
        .map(|e| (ninths(&e.values), e.weight))
        .collect();
    let matches = |flip: bool| {
        table.iter().all(|(t, f)| {
            let t: Vec<i64> = if flip {
                t.iter().rev().copied().collect()
            } else {
                t.clone()
            };
            found
                .iter()
                .any(|(u, w)| *u == t && (w - f).abs() <= CONSTRAINED_FREQ_TOL)
        })
    };
    let freq_ok = found.len() == table.len() && (matches(false) || matches(true));
    let full_max = report.full_space_gap + report.n_params as f64;
    let pass = report.basis_size == Some(55)
        && report.design.len() == 8
        && freq_ok
        && rel(report.det, CONSTRAINED_DET) <= DET_REL_TOL
        && report.gap < GAP_TOL
        && full_max > report.n_params as f64 + FULL_SPACE_MARGIN;
    gate.check(
        "2",
        "constrained design",
        pass,
        format!(
            "N_b {:?}, support {} (frequencies match: {freq_ok}), det {:.4e}, basis gap {:.2e}, full-space max dispersion {:.4}",
            report.basis_size,
            report.design.len(),
            report.det,
            report.gap,
            full_max
        ),
    );
}

fn achieved_error(report: &RunReport) -> (f64, f64) {
    let r = report.realization.as_ref().unwrap();
    let counts = count_subsequences(&r.sequence, &report.grid, report.subsequence_length).unwrap();
    let n = r.sequence.len() as f64;
    let err = counts
        .counts()
        .iter()
        .zip(report.weights.weights())
        .map(|(&c, &w)| (c as f64 / n - w).abs())
        .fold(0.0, f64::max);
    let set = build_elementary_set(&example_model(), &report.grid, report.subsequence_length).unwrap();
    let det = aggregate(&FrequencyVector::from_counts(&counts).unwrap(), &set)
        .unwrap()
        .det();
    (err, det)
}

fn criterion_3(gate: &mut Gate, report: &RunReport) {
    let r = report.realization.as_ref().unwrap();
    let (err, det) = achieved_error(report);
    let pass = r.sequence.len() == 100
        && err < REALIZED_FREQ_TOL
        && rel(det, report.det) <= DET_REL_TOL;
    gate.check(
        "3",
        "constrained realization",
        pass,
        format!(
            "length {}, max frequency error {err:.2e}, sequence det {det:.4e} vs design {:.4e}",
            r.sequence.len(),
            report.det
        ),
    );
}

fn criterion_4(gate: &mut Gate, report: &RunReport) {
    let r = report.realization.as_ref().unwrap();
    let counts = count_subsequences(&r.sequence, &report.grid, report.subsequence_length).unwrap();
    let valid = counts == r.report.achieved_counts
        && counts
            .counts()
            .iter()
            .zip(r.report.requested_counts.counts())
            .all(|(a, b)| a >= b);
    let (_, det) = achieved_error(report);
    let pass = valid && (REPAIRED_DET_MIN..=UNCONSTRAINED_DET).contains(&det);
    gate.check(
        "4",
        "repaired unconstrained realization",
        pass,
        format!(
            "valid {valid}, length {}, {} added edge kinds, sequence det {det:.4e}",
            r.sequence.len(),
            r.added_edges.len()
        ),
    );
}

fn criterion_5(gate: &mut Gate, config: &RunConfig, constrained_det: f64) {
    let b = run_baseline(config, 1000).unwrap();
    let pass = b.length == 100
        && b.best_det < BASELINE_DET_MAX
        && b.best_det * BASELINE_RATIO <= constrained_det;
    gate.check(
        "5",
        "random baseline",
        pass,
        format!(
            "{} seed {}: best det {:.4e} (median {:.4e}), constrained/best {:.2}",
            b.generator,
            b.seed,
            b.best_det,
            b.median_det,
            constrained_det / b.best_det
        ),
    );
}

fn random_design(rng: &mut ChaCha8Rng, size: usize) -> FrequencyVector {
    let sparse = rng.random_bool(0.3);
    let w: Vec<f64> = (0..size)
        .map(|_| {
            if sparse && rng.random_bool(0.7) {
                0.0
            } else {
                -rng.random::<f64>().max(1e-300).ln()
            }
        })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        return FrequencyVector::uniform(size);
    }
    FrequencyVector::normalized(w).unwrap()
}

fn trace_identity(rng: &mut ChaCha8Rng) -> (bool, String) {
    let grid = AmplitudeGrid::uniform(10, -1.0, 1.0).unwrap();
    let set = build_elementary_set(&example_model(), &grid, 2).unwrap();
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 100 {
        let xi = random_design(rng, set.len());
        let m = aggregate(&xi, &set).unwrap();
        if m.is_singular() {
            continue;
        }
        let v = dispersion(&m, &set).unwrap();
        let s: f64 = v.iter().zip(xi.weights()).map(|(a, b)| a * b).sum();
        worst = worst.max((s - set.n_params() as f64).abs());
        done += 1;
    }
    (worst <= TRACE_IDENTITY_TOL, format!("trace identity max error {worst:.1e}"))
}

fn fd_gradients() -> (bool, String) {
    let grid = AmplitudeGrid::uniform(10, -1.0, 1.0).unwrap();
    let b = [3.0, 1.0];
    let c = [1.0, -0.25];
    let at = |b: [f64; 2], c: [f64; 2]| {
        ModelSpec::wiener(b.to_vec(), vec![3, 1], c.to_vec(), vec![true, true, true, false], 1.0)
            .unwrap()
    };
    let model = at(b, c);
    let mut worst = 0.0f64;
    for i in 0..10 {
        for j in 0..10 {
            let window = [grid.level(i), grid.level(j)];
            let g = model.gradient(&window).unwrap();
            let perturbed = |p: usize, h: f64| {
                let (mut b, mut c) = (b, c);
                match p {
                    0 | 1 => b[p] += h,
                    _ => c[0] += h,
                }
                at(b, c).evaluate(&window).unwrap()
            };
            let norm = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for (p, gp) in g.iter().enumerate() {
                let h = 1e-5;
                let fd = (perturbed(p, h) - perturbed(p, -h)) / (2.0 * h);
                worst = worst.max((gp - fd).abs() / norm);
            }
        }
    }
    (worst <= FD_REL_TOL, format!("gradient vs central differences {worst:.1e}"))
}

fn brute_force() -> (bool, String, Vec<f64>) {
    let grid = AmplitudeGrid::new(vec![-1.0, 0.5]).unwrap();
    let set = build_elementary_set(&example_model(), &grid, 2).unwrap();
    let r = optimize(&set, &OptimizerConfig::default()).unwrap();
    let mats: Vec<_> = (0..4).map(|k| set.matrix(k)).collect();
    let steps = 200;
    let mut best = 0.0f64;
    for i in 0..=steps {
        for j in 0..=steps - i {
            for k in 0..=steps - i - j {
                let l = steps - i - j - k;
                let w = [i, j, k, l].map(|x| x as f64 / steps as f64);
                let m = &mats[0] * w[0] + &mats[1] * w[1] + &mats[2] * w[2] + &mats[3] * w[3];
                best = best.max(m.determinant());
            }
        }
    }
    (
        rel(r.det, best) <= BRUTE_FORCE_REL_TOL && r.det >= best * (1.0 - 1e-9),
        format!("brute force det {best:.6e} vs optimizer {:.6e}", r.det),
        r.det_trace,
    )
}

fn euler_round_trips(rng: &mut ChaCha8Rng) -> (bool, String) {
    let mut ok = 0;
    for _ in 0..200 {
        let a = rng.random_range(2..=3);
        let n = rng.random_range(1..=3);
        let len = rng.random_range(1..=30);
        let grid = AmplitudeGrid::uniform(a, -1.0, 1.0).unwrap();
        // periodic windows of any sequence form a balanced connected graph
        let seed: Vec<f64> = (0..len).map(|_| grid.level(rng.random_range(0..a))).collect();
        let counts = count_subsequences(&seed, &grid, n).unwrap();
        let graph = build_graph(&counts, a, n).unwrap();
        let path = euler_cycle(&graph).unwrap();
        let seq = path_to_sequence(&path, &grid, n).unwrap();
        if seq.len() == len && count_subsequences(&seq, &grid, n).unwrap() == counts {
            ok += 1;
        }
    }
    (ok == 200, format!("Euler round trips {ok}/200"))
}

fn basis_properties() -> (bool, String) {
    let mut checked = 0;
    let mut bad = Vec::new();
    for a in 2..=6 {
        for n in 1..=4 {
            let basis = build_symmetric_basis(a, n).unwrap();
            let space = basis.space();
            let dense: Vec<FrequencyVector> = (0..basis.len()).map(|j| basis.dense(j)).collect();
            let positive = dense.iter().all(|d| d.weights().iter().all(|&w| w >= 0.0));
            let non_overlap = (0..space.size())
                .all(|k| dense.iter().filter(|d| d.weights()[k] > 0.0).count() == 1);
            let unit = dense
                .iter()
                .all(|d| (d.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let symmetric = dense.iter().all(|d| {
                (0..space.size()).all(|k| {
                    let digits = space.decode(k).unwrap();
                    (0..n).all(|i| {
                        (i + 1..n).all(|j| {
                            let mut t = digits.clone();
                            t.swap(i, j);
                            d.weights()[space.encode(&t).unwrap()] == d.weights()[k]
                        })
                    })
                })
            });
            let balanced = basis.vectors().iter().all(|v| {
                let mut counts = CountVector::zeros(space.size());
                for &k in &v.support {
                    counts.add(k, 1);
                }
                let g = build_graph(&counts, a, n).unwrap();
                check_balance(&g).iter().all(|&x| x == 0)
            });
            checked += basis.len();
            if !(positive && non_overlap && unit && symmetric && balanced) {
                bad.push((a, n));
            }
        }
    }
    (
        bad.is_empty(),
        format!("{checked} basis vectors: balance and four set properties, failing (A, n): {bad:?}"),
    )
}

fn criterion_6(gate: &mut Gate, traces: &[&[f64]]) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut parts = Vec::new();
    let mut pass = true;
    for (ok, detail) in [trace_identity(&mut rng), fd_gradients()] {
        pass &= ok;
        parts.push(detail);
    }
    let (ok, detail, brute_trace) = brute_force();
    pass &= ok;
    parts.push(detail);
    let mut all_traces: Vec<&[f64]> = traces.to_vec();
    all_traces.push(&brute_trace);
    let extra: Vec<Vec<f64>> = [3, 5]
        .into_iter()
        .map(|a| {
            let g = AmplitudeGrid::uniform(a, -1.0, 1.0).unwrap();
            let s = build_elementary_set(&example_model(), &g, 2).unwrap();
            optimize(&s, &OptimizerConfig::default()).unwrap().det_trace
        })
        .collect();
    all_traces.extend(extra.iter().map(|t| t.as_slice()));
    let mono = all_traces.iter().all(|t| monotone(t));
    pass &= mono;
    parts.push(format!("{} monotone det traces: {mono}", all_traces.len()));
    for (ok, detail) in [euler_round_trips(&mut rng), basis_properties()] {
        pass &= ok;
        parts.push(detail);
    }
    gate.check("6", "property suite", pass, parts.join("; "));
}

fn criterion_7(gate: &mut Gate, config: &RunConfig) {
    let m = run_memory_experiment(config, &[2, 3]).unwrap();
    let (short, long) = (&m.rows[0], &m.rows[1]);
    let dev = rel(long.det, short.det);
    let pass = dev <= MEMLEN_REL_TOL && long.seconds > short.seconds;
    gate.check(
        "7",
        "memory vs subsequence length",
        pass,
        format!(
            "det L=2 {:.8e}, L=3 {:.8e} (rel {dev:.1e}); time {:.2e}s vs {:.2e}s",
            short.det, long.det, short.seconds, long.seconds
        ),
    );
}

fn criterion_8(gate: &mut Gate) {
    let amp = run_bench(&BenchSweep::amplitude([4, 8, 12, 16])).unwrap();
    let times: Vec<f64> = amp.iter().map(|r| r.optimize_seconds).collect();
    let nondecreasing = times.windows(2).all(|w| w[1] >= w[0]);
    gate.check(
        "8a",
        "optimization time over A at n=2",
        nondecreasing,
        format!(
            "A 4/8/12/16 median seconds {}",
            times.iter().map(|t| format!("{t:.2e}")).collect::<Vec<_>>().join(" ")
        ),
    );

    let mem = run_bench(&BenchSweep::memory(2..=8)).unwrap();
    let rows: Vec<String> = mem
        .iter()
        .map(|r| format!("n={} {:.2e}/{:.2e}", r.memory, r.basis_seconds, r.optimize_seconds))
        .collect();
    let dominated = mem
        .iter()
        .filter(|r| r.memory >= 6)
        .all(|r| r.basis_seconds > r.optimize_seconds);
    gate.check(
        "8b",
        "basis time dominates at A=3, n>=6",
        dominated,
        format!("basis/optimize median seconds {}", rows.join(", ")),
    );
}

fn main() -> ExitCode {
    let mut gate = Gate { failures: 0 };
    let config = shipped();

    let start = Instant::now();
    let unconstrained = run_realize(&config).unwrap();
    let budget = start.elapsed().as_secs_f64();
    let mut constrained_config = config.clone();
    constrained_config.design.mode = Mode::Constrained;
    let constrained = run_realize(&constrained_config).unwrap();
    assert_eq!(
        run_design(&config).unwrap().det,
        unconstrained.det,
        "design and realize pipelines disagree"
    );

    gate.check(
        "0",
        "end-to-end budget",
        budget < BUDGET_SECONDS,
        format!("optimize and realize in {budget:.3}s"),
    );
    criterion_1(&mut gate, &unconstrained);
    criterion_2(&mut gate, &constrained);
    criterion_3(&mut gate, &constrained);
    criterion_4(&mut gate, &unconstrained);
    criterion_5(&mut gate, &config, constrained.det);
    let traces = [
        unconstrained.trace.as_ref().unwrap().det.as_slice(),
        constrained.trace.as_ref().unwrap().det.as_slice(),
    ];
    criterion_6(&mut gate, &traces);
    criterion_7(&mut gate, &config);
    criterion_8(&mut gate);

    if gate.failures == 0 {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria fail", gate.failures);
        ExitCode::FAILURE
    }
}
