//! Turning a count vector into a periodic input sequence.
//!
//! Every length-`n` subsequence is an edge of a directed multigraph whose
//! nodes are the length-`(n-1)` windows: subsequence `(d_0, ..., d_{n-1})`
//! leaves node `(d_0, ..., d_{n-2})` and enters node `(d_1, ..., d_{n-1})`.
//! A periodic sequence with the requested counts exists exactly when the
//! graph restricted to its positive-multiplicity edges is connected and every
//! node is balanced. The sequence is then read off an Euler circuit by
//! emitting the newest sample of each edge.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::design_space::{
    count_subsequences, denormalize_round, round_nearest, AmplitudeGrid, CountVector,
    FrequencyVector, SubseqSpace,
};
use crate::error::{Error, Result};

/// Associated multigraph of a count vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignGraph {
    levels: usize,
    memory: usize,
    node_count: usize,
    counts: CountVector,
}

pub fn build_graph(counts: &CountVector, levels: usize, memory: usize) -> Result<DesignGraph> {
    let space = SubseqSpace::new(levels, memory)?;
    if counts.len() != space.size() {
        return Err(Error::domain(format!(
            "count vector has {} entries, expected {levels}^{memory} = {}",
            counts.len(),
            space.size()
        )));
    }
    Ok(DesignGraph {
        levels,
        memory,
        node_count: space.size() / levels,
        counts: counts.clone(),
    })
}

impl DesignGraph {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn counts(&self) -> &CountVector {
        &self.counts
    }

    pub fn edge_count(&self) -> u64 {
        self.counts.total()
    }

    /// Node the edge of subsequence `k` leaves (drop the newest sample).
    pub fn left(&self, k: usize) -> usize {
        k % self.node_count
    }

    /// Node the edge of subsequence `k` enters (drop the oldest sample).
    pub fn right(&self, k: usize) -> usize {
        k / self.levels
    }

    /// Positive-multiplicity edges as `(k, from, to, multiplicity)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, usize, u64)> + '_ {
        self.counts
            .counts()
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0)
            .map(|(k, &m)| (k, self.left(k), self.right(k), m))
    }

    /// Subsequence index of the edge leaving `node` with newest sample `digit`.
    fn edge_from(&self, node: usize, digit: usize) -> usize {
        node + digit * self.node_count
    }

    /// Renders the graph in DOT. Nodes are labelled with their window values;
    /// edges with one-based `k:multiplicity`. Multiplicity listed in `added`
    /// is drawn as a separate dashed edge.
    pub fn to_dot(&self, grid: &AmplitudeGrid, added: &[(usize, u64)]) -> Result<String> {
        if grid.len() != self.levels {
            return Err(Error::domain("grid does not match the graph"));
        }
        let added: BTreeMap<usize, u64> = added.iter().copied().collect();
        let node_space = SubseqSpace::new(self.levels, self.memory.saturating_sub(1).max(1))?;
        let label = |node: usize| -> Result<String> {
            if self.memory == 1 {
                return Ok("()".into());
            }
            let vals = node_space.values(node, grid)?;
            Ok(format!(
                "({})",
                vals.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ")
            ))
        };
        let mut degree = vec![0u64; self.node_count];
        for (_, from, to, m) in self.edges() {
            degree[from] += m;
            degree[to] += m;
        }
        let mut out = String::from("digraph design {\n");
        for (node, _) in degree.iter().enumerate().filter(|(_, &d)| d > 0) {
            writeln!(out, "  n{node} [label=\"{}\"];", label(node)?).unwrap();
        }
        for (k, from, to, m) in self.edges() {
            let extra = added.get(&k).copied().unwrap_or(0).min(m);
            if m > extra {
                writeln!(out, "  n{from} -> n{to} [label=\"{}:{}\"];", k + 1, m - extra).unwrap();
            }
            if extra > 0 {
                writeln!(
                    out,
                    "  n{from} -> n{to} [label=\"{}:{}\", style=dashed];",
                    k + 1,
                    extra
                )
                .unwrap();
            }
        }
        out.push_str("}\n");
        Ok(out)
    }
}

/// Out-degree minus in-degree of every node.
pub fn check_balance(graph: &DesignGraph) -> Vec<i64> {
    let mut imbalance = vec![0i64; graph.node_count];
    for (_, from, to, m) in graph.edges() {
        imbalance[from] += m as i64;
        imbalance[to] -= m as i64;
    }
    imbalance
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Weakly connected components over positive-multiplicity edges. Nodes
/// without edges are omitted; components are sorted by their lowest node.
pub fn check_connected(graph: &DesignGraph) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..graph.node_count).collect();
    let mut touched = vec![false; graph.node_count];
    for (_, from, to, _) in graph.edges() {
        touched[from] = true;
        touched[to] = true;
        let (a, b) = (find(&mut parent, from), find(&mut parent, to));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for node in (0..graph.node_count).filter(|&v| touched[v]) {
        let root = find(&mut parent, node);
        groups.entry(root).or_default().push(node);
    }
    let mut comps: Vec<Vec<usize>> = groups.into_values().collect();
    comps.sort_by_key(|c| c[0]);
    comps
}

/// Euler circuit through the graph, as subsequence indices in traversal
/// order. Edges leaving a node are taken in ascending `k`; the walk starts at
/// the lowest node with an edge.
pub fn euler_cycle(graph: &DesignGraph) -> Result<Vec<usize>> {
    if let Some(node) = check_balance(graph).iter().position(|&d| d != 0) {
        return Err(Error::Realizability(format!(
            "node {node} is unbalanced (out-degree differs from in-degree)"
        )));
    }
    let comps = check_connected(graph);
    match comps.len() {
        0 => return Err(Error::Realizability("the graph has no edges".into())),
        1 => {}
        c => {
            return Err(Error::Realizability(format!(
                "the graph is disconnected ({c} components)"
            )))
        }
    }

    let mut remaining: Vec<u64> = graph.counts.counts().to_vec();
    let mut next_digit = vec![0usize; graph.node_count];
    let start = comps[0][0];
    let mut stack: Vec<(usize, Option<usize>)> = vec![(start, None)];
    let mut path = Vec::with_capacity(graph.edge_count() as usize);
    while let Some(&(node, _)) = stack.last() {
        let mut taken = None;
        while next_digit[node] < graph.levels {
            let k = graph.edge_from(node, next_digit[node]);
            if remaining[k] > 0 {
                remaining[k] -= 1;
                taken = Some(k);
                break;
            }
            next_digit[node] += 1;
        }
        match taken {
            Some(k) => stack.push((graph.right(k), Some(k))),
            None => {
                if let Some((_, Some(k))) = stack.pop() {
                    path.push(k);
                }
            }
        }
    }
    path.reverse();
    Ok(path)
}

/// Emits the newest sample of every edge of a closed walk.
pub fn path_to_sequence(path: &[usize], grid: &AmplitudeGrid, memory: usize) -> Result<Vec<f64>> {
    let space = SubseqSpace::new(grid.len(), memory)?;
    let shift = space.size() / grid.len();
    path.iter()
        .map(|&k| {
            space.check_index(k)?;
            Ok(grid.level(k / shift))
        })
        .collect()
}

/// Shortest walk from node `from` to node `to` in the complete de Bruijn
/// graph, as the subsequence indices of its edges. Never longer than
/// `memory - 1` edges.
fn de_bruijn_walk(graph: &DesignGraph, from: usize, to: usize) -> Vec<usize> {
    let width = graph.memory - 1;
    let a = graph.levels;
    let digits = |mut x: usize| -> Vec<usize> {
        (0..width)
            .map(|_| {
                let d = x % a;
                x /= a;
                d
            })
            .collect()
    };
    let (src, dst) = (digits(from), digits(to));
    let shift = (1..=width)
        .find(|&s| src[s..] == dst[..width - s])
        .unwrap_or(width);
    let mut node = from;
    dst[width - shift..]
        .iter()
        .map(|&d| {
            let k = graph.edge_from(node, d);
            node = graph.right(k);
            k
        })
        .collect()
}

/// Adds edges until the graph is balanced and connected. Existing counts are
/// never reduced. Returns the repaired counts and the added multiplicity per
/// subsequence, ascending in `k`.
pub fn repair(
    counts: &CountVector,
    levels: usize,
    memory: usize,
) -> Result<(CountVector, Vec<(usize, u64)>)> {
    let mut graph = build_graph(counts, levels, memory)?;
    let mut added: BTreeMap<usize, u64> = BTreeMap::new();
    if memory == 1 {
        // a single node carrying only self-loops is always realizable
        return Ok((graph.counts, Vec::new()));
    }
    let mut add_walk = |graph: &mut DesignGraph, from: usize, to: usize, times: u64| {
        for k in de_bruijn_walk(graph, from, to) {
            graph.counts.add(k, times);
            *added.entry(k).or_default() += times;
        }
    };

    // walks run from nodes with excess in-degree to nodes with excess out-degree
    let imbalance = check_balance(&graph);
    let mut deficit: Vec<(usize, u64)> = imbalance
        .iter()
        .enumerate()
        .filter(|(_, &d)| d < 0)
        .map(|(v, &d)| (v, d.unsigned_abs()))
        .collect();
    let mut surplus: Vec<(usize, u64)> = imbalance
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > 0)
        .map(|(v, &d)| (v, d as u64))
        .collect();
    let (mut i, mut j) = (0, 0);
    while i < deficit.len() && j < surplus.len() {
        let times = deficit[i].1.min(surplus[j].1);
        add_walk(&mut graph, deficit[i].0, surplus[j].0, times);
        deficit[i].1 -= times;
        surplus[j].1 -= times;
        if deficit[i].1 == 0 {
            i += 1;
        }
        if surplus[j].1 == 0 {
            j += 1;
        }
    }

    loop {
        let comps = check_connected(&graph);
        if comps.len() <= 1 {
            break;
        }
        let largest = comps
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| a.len().cmp(&b.len()).then(ib.cmp(ia)))
            .map(|(i, _)| i)
            .unwrap();
        let other = (0..comps.len()).find(|&i| i != largest).unwrap();
        let (a, b) = (comps[largest][0], comps[other][0]);
        add_walk(&mut graph, a, b, 1);
        add_walk(&mut graph, b, a, 1);
    }

    Ok((graph.counts, added.into_iter().collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rounding {
    /// Exact total via largest-remainder apportionment.
    #[default]
    LargestRemainder,
    /// Independent nearest-integer rounding; the total may drift.
    Nearest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationReport {
    pub sequence: Vec<f64>,
    pub achieved_counts: CountVector,
    pub requested_counts: CountVector,
    pub added_edges: Vec<(usize, u64)>,
    /// `max_k |achieved(k)/N_achieved - requested(k)/N_requested|`.
    pub max_frequency_error: f64,
    /// `max_k |achieved(k)/N_achieved - design(k)|`.
    pub max_design_error: f64,
}

impl RealizationReport {
    /// Graph of the realized counts.
    pub fn graph(&self, levels: usize, memory: usize) -> Result<DesignGraph> {
        build_graph(&self.achieved_counts, levels, memory)
    }
}

fn max_abs_diff(a: &CountVector, b: &[f64]) -> f64 {
    let n = a.total() as f64;
    a.counts()
        .iter()
        .zip(b)
        .map(|(&c, &w)| (c as f64 / n - w).abs())
        .fold(0.0, f64::max)
}

/// Rounds a design to `total` samples, repairs it if necessary and returns a
/// periodic sequence realizing the result.
pub fn realize(
    design: &FrequencyVector,
    total: u64,
    grid: &AmplitudeGrid,
    memory: usize,
    rounding: Rounding,
) -> Result<RealizationReport> {
    if total < 1 {
        return Err(Error::domain("sequence length must be at least 1"));
    }
    let space = SubseqSpace::new(grid.len(), memory)?;
    if design.len() != space.size() {
        return Err(Error::domain(format!(
            "design has {} entries, expected {}",
            design.len(),
            space.size()
        )));
    }
    let requested = match rounding {
        Rounding::LargestRemainder => denormalize_round(design, total),
        Rounding::Nearest => round_nearest(design, total),
    };
    if requested.total() == 0 {
        return Err(Error::Realizability(format!(
            "rounding the design to {total} samples leaves no subsequences"
        )));
    }
    let (repaired, added_edges) = repair(&requested, grid.len(), memory)?;
    let graph = build_graph(&repaired, grid.len(), memory)?;
    let path = euler_cycle(&graph)?;
    let sequence = path_to_sequence(&path, grid, memory)?;
    let achieved = count_subsequences(&sequence, grid, memory)?;
    debug_assert_eq!(achieved, repaired);
    let requested_freq = FrequencyVector::from_counts(&requested)?;
    Ok(RealizationReport {
        max_frequency_error: max_abs_diff(&achieved, requested_freq.weights()),
        max_design_error: max_abs_diff(&achieved, design.weights()),
        sequence,
        achieved_counts: achieved,
        requested_counts: requested,
        added_edges,
    })
}
