//! Undirected simple graphs: edge-list ingestion, adjacency access and
//! spectral diagnostics.
//!
//! The text format is one `i j` pair per line with 0-based node indices.
//! Lines starting with `#` are comments, and an optional `n <count>` header
//! fixes the node count so that isolated trailing nodes are kept.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Default tolerance for [`spectral_radius`].
pub const DEFAULT_SPECTRAL_TOL: f64 = 1e-10;

/// Iteration cap for the power iteration.
pub const POWER_ITERATION_CAP: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("node {node} out of range for a graph with {node_count} nodes")]
    NodeOutOfRange { node: usize, node_count: usize },
    #[error("graph has no nodes")]
    Empty,
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("power iteration did not converge after {iterations} iterations (bracket [{lower}, {upper}])")]
    NoConvergence {
        iterations: usize,
        lower: f64,
        upper: f64,
        last_iterate: Vec<f64>,
    },
}

/// Undirected simple graph on nodes `0..node_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from unordered pairs. Duplicates (in either orientation)
    /// are merged; self-loops and out-of-range indices are rejected.
    pub fn new(
        node_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            for node in [i, j] {
                if node >= node_count {
                    return Err(GraphError::NodeOutOfRange { node, node_count });
                }
            }
            set.insert((i.min(j), i.max(j)));
        }
        let mut adjacency = vec![Vec::new(); node_count];
        for &(i, j) in &set {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for row in &mut adjacency {
            row.sort_unstable();
        }
        Ok(Self {
            node_count,
            edges: set.into_iter().collect(),
            adjacency,
        })
    }

    pub fn edgeless(node_count: usize) -> Self {
        Self::new(node_count, []).expect("edgeless graph is always valid")
    }

    pub fn path(node_count: usize) -> Self {
        Self::new(node_count, (1..node_count).map(|i| (i - 1, i))).expect("valid path")
    }

    /// Star with the hub at node 0 and `leaves` leaves.
    pub fn star(leaves: usize) -> Self {
        Self::new(leaves + 1, (1..=leaves).map(|i| (0, i))).expect("valid star")
    }

    pub fn complete(node_count: usize) -> Self {
        let edges = (0..node_count).flat_map(|i| ((i + 1)..node_count).map(move |j| (i, j)));
        Self::new(node_count, edges).expect("valid complete graph")
    }

    /// G(n, p) random graph from a seeded stream.
    pub fn erdos_renyi(node_count: usize, edge_probability: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..node_count {
            for j in (i + 1)..node_count {
                if rng.random::<f64>() < edge_probability {
                    edges.push((i, j));
                }
            }
        }
        Self::new(node_count, edges).expect("valid random graph")
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    /// Dense {0,1} adjacency matrix.
    pub fn adjacency_matrix(&self) -> nalgebra::DMatrix<f64> {
        let n = self.node_count;
        let mut a = nalgebra::DMatrix::zeros(n, n);
        for &(i, j) in &self.edges {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        a
    }

    /// Serializes to the edge-list format, always with an `n` header.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n {}\n", self.node_count);
        for &(i, j) in &self.edges {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }
}

/// Parses the edge-list text format.
pub fn load_edge_list(text: &str) -> Result<Graph, GraphError> {
    let mut declared: Option<usize> = None;
    let mut edges = Vec::new();
    let mut max_node: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| {
            s.parse::<usize>().map_err(|_| GraphError::Parse {
                line: line_no,
                message: format!("expected a non-negative integer, found {s:?}"),
            })
        };
        match parts.as_slice() {
            ["n", count] => {
                if declared.is_some() {
                    return Err(GraphError::Parse {
                        line: line_no,
                        message: "duplicate node-count header".into(),
                    });
                }
                declared = Some(parse(count)?);
            }
            [a, b] => {
                let (i, j) = (parse(a)?, parse(b)?);
                if i == j {
                    return Err(GraphError::SelfLoop(i));
                }
                max_node = Some(max_node.map_or(i.max(j), |m| m.max(i).max(j)));
                edges.push((i, j));
            }
            _ => {
                return Err(GraphError::Parse {
                    line: line_no,
                    message: format!("expected \"i j\" or \"n <count>\", found {line:?}"),
                })
            }
        }
    }
    let inferred = max_node.map_or(0, |m| m + 1);
    let node_count = match declared {
        Some(n) if n < inferred => {
            return Err(GraphError::NodeOutOfRange {
                node: inferred - 1,
                node_count: n,
            })
        }
        Some(n) => n,
        None => inferred,
    };
    Graph::new(node_count, edges)
}

pub fn degrees(g: &Graph) -> Vec<usize> {
    (0..g.node_count()).map(|i| g.neighbors(i).len()).collect()
}

/// Largest eigenvalue of the adjacency matrix.
///
/// Runs power iteration on `A + I` from the all-ones vector and stops once
/// the Collatz–Wielandt bracket is narrower than `tol`. The shift makes the
/// iteration converge on bipartite graphs, where `±ρ` are both eigenvalues.
pub fn spectral_radius(g: &Graph, tol: f64) -> Result<f64, GraphError> {
    if g.node_count() == 0 {
        return Err(GraphError::Empty);
    }
    if !(tol > 0.0) {
        return Err(GraphError::BadTolerance(tol));
    }
    if g.edge_count() == 0 {
        return Ok(0.0);
    }
    let n = g.node_count();
    let apply = |x: &[f64], y: &mut [f64]| {
        for i in 0..n {
            y[i] = x[i] + g.neighbors(i).iter().map(|&j| x[j]).sum::<f64>();
        }
    };
    let est = crate::linalg::perron_root(n, apply, tol, POWER_ITERATION_CAP).map_err(|e| {
        GraphError::NoConvergence {
            iterations: e.iterations,
            lower: e.lower - 1.0,
            upper: e.upper - 1.0,
            last_iterate: e.last_iterate,
        }
    })?;
    Ok((0.5 * (est.lower + est.upper) - 1.0).max(0.0))
}

/// Random connected-ish graph whose spectral radius is tuned toward
/// `target_radius` by greedy edge additions and removals.
///
/// Starts from a Chung–Lu graph with a heavy-tailed weight sequence, which
/// gives the hub structure typical of social contact data.
pub fn synthetic_social(node_count: usize, target_radius: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = node_count;
    let weights: Vec<f64> = (0..n).map(|i| (n as f64 / (i as f64 + 1.0)).powf(0.5)).collect();
    let total: f64 = weights.iter().sum();
    let mean_degree = (target_radius * 0.6).max(1.0);
    let scale = mean_degree * n as f64 / total;
    let mut set = BTreeSet::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = (scale * weights[i] * weights[j] / total).min(1.0);
            if rng.random::<f64>() < p {
                set.insert((i, j));
            }
        }
    }
    // keep every node attached to something
    for i in 0..n {
        if !set.iter().any(|&(a, b)| a == i || b == i) {
            let mut j = rng.random_range(0..n);
            while j == i {
                j = rng.random_range(0..n);
            }
            set.insert((i.min(j), i.max(j)));
        }
    }
    let radius = |set: &BTreeSet<(usize, usize)>| {
        let g = Graph::new(n, set.iter().copied()).expect("valid");
        spectral_radius(&g, 1e-9).expect("converges")
    };
    let mut rho = radius(&set);
    for _ in 0..20_000 {
        if (rho - target_radius).abs() < 5e-3 {
            break;
        }
        let mut candidate = set.clone();
        if rho < target_radius {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j || !candidate.insert((i.min(j), i.max(j))) {
                continue;
            }
        } else {
            let mut pool: Vec<_> = candidate.iter().copied().collect();
            pool.shuffle(&mut rng);
            let Some(edge) = pool.into_iter().find(|&(a, b)| {
                let deg = |v: usize| set.iter().filter(|&&(x, y)| x == v || y == v).count();
                deg(a) > 1 && deg(b) > 1
            }) else {
                break;
            };
            candidate.remove(&edge);
        }
        let next = radius(&candidate);
        // greedy: keep only moves that get closer
        if (next - target_radius).abs() < (rho - target_radius).abs() {
            set = candidate;
            rho = next;
        }
    }
    Graph::new(n, set).expect("valid synthetic graph")
}
