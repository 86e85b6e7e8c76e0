//! Exact expected outcomes of the SIR chain on its full product state space.
//!
//! Each node carries a tag `S`, `I_ℓ` (phase `ℓ` of its infectious period) or
//! `R`, packed as a mixed-radix integer. Only states reachable from the
//! initial configuration are materialized. Intended as a test oracle for
//! small graphs, not as a production path.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::graph::Graph;
use crate::simulator::{EpidemicParams, SimError};

/// Upper limit on the size of the full state space `(p+2)^n`.
pub const STATE_CAP: u64 = 1_000_000;

/// Largest transient block solved densely when phases can move backwards.
const DENSE_FALLBACK_CAP: usize = 4_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("state space has {states} states, above the cap of {STATE_CAP}")]
    TooManyStates { states: u128 },
    #[error("singular hitting system")]
    Singular,
    #[error("non-monotone phase dynamics with {0} reachable states exceed the dense solver cap")]
    DenseTooLarge(usize),
    #[error("time grid must be nondecreasing and nonnegative")]
    BadGrid,
    #[error(transparent)]
    Params(#[from] SimError),
}

/// Per-node tag of the product chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeTag {
    Susceptible,
    /// 0-based phase index.
    Infected(usize),
    Removed,
}

/// Mixed-radix encoding of [`NodeTag`] vectors with radix `p + 2`.
#[derive(Debug, Clone, Copy)]
pub struct ChainState {
    phases: usize,
}

impl ChainState {
    pub fn new(phases: usize) -> Self {
        Self { phases }
    }

    pub fn radix(&self) -> u64 {
        self.phases as u64 + 2
    }

    fn digit(&self, tag: NodeTag) -> u64 {
        match tag {
            NodeTag::Susceptible => 0,
            NodeTag::Infected(l) => 1 + l as u64,
            NodeTag::Removed => self.phases as u64 + 1,
        }
    }

    fn tag(&self, digit: u64) -> NodeTag {
        match digit {
            0 => NodeTag::Susceptible,
            d if d == self.phases as u64 + 1 => NodeTag::Removed,
            d => NodeTag::Infected(d as usize - 1),
        }
    }

    /// Node 0 is the least significant digit.
    pub fn encode(&self, tags: &[NodeTag]) -> u64 {
        tags.iter()
            .rev()
            .fold(0, |acc, &t| acc * self.radix() + self.digit(t))
    }

    pub fn decode(&self, mut code: u64, node_count: usize) -> Vec<NodeTag> {
        (0..node_count)
            .map(|_| {
                let d = code % self.radix();
                code /= self.radix();
                self.tag(d)
            })
            .collect()
    }

    pub fn state_count(&self, node_count: usize) -> u128 {
        (self.radix() as u128).pow(node_count as u32)
    }
}

/// Reachable part of the chain with its transition structure.
struct Chain {
    codes: Vec<u64>,
    /// `transitions[s]` lists `(target, rate)`.
    transitions: Vec<Vec<(usize, f64)>>,
    removed: Vec<usize>,
    initial: usize,
    /// Every transition increases the code.
    monotone: bool,
}

fn build_chain(g: &Graph, params: &EpidemicParams) -> Result<Chain, OracleError> {
    params.check_graph(g)?;
    let n = g.node_count();
    let p = params.phases();
    let enc = ChainState::new(p);
    let states = enc.state_count(n);
    if states > STATE_CAP as u128 {
        return Err(OracleError::TooManyStates { states });
    }
    let laws: Vec<_> = (0..n).map(|i| params.removal_law(i)).collect();
    // infections raise a digit from S = 0 whatever the entry phase, so only
    // backward phase moves can lower a code
    let monotone = laws.iter().all(|l| l.is_upper_triangular());
    let exits: Vec<DVector<f64>> = laws.iter().map(crate::phase_type::exit_rates).collect();

    // initially infected nodes start in phase 0, as every law built here does
    let mut start = vec![NodeTag::Susceptible; n];
    for &i in params.initially_infected() {
        start[i] = NodeTag::Infected(0);
    }
    let initial_code = enc.encode(&start);

    let mut index: HashMap<u64, usize> = HashMap::new();
    let mut codes = vec![initial_code];
    let mut transitions: Vec<Vec<(usize, f64)>> = Vec::new();
    index.insert(initial_code, 0);
    let mut cursor = 0;
    while cursor < codes.len() {
        let tags = enc.decode(codes[cursor], n);
        let mut out: Vec<(u64, f64)> = Vec::new();
        for v in 0..n {
            match tags[v] {
                NodeTag::Susceptible => {
                    let k = g
                        .neighbors(v)
                        .iter()
                        .filter(|&&u| matches!(tags[u], NodeTag::Infected(_)))
                        .count();
                    if k > 0 {
                        let rate = params.beta()[v] * k as f64;
                        for (phase, &w) in laws[v].initial().iter().enumerate() {
                            if w > 0.0 {
                                let mut next = tags.clone();
                                next[v] = NodeTag::Infected(phase);
                                out.push((enc.encode(&next), rate * w));
                            }
                        }
                    }
                }
                NodeTag::Infected(l) => {
                    let gen = laws[v].generator();
                    for m in 0..p {
                        if m != l && gen[(l, m)] > 0.0 {
                            let mut next = tags.clone();
                            next[v] = NodeTag::Infected(m);
                            out.push((enc.encode(&next), gen[(l, m)]));
                        }
                    }
                    if exits[v][l] > 0.0 {
                        let mut next = tags.clone();
                        next[v] = NodeTag::Removed;
                        out.push((enc.encode(&next), exits[v][l]));
                    }
                }
                NodeTag::Removed => {}
            }
        }
        let mut row = Vec::with_capacity(out.len());
        for (code, rate) in out {
            let target = *index.entry(code).or_insert_with(|| {
                codes.push(code);
                codes.len() - 1
            });
            row.push((target, rate));
        }
        transitions.push(row);
        cursor += 1;
    }
    let removed = codes
        .iter()
        .map(|&c| {
            enc.decode(c, n)
                .iter()
                .filter(|t| **t == NodeTag::Removed)
                .count()
        })
        .collect();
    Ok(Chain {
        codes,
        transitions,
        removed,
        initial: 0,
        monotone,
    })
}

/// Exact `λ`: expected number of nodes infected after time zero.
///
/// Solves the hitting system `h(s) = Σ q(s,s')/q(s) · h(s')` with
/// `h = #removed` on absorbing states. When every transition raises the state
/// code the system is triangular and is solved by back substitution in
/// decreasing code order; otherwise the transient block is solved densely.
pub fn exact_lambda(g: &Graph, params: &EpidemicParams) -> Result<f64, OracleError> {
    let chain = build_chain(g, params)?;
    let h = if chain.monotone {
        let mut order: Vec<usize> = (0..chain.codes.len()).collect();
        order.sort_unstable_by(|&a, &b| chain.codes[b].cmp(&chain.codes[a]));
        let mut h = vec![0.0; chain.codes.len()];
        for s in order {
            let row = &chain.transitions[s];
            if row.is_empty() {
                h[s] = chain.removed[s] as f64;
            } else {
                let total: f64 = row.iter().map(|(_, r)| r).sum();
                h[s] = row.iter().map(|&(t, r)| r * h[t]).sum::<f64>() / total;
            }
        }
        h[chain.initial]
    } else {
        dense_hitting(&chain)?
    };
    Ok((h - params.initial_infected_count() as f64).max(0.0))
}

fn dense_hitting(chain: &Chain) -> Result<f64, OracleError> {
    let transient: Vec<usize> = (0..chain.codes.len())
        .filter(|&s| !chain.transitions[s].is_empty())
        .collect();
    if transient.len() > DENSE_FALLBACK_CAP {
        return Err(OracleError::DenseTooLarge(transient.len()));
    }
    let mut pos = vec![usize::MAX; chain.codes.len()];
    for (k, &s) in transient.iter().enumerate() {
        pos[s] = k;
    }
    let m = transient.len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut b = DVector::<f64>::zeros(m);
    for (k, &s) in transient.iter().enumerate() {
        let total: f64 = chain.transitions[s].iter().map(|(_, r)| r).sum();
        a[(k, k)] = total;
        for &(t, r) in &chain.transitions[s] {
            if pos[t] == usize::MAX {
                b[k] += r * chain.removed[t] as f64;
            } else {
                a[(k, pos[t])] -= r;
            }
        }
    }
    let x = a.lu().solve(&b).ok_or(OracleError::Singular)?;
    Ok(if pos[chain.initial] == usize::MAX {
        chain.removed[chain.initial] as f64
    } else {
        x[pos[chain.initial]]
    })
}

/// `E[σ_R(t)]` on a nondecreasing time grid, by uniformization of the
/// reachable chain.
pub fn exact_removed_series(
    g: &Graph,
    params: &EpidemicParams,
    t_grid: &[f64],
) -> Result<Vec<f64>, OracleError> {
    if t_grid.iter().any(|&t| !(t >= 0.0)) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(OracleError::BadGrid);
    }
    let chain = build_chain(g, params)?;
    let size = chain.codes.len();
    let out_rate: Vec<f64> = chain
        .transitions
        .iter()
        .map(|row| row.iter().map(|(_, r)| r).sum())
        .collect();
    let uniform = out_rate.iter().copied().fold(0.0, f64::max);
    let removed: Vec<f64> = chain.removed.iter().map(|&r| r as f64).collect();
    if uniform == 0.0 {
        return Ok(vec![removed[chain.initial]; t_grid.len()]);
    }
    let t_max = t_grid.last().copied().unwrap_or(0.0);
    let horizon = uniform * t_max;
    // Poisson(horizon) tail below 1e-15 well before this many jumps
    let max_jumps = (horizon + 12.0 * horizon.sqrt() + 60.0).ceil() as usize;

    let mut dist = vec![0.0; size];
    dist[chain.initial] = 1.0;
    let mut next = vec![0.0; size];
    let mut result = vec![0.0; t_grid.len()];
    let mut accumulated = vec![0.0; t_grid.len()];
    for k in 0..=max_jumps {
        let expected: f64 = dist.iter().zip(&removed).map(|(p, r)| p * r).sum();
        for (idx, &t) in t_grid.iter().enumerate() {
            let lt = uniform * t;
            let log_w = if lt == 0.0 {
                if k == 0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            } else {
                -lt + k as f64 * lt.ln() - ln_factorial(k)
            };
            let w = log_w.exp();
            result[idx] += w * expected;
            accumulated[idx] += w;
        }
        // one step of the uniformized jump chain
        next.iter_mut().for_each(|v| *v = 0.0);
        for s in 0..size {
            let mass = dist[s];
            if mass == 0.0 {
                continue;
            }
            let stay = 1.0 - out_rate[s] / uniform;
            next[s] += mass * stay;
            for &(t, r) in &chain.transitions[s] {
                next[t] += mass * r / uniform;
            }
        }
        std::mem::swap(&mut dist, &mut next);
    }
    // remaining tail mass sits at the final distribution's value at worst
    let tail_value: f64 = dist.iter().zip(&removed).map(|(p, r)| p * r).sum();
    for (r, acc) in result.iter_mut().zip(&accumulated) {
        *r += (1.0 - acc).max(0.0) * tail_value;
    }
    Ok(result)
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_type::{erlang, ErlangSpec};
    use approx::assert_abs_diff_eq;

    #[test]
    fn encoding_round_trips() {
        let enc = ChainState::new(2);
        let tags = vec![
            NodeTag::Removed,
            NodeTag::Infected(1),
            NodeTag::Susceptible,
            NodeTag::Infected(0),
        ];
        let code = enc.encode(&tags);
        assert_eq!(enc.decode(code, 4), tags);
        assert_eq!(enc.state_count(4), 256);
        assert_eq!(ChainState::new(1).state_count(3), 27);
    }

    #[test]
    fn edgeless_is_zero() {
        let g = Graph::edgeless(4);
        let p = EpidemicParams::uniform(4, 0.5, 0.5, [1]).unwrap();
        assert_eq!(exact_lambda(&g, &p).unwrap(), 0.0);
    }

    #[test]
    fn two_node_closed_form() {
        let g = Graph::path(2);
        let p = EpidemicParams::new(vec![0.2, 0.2], vec![0.5, 0.5], [0]).unwrap();
        assert_abs_diff_eq!(exact_lambda(&g, &p).unwrap(), 2.0 / 7.0, epsilon = 1e-14);
    }

    #[test]
    fn star_closed_form() {
        let g = Graph::star(3);
        let p = EpidemicParams::uniform(4, 0.1, 0.1, [0]).unwrap();
        assert_abs_diff_eq!(exact_lambda(&g, &p).unwrap(), 1.5, epsilon = 1e-13);
    }

    #[test]
    fn cap_enforced() {
        let g = Graph::path(13);
        let p = EpidemicParams::uniform(13, 0.1, 0.1, [0]).unwrap();
        assert!(matches!(
            exact_lambda(&g, &p),
            Err(OracleError::TooManyStates { .. })
        ));
    }

    #[test]
    fn isolation_two_node_against_closed_form() {
        // node 1 is infected iff the Exp(β) clock beats Z_0 ~ (u₁, Π');
        // P = 1 - E[e^{-βZ}] = 1 - u₁ (β I - Π')⁻¹ w'
        let g = Graph::path(2);
        let beta = 0.7;
        let laws = vec![erlang(ErlangSpec::new(2, 1.5).unwrap()); 2];
        let p = EpidemicParams::uniform(2, beta, 0.3, [0])
            .unwrap()
            .with_isolation(laws)
            .unwrap();
        let z = p.removal_law(0);
        let w = crate::phase_type::exit_rates(&z);
        let m = DMatrix::identity(2, 2) * beta - z.generator();
        let lst = m.lu().solve(&w).unwrap()[0];
        assert_abs_diff_eq!(exact_lambda(&g, &p).unwrap(), 1.0 - lst, epsilon = 1e-13);
    }

    #[test]
    fn dense_fallback_agrees_with_triangular() {
        let g = Graph::path(3);
        let p = EpidemicParams::uniform(3, 0.4, 0.3, [1]).unwrap();
        let chain = build_chain(&g, &p).unwrap();
        let dense = dense_hitting(&chain).unwrap() - 1.0;
        assert_abs_diff_eq!(dense, exact_lambda(&g, &p).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn removed_series_limits() {
        let g = Graph::path(2);
        let p = EpidemicParams::new(vec![0.2, 0.2], vec![0.5, 0.5], [0]).unwrap();
        let series = exact_removed_series(&g, &p, &[0.0, 1.0, 5.0, 200.0]).unwrap();
        assert_eq!(series[0], 0.0);
        assert!(series.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert_abs_diff_eq!(series[3], 1.0 + 2.0 / 7.0, epsilon = 1e-9);

        let single = EpidemicParams::uniform(1, 1.0, 1.0, [0]).unwrap();
        let s = exact_removed_series(&Graph::edgeless(1), &single, &[1.0]).unwrap();
        assert_abs_diff_eq!(s[0], 1.0 - (-1.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn removed_series_rejects_bad_grid() {
        let g = Graph::path(2);
        let p = EpidemicParams::uniform(2, 0.2, 0.5, [0]).unwrap();
        assert_eq!(
            exact_removed_series(&g, &p, &[1.0, 0.5]),
            Err(OracleError::BadGrid)
        );
    }

    proptest::proptest! {
        #[test]
        fn time_rescaling_invariance(n in 2usize..5, edge_p in 0.2f64..1.0, seed in 0u64..500,
                                     beta in 0.05f64..1.0, delta in 0.05f64..1.0) {
            let g = Graph::erdos_renyi(n, edge_p, seed);
            let p = EpidemicParams::uniform(n, beta, delta, [0]).unwrap();
            let base = exact_lambda(&g, &p).unwrap();
            for c in [0.5, 2.0] {
                let scaled = exact_lambda(&g, &p.time_scaled(c)).unwrap();
                proptest::prop_assert!((scaled - base).abs() < 1e-12);
            }
            proptest::prop_assert!(base <= (n - 1) as f64 + 1e-12);
        }
    }
}
