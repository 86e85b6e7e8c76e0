//! Exact event-driven simulation of the networked SIR process, with or
//! without phase-type isolation, and Monte Carlo estimation of the expected
//! number of infections after time zero.
//!
//! Each replica runs the Gillespie direct method. Per-node event rates live
//! in a binary sum tree: a susceptible node fires at `β_i` times its number of
//! infected neighbours, an infected node at the total outflow of its current
//! phase. An infection or removal only touches the rates of the node and its
//! neighbours, so a replica costs `O(events · degree · log n)`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;
use crate::phase_type::{self, PhaseType};

/// Hard cap on events per replica.
pub const MAX_EVENTS: u64 = 100_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("{what} has length {got}, expected {expected}")]
    Length {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("{what}[{node}] = {value} must be strictly positive")]
    NonPositiveRate {
        what: &'static str,
        node: usize,
        value: f64,
    },
    #[error("no initially infected nodes")]
    NoInitialInfection,
    #[error("initially infected node {node} out of range for {node_count} nodes")]
    InfectedOutOfRange { node: usize, node_count: usize },
    #[error("isolation laws must share one phase count, node {node} has {got} instead of {expected}")]
    MixedPhaseCounts {
        node: usize,
        got: usize,
        expected: usize,
    },
    #[error("this simulation requires {0}")]
    WrongMode(&'static str),
    #[error("replica exceeded {MAX_EVENTS} events without dying out")]
    EventCap,
    #[error("replica count must be at least 1")]
    NoReplicas,
}

/// Per-node rates, optional isolation laws and the initially infected set.
#[derive(Debug, Clone, PartialEq)]
pub struct EpidemicParams {
    beta: Vec<f64>,
    delta: Vec<f64>,
    isolation: Option<Vec<PhaseType>>,
    initially_infected: Vec<usize>,
}

impl EpidemicParams {
    pub fn new(
        beta: Vec<f64>,
        delta: Vec<f64>,
        initially_infected: impl IntoIterator<Item = usize>,
    ) -> Result<Self, SimError> {
        if beta.len() != delta.len() {
            return Err(SimError::Length {
                what: "delta",
                got: delta.len(),
                expected: beta.len(),
            });
        }
        for (what, values) in [("beta", &beta), ("delta", &delta)] {
            if let Some((node, &value)) = values
                .iter()
                .enumerate()
                .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
            {
                return Err(SimError::NonPositiveRate { what, node, value });
            }
        }
        let mut infected: Vec<usize> = initially_infected.into_iter().collect();
        infected.sort_unstable();
        infected.dedup();
        if infected.is_empty() {
            return Err(SimError::NoInitialInfection);
        }
        if let Some(&node) = infected.iter().find(|&&i| i >= beta.len()) {
            return Err(SimError::InfectedOutOfRange {
                node,
                node_count: beta.len(),
            });
        }
        Ok(Self {
            beta,
            delta,
            isolation: None,
            initially_infected: infected,
        })
    }

    /// Same rates for every node.
    pub fn uniform(
        node_count: usize,
        beta: f64,
        delta: f64,
        initially_infected: impl IntoIterator<Item = usize>,
    ) -> Result<Self, SimError> {
        Self::new(
            vec![beta; node_count],
            vec![delta; node_count],
            initially_infected,
        )
    }

    /// Attaches per-node isolation-time laws `Y_i`.
    pub fn with_isolation(mut self, laws: Vec<PhaseType>) -> Result<Self, SimError> {
        if laws.len() != self.beta.len() {
            return Err(SimError::Length {
                what: "isolation",
                got: laws.len(),
                expected: self.beta.len(),
            });
        }
        let expected = laws[0].phases();
        if let Some((node, law)) = laws.iter().enumerate().find(|(_, l)| l.phases() != expected) {
            return Err(SimError::MixedPhaseCounts {
                node,
                got: law.phases(),
                expected,
            });
        }
        self.isolation = Some(laws);
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.beta.len()
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn isolation(&self) -> Option<&[PhaseType]> {
        self.isolation.as_deref()
    }

    pub fn initially_infected(&self) -> &[usize] {
        &self.initially_infected
    }

    pub fn is_initially_infected(&self, node: usize) -> bool {
        self.initially_infected.binary_search(&node).is_ok()
    }

    /// `σ_I(0)`.
    pub fn initial_infected_count(&self) -> usize {
        self.initially_infected.len()
    }

    /// Phases per infected node: 1 without isolation.
    pub fn phases(&self) -> usize {
        self.isolation.as_ref().map_or(1, |l| l[0].phases())
    }

    /// Law of the total infectious period `Z_i`: `Exp(δ_i)` without
    /// isolation, otherwise `min(Y_i, Exp(δ_i))`.
    pub fn removal_law(&self, node: usize) -> PhaseType {
        match &self.isolation {
            None => PhaseType::exponential(self.delta[node]).expect("positive rate"),
            Some(laws) => phase_type::min_with_exponential(&laws[node], self.delta[node]),
        }
    }

    /// Multiplies every rate by `factor`, which only rescales time.
    pub fn time_scaled(&self, factor: f64) -> Self {
        let scale = |v: &[f64]| v.iter().map(|x| x * factor).collect::<Vec<_>>();
        let isolation = self.isolation.as_ref().map(|laws| {
            laws.iter()
                .map(|l| {
                    PhaseType::new(l.initial().clone(), l.generator() * factor)
                        .expect("scaling keeps a valid generator")
                })
                .collect()
        });
        Self {
            beta: scale(&self.beta),
            delta: scale(&self.delta),
            isolation,
            initially_infected: self.initially_infected.clone(),
        }
    }

    pub fn check_graph(&self, g: &Graph) -> Result<(), SimError> {
        if g.node_count() != self.node_count() {
            return Err(SimError::Length {
                what: "beta",
                got: self.node_count(),
                expected: g.node_count(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Infect,
    Recover,
    Isolate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub node: usize,
    pub kind: EventKind,
}

/// `(t, σ_S, σ_I, σ_R)` right after an event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub t: f64,
    pub sigma_s: usize,
    pub sigma_i: usize,
    pub sigma_r: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub final_removed: usize,
    pub infections_after_t0: usize,
    pub event_log: Vec<Event>,
    pub counts_series: Vec<Counts>,
}

impl SimOutcome {
    /// Counts at time `t`, reading the event-time series as a step function.
    pub fn counts_at(&self, t: f64) -> Counts {
        let idx = self.counts_series.partition_point(|c| c.t <= t);
        let mut c = self.counts_series[idx.saturating_sub(1)];
        c.t = t;
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub replicas: usize,
    pub seed: u64,
}

/// Random stream for replica `replica` of a run seeded with `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

pub fn simulate_sir<R: Rng + ?Sized>(
    g: &Graph,
    params: &EpidemicParams,
    rng: &mut R,
) -> Result<SimOutcome, SimError> {
    if params.isolation.is_some() {
        return Err(SimError::WrongMode("parameters without isolation"));
    }
    Replica::new(g, params)?.run(rng, true)
}

pub fn simulate_sir_isolation<R: Rng + ?Sized>(
    g: &Graph,
    params: &EpidemicParams,
    rng: &mut R,
) -> Result<SimOutcome, SimError> {
    if params.isolation.is_none() {
        return Err(SimError::WrongMode("isolation laws"));
    }
    Replica::new(g, params)?.run(rng, true)
}

/// Runs either model according to `params` and records the full trajectory.
pub fn simulate<R: Rng + ?Sized>(
    g: &Graph,
    params: &EpidemicParams,
    rng: &mut R,
) -> Result<SimOutcome, SimError> {
    Replica::new(g, params)?.run(rng, true)
}

/// Infections after time zero for replicas `0..replicas`, in replica order.
pub fn sample_infections(
    g: &Graph,
    params: &EpidemicParams,
    replicas: usize,
    seed: u64,
) -> Result<Vec<usize>, SimError> {
    let template = Replica::new(g, params)?;
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, r);
            template
                .clone()
                .run(&mut rng, false)
                .map(|o| o.infections_after_t0)
        })
        .collect()
}

/// Monte Carlo estimate of `λ` from independent seeded replicas. The result
/// depends only on `(seed, replicas)`, not on the thread count.
pub fn estimate_lambda(
    g: &Graph,
    params: &EpidemicParams,
    replicas: usize,
    seed: u64,
) -> Result<LambdaEstimate, SimError> {
    if replicas == 0 {
        return Err(SimError::NoReplicas);
    }
    let counts = sample_infections(g, params, replicas, seed)?;
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    let std_error = if counts.len() > 1 {
        let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(LambdaEstimate {
        mean,
        std_error,
        replicas,
        seed,
    })
}

/// Per-node infectious-period dynamics in rate form.
#[derive(Debug, Clone)]
struct NodeLaw {
    initial: Vec<f64>,
    /// `moves[l]` lists `(m, rate)` phase transitions out of phase `l`.
    moves: Vec<Vec<(usize, f64)>>,
    isolate: Vec<f64>,
    outflow: Vec<f64>,
}

impl NodeLaw {
    fn plain(delta: f64) -> Self {
        Self {
            initial: vec![1.0],
            moves: vec![Vec::new()],
            isolate: vec![0.0],
            outflow: vec![delta],
        }
    }

    fn isolation(law: &PhaseType, delta: f64) -> Self {
        let p = law.phases();
        let gen = law.generator();
        let w: DVector<f64> = phase_type::exit_rates(law);
        let moves = (0..p)
            .map(|l| {
                (0..p)
                    .filter(|&m| m != l && gen[(l, m)] > 0.0)
                    .map(|m| (m, gen[(l, m)]))
                    .collect()
            })
            .collect();
        Self {
            initial: law.initial().iter().copied().collect(),
            moves,
            isolate: w.iter().map(|v| v.max(0.0)).collect(),
            outflow: (0..p).map(|l| -gen[(l, l)] + delta).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tag {
    Susceptible,
    Infected(usize),
    Removed,
}

/// Complete binary tree of partial sums over per-node rates.
#[derive(Debug, Clone)]
struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    fn new(size: usize) -> Self {
        let leaves = size.max(1).next_power_of_two();
        Self {
            leaves,
            nodes: vec![0.0; 2 * leaves],
        }
    }

    fn set(&mut self, idx: usize, value: f64) {
        let mut k = idx + self.leaves;
        self.nodes[k] = value;
        while k > 1 {
            k /= 2;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    /// Leaf whose cumulative interval contains `u ∈ [0, total)`.
    fn find(&self, mut u: f64) -> usize {
        let mut k = 1;
        while k < self.leaves {
            let left = self.nodes[2 * k];
            if u < left || self.nodes[2 * k + 1] <= 0.0 {
                k *= 2;
            } else {
                u -= left;
                k = 2 * k + 1;
            }
        }
        k - self.leaves
    }
}

#[derive(Debug, Clone)]
struct Replica<'a> {
    g: &'a Graph,
    params: &'a EpidemicParams,
    laws: Vec<NodeLaw>,
}

impl<'a> Replica<'a> {
    fn new(g: &'a Graph, params: &'a EpidemicParams) -> Result<Self, SimError> {
        params.check_graph(g)?;
        let laws = (0..g.node_count())
            .map(|i| match params.isolation() {
                None => NodeLaw::plain(params.delta[i]),
                Some(l) => NodeLaw::isolation(&l[i], params.delta[i]),
            })
            .collect();
        Ok(Self { g, params, laws })
    }

    fn run<R: Rng + ?Sized>(self, rng: &mut R, record: bool) -> Result<SimOutcome, SimError> {
        let n = self.g.node_count();
        let mut tags = vec![Tag::Susceptible; n];
        let mut infected_neighbors = vec![0usize; n];
        let mut tree = SumTree::new(n);
        let (mut s, mut i, mut r) = (n, 0usize, 0usize);
        let mut events = Vec::new();
        let mut series = Vec::new();

        for &v in self.params.initially_infected() {
            let phase = sample_index(&self.laws[v].initial, rng);
            tags[v] = Tag::Infected(phase);
            s -= 1;
            i += 1;
            for &u in self.g.neighbors(v) {
                infected_neighbors[u] += 1;
            }
        }
        for v in 0..n {
            tree.set(v, self.rate(v, tags[v], infected_neighbors[v]));
        }
        let mut t = 0.0;
        if record {
            series.push(Counts {
                t,
                sigma_s: s,
                sigma_i: i,
                sigma_r: r,
            });
        }

        let mut fired: u64 = 0;
        while i > 0 {
            fired += 1;
            if fired > MAX_EVENTS {
                return Err(SimError::EventCap);
            }
            let total = tree.total();
            let hold: f64 = Exp1.sample(rng);
            t += hold / total;
            let v = tree.find(rng.random::<f64>() * total);
            match tags[v] {
                Tag::Susceptible => {
                    let phase = sample_index(&self.laws[v].initial, rng);
                    tags[v] = Tag::Infected(phase);
                    s -= 1;
                    i += 1;
                    tree.set(v, self.rate(v, tags[v], infected_neighbors[v]));
                    for &u in self.g.neighbors(v) {
                        infected_neighbors[u] += 1;
                        if tags[u] == Tag::Susceptible {
                            tree.set(u, self.rate(u, tags[u], infected_neighbors[u]));
                        }
                    }
                    if record {
                        events.push(Event {
                            time: t,
                            node: v,
                            kind: EventKind::Infect,
                        });
                    }
                }
                Tag::Infected(phase) => {
                    let law = &self.laws[v];
                    let mut u = rng.random::<f64>() * law.outflow[phase];
                    let mut next = None;
                    for &(m, rate) in &law.moves[phase] {
                        if u < rate {
                            next = Some(m);
                            break;
                        }
                        u -= rate;
                    }
                    if let Some(m) = next {
                        tags[v] = Tag::Infected(m);
                        tree.set(v, law.outflow[m]);
                        continue;
                    }
                    let kind = if u < law.isolate[phase] {
                        EventKind::Isolate
                    } else {
                        EventKind::Recover
                    };
                    tags[v] = Tag::Removed;
                    i -= 1;
                    r += 1;
                    tree.set(v, 0.0);
                    for &u in self.g.neighbors(v) {
                        infected_neighbors[u] -= 1;
                        if tags[u] == Tag::Susceptible {
                            tree.set(u, self.rate(u, tags[u], infected_neighbors[u]));
                        }
                    }
                    if record {
                        events.push(Event {
                            time: t,
                            node: v,
                            kind,
                        });
                    }
                }
                Tag::Removed => unreachable!("removed nodes carry zero rate"),
            }
            if record {
                series.push(Counts {
                    t,
                    sigma_s: s,
                    sigma_i: i,
                    sigma_r: r,
                });
            }
        }

        Ok(SimOutcome {
            final_removed: r,
            infections_after_t0: r - self.params.initial_infected_count(),
            event_log: events,
            counts_series: series,
        })
    }

    fn rate(&self, v: usize, tag: Tag, infected_neighbors: usize) -> f64 {
        match tag {
            Tag::Susceptible => self.params.beta[v] * infected_neighbors as f64,
            Tag::Infected(phase) => self.laws[v].outflow[phase],
            Tag::Removed => 0.0,
        }
    }
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    if weights.len() == 1 {
        return 0;
    }
    let mut u = rng.random::<f64>();
    for (k, &w) in weights.iter().enumerate() {
        if u < w {
            return k;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_type::{erlang, ErlangSpec};

    fn two_node() -> (Graph, EpidemicParams) {
        let g = Graph::path(2);
        let p = EpidemicParams::new(vec![0.2, 0.2], vec![0.5, 0.5], [0]).unwrap();
        (g, p)
    }

    #[test]
    fn params_validation() {
        assert!(matches!(
            EpidemicParams::new(vec![0.1, 0.0], vec![1.0, 1.0], [0]),
            Err(SimError::NonPositiveRate {
                what: "beta",
                node: 1,
                ..
            })
        ));
        assert!(matches!(
            EpidemicParams::new(vec![0.1], vec![1.0, 1.0], [0]),
            Err(SimError::Length { .. })
        ));
        assert_eq!(
            EpidemicParams::uniform(2, 0.1, 0.1, []),
            Err(SimError::NoInitialInfection)
        );
        assert!(matches!(
            EpidemicParams::uniform(2, 0.1, 0.1, [2]),
            Err(SimError::InfectedOutOfRange { .. })
        ));
        let p = EpidemicParams::uniform(2, 0.1, 0.1, [0]).unwrap();
        let laws = vec![
            erlang(ErlangSpec::new(1, 1.0).unwrap()),
            erlang(ErlangSpec::new(2, 1.0).unwrap()),
        ];
        assert!(matches!(
            p.with_isolation(laws),
            Err(SimError::MixedPhaseCounts { .. })
        ));
    }

    #[test]
    fn mode_mismatch_rejected() {
        let (g, p) = two_node();
        let mut rng = replica_rng(1, 0);
        assert!(simulate_sir_isolation(&g, &p, &mut rng).is_err());
        let iso = p
            .with_isolation(vec![erlang(ErlangSpec::new(1, 1.0).unwrap()); 2])
            .unwrap();
        assert!(simulate_sir(&g, &iso, &mut rng).is_err());
    }

    #[test]
    fn edgeless_never_spreads() {
        let g = Graph::edgeless(5);
        let p = EpidemicParams::uniform(5, 1.0, 0.1, [2]).unwrap();
        for seed in 0..20 {
            let out = simulate_sir(&g, &p, &mut replica_rng(seed, 0)).unwrap();
            assert_eq!(out.infections_after_t0, 0);
        }
        let est = estimate_lambda(&g, &p, 100, 3).unwrap();
        assert_eq!((est.mean, est.std_error), (0.0, 0.0));
    }

    #[test]
    fn all_infected_no_new_infections() {
        let g = Graph::complete(4);
        let p = EpidemicParams::uniform(4, 1.0, 0.5, 0..4).unwrap();
        let out = simulate_sir(&g, &p, &mut replica_rng(0, 0)).unwrap();
        assert_eq!(out.infections_after_t0, 0);
        assert_eq!(out.final_removed, 4);
    }

    #[test]
    fn two_node_race_probability() {
        let (g, p) = two_node();
        let est = estimate_lambda(&g, &p, 100_000, 42).unwrap();
        let exact = 0.2 / 0.7;
        assert!((est.mean - exact).abs() < 3.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn star_leaves_race_hub_removal() {
        let g = Graph::star(5);
        let p = EpidemicParams::uniform(6, 0.1, 0.1, [0]).unwrap();
        let est = estimate_lambda(&g, &p, 100_000, 8).unwrap();
        assert!((est.mean - 2.5).abs() < 3.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn trajectory_invariants() {
        let g = Graph::erdos_renyi(30, 0.15, 4);
        let p = EpidemicParams::uniform(30, 0.4, 0.3, [0, 7]).unwrap();
        for seed in 0..10 {
            let out = simulate_sir(&g, &p, &mut replica_rng(seed, 0)).unwrap();
            let series = &out.counts_series;
            for c in series {
                assert_eq!(c.sigma_s + c.sigma_i + c.sigma_r, 30);
            }
            for w in series.windows(2) {
                assert!(w[1].sigma_s <= w[0].sigma_s);
                assert!(w[1].sigma_r >= w[0].sigma_r);
                assert!(w[1].t >= w[0].t);
            }
            assert_eq!(series.last().unwrap().sigma_i, 0);
            let infections = out
                .event_log
                .iter()
                .filter(|e| e.kind == EventKind::Infect)
                .count();
            assert_eq!(infections, out.infections_after_t0);
        }
    }

    #[test]
    fn same_seed_same_log() {
        let g = Graph::erdos_renyi(20, 0.2, 1);
        let p = EpidemicParams::uniform(20, 0.5, 0.3, [3]).unwrap();
        let a = simulate_sir(&g, &p, &mut replica_rng(9, 2)).unwrap();
        let b = simulate_sir(&g, &p, &mut replica_rng(9, 2)).unwrap();
        assert_eq!(a.event_log, b.event_log);
        assert_eq!(estimate_lambda(&g, &p, 500, 3), estimate_lambda(&g, &p, 500, 3));
    }

    #[test]
    fn counts_step_function() {
        let g = Graph::path(3);
        let p = EpidemicParams::uniform(3, 1.0, 0.5, [0]).unwrap();
        let out = simulate_sir(&g, &p, &mut replica_rng(1, 0)).unwrap();
        let first = out.counts_at(0.0);
        assert_eq!((first.sigma_s, first.sigma_i, first.sigma_r), (2, 1, 0));
        let last = out.counts_at(1e9);
        assert_eq!(last.sigma_i, 0);
    }

    #[test]
    fn isolation_events_are_logged() {
        let g = Graph::star(4);
        let laws = vec![erlang(ErlangSpec::new(2, 0.5).unwrap()); 5];
        let p = EpidemicParams::uniform(5, 1.0, 0.05, [0])
            .unwrap()
            .with_isolation(laws)
            .unwrap();
        let mut isolated = 0;
        for seed in 0..50 {
            let out = simulate_sir_isolation(&g, &p, &mut replica_rng(seed, 0)).unwrap();
            isolated += out
                .event_log
                .iter()
                .filter(|e| e.kind == EventKind::Isolate)
                .count();
        }
        assert!(isolated > 0);
    }

    #[test]
    fn one_phase_isolation_matches_merged_rate() {
        let g = Graph::erdos_renyi(8, 0.4, 2);
        let gamma = 2.0;
        let iso = EpidemicParams::uniform(8, 0.6, 0.2, [0])
            .unwrap()
            .with_isolation(vec![erlang(ErlangSpec::new(1, gamma).unwrap()); 8])
            .unwrap();
        let merged = EpidemicParams::uniform(8, 0.6, 0.2 + 1.0 / gamma, [0]).unwrap();
        let a = sample_infections(&g, &iso, 10_000, 1).unwrap();
        let b = sample_infections(&g, &merged, 10_000, 2).unwrap();
        let ks = two_sample_ks(&a, &b, 8);
        // critical value at the 0.1% level for two samples of 1e4
        assert!(ks < 1.95 * (2.0f64 / 10_000.0).sqrt(), "KS {ks}");
    }

    fn two_sample_ks(a: &[usize], b: &[usize], max: usize) -> f64 {
        let cdf = |xs: &[usize], k: usize| xs.iter().filter(|&&x| x <= k).count() as f64 / xs.len() as f64;
        (0..=max)
            .map(|k| (cdf(a, k) - cdf(b, k)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn sum_tree_selects_proportionally() {
        let mut tree = SumTree::new(3);
        tree.set(0, 1.0);
        tree.set(1, 0.0);
        tree.set(2, 3.0);
        assert_eq!(tree.total(), 4.0);
        assert_eq!(tree.find(0.5), 0);
        assert_eq!(tree.find(1.0), 2);
        assert_eq!(tree.find(3.999), 2);
    }
}
