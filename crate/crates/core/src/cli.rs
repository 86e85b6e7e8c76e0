//! Experiment harness behind the `netsir` binary: a JSON configuration, five
//! pipelines (`simulate`, `bound`, `optimize`, `validate`, `compare`) and the
//! CSV/JSON files they write.
//!
//! Exit codes: 0 success, 2 infeasible model, 3 validation failure, 4
//! configuration or I/O error, 1 anything else.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocator::{
    self, baseline_sis_spectral, baseline_uniform, budget_sweep, AllocError, Allocation, CostForm, CostModel,
    Mode, RateBox, SecondResource,
};
use crate::bound::{self, build_system, lambda_bound, minimal_certificate, spectral_abscissa, LambdaBound};
use crate::exact_oracle::{exact_lambda, OracleError};
use crate::gp::SolverOptions;
use crate::graph::{load_edge_list, Graph, GraphError};
use crate::phase_type::{erlang, ErlangSpec};
use crate::simulator::{estimate_lambda, replica_rng, simulate, EpidemicParams, LambdaEstimate, SimError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("infeasible model: {0}")]
    Infeasible(AllocError),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Alloc(AllocError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Bound(#[from] bound::BoundError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Infeasible(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Config(_) | CliError::Io { .. } => 4,
            _ => 1,
        }
    }
}

impl From<AllocError> for CliError {
    fn from(e: AllocError) -> Self {
        match e {
            AllocError::Infeasible { .. } | AllocError::Budget { .. } => CliError::Infeasible(e),
            AllocError::BadBox { .. } | AllocError::Model(_) => CliError::Config(e.to_string()),
            other => CliError::Alloc(other),
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Config(format!("graph: {e}"))
    }
}

/// Explicit node list or a seeded random draw of `count` distinct nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InfectedSpec {
    Nodes(Vec<usize>),
    Random { count: usize, seed: u64 },
}

impl InfectedSpec {
    pub fn resolve(&self, n: usize) -> Result<Vec<usize>, CliError> {
        match self {
            InfectedSpec::Nodes(v) => {
                if let Some(&bad) = v.iter().find(|&&i| i >= n) {
                    return Err(CliError::Config(format!(
                        "infected node {bad} not in a {n}-node graph"
                    )));
                }
                Ok(v.clone())
            }
            InfectedSpec::Random { count, seed } => {
                if *count == 0 || *count > n {
                    return Err(CliError::Config(format!(
                        "cannot draw {count} infected nodes from {n}"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut nodes = sample(&mut rng, n, *count).into_vec();
                nodes.sort_unstable();
                Ok(nodes)
            }
        }
    }
}

/// A scalar applied to every node or one value per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerNode {
    Uniform(f64),
    Each(Vec<f64>),
}

impl PerNode {
    fn expand(&self, n: usize, what: &str) -> Result<Vec<f64>, CliError> {
        match self {
            PerNode::Uniform(x) => Ok(vec![*x; n]),
            PerNode::Each(v) if v.len() == n => Ok(v.clone()),
            PerNode::Each(v) => Err(CliError::Config(format!(
                "{what} has {} entries for {n} nodes",
                v.len()
            ))),
        }
    }
}

/// Fixed rates for `simulate`, `bound` and `validate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub beta: PerNode,
    pub delta: PerNode,
    /// Mean isolation delays, used in isolation mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<PerNode>,
}

/// Overrides for the normalized cost forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostConstants {
    pub prevention: CostForm,
    pub second: CostForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub replicas: usize,
    pub seed: u64,
}

impl Default for MonteCarlo {
    fn default() -> Self {
        Self {
            replicas: 10_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_end: f64,
    pub points: usize,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self {
            t_end: 100.0,
            points: 101,
        }
    }
}

/// Random small instances checked by `validate` in addition to the
/// configured one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationSweep {
    pub instances: usize,
    pub nodes: usize,
    pub edge_probability: f64,
    pub seed: u64,
}

fn default_mode() -> Mode {
    Mode::Plain
}

fn default_epsilon() -> f64 {
    allocator::DEFAULT_EPSILON
}

fn default_shape() -> usize {
    3
}

fn default_fixed_delta() -> f64 {
    0.1
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// One JSON document describing an experiment. Relative paths are resolved
/// against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph_path: PathBuf,
    pub initially_infected: InfectedSpec,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Rates>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_box: Option<RateBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_box: Option<RateBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_box: Option<RateBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_constants: Option<CostConstants>,
    /// Defaults to the node count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_sweep: Option<Vec<f64>>,
    #[serde(default = "default_shape")]
    pub erlang_shape: usize,
    /// Recovery rate held fixed while isolation is optimized.
    #[serde(default = "default_fixed_delta")]
    pub fixed_delta: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub monte_carlo: MonteCarlo,
    #[serde(default)]
    pub time_grid: TimeGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_sweep: Option<ValidationSweep>,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Reads a config and resolves its relative paths against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.graph_path.is_relative() {
            cfg.graph_path = base.join(&cfg.graph_path);
        }
        if cfg.out_dir.is_relative() {
            cfg.out_dir = base.join(&cfg.out_dir);
        }
        Ok(cfg)
    }

    pub fn load_graph(&self) -> Result<Graph, CliError> {
        let text = fs::read_to_string(&self.graph_path).map_err(|source| CliError::Io {
            path: self.graph_path.clone(),
            source,
        })?;
        Ok(load_edge_list(&text)?)
    }

    pub fn budget_for(&self, n: usize) -> f64 {
        self.budget.unwrap_or(n as f64)
    }

    /// Cost model for the configured mode and budget.
    pub fn cost_model(&self, n: usize) -> Result<CostModel, CliError> {
        let need = |b: Option<RateBox>, what: &str| {
            b.ok_or_else(|| CliError::Config(format!("{what} is required for this command")))
        };
        let beta_box = need(self.beta_box, "beta_box")?;
        let budget = self.budget_for(n);
        let mut model = match self.mode {
            Mode::Plain => CostModel::plain(beta_box, need(self.delta_box, "delta_box")?, budget)?,
            Mode::Isolation => CostModel::isolation(
                beta_box,
                need(self.gamma_box, "gamma_box")?,
                self.erlang_shape,
                self.fixed_delta,
                budget,
            )?,
        };
        if let Some(c) = self.cost_constants {
            model.prevention = c.prevention;
            match &mut model.second {
                SecondResource::Recovery { cost, .. } | SecondResource::Isolation { cost, .. } => {
                    *cost = c.second
                }
            }
        }
        Ok(model)
    }

    /// Epidemic parameters from the fixed `rates` section.
    pub fn params(&self, g: &Graph) -> Result<EpidemicParams, CliError> {
        let n = g.node_count();
        let rates = self
            .rates
            .as_ref()
            .ok_or_else(|| CliError::Config("`rates` is required for this command".into()))?;
        let infected = self.initially_infected.resolve(n)?;
        let beta = rates.beta.expand(n, "rates.beta")?;
        let delta = rates.delta.expand(n, "rates.delta")?;
        let params =
            EpidemicParams::new(beta, delta, infected).map_err(|e| CliError::Config(e.to_string()))?;
        match self.mode {
            Mode::Plain => Ok(params),
            Mode::Isolation => {
                let gamma = rates
                    .gamma
                    .as_ref()
                    .ok_or_else(|| CliError::Config("isolation mode needs rates.gamma".into()))?
                    .expand(n, "rates.gamma")?;
                let laws = gamma
                    .iter()
                    .map(|&m| ErlangSpec::new(self.erlang_shape, m).map(erlang))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| CliError::Config(e.to_string()))?;
                Ok(params
                    .with_isolation(laws)
                    .map_err(|e| CliError::Config(e.to_string()))?)
            }
        }
    }
}

/// What a command wrote and a one-paragraph summary for the terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

fn write_file(dir: &Path, name: &str, contents: &str, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    files.push(path);
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

/// Mean `(σ_S, σ_I, σ_R)` over replicas on the configured time grid. Sums are
/// accumulated as integers, so the result does not depend on scheduling.
pub fn mean_counts(
    g: &Graph,
    params: &EpidemicParams,
    grid: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<Vec<[f64; 3]>, SimError> {
    let zero = || vec![[0u64; 3]; grid.len()];
    let totals = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let out = simulate(g, params, &mut replica_rng(seed, r))?;
            Ok(grid
                .iter()
                .map(|&t| {
                    let c = out.counts_at(t);
                    [c.sigma_s as u64, c.sigma_i as u64, c.sigma_r as u64]
                })
                .collect::<Vec<_>>())
        })
        .try_reduce(zero, |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                for k in 0..3 {
                    x[k] += y[k];
                }
            }
            Ok(a)
        })?;
    Ok(totals
        .into_iter()
        .map(|c| c.map(|v| v as f64 / replicas as f64))
        .collect())
}

fn time_grid(tg: &TimeGrid) -> Result<Vec<f64>, CliError> {
    if !(tg.t_end >= 0.0) || tg.points == 0 {
        return Err(CliError::Config(
            "time_grid needs t_end >= 0 and points >= 1".into(),
        ));
    }
    Ok((0..tg.points)
        .map(|k| {
            if tg.points == 1 {
                tg.t_end
            } else {
                tg.t_end * k as f64 / (tg.points - 1) as f64
            }
        })
        .collect())
}

/// Monte Carlo run of the configured rates: `counts.csv` with mean
/// compartment sizes over time and `lambda.json` with the `λ` estimate.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let g = cfg.load_graph()?;
    let params = cfg.params(&g)?;
    let mc = cfg.monte_carlo;
    let grid = time_grid(&cfg.time_grid)?;
    let means = mean_counts(&g, &params, &grid, mc.replicas, mc.seed)?;
    let mut csv = String::from("t,sigma_S,sigma_I,sigma_R\n");
    for (t, m) in grid.iter().zip(&means) {
        let _ = writeln!(csv, "{t},{},{},{}", m[0], m[1], m[2]);
    }
    let est = estimate_lambda(&g, &params, mc.replicas, mc.seed)?;
    let mut files = Vec::new();
    write_file(&cfg.out_dir, "counts.csv", &csv, &mut files)?;
    write_file(&cfg.out_dir, "lambda.json", &to_json(&est), &mut files)?;
    Ok(Report {
        files,
        summary: format!(
            "lambda = {:.6} ± {:.6} over {} replicas",
            est.mean, est.std_error, est.replicas
        ),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub lambda_bound: LambdaBound,
    pub spectral_abscissa: f64,
    /// Bound certified by the smallest certificate at margin `epsilon`.
    pub certified_lambda_bar: Option<f64>,
    pub certificate_v: Option<Vec<f64>>,
    pub epsilon: f64,
}

/// Certified bound for the configured rates, written to `bound.json`.
pub fn cmd_bound(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let g = cfg.load_graph()?;
    let params = cfg.params(&g)?;
    let sys = build_system(&g, &params)?;
    let lb = lambda_bound(&sys)?;
    let cert = minimal_certificate(&sys, cfg.epsilon)?;
    let report = BoundReport {
        lambda_bound: lb,
        spectral_abscissa: spectral_abscissa(&sys.matrix, 1e-12)?,
        certified_lambda_bar: cert
            .as_ref()
            .map(|v| bound::certified_lambda(&sys, v, cfg.epsilon)),
        certificate_v: cert.map(|v| v.iter().copied().collect()),
        epsilon: cfg.epsilon,
    };
    let mut files = Vec::new();
    write_file(&cfg.out_dir, "bound.json", &to_json(&report), &mut files)?;
    let summary = match lb {
        LambdaBound::Finite(b) => format!("lambda <= {b:.6}"),
        LambdaBound::Unbounded => "comparison system is not Hurwitz: no bound".to_string(),
    };
    Ok(Report { files, summary })
}

/// Minimizes the certified bound: `allocation.json` and `allocation.csv`,
/// plus `sweep.csv` when a budget sweep is configured.
pub fn cmd_optimize(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let g = cfg.load_graph()?;
    let n = g.node_count();
    let infected = cfg.initially_infected.resolve(n)?;
    let costs = cfg.cost_model(n)?;
    let alloc = allocator::optimize(&g, &infected, &costs, cfg.epsilon, &cfg.solver)?;
    let mut files = Vec::new();
    write_file(
        &cfg.out_dir,
        "allocation.json",
        &(alloc.to_json() + "\n"),
        &mut files,
    )?;
    write_file(&cfg.out_dir, "allocation.csv", &alloc.to_csv(&g), &mut files)?;
    let mut summary = format!(
        "certified lambda_bar = {:.6} at cost {:.6} of budget {:.6}",
        alloc.lambda_bar.unwrap_or(f64::NAN),
        alloc.total_cost,
        costs.budget
    );
    if let Some(budgets) = &cfg.budget_sweep {
        let mut csv = String::from("budget,lambda_bar,total_cost,status\n");
        for (b, res) in budget_sweep(&g, &infected, &costs, budgets, cfg.epsilon, &cfg.solver) {
            match res {
                Ok(a) => {
                    let _ = writeln!(
                        csv,
                        "{b},{},{},optimal",
                        a.lambda_bar.unwrap_or(f64::NAN),
                        a.total_cost
                    );
                }
                Err(e @ (AllocError::Infeasible { .. } | AllocError::Budget { .. })) => {
                    let _ = writeln!(csv, "{b},,,infeasible");
                    let _ = e;
                }
                Err(e) => return Err(e.into()),
            }
        }
        write_file(&cfg.out_dir, "sweep.csv", &csv, &mut files)?;
        let _ = write!(summary, "; sweep over {} budgets", budgets.len());
    }
    Ok(Report { files, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub instance: String,
    pub exact: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub bound: LambdaBound,
    pub pass: bool,
}

/// Checks `exact ≤ bound` and `|exact - MC| ≤ 4·stderr`.
pub fn validate_instance(
    name: String,
    g: &Graph,
    params: &EpidemicParams,
    mc: MonteCarlo,
) -> Result<ValidationRow, CliError> {
    let exact = exact_lambda(g, params)?;
    let est = estimate_lambda(g, params, mc.replicas, mc.seed)?;
    let bound = lambda_bound(&build_system(g, params)?)?;
    let bound_ok = exact <= bound.or_infinity() + 1e-9;
    let mc_ok = (exact - est.mean).abs() <= 4.0 * est.std_error + 1e-12;
    Ok(ValidationRow {
        instance: name,
        exact,
        mc_mean: est.mean,
        mc_stderr: est.std_error,
        bound,
        pass: bound_ok && mc_ok,
    })
}

/// Random small instance with rates drawn uniformly from `[0.05, 1]`.
pub fn random_instance(nodes: usize, edge_probability: f64, seed: u64) -> (Graph, EpidemicParams) {
    let g = Graph::erdos_renyi(nodes, edge_probability, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let beta = (0..nodes).map(|_| rng.random_range(0.05..=1.0)).collect();
    let delta = (0..nodes).map(|_| rng.random_range(0.05..=1.0)).collect();
    let first = rng.random_range(0..nodes);
    let params = EpidemicParams::new(beta, delta, [first]).expect("rates are positive");
    (g, params)
}

/// Exact oracle, Monte Carlo and certified bound side by side:
/// `validation.csv`. Fails with exit code 3 when any row fails.
pub fn cmd_validate(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let g = cfg.load_graph()?;
    let params = cfg.params(&g)?;
    let mut rows = vec![validate_instance("config".into(), &g, &params, cfg.monte_carlo)?];
    if let Some(sweep) = cfg.validation_sweep {
        for k in 0..sweep.instances {
            let seed = sweep.seed.wrapping_add(k as u64);
            let (g, p) = random_instance(sweep.nodes, sweep.edge_probability, seed);
            rows.push(validate_instance(
                format!("random-{seed}"),
                &g,
                &p,
                cfg.monte_carlo,
            )?);
        }
    }
    let mut csv = String::from("instance,exact,mc_mean,mc_stderr,bound,pass\n");
    for r in &rows {
        let b = r.bound.value().map_or("inf".to_string(), |v| v.to_string());
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.instance,
            r.exact,
            r.mc_mean,
            r.mc_stderr,
            b,
            if r.pass { "pass" } else { "fail" }
        );
    }
    let mut files = Vec::new();
    write_file(&cfg.out_dir, "validation.csv", &csv, &mut files)?;
    let failed = rows.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(CliError::Validation(format!(
            "{failed} of {} rows failed",
            rows.len()
        )));
    }
    let first = &rows[0];
    Ok(Report {
        files,
        summary: format!(
            "{} rows pass; config instance: exact {:.6}, MC {:.6} ± {:.6}, bound {}",
            rows.len(),
            first.exact,
            first.mc_mean,
            first.mc_stderr,
            first.bound.value().map_or("inf".into(), |v| format!("{v:.6}"))
        ),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub strategy: String,
    pub estimate: LambdaEstimate,
    pub certified_bound: LambdaBound,
    /// `(λ_strategy - λ_optimized) / λ_strategy`.
    pub relative_improvement: Option<f64>,
    pub allocation: Allocation,
}

/// Optimized, uniform and (without isolation) SIS-decay allocations on the
/// same budget, each simulated with the configured replicas:
/// `comparison.csv` and `comparison.json`.
pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let g = cfg.load_graph()?;
    let n = g.node_count();
    let infected = cfg.initially_infected.resolve(n)?;
    let costs = cfg.cost_model(n)?;
    let mut strategies = vec![
        (
            "optimized",
            allocator::optimize(&g, &infected, &costs, cfg.epsilon, &cfg.solver)?,
        ),
        ("uniform", baseline_uniform(&g, &infected, &costs, cfg.epsilon)?),
    ];
    if costs.mode() == Mode::Plain {
        strategies.push((
            "sis_spectral",
            baseline_sis_spectral(&g, &infected, &costs, &cfg.solver, cfg.epsilon)?,
        ));
    }
    let mc = cfg.monte_carlo;
    let mut rows = Vec::new();
    for (name, alloc) in strategies {
        let est = estimate_lambda(&g, &alloc.params()?, mc.replicas, mc.seed)?;
        rows.push(ComparisonRow {
            strategy: name.to_string(),
            estimate: est,
            certified_bound: alloc.lambda_bound,
            relative_improvement: None,
            allocation: alloc,
        });
    }
    let opt_mean = rows[0].estimate.mean;
    for r in &mut rows {
        r.relative_improvement =
            (r.estimate.mean > 0.0).then(|| (r.estimate.mean - opt_mean) / r.estimate.mean);
    }
    let mut csv = String::from("strategy,lambda_mean,lambda_stderr,relative_improvement\n");
    for r in &rows {
        let imp = r.relative_improvement.map_or(String::new(), |v| v.to_string());
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            r.strategy, r.estimate.mean, r.estimate.std_error, imp
        );
    }
    let mut files = Vec::new();
    write_file(&cfg.out_dir, "comparison.csv", &csv, &mut files)?;
    write_file(&cfg.out_dir, "comparison.json", &to_json(&rows), &mut files)?;
    let summary = rows
        .iter()
        .map(|r| {
            format!(
                "{}: {:.4} ± {:.4}",
                r.strategy, r.estimate.mean, r.estimate.std_error
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    Ok(Report { files, summary })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Plain,
    Isolation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Monte Carlo simulation of the configured rates
    Simulate,
    /// Certified upper bound for the configured rates
    Bound,
    /// Budgeted allocation minimizing the certified bound
    Optimize,
    /// Exact oracle vs Monte Carlo vs bound on small instances
    Validate,
    /// Optimized allocation against uniform and SIS-decay baselines
    Compare,
}

#[derive(Debug, Parser)]
#[command(
    name = "netsir",
    version,
    about = "Networked SIR epidemics: simulation, certified bounds and budgeted resource allocation"
)]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (JSON)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Monte Carlo seed, overriding the config
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo replica count, overriding the config
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    /// Output directory, overriding the config
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Model variant, overriding the config
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
}

impl Args {
    /// Loads the config and applies flag overrides.
    pub fn config(&self) -> Result<ExperimentConfig, CliError> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
        let mut cfg = ExperimentConfig::load(path)?;
        if let Some(seed) = self.seed {
            cfg.monte_carlo.seed = seed;
        }
        if let Some(r) = self.replicas {
            cfg.monte_carlo.replicas = r;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(m) = self.mode {
            cfg.mode = match m {
                ModeArg::Plain => Mode::Plain,
                ModeArg::Isolation => Mode::Isolation,
            };
        }
        Ok(cfg)
    }
}

pub fn run_command(command: Command, cfg: &ExperimentConfig) -> Result<Report, CliError> {
    match command {
        Command::Simulate => cmd_simulate(cfg),
        Command::Bound => cmd_bound(cfg),
        Command::Optimize => cmd_optimize(cfg),
        Command::Validate => cmd_validate(cfg),
        Command::Compare => cmd_compare(cfg),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 4 } else { 0 };
        }
    };
    match args.config().and_then(|cfg| run_command(args.command, &cfg)) {
        Ok(report) => {
            println!("{}", report.summary);
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
