//! Budgeted allocation of prevention, correction and isolation resources.
//!
//! Infection rates `β_i`, recovery rates `δ_i` and mean isolation delays `γ_i`
//! are bought under a budget. The certificate inequalities of the comparison
//! system are posynomial in these rates and in the certificate `v`, so the
//! allocation is a geometric program: minimize `t = λ̄ + σ_I(0)` (or fix `λ̄`
//! and minimize cost) subject to
//!
//! ```text
//! (Σ_i v_i J_ii β_i a_ij + δ_j) / (v_j δ_j) ≤ 1 - ε        for every node j
//! vᵀ I(0) / t ≤ 1 - ε
//! Σ_i f_i(β_i) + g_i(δ_i) ≤ C̄
//! ```
//!
//! With Erlang isolation the diagonal decay `p/γ_i + δ_i` is not a monomial;
//! it is replaced by a monomial lower bound `κ (p/γ_i)^α ≤ p/γ_i + δ_i`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bound::{
    self, build_system, certified_lambda, lambda_bound, minimal_certificate, verify_certificate, BoundError,
    ComparisonSystem, LambdaBound,
};
use crate::gp::{self, GpError, GpProblem, GpStatus, Monomial, Posynomial, SolverOptions, VarId};
use crate::graph::{degrees, Graph};
use crate::phase_type::{erlang, ErlangSpec};
use crate::simulator::{EpidemicParams, SimError};

/// Relative margin turning the strict certificate inequalities into `≤ 1 - ε`.
pub const DEFAULT_EPSILON: f64 = bound::DEFAULT_SLACK;

/// Points checked when validating a monomial fit.
pub const DEFAULT_FIT_GRID: usize = 10_000;

/// Box for certificate entries.
const V_BOX: (f64, f64) = (1e-8, 1e9);
const T_MAX: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocError {
    #[error("budget {budget} does not cover the fixed cost constants (absorbed budget {absorbed})")]
    Budget { budget: f64, absorbed: f64 },
    #[error("budget insufficient for the requested bound: the allocation program is infeasible (phase-I violation {violation:.3e})")]
    Infeasible { violation: f64 },
    #[error("solver stopped after {steps} Newton steps without converging")]
    SolverStalled { steps: usize },
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
    #[error("invalid rate box [{lo}, {hi}] for {what}")]
    BadBox { what: &'static str, lo: f64, hi: f64 },
    #[error("monomial fit failed its grid check at x = {x} (kappa {kappa}, alpha {alpha})")]
    FitFailed { x: f64, kappa: f64, alpha: f64 },
    #[error("expected {expected} monomial fits, got {got}")]
    MissingFit { expected: usize, got: usize },
    #[error("{0}")]
    Mode(&'static str),
    #[error("invalid model: {0}")]
    Model(String),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Plain,
    Isolation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBox {
    pub lo: f64,
    pub hi: f64,
}

impl RateBox {
    pub fn new(lo: f64, hi: f64) -> Result<Self, AllocError> {
        let b = Self { lo, hi };
        b.check("rate")?;
        Ok(b)
    }

    fn check(&self, what: &'static str) -> Result<(), AllocError> {
        if !(self.lo > 0.0 && self.lo <= self.hi && self.hi.is_finite()) {
            return Err(AllocError::BadBox {
                what,
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(())
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

/// Cost `scale · x^power + offset` of running a node at rate `x`; the power
/// is `-1` for `β` and `γ` and `+1` for `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostForm {
    pub scale: f64,
    pub offset: f64,
}

impl CostForm {
    /// Cost 1 at `expensive`, 0 at `cheap`. A degenerate box costs nothing.
    fn normalized(power: f64, cheap: f64, expensive: f64) -> Self {
        if cheap == expensive {
            return Self {
                scale: 0.0,
                offset: 0.0,
            };
        }
        let scale = 1.0 / (expensive.powf(power) - cheap.powf(power));
        Self {
            scale,
            offset: -scale * cheap.powf(power),
        }
    }

    fn eval(&self, power: f64, x: f64) -> f64 {
        self.scale * x.powf(power) + self.offset
    }

    /// Rate whose cost is `cost`, clamped to the box.
    fn rate_for(&self, power: f64, cost: f64, b: RateBox) -> f64 {
        if self.scale == 0.0 {
            return b.lo;
        }
        let base = (cost - self.offset) / self.scale;
        if !(base > 0.0) {
            // cost below the x → ∞ (or x → 0) asymptote
            return if power < 0.0 { b.hi } else { b.lo };
        }
        b.clamp(base.powf(1.0 / power))
    }
}

const PREVENTION_POWER: f64 = -1.0;
const RECOVERY_POWER: f64 = 1.0;
const ISOLATION_POWER: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SecondResource {
    /// Recovery rates `δ_i` bought at cost `c₃ δ + c₄`.
    Recovery { delta_box: RateBox, cost: CostForm },
    /// Erlang isolation with mean `γ_i` bought at cost `c₅/γ + c₆`, with fixed
    /// natural recovery rate `delta`.
    Isolation {
        gamma_box: RateBox,
        cost: CostForm,
        shape: usize,
        delta: f64,
    },
}

/// Per-node cost functions (identical across nodes), rate boxes and budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub beta_box: RateBox,
    pub prevention: CostForm,
    pub second: SecondResource,
    pub budget: f64,
}

impl CostModel {
    /// Prevention cost 1 at `β̲` and 0 at `β̄`; correction cost 1 at `δ̄` and 0
    /// at `δ̲`.
    pub fn plain(beta_box: RateBox, delta_box: RateBox, budget: f64) -> Result<Self, AllocError> {
        beta_box.check("beta")?;
        delta_box.check("delta")?;
        Ok(Self {
            beta_box,
            prevention: CostForm::normalized(PREVENTION_POWER, beta_box.hi, beta_box.lo),
            second: SecondResource::Recovery {
                delta_box,
                cost: CostForm::normalized(RECOVERY_POWER, delta_box.lo, delta_box.hi),
            },
            budget,
        })
    }

    /// Isolation cost 1 at `γ̲` and 0 at `γ̄`.
    pub fn isolation(
        beta_box: RateBox,
        gamma_box: RateBox,
        shape: usize,
        delta: f64,
        budget: f64,
    ) -> Result<Self, AllocError> {
        beta_box.check("beta")?;
        gamma_box.check("gamma")?;
        if shape == 0 {
            return Err(AllocError::Model("Erlang shape must be at least 1".into()));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(AllocError::Model(format!(
                "recovery rate {delta} must be positive"
            )));
        }
        Ok(Self {
            beta_box,
            prevention: CostForm::normalized(PREVENTION_POWER, beta_box.hi, beta_box.lo),
            second: SecondResource::Isolation {
                gamma_box,
                cost: CostForm::normalized(ISOLATION_POWER, gamma_box.hi, gamma_box.lo),
                shape,
                delta,
            },
            budget,
        })
    }

    pub fn mode(&self) -> Mode {
        match self.second {
            SecondResource::Recovery { .. } => Mode::Plain,
            SecondResource::Isolation { .. } => Mode::Isolation,
        }
    }

    fn second_parts(&self) -> (RateBox, CostForm, f64) {
        match self.second {
            SecondResource::Recovery { delta_box, cost } => (delta_box, cost, RECOVERY_POWER),
            SecondResource::Isolation { gamma_box, cost, .. } => (gamma_box, cost, ISOLATION_POWER),
        }
    }

    pub fn second_box(&self) -> RateBox {
        self.second_parts().0
    }

    pub fn prevention_cost(&self, beta: f64) -> f64 {
        self.prevention.eval(PREVENTION_POWER, beta)
    }

    /// Correction cost of `δ` or isolation cost of `γ`.
    pub fn second_cost(&self, x: f64) -> f64 {
        let (_, cost, power) = self.second_parts();
        cost.eval(power, x)
    }

    /// `C̄ - Σ_i (constant cost terms)`.
    pub fn absorbed_budget(&self, n: usize) -> f64 {
        let (_, cost, _) = self.second_parts();
        self.budget - n as f64 * (self.prevention.offset + cost.offset)
    }

    /// `Σ_i c₁ β_i⁻¹ + (c₃ δ_i or c₅ γ_i⁻¹)`, or `None` when every term is
    /// free.
    fn variable_cost(&self, beta: &[VarId], second: &[VarId]) -> Option<Posynomial> {
        let (_, cost, power) = self.second_parts();
        let mut terms = Vec::new();
        for (&b, &s) in beta.iter().zip(second) {
            if self.prevention.scale > 0.0 {
                terms.push(Monomial::constant(self.prevention.scale).with(b, PREVENTION_POWER));
            }
            if cost.scale > 0.0 {
                terms.push(Monomial::constant(cost.scale).with(s, power));
            }
        }
        Posynomial::new(terms).ok()
    }
}

/// `κ x^α ≤ x + δ` on `[x_lo, x_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonomialBound {
    pub kappa: f64,
    pub alpha: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub delta: f64,
}

impl MonomialBound {
    pub fn eval(&self, x: f64) -> f64 {
        self.kappa * x.powf(self.alpha)
    }

    /// Largest `x + δ - κ x^α` over the range; the gap is convex in `x`, so
    /// it peaks at an endpoint.
    pub fn max_gap(&self) -> f64 {
        gap_at(self.kappa, self.alpha, self.delta, self.x_lo)
            .max(gap_at(self.kappa, self.alpha, self.delta, self.x_hi))
    }

    /// Whether the inequality holds at `grid_size` evenly spaced points and
    /// at the interior touching point.
    pub fn holds_on_grid(&self, grid_size: usize) -> Option<f64> {
        let xs = fit_grid(self.x_lo, self.x_hi, self.alpha, self.delta, grid_size);
        xs.into_iter().find(|&x| self.eval(x) > x + self.delta)
    }
}

fn gap_at(kappa: f64, alpha: f64, delta: f64, x: f64) -> f64 {
    x + delta - kappa * x.powf(alpha)
}

fn fit_grid(lo: f64, hi: f64, alpha: f64, delta: f64, grid_size: usize) -> Vec<f64> {
    let n = grid_size.max(2);
    let mut xs: Vec<f64> = (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect();
    xs.push(touch_point(alpha, delta, lo, hi));
    xs
}

/// Minimizer of `(x + δ) x^{-α}` over `[lo, hi]`.
fn touch_point(alpha: f64, delta: f64, lo: f64, hi: f64) -> f64 {
    if alpha >= 1.0 {
        hi
    } else {
        (alpha * delta / (1.0 - alpha)).clamp(lo, hi)
    }
}

fn tightest_kappa(alpha: f64, delta: f64, lo: f64, hi: f64) -> f64 {
    let x = touch_point(alpha, delta, lo, hi);
    (x + delta) * x.powf(-alpha)
}

/// Monomial lower bound on `x + δ` over `[x_lo, x_hi]` minimizing the largest
/// gap. For each exponent the tightest coefficient is available in closed
/// form; the exponent is found by a coarse scan refined with golden-section
/// search.
pub fn fit_monomial_bound(
    delta: f64,
    x_lo: f64,
    x_hi: f64,
    grid_size: usize,
) -> Result<MonomialBound, AllocError> {
    if !(x_lo > 0.0 && x_lo <= x_hi && x_hi.is_finite()) {
        return Err(AllocError::BadBox {
            what: "fit range",
            lo: x_lo,
            hi: x_hi,
        });
    }
    if !(delta > 0.0) {
        return Err(AllocError::Model(format!("fit offset {delta} must be positive")));
    }
    let gap = |alpha: f64| {
        let k = tightest_kappa(alpha, delta, x_lo, x_hi);
        gap_at(k, alpha, delta, x_lo).max(gap_at(k, alpha, delta, x_hi))
    };
    let alpha = if x_lo == x_hi {
        1.0
    } else {
        const SCAN: usize = 200;
        let grid: Vec<f64> = (1..=SCAN).map(|k| k as f64 / SCAN as f64).collect();
        let best = (0..SCAN)
            .min_by(|&a, &b| gap(grid[a]).total_cmp(&gap(grid[b])))
            .expect("scan grid is non-empty");
        let mut a = if best == 0 { 1e-6 } else { grid[best - 1] };
        let mut b = grid[(best + 1).min(SCAN - 1)];
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        for _ in 0..80 {
            if gap(c) < gap(d) {
                b = d;
            } else {
                a = c;
            }
            c = b - phi * (b - a);
            d = a + phi * (b - a);
        }
        let refined = 0.5 * (a + b);
        if gap(refined) <= gap(grid[best]) {
            refined
        } else {
            grid[best]
        }
    };
    let mut fit = MonomialBound {
        kappa: tightest_kappa(alpha, delta, x_lo, x_hi),
        alpha,
        x_lo,
        x_hi,
        delta,
    };
    // the touching point holds with equality in exact arithmetic; step κ
    // down until rounding cannot break it
    for _ in 0..64 {
        match fit.holds_on_grid(grid_size) {
            None => return Ok(fit),
            Some(_) => fit.kappa *= 1.0 - 4.0 * f64::EPSILON,
        }
    }
    let x = fit.holds_on_grid(grid_size).unwrap_or(x_lo);
    Err(AllocError::FitFailed {
        x,
        kappa: fit.kappa,
        alpha: fit.alpha,
    })
}

/// One shared fit per node for Erlang isolation: `x = p/γ` ranges over
/// `[p/γ̄, p/γ̲]`.
pub fn erlang_fits(costs: &CostModel, n: usize, grid_size: usize) -> Result<Vec<MonomialBound>, AllocError> {
    match costs.second {
        SecondResource::Isolation {
            gamma_box,
            shape,
            delta,
            ..
        } => {
            let p = shape as f64;
            let fit = fit_monomial_bound(delta, p / gamma_box.hi, p / gamma_box.lo, grid_size)?;
            Ok(vec![fit; n])
        }
        SecondResource::Recovery { .. } => {
            Err(AllocError::Mode("monomial fits need an isolation cost model"))
        }
    }
}

/// Either minimize `λ̄`, or certify a fixed `λ̄` at least cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "lambda_bar", rename_all = "lowercase")]
pub enum LambdaMode {
    Minimize,
    Cap(f64),
}

/// A generated allocation program with the bookkeeping needed to read the
/// solution back.
#[derive(Debug, Clone)]
pub struct AllocationProblem {
    pub gp: GpProblem,
    pub lambda_mode: LambdaMode,
    pub epsilon: f64,
    graph: Graph,
    infected: Vec<usize>,
    costs: CostModel,
    beta: Vec<VarId>,
    /// `δ_i` in plain mode, `γ_i` with isolation.
    second: Vec<VarId>,
    /// Node-major `v_{iℓ}`.
    v: Vec<VarId>,
    t: Option<VarId>,
    fits: Option<Vec<MonomialBound>>,
}

impl AllocationProblem {
    pub fn mode(&self) -> Mode {
        self.costs.mode()
    }

    pub fn costs(&self) -> &CostModel {
        &self.costs
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn initially_infected(&self) -> &[usize] {
        &self.infected
    }

    fn phases(&self) -> usize {
        match self.costs.second {
            SecondResource::Recovery { .. } => 1,
            SecondResource::Isolation { shape, .. } => shape,
        }
    }

    /// Epidemic parameters for a rate vector of this problem.
    fn params(&self, beta: &[f64], second: &[f64]) -> Result<EpidemicParams, AllocError> {
        rates_to_params(&self.costs, beta, second, &self.infected)
    }

    /// The certificate system the program encodes: the comparison matrix with
    /// its diagonal decay replaced by the fitted monomial when isolating.
    fn encoded_system(&self, beta: &[f64], second: &[f64]) -> Result<ComparisonSystem, AllocError> {
        let mut sys = build_system(&self.graph, &self.params(beta, second)?)?;
        if let Some(fits) = &self.fits {
            let p = self.phases();
            for (i, fit) in fits.iter().enumerate() {
                let x = p as f64 / second[i];
                for l in 0..p {
                    let k = i * p + l;
                    sys.matrix[(k, k)] = -fit.eval(x);
                }
            }
        }
        Ok(sys)
    }

    /// Rejection sampler over the program's feasible set: rates are drawn
    /// log-uniformly in their boxes and kept when within budget and when the
    /// encoded system, with diagonal scaled by `1 - ε`, is Hurwitz. The
    /// certificate is then a random multiple in `[1, 1.5]` of the smallest one
    /// and `t` (or nothing, in cap mode) is set to satisfy the bound row.
    pub fn sample_feasible_points(
        &self,
        count: usize,
        max_attempts: usize,
        seed: u64,
    ) -> Result<Vec<Vec<f64>>, AllocError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.graph.node_count();
        let second_box = self.costs.second_box();
        let log_uniform = |rng: &mut ChaCha8Rng, b: RateBox| {
            if b.is_degenerate() {
                b.lo
            } else {
                b.clamp((b.lo.ln() + rng.random::<f64>() * (b.hi.ln() - b.lo.ln())).exp())
            }
        };
        let mut out = Vec::new();
        for _ in 0..max_attempts {
            if out.len() == count {
                break;
            }
            let beta: Vec<f64> = (0..n)
                .map(|_| log_uniform(&mut rng, self.costs.beta_box))
                .collect();
            let second: Vec<f64> = (0..n).map(|_| log_uniform(&mut rng, second_box)).collect();
            let sys = self.encoded_system(&beta, &second)?;
            let v = match minimal_certificate(&sys, self.epsilon)? {
                Some(v) => v * (1.0 + 0.5 * rng.random::<f64>()) * (1.0 + 1e-9),
                None => continue,
            };
            let mut x = vec![0.0; self.gp.variable_count()];
            for i in 0..n {
                x[self.beta[i].0] = beta[i];
                x[self.second[i].0] = second[i];
            }
            for (k, id) in self.v.iter().enumerate() {
                x[id.0] = v[k];
            }
            if let Some(t) = self.t {
                x[t.0] = v.dot(&sys.initial) / (1.0 - self.epsilon) * (1.0 + 1e-9);
            }
            if self.gp.is_feasible(&x, 0.0)? {
                out.push(x);
            }
        }
        Ok(out)
    }
}

fn rates_to_params(
    costs: &CostModel,
    beta: &[f64],
    second: &[f64],
    infected: &[usize],
) -> Result<EpidemicParams, AllocError> {
    Ok(match costs.second {
        SecondResource::Recovery { .. } => {
            EpidemicParams::new(beta.to_vec(), second.to_vec(), infected.iter().copied())?
        }
        SecondResource::Isolation { shape, delta, .. } => {
            let laws = second
                .iter()
                .map(|&g| {
                    ErlangSpec::new(shape, g)
                        .map(erlang)
                        .map_err(|e| AllocError::Model(e.to_string()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            EpidemicParams::new(beta.to_vec(), vec![delta; beta.len()], infected.iter().copied())?
                .with_isolation(laws)?
        }
    })
}

fn check_inputs(g: &Graph, infected: &[usize], costs: &CostModel) -> Result<Vec<usize>, AllocError> {
    let mut infected = infected.to_vec();
    infected.sort_unstable();
    infected.dedup();
    if infected.is_empty() {
        return Err(SimError::NoInitialInfection.into());
    }
    if let Some(&node) = infected.iter().find(|&&i| i >= g.node_count()) {
        return Err(SimError::InfectedOutOfRange {
            node,
            node_count: g.node_count(),
        }
        .into());
    }
    if !costs.budget.is_finite() {
        return Err(AllocError::Model(format!(
            "budget {} is not finite",
            costs.budget
        )));
    }
    Ok(infected)
}

struct Skeleton {
    gp: GpProblem,
    beta: Vec<VarId>,
    second: Vec<VarId>,
    v: Vec<VarId>,
    infected: Vec<usize>,
    infected_mask: Vec<bool>,
}

fn skeleton(g: &Graph, infected: &[usize], costs: &CostModel, phases: usize) -> Result<Skeleton, AllocError> {
    let infected = check_inputs(g, infected, costs)?;
    let n = g.node_count();
    let mut gp = GpProblem::feasibility();
    let beta: Vec<VarId> = (0..n)
        .map(|i| gp.add_variable(format!("beta[{i}]"), costs.beta_box.lo, costs.beta_box.hi))
        .collect();
    let second_box = costs.second_box();
    let name = match costs.mode() {
        Mode::Plain => "delta",
        Mode::Isolation => "gamma",
    };
    let second: Vec<VarId> = (0..n)
        .map(|i| gp.add_variable(format!("{name}[{i}]"), second_box.lo, second_box.hi))
        .collect();
    let v: Vec<VarId> = (0..n * phases)
        .map(|k| gp.add_variable(format!("v[{},{}]", k / phases, k % phases), V_BOX.0, V_BOX.1))
        .collect();
    let mut infected_mask = vec![false; n];
    for &i in &infected {
        infected_mask[i] = true;
    }
    Ok(Skeleton {
        gp,
        beta,
        second,
        v,
        infected,
        infected_mask,
    })
}

/// Adds the budget row and the bound row, and sets the objective.
fn finish_problem(
    mut sk: Skeleton,
    g: &Graph,
    costs: &CostModel,
    lambda_mode: LambdaMode,
    epsilon: f64,
    phases: usize,
    fits: Option<Vec<MonomialBound>>,
) -> Result<AllocationProblem, AllocError> {
    let n = g.node_count();
    let absorbed = costs.absorbed_budget(n);
    let spend = costs.variable_cost(&sk.beta, &sk.second);
    if spend.is_some() && !(absorbed > 0.0) {
        return Err(AllocError::Budget {
            budget: costs.budget,
            absorbed,
        });
    }
    if let Some(spend) = &spend {
        sk.gp.add_inequality(spend.clone().scale(1.0 / absorbed));
    }
    let sigma = sk.infected.len() as f64;
    let initial = Posynomial::new(
        sk.infected
            .iter()
            .map(|&i| Monomial::var(sk.v[i * phases]))
            .collect(),
    )?;
    let t = match lambda_mode {
        LambdaMode::Minimize => {
            let t = sk.gp.add_variable("t", 0.5 * sigma, T_MAX);
            sk.gp
                .add_inequality(initial * Monomial::var(t).inverse().scale(1.0 / (1.0 - epsilon)));
            sk.gp.objective = Monomial::var(t).into();
            Some(t)
        }
        LambdaMode::Cap(lambda_bar) => {
            if !(lambda_bar >= 0.0 && lambda_bar.is_finite()) {
                return Err(AllocError::Model(format!(
                    "bound cap {lambda_bar} must be nonnegative"
                )));
            }
            sk.gp
                .add_inequality(initial.scale(1.0 / ((1.0 - epsilon) * (lambda_bar + sigma))));
            sk.gp.objective = spend.unwrap_or_else(|| Monomial::constant(1.0).into());
            None
        }
    };
    Ok(AllocationProblem {
        gp: sk.gp,
        lambda_mode,
        epsilon,
        graph: g.clone(),
        infected: sk.infected,
        costs: *costs,
        beta: sk.beta,
        second: sk.second,
        v: sk.v,
        t,
        fits,
    })
}

/// Allocation program without isolation: variables `v_i, β_i, δ_i` (and `t`
/// when minimizing).
pub fn build_problem1(
    g: &Graph,
    infected: &[usize],
    costs: &CostModel,
    lambda_mode: LambdaMode,
    epsilon: f64,
) -> Result<AllocationProblem, AllocError> {
    if costs.mode() != Mode::Plain {
        return Err(AllocError::Mode(
            "allocation without isolation needs a recovery cost model",
        ));
    }
    let mut sk = skeleton(g, infected, costs, 1)?;
    for j in 0..g.node_count() {
        let mut terms: Vec<Monomial> = g
            .neighbors(j)
            .iter()
            .filter(|&&i| !sk.infected_mask[i])
            .map(|&i| Monomial::var(sk.v[i]).with(sk.beta[i], 1.0))
            .collect();
        terms.push(Monomial::var(sk.second[j]));
        let denominator = Monomial::var(sk.v[j]).with(sk.second[j], 1.0).inverse();
        sk.gp
            .add_inequality(Posynomial::new(terms)? * denominator.scale(1.0 / (1.0 - epsilon)));
    }
    finish_problem(sk, g, costs, lambda_mode, epsilon, 1, None)
}

/// Allocation program with Erlang isolation: variables `v_{iℓ}, β_i, γ_i`
/// (and `t`). Column `(i, ℓ)` reads
///
/// ```text
/// [v_{i,ℓ+1} p/γ_i (ℓ < p) + Σ_j v_{j,1} J_jj β_j a_ji + p/γ_i (ℓ = p) + δ_i]
///     ≤ (1 - ε) κ_i (p/γ_i)^{α_i} v_{iℓ}
/// ```
pub fn build_problem2(
    g: &Graph,
    infected: &[usize],
    costs: &CostModel,
    fits: &[MonomialBound],
    lambda_mode: LambdaMode,
    epsilon: f64,
) -> Result<AllocationProblem, AllocError> {
    let (shape, delta) = match costs.second {
        SecondResource::Isolation { shape, delta, .. } => (shape, delta),
        SecondResource::Recovery { .. } => {
            return Err(AllocError::Mode(
                "allocation with isolation needs an isolation cost model",
            ))
        }
    };
    let n = g.node_count();
    if fits.len() != n {
        return Err(AllocError::MissingFit {
            expected: n,
            got: fits.len(),
        });
    }
    let p = shape;
    let pf = p as f64;
    let mut sk = skeleton(g, infected, costs, p)?;
    for i in 0..n {
        let fit = &fits[i];
        let phase_rate = Monomial::constant(pf).with(sk.second[i], -1.0);
        for l in 0..p {
            let mut terms: Vec<Monomial> = Vec::new();
            if l + 1 < p {
                terms.push(phase_rate.clone() * Monomial::var(sk.v[i * p + l + 1]));
            }
            terms.extend(
                g.neighbors(i)
                    .iter()
                    .filter(|&&j| !sk.infected_mask[j])
                    .map(|&j| Monomial::var(sk.v[j * p]).with(sk.beta[j], 1.0)),
            );
            if l + 1 == p {
                terms.push(phase_rate.clone());
            }
            terms.push(Monomial::constant(delta));
            let decay = phase_rate.pow(fit.alpha).scale(fit.kappa) * Monomial::var(sk.v[i * p + l]);
            sk.gp
                .add_inequality(Posynomial::new(terms)? * decay.inverse().scale(1.0 / (1.0 - epsilon)));
        }
    }
    finish_problem(sk, g, costs, lambda_mode, epsilon, p, Some(fits.to_vec()))
}

/// Rates, costs and certificate of an allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub mode: Mode,
    pub initially_infected: Vec<usize>,
    pub beta: Vec<f64>,
    /// Recovery rates; fixed by the model when isolating.
    pub delta: Vec<f64>,
    /// Mean isolation delays, isolation mode only.
    pub gamma: Option<Vec<f64>>,
    pub erlang_shape: Option<usize>,
    pub prevention_cost: Vec<f64>,
    /// Correction cost per node, or isolation cost with isolation.
    pub second_cost: Vec<f64>,
    pub total_cost: f64,
    /// Bound certified by `certificate_v`; `None` when no certificate exists.
    pub lambda_bar: Option<f64>,
    pub certificate_v: Option<Vec<f64>>,
    /// Bound recomputed from the comparison system.
    pub lambda_bound: LambdaBound,
}

impl Allocation {
    fn from_rates(costs: &CostModel, infected: &[usize], beta: Vec<f64>, second: Vec<f64>) -> Self {
        let prevention_cost: Vec<f64> = beta.iter().map(|&b| costs.prevention_cost(b)).collect();
        let second_cost: Vec<f64> = second.iter().map(|&x| costs.second_cost(x)).collect();
        let total_cost = prevention_cost.iter().sum::<f64>() + second_cost.iter().sum::<f64>();
        let (delta, gamma, erlang_shape) = match costs.second {
            SecondResource::Recovery { .. } => (second, None, None),
            SecondResource::Isolation { shape, delta, .. } => {
                (vec![delta; beta.len()], Some(second), Some(shape))
            }
        };
        Self {
            mode: costs.mode(),
            initially_infected: infected.to_vec(),
            beta,
            delta,
            gamma,
            erlang_shape,
            prevention_cost,
            second_cost,
            total_cost,
            lambda_bar: None,
            certificate_v: None,
            lambda_bound: LambdaBound::Unbounded,
        }
    }

    /// Simulation parameters realizing this allocation.
    pub fn params(&self) -> Result<EpidemicParams, AllocError> {
        let p = EpidemicParams::new(
            self.beta.clone(),
            self.delta.clone(),
            self.initially_infected.iter().copied(),
        )?;
        Ok(match (&self.gamma, self.erlang_shape) {
            (Some(gamma), Some(shape)) => {
                let laws = gamma
                    .iter()
                    .map(|&g| {
                        ErlangSpec::new(shape, g)
                            .map(erlang)
                            .map_err(|e| AllocError::Model(e.to_string()))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                p.with_isolation(laws)?
            }
            _ => p,
        })
    }

    pub fn comparison_system(&self, g: &Graph) -> Result<ComparisonSystem, AllocError> {
        Ok(build_system(g, &self.params()?)?)
    }

    /// Attaches the smallest certificate at margin `epsilon` and the closed
    /// form bound.
    fn certify(mut self, g: &Graph, epsilon: f64) -> Result<Self, AllocError> {
        let sys = self.comparison_system(g)?;
        self.lambda_bound = lambda_bound(&sys)?;
        if let Some(v) = minimal_certificate(&sys, epsilon)? {
            self.lambda_bar = Some(certified_lambda(&sys, &v, epsilon));
            self.certificate_v = Some(v.iter().copied().collect());
        }
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("allocation serializes")
    }

    /// Per-node scatter data: `node,degree,prevention_cost,correction_cost`,
    /// the last column holding the isolation cost in isolation mode.
    pub fn to_csv(&self, g: &Graph) -> String {
        let deg = degrees(g);
        let mut out = String::from("node,degree,prevention_cost,correction_cost\n");
        for i in 0..self.beta.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                i, deg[i], self.prevention_cost[i], self.second_cost[i]
            ));
        }
        out
    }
}

/// Solves an allocation program and validates the result: the certificate
/// must pass [`verify_certificate`] at margin `ε/2` on the true comparison
/// system, the closed-form bound must not exceed `λ̄`, and the budget must
/// hold.
pub fn solve_allocation(problem: &AllocationProblem, opts: &SolverOptions) -> Result<Allocation, AllocError> {
    let sol = gp::solve(&problem.gp, opts)?;
    match sol.status {
        GpStatus::Optimal => {}
        GpStatus::Infeasible => {
            return Err(AllocError::Infeasible {
                violation: sol.kkt_residual,
            })
        }
        GpStatus::MaxIter => {
            return Err(AllocError::SolverStalled {
                steps: sol.newton_steps,
            })
        }
    }
    let x = &sol.point;
    let beta: Vec<f64> = problem.beta.iter().map(|v| x[v.0]).collect();
    let second: Vec<f64> = problem.second.iter().map(|v| x[v.0]).collect();
    let v = DVector::from_iterator(problem.v.len(), problem.v.iter().map(|id| x[id.0]));
    let sigma = problem.infected.len() as f64;
    let lambda_bar = match (problem.lambda_mode, problem.t) {
        (LambdaMode::Minimize, Some(t)) => x[t.0] - sigma,
        (LambdaMode::Cap(cap), _) => cap,
        (LambdaMode::Minimize, None) => unreachable!("minimize mode always has a t variable"),
    };

    let mut alloc = Allocation::from_rates(&problem.costs, &problem.infected, beta, second);
    let sys = alloc.comparison_system(&problem.graph)?;
    if !verify_certificate(&sys, &v, lambda_bar, problem.epsilon / 2.0)? {
        return Err(AllocError::Consistency(
            "solver certificate does not verify on the comparison system".into(),
        ));
    }
    alloc.lambda_bound = lambda_bound(&sys)?;
    let closed = alloc.lambda_bound.or_infinity();
    if closed > lambda_bar + 1e-8 * (1.0 + lambda_bar.abs()) {
        return Err(AllocError::Consistency(format!(
            "closed-form bound {closed} exceeds certified {lambda_bar}"
        )));
    }
    if alloc.total_cost > problem.costs.budget + 1e-8 {
        return Err(AllocError::Consistency(format!(
            "allocation costs {} over budget {}",
            alloc.total_cost, problem.costs.budget
        )));
    }
    alloc.lambda_bar = Some(lambda_bar);
    alloc.certificate_v = Some(v.iter().copied().collect());
    Ok(alloc)
}

/// Builds and solves the minimize-`λ̄` program for the cost model's mode,
/// fitting the isolation monomials when needed.
pub fn optimize(
    g: &Graph,
    infected: &[usize],
    costs: &CostModel,
    epsilon: f64,
    opts: &SolverOptions,
) -> Result<Allocation, AllocError> {
    let problem = match costs.mode() {
        Mode::Plain => build_problem1(g, infected, costs, LambdaMode::Minimize, epsilon)?,
        Mode::Isolation => {
            let fits = erlang_fits(costs, g.node_count(), DEFAULT_FIT_GRID)?;
            build_problem2(g, infected, costs, &fits, LambdaMode::Minimize, epsilon)?
        }
    };
    solve_allocation(&problem, opts)
}

/// Equal cost share per node and per priced resource, each rate solved from
/// its cost form and clamped to its box.
pub fn baseline_uniform(
    g: &Graph,
    infected: &[usize],
    costs: &CostModel,
    epsilon: f64,
) -> Result<Allocation, AllocError> {
    let infected = check_inputs(g, infected, costs)?;
    let n = g.node_count();
    let (second_box, second_form, power) = costs.second_parts();
    let priced = [costs.prevention.scale > 0.0, second_form.scale > 0.0]
        .iter()
        .filter(|&&b| b)
        .count()
        .max(1);
    let share = costs.budget / (n * priced) as f64;
    let beta = costs.prevention.rate_for(PREVENTION_POWER, share, costs.beta_box);
    let second = second_form.rate_for(power, share, second_box);
    Allocation::from_rates(costs, &infected, vec![beta; n], vec![second; n]).certify(g, epsilon)
}

/// All rates at the cheap end of their boxes.
fn cheapest(
    g: &Graph,
    infected: &[usize],
    costs: &CostModel,
    epsilon: f64,
) -> Result<Allocation, AllocError> {
    let infected = check_inputs(g, infected, costs)?;
    let n = g.node_count();
    let second_box = costs.second_box();
    let second = match costs.second {
        SecondResource::Recovery { .. } => second_box.lo,
        SecondResource::Isolation { .. } => second_box.hi,
    };
    Allocation::from_rates(costs, &infected, vec![costs.beta_box.hi; n], vec![second; n]).certify(g, epsilon)
}

/// Allocation maximizing the decay rate `s` of the SIS comparison system:
/// `vᵀ(BA - D) ≤ -s vᵀ` under the same budget and boxes. It protects every
/// node alike, ignoring which nodes start infected, and is then evaluated
/// under the SIR bound.
pub fn baseline_sis_spectral(
    g: &Graph,
    infected: &[usize],
    costs: &CostModel,
    opts: &SolverOptions,
    epsilon: f64,
) -> Result<Allocation, AllocError> {
    let SecondResource::Recovery { delta_box, .. } = costs.second else {
        return Err(AllocError::Mode("SIS baseline is defined without isolation"));
    };
    let infected = check_inputs(g, infected, costs)?;
    if g.edge_count() == 0 {
        return cheapest(g, &infected, costs, epsilon);
    }
    let n = g.node_count();
    let mut gp = GpProblem::feasibility();
    let beta: Vec<VarId> = (0..n)
        .map(|i| gp.add_variable(format!("beta[{i}]"), costs.beta_box.lo, costs.beta_box.hi))
        .collect();
    let delta: Vec<VarId> = (0..n)
        .map(|i| gp.add_variable(format!("delta[{i}]"), delta_box.lo, delta_box.hi))
        .collect();
    let v: Vec<VarId> = (0..n)
        .map(|i| gp.add_variable(format!("v[{i}]"), 1e-6, 1.0))
        .collect();
    let s = gp.add_variable("s", 1e-9, delta_box.hi);
    for j in 0..n {
        let mut terms: Vec<Monomial> = g
            .neighbors(j)
            .iter()
            .map(|&i| Monomial::var(v[i]).with(beta[i], 1.0))
            .collect();
        terms.push(Monomial::var(s).with(v[j], 1.0));
        gp.add_inequality(Posynomial::new(terms)? * Monomial::var(v[j]).with(delta[j], 1.0).inverse());
    }
    let absorbed = costs.absorbed_budget(n);
    if let Some(spend) = costs.variable_cost(&beta, &delta) {
        if !(absorbed > 0.0) {
            return Err(AllocError::Budget {
                budget: costs.budget,
                absorbed,
            });
        }
        gp.add_inequality(spend.scale(1.0 / absorbed));
    }
    gp.objective = Monomial::var(s).inverse().into();
    let sol = gp::solve(&gp, opts)?;
    match sol.status {
        GpStatus::Optimal => {}
        GpStatus::Infeasible => {
            return Err(AllocError::Infeasible {
                violation: sol.kkt_residual,
            })
        }
        GpStatus::MaxIter => {
            return Err(AllocError::SolverStalled {
                steps: sol.newton_steps,
            })
        }
    }
    let b: Vec<f64> = beta.iter().map(|id| sol.point[id.0]).collect();
    let d: Vec<f64> = delta.iter().map(|id| sol.point[id.0]).collect();
    Allocation::from_rates(costs, &infected, b, d).certify(g, epsilon)
}

/// Optimal `λ̄` for each budget in `budgets`.
pub fn budget_sweep(
    g: &Graph,
    infected: &[usize],
    costs: &CostModel,
    budgets: &[f64],
    epsilon: f64,
    opts: &SolverOptions,
) -> Vec<(f64, Result<Allocation, AllocError>)> {
    budgets
        .iter()
        .map(|&b| {
            let c = CostModel { budget: b, ..*costs };
            (b, optimize(g, infected, &c, epsilon, opts))
        })
        .collect()
}
