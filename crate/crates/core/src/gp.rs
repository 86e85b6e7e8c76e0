//! Posynomial algebra and a geometric-program solver.
//!
//! A geometric program minimizes a posynomial subject to posynomial
//! constraints `f(x) ≤ 1`, monomial equalities `g(x) = 1` and boxes
//! `lo ≤ x ≤ hi`. Substituting `x = exp(y)` turns every posynomial into a
//! log-sum-exp of affine functions, which is convex; the transformed problem
//! is solved by a log-barrier interior-point method with damped Newton steps.
//! A phase-I problem finds a strictly feasible start or certifies that none
//! exists.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("variable {0} is not defined in the problem")]
    MissingVariable(usize),
    #[error("point has length {got}, problem has {expected} variables")]
    Dimension { got: usize, expected: usize },
    #[error("point entry {index} is {value}, must be positive and finite")]
    NonPositivePoint { index: usize, value: f64 },
    #[error("monomial coefficient {0} must be positive and finite")]
    BadCoefficient(f64),
    #[error("posynomial has no terms")]
    EmptyPosynomial,
    #[error("box for `{name}` is [{lo}, {hi}], need 0 < lo <= hi < inf")]
    BadBox { name: String, lo: f64, hi: f64 },
}

/// Index of a variable inside a [`GpProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

/// `c · Π x_k^{a_k}` with `c > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    coeff: f64,
    exponents: BTreeMap<VarId, f64>,
}

impl Monomial {
    pub fn new(coeff: f64, exponents: impl IntoIterator<Item = (VarId, f64)>) -> Result<Self, GpError> {
        if !(coeff > 0.0 && coeff.is_finite()) {
            return Err(GpError::BadCoefficient(coeff));
        }
        let mut m = Self {
            coeff,
            exponents: BTreeMap::new(),
        };
        for (v, a) in exponents {
            *m.exponents.entry(v).or_insert(0.0) += a;
        }
        m.exponents.retain(|_, a| *a != 0.0);
        Ok(m)
    }

    /// Panics on a non-positive coefficient; for literals known to be valid.
    pub fn constant(coeff: f64) -> Self {
        Self::new(coeff, []).expect("monomial coefficient must be positive")
    }

    pub fn var(v: VarId) -> Self {
        Self::constant(1.0).with(v, 1.0)
    }

    /// Multiplies by `x_v^a`.
    pub fn with(mut self, v: VarId, a: f64) -> Self {
        let e = self.exponents.entry(v).or_insert(0.0);
        *e += a;
        if *e == 0.0 {
            self.exponents.remove(&v);
        }
        self
    }

    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    pub fn exponents(&self) -> &BTreeMap<VarId, f64> {
        &self.exponents
    }

    pub fn exponent(&self, v: VarId) -> f64 {
        self.exponents.get(&v).copied().unwrap_or(0.0)
    }

    pub fn scale(mut self, c: f64) -> Self {
        assert!(c > 0.0 && c.is_finite(), "scale factor must be positive");
        self.coeff *= c;
        self
    }

    pub fn pow(&self, a: f64) -> Self {
        Self {
            coeff: self.coeff.powf(a),
            exponents: self
                .exponents
                .iter()
                .filter(|_| a != 0.0)
                .map(|(&v, &e)| (v, e * a))
                .collect(),
        }
    }

    pub fn inverse(&self) -> Self {
        self.pow(-1.0)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64, GpError> {
        let mut value = self.coeff;
        for (&v, &a) in &self.exponents {
            let xv = *x.get(v.0).ok_or(GpError::MissingVariable(v.0))?;
            if !(xv > 0.0 && xv.is_finite()) {
                return Err(GpError::NonPositivePoint {
                    index: v.0,
                    value: xv,
                });
            }
            value *= xv.powf(a);
        }
        Ok(value)
    }

    fn max_var(&self) -> Option<usize> {
        self.exponents.keys().next_back().map(|v| v.0)
    }
}

impl Mul for Monomial {
    type Output = Monomial;
    fn mul(mut self, rhs: Monomial) -> Monomial {
        self.coeff *= rhs.coeff;
        for (v, a) in rhs.exponents {
            self = self.with(v, a);
        }
        self
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.coeff)?;
        for (v, a) in &self.exponents {
            if *a == 1.0 {
                write!(f, "·{v}")?;
            } else {
                write!(f, "·{v}^{a}")?;
            }
        }
        Ok(())
    }
}

/// Sum of monomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posynomial {
    terms: Vec<Monomial>,
}

impl Posynomial {
    pub fn new(terms: Vec<Monomial>) -> Result<Self, GpError> {
        if terms.is_empty() {
            return Err(GpError::EmptyPosynomial);
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn scale(mut self, c: f64) -> Self {
        self.terms = self.terms.into_iter().map(|t| t.scale(c)).collect();
        self
    }

    /// Merges terms with identical exponents and orders them canonically.
    pub fn simplified(&self) -> Self {
        let mut merged: Vec<Monomial> = Vec::new();
        for t in &self.terms {
            match merged.iter_mut().find(|m| m.exponents == t.exponents) {
                Some(m) => m.coeff += t.coeff,
                None => merged.push(t.clone()),
            }
        }
        merged.sort_by(|a, b| {
            let ka: Vec<_> = a.exponents.iter().map(|(v, e)| (v.0, e.to_bits())).collect();
            let kb: Vec<_> = b.exponents.iter().map(|(v, e)| (v.0, e.to_bits())).collect();
            ka.cmp(&kb)
        });
        Self { terms: merged }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64, GpError> {
        self.terms.iter().map(|t| t.evaluate(x)).sum()
    }

    fn max_var(&self) -> Option<usize> {
        self.terms.iter().filter_map(Monomial::max_var).max()
    }
}

impl From<Monomial> for Posynomial {
    fn from(m: Monomial) -> Self {
        Self { terms: vec![m] }
    }
}

impl Add for Posynomial {
    type Output = Posynomial;
    fn add(mut self, rhs: Posynomial) -> Posynomial {
        self.terms.extend(rhs.terms);
        self
    }
}

impl Add<Monomial> for Posynomial {
    type Output = Posynomial;
    fn add(mut self, rhs: Monomial) -> Posynomial {
        self.terms.push(rhs);
        self
    }
}

impl Add for Monomial {
    type Output = Posynomial;
    fn add(self, rhs: Monomial) -> Posynomial {
        Posynomial {
            terms: vec![self, rhs],
        }
    }
}

impl Mul<Monomial> for Posynomial {
    type Output = Posynomial;
    fn mul(self, rhs: Monomial) -> Posynomial {
        Posynomial {
            terms: self.terms.into_iter().map(|t| t * rhs.clone()).collect(),
        }
    }
}

impl Mul for Posynomial {
    type Output = Posynomial;
    fn mul(self, rhs: Posynomial) -> Posynomial {
        let mut terms = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for a in &self.terms {
            for b in &rhs.terms {
                terms.push(a.clone() * b.clone());
            }
        }
        Posynomial { terms }
    }
}

impl fmt::Display for Posynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

/// Value of a posynomial at a positive point.
pub fn evaluate(p: &Posynomial, x: &[f64]) -> Result<f64, GpError> {
    p.evaluate(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpProblem {
    pub variables: Vec<Variable>,
    pub objective: Posynomial,
    /// Each posynomial is constrained to be at most 1.
    pub inequalities: Vec<Posynomial>,
    /// Each monomial is constrained to equal 1.
    pub equalities: Vec<Monomial>,
}

impl GpProblem {
    pub fn new(objective: Posynomial) -> Self {
        Self {
            variables: Vec::new(),
            objective,
            inequalities: Vec::new(),
            equalities: Vec::new(),
        }
    }

    /// Problem with a placeholder objective of 1, to be replaced.
    pub fn feasibility() -> Self {
        Self::new(Monomial::constant(1.0).into())
    }

    pub fn add_variable(&mut self, name: impl Into<String>, lo: f64, hi: f64) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            lo,
            hi,
        });
        VarId(self.variables.len() - 1)
    }

    pub fn add_inequality(&mut self, p: impl Into<Posynomial>) {
        self.inequalities.push(p.into());
    }

    pub fn add_equality(&mut self, m: Monomial) {
        self.equalities.push(m);
    }

    pub fn variable_count(&self) -> usize {
        self.variables.len()
    }

    pub fn validate(&self) -> Result<(), GpError> {
        for v in &self.variables {
            if !(v.lo > 0.0 && v.lo <= v.hi && v.hi.is_finite()) {
                return Err(GpError::BadBox {
                    name: v.name.clone(),
                    lo: v.lo,
                    hi: v.hi,
                });
            }
        }
        let n = self.variables.len();
        let check = |top: Option<usize>| match top {
            Some(k) if k >= n => Err(GpError::MissingVariable(k)),
            _ => Ok(()),
        };
        check(self.objective.max_var())?;
        for p in &self.inequalities {
            if p.terms.is_empty() {
                return Err(GpError::EmptyPosynomial);
            }
            check(p.max_var())?;
        }
        for m in &self.equalities {
            check(m.max_var())?;
        }
        Ok(())
    }

    /// Whether `x` lies in the boxes and satisfies every constraint up to
    /// `tol` (inequalities `f ≤ 1 + tol`, equalities `|g - 1| ≤ tol`).
    pub fn is_feasible(&self, x: &[f64], tol: f64) -> Result<bool, GpError> {
        if x.len() != self.variables.len() {
            return Err(GpError::Dimension {
                got: x.len(),
                expected: self.variables.len(),
            });
        }
        let in_box = self
            .variables
            .iter()
            .zip(x)
            .all(|(v, &xi)| xi >= v.lo && xi <= v.hi);
        if !in_box {
            return Ok(false);
        }
        for p in &self.inequalities {
            if p.evaluate(x)? > 1.0 + tol {
                return Ok(false);
            }
        }
        for m in &self.equalities {
            if (m.evaluate(x)? - 1.0).abs() > tol {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Sparse affine form `b + Σ a_i z_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineTerm {
    pub constant: f64,
    pub coeffs: Vec<(usize, f64)>,
}

impl AffineTerm {
    fn value(&self, z: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().map(|&(i, a)| a * z[i]).sum::<f64>()
    }
}

/// `log Σ_t exp(b_t + a_t · z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LseFunction {
    pub terms: Vec<AffineTerm>,
}

impl LseFunction {
    pub fn value(&self, z: &[f64]) -> f64 {
        let vals: Vec<f64> = self.terms.iter().map(|t| t.value(z)).collect();
        log_sum_exp(&vals)
    }

    /// Value and softmax weights of the terms.
    fn weights(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let vals: Vec<f64> = self.terms.iter().map(|t| t.value(z)).collect();
        let lse = log_sum_exp(&vals);
        (lse, vals.iter().map(|v| (v - lse).exp()).collect())
    }

    pub fn gradient(&self, z: &[f64]) -> DVector<f64> {
        let (_, w) = self.weights(z);
        let mut g = DVector::zeros(z.len());
        for (t, wt) in self.terms.iter().zip(&w) {
            for &(i, a) in &t.coeffs {
                g[i] += wt * a;
            }
        }
        g
    }

    pub fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(z.len(), z.len());
        let (_, w) = self.weights(z);
        let grad = self.sparse_gradient(&w);
        self.accumulate_hessian(&w, &grad, 1.0, &mut h);
        h
    }

    fn sparse_gradient(&self, w: &[f64]) -> Vec<(usize, f64)> {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (t, wt) in self.terms.iter().zip(w) {
            for &(i, a) in &t.coeffs {
                *acc.entry(i).or_insert(0.0) += wt * a;
            }
        }
        acc.into_iter().collect()
    }

    /// Adds `scale · ∇²` to `h` given weights and gradient.
    fn accumulate_hessian(&self, w: &[f64], grad: &[(usize, f64)], scale: f64, h: &mut DMatrix<f64>) {
        if self.terms.len() == 1 {
            return;
        }
        for (t, wt) in self.terms.iter().zip(w) {
            let s = scale * wt;
            for &(i, a) in &t.coeffs {
                for &(j, b) in &t.coeffs {
                    h[(i, j)] += s * a * b;
                }
            }
        }
        for &(i, a) in grad {
            for &(j, b) in grad {
                h[(i, j)] -= scale * a * b;
            }
        }
    }
}

fn log_sum_exp(vals: &[f64]) -> f64 {
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + vals.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Linear inequality `a · z ≤ bound` in the reduced coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineBound {
    pub coeffs: Vec<(usize, f64)>,
    pub bound: f64,
}

impl AffineBound {
    fn slack(&self, z: &[f64]) -> f64 {
        self.bound - self.coeffs.iter().map(|&(i, a)| a * z[i]).sum::<f64>()
    }
}

/// Convex form of a [`GpProblem`] over reduced log-coordinates `z`, with
/// `log x = y = offset + basis · z` absorbing equalities and fixed variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogConvexProblem {
    pub names: Vec<String>,
    pub dim: usize,
    pub objective: LseFunction,
    /// Each function must be at most 0.
    pub constraints: Vec<LseFunction>,
    pub linear: Vec<AffineBound>,
    pub offset: Vec<f64>,
    /// `y_k = offset_k + Σ basis[k] z`.
    pub basis: Vec<Vec<(usize, f64)>>,
    /// Set when the equalities and fixed variables admit no solution.
    pub inconsistent: bool,
}

impl LogConvexProblem {
    pub fn lift(&self, z: &[f64]) -> Vec<f64> {
        self.offset
            .iter()
            .zip(&self.basis)
            .map(|(o, row)| o + row.iter().map(|&(i, a)| a * z[i]).sum::<f64>())
            .collect()
    }

    /// Point `x = exp(y(z))`.
    pub fn point(&self, z: &[f64]) -> Vec<f64> {
        self.lift(z).into_iter().map(f64::exp).collect()
    }

    /// JSON description for external verification.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("log-convex problem serializes")
    }
}

const EQUALITY_TOL: f64 = 1e-9;

/// Log-space transform `x = exp(y)`. Fixed variables (`lo == hi`) are
/// substituted; the remaining monomial equalities are affine in `y` and are
/// eliminated through an orthonormal null-space basis.
pub fn to_log_convex(p: &GpProblem) -> Result<LogConvexProblem, GpError> {
    p.validate()?;
    let m = p.variables.len();
    let log_lo: Vec<f64> = p.variables.iter().map(|v| v.lo.ln()).collect();
    let log_hi: Vec<f64> = p.variables.iter().map(|v| v.hi.ln()).collect();
    let fixed: Vec<bool> = p.variables.iter().map(|v| v.lo == v.hi).collect();
    let free: Vec<usize> = (0..m).filter(|&k| !fixed[k]).collect();
    let mut inconsistent = false;

    // equalities in the free variables: a · y_free = rhs
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for eq in &p.equalities {
        let mut a = vec![0.0; free.len()];
        let mut rhs = -eq.coeff.ln();
        for (&v, &e) in &eq.exponents {
            if fixed[v.0] {
                rhs -= e * log_lo[v.0];
            } else {
                let pos = free.iter().position(|&k| k == v.0).expect("free variable");
                a[pos] += e;
            }
        }
        if a.iter().all(|&x| x == 0.0) {
            if rhs.abs() > EQUALITY_TOL {
                inconsistent = true;
            }
        } else {
            rows.push((a, rhs));
        }
    }

    let mut offset: Vec<f64> = (0..m).map(|k| if fixed[k] { log_lo[k] } else { 0.0 }).collect();
    let mut basis: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    let dim;
    if rows.is_empty() {
        dim = free.len();
        for (z, &k) in free.iter().enumerate() {
            basis[k].push((z, 1.0));
        }
    } else {
        let a = DMatrix::from_fn(rows.len(), free.len(), |r, c| rows[r].0[c]);
        let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
        let svd = nalgebra::SVD::new(a.clone(), true, true);
        let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let rank_tol = smax * 1e-12 * free.len().max(rows.len()) as f64;
        let y0 = svd.solve(&b, rank_tol).expect("SVD with both factors computed");
        if (&a * &y0 - &b).amax() > EQUALITY_TOL {
            inconsistent = true;
        }
        // null space of A from the full right singular vectors
        let full = nalgebra::SVD::new(
            {
                let mut padded = DMatrix::zeros(free.len().max(rows.len()), free.len());
                padded.rows_mut(0, rows.len()).copy_from(&a);
                padded
            },
            false,
            true,
        );
        let vt = full.v_t.expect("right singular vectors requested");
        let null: Vec<usize> = (0..free.len())
            .filter(|&r| full.singular_values.get(r).map_or(true, |&s| s <= rank_tol))
            .collect();
        dim = null.len();
        for (pos, &k) in free.iter().enumerate() {
            offset[k] = y0[pos];
            for (z, &r) in null.iter().enumerate() {
                let c = vt[(r, pos)];
                if c.abs() > 1e-15 {
                    basis[k].push((z, c));
                }
            }
        }
    }

    let transform = |poly: &Posynomial| -> LseFunction {
        LseFunction {
            terms: poly
                .terms
                .iter()
                .map(|t| {
                    let mut constant = t.coeff.ln();
                    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
                    for (&v, &e) in &t.exponents {
                        constant += e * offset[v.0];
                        for &(z, c) in &basis[v.0] {
                            *acc.entry(z).or_insert(0.0) += e * c;
                        }
                    }
                    AffineTerm {
                        constant,
                        coeffs: acc.into_iter().filter(|(_, a)| *a != 0.0).collect(),
                    }
                })
                .collect(),
        }
    };

    let mut linear = Vec::new();
    for &k in &free {
        let row = &basis[k];
        linear.push(AffineBound {
            coeffs: row.clone(),
            bound: log_hi[k] - offset[k],
        });
        linear.push(AffineBound {
            coeffs: row.iter().map(|&(z, c)| (z, -c)).collect(),
            bound: offset[k] - log_lo[k],
        });
    }

    Ok(LogConvexProblem {
        names: p.variables.iter().map(|v| v.name.clone()).collect(),
        dim,
        objective: transform(&p.objective),
        constraints: p.inequalities.iter().map(transform).collect(),
        linear,
        offset,
        basis,
        inconsistent,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpSolution {
    pub point: Vec<f64>,
    pub objective_value: f64,
    pub status: GpStatus,
    /// Bound on the log-space objective gap `log f_0(x) - log f_0*` from the
    /// central-path duality gap and the final Newton decrement. For an
    /// infeasible problem, the smallest log-space violation found in phase I.
    pub kkt_residual: f64,
    pub newton_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    /// Newton step cap for each of phase I and phase II.
    pub max_newton: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_newton: 500,
        }
    }
}

/// Barrier problem over `z`: objective, `F_k(z) ≤ 0`, linear bounds.
struct Barrier<'a> {
    objective: &'a LseFunction,
    constraints: &'a [LseFunction],
    linear: &'a [AffineBound],
    dim: usize,
}

struct BarrierRun {
    z: Vec<f64>,
    tau: f64,
    /// Squared Newton decrement at the last centering check.
    decrement: f64,
    converged: bool,
    stopped_early: bool,
}

const BARRIER_GROWTH: f64 = 20.0;
const CENTERING_TOL: f64 = 1e-10;

impl Barrier<'_> {
    fn barrier_count(&self) -> usize {
        self.constraints.len() + self.linear.len()
    }

    /// `τ F_0 - Σ log(-F_k) - Σ log(slack)`, or `None` outside the domain.
    fn phi(&self, z: &[f64], tau: f64) -> Option<f64> {
        let mut total = tau * self.objective.value(z);
        for c in self.constraints {
            let f = c.value(z);
            if !(f < 0.0) {
                return None;
            }
            total -= (-f).ln();
        }
        for l in self.linear {
            let s = l.slack(z);
            if !(s > 0.0) {
                return None;
            }
            total -= s.ln();
        }
        Some(total)
    }

    /// Gradient and Hessian of the barrier objective.
    fn derivatives(&self, z: &[f64], tau: f64) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.dim;
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        let (_, w) = self.objective.weights(z);
        let grad0 = self.objective.sparse_gradient(&w);
        for &(i, a) in &grad0 {
            g[i] += tau * a;
        }
        self.objective.accumulate_hessian(&w, &grad0, tau, &mut h);
        for c in self.constraints {
            let (f, w) = c.weights(z);
            let gc = c.sparse_gradient(&w);
            let inv = 1.0 / (-f);
            for &(i, a) in &gc {
                g[i] += inv * a;
            }
            for &(i, a) in &gc {
                for &(j, b) in &gc {
                    h[(i, j)] += inv * inv * a * b;
                }
            }
            c.accumulate_hessian(&w, &gc, inv, &mut h);
        }
        for l in self.linear {
            let inv = 1.0 / l.slack(z);
            for &(i, a) in &l.coeffs {
                g[i] += inv * a;
            }
            for &(i, a) in &l.coeffs {
                for &(j, b) in &l.coeffs {
                    h[(i, j)] += inv * inv * a * b;
                }
            }
        }
        (g, h)
    }

    fn run(
        &self,
        mut z: Vec<f64>,
        tau0: f64,
        tol: f64,
        cap: usize,
        steps: &mut usize,
        stop: impl Fn(&[f64]) -> bool,
    ) -> BarrierRun {
        let mut tau = tau0;
        let m = self.barrier_count() as f64;
        let mut last_decrement = f64::INFINITY;
        loop {
            // centering
            loop {
                if *steps >= cap {
                    return BarrierRun {
                        z,
                        tau,
                        decrement: last_decrement,
                        converged: false,
                        stopped_early: false,
                    };
                }
                let (g, h) = self.derivatives(&z, tau);
                let dz = match newton_direction(h, &g) {
                    Some(d) => d,
                    None => break,
                };
                let decrement = -g.dot(&dz);
                let phi0 = self.phi(&z, tau).expect("iterate stays strictly feasible");
                // below this the Armijo test only sees rounding noise
                let noise = 64.0 * f64::EPSILON * (phi0.abs() + 1.0);
                if decrement / 2.0 <= CENTERING_TOL || decrement <= noise {
                    last_decrement = decrement;
                    break;
                }
                last_decrement = decrement;
                *steps += 1;
                let mut t = 1.0;
                let mut accepted = false;
                while t > 1e-14 {
                    let trial: Vec<f64> = z.iter().zip(dz.iter()).map(|(a, d)| a + t * d).collect();
                    if let Some(phi) = self.phi(&trial, tau) {
                        // a step that leaves φ unchanged in floating point is no progress
                        if phi <= phi0 - 0.01 * t * decrement && phi < phi0 {
                            z = trial;
                            accepted = true;
                            break;
                        }
                    }
                    t *= 0.5;
                }
                if !accepted {
                    break;
                }
                if stop(&z) {
                    return BarrierRun {
                        z,
                        tau,
                        decrement: last_decrement,
                        converged: false,
                        stopped_early: true,
                    };
                }
            }
            if m / tau < tol {
                return BarrierRun {
                    z,
                    tau,
                    decrement: last_decrement,
                    converged: true,
                    stopped_early: false,
                };
            }
            if stop(&z) {
                return BarrierRun {
                    z,
                    tau,
                    decrement: last_decrement,
                    converged: false,
                    stopped_early: true,
                };
            }
            tau *= BARRIER_GROWTH;
        }
    }
}

/// Solves `H d = -g`, by Cholesky when possible and regularized LU otherwise.
fn newton_direction(h: DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let rhs = -g;
    if let Some(ch) = h.clone().cholesky() {
        return Some(ch.solve(&rhs));
    }
    let n = h.nrows();
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    let mut reg = 1e-12 * scale;
    while reg < scale {
        let shifted = &h + DMatrix::identity(n, n) * reg;
        if let Some(ch) = shifted.cholesky() {
            return Some(ch.solve(&rhs));
        }
        reg *= 100.0;
    }
    None
}

/// Start point strictly inside the boxes when coordinates are plain log
/// variables (log-box centers); the origin otherwise.
fn initial_point(p: &GpProblem, lc: &LogConvexProblem) -> Vec<f64> {
    let mut z = vec![0.0; lc.dim];
    for (k, row) in lc.basis.iter().enumerate() {
        if let [(i, c)] = row.as_slice() {
            if *c == 1.0 && lc.offset[k] == 0.0 {
                let v = &p.variables[k];
                z[*i] = 0.5 * (v.lo.ln() + v.hi.ln());
            }
        }
    }
    z
}

/// Solves a geometric program.
pub fn solve(p: &GpProblem, opts: &SolverOptions) -> Result<GpSolution, GpError> {
    let lc = to_log_convex(p)?;
    let finish = |lc: &LogConvexProblem, z: &[f64], status, kkt, steps| -> Result<GpSolution, GpError> {
        let point: Vec<f64> = lc
            .point(z)
            .into_iter()
            .zip(&p.variables)
            .map(|(x, v)| x.clamp(v.lo, v.hi))
            .collect();
        Ok(GpSolution {
            objective_value: p.objective.evaluate(&point)?,
            point,
            status,
            kkt_residual: kkt,
            newton_steps: steps,
        })
    };
    if lc.inconsistent {
        let z = vec![0.0; lc.dim];
        return finish(&lc, &z, GpStatus::Infeasible, f64::INFINITY, 0);
    }

    // phase I over (z, s): F_k(z) - s ≤ 0, a·z - s ≤ bound; minimize s
    let mut z = initial_point(p, &lc);
    let s_index = lc.dim;
    let violation = lc
        .constraints
        .iter()
        .map(|c| c.value(&z))
        .chain(lc.linear.iter().map(|l| -l.slack(&z)))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut steps_phase1 = 0;
    if violation >= -1e-3 {
        let shifted: Vec<LseFunction> = lc
            .constraints
            .iter()
            .map(|c| LseFunction {
                terms: c
                    .terms
                    .iter()
                    .map(|t| {
                        let mut coeffs = t.coeffs.clone();
                        coeffs.push((s_index, -1.0));
                        AffineTerm {
                            constant: t.constant,
                            coeffs,
                        }
                    })
                    .collect(),
            })
            .collect();
        let linear: Vec<AffineBound> = lc
            .linear
            .iter()
            .map(|l| {
                let mut coeffs = l.coeffs.clone();
                coeffs.push((s_index, -1.0));
                AffineBound {
                    coeffs,
                    bound: l.bound,
                }
            })
            .collect();
        let objective = LseFunction {
            terms: vec![AffineTerm {
                constant: 0.0,
                coeffs: vec![(s_index, 1.0)],
            }],
        };
        let barrier = Barrier {
            objective: &objective,
            constraints: &shifted,
            linear: &linear,
            dim: lc.dim + 1,
        };
        let mut start = z.clone();
        start.push(violation.max(0.0) + 1.0);
        let run = barrier.run(start, 1.0, opts.tol, opts.max_newton, &mut steps_phase1, |w| {
            w[s_index] < -1e-3
        });
        let s = run.z[s_index];
        z = run.z[..lc.dim].to_vec();
        if s >= 0.0 {
            let status = if run.converged {
                GpStatus::Infeasible
            } else {
                GpStatus::MaxIter
            };
            return finish(&lc, &z, status, s, steps_phase1);
        }
    }

    let barrier = Barrier {
        objective: &lc.objective,
        constraints: &lc.constraints,
        linear: &lc.linear,
        dim: lc.dim,
    };
    let mut steps = 0;
    let run = barrier.run(z, 1.0, opts.tol, opts.max_newton, &mut steps, |_| false);
    // self-concordance: F_0(z) - F_0* ≤ (m + decrement) / τ
    let kkt = (barrier.barrier_count() as f64 + run.decrement) / run.tau;
    let status = if run.converged {
        GpStatus::Optimal
    } else {
        GpStatus::MaxIter
    };
    debug_assert!(!run.stopped_early);
    finish(&lc, &run.z, status, kkt, steps_phase1 + steps)
}

/// Draws up to `count` feasible points by rejection sampling uniformly in the
/// log-box. Gives up after `max_attempts` draws. Equality constraints are
/// only honored when they are implied by fixed variables.
pub fn sample_feasible_points<R: Rng + ?Sized>(
    p: &GpProblem,
    count: usize,
    max_attempts: usize,
    tol: f64,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>, GpError> {
    p.validate()?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..max_attempts {
        if out.len() == count {
            break;
        }
        let x: Vec<f64> = p
            .variables
            .iter()
            .map(|v| {
                if v.lo == v.hi {
                    v.lo
                } else {
                    (v.lo.ln() + rng.random::<f64>() * (v.hi.ln() - v.lo.ln())).exp()
                }
            })
            .collect();
        if p.is_feasible(&x, tol)? {
            out.push(x);
        }
    }
    Ok(out)
}
