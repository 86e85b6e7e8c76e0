//! Linear comparison systems that dominate the mean infection dynamics, and
//! the certified upper bounds on `λ` they yield.
//!
//! For a node-phase vector `Ĩ`, the expected infection indicators satisfy
//! `d/dt E[Ĩ] ≤ 𝒜 E[Ĩ]` with
//!
//! ```text
//! 𝒜 = ⊕ᵢ (Π′ᵢ)ᵀ + (J B A) ⊗ (u₁ 𝟙ᵀ)
//! ```
//!
//! where `J` masks initially infected nodes and `Π′ᵢ` is the generator of the
//! total infectious period. Without isolation `p = 1`, `Π′ᵢ = -δᵢ` and the
//! matrix reduces to `JBA - D`. When `𝒜` is Hurwitz,
//! `λ ≤ -w′ᵀ 𝒜⁻¹ Ĩ(0) - σ_I(0)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;
use crate::phase_type;
use crate::simulator::{EpidemicParams, SimError};

/// Margin used when deciding stability for [`lambda_bound`].
pub const HURWITZ_TOL: f64 = 1e-12;

/// Default relative slack turning strict certificate inequalities into
/// checkable ones.
pub const DEFAULT_SLACK: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("matrix is not Metzler: entry ({row}, {col}) = {value}")]
    NotMetzler { row: usize, col: usize, value: f64 },
    #[error("linear solve failed on a matrix reported as Hurwitz")]
    Singular,
    #[error("certificate has length {got}, expected {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("{0}")]
    Mode(&'static str),
    #[error(transparent)]
    Params(#[from] SimError),
}

/// Result of [`lambda_bound`]: a certified upper bound, or no certificate
/// because the comparison system is not stable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum LambdaBound {
    Finite(f64),
    Unbounded,
}

impl LambdaBound {
    pub fn value(&self) -> Option<f64> {
        match *self {
            LambdaBound::Finite(v) => Some(v),
            LambdaBound::Unbounded => None,
        }
    }

    /// Numeric view with `+∞` for the unbounded case.
    pub fn or_infinity(&self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSystem {
    /// Metzler matrix of dimension `n·p`, node-major (`i·p + ℓ`).
    pub matrix: DMatrix<f64>,
    /// Removal rate out of each node-phase.
    pub weight_row: DVector<f64>,
    pub initial: DVector<f64>,
    pub sigma_i0: usize,
    pub phases: usize,
}

impl ComparisonSystem {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Copy of the matrix with its diagonal scaled by `factor`.
    fn with_scaled_diagonal(&self, factor: f64) -> DMatrix<f64> {
        let mut m = self.matrix.clone();
        for k in 0..m.nrows() {
            m[(k, k)] *= factor;
        }
        m
    }
}

/// `M = JBA - D` with weights `𝟙ᵀD` and initial vector `I(0)`.
pub fn build_sir_system(g: &Graph, params: &EpidemicParams) -> Result<ComparisonSystem, BoundError> {
    if params.isolation().is_some() {
        return Err(BoundError::Mode(
            "plain comparison system needs parameters without isolation",
        ));
    }
    build_system(g, params)
}

/// Block system `𝒜` over node-phases with the isolation laws folded into
/// `Π′ᵢ = Πᵢ - δᵢ I`.
pub fn build_isolation_system(g: &Graph, params: &EpidemicParams) -> Result<ComparisonSystem, BoundError> {
    if params.isolation().is_none() {
        return Err(BoundError::Mode(
            "isolation comparison system needs isolation laws",
        ));
    }
    build_system(g, params)
}

/// Comparison system for whichever model `params` describes.
pub fn build_system(g: &Graph, params: &EpidemicParams) -> Result<ComparisonSystem, BoundError> {
    params.check_graph(g)?;
    let n = g.node_count();
    let p = params.phases();
    let dim = n * p;
    let mut matrix = DMatrix::zeros(dim, dim);
    let mut weight_row = DVector::zeros(dim);
    let mut initial = DVector::zeros(dim);
    for i in 0..n {
        let law = params.removal_law(i);
        let gen = law.generator();
        let w = phase_type::exit_rates(&law);
        for l in 0..p {
            for m in 0..p {
                matrix[(i * p + l, i * p + m)] = gen[(m, l)];
            }
            weight_row[i * p + l] = w[l];
        }
        if params.is_initially_infected(i) {
            initial[i * p] = 1.0;
        } else {
            let beta = params.beta()[i];
            for &j in g.neighbors(i) {
                for m in 0..p {
                    matrix[(i * p, j * p + m)] += beta;
                }
            }
        }
    }
    Ok(ComparisonSystem {
        matrix,
        weight_row,
        initial,
        sigma_i0: params.initial_infected_count(),
        phases: p,
    })
}

fn check_metzler(m: &DMatrix<f64>) -> Result<(), BoundError> {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if r != c && m[(r, c)] < 0.0 {
                return Err(BoundError::NotMetzler {
                    row: r,
                    col: c,
                    value: m[(r, c)],
                });
            }
        }
    }
    Ok(())
}

/// Whether `sI - m` is a nonsingular M-matrix, i.e. every eigenvalue of the
/// Metzler matrix `m` has real part below `s`. For a Z-matrix this holds
/// exactly when Gaussian elimination without pivoting meets only positive
/// pivots (all leading principal minors positive).
fn abscissa_below(m: &DMatrix<f64>, s: f64) -> bool {
    let n = m.nrows();
    let mut a = -m.clone();
    for k in 0..n {
        a[(k, k)] += s;
    }
    for k in 0..n {
        let pivot = a[(k, k)];
        if !(pivot > 0.0) {
            return false;
        }
        for r in k + 1..n {
            let factor = a[(r, k)] / pivot;
            if factor == 0.0 {
                continue;
            }
            for c in k + 1..n {
                a[(r, c)] -= factor * a[(k, c)];
            }
        }
    }
    true
}

/// Rightmost eigenvalue of a Metzler matrix (real by Perron–Frobenius),
/// located by bisection between the largest diagonal entry and the largest
/// row sum.
pub fn spectral_abscissa(m: &DMatrix<f64>, tol: f64) -> Result<f64, BoundError> {
    check_metzler(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let mut lo = (0..n).map(|k| m[(k, k)]).fold(f64::NEG_INFINITY, f64::max);
    let mut hi = (0..n).map(|r| m.row(r).sum()).fold(f64::NEG_INFINITY, f64::max);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if abscissa_below(m, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Whether the spectral abscissa of Metzler `m` is below `-tol`.
pub fn is_hurwitz_metzler(m: &DMatrix<f64>, tol: f64) -> Result<bool, BoundError> {
    check_metzler(m)?;
    Ok(abscissa_below(m, -tol))
}

/// `-w′ᵀ 𝒜⁻¹ Ĩ(0) - σ_I(0)`, clamped at zero, or [`LambdaBound::Unbounded`]
/// when the matrix is not Hurwitz.
pub fn lambda_bound(sys: &ComparisonSystem) -> Result<LambdaBound, BoundError> {
    if !is_hurwitz_metzler(&sys.matrix, HURWITZ_TOL)? {
        return Ok(LambdaBound::Unbounded);
    }
    let x = sys
        .matrix
        .clone()
        .lu()
        .solve(&sys.initial)
        .ok_or(BoundError::Singular)?;
    let value = -sys.weight_row.dot(&x) - sys.sigma_i0 as f64;
    Ok(LambdaBound::Finite(value.max(0.0)))
}

/// Checks the certificate inequalities with relative margin `slack`:
///
/// ```text
/// Σ_{r≠k} v_r M_rk + w_k ≤ (1 - slack) · v_k (-M_kk)   for every k
/// vᵀ Ĩ(0) ≤ (1 - slack) · (λ̄ + σ_I(0))
/// ```
///
/// together with `v > 0`.
pub fn verify_certificate(
    sys: &ComparisonSystem,
    v: &DVector<f64>,
    lambda_bar: f64,
    slack: f64,
) -> Result<bool, BoundError> {
    if v.len() != sys.dim() {
        return Err(BoundError::Dimension {
            got: v.len(),
            expected: sys.dim(),
        });
    }
    if v.iter().any(|&x| !(x > 0.0)) {
        return Ok(false);
    }
    let keep = 1.0 - slack;
    for k in 0..sys.dim() {
        let flow: f64 = (0..sys.dim())
            .filter(|&r| r != k)
            .map(|r| v[r] * sys.matrix[(r, k)])
            .sum();
        let decay = -sys.matrix[(k, k)] * v[k];
        if !(flow + sys.weight_row[k] <= keep * decay) {
            return Ok(false);
        }
    }
    Ok(v.dot(&sys.initial) <= keep * (lambda_bar + sys.sigma_i0 as f64))
}

/// Smallest certificate satisfying the column inequalities with equality at
/// relative margin `slack`, i.e. `vᵀ M_slack = -wᵀ` where `M_slack` has its
/// diagonal scaled by `1 - slack`. `None` when `M_slack` is not Hurwitz.
pub fn minimal_certificate(sys: &ComparisonSystem, slack: f64) -> Result<Option<DVector<f64>>, BoundError> {
    let m = sys.with_scaled_diagonal(1.0 - slack);
    if !is_hurwitz_metzler(&m, HURWITZ_TOL)? {
        return Ok(None);
    }
    let v = m
        .transpose()
        .lu()
        .solve(&(-&sys.weight_row))
        .ok_or(BoundError::Singular)?;
    Ok(Some(v))
}

/// Bound certified by `v` at margin `slack`: the smallest `λ̄` accepted by
/// [`verify_certificate`].
pub fn certified_lambda(sys: &ComparisonSystem, v: &DVector<f64>, slack: f64) -> f64 {
    v.dot(&sys.initial) / (1.0 - slack) - sys.sigma_i0 as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_oracle::exact_lambda;
    use crate::phase_type::{erlang, ErlangSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn two_node(beta: f64, delta: f64) -> (Graph, EpidemicParams) {
        (
            Graph::path(2),
            EpidemicParams::uniform(2, beta, delta, [0]).unwrap(),
        )
    }

    fn dense_abscissa(m: &DMatrix<f64>) -> f64 {
        m.complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn two_node_matrix() {
        let g = Graph::path(2);
        let p = EpidemicParams::new(vec![0.3, 0.2], vec![0.5, 0.4], [0]).unwrap();
        let sys = build_sir_system(&g, &p).unwrap();
        assert_eq!(sys.matrix, DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.2, -0.4]));
        assert_eq!(sys.weight_row, DVector::from_vec(vec![0.5, 0.4]));
        assert_eq!(sys.initial, DVector::from_vec(vec![1.0, 0.0]));
    }

    #[test]
    fn no_susceptibles_or_no_edges_give_minus_d() {
        let g = Graph::complete(3);
        let p = EpidemicParams::new(vec![1.0; 3], vec![0.1, 0.2, 0.3], 0..3).unwrap();
        let sys = build_sir_system(&g, &p).unwrap();
        assert_eq!(
            sys.matrix,
            -DMatrix::from_diagonal(&DVector::from_vec(vec![0.1, 0.2, 0.3]))
        );
        assert_eq!(lambda_bound(&sys).unwrap(), LambdaBound::Finite(0.0));

        let g = Graph::edgeless(3);
        let p = EpidemicParams::new(vec![1.0; 3], vec![0.1, 0.2, 0.3], [1]).unwrap();
        let sys = build_sir_system(&g, &p).unwrap();
        assert_eq!(
            sys.matrix,
            -DMatrix::from_diagonal(&DVector::from_vec(vec![0.1, 0.2, 0.3]))
        );
        assert_eq!(lambda_bound(&sys).unwrap(), LambdaBound::Finite(0.0));
    }

    #[test]
    fn two_node_bound() {
        let (g, p) = two_node(0.2, 0.5);
        let sys = build_sir_system(&g, &p).unwrap();
        let bound = lambda_bound(&sys).unwrap().value().unwrap();
        assert_abs_diff_eq!(bound, 0.4, epsilon = 1e-14);
        assert!(exact_lambda(&g, &p).unwrap() <= bound);
    }

    #[test]
    fn hurwitz_examples() {
        let n = 3;
        assert!(is_hurwitz_metzler(&-DMatrix::<f64>::identity(n, n), 1e-12).unwrap());
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(!is_hurwitz_metzler(&swap, 1e-12).unwrap());
        let (g, p) = two_node(0.2, 0.5);
        let sys = build_sir_system(&g, &p).unwrap();
        assert!(is_hurwitz_metzler(&sys.matrix, 1e-12).unwrap());
        assert_abs_diff_eq!(
            spectral_abscissa(&sys.matrix, 1e-12).unwrap(),
            -0.5,
            epsilon = 1e-11
        );
    }

    #[test]
    fn not_metzler_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[-1.0, -0.1, 0.0, -1.0]);
        assert!(matches!(
            is_hurwitz_metzler(&m, 0.0),
            Err(BoundError::NotMetzler { .. })
        ));
    }

    #[test]
    fn unstable_system_is_unbounded() {
        let g = Graph::complete(4);
        let p = EpidemicParams::uniform(4, 2.0, 0.1, [0]).unwrap();
        let sys = build_sir_system(&g, &p).unwrap();
        assert_eq!(lambda_bound(&sys).unwrap(), LambdaBound::Unbounded);
        assert!(minimal_certificate(&sys, DEFAULT_SLACK).unwrap().is_none());
    }

    #[test]
    fn one_phase_isolation_reduces_to_plain() {
        let g = Graph::erdos_renyi(5, 0.5, 3);
        let gamma = [1.0, 2.0, 0.5, 4.0, 3.0];
        let laws = gamma
            .iter()
            .map(|&m| erlang(ErlangSpec::new(1, m).unwrap()))
            .collect();
        let delta = vec![0.2, 0.3, 0.4, 0.5, 0.6];
        let beta = vec![0.1, 0.2, 0.3, 0.2, 0.1];
        let iso = EpidemicParams::new(beta.clone(), delta.clone(), [0, 2])
            .unwrap()
            .with_isolation(laws)
            .unwrap();
        let merged: Vec<f64> = delta.iter().zip(&gamma).map(|(d, g)| d + 1.0 / g).collect();
        let plain = EpidemicParams::new(beta, merged, [0, 2]).unwrap();
        let a = build_isolation_system(&g, &iso).unwrap();
        let b = build_sir_system(&g, &plain).unwrap();
        assert!((&a.matrix - &b.matrix).abs().max() < 1e-15);
        assert!((&a.weight_row - &b.weight_row).abs().max() < 1e-15);
        let la = lambda_bound(&a).unwrap().value().unwrap();
        let lb = lambda_bound(&b).unwrap().value().unwrap();
        assert!((la - lb).abs() < 1e-12);
    }

    #[test]
    fn isolated_single_node_bound_is_zero() {
        let laws = vec![erlang(ErlangSpec::new(2, 1.0).unwrap())];
        let p = EpidemicParams::uniform(1, 0.5, 0.1, [0])
            .unwrap()
            .with_isolation(laws.clone())
            .unwrap();
        let sys = build_isolation_system(&Graph::edgeless(1), &p).unwrap();
        let z = phase_type::min_with_exponential(&laws[0], 0.1);
        assert_eq!(sys.matrix, z.generator().transpose());
        assert_abs_diff_eq!(lambda_bound(&sys).unwrap().value().unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn two_node_isolation_blocks() {
        // p = 2, Erlang mean 1 (phase rate 2), δ = 0.1, β = 0.3, node 0 infected
        let laws = vec![erlang(ErlangSpec::new(2, 1.0).unwrap()); 2];
        let p = EpidemicParams::uniform(2, 0.3, 0.1, [0])
            .unwrap()
            .with_isolation(laws)
            .unwrap();
        let sys = build_isolation_system(&Graph::path(2), &p).unwrap();
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(4, 4, &[
            -2.1, 0.0,  0.0, 0.0,
             2.0, -2.1, 0.0, 0.0,
             0.3, 0.3, -2.1, 0.0,
             0.0, 0.0,  2.0, -2.1,
        ]);
        assert!((&sys.matrix - expected).abs().max() < 1e-15);
        for (got, want) in sys.weight_row.iter().zip([0.1, 2.1, 0.1, 2.1]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-14);
        }
        assert_eq!(sys.initial.as_slice(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn certificate_boundary_cases() {
        let g = Graph::edgeless(2);
        let p = EpidemicParams::uniform(2, 0.5, 1.0, [0]).unwrap();
        let sys = build_sir_system(&g, &p).unwrap();
        let ones = DVector::repeat(2, 1.0);
        assert!(!verify_certificate(&sys, &ones, 0.5, 1e-9).unwrap());
        let twos = DVector::repeat(2, 2.0);
        assert!(verify_certificate(&sys, &twos, 1.01, 1e-6).unwrap());
        assert!(!verify_certificate(&sys, &twos, 0.99, 1e-6).unwrap());
        assert!(verify_certificate(&sys, &DVector::repeat(3, 2.0), 1.0, 0.0).is_err());
    }

    #[test]
    fn minimal_certificate_reproduces_bound() {
        let g = Graph::erdos_renyi(6, 0.5, 9);
        let p = EpidemicParams::uniform(6, 0.1, 0.4, [0, 3]).unwrap();
        let sys = build_sir_system(&g, &p).unwrap();
        let v = minimal_certificate(&sys, 0.0).unwrap().unwrap();
        let bound = lambda_bound(&sys).unwrap().value().unwrap();
        assert!((certified_lambda(&sys, &v, 0.0) - bound).abs() < 1e-10);
        let v = minimal_certificate(&sys, 1e-6).unwrap().unwrap();
        let lam = certified_lambda(&sys, &v, 1e-6);
        assert!(verify_certificate(&sys, &v, lam * (1.0 + 1e-9) + 1e-12, 5e-7).unwrap());
        assert!(lam >= bound);
    }

    fn small_instance() -> impl Strategy<Value = (Graph, EpidemicParams)> {
        (2usize..5, 0.3f64..1.0, 0u64..10_000).prop_flat_map(|(n, ep, seed)| {
            (
                Just(Graph::erdos_renyi(n, ep, seed)),
                proptest::collection::vec(0.05f64..1.0, n),
                proptest::collection::vec(0.05f64..1.0, n),
                proptest::collection::vec(any::<bool>(), n),
            )
                .prop_map(|(g, beta, delta, mask)| {
                    let mut infected: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
                    if infected.is_empty() {
                        infected.push(0);
                    }
                    (g, EpidemicParams::new(beta, delta, infected).unwrap())
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn bound_dominates_exact((g, p) in small_instance()) {
            let sys = build_sir_system(&g, &p).unwrap();
            if let LambdaBound::Finite(b) = lambda_bound(&sys).unwrap() {
                prop_assert!(exact_lambda(&g, &p).unwrap() <= b + 1e-9);
            }
        }

        #[test]
        fn hurwitz_matches_dense_eigenvalues((g, p) in small_instance()) {
            let sys = build_sir_system(&g, &p).unwrap();
            let dense = dense_abscissa(&sys.matrix);
            prop_assume!(dense.abs() > 1e-6);
            prop_assert_eq!(is_hurwitz_metzler(&sys.matrix, 0.0).unwrap(), dense < 0.0);
            prop_assert!((spectral_abscissa(&sys.matrix, 1e-12).unwrap() - dense).abs() < 1e-8);
        }

        #[test]
        fn bound_monotone_in_rates((g, p) in small_instance(), node in 0usize..4, factor in 1.01f64..2.0) {
            let node = node % g.node_count();
            let base = lambda_bound(&build_sir_system(&g, &p).unwrap()).unwrap();
            let mut beta = p.beta().to_vec();
            beta[node] *= factor;
            let up = EpidemicParams::new(beta, p.delta().to_vec(), p.initially_infected().to_vec()).unwrap();
            let up_bound = lambda_bound(&build_sir_system(&g, &up).unwrap()).unwrap();
            prop_assert!(up_bound.or_infinity() >= base.or_infinity() - 1e-9);

            let mut delta = p.delta().to_vec();
            delta[node] *= factor;
            let cured = EpidemicParams::new(p.beta().to_vec(), delta, p.initially_infected().to_vec()).unwrap();
            let cured_bound = lambda_bound(&build_sir_system(&g, &cured).unwrap()).unwrap();
            prop_assert!(cured_bound.or_infinity() <= base.or_infinity() + 1e-9);
        }

        #[test]
        fn certificate_soundness((g, p) in small_instance(), scale in proptest::collection::vec(1.0f64..3.0, 4), lambda_bar in 0.1f64..5.0) {
            let sys = build_sir_system(&g, &p).unwrap();
            let v = DVector::from_iterator(sys.dim(), scale.iter().cycle().copied().take(sys.dim()));
            if verify_certificate(&sys, &v, lambda_bar, 1e-9).unwrap() {
                prop_assert!(is_hurwitz_metzler(&sys.matrix, 0.0).unwrap());
                prop_assert!(lambda_bound(&sys).unwrap().or_infinity() <= lambda_bar + 1e-9);
            }
            // the converse direction through the minimal certificate
            if let LambdaBound::Finite(b) = lambda_bound(&sys).unwrap() {
                if let Some(v) = minimal_certificate(&sys, 1e-8).unwrap() {
                    prop_assert!(verify_certificate(&sys, &v, certified_lambda(&sys, &v, 1e-8) + 1e-9, 5e-9).unwrap());
                    prop_assert!(certified_lambda(&sys, &v, 1e-8) >= b - 1e-9);
                }
            }
        }
    }
}
