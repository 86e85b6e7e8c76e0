//! Small dense linear-algebra helpers shared by the graph, phase-type and
//! bound modules.

use nalgebra::DMatrix;

/// Bracket `[lower, upper]` on the Perron root of a nonnegative operator,
/// together with the normalized iterate that produced it.
#[derive(Debug, Clone)]
pub struct PerronEstimate {
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PerronFailure {
    pub iterations: usize,
    pub lower: f64,
    pub upper: f64,
    pub last_iterate: Vec<f64>,
}

/// Power iteration with Collatz–Wielandt bounds.
///
/// `apply(x, y)` must write `A x` into `y` for a nonnegative matrix `A` with
/// a strictly positive diagonal, so iterates started from the all-ones vector
/// stay positive. For any positive `x`, `max_i (Ax)_i / x_i` bounds the Perron
/// root from above. The lower bound uses `x` restricted to its non-negligible
/// support, which keeps it valid for reducible matrices whose iterates
/// concentrate on one block.
///
/// Iteration stops as soon as `stop(lower, upper)` returns true.
pub fn perron_bracket<F, S>(
    n: usize,
    mut apply: F,
    cap: usize,
    mut stop: S,
) -> Result<PerronEstimate, PerronFailure>
where
    F: FnMut(&[f64], &mut [f64]),
    S: FnMut(f64, f64) -> bool,
{
    let mut x = vec![1.0; n];
    let mut y = vec![0.0; n];
    let mut trunc = vec![0.0; n];
    let mut y_trunc = vec![0.0; n];
    let (mut lower, mut upper) = (0.0, f64::INFINITY);
    for iter in 1..=cap {
        apply(&x, &mut y);
        upper = x
            .iter()
            .zip(&y)
            .map(|(&xi, &yi)| yi / xi)
            .fold(f64::NEG_INFINITY, f64::max);

        let xmax = x.iter().copied().fold(0.0, f64::max);
        let cutoff = xmax * 1e-10;
        let full_support = x.iter().all(|&xi| xi >= cutoff);
        let candidate = if full_support {
            x.iter()
                .zip(&y)
                .map(|(&xi, &yi)| yi / xi)
                .fold(f64::INFINITY, f64::min)
        } else {
            for (t, &xi) in trunc.iter_mut().zip(&x) {
                *t = if xi >= cutoff { xi } else { 0.0 };
            }
            apply(&trunc, &mut y_trunc);
            trunc
                .iter()
                .zip(&y_trunc)
                .filter(|(&t, _)| t > 0.0)
                .map(|(&t, &yt)| yt / t)
                .fold(f64::INFINITY, f64::min)
        };
        lower = f64::max(lower, candidate);

        if stop(lower, upper) {
            return Ok(PerronEstimate {
                lower,
                upper,
                iterations: iter,
                vector: x,
            });
        }

        let ymax = y.iter().copied().fold(0.0, f64::max);
        if !(ymax > 0.0) || !ymax.is_finite() {
            break;
        }
        for (xi, &yi) in x.iter_mut().zip(&y) {
            *xi = yi / ymax;
        }
    }
    Err(PerronFailure {
        iterations: cap,
        lower,
        upper,
        last_iterate: x,
    })
}

/// Perron root to absolute accuracy `tol`.
pub fn perron_root<F>(n: usize, apply: F, tol: f64, cap: usize) -> Result<PerronEstimate, PerronFailure>
where
    F: FnMut(&[f64], &mut [f64]),
{
    perron_bracket(n, apply, cap, |lo, hi| hi - lo <= tol)
}

/// Matrix exponential by scaling and squaring with a fixed-order Taylor
/// polynomial. The scaled matrix has norm at most 1/2, so 20 terms put the
/// truncation error far below 1e-12 before squaring.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = (0..n)
        .map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings);
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=20 {
        term = &term * &scaled / k as f64;
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn expm_of_diagonal() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 2.0, 0.0]));
        let e = expm(&a);
        assert_abs_diff_eq!(e[(0, 0)], (-1.0f64).exp(), epsilon = 1e-13);
        assert_abs_diff_eq!(e[(1, 1)], 2.0f64.exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(e[(2, 2)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn expm_of_jordan_block() {
        // exp([[a, 1], [0, a]] t) = e^{at} [[1, t], [0, 1]]
        let a = DMatrix::from_row_slice(2, 2, &[-3.0, 1.0, 0.0, -3.0]) * 4.0;
        let e = expm(&a);
        let s = (-12.0f64).exp();
        assert_abs_diff_eq!(e[(0, 0)], s, epsilon = 1e-15);
        assert_abs_diff_eq!(e[(0, 1)], 4.0 * s, epsilon = 1e-15);
        assert_abs_diff_eq!(e[(1, 0)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn perron_bracket_on_reducible_matrix() {
        // block diag(2, 1): the iterate concentrates on the first coordinate
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let apply = |x: &[f64], y: &mut [f64]| {
            let v = &m * nalgebra::DVector::from_column_slice(x);
            y.copy_from_slice(v.as_slice());
        };
        let est = perron_root(2, apply, 1e-12, 10_000).unwrap();
        assert_abs_diff_eq!(est.lower, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(est.upper, 2.0, epsilon = 1e-12);
    }
}
