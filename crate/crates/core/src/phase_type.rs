//! Phase-type distributions: absorption times of a finite continuous-time
//! Markov chain with transient generator `Π` and initial phase law `φ`.
//!
//! Only the Erlang family is constructed directly; [`min_with_exponential`]
//! closes it under taking the minimum with an independent exponential time,
//! which is how natural recovery and isolation combine.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::expm;

const STRUCTURE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseTypeError {
    #[error("generator must be square and non-empty, got {rows}x{cols}")]
    Shape { rows: usize, cols: usize },
    #[error("initial distribution has length {got}, expected {expected}")]
    InitialLength { got: usize, expected: usize },
    #[error("off-diagonal entry ({row}, {col}) = {value} is negative")]
    NotMetzler { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum} > 0")]
    PositiveRowSum { row: usize, sum: f64 },
    #[error("generator is singular: some phase never reaches absorption")]
    Singular,
    #[error("initial distribution must be nonnegative and sum to 1")]
    BadInitial,
    #[error("invalid Erlang parameters: shape {shape}, mean {mean}")]
    BadErlang { shape: usize, mean: f64 },
}

/// Erlang law with `shape` phases and the given mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErlangSpec {
    pub shape: usize,
    pub mean: f64,
}

impl ErlangSpec {
    pub fn new(shape: usize, mean: f64) -> Result<Self, PhaseTypeError> {
        if shape == 0 || !(mean > 0.0) || !mean.is_finite() {
            return Err(PhaseTypeError::BadErlang { shape, mean });
        }
        Ok(Self { shape, mean })
    }

    /// Rate of each phase, `p / γ`.
    pub fn phase_rate(&self) -> f64 {
        self.shape as f64 / self.mean
    }
}

/// Phase-type law `(φ, Π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseType {
    initial: DVector<f64>,
    generator: DMatrix<f64>,
}

impl PhaseType {
    /// Validates the generator (Metzler, nonpositive row sums, invertible)
    /// and the initial distribution.
    pub fn new(initial: DVector<f64>, generator: DMatrix<f64>) -> Result<Self, PhaseTypeError> {
        let (rows, cols) = generator.shape();
        if rows == 0 || rows != cols {
            return Err(PhaseTypeError::Shape { rows, cols });
        }
        if initial.len() != rows {
            return Err(PhaseTypeError::InitialLength {
                got: initial.len(),
                expected: rows,
            });
        }
        for r in 0..rows {
            let mut sum = 0.0;
            let mut scale: f64 = 0.0;
            for c in 0..cols {
                let v = generator[(r, c)];
                if r != c && v < 0.0 {
                    return Err(PhaseTypeError::NotMetzler {
                        row: r,
                        col: c,
                        value: v,
                    });
                }
                sum += v;
                scale = scale.max(v.abs());
            }
            if sum > STRUCTURE_TOL * scale.max(1.0) {
                return Err(PhaseTypeError::PositiveRowSum { row: r, sum });
            }
        }
        if initial.iter().any(|&v| v < 0.0) || (initial.sum() - 1.0).abs() > 1e-9 {
            return Err(PhaseTypeError::BadInitial);
        }
        if generator
            .clone()
            .lu()
            .solve(&DVector::repeat(rows, 1.0))
            .is_none()
        {
            return Err(PhaseTypeError::Singular);
        }
        Ok(Self { initial, generator })
    }

    /// `(u₁, Π)`.
    pub fn from_generator(generator: DMatrix<f64>) -> Result<Self, PhaseTypeError> {
        let mut initial = DVector::zeros(generator.nrows().max(1));
        initial[0] = 1.0;
        Self::new(initial, generator)
    }

    /// Exponential law with the given rate, as a one-phase distribution.
    pub fn exponential(rate: f64) -> Result<Self, PhaseTypeError> {
        Self::from_generator(DMatrix::from_element(1, 1, -rate))
    }

    pub fn phases(&self) -> usize {
        self.generator.nrows()
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn initial(&self) -> &DVector<f64> {
        &self.initial
    }

    /// Diagonal part of the generator.
    pub fn diagonal_part(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.generator.diagonal())
    }

    /// Off-diagonal part of the generator.
    pub fn off_diagonal_part(&self) -> DMatrix<f64> {
        let mut m = self.generator.clone();
        m.fill_diagonal(0.0);
        m
    }

    /// Mean absorption time `-φ Π⁻¹ 𝟙`.
    pub fn mean(&self) -> f64 {
        let ones = DVector::repeat(self.phases(), 1.0);
        let x = self
            .generator
            .clone()
            .lu()
            .solve(&ones)
            .expect("validated invertible");
        -self.initial.dot(&x)
    }

    /// Variance `2 φ Π⁻² 𝟙 - mean²`.
    pub fn variance(&self) -> f64 {
        let lu = self.generator.clone().lu();
        let ones = DVector::repeat(self.phases(), 1.0);
        let x = lu.solve(&ones).expect("validated invertible");
        let x2 = lu.solve(&x).expect("validated invertible");
        let mean = -self.initial.dot(&x);
        2.0 * self.initial.dot(&x2) - mean * mean
    }

    /// True when no phase can move to a lower-indexed phase, i.e. the
    /// generator is upper triangular.
    pub fn is_upper_triangular(&self) -> bool {
        let p = self.phases();
        (0..p).all(|r| (0..r).all(|c| self.generator[(r, c)] == 0.0))
    }
}

pub fn erlang(spec: ErlangSpec) -> PhaseType {
    let p = spec.shape;
    let rate = spec.phase_rate();
    let mut generator = DMatrix::zeros(p, p);
    for l in 0..p {
        generator[(l, l)] = -rate;
        if l + 1 < p {
            generator[(l, l + 1)] = rate;
        }
    }
    PhaseType::from_generator(generator).expect("Erlang generator is a valid phase-type generator")
}

/// Law of `min(Y, X)` for `Y ~ y` and an independent `X ~ Exp(delta)`:
/// same initial law, generator `Π - δ I`.
pub fn min_with_exponential(y: &PhaseType, delta: f64) -> PhaseType {
    assert!(delta > 0.0, "exponential rate must be positive, got {delta}");
    let p = y.phases();
    let generator = &y.generator - DMatrix::identity(p, p) * delta;
    PhaseType {
        initial: y.initial.clone(),
        generator,
    }
}

/// `F(t) = 1 - φ exp(tΠ) 𝟙`.
pub fn cdf(d: &PhaseType, t: f64) -> f64 {
    assert!(t >= 0.0, "cdf evaluated at negative time {t}");
    if t == 0.0 {
        return 0.0;
    }
    let e = expm(&(&d.generator * t));
    let survival = (d.initial.transpose() * e).sum();
    (1.0 - survival).clamp(0.0, 1.0)
}

/// `w = -Π 𝟙`.
pub fn exit_rates(d: &PhaseType) -> DVector<f64> {
    -d.generator.column_sum()
}

/// Draws an absorption time by running the chain until it leaves the
/// transient phases.
pub fn sample<R: Rng + ?Sized>(d: &PhaseType, rng: &mut R) -> f64 {
    let p = d.phases();
    let mut phase = pick(d.initial.iter().copied(), 1.0, rng).unwrap_or(0);
    let mut elapsed = 0.0;
    loop {
        let out_rate = -d.generator[(phase, phase)];
        let hold: f64 = Exp1.sample(rng);
        elapsed += hold / out_rate;
        let moves = (0..p).map(|m| if m == phase { 0.0 } else { d.generator[(phase, m)] });
        let u = rng.random::<f64>() * out_rate;
        let mut acc = 0.0;
        let mut next = None;
        for (m, rate) in moves.enumerate() {
            acc += rate;
            if u < acc {
                next = Some(m);
                break;
            }
        }
        match next {
            Some(m) => phase = m,
            None => return elapsed,
        }
    }
}

fn pick<R: Rng + ?Sized>(weights: impl Iterator<Item = f64>, total: f64, rng: &mut R) -> Option<usize> {
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last = Some(i);
        }
        acc += w;
        if u < acc {
            return Some(i);
        }
    }
    last
}
