//! Plant and reference models, the parameter regressor, and the structured
//! reference / disturbance signal generators.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{linalg, Error, Result};

/// Stacked unknown-parameter vector: rows of the state matrix, concatenated.
pub type ParamVector = DVector<f64>;

/// Single-input LTI plant `x' = A x + B u + d(t)` with A unknown to the
/// controller but available here as ground truth for simulation.
#[derive(Debug, Clone)]
pub struct Plant {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl Plant {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::InvalidInput("plant A must be square and nonempty".into()));
        }
        if b.len() != n {
            return Err(Error::InvalidInput(format!(
                "plant B must have {n} rows, got {}",
                b.len()
            )));
        }
        if !a.iter().all(|v| v.is_finite()) || !b.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("plant matrices must be finite".into()));
        }
        Ok(Self { a, b })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// True parameter vector the estimator is trying to recover.
    pub fn theta(&self) -> ParamVector {
        stack_rows(&self.a)
    }

    pub fn derivative(&self, x: &DVector<f64>, u: f64, d: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u + d
    }

    /// Rank of the controllability matrix [B, AB, ..., A^{n-1}B].
    pub fn controllability_rank(&self) -> usize {
        let n = self.n();
        let mut cols = DMatrix::zeros(n, n);
        let mut col = self.b.clone();
        for j in 0..n {
            cols.set_column(j, &col);
            col = &self.a * &col;
        }
        linalg::rank(&cols, 1e-10)
    }
}

/// Reference model `x_m' = A_m x_m + B r(t)`; A_m must be Hurwitz.
#[derive(Debug, Clone)]
pub struct ReferenceModel {
    a_m: DMatrix<f64>,
    b: DVector<f64>,
}

impl ReferenceModel {
    pub fn new(a_m: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let n = a_m.nrows();
        if n == 0 || a_m.ncols() != n || b.len() != n {
            return Err(Error::InvalidInput("reference model dimensions mismatch".into()));
        }
        if !linalg::is_hurwitz(&a_m, 1e-9) {
            return Err(Error::InvalidInput(
                "reference model matrix must be Hurwitz".into(),
            ));
        }
        Ok(Self { a_m, b })
    }

    pub fn n(&self) -> usize {
        self.a_m.nrows()
    }

    pub fn a_m(&self) -> &DMatrix<f64> {
        &self.a_m
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn derivative(&self, xm: &DVector<f64>, r: f64) -> DVector<f64> {
        &self.a_m * xm + &self.b * r
    }
}

/// Regressor mapping the stacked parameters to the drift term:
/// `Phi(x) theta = A x` when `theta` stacks the rows of A.
pub fn regressor(x: &DVector<f64>) -> DMatrix<f64> {
    let n = x.len();
    let mut phi = DMatrix::zeros(n, n * n);
    for i in 0..n {
        for j in 0..n {
            phi[(i, i * n + j)] = x[j];
        }
    }
    phi
}

/// Stacks the rows of a square matrix into one vector.
pub fn stack_rows(a: &DMatrix<f64>) -> ParamVector {
    let n = a.nrows();
    let mut v = DVector::zeros(n * n);
    for i in 0..n {
        for j in 0..n {
            v[i * n + j] = a[(i, j)];
        }
    }
    v
}

/// Inverse of [`stack_rows`].
pub fn unstack_rows(theta: &ParamVector, n: usize) -> Result<DMatrix<f64>> {
    if theta.len() != n * n {
        return Err(Error::InvalidInput(format!(
            "parameter vector has {} entries, expected {}",
            theta.len(),
            n * n
        )));
    }
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = theta[i * n + j];
        }
    }
    Ok(a)
}

/// One sinusoidal term `amplitude * sin(omega t + phase)` gated on at `t_on`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub t_on: f64,
}

/// One signal channel: constant offset plus gated sinusoids.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Channel {
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub sinusoids: Vec<Sinusoid>,
}

impl Channel {
    pub fn eval(&self, t: f64) -> f64 {
        let mut v = self.offset;
        for s in &self.sinusoids {
            if t >= s.t_on {
                v += s.amplitude * (s.omega * t + s.phase).sin();
            }
        }
        v
    }

    /// Worst-case magnitude: |offset| plus the amplitude sum.
    pub fn amplitude_bound(&self) -> f64 {
        self.offset.abs() + self.sinusoids.iter().map(|s| s.amplitude.abs()).sum::<f64>()
    }
}

/// Vector-valued signal built from independent channels.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Signal {
    pub channels: Vec<Channel>,
}

impl Signal {
    pub fn constant(values: &[f64]) -> Self {
        Signal {
            channels: values
                .iter()
                .map(|v| Channel {
                    offset: *v,
                    sinusoids: vec![],
                })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.channels.len()
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        DVector::from_iterator(self.channels.len(), self.channels.iter().map(|c| c.eval(t)))
    }

    /// First channel only; the scalar reference convention.
    pub fn eval_scalar(&self, t: f64) -> f64 {
        self.channels.first().map_or(0.0, |c| c.eval(t))
    }

    /// Euclidean norm of the per-channel worst-case magnitudes. Upper bound
    /// for the signal norm at any time.
    pub fn euclidean_bound(&self) -> f64 {
        self.channels
            .iter()
            .map(|c| c.amplitude_bound().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.channels
            .iter()
            .all(|c| c.offset == 0.0 && c.sinusoids.iter().all(|s| s.amplitude == 0.0))
    }
}
