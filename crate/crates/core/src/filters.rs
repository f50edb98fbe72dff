//! First-order filter cascade that turns plant trajectories into the static
//! regression `G = N theta + W` without differentiating the state.
//!
//! All filters share one bandwidth k and start from zero state. The unfiltered
//! drift integral G1 is reconstructed from x by parts, so no derivative of x
//! is ever formed; G2 absorbs the known input contribution.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Bandwidth and dimensions of the cascade.
#[derive(Debug, Clone, Copy)]
pub struct FilterBank {
    k: f64,
    n: usize,
}

impl FilterBank {
    pub fn new(k: f64, n: usize) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidInput(format!("filter bandwidth must be positive, got {k}")));
        }
        if n == 0 {
            return Err(Error::InvalidInput("state dimension must be positive".into()));
        }
        Ok(Self { k, n })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// N' = -k N + Phi(x); N is n x n^2.
    pub fn n_dot(&self, n_filt: &DMatrix<f64>, phi: &DMatrix<f64>) -> DMatrix<f64> {
        phi - n_filt * self.k
    }

    /// h' = -k h + x; used by the by-parts reconstruction of G1.
    pub fn h_dot(&self, h: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        x - h * self.k
    }

    /// G2' = -k G2 + B u.
    pub fn g2_dot(&self, g2: &DVector<f64>, bu: &DVector<f64>) -> DVector<f64> {
        bu - g2 * self.k
    }

    /// Filtered state derivative, reconstructed without differentiating x:
    /// G1(t) = x(t) - e^{-kt} x(0) - k h(t).
    pub fn g1(&self, t: f64, x: &DVector<f64>, x0: &DVector<f64>, h: &DVector<f64>) -> DVector<f64> {
        x - x0 * (-self.k * t).exp() - h * self.k
    }

    /// M' = -k M + N^T N; M is n^2 x n^2, symmetric along trajectories.
    pub fn m_dot(&self, m: &DMatrix<f64>, n_filt: &DMatrix<f64>) -> DMatrix<f64> {
        n_filt.transpose() * n_filt - m * self.k
    }

    /// H' = -k H + N^T G.
    pub fn h_vec_dot(&self, h_vec: &DVector<f64>, n_filt: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
        n_filt.transpose() * g - h_vec * self.k
    }

    /// Envelope for the filtered-disturbance residual in the G equation:
    /// |W(t)| <= (d_bar / k)(1 - e^{-kt}).
    pub fn w_envelope(&self, t: f64, d_bar: f64) -> f64 {
        d_bar / self.k * (1.0 - (-self.k * t).exp())
    }

    /// Derivative of the residual envelope for the H equation, tracked as a
    /// scalar filter driven by |N| times the G-residual envelope.
    pub fn w1_bound_dot(&self, w1: f64, n_filt: &DMatrix<f64>, t: f64, d_bar: f64) -> f64 {
        crate::linalg::spectral_norm(n_filt) * self.w_envelope(t, d_bar) - self.k * w1
    }
}
