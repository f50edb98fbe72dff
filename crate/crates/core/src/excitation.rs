//! Online excitation monitoring: the regressor Gram integral, detection of
//! the richness threshold, and the excitation floor fed to the settling bound.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{linalg, Error, Result};

/// Accumulates `gram += Phi^T Phi dt` (left-endpoint rule). The simulator
/// integrates the same quantity inside its own stepper; this helper exists
/// for standalone analyses of recorded regressor samples.
pub fn accumulate_gram(gram: &mut DMatrix<f64>, phi: &DMatrix<f64>, dt: f64) {
    *gram += phi.transpose() * phi * dt;
}

/// Excitation floor transferred through `q` filter windows of length
/// `t_window`: gamma scaled by the accumulated filter decay.
pub fn mu_floor(gamma: f64, k: f64, t_window: f64, q: u32) -> f64 {
    (1..=q).map(|j| gamma * (-(j as f64) * k * t_window).exp()).sum()
}

/// Snapshot of the excitation state, produced by [`Monitor::report`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub gamma_target: f64,
    pub q: u32,
    pub t_window: f64,
    /// First time the Gram integral's smallest eigenvalue reaches the target;
    /// `None` when the trajectory never got rich enough.
    pub t_detect: Option<f64>,
    /// Nominal floor implied by the target and the filter decay. Diagnostic:
    /// the filtered matrix M does not honor it early in the run, so the
    /// certified quantity is `floor_observed`.
    pub mu_nominal: f64,
    /// Smallest lambda_min(M) observed at sample times past
    /// t_detect + t_window; the excitation level that actually held.
    pub floor_observed: Option<f64>,
    /// Latest sampled values, for reporting.
    pub lambda_min_gram: f64,
    pub lambda_min_m: f64,
    pub rank_m: usize,
}

/// Watches the Gram integral and the filtered matrix M along a trajectory.
#[derive(Debug, Clone)]
pub struct Monitor {
    gamma_target: f64,
    q: u32,
    t_window: f64,
    k: f64,
    t_detect: Option<f64>,
    floor_observed: Option<f64>,
    lambda_min_gram: f64,
    lambda_min_m: f64,
    rank_m: usize,
}

impl Monitor {
    pub fn new(gamma_target: f64, q: u32, t_window: f64, k: f64) -> Result<Self> {
        if !(gamma_target > 0.0) {
            return Err(Error::InvalidInput("excitation target must be positive".into()));
        }
        if q == 0 {
            return Err(Error::InvalidInput("window count must be at least one".into()));
        }
        if !(t_window > 0.0) || !(k > 0.0) {
            return Err(Error::InvalidInput("window length and bandwidth must be positive".into()));
        }
        Ok(Self {
            gamma_target,
            q,
            t_window,
            k,
            t_detect: None,
            floor_observed: None,
            lambda_min_gram: 0.0,
            lambda_min_m: 0.0,
            rank_m: 0,
        })
    }

    /// Feeds one sample of the Gram integral and M at time `t`. Samples must
    /// arrive in time order; detection latches on the first crossing (the
    /// Gram integral is monotone, so the crossing is unambiguous).
    pub fn observe(&mut self, t: f64, gram: &DMatrix<f64>, m: &DMatrix<f64>) {
        self.lambda_min_gram = linalg::lambda_min_sym(gram);
        self.lambda_min_m = linalg::lambda_min_sym(m);
        self.rank_m = linalg::rank(m, 1e-10);
        if self.t_detect.is_none() && self.lambda_min_gram >= self.gamma_target {
            self.t_detect = Some(t);
        }
        if let Some(td) = self.t_detect {
            if t >= td + self.t_window {
                self.floor_observed = Some(match self.floor_observed {
                    Some(f) => f.min(self.lambda_min_m),
                    None => self.lambda_min_m,
                });
            }
        }
    }

    pub fn t_detect(&self) -> Option<f64> {
        self.t_detect
    }

    /// Excitation floor to certify against: the observed floor when the run
    /// produced one, otherwise nothing.
    pub fn certified_floor(&self) -> Option<f64> {
        self.floor_observed
    }

    pub fn mu_nominal(&self) -> f64 {
        mu_floor(self.gamma_target, self.k, self.t_window, self.q)
    }

    pub fn report(&self) -> Report {
        Report {
            gamma_target: self.gamma_target,
            q: self.q,
            t_window: self.t_window,
            t_detect: self.t_detect,
            mu_nominal: self.mu_nominal(),
            floor_observed: self.floor_observed,
            lambda_min_gram: self.lambda_min_gram,
            lambda_min_m: self.lambda_min_m,
            rank_m: self.rank_m,
        }
    }
}
