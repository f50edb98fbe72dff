//! The two-phase control law: adaptive startup gain while the estimator
//! converges, then certainty-equivalence feedback plus the homogeneous
//! error term, with the associated Lyapunov function and disturbance margin.

use nalgebra::{DMatrix, DVector};

use crate::homogeneity::{Dilation, HomogeneousNorm};
use crate::{linalg, Error, Result};

/// Certainty-equivalence gain: `K_x = B_pinv (A_m - A_hat)` with the
/// left pseudo-inverse `B_pinv = (B^T B)^{-1} B^T`. Returns a 1 x n row.
pub fn gain_from_estimate(
    a_hat: &DMatrix<f64>,
    a_m: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let n = a_m.nrows();
    if a_hat.nrows() != n || a_hat.ncols() != n || b.len() != n {
        return Err(Error::InvalidInput("gain reconstruction dimension mismatch".into()));
    }
    let btb = b.dot(b);
    if btb < 1e-12 {
        return Err(Error::InvalidInput("input vector is numerically zero".into()));
    }
    let b_pinv = DMatrix::from_row_slice(1, n, b.as_slice()) / btb;
    Ok(b_pinv * (a_m - a_hat))
}

/// Orientation of the error-driven term in the startup adaptation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdaptSign {
    #[default]
    /// The Lyapunov-stabilizing orientation; the default.
    Classical,
    /// The orientation as published; destabilizing for the worked example
    /// and kept selectable for reproducing that behavior.
    Published,
}

/// Startup phase: `u = K_d^T x + r` with the leaky gradient adaptation
/// `K_d' = -sign Gamma_d x (e^T P1 B) - Gamma_d sigma K_d`.
#[derive(Debug, Clone)]
pub struct DirectLaw {
    p1: DMatrix<f64>,
    gamma_d: DMatrix<f64>,
    sigma: f64,
    sign: AdaptSign,
}

impl DirectLaw {
    pub fn new(
        p1: DMatrix<f64>,
        gamma_d: DMatrix<f64>,
        sigma: f64,
        sign: AdaptSign,
    ) -> Result<Self> {
        let n = p1.nrows();
        if p1.ncols() != n || gamma_d.nrows() != n || gamma_d.ncols() != n {
            return Err(Error::InvalidInput("startup law dimension mismatch".into()));
        }
        if (&p1 - &p1.transpose()).norm() > 1e-9 * p1.norm().max(1.0)
            || linalg::lambda_min_sym(&p1) <= 0.0
        {
            return Err(Error::InvalidInput(
                "startup Lyapunov matrix must be symmetric positive definite".into(),
            ));
        }
        if !(sigma >= 0.0) {
            return Err(Error::InvalidInput("leakage must be nonnegative".into()));
        }
        Ok(Self { p1, gamma_d, sigma, sign })
    }

    pub fn input(&self, kd: &DVector<f64>, x: &DVector<f64>, r: f64) -> f64 {
        kd.dot(x) + r
    }

    pub fn kd_dot(
        &self,
        kd: &DVector<f64>,
        x: &DVector<f64>,
        e: &DVector<f64>,
        b: &DVector<f64>,
    ) -> DVector<f64> {
        let scalar = (&self.p1 * b).dot(e);
        let drive = match self.sign {
            AdaptSign::Classical => -1.0,
            AdaptSign::Published => 1.0,
        };
        &self.gamma_d * x * (drive * scalar) - &self.gamma_d * kd * self.sigma
    }
}

/// Indirect-phase feedback pieces beyond the certainty-equivalence gain:
/// `u_e = K0 e + phi(e)^{nu+eps} K D(-ln phi(e)) e`, the associated
/// Lyapunov function V, and the disturbance-margin diagnostic.
#[derive(Debug, Clone)]
pub struct HomogeneousLaw {
    k0: DMatrix<f64>,
    k: DMatrix<f64>,
    p: DMatrix<f64>,
    norm: HomogeneousNorm,
    dilation: Dilation,
    nu: f64,
    eps: f64,
    psi: f64,
    zeta: f64,
    eta: f64,
    w_norm: f64,
}

impl HomogeneousLaw {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        k0: DMatrix<f64>,
        k: DMatrix<f64>,
        x: &DMatrix<f64>,
        g_d: DMatrix<f64>,
        norm: HomogeneousNorm,
        nu: f64,
        eps: f64,
        psi: f64,
        zeta: f64,
        eta: f64,
    ) -> Result<Self> {
        let n = x.nrows();
        if k0.nrows() != 1 || k0.ncols() != n || k.nrows() != 1 || k.ncols() != n {
            return Err(Error::InvalidInput("feedback gains must be 1 x n".into()));
        }
        if norm.n() != n || g_d.nrows() != n {
            return Err(Error::InvalidInput("norm and generator must match the state size".into()));
        }
        if !(nu > 0.0 && eps > 0.0) {
            return Err(Error::InvalidInput("homogeneity degrees must be positive".into()));
        }
        if !(psi > 0.0 && psi < 1.0) || !(zeta > 0.0) || !(eta > 0.0) {
            return Err(Error::InvalidInput("margin constants out of range".into()));
        }
        let p = linalg::invert(x)?;
        if linalg::lambda_min_sym(&p) <= 0.0 {
            return Err(Error::InvalidInput("certificate matrix must be positive definite".into()));
        }
        let id = DMatrix::<f64>::identity(n, n);
        let w_norm = linalg::spectral_norm(&(&id * 0.5 - &g_d));
        let dilation = Dilation::new(g_d)?;
        Ok(Self { k0, k, p, norm, dilation, nu, eps, psi, zeta, eta, w_norm })
    }

    pub fn norm(&self) -> &HomogeneousNorm {
        &self.norm
    }

    pub fn dilation(&self) -> &Dilation {
        &self.dilation
    }

    /// phi and the level-set projection z = D(-ln phi) e for nonzero e.
    fn level(&self, e: &DVector<f64>) -> Result<Option<(f64, DVector<f64>)>> {
        let phi = self.norm.phi(e)?;
        if phi == 0.0 {
            return Ok(None);
        }
        let z = self.dilation.apply(-phi.ln(), e);
        Ok(Some((phi, z)))
    }

    /// Error feedback `K0 e + phi^{nu+eps} K D(-ln phi) e`; zero at e = 0.
    pub fn feedback(&self, e: &DVector<f64>) -> Result<f64> {
        match self.level(e)? {
            None => Ok(0.0),
            Some((phi, z)) => {
                let linear = (&self.k0 * e)[(0, 0)];
                let scaled = (&self.k * &z)[(0, 0)];
                Ok(linear + phi.powf(self.nu + self.eps) * scaled)
            }
        }
    }

    /// Lyapunov function `V(e) = (D(-ln phi) e)^T P (D(-ln phi) e) phi`.
    pub fn v(&self, e: &DVector<f64>) -> Result<f64> {
        match self.level(e)? {
            None => Ok(0.0),
            Some((phi, z)) => Ok((&self.p * &z).dot(&z) * phi),
        }
    }

    /// Disturbance-margin diagnostic: the admissible scaled disturbance
    /// `psi zeta eta phi^{2 nu} |X^{-1/2} z|^2 / (2 (1 + |I/2 - G_d|))`
    /// minus the actual `|D(-ln phi) d|`. Positive means the disturbance
    /// respects the design margin at this error. At e = 0 the expression
    /// degenerates: zero for a vanishing disturbance, negative infinity
    /// otherwise (logged, never enforced).
    pub fn c4_margin(&self, e: &DVector<f64>, d: &DVector<f64>) -> Result<f64> {
        match self.level(e)? {
            None => {
                if d.norm() == 0.0 {
                    Ok(0.0)
                } else {
                    Ok(f64::NEG_INFINITY)
                }
            }
            Some((phi, z)) => {
                // z^T P z = |X^{-1/2} z|^2.
                let zpz = (&self.p * &z).dot(&z);
                let admissible = self.psi * self.zeta * self.eta * phi.powf(2.0 * self.nu) * zpz
                    / (2.0 * (1.0 + self.w_norm));
                let actual = self.dilation.apply(-phi.ln(), d).norm();
                Ok(admissible - actual)
            }
        }
    }
}

/// Which control law is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Direct,
    Indirect,
}

/// Both laws plus the switching time.
#[derive(Debug, Clone)]
pub struct TwoPhase {
    pub direct: DirectLaw,
    pub hom: HomogeneousLaw,
    pub t_switch: f64,
}

impl TwoPhase {
    pub fn phase(&self, t: f64) -> Phase {
        if t <= self.t_switch {
            Phase::Direct
        } else {
            Phase::Indirect
        }
    }

    /// Control input given the current phase ingredients; `kx` is the
    /// certainty-equivalence gain reconstructed from the estimate.
    pub fn input(
        &self,
        t: f64,
        x: &DVector<f64>,
        e: &DVector<f64>,
        r: f64,
        kd: &DVector<f64>,
        kx: &DMatrix<f64>,
    ) -> Result<f64> {
        match self.phase(t) {
            Phase::Direct => Ok(self.direct.input(kd, x, r)),
            Phase::Indirect => {
                let ce = (kx * x)[(0, 0)];
                Ok(ce + r + self.hom.feedback(e)?)
            }
        }
    }
}
