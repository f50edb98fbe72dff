//! Fixed-time parameter estimator driven by the filtered regression pair
//! (G, H), plus its settling-time certificate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Elementwise signed power: sign(v_i) |v_i|^a. Preserves zero entries.
pub fn signed_power(v: &DVector<f64>, a: f64) -> DVector<f64> {
    v.map(|x| x.signum() * x.abs().powf(a))
}

/// Which update law drives the parameter estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorMode {
    /// Signed-power law with exponents 1 -+ alpha; fixed-time convergent.
    #[default]
    Fxt,
    /// Plain gradient law (both exponents one); exponential convergence only.
    Baseline,
    /// Estimate frozen at its initial value.
    Off,
}

impl std::fmt::Display for EstimatorMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EstimatorMode::Fxt => write!(f, "fxt"),
            EstimatorMode::Baseline => write!(f, "baseline"),
            EstimatorMode::Off => write!(f, "off"),
        }
    }
}

/// Gains of the update law.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EstimatorGains {
    /// Weight on the instantaneous residual G - N theta_hat.
    pub kappa: f64,
    /// Weight on the averaged residual H - M theta_hat.
    pub gamma: f64,
    /// Homogeneity exponent; the law uses powers 1 - alpha and 1 + alpha.
    pub alpha: f64,
}

impl EstimatorGains {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) || !(self.gamma > 0.0) {
            return Err(Error::InvalidInput("estimator gains must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!(
                "estimator exponent must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Residuals of the two regression equations at the current estimate.
pub fn residuals(
    n_filt: &DMatrix<f64>,
    m: &DMatrix<f64>,
    g: &DVector<f64>,
    h: &DVector<f64>,
    theta_hat: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    (g - n_filt * theta_hat, h - m * theta_hat)
}

/// Time derivative of the parameter estimate under the selected law.
pub fn update(
    gains: &EstimatorGains,
    mode: EstimatorMode,
    n_filt: &DMatrix<f64>,
    m: &DMatrix<f64>,
    g: &DVector<f64>,
    h: &DVector<f64>,
    theta_hat: &DVector<f64>,
) -> DVector<f64> {
    if mode == EstimatorMode::Off {
        return DVector::zeros(theta_hat.len());
    }
    let (res_g, res_h) = residuals(n_filt, m, g, h, theta_hat);
    match mode {
        EstimatorMode::Fxt => {
            let a = gains.alpha;
            let drive_g = signed_power(&res_g, 1.0 - a) + signed_power(&res_g, 1.0 + a);
            let drive_h = signed_power(&res_h, 1.0 - a) + signed_power(&res_h, 1.0 + a);
            n_filt.transpose() * drive_g * gains.kappa + m.transpose() * drive_h * gains.gamma
        }
        EstimatorMode::Baseline => {
            // Both exponents collapse to one; factor 2 keeps the laws
            // comparable at unit residual.
            n_filt.transpose() * res_g * (2.0 * gains.kappa)
                + m.transpose() * res_h * (2.0 * gains.gamma)
        }
        EstimatorMode::Off => unreachable!(),
    }
}

/// Settling-time certificate for the fixed-time law.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SettlingBound {
    /// Auxiliary constant from the convergence analysis; must be positive.
    pub p: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    /// Upper bound on the estimate's convergence time, counted from zero.
    pub t_max: f64,
}

/// Auxiliary shape constants of the settling analysis; both live in (0, 1).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ShapeConstants {
    pub c: f64,
    pub z: f64,
}

impl Default for ShapeConstants {
    fn default() -> Self {
        ShapeConstants { c: 0.8, z: 0.6 }
    }
}

/// Computes the settling-time bound from the excitation level `mu`, the
/// estimator gains, the parameter count `n_params = n^2`, and the excitation
/// window parameters (q windows of length t_window).
///
/// The bound is conservative: it certifies convergence of the estimate by
/// `t_max` provided the excitation floor `mu` holds after the detection
/// window. Fails when the shape constants make the auxiliary constant `p`
/// nonpositive, or when there is no excitation to certify against.
pub fn settling_bound(
    gains: &EstimatorGains,
    shape: &ShapeConstants,
    mu: f64,
    state_dim: usize,
    q: u32,
    t_window: f64,
) -> Result<SettlingBound> {
    gains.validate()?;
    let a = gains.alpha;
    if !(shape.c > 0.0 && shape.c < 1.0 && shape.z > 0.0 && shape.z < 1.0) {
        return Err(Error::InvalidInput(
            "shape constants must lie in (0, 1)".into(),
        ));
    }
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::Infeasible(format!(
            "settling bound needs a positive excitation floor, got {mu}"
        )));
    }
    if q == 0 || !(t_window > 0.0) {
        return Err(Error::InvalidInput("excitation window must be positive".into()));
    }

    let p = 1.0 - shape.c.powf(2.0 + a) * (1.0 + a) / (2.0 + a)
        - shape.z.powf((2.0 + a) / (1.0 + a)) * (1.0 + a).powi(2) / (2.0 + a);
    if !(p > 0.0) {
        return Err(Error::Infeasible(format!(
            "auxiliary constant p = {p:.6} is not positive; pick smaller shape constants"
        )));
    }

    let kappa1 = 2f64.powf((2.0 - a) / 2.0) * mu.powf(2.0 - a) * gains.gamma * (1.0 - a) / (2.0 - a);
    let kappa2 = 2f64.powf((2.0 + a) / 2.0)
        * mu.powf(2.0 + a)
        * p
        * gains.gamma
        * ((state_dim + 1) as f64).powf(-a / (2.0 * (2.0 + a)));
    let t_max = (2.0 / a) * (1.0 / kappa1 + 1.0 / kappa2) + q as f64 * t_window;
    Ok(SettlingBound { p, kappa1, kappa2, t_max })
}
