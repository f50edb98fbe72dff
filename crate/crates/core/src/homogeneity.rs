//! Generalized dilations and homogeneous norms: the geometry behind the
//! fixed-time error feedback.
//!
//! A dilation is the flow `D(tau) = exp(G_d tau)` of an anti-Hurwitz
//! generator. A homogeneous norm `phi` satisfies `phi(D(tau) e) = e^tau
//! phi(e)`; it comes in an explicit weighted-power form for diagonal
//! dilations and a canonical implicit form (solving `|D(-tau) e|_P = 1`
//! for tau) for general ones.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{linalg, Error, Result};

/// One-parameter dilation group generated by an anti-Hurwitz matrix,
/// together with a weight matrix P that makes the group monotone:
/// `G_d^T P + P G_d` positive definite.
#[derive(Debug, Clone)]
pub struct Dilation {
    gen: DMatrix<f64>,
    p: DMatrix<f64>,
}

impl Dilation {
    /// Builds the dilation and derives P from `G_d^T P + P G_d = 2 I`.
    pub fn new(generator: DMatrix<f64>) -> Result<Self> {
        Self::check_generator(&generator)?;
        let neg = -&generator;
        let q = DMatrix::identity(generator.nrows(), generator.nrows()) * 2.0;
        let p = linalg::solve_lyapunov(&neg, &q)?;
        Self::with_p(generator, p)
    }

    /// Uses a caller-supplied weight matrix; P must be symmetric positive
    /// definite and `G_d^T P + P G_d` must be positive definite.
    pub fn with_p(generator: DMatrix<f64>, p: DMatrix<f64>) -> Result<Self> {
        Self::check_generator(&generator)?;
        let n = generator.nrows();
        if p.nrows() != n || p.ncols() != n {
            return Err(Error::InvalidInput("dilation weight matrix has wrong size".into()));
        }
        if (&p - &p.transpose()).norm() > 1e-9 * p.norm().max(1.0) {
            return Err(Error::InvalidInput("dilation weight matrix must be symmetric".into()));
        }
        if linalg::lambda_min_sym(&p) <= 0.0 {
            return Err(Error::InvalidInput(
                "dilation weight matrix must be positive definite".into(),
            ));
        }
        let mono = generator.transpose() * &p + &p * &generator;
        if linalg::lambda_min_sym(&mono) <= 0.0 {
            return Err(Error::InvalidInput(
                "generator is not monotone under the supplied weight matrix".into(),
            ));
        }
        Ok(Self { gen: generator, p })
    }

    /// Diagonal dilation with positive weights; P = diag(1/w) keeps the
    /// monotonicity identity exact.
    pub fn diagonal(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() || !weights.iter().all(|w| *w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidInput("dilation weights must be positive".into()));
        }
        let n = weights.len();
        let gen = DMatrix::from_fn(n, n, |i, j| if i == j { weights[i] } else { 0.0 });
        let p = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 / weights[i] } else { 0.0 });
        Self::with_p(gen, p)
    }

    fn check_generator(g: &DMatrix<f64>) -> Result<()> {
        if g.nrows() == 0 || g.nrows() != g.ncols() {
            return Err(Error::InvalidInput("dilation generator must be square".into()));
        }
        if !g.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("dilation generator must be finite".into()));
        }
        if !linalg::is_anti_hurwitz(g, 1e-9) {
            return Err(Error::InvalidInput(
                "dilation generator must be anti-Hurwitz (all eigenvalues in the right half plane)"
                    .into(),
            ));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.gen.nrows()
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.gen
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// D(tau) = exp(G_d tau).
    pub fn matrix(&self, tau: f64) -> DMatrix<f64> {
        linalg::expm(&(&self.gen * tau))
    }

    pub fn apply(&self, tau: f64, v: &DVector<f64>) -> DVector<f64> {
        self.matrix(tau) * v
    }

    /// Weighted norm |v|_P = sqrt(v^T P v).
    pub fn p_norm(&self, v: &DVector<f64>) -> f64 {
        (&self.p * v).dot(v).max(0.0).sqrt()
    }

    /// Growth constants (kappa1, kappa2), 0 < kappa1 <= kappa2, with
    /// e^{kappa1 tau} <= |D(tau) v|_P / |v|_P <= e^{kappa2 tau} for tau >= 0
    /// (inequalities reversed for tau <= 0).
    pub fn monotonicity_constants(&self) -> Result<(f64, f64)> {
        let ps = linalg::sqrtm_spd(&self.p)?;
        let psi = linalg::inv_sqrtm_spd(&self.p)?;
        let m = &ps * &self.gen * &psi;
        let sym = &m + &m.transpose();
        let (lo, hi) = linalg::sym_eig_range(&sym);
        Ok((0.5 * lo, 0.5 * hi))
    }
}

/// Homogeneous norm of degree one with respect to a dilation.
#[derive(Debug, Clone)]
pub enum HomogeneousNorm {
    /// `phi(e) = (sum |e_i|^{rho / w_i})^{1 / rho}` for a diagonal dilation
    /// with weights w. Closed form, cheap gradient.
    Explicit { rho: f64, weights: Vec<f64> },
    /// `phi(e) = e^tau` where tau solves `|D(-tau) e|_P = 1`. Works for any
    /// monotone dilation; evaluated by bracketing and bisection.
    Canonical { dilation: Dilation },
}

impl HomogeneousNorm {
    /// Standard weight ladder for an n-state error with homogeneity degree
    /// `nu`: w_i = 1 + (i - n) nu for i = 1..n, so the last weight is one.
    pub fn standard_weights(n: usize, nu: f64) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::InvalidInput("weight ladder needs n >= 1".into()));
        }
        let w: Vec<f64> = (1..=n).map(|i| 1.0 + (i as f64 - n as f64) * nu).collect();
        if w.iter().any(|v| *v <= 0.0) {
            return Err(Error::InvalidInput(format!(
                "degree {nu} makes a weight nonpositive for n = {n}; need nu < 1/(n-1)"
            )));
        }
        Ok(w)
    }

    pub fn explicit(rho: f64, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || !weights.iter().all(|w| *w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidInput("norm weights must be positive".into()));
        }
        let w_max = weights.iter().cloned().fold(0.0_f64, f64::max);
        if !(rho >= w_max) || !rho.is_finite() {
            // Keeps every power rho/w_i at least one, so the gradient stays
            // bounded near the axes.
            return Err(Error::InvalidInput(format!(
                "norm power {rho} must be at least the largest weight {w_max}"
            )));
        }
        Ok(HomogeneousNorm::Explicit { rho, weights })
    }

    pub fn canonical(dilation: Dilation) -> Self {
        HomogeneousNorm::Canonical { dilation }
    }

    pub fn n(&self) -> usize {
        match self {
            HomogeneousNorm::Explicit { weights, .. } => weights.len(),
            HomogeneousNorm::Canonical { dilation } => dilation.n(),
        }
    }

    /// The dilation this norm is homogeneous under.
    pub fn dilation(&self) -> Result<Dilation> {
        match self {
            HomogeneousNorm::Explicit { weights, .. } => Dilation::diagonal(weights),
            HomogeneousNorm::Canonical { dilation } => Ok(dilation.clone()),
        }
    }

    fn check_input(&self, e: &DVector<f64>) -> Result<()> {
        if e.len() != self.n() {
            return Err(Error::InvalidInput(format!(
                "norm input has {} entries, expected {}",
                e.len(),
                self.n()
            )));
        }
        if !e.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("norm input must be finite".into()));
        }
        Ok(())
    }

    /// Evaluates the norm; zero exactly at the origin.
    pub fn phi(&self, e: &DVector<f64>) -> Result<f64> {
        self.check_input(e)?;
        if e.iter().all(|v| *v == 0.0) {
            return Ok(0.0);
        }
        match self {
            HomogeneousNorm::Explicit { rho, weights } => {
                let s: f64 = e
                    .iter()
                    .zip(weights)
                    .map(|(ei, wi)| ei.abs().powf(rho / wi))
                    .sum();
                Ok(s.powf(1.0 / rho))
            }
            HomogeneousNorm::Canonical { dilation } => {
                let tau = solve_level_parameter(dilation, e)?;
                Ok(tau.exp())
            }
        }
    }

    /// Gradient of the norm; undefined at the origin.
    pub fn gradient(&self, e: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_input(e)?;
        if e.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidInput("homogeneous norm gradient is undefined at the origin".into()));
        }
        match self {
            HomogeneousNorm::Explicit { rho, weights } => {
                let s: f64 = e
                    .iter()
                    .zip(weights)
                    .map(|(ei, wi)| ei.abs().powf(rho / wi))
                    .sum();
                let outer = s.powf(1.0 / rho - 1.0);
                let grad = DVector::from_iterator(
                    e.len(),
                    e.iter().zip(weights).map(|(ei, wi)| {
                        if *ei == 0.0 {
                            0.0
                        } else {
                            outer * ei.signum() * ei.abs().powf(rho / wi - 1.0) / wi
                        }
                    }),
                );
                Ok(grad)
            }
            HomogeneousNorm::Canonical { dilation } => {
                // Implicit differentiation of |D(-tau) e|_P = 1 at tau = ln phi:
                // grad = 2 phi D(-tau)^T P z / (z^T (G^T P + P G) z), z = D(-tau) e.
                let tau = solve_level_parameter(dilation, e)?;
                let dm = dilation.matrix(-tau);
                let z = &dm * e;
                let pz = dilation.p() * &z;
                let mono = dilation.generator().transpose() * dilation.p()
                    + dilation.p() * dilation.generator();
                let denom = (&mono * &z).dot(&z);
                if denom <= 0.0 {
                    return Err(Error::Numerical("degenerate level set in norm gradient".into()));
                }
                Ok(dm.transpose() * pz * (2.0 * tau.exp() / denom))
            }
        }
    }

    /// Projects v onto the unit level set along the dilation orbit:
    /// `D(-ln phi(v)) v`. Undefined at the origin.
    pub fn scale_to_unit(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let phi = self.phi(v)?;
        if phi == 0.0 {
            return Err(Error::InvalidInput("cannot scale the origin onto the unit level set".into()));
        }
        let dil = self.dilation()?;
        Ok(dil.apply(-phi.ln(), v))
    }
}

/// Solves `|D(-tau) e|_P = 1` for tau by bracketing plus bisection. The
/// logarithm of the level map is strictly decreasing in tau with slope
/// bounded away from zero, so the root exists and is unique for e != 0.
fn solve_level_parameter(dilation: &Dilation, e: &DVector<f64>) -> Result<f64> {
    let h = |tau: f64| dilation.p_norm(&dilation.apply(-tau, e)).ln();

    // For the trivial dilation the answer is ln |e|_P; always a good start.
    let tau0 = dilation.p_norm(e).ln();
    if !tau0.is_finite() {
        return Err(Error::Numerical("level parameter start is not finite".into()));
    }

    let mut lo = tau0;
    let mut step = 1.0;
    while h(lo) < 0.0 {
        lo -= step;
        step *= 2.0;
        if step > 1e12 {
            return Err(Error::Numerical("level-set bracket failed (lower)".into()));
        }
    }
    let mut hi = tau0;
    step = 1.0;
    while h(hi) > 0.0 {
        hi += step;
        step *= 2.0;
        if step > 1e12 {
            return Err(Error::Numerical("level-set bracket failed (upper)".into()));
        }
    }

    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * (1.0 + mid.abs()) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Largest relative violation of the homogeneity identity
/// `f(D(tau) e) = e^{nu tau} D(tau) f(e)` over seeded random samples.
/// Returns the worst relative mismatch; zero means the field is exactly
/// homogeneous of degree `nu` on the sampled set.
pub fn field_degree_violation<F>(
    f: F,
    dilation: &Dilation,
    nu: f64,
    samples: usize,
    seed: u64,
) -> f64
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dilation.n();
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let e = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        if e.norm() < 1e-6 {
            continue;
        }
        let tau: f64 = rng.random_range(-1.5..1.5);
        let lhs = f(&dilation.apply(tau, &e));
        let rhs = dilation.apply(tau, &f(&e)) * (nu * tau).exp();
        let denom = rhs.norm().max(1e-9);
        worst = worst.max((lhs - rhs).norm() / denom);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn benchmark_generator() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.9, 0.0, 0.2, 0.5])
    }

    fn benchmark_explicit() -> HomogeneousNorm {
        let w = HomogeneousNorm::standard_weights(2, 0.2).unwrap();
        HomogeneousNorm::explicit(2.0, w).unwrap()
    }

    #[test]
    fn standard_weights_ladder() {
        let w = HomogeneousNorm::standard_weights(2, 0.2).unwrap();
        assert_eq!(w, vec![0.8, 1.0]);
        let w3 = HomogeneousNorm::standard_weights(3, 0.2).unwrap();
        assert!(w3.iter().zip([0.6, 0.8, 1.0]).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(HomogeneousNorm::standard_weights(3, 0.6).is_err());
    }

    #[test]
    fn explicit_norm_hand_values() {
        let norm = benchmark_explicit();
        let e = DVector::from_row_slice(&[1.0, 1.0]);
        assert_relative_eq!(norm.phi(&e).unwrap(), 2f64.sqrt(), max_relative = 1e-12);
        let e = DVector::from_row_slice(&[-8.0, 0.0]);
        // (8^{2.5})^{1/2} = 8^{1.25}
        assert_relative_eq!(norm.phi(&e).unwrap(), 8f64.powf(1.25), max_relative = 1e-12);
        assert_eq!(norm.phi(&DVector::zeros(2)).unwrap(), 0.0);
    }

    #[test]
    fn explicit_norm_is_degree_one() {
        let norm = benchmark_explicit();
        let dil = norm.dilation().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let e = DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
            let tau: f64 = rng.random_range(-2.0..2.0);
            let lhs = norm.phi(&dil.apply(tau, &e)).unwrap();
            let rhs = tau.exp() * norm.phi(&e).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
        }
    }

    #[test]
    fn canonical_reduces_to_euclidean_for_trivial_dilation() {
        let dil = Dilation::diagonal(&[1.0, 1.0]).unwrap();
        let norm = HomogeneousNorm::canonical(dil);
        let e = DVector::from_row_slice(&[3.0, -4.0]);
        assert_relative_eq!(norm.phi(&e).unwrap(), 5.0, max_relative = 1e-12);
    }

    #[test]
    fn canonical_norm_is_degree_one_for_full_generator() {
        let dil = Dilation::new(benchmark_generator()).unwrap();
        let norm = HomogeneousNorm::canonical(dil.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let e = DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
            if e.norm() < 1e-3 {
                continue;
            }
            let tau: f64 = rng.random_range(-1.5..1.5);
            let lhs = norm.phi(&dil.apply(tau, &e)).unwrap();
            let rhs = tau.exp() * norm.phi(&e).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-9);
        }
    }

    #[test]
    fn canonical_level_residual_vanishes() {
        let dil = Dilation::new(benchmark_generator()).unwrap();
        let norm = HomogeneousNorm::canonical(dil.clone());
        let e = DVector::from_row_slice(&[5.0, 8.0]);
        let z = norm.scale_to_unit(&e).unwrap();
        assert_relative_eq!(dil.p_norm(&z), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn explicit_scale_to_unit_lands_on_level_set() {
        let norm = benchmark_explicit();
        let e = DVector::from_row_slice(&[-2.0, 7.0]);
        let z = norm.scale_to_unit(&e).unwrap();
        assert_relative_eq!(norm.phi(&z).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let explicit = benchmark_explicit();
        let canonical =
            HomogeneousNorm::canonical(Dilation::new(benchmark_generator()).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for norm in [&explicit, &canonical] {
            for _ in 0..50 {
                let e = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
                if e.norm() < 0.1 {
                    continue;
                }
                let grad = norm.gradient(&e).unwrap();
                let h = 1e-6;
                for i in 0..2 {
                    let mut ep = e.clone();
                    let mut em = e.clone();
                    ep[i] += h;
                    em[i] -= h;
                    let fd = (norm.phi(&ep).unwrap() - norm.phi(&em).unwrap()) / (2.0 * h);
                    assert_relative_eq!(grad[i], fd, max_relative = 1e-4, epsilon = 1e-7);
                }
            }
        }
    }

    #[test]
    fn gradient_satisfies_euler_identity() {
        // Degree-one homogeneity forces grad(e) . (G_d e) = phi(e).
        let explicit = benchmark_explicit();
        let canonical =
            HomogeneousNorm::canonical(Dilation::new(benchmark_generator()).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for norm in [&explicit, &canonical] {
            let dil = norm.dilation().unwrap();
            for _ in 0..50 {
                let e = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
                if e.norm() < 0.1 {
                    continue;
                }
                let grad = norm.gradient(&e).unwrap();
                let lhs = grad.dot(&(dil.generator() * &e));
                assert_relative_eq!(lhs, norm.phi(&e).unwrap(), max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn gradient_undefined_at_origin() {
        let norm = benchmark_explicit();
        assert!(norm.gradient(&DVector::zeros(2)).is_err());
        assert!(norm.scale_to_unit(&DVector::zeros(2)).is_err());
    }

    #[test]
    fn monotonicity_constants_for_diagonal_weights() {
        let dil = Dilation::diagonal(&[0.8, 1.0]).unwrap();
        let (k1, k2) = dil.monotonicity_constants().unwrap();
        assert_relative_eq!(k1, 0.8, max_relative = 1e-10);
        assert_relative_eq!(k2, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn monotonicity_constants_bound_growth() {
        let dil = Dilation::new(benchmark_generator()).unwrap();
        let (k1, k2) = dil.monotonicity_constants().unwrap();
        assert!(k1 > 0.0 && k1 <= k2);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..100 {
            let v = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            if v.norm() < 1e-3 {
                continue;
            }
            let tau: f64 = rng.random_range(0.0..2.0);
            let ratio = dil.p_norm(&dil.apply(tau, &v)) / dil.p_norm(&v);
            assert!(ratio >= (k1 * tau).exp() * (1.0 - 1e-9));
            assert!(ratio <= (k2 * tau).exp() * (1.0 + 1e-9));
        }
    }

    #[test]
    fn derived_weight_matrix_solves_monotonicity_identity() {
        let dil = Dilation::new(benchmark_generator()).unwrap();
        let res = dil.generator().transpose() * dil.p() + dil.p() * dil.generator()
            - DMatrix::identity(2, 2) * 2.0;
        assert!(res.norm() < 1e-10);
    }

    #[test]
    fn rejects_non_anti_hurwitz_generator() {
        assert!(Dilation::new(DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0])).is_err());
        assert!(Dilation::diagonal(&[0.8, -1.0]).is_err());
        // Identity weight matrix happens to be admissible for the example
        // generator; a rotated indefinite one is not symmetric.
        let bad_p = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 1.0]);
        assert!(Dilation::with_p(benchmark_generator(), bad_p).is_err());
    }

    #[test]
    fn degree_checker_accepts_linear_dilation_field() {
        // f(e) = G_d e is homogeneous of degree zero by construction.
        let dil = Dilation::new(benchmark_generator()).unwrap();
        let gen = dil.generator().clone();
        let v = field_degree_violation(|e| &gen * e, &dil, 0.0, 200, 5);
        assert!(v < 1e-9, "violation {v}");
    }

    #[test]
    fn degree_checker_flags_inhomogeneous_field() {
        let dil = Dilation::diagonal(&[0.8, 1.0]).unwrap();
        let v = field_degree_violation(
            |e| DVector::from_row_slice(&[e[0] * e[0], e[1] + 1.0]),
            &dil,
            0.0,
            200,
            5,
        );
        assert!(v > 0.1, "violation {v}");
    }
}
