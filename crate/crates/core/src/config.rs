//! JSON-facing configuration. A [`Config`] mirrors everything a run
//! needs: plant and reference matrices, signal specs, gains, design
//! certificate, and integration settings. Absent fields fall back to the
//! named preset; [`build`] turns a resolved config into a ready
//! [`Scenario`] plus a design report with the audit trail of known
//! discrepancies in the published benchmark values.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::controller::{AdaptSign, DirectLaw, HomogeneousLaw, TwoPhase};
use crate::design::{self, Certificate, StructureSolution};
use crate::estimator::{settling_bound, EstimatorGains, EstimatorMode, ShapeConstants};
use crate::excitation::mu_floor;
use crate::filters::FilterBank;
use crate::homogeneity::{Dilation, HomogeneousNorm};
use crate::model::{Plant, ReferenceModel, Signal};
use crate::sim::Scenario;
use crate::{linalg, Error, Result};

/// Which homogeneous norm the controller uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    /// Weighted power sum with the standard weight ladder.
    #[default]
    Explicit,
    /// Implicit level-set norm of the dilation generated by G_d.
    Canonical,
}

/// Plain-data description of a scenario and its design inputs. Every
/// field is optional; [`Config::resolve`] fills gaps from the preset
/// named in `preset`, and [`build`] rejects configs that still miss
/// required pieces.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub preset: Option<String>,

    /// Plant matrix (treated as unknown by the algorithms; drives the
    /// simulation and the error readouts).
    pub a: Option<Vec<Vec<f64>>>,
    pub b: Option<Vec<f64>>,
    pub a_m: Option<Vec<Vec<f64>>>,
    /// Scalar reference input.
    pub r: Option<Signal>,
    /// State disturbance, one channel per state.
    pub d: Option<Signal>,
    /// Asserted euclidean bound on the disturbance.
    pub d_bound: Option<f64>,

    pub x0: Option<Vec<f64>>,
    pub xm0: Option<Vec<f64>>,
    pub theta0: Option<Vec<f64>>,
    pub kd0: Option<Vec<f64>>,

    pub k_filter: Option<f64>,
    pub kappa: Option<f64>,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub estimator: Option<EstimatorMode>,

    /// Structure pair: when `l` and `k0` are given they are audited as
    /// supplied; otherwise the structure equation is solved.
    pub l: Option<Vec<Vec<f64>>>,
    pub k0: Option<Vec<f64>>,
    pub eps: Option<f64>,
    pub nu: Option<f64>,
    pub rho: Option<f64>,
    pub norm: Option<NormKind>,

    /// Error-feedback certificate: when `k_gain`, `x_cert` and `chi` are
    /// given the certificate is verified; otherwise one is searched.
    pub k_gain: Option<Vec<f64>>,
    pub x_cert: Option<Vec<Vec<f64>>>,
    pub chi: Option<f64>,
    pub eta: Option<f64>,
    pub iota: Option<f64>,
    pub zeta: Option<f64>,
    pub beta: Option<f64>,

    /// Startup Lyapunov matrix; recomputed from the reference matrix with
    /// unit right-hand side when absent.
    pub p1: Option<Vec<Vec<f64>>>,
    pub gamma_d: Option<Vec<Vec<f64>>>,
    pub sigma: Option<f64>,
    pub adapt_sign: Option<AdaptSign>,
    pub t_switch: Option<f64>,

    pub psi: Option<f64>,
    pub upsilon: Option<f64>,

    pub gamma_target: Option<f64>,
    pub q: Option<u32>,
    pub t_window: Option<f64>,

    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub log_dt: Option<f64>,
    pub settle_tol: Option<f64>,
    pub probe_time: Option<f64>,
    pub tail_window: Option<f64>,
    pub seed: Option<u64>,
}

/// Published reference values for the benchmark, kept for the audit.
mod published {
    pub const P1: [[f64; 2]; 2] = [[0.3025, -0.5], [-0.5, 1.05]];
    pub const SWITCH_TIME: f64 = 4.35;
    pub const FINAL_TIME: f64 = 29.6;
}

/// The built-in second-order benchmark: unstable-feeling oscillator
/// regulated to a stiffer reference model, multisine reference input,
/// fast sinusoidal disturbance, published design certificate.
pub fn benchmark() -> Config {
    use crate::model::{Channel, Sinusoid};
    let sine = |amplitude: f64, omega: f64, t_on: f64| Sinusoid {
        amplitude,
        omega,
        phase: 0.0,
        t_on,
    };
    Config {
        preset: None,
        a: Some(vec![vec![0.0, 1.0], vec![-5.0, -6.0]]),
        b: Some(vec![0.0, 1.0]),
        a_m: Some(vec![vec![0.0, 1.0], vec![-7.0, -10.0]]),
        r: Some(Signal {
            channels: vec![Channel {
                offset: 5.0,
                sinusoids: vec![sine(3.0, 1.0, 0.0), sine(5.0, 2.0, 5.0)],
            }],
        }),
        d: Some(Signal {
            channels: vec![
                Channel { offset: 0.0, sinusoids: vec![sine(0.5, 50.0, 0.0)] },
                Channel { offset: 0.0, sinusoids: vec![sine(1.0, 50.0, 0.0)] },
            ],
        }),
        d_bound: Some(1.25_f64.sqrt()),
        x0: Some(vec![5.0, 8.0]),
        xm0: Some(vec![0.0, 0.0]),
        theta0: Some(vec![0.0; 4]),
        kd0: Some(vec![0.0, 0.0]),
        k_filter: Some(1.0),
        kappa: Some(25.0),
        gamma: Some(50.0),
        alpha: Some(2.0 / 3.0),
        estimator: Some(EstimatorMode::Fxt),
        l: Some(vec![vec![2.0, 0.0], vec![1.0, 0.0]]),
        k0: Some(vec![7.0, 10.0]),
        eps: Some(0.5),
        nu: Some(0.2),
        rho: Some(2.0),
        norm: Some(NormKind::Explicit),
        k_gain: Some(vec![-1.26, -2.71]),
        x_cert: Some(vec![vec![14.5, -6.0], vec![-6.0, 5.0]]),
        chi: Some(12.6),
        eta: Some(0.14),
        iota: Some(0.25),
        zeta: Some(0.1),
        beta: Some(1.5),
        p1: None,
        gamma_d: Some(vec![vec![10.0, 0.0], vec![0.0, 10.0]]),
        sigma: Some(0.1),
        adapt_sign: Some(AdaptSign::Classical),
        t_switch: Some(published::SWITCH_TIME),
        psi: Some(0.5),
        upsilon: Some(0.1),
        gamma_target: Some(0.25),
        q: Some(1),
        t_window: Some(0.5),
        t_end: Some(30.0),
        dt: Some(1e-4),
        log_dt: Some(1e-2),
        settle_tol: Some(1e-3),
        probe_time: Some(5.0),
        tail_window: Some(5.0),
        seed: Some(0),
    }
}

pub fn preset_names() -> &'static [&'static str] {
    &["benchmark"]
}

fn builtin(name: &str) -> Result<Config> {
    match name {
        "benchmark" => Ok(benchmark()),
        other => Err(Error::Config(format!(
            "unknown preset {other:?}; available: {}",
            preset_names().join(", ")
        ))),
    }
}

macro_rules! overlay_fields {
    ($base:ident, $over:ident, $($f:ident),+ $(,)?) => {
        $(if $over.$f.is_some() { $base.$f = $over.$f.clone(); })+
    };
}

impl Config {
    pub fn from_json(text: &str) -> Result<Config> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Fill absent fields from the named preset (if any).
    pub fn resolve(&self) -> Result<Config> {
        let mut base = match &self.preset {
            Some(name) => builtin(name)?,
            None => Config::default(),
        };
        let over = self;
        overlay_fields!(
            base, over, a, b, a_m, r, d, d_bound, x0, xm0, theta0, kd0, k_filter, kappa,
            gamma, alpha, estimator, l, k0, eps, nu, rho, norm, k_gain, x_cert, chi, eta,
            iota, zeta, beta, p1, gamma_d, sigma, adapt_sign, t_switch, psi, upsilon,
            gamma_target, q, t_window, t_end, dt, log_dt, settle_tol, probe_time,
            tail_window, seed
        );
        base.preset = self.preset.clone();
        Ok(base)
    }
}

fn mat(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    if r == 0 {
        return Err(Error::Config(format!("{what}: empty matrix")));
    }
    let c = rows[0].len();
    if c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(Error::Config(format!("{what}: ragged or empty rows")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn req<T: Clone>(field: &Option<T>, name: &str) -> Result<T> {
    field.clone().ok_or_else(|| Error::Config(format!("missing required field {name:?}")))
}

/// One audited discrepancy: the check, its residual or relevant value as
/// computed here, and what the toolkit does about it.
#[derive(Debug, Clone, Serialize)]
pub struct AuditEntry {
    pub check: String,
    pub value: f64,
    pub note: String,
}

/// Design outcome in plain JSON types.
#[derive(Debug, Clone, Serialize)]
pub struct DesignReport {
    pub n: usize,
    pub l: Vec<Vec<f64>>,
    pub k0: Vec<f64>,
    pub g_d: Vec<Vec<f64>>,
    pub structure_eq_residual: f64,
    pub structure_lb_residual: f64,
    pub certificate_feasible: bool,
    pub lambda_max_block1: f64,
    pub lambda_max_block2: f64,
    pub lambda_min_x: f64,
    /// Gain reconstructed from the certificate, Y X^{-1}.
    pub k_reconstructed: Option<Vec<f64>>,
    /// Gain actually used by the controller.
    pub k_used: Vec<f64>,
    pub beta: f64,
    pub mu_nominal: f64,
    pub settling: crate::estimator::SettlingBound,
    /// Switch time driving the simulation.
    pub t_switch: f64,
    /// Switch time the settling formula yields at the nominal floor.
    pub t_switch_formula: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub t_final: f64,
    pub p1: Vec<Vec<f64>>,
    pub p1_source: String,
    pub audit: Vec<AuditEntry>,
}

/// A ready-to-run scenario plus the design report behind it.
pub struct Assembled {
    pub scenario: Scenario,
    pub report: DesignReport,
}

/// Run the design pipeline on a resolved config and assemble the
/// scenario. Fails with [`Error::Config`] on missing or malformed
/// fields and [`Error::Infeasible`] when no certificate can be found.
pub fn build(cfg: &Config) -> Result<Assembled> {
    let a = mat(&req(&cfg.a, "a")?, "a")?;
    let b = DVector::from_vec(req(&cfg.b, "b")?);
    let a_m = mat(&req(&cfg.a_m, "a_m")?, "a_m")?;
    let n = a_m.nrows();
    let plant = Plant::new(a, b.clone())?;
    let reference = ReferenceModel::new(a_m.clone(), b.clone())?;

    let eps = req(&cfg.eps, "eps")?;
    let nu = req(&cfg.nu, "nu")?;

    // Structure pair: audit the supplied one or solve for it.
    let structure: StructureSolution = match (&cfg.l, &cfg.k0) {
        (Some(l), Some(k0)) => design::structure_from_parts(
            &a_m,
            &b,
            mat(l, "l")?,
            DMatrix::from_row_slice(1, n, k0),
            eps,
            nu,
        )?,
        (None, None) => design::solve_structure(&a_m, &b, eps, nu)?,
        _ => {
            return Err(Error::Config(
                "structure fields l and k0 must be given together or not at all".into(),
            ))
        }
    };

    let norm = match cfg.norm.unwrap_or_default() {
        NormKind::Explicit => {
            let rho = cfg.rho.unwrap_or(2.0);
            HomogeneousNorm::explicit(rho, HomogeneousNorm::standard_weights(n, nu)?)?
        }
        NormKind::Canonical => {
            HomogeneousNorm::canonical(Dilation::new(structure.g_d.clone())?)
        }
    };

    let seed = cfg.seed.unwrap_or(0);
    let beta = match cfg.beta {
        Some(v) => v,
        None => design::estimate_beta(&norm, 20_001, seed)?,
    };

    let eta = req(&cfg.eta, "eta")?;
    let iota = req(&cfg.iota, "iota")?;
    let zeta = req(&cfg.zeta, "zeta")?;

    // Certificate: verify the supplied one or search for one.
    let (cert, cert_report) = match (&cfg.x_cert, &cfg.k_gain, cfg.chi) {
        (Some(xr), Some(kg), Some(chi)) => {
            let x = mat(xr, "x_cert")?;
            let k = DMatrix::from_row_slice(1, n, kg);
            let y = &k * &x;
            let cert = Certificate { x, y, chi, eta, iota, zeta, beta };
            let rep = design::verify_certificate(&a_m, &b, &structure.k0, &structure.g_d, &cert)?;
            (cert, rep)
        }
        (None, None, None) => {
            let cert = design::search_certificate(
                &a_m,
                &b,
                &structure.k0,
                &structure.g_d,
                beta,
                iota,
                zeta,
                eta,
                seed,
                4000,
            )?;
            let rep = design::verify_certificate(&a_m, &b, &structure.k0, &structure.g_d, &cert)?;
            (cert, rep)
        }
        _ => {
            return Err(Error::Config(
                "certificate fields x_cert, k_gain, chi must be given together or not at all"
                    .into(),
            ))
        }
    };

    let k_used = match &cfg.k_gain {
        Some(kg) => DMatrix::from_row_slice(1, n, kg),
        None => cert_report
            .k
            .clone()
            .ok_or_else(|| Error::Numerical("certificate produced no gain".into()))?,
    };

    // Startup Lyapunov matrix.
    let q1 = DMatrix::<f64>::identity(n, n);
    let (p1, p1_source) = match &cfg.p1 {
        Some(rows) => (mat(rows, "p1")?, "supplied".to_string()),
        None => (design::lyapunov_solve(&a_m, &q1)?, "recomputed".to_string()),
    };

    // Settling bound at the nominal excitation floor.
    let gains = EstimatorGains {
        kappa: req(&cfg.kappa, "kappa")?,
        gamma: req(&cfg.gamma, "gamma")?,
        alpha: req(&cfg.alpha, "alpha")?,
    };
    let gamma_target = req(&cfg.gamma_target, "gamma_target")?;
    let q = req(&cfg.q, "q")?;
    let t_window = req(&cfg.t_window, "t_window")?;
    let k_filter = req(&cfg.k_filter, "k_filter")?;
    let mu_nominal = mu_floor(gamma_target, k_filter, t_window, q);
    let settling =
        settling_bound(&gains, &ShapeConstants::default(), mu_nominal, n, q, t_window)?;
    let t_switch = cfg.t_switch.unwrap_or(settling.t_max);

    let psi = req(&cfg.psi, "psi")?;
    let upsilon = req(&cfg.upsilon, "upsilon")?;
    let (delta_min, delta_max) = design::delta_bounds(&cert.x, &norm, 40_001, seed)?;
    let t_final = design::final_time(t_switch, delta_min, delta_max, nu, iota, psi, upsilon)?;

    let sigma = req(&cfg.sigma, "sigma")?;
    let gamma_d = mat(&req(&cfg.gamma_d, "gamma_d")?, "gamma_d")?;
    let sign = cfg.adapt_sign.unwrap_or_default();
    let direct = DirectLaw::new(p1.clone(), gamma_d, sigma, sign)?;
    let hom = HomogeneousLaw::new(
        structure.k0.clone(),
        k_used.clone(),
        &cert.x,
        structure.g_d.clone(),
        norm,
        nu,
        eps,
        psi,
        zeta,
        eta,
    )?;
    let controller = TwoPhase { direct, hom, t_switch };

    let audit = audit_entries(&a_m, &structure, &settling, t_switch, t_final, k_filter, sign);

    let report = DesignReport {
        n,
        l: to_rows(&structure.l),
        k0: structure.k0.row(0).iter().copied().collect(),
        g_d: to_rows(&structure.g_d),
        structure_eq_residual: structure.eq_residual,
        structure_lb_residual: structure.lb_residual,
        certificate_feasible: cert_report.feasible,
        lambda_max_block1: cert_report.lambda_max_block1,
        lambda_max_block2: cert_report.lambda_max_block2,
        lambda_min_x: cert_report.lambda_min_x,
        k_reconstructed: cert_report.k.as_ref().map(|k| k.row(0).iter().copied().collect()),
        k_used: k_used.row(0).iter().copied().collect(),
        beta,
        mu_nominal,
        settling,
        t_switch,
        t_switch_formula: settling.t_max,
        delta_min,
        delta_max,
        t_final,
        p1: to_rows(&p1),
        p1_source,
        audit,
    };

    let x0 = DVector::from_vec(req(&cfg.x0, "x0")?);
    let scenario = Scenario {
        plant,
        reference,
        reference_input: req(&cfg.r, "r")?,
        disturbance: req(&cfg.d, "d")?,
        disturbance_bound: req(&cfg.d_bound, "d_bound")?,
        x0,
        xm0: DVector::from_vec(req(&cfg.xm0, "xm0")?),
        theta0: DVector::from_vec(req(&cfg.theta0, "theta0")?),
        kd0: DVector::from_vec(req(&cfg.kd0, "kd0")?),
        filter: FilterBank::new(k_filter, n)?,
        estimator_gains: gains,
        estimator_mode: cfg.estimator.unwrap_or_default(),
        controller,
        excitation_gamma: gamma_target,
        excitation_q: q,
        excitation_window: t_window,
        t_end: req(&cfg.t_end, "t_end")?,
        dt: req(&cfg.dt, "dt")?,
        log_dt: req(&cfg.log_dt, "log_dt")?,
        settle_tol: cfg.settle_tol.unwrap_or(1e-3),
        probe_time: cfg.probe_time.unwrap_or(5.0),
        tail_window: cfg.tail_window.unwrap_or(5.0),
        t_final_check: Some(t_final),
        v_target: Some(upsilon),
        seed,
    };
    scenario.validate()?;

    Ok(Assembled { scenario, report })
}

/// The discrepancies between the published benchmark values and what the
/// formulas yield, as computed here. Reported, never silently patched.
fn audit_entries(
    a_m: &DMatrix<f64>,
    structure: &StructureSolution,
    settling: &crate::estimator::SettlingBound,
    t_switch: f64,
    t_final: f64,
    k_filter: f64,
    sign: AdaptSign,
) -> Vec<AuditEntry> {
    let mut out = Vec::new();
    if a_m.nrows() == 2 {
        let p1p = DMatrix::from_fn(2, 2, |i, j| published::P1[i][j]);
        let lyap_gap = linalg::lambda_max_sym(&(a_m.transpose() * &p1p + &p1p * a_m));
        out.push(AuditEntry {
            check: "startup-lyapunov".into(),
            value: lyap_gap,
            note: "largest eigenvalue of A_m' P1 + P1 A_m for the published startup \
                   matrix; a valid solution would make this negative, so the default \
                   recomputes P1 from the identity right-hand side"
                .into(),
        });
    }
    out.push(AuditEntry {
        check: "structure-residual".into(),
        value: structure.eq_residual,
        note: "residual of the gain-structure equation for the pair in use; the \
               published pair does not satisfy the equation exactly and is accepted \
               with this residual reported"
            .into(),
    });
    out.push(AuditEntry {
        check: "structure-annihilation".into(),
        value: structure.lb_residual,
        note: "norm of L B; zero as required".into(),
    });
    out.push(AuditEntry {
        check: "switch-time-vs-bound".into(),
        value: settling.t_max,
        note: format!(
            "settling bound at the nominal excitation floor; the configured switch \
             time is {t_switch}, the published value {}; the bound is far more \
             conservative than observed convergence",
            published::SWITCH_TIME
        ),
    });
    out.push(AuditEntry {
        check: "final-time".into(),
        value: t_final,
        note: format!(
            "reaching-time bound as computed from the certificate geometry; the \
             published value is {}",
            published::FINAL_TIME
        ),
    });
    out.push(AuditEntry {
        check: "adapt-sign".into(),
        value: match sign {
            AdaptSign::Classical => 0.0,
            AdaptSign::Published => 1.0,
        },
        note: "0 = error-driven startup term uses the stabilizing orientation, \
               1 = published orientation; the published one destabilizes this \
               benchmark"
            .into(),
    });
    out.push(AuditEntry {
        check: "filter-bandwidth".into(),
        value: k_filter,
        note: "filter bandwidth in use; the benchmark leaves it unstated and the \
               preset pins 1.0"
            .into(),
    });
    out
}
