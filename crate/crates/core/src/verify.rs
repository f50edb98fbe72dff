//! Named invariant checks over canonical inputs, exposed to the command
//! line. Every check is self-contained and cheap; together they cover the
//! algebraic identities each module is built on.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controller::gain_from_estimate;
use crate::design;
use crate::estimator::{self, settling_bound, EstimatorGains, EstimatorMode, ShapeConstants};
use crate::homogeneity::{Dilation, HomogeneousNorm};
use crate::model::{regressor, stack_rows, Signal};
use crate::{config, linalg, sim};

/// One named invariant; `run` explains the failure when it returns Err.
pub struct Check {
    pub name: &'static str,
    pub run: fn() -> Result<(), String>,
}

fn fail(msg: String) -> Result<(), String> {
    Err(msg)
}

fn ok_if(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        fail(msg())
    }
}

fn benchmark_dilation() -> Dilation {
    Dilation::new(DMatrix::from_row_slice(2, 2, &[0.9, 0.0, 0.2, 0.5])).unwrap()
}

fn explicit_norm() -> HomogeneousNorm {
    HomogeneousNorm::explicit(2.0, vec![0.8, 1.0]).unwrap()
}

fn short_clean_run() -> Result<sim::Summary, String> {
    let mut cfg = config::benchmark();
    cfg.d = Some(Signal::constant(&[0.0, 0.0]));
    cfg.d_bound = Some(0.0);
    cfg.t_end = Some(1.0);
    cfg.dt = Some(1e-3);
    cfg.log_dt = Some(1e-2);
    let asm = config::build(&cfg).map_err(|e| e.to_string())?;
    sim::run(&asm.scenario).map(|o| o.summary).map_err(|e| e.to_string())
}

fn regressor_factorization() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let n = rng.random_range(2..5);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-3.0..3.0));
        let x = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
        let gap = (regressor(&x) * stack_rows(&a) - &a * &x).norm();
        ok_if(gap < 1e-12, || format!("factorization gap {gap}"))?;
    }
    Ok(())
}

fn filter_byparts_identity() -> Result<(), String> {
    let s = short_clean_run()?;
    ok_if(s.max_g1_gap < 1e-6, || format!("by-parts gap {}", s.max_g1_gap))
}

fn filter_regression_identity() -> Result<(), String> {
    let s = short_clean_run()?;
    ok_if(s.max_res_g_true < 1e-6, || format!("instantaneous residual {}", s.max_res_g_true))
}

fn filter_averaged_identity() -> Result<(), String> {
    let s = short_clean_run()?;
    ok_if(s.max_res_h_true < 1e-6, || format!("averaged residual {}", s.max_res_h_true))
}

fn envelope_saturates() -> Result<(), String> {
    let fb = crate::filters::FilterBank::new(2.0, 2).unwrap();
    let w5 = fb.w_envelope(5.0, 1.0);
    let w50 = fb.w_envelope(50.0, 1.0);
    ok_if(
        w5 < w50 && (w50 - 0.5).abs() < 1e-6,
        || format!("envelope not saturating: {w5} vs {w50}"),
    )
}

fn estimator_stationary_at_truth() -> Result<(), String> {
    let gains = EstimatorGains { kappa: 25.0, gamma: 50.0, alpha: 2.0 / 3.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let theta = DVector::from_fn(4, |_, _| rng.random_range(-2.0..2.0));
    let nf = DMatrix::from_fn(2, 4, |_, _| rng.random_range(-1.0..1.0));
    let m = nf.transpose() * &nf;
    let g = &nf * &theta;
    let h = &m * &theta;
    for mode in [EstimatorMode::Fxt, EstimatorMode::Baseline, EstimatorMode::Off] {
        let d = estimator::update(&gains, mode, &nf, &m, &g, &h, &theta).norm();
        ok_if(d < 1e-12, || format!("nonzero update {d} in mode {mode}"))?;
    }
    Ok(())
}

fn estimator_descends() -> Result<(), String> {
    let gains = EstimatorGains { kappa: 25.0, gamma: 50.0, alpha: 2.0 / 3.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let theta = DVector::from_fn(4, |_, _| rng.random_range(-2.0..2.0));
        let theta_hat = DVector::from_fn(4, |_, _| rng.random_range(-2.0..2.0));
        let nf = DMatrix::from_fn(2, 4, |_, _| rng.random_range(-1.0..1.0));
        let m = nf.transpose() * &nf;
        let g = &nf * &theta;
        let h = &m * &theta;
        let upd = estimator::update(&gains, EstimatorMode::Fxt, &nf, &m, &g, &h, &theta_hat);
        let toward = upd.dot(&(&theta - &theta_hat));
        ok_if(toward >= -1e-12, || format!("update points away from truth: {toward}"))?;
    }
    Ok(())
}

fn settling_constants_frozen() -> Result<(), String> {
    let gains = EstimatorGains { kappa: 25.0, gamma: 50.0, alpha: 2.0 / 3.0 };
    let b = settling_bound(&gains, &ShapeConstants::default(), 0.022, 2, 1, 0.5)
        .map_err(|e| e.to_string())?;
    let rel = |a: f64, r: f64| (a - r).abs() / r.abs();
    ok_if(rel(b.p, 0.195_276_747_833_752_93) < 1e-9, || format!("p = {}", b.p))?;
    ok_if(rel(b.kappa1, 0.122_318_904_981_312_29) < 1e-9, || format!("kappa1 = {}", b.kappa1))?;
    ok_if(rel(b.t_max, 3706.0931234387435) < 1e-9, || format!("t_max = {}", b.t_max))
}

fn settling_monotone_in_floor() -> Result<(), String> {
    let gains = EstimatorGains { kappa: 25.0, gamma: 50.0, alpha: 2.0 / 3.0 };
    let shape = ShapeConstants::default();
    let t1 = settling_bound(&gains, &shape, 0.01, 2, 1, 0.5).map_err(|e| e.to_string())?;
    let t2 = settling_bound(&gains, &shape, 0.1, 2, 1, 0.5).map_err(|e| e.to_string())?;
    ok_if(t2.t_max < t1.t_max, || format!("bound not monotone: {} vs {}", t1.t_max, t2.t_max))
}

fn dilation_group_law() -> Result<(), String> {
    let dil = benchmark_dilation();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let s = rng.random_range(-2.0..2.0);
        let t = rng.random_range(-2.0..2.0);
        let gap = (dil.matrix(s + t) - dil.matrix(s) * dil.matrix(t)).norm();
        ok_if(gap < 1e-10, || format!("group law gap {gap}"))?;
    }
    let gap0 = (dil.matrix(0.0) - DMatrix::<f64>::identity(2, 2)).norm();
    ok_if(gap0 < 1e-14, || format!("identity gap {gap0}"))
}

fn explicit_degree_one() -> Result<(), String> {
    let norm = explicit_norm();
    let dil = norm.dilation().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let e = DVector::from_fn(2, |_, _| rng.random_range(-4.0..4.0));
        if e.norm() < 1e-3 {
            continue;
        }
        let s = rng.random_range(-1.5..1.5);
        let lhs = norm.phi(&dil.apply(s, &e)).map_err(|e| e.to_string())?;
        let rhs = s.exp() * norm.phi(&e).map_err(|e| e.to_string())?;
        ok_if((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0), || {
            format!("degree-1 gap {}", lhs - rhs)
        })?;
    }
    Ok(())
}

fn canonical_level_residual() -> Result<(), String> {
    let dil = benchmark_dilation();
    let norm = HomogeneousNorm::canonical(dil.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let e = DVector::from_fn(2, |_, _| rng.random_range(-4.0..4.0));
        if e.norm() < 1e-3 {
            continue;
        }
        let phi = norm.phi(&e).map_err(|e| e.to_string())?;
        let z = dil.apply(-phi.ln(), &e);
        let res = (dil.p_norm(&z) - 1.0).abs();
        ok_if(res < 1e-10, || format!("level residual {res}"))?;
    }
    Ok(())
}

fn gradient_matches_differences() -> Result<(), String> {
    let norms = [explicit_norm(), HomogeneousNorm::canonical(benchmark_dilation())];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for norm in &norms {
        for _ in 0..20 {
            let e = DVector::from_fn(2, |_, _| rng.random_range(0.3..3.0))
                .component_mul(&DVector::from_fn(2, |_, _| {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }));
            let grad = norm.gradient(&e).map_err(|e| e.to_string())?;
            let eps = 1e-6;
            for i in 0..2 {
                let mut ep = e.clone();
                let mut em = e.clone();
                ep[i] += eps;
                em[i] -= eps;
                let fd = (norm.phi(&ep).map_err(|e| e.to_string())?
                    - norm.phi(&em).map_err(|e| e.to_string())?)
                    / (2.0 * eps);
                let rel = (grad[i] - fd).abs() / fd.abs().max(1e-6);
                ok_if(rel < 1e-5, || format!("gradient mismatch {rel} at {i}"))?;
            }
        }
    }
    Ok(())
}

fn gradient_euler_identity() -> Result<(), String> {
    let dil = benchmark_dilation();
    let norm = HomogeneousNorm::canonical(dil.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let e = DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
        if e.norm() < 1e-3 {
            continue;
        }
        let phi = norm.phi(&e).map_err(|e| e.to_string())?;
        let grad = norm.gradient(&e).map_err(|e| e.to_string())?;
        let lhs = grad.dot(&(dil.generator() * &e));
        ok_if((lhs - phi).abs() < 1e-8 * phi.max(1.0), || {
            format!("euler identity gap {}", lhs - phi)
        })?;
    }
    Ok(())
}

fn monotonicity_envelopes() -> Result<(), String> {
    let dil = benchmark_dilation();
    let (k2, k1) = dil.monotonicity_constants().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..100 {
        let tau = rng.random_range(0.0..4.0);
        let mut rng2 = ChaCha8Rng::seed_from_u64(rng.random());
        let v = DVector::from_fn(2, |_, _| rng2.random_range(-1.0..1.0));
        if v.norm() < 1e-3 {
            continue;
        }
        let ratio = dil.p_norm(&dil.apply(tau, &v)) / dil.p_norm(&v);
        let lo = (k2 * tau).exp() * (1.0 - 1e-9);
        let hi = (k1 * tau).exp() * (1.0 + 1e-9);
        ok_if(ratio >= lo && ratio <= hi, || {
            format!("growth ratio {ratio} outside [{lo}, {hi}] at tau {tau}")
        })?;
    }
    Ok(())
}

fn lyapunov_residuals() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let n = rng.random_range(2..4);
        // Hurwitz by construction: negative-definite symmetric part.
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = &m - DMatrix::identity(n, n) * (linalg::spectral_norm(&m) + 0.5);
        let q = DMatrix::<f64>::identity(n, n);
        let p = design::lyapunov_solve(&a, &q).map_err(|e| e.to_string())?;
        let res = (a.transpose() * &p + &p * &a + &q).norm();
        ok_if(res < 1e-10, || format!("lyapunov residual {res}"))?;
    }
    Ok(())
}

fn certificate_accepts_benchmark() -> Result<(), String> {
    let asm = config::build(&config::benchmark()).map_err(|e| e.to_string())?;
    ok_if(asm.report.certificate_feasible, || "published certificate rejected".into())?;
    let k = asm.report.k_reconstructed.clone().unwrap_or_default();
    ok_if(
        (k[0] + 1.26).abs() < 0.01 && (k[1] + 2.71).abs() < 0.01,
        || format!("reconstructed gain {k:?}"),
    )
}

fn certificate_rejects_stressed() -> Result<(), String> {
    let mut cfg = config::benchmark();
    cfg.beta = Some(100.0);
    let asm = config::build(&cfg).map_err(|e| e.to_string())?;
    ok_if(!asm.report.certificate_feasible, || "certificate feasible at beta 100".into())
}

fn structure_solution_exact() -> Result<(), String> {
    let a_m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -7.0, -10.0]);
    let b = DVector::from_row_slice(&[0.0, 1.0]);
    let s = design::solve_structure(&a_m, &b, 0.5, 0.2).map_err(|e| e.to_string())?;
    ok_if(s.eq_residual < 1e-8 && s.lb_residual < 1e-8, || {
        format!("solver residuals {} {}", s.eq_residual, s.lb_residual)
    })?;
    let k0 = &s.k0;
    ok_if(
        (k0[(0, 0)] - 7.0).abs() < 1e-6 && (k0[(0, 1)] - 10.0).abs() < 1e-6,
        || format!("unexpected k0 {k0}"),
    )
}

fn gain_reconstruction_matches_model() -> Result<(), String> {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -5.0, -6.0]);
    let a_m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -7.0, -10.0]);
    let b = DVector::from_row_slice(&[0.0, 1.0]);
    let kx = gain_from_estimate(&a, &a_m, &b).map_err(|e| e.to_string())?;
    let closed = &a + DMatrix::from_column_slice(2, 1, b.as_slice()) * &kx;
    let gap = (closed - a_m).norm();
    ok_if(gap < 1e-12, || format!("model matching gap {gap}"))
}

fn lyapunov_function_definite() -> Result<(), String> {
    let asm = config::build(&config::benchmark()).map_err(|e| e.to_string())?;
    let hom = &asm.scenario.controller.hom;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    ok_if(hom.v(&DVector::zeros(2)).map_err(|e| e.to_string())? == 0.0, || {
        "V nonzero at origin".into()
    })?;
    for _ in 0..100 {
        let e = DVector::from_fn(2, |_, _| rng.random_range(-5.0..5.0));
        if e.norm() < 1e-6 {
            continue;
        }
        let v = hom.v(&e).map_err(|e| e.to_string())?;
        ok_if(v > 0.0, || format!("V not positive at {e:?}: {v}"))?;
    }
    Ok(())
}

fn margin_conventions() -> Result<(), String> {
    let asm = config::build(&config::benchmark()).map_err(|e| e.to_string())?;
    let hom = &asm.scenario.controller.hom;
    let zero = DVector::zeros(2);
    let at_rest = hom.c4_margin(&zero, &zero).map_err(|e| e.to_string())?;
    ok_if(at_rest == 0.0, || format!("clean margin at origin {at_rest}"))?;
    let hit = hom
        .c4_margin(&zero, &DVector::from_row_slice(&[0.1, 0.0]))
        .map_err(|e| e.to_string())?;
    ok_if(hit == f64::NEG_INFINITY, || format!("disturbed margin at origin {hit}"))?;
    let clean = hom
        .c4_margin(&DVector::from_row_slice(&[1.0, -1.0]), &zero)
        .map_err(|e| e.to_string())?;
    ok_if(clean > 0.0, || format!("clean margin not positive: {clean}"))
}

fn simulation_deterministic() -> Result<(), String> {
    let mut cfg = config::benchmark();
    cfg.t_end = Some(0.2);
    cfg.dt = Some(5e-4);
    cfg.log_dt = Some(5e-3);
    let asm = config::build(&cfg).map_err(|e| e.to_string())?;
    let a = sim::run(&asm.scenario)
        .map_err(|e| e.to_string())?
        .trajectory
        .to_csv_string()
        .map_err(|e| e.to_string())?;
    let b = sim::run(&asm.scenario)
        .map_err(|e| e.to_string())?
        .trajectory
        .to_csv_string()
        .map_err(|e| e.to_string())?;
    ok_if(a == b, || "repeated runs differ".into())
}

fn simulation_equilibrium() -> Result<(), String> {
    let mut cfg = config::benchmark();
    // Plant equal to the reference, no input, perfect estimate: nothing moves.
    cfg.a = Some(vec![vec![0.0, 1.0], vec![-7.0, -10.0]]);
    cfg.r = Some(Signal::constant(&[0.0]));
    cfg.d = Some(Signal::constant(&[0.0, 0.0]));
    cfg.d_bound = Some(0.0);
    cfg.x0 = Some(vec![0.0, 0.0]);
    cfg.theta0 = Some(vec![0.0, 1.0, -7.0, -10.0]);
    cfg.t_end = Some(0.2);
    cfg.dt = Some(1e-3);
    let asm = config::build(&cfg).map_err(|e| e.to_string())?;
    let s = sim::run(&asm.scenario).map_err(|e| e.to_string())?.summary;
    ok_if(s.x_norm_max < 1e-12 && s.theta_err_max < 1e-12, || {
        format!("equilibrium drifted: x {} theta {}", s.x_norm_max, s.theta_err_max)
    })
}

/// The full named suite, in a stable order.
pub fn checks() -> Vec<Check> {
    vec![
        Check { name: "regressor-factorization", run: regressor_factorization },
        Check { name: "filter-byparts-identity", run: filter_byparts_identity },
        Check { name: "filter-regression-identity", run: filter_regression_identity },
        Check { name: "filter-averaged-identity", run: filter_averaged_identity },
        Check { name: "filter-envelope-saturation", run: envelope_saturates },
        Check { name: "estimator-stationary-at-truth", run: estimator_stationary_at_truth },
        Check { name: "estimator-descent", run: estimator_descends },
        Check { name: "settling-constants-frozen", run: settling_constants_frozen },
        Check { name: "settling-monotone-in-floor", run: settling_monotone_in_floor },
        Check { name: "dilation-group-law", run: dilation_group_law },
        Check { name: "explicit-degree-one", run: explicit_degree_one },
        Check { name: "canonical-level-residual", run: canonical_level_residual },
        Check { name: "gradient-finite-differences", run: gradient_matches_differences },
        Check { name: "gradient-euler-identity", run: gradient_euler_identity },
        Check { name: "monotonicity-envelopes", run: monotonicity_envelopes },
        Check { name: "lyapunov-residuals", run: lyapunov_residuals },
        Check { name: "certificate-accepts-benchmark", run: certificate_accepts_benchmark },
        Check { name: "certificate-rejects-stressed", run: certificate_rejects_stressed },
        Check { name: "structure-solution-exact", run: structure_solution_exact },
        Check { name: "gain-reconstruction", run: gain_reconstruction_matches_model },
        Check { name: "lyapunov-function-definite", run: lyapunov_function_definite },
        Check { name: "margin-conventions", run: margin_conventions },
        Check { name: "simulation-deterministic", run: simulation_deterministic },
        Check { name: "simulation-equilibrium", run: simulation_equilibrium },
    ]
}

/// Run every check; returns (name, outcome) pairs.
pub fn run_all() -> Vec<(&'static str, Result<(), String>)> {
    checks().into_iter().map(|c| (c.name, (c.run)())).collect()
}
