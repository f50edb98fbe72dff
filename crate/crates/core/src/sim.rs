//! Closed-loop simulation. Plant, reference model, filter cascade,
//! estimator, excitation bookkeeping, and the two-phase controller are
//! integrated as one packed state vector under fixed-step RK4 so that
//! every signal sees the same time grid and the run is deterministic.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::controller::{gain_from_estimate, Phase, TwoPhase};
use crate::estimator::{self, EstimatorGains, EstimatorMode};
use crate::excitation::{Monitor, Report};
use crate::filters::FilterBank;
use crate::model::{regressor, unstack_rows, Plant, ReferenceModel, Signal};
use crate::{Error, Result};

/// Offsets of the packed integration state. With m = n^2 the blocks are
/// x, xm, h, g2, N (n x m), M (m x m), H, theta_hat, K_d, the excitation
/// Gram, the scalar filtered-disturbance bound, and the directly filtered
/// state derivative kept as an oracle for the by-parts identity.
#[derive(Debug, Clone, Copy)]
struct Layout {
    n: usize,
    m: usize,
}

impl Layout {
    fn new(n: usize) -> Self {
        Layout { n, m: n * n }
    }

    fn x(&self) -> usize {
        0
    }
    fn xm(&self) -> usize {
        self.n
    }
    fn h(&self) -> usize {
        2 * self.n
    }
    fn g2(&self) -> usize {
        3 * self.n
    }
    fn nf(&self) -> usize {
        4 * self.n
    }
    fn mm(&self) -> usize {
        self.nf() + self.n * self.m
    }
    fn hv(&self) -> usize {
        self.mm() + self.m * self.m
    }
    fn th(&self) -> usize {
        self.hv() + self.m
    }
    fn kd(&self) -> usize {
        self.th() + self.m
    }
    fn gram(&self) -> usize {
        self.kd() + self.n
    }
    fn w1(&self) -> usize {
        self.gram() + self.m * self.m
    }
    fn g1d(&self) -> usize {
        self.w1() + 1
    }
    fn len(&self) -> usize {
        self.g1d() + self.n
    }
}

/// Owned view of one packed state.
struct Parts {
    x: DVector<f64>,
    xm: DVector<f64>,
    h: DVector<f64>,
    g2: DVector<f64>,
    nf: DMatrix<f64>,
    mm: DMatrix<f64>,
    hv: DVector<f64>,
    th: DVector<f64>,
    kd: DVector<f64>,
    gram: DMatrix<f64>,
    w1: f64,
    g1d: DVector<f64>,
}

fn unpack(lay: Layout, s: &DVector<f64>) -> Parts {
    let sl = s.as_slice();
    let vec = |off: usize, len: usize| DVector::from_column_slice(&sl[off..off + len]);
    let mat =
        |off: usize, r: usize, c: usize| DMatrix::from_column_slice(r, c, &sl[off..off + r * c]);
    Parts {
        x: vec(lay.x(), lay.n),
        xm: vec(lay.xm(), lay.n),
        h: vec(lay.h(), lay.n),
        g2: vec(lay.g2(), lay.n),
        nf: mat(lay.nf(), lay.n, lay.m),
        mm: mat(lay.mm(), lay.m, lay.m),
        hv: vec(lay.hv(), lay.m),
        th: vec(lay.th(), lay.m),
        kd: vec(lay.kd(), lay.n),
        gram: mat(lay.gram(), lay.m, lay.m),
        w1: sl[lay.w1()],
        g1d: vec(lay.g1d(), lay.n),
    }
}

fn put(out: &mut DVector<f64>, off: usize, data: &[f64]) {
    out.as_mut_slice()[off..off + data.len()].copy_from_slice(data);
}

/// Everything a run needs. Fields are plain so configuration code can
/// assemble scenarios directly.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub plant: Plant,
    pub reference: ReferenceModel,
    pub reference_input: Signal,
    pub disturbance: Signal,
    /// Asserted bound on the euclidean norm of the disturbance; drives the
    /// filtered-disturbance envelope.
    pub disturbance_bound: f64,
    pub x0: DVector<f64>,
    pub xm0: DVector<f64>,
    pub theta0: DVector<f64>,
    pub kd0: DVector<f64>,
    pub filter: FilterBank,
    pub estimator_gains: EstimatorGains,
    pub estimator_mode: EstimatorMode,
    pub controller: TwoPhase,
    pub excitation_gamma: f64,
    pub excitation_q: u32,
    pub excitation_window: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Logging cadence; rounded to a whole number of steps.
    pub log_dt: f64,
    /// Parameter-error threshold for the settling-time readout.
    pub settle_tol: f64,
    /// Reference probe: summary records the error norms at this time.
    pub probe_time: f64,
    /// Length of the terminal window used for tail statistics.
    pub tail_window: f64,
    /// When set, the summary reports the largest Lyapunov value seen at or
    /// after this time.
    pub t_final_check: Option<f64>,
    /// When set, the summary reports the last time the Lyapunov value
    /// exceeded this level.
    pub v_target: Option<f64>,
    /// Echoed into outputs; the integration itself is deterministic.
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let n = self.plant.n();
        if self.reference.n() != n {
            return Err(Error::InvalidInput("plant and reference sizes differ".into()));
        }
        if self.x0.len() != n || self.xm0.len() != n || self.kd0.len() != n {
            return Err(Error::InvalidInput("initial state sizes must match the plant".into()));
        }
        if self.theta0.len() != n * n {
            return Err(Error::InvalidInput("initial estimate must have n^2 entries".into()));
        }
        if self.reference_input.dim() != 1 {
            return Err(Error::InvalidInput("reference input must be scalar".into()));
        }
        if self.disturbance.dim() != n {
            return Err(Error::InvalidInput("disturbance must have one channel per state".into()));
        }
        if self.filter.n() != n {
            return Err(Error::InvalidInput("filter bank size must match the plant".into()));
        }
        if self.controller.hom.norm().n() != n {
            return Err(Error::InvalidInput("controller norm size must match the plant".into()));
        }
        if !(self.disturbance_bound >= 0.0) || !self.disturbance_bound.is_finite() {
            return Err(Error::InvalidInput("disturbance bound must be finite".into()));
        }
        if !(self.dt > 0.0) || !(self.t_end >= self.dt) {
            return Err(Error::InvalidInput("need 0 < dt <= t_end".into()));
        }
        if !(self.log_dt >= self.dt) {
            return Err(Error::InvalidInput("logging cadence cannot beat the step size".into()));
        }
        if !(self.settle_tol > 0.0) {
            return Err(Error::InvalidInput("settling tolerance must be positive".into()));
        }
        if !(self.probe_time >= 0.0) || !(self.tail_window >= 0.0) {
            return Err(Error::InvalidInput("probe time and tail window must be nonnegative".into()));
        }
        if let Some(v) = self.v_target {
            if !(v > 0.0) {
                return Err(Error::InvalidInput("Lyapunov target must be positive".into()));
            }
        }
        if let Some(tf) = self.t_final_check {
            if !(tf >= 0.0) {
                return Err(Error::InvalidInput("final-time check must be nonnegative".into()));
            }
        }
        self.estimator_gains.validate()?;
        let bad = [&self.x0, &self.xm0, &self.theta0, &self.kd0]
            .iter()
            .any(|v| v.iter().any(|x| !x.is_finite()));
        if bad {
            return Err(Error::InvalidInput("initial conditions must be finite".into()));
        }
        Ok(())
    }
}

/// One logged sample.
#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub t: f64,
    pub x: Vec<f64>,
    pub xm: Vec<f64>,
    pub e: Vec<f64>,
    pub u: f64,
    pub theta_hat: Vec<f64>,
    pub theta_err: f64,
    pub v: f64,
    pub phi: f64,
    pub c4_margin: f64,
    pub res_g: f64,
    pub res_h: f64,
    pub w1_bound: f64,
}

/// Logged samples plus the header layout.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub n: usize,
    pub m: usize,
    pub rows: Vec<Row>,
}

impl Trajectory {
    pub fn headers(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        let push_block = |h: &mut Vec<String>, name: &str, len: usize| {
            for i in 1..=len {
                h.push(format!("{name}{i}"));
            }
        };
        push_block(&mut h, "x", self.n);
        push_block(&mut h, "xm", self.n);
        push_block(&mut h, "e", self.n);
        h.push("u".to_string());
        push_block(&mut h, "th", self.m);
        for tail in ["theta_err", "v", "phi", "c4_margin", "res_g", "res_h", "w1_bound"] {
            h.push(tail.to_string());
        }
        h
    }

    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{}", self.headers().join(","))?;
        let mut line = String::new();
        for row in &self.rows {
            line.clear();
            push_num(&mut line, row.t);
            for block in [&row.x, &row.xm, &row.e] {
                for v in block {
                    push_num(&mut line, *v);
                }
            }
            push_num(&mut line, row.u);
            for v in &row.theta_hat {
                push_num(&mut line, *v);
            }
            for v in [
                row.theta_err,
                row.v,
                row.phi,
                row.c4_margin,
                row.res_g,
                row.res_h,
                row.w1_bound,
            ] {
                push_num(&mut line, v);
            }
            writeln!(w, "{}", &line[1..])?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Numerical(format!("csv encoding: {e}")))
    }
}

// Shortest round-trip float formatting keeps repeated runs bit-identical.
fn push_num(line: &mut String, v: f64) {
    use std::fmt::Write as _;
    let _ = write!(line, ",{v}");
}

/// Scalar diagnostics of one run.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub steps: usize,
    pub rows_logged: usize,
    pub seed: u64,
    pub t_switch: f64,
    pub settle_tol: f64,
    /// First time the parameter-error norm dropped to the tolerance.
    pub settle_time_theta: Option<f64>,
    pub theta_err_initial: f64,
    pub theta_err_final: f64,
    pub theta_err_max: f64,
    pub theta_err_at_probe: Option<f64>,
    pub theta_err_tail_max: Option<f64>,
    pub e_norm_final: f64,
    pub e_norm_max: f64,
    pub e_norm_at_probe: Option<f64>,
    pub e_norm_tail_max: Option<f64>,
    pub x_norm_max: f64,
    pub u_max: f64,
    pub v_at_switch: Option<f64>,
    pub v_final: Option<f64>,
    /// Largest one-step increase of V across the indirect phase.
    pub max_v_step_increase: Option<f64>,
    /// First time V reached the target level, if one was set.
    pub t_v_first_below: Option<f64>,
    /// Last time V exceeded the target level, if one was set.
    pub t_v_last_above: Option<f64>,
    /// Largest V at or after the requested final-time check.
    pub max_v_after_t_final: Option<f64>,
    /// Worst gap between the by-parts filtered derivative and its directly
    /// integrated counterpart.
    pub max_g1_gap: f64,
    /// Worst residuals of the filter identities against the true
    /// parameters; with a disturbance these include the filtered
    /// disturbance term.
    pub max_res_g_true: f64,
    pub max_res_h_true: f64,
    pub res_g_final: f64,
    pub res_h_final: f64,
    pub c4_margin_min: Option<f64>,
    pub excitation: Report,
}

pub struct SimOutput {
    pub trajectory: Trajectory,
    pub summary: Summary,
}

struct Derivator<'a> {
    sc: &'a Scenario,
    lay: Layout,
}

impl Derivator<'_> {
    fn eval(&self, t: f64, s: &DVector<f64>) -> Result<DVector<f64>> {
        let sc = self.sc;
        let lay = self.lay;
        let p = unpack(lay, s);
        let e = &p.x - &p.xm;
        let r = sc.reference_input.eval_scalar(t);
        let d = sc.disturbance.eval(t);

        let kx = match sc.controller.phase(t) {
            Phase::Direct => DMatrix::zeros(1, lay.n),
            Phase::Indirect => {
                let a_hat = unstack_rows(&p.th, lay.n)?;
                gain_from_estimate(&a_hat, sc.reference.a_m(), sc.plant.b())?
            }
        };
        let u = sc.controller.input(t, &p.x, &e, r, &p.kd, &kx)?;

        let xdot = sc.plant.derivative(&p.x, u, &d);
        let phi_mat = regressor(&p.x);
        let g1 = sc.filter.g1(t, &p.x, &sc.x0, &p.h);
        let g = &g1 - &p.g2;

        let mut out = DVector::zeros(lay.len());
        put(&mut out, lay.x(), xdot.as_slice());
        put(&mut out, lay.xm(), sc.reference.derivative(&p.xm, r).as_slice());
        put(&mut out, lay.h(), sc.filter.h_dot(&p.h, &p.x).as_slice());
        let bu = sc.plant.b() * u;
        put(&mut out, lay.g2(), sc.filter.g2_dot(&p.g2, &bu).as_slice());
        put(&mut out, lay.nf(), sc.filter.n_dot(&p.nf, &phi_mat).as_slice());
        put(&mut out, lay.mm(), sc.filter.m_dot(&p.mm, &p.nf).as_slice());
        put(&mut out, lay.hv(), sc.filter.h_vec_dot(&p.hv, &p.nf, &g).as_slice());
        let th_dot = estimator::update(
            &sc.estimator_gains,
            sc.estimator_mode,
            &p.nf,
            &p.mm,
            &g,
            &p.hv,
            &p.th,
        );
        put(&mut out, lay.th(), th_dot.as_slice());
        if sc.controller.phase(t) == Phase::Direct {
            let kd_dot = sc.controller.direct.kd_dot(&p.kd, &p.x, &e, sc.plant.b());
            put(&mut out, lay.kd(), kd_dot.as_slice());
        }
        put(&mut out, lay.gram(), (p.nf.transpose() * &p.nf).as_slice());
        out[lay.w1()] = sc.filter.w1_bound_dot(p.w1, &p.nf, t, sc.disturbance_bound);
        put(&mut out, lay.g1d(), (&xdot - &p.g1d * sc.filter.k()).as_slice());
        Ok(out)
    }
}

/// Integrate the closed loop and collect the trajectory plus summary.
pub fn run(sc: &Scenario) -> Result<SimOutput> {
    sc.validate()?;
    let n = sc.plant.n();
    let lay = Layout::new(n);
    let deriv = Derivator { sc, lay };

    let steps = (sc.t_end / sc.dt).round().max(1.0) as usize;
    let stride = (sc.log_dt / sc.dt).round().max(1.0) as usize;
    let theta_true = sc.plant.theta();
    let mut monitor =
        Monitor::new(sc.excitation_gamma, sc.excitation_q, sc.excitation_window, sc.filter.k())?;

    let mut s = DVector::zeros(lay.len());
    put(&mut s, lay.x(), sc.x0.as_slice());
    put(&mut s, lay.xm(), sc.xm0.as_slice());
    put(&mut s, lay.th(), sc.theta0.as_slice());
    put(&mut s, lay.kd(), sc.kd0.as_slice());

    let mut rows = Vec::with_capacity(steps / stride + 2);
    let mut summary = Summary {
        n,
        dt: sc.dt,
        t_end: sc.t_end,
        steps,
        rows_logged: 0,
        seed: sc.seed,
        t_switch: sc.controller.t_switch,
        settle_tol: sc.settle_tol,
        settle_time_theta: None,
        theta_err_initial: (&sc.theta0 - &theta_true).norm(),
        theta_err_final: 0.0,
        theta_err_max: 0.0,
        theta_err_at_probe: None,
        theta_err_tail_max: None,
        e_norm_final: 0.0,
        e_norm_max: 0.0,
        e_norm_at_probe: None,
        e_norm_tail_max: None,
        x_norm_max: 0.0,
        u_max: 0.0,
        v_at_switch: None,
        v_final: None,
        max_v_step_increase: None,
        t_v_first_below: None,
        t_v_last_above: None,
        max_v_after_t_final: None,
        max_g1_gap: 0.0,
        max_res_g_true: 0.0,
        max_res_h_true: 0.0,
        res_g_final: 0.0,
        res_h_final: 0.0,
        c4_margin_min: None,
        excitation: monitor.report(),
    };

    let tail_start = sc.t_end - sc.tail_window;
    let mut prev_v: Option<f64> = None;

    for i in 0..=steps {
        let t = i as f64 * sc.dt;
        let p = unpack(lay, &s);
        let e = &p.x - &p.xm;
        let e_norm = e.norm();
        let theta_err = (&p.th - &theta_true).norm();
        let x_norm = p.x.norm();

        // Control input as applied at this instant, for logging bounds.
        let kx = match sc.controller.phase(t) {
            Phase::Direct => DMatrix::zeros(1, n),
            Phase::Indirect => {
                gain_from_estimate(&unstack_rows(&p.th, n)?, sc.reference.a_m(), sc.plant.b())?
            }
        };
        let r = sc.reference_input.eval_scalar(t);
        let u = sc.controller.input(t, &p.x, &e, r, &p.kd, &kx)?;

        let g1 = sc.filter.g1(t, &p.x, &sc.x0, &p.h);
        let g = &g1 - &p.g2;
        let g1_gap = (&g1 - &p.g1d).norm();
        let res_g_true = (&g - &p.nf * &theta_true).norm();
        let res_h_true = (&p.hv - &p.mm * &theta_true).norm();
        let (res_g_est, res_h_est) = {
            let (rg, rh) = estimator::residuals(&p.nf, &p.mm, &g, &p.hv, &p.th);
            (rg.norm(), rh.norm())
        };

        summary.theta_err_max = summary.theta_err_max.max(theta_err);
        summary.e_norm_max = summary.e_norm_max.max(e_norm);
        summary.x_norm_max = summary.x_norm_max.max(x_norm);
        summary.u_max = summary.u_max.max(u.abs());
        summary.max_g1_gap = summary.max_g1_gap.max(g1_gap);
        summary.max_res_g_true = summary.max_res_g_true.max(res_g_true);
        summary.max_res_h_true = summary.max_res_h_true.max(res_h_true);
        if summary.settle_time_theta.is_none() && theta_err <= sc.settle_tol {
            summary.settle_time_theta = Some(t);
        }
        if summary.theta_err_at_probe.is_none() && t >= sc.probe_time - 0.5 * sc.dt {
            summary.theta_err_at_probe = Some(theta_err);
            summary.e_norm_at_probe = Some(e_norm);
        }
        if t >= tail_start - 0.5 * sc.dt {
            summary.theta_err_tail_max =
                Some(summary.theta_err_tail_max.map_or(theta_err, |m| m.max(theta_err)));
            summary.e_norm_tail_max =
                Some(summary.e_norm_tail_max.map_or(e_norm, |m| m.max(e_norm)));
        }

        // Lyapunov bookkeeping only matters once the homogeneous law is
        // active.
        let mut v_now = None;
        if sc.controller.phase(t) == Phase::Indirect {
            let v = sc.controller.hom.v(&e)?;
            v_now = Some(v);
            if summary.v_at_switch.is_none() {
                summary.v_at_switch = Some(v);
            }
            if let Some(pv) = prev_v {
                let inc = v - pv;
                summary.max_v_step_increase =
                    Some(summary.max_v_step_increase.map_or(inc, |m| m.max(inc)));
            }
            prev_v = Some(v);
            if let Some(target) = sc.v_target {
                if v <= target && summary.t_v_first_below.is_none() {
                    summary.t_v_first_below = Some(t);
                }
                if v > target {
                    summary.t_v_last_above = Some(t);
                }
            }
            if let Some(tf) = sc.t_final_check {
                if t >= tf {
                    summary.max_v_after_t_final =
                        Some(summary.max_v_after_t_final.map_or(v, |m| m.max(v)));
                }
            }
            summary.v_final = Some(v);
        }

        if i % stride == 0 || i == steps {
            monitor.observe(t, &p.gram, &p.mm);
            let d = sc.disturbance.eval(t);
            let margin = sc.controller.hom.c4_margin(&e, &d)?;
            if margin.is_finite() {
                summary.c4_margin_min =
                    Some(summary.c4_margin_min.map_or(margin, |m| m.min(margin)));
            }
            let v_logged = match v_now {
                Some(v) => v,
                None => sc.controller.hom.v(&e)?,
            };
            rows.push(Row {
                t,
                x: p.x.as_slice().to_vec(),
                xm: p.xm.as_slice().to_vec(),
                e: e.as_slice().to_vec(),
                u,
                theta_hat: p.th.as_slice().to_vec(),
                theta_err,
                v: v_logged,
                phi: sc.controller.hom.norm().phi(&e)?,
                c4_margin: margin,
                res_g: res_g_est,
                res_h: res_h_est,
                w1_bound: p.w1,
            });
        }

        if i == steps {
            summary.theta_err_final = theta_err;
            summary.e_norm_final = e_norm;
            summary.res_g_final = res_g_est;
            summary.res_h_final = res_h_est;
            break;
        }

        // Classic RK4 step.
        let k1 = deriv.eval(t, &s)?;
        let k2 = deriv.eval(t + 0.5 * sc.dt, &(&s + &k1 * (0.5 * sc.dt)))?;
        let k3 = deriv.eval(t + 0.5 * sc.dt, &(&s + &k2 * (0.5 * sc.dt)))?;
        let k4 = deriv.eval(t + sc.dt, &(&s + &k3 * sc.dt))?;
        s += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (sc.dt / 6.0);

        let x_next = s.rows(lay.x(), n).norm();
        if !s.iter().all(|v| v.is_finite()) || x_next > 1e8 {
            return Err(Error::Diverged { t: (i + 1) as f64 * sc.dt, step: i + 1 });
        }
    }

    summary.rows_logged = rows.len();
    summary.excitation = monitor.report();
    Ok(SimOutput { trajectory: Trajectory { n, m: lay.m, rows }, summary })
}
