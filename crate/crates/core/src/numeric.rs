//! Floating-point lane of the verifier.
//!
//! Everything in this module re-derives numbers that the symbolic side has
//! already decided exactly: compiled evaluation against exact evaluation,
//! quadrature averages against closed-form averages, long integrations
//! against conservation laws, and a scaling study that measures the order
//! of the normal-form error directly. Nothing computed here feeds back into
//! a symbolic result; disagreements are reported, never repaired.
//!
//! Two independent integrators are kept on purpose. The adaptive embedded
//! pair is the general workhorse; the fixed-step Gauss stage pair is
//! symmetric and conserves quadratic first integrals, which is what the
//! long-horizon drift budgets actually need. Agreement between the two is
//! itself one of the audited invariants.

use crate::coeff::{rat_int, Rat};
use crate::error::StarkError;
use crate::flows::{self, FlowSpec};
use crate::gens;
use crate::normalform;
use crate::poly::{expect_rat, CompiledPoly, Poly};
use crate::sample::Sampler;
use crate::space::{self, Point};
use crate::xieta::{self, Convention};
use num_traits::{ToPrimitive, Zero};
use std::collections::BTreeMap;

/// Numerical policy, in one place. Every tolerance the floating lane uses
/// is named here so that tests and reports cite the same numbers.
pub mod tol {
    /// The 64-bit value of pi; the only irrational constant this lane needs.
    pub const PI: f64 = std::f64::consts::PI;
    /// Compiled against exact evaluation, quadrature against symbolic
    /// averages, and pullback identities at sampled states.
    pub const ORACLE: f64 = 1e-12;
    /// Residual of a constraint that holds identically before rounding.
    pub const CONSTRAINT: f64 = 1e-15;
    /// Relative drift of the conserved energy over the long horizon.
    pub const ENERGY_DRIFT: f64 = 1e-10;
    /// Absolute excursion of the bilinear invariant over the long horizon.
    pub const XI_DRIFT: f64 = 1e-12;
    /// Return error after one unperturbed period.
    pub const PERIOD_RETURN: f64 = 1e-10;
    /// Forward-then-backward return error of the symmetric integrator.
    pub const REVERSAL: f64 = 1e-9;
    /// Final-state agreement between the two integrators on a shared run.
    pub const CROSS_INTEGRATOR: f64 = 1e-9;
    /// Conservation budget along the reduced twin-sphere flow.
    pub const REDUCED_DRIFT: f64 = 1e-10;
    /// Sphere-radius acceptance for reduced initial data.
    pub const REDUCED_INPUT: f64 = 1e-12;
    /// Deviation-ratio window accepted as second-order scaling under a
    /// halving ladder; the clean theoretical value is 4.
    pub const RATIO_LOW: f64 = 3.2;
    /// Upper end of the accepted ratio window.
    pub const RATIO_HIGH: f64 = 4.8;
    /// Default tolerances of the adaptive pair.
    pub const DOPRI5_TOL: f64 = 1e-13;
    /// Default step of the symmetric method; 2^-7, exact in binary.
    pub const GAUSS4_DT: f64 = 0.0078125;
    /// Contraction cutoff for the implicit stage iteration.
    pub const STAGE_FIX: f64 = 1e-15;
}

/// Physical parameters of a run. `eps` and `beta` enter the oscillator
/// Hamiltonian only through their product; `h` is the oscillator level used
/// by the second stage, `k` the circle level on the reduced side.
#[derive(Clone, Copy, Debug)]
pub struct Params {
    pub eps: f64,
    pub beta: f64,
    pub h: f64,
    pub k: f64,
}

impl Params {
    /// Validated constructor. `eps = 0` is allowed and switches the
    /// perturbation off; negative `eps` and non-positive `h` are not.
    pub fn new(eps: f64, beta: f64, h: f64, k: f64) -> Result<Self, StarkError> {
        if !(eps.is_finite() && beta.is_finite() && h.is_finite() && k.is_finite()) {
            return Err(StarkError::BadLevel("run parameters must be finite".into()));
        }
        if eps < 0.0 {
            return Err(StarkError::BadLevel("eps >= 0 on the physical branch".into()));
        }
        if h <= 0.0 {
            return Err(StarkError::BadLevel("h > 0 on an oscillator level".into()));
        }
        Ok(Params { eps, beta, h, k })
    }

    fn oscillator_bindings(&self) -> [(&'static str, f64); 3] {
        [("h", self.h), ("eps", self.eps), ("beta", self.beta)]
    }

    fn orbit_bindings(&self) -> [(&'static str, f64); 4] {
        [("h", self.h), ("k", self.k), ("eps", self.eps), ("beta", self.beta)]
    }
}

/// Integration method selector.
#[derive(Clone, Copy, Debug)]
pub enum Method {
    /// Adaptive embedded 5(4) pair with a standard controller.
    Dopri5 { rel_tol: f64, abs_tol: f64 },
    /// Fixed-step two-stage Gauss collocation, solved by fixed-point
    /// iteration. Symmetric; conserves quadratic first integrals.
    Gauss4 { dt: f64 },
}

impl Method {
    /// The adaptive pair at the default tolerances.
    pub fn adaptive() -> Method {
        Method::Dopri5 { rel_tol: tol::DOPRI5_TOL, abs_tol: tol::DOPRI5_TOL }
    }

    /// The symmetric method at the default step.
    pub fn symmetric() -> Method {
        Method::Gauss4 { dt: tol::GAUSS4_DT }
    }
}

/// One integration request: method plus horizon. The horizon may be
/// negative; the state is then carried backwards in time.
#[derive(Clone, Copy, Debug)]
pub struct IntegratorConfig {
    pub method: Method,
    pub t_max: f64,
}

/// A numerical trajectory with observables recomputed from the state at
/// every accepted step. Logged series are never integrated, so drift in a
/// conserved quantity measures the integrator and nothing else.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub logs: BTreeMap<&'static str, Vec<f64>>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

impl Trajectory {
    /// A logged series by name; panics on a name that was never logged.
    pub fn log(&self, name: &str) -> &[f64] {
        self.logs
            .get(name)
            .unwrap_or_else(|| panic!("no logged series named {name}"))
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("a trajectory holds at least its initial state")
    }

    /// Largest absolute excursion of a series from its initial value.
    pub fn drift(&self, name: &str) -> f64 {
        let s = self.log(name);
        let first = s.first().copied().unwrap_or(0.0);
        s.iter().fold(0.0, |m, v| m.max((v - first).abs()))
    }

    /// Drift relative to the initial magnitude; absolute when the series
    /// starts at zero.
    pub fn relative_drift(&self, name: &str) -> f64 {
        let first = self.log(name).first().copied().unwrap_or(0.0);
        let scale = if first.abs() > 0.0 { first.abs() } else { 1.0 };
        self.drift(name) / scale
    }

    /// Largest absolute value a series takes along the run.
    pub fn max_abs(&self, name: &str) -> f64 {
        self.log(name).iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Right-hand side assembled from compiled polynomials, one per coordinate.
struct PolyField {
    comps: Vec<CompiledPoly>,
}

impl PolyField {
    fn dim(&self) -> usize {
        self.comps.len()
    }

    fn eval_into(&self, y: &[f64], dy: &mut [f64]) {
        for (d, c) in dy.iter_mut().zip(&self.comps) {
            *d = c.eval(y);
        }
    }
}

/// Canonical equations of a Hamiltonian on (q, p): positions read the
/// momentum gradient, momenta the negated position gradient.
fn canonical_field(ham: &Poly, params: &Params) -> Result<PolyField, StarkError> {
    let minus = rat_int(-1);
    let binds = params.oscillator_bindings();
    let mut comps = Vec::with_capacity(8);
    for i in 0..4 {
        comps.push(ham.derivative(4 + i).compile(&binds)?);
    }
    for i in 0..4 {
        comps.push(ham.derivative(i).scale_rat(&minus).compile(&binds)?);
    }
    Ok(PolyField { comps })
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn abort(t: f64, y: &[f64], why: &str) -> StarkError {
    let state = y.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(", ");
    StarkError::Integration(format!("{why} at t = {t:.9e}; last valid state [{state}]"))
}

#[derive(Default)]
struct RunStats {
    accepted: usize,
    rejected: usize,
}

const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const STEP_BUDGET: usize = 20_000_000;

fn dopri5(
    field: &PolyField,
    y0: &[f64],
    t_end: f64,
    rel: f64,
    abs: f64,
    mut observe: impl FnMut(f64, &[f64]),
) -> Result<(Vec<f64>, RunStats), StarkError> {
    let n = field.dim();
    let mut y = y0.to_vec();
    let mut stats = RunStats::default();
    observe(0.0, &y);
    if t_end == 0.0 {
        return Ok((y, stats));
    }
    let dir = if t_end > 0.0 { 1.0 } else { -1.0 };
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    field.eval_into(&y, &mut k[0]);
    if !all_finite(&k[0]) {
        return Err(abort(0.0, &y, "state left the finite range"));
    }
    let mut t = 0.0_f64;
    let mut h = dir * 1e-3_f64.min(t_end.abs());
    let mut ystage = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut spent = 0usize;
    while (t - t_end) * dir < 0.0 {
        spent += 1;
        if spent > STEP_BUDGET {
            return Err(abort(t, &y, "step budget exhausted"));
        }
        let mut last = false;
        if (t + h - t_end) * dir >= 0.0 {
            h = t_end - t;
            last = true;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += DP_A[s - 1][j] * kj[i];
                }
                ystage[i] = y[i] + h * acc;
            }
            let (done, rest) = k.split_at_mut(s);
            let _ = done;
            field.eval_into(&ystage, &mut rest[0]);
        }
        ynew.copy_from_slice(&ystage);
        let finite = all_finite(&ynew) && k.iter().all(|kk| all_finite(kk));
        let err = if finite {
            let mut err2 = 0.0;
            for i in 0..n {
                let mut e = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    e += DP_E[j] * kj[i];
                }
                e *= h;
                let sc = abs + rel * y[i].abs().max(ynew[i].abs());
                err2 += (e / sc) * (e / sc);
            }
            (err2 / n as f64).sqrt()
        } else {
            f64::INFINITY
        };
        if err <= 1.0 {
            t = if last { t_end } else { t + h };
            y.copy_from_slice(&ynew);
            k.swap(0, 6);
            stats.accepted += 1;
            observe(t, &y);
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            stats.rejected += 1;
            h *= if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.2, 0.9) } else { 0.5 };
            if h.abs() < 1e-14 * t.abs().max(1.0) {
                return Err(abort(t, &y, "step size collapsed"));
            }
        }
    }
    Ok((y, stats))
}

fn gauss4(
    field: &PolyField,
    y0: &[f64],
    t_end: f64,
    dt: f64,
    mut observe: impl FnMut(f64, &[f64]),
) -> Result<(Vec<f64>, RunStats), StarkError> {
    let n = field.dim();
    let mut y = y0.to_vec();
    let mut stats = RunStats::default();
    observe(0.0, &y);
    if t_end == 0.0 {
        return Ok((y, stats));
    }
    let dir = if t_end > 0.0 { 1.0 } else { -1.0 };
    let total = t_end.abs();
    let n_full = (total / dt).floor() as usize;
    if n_full > STEP_BUDGET {
        return Err(StarkError::Integration("step budget exhausted before starting".into()));
    }
    let rem = total - n_full as f64 * dt;
    let s3 = 3.0_f64.sqrt();
    let a = [[0.25, 0.25 - s3 / 6.0], [0.25 + s3 / 6.0, 0.25]];
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut f1 = vec![0.0; n];
    let mut f2 = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut step = |y: &mut Vec<f64>, h: f64, t_now: f64| -> Result<(), StarkError> {
        field.eval_into(y, &mut k1);
        if !all_finite(&k1) {
            return Err(abort(t_now, y, "state left the finite range"));
        }
        k2.copy_from_slice(&k1);
        let scale = 1.0 + k1.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let mut converged = false;
        for _ in 0..200 {
            for i in 0..n {
                u[i] = y[i] + h * (a[0][0] * k1[i] + a[0][1] * k2[i]);
                v[i] = y[i] + h * (a[1][0] * k1[i] + a[1][1] * k2[i]);
            }
            field.eval_into(&u, &mut f1);
            field.eval_into(&v, &mut f2);
            if !(all_finite(&f1) && all_finite(&f2)) {
                return Err(abort(t_now, y, "state left the finite range"));
            }
            let mut delta = 0.0_f64;
            for i in 0..n {
                delta = delta.max((f1[i] - k1[i]).abs()).max((f2[i] - k2[i]).abs());
            }
            k1.copy_from_slice(&f1);
            k2.copy_from_slice(&f2);
            if delta <= tol::STAGE_FIX * scale {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(abort(t_now, y, "implicit stages did not contract"));
        }
        for i in 0..n {
            y[i] += h * 0.5 * (k1[i] + k2[i]);
        }
        if !all_finite(y) {
            return Err(abort(t_now, y, "state left the finite range"));
        }
        Ok(())
    };
    for s in 0..n_full {
        let t_now = dir * dt * s as f64;
        step(&mut y, dir * dt, t_now)?;
        stats.accepted += 1;
        observe(dir * dt * (s + 1) as f64, &y);
    }
    if rem > dt * 1e-12 {
        step(&mut y, dir * rem, dir * dt * n_full as f64)?;
        stats.accepted += 1;
        observe(t_end, &y);
    }
    Ok((y, stats))
}

fn integrate_field(
    field: &PolyField,
    y0: &[f64],
    t_end: f64,
    method: &Method,
    observe: impl FnMut(f64, &[f64]),
) -> Result<(Vec<f64>, RunStats), StarkError> {
    if !t_end.is_finite() {
        return Err(StarkError::Integration("the horizon must be finite".into()));
    }
    match *method {
        Method::Dopri5 { rel_tol, abs_tol } => {
            if !(rel_tol > 0.0 && abs_tol > 0.0 && rel_tol.is_finite() && abs_tol.is_finite()) {
                return Err(StarkError::Integration("adaptive tolerances must be positive".into()));
            }
            dopri5(field, y0, t_end, rel_tol, abs_tol, observe)
        }
        Method::Gauss4 { dt } => {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(StarkError::Integration("the fixed step must be positive".into()));
            }
            gauss4(field, y0, t_end, dt, observe)
        }
    }
}

/// Advance a state without logging; used by the scaling study.
fn advance(
    field: &PolyField,
    y: &[f64],
    span: f64,
    method: &Method,
) -> Result<Vec<f64>, StarkError> {
    let (yf, _) = integrate_field(field, y, span, method, |_, _| {})?;
    Ok(yf)
}

fn run_with_logs(
    field: &PolyField,
    y0: &[f64],
    config: &IntegratorConfig,
    obs: &[(&'static str, CompiledPoly)],
) -> Result<Trajectory, StarkError> {
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        logs: obs.iter().map(|(n, _)| (*n, Vec::new())).collect(),
        steps_accepted: 0,
        steps_rejected: 0,
    };
    let (_, stats) = integrate_field(field, y0, config.t_max, &config.method, |t, y| {
        traj.times.push(t);
        traj.states.push(y.to_vec());
        for (name, c) in obs {
            traj.logs.get_mut(name).expect("log series").push(c.eval(y));
        }
    })?;
    traj.steps_accepted = stats.accepted;
    traj.steps_rejected = stats.rejected;
    Ok(traj)
}

/// Evaluate a polynomial at a floating state with the run parameters bound.
/// Works for the oscillator and invariant spaces, whose parameters are
/// (h, eps, beta); the state carries the main variables in space order.
pub fn eval(f: &Poly, state: &[f64], params: &Params) -> Result<f64, StarkError> {
    let c = f.compile(&params.oscillator_bindings())?;
    if state.len() != c.n_main() {
        return Err(StarkError::Integration(format!(
            "state has {} coordinates, the space wants {}",
            state.len(),
            c.n_main()
        )));
    }
    Ok(c.eval(state))
}

/// The observables recomputed along full trajectories.
fn oscillator_observables(params: &Params) -> Result<Vec<(&'static str, CompiledPoly)>, StarkError> {
    let binds = params.oscillator_bindings();
    let t = gens::table();
    let mut out = vec![("H", gens::hamiltonian_canonical().compile(&binds)?)];
    for name in ["H2", "Xi", "K3", "L3", "U1", "U2", "U3", "U4", "V1", "V2", "V3", "V4"] {
        out.push((name, t.get(name).compile(&binds)?));
    }
    Ok(out)
}

/// Integrate the full oscillator flow from an eight-dimensional state,
/// logging the energy, the bilinear constraint and the twelve conserved
/// vector components recomputed from the state at every accepted step.
pub fn integrate_full(
    x0: &[f64],
    params: &Params,
    config: &IntegratorConfig,
) -> Result<Trajectory, StarkError> {
    if x0.len() != 8 {
        return Err(StarkError::Integration("a full state has eight coordinates".into()));
    }
    let field = canonical_field(&gens::hamiltonian_canonical(), params)?;
    let obs = oscillator_observables(params)?;
    run_with_logs(&field, x0, config, &obs)
}

/// Final-state distance between the two integrators on a shared run; part
/// of the numerical design contract, not a physical observable.
pub fn integrator_agreement(x0: &[f64], params: &Params, t_max: f64) -> Result<f64, StarkError> {
    let a = integrate_full(x0, params, &IntegratorConfig { method: Method::adaptive(), t_max })?;
    let b = integrate_full(x0, params, &IntegratorConfig { method: Method::symmetric(), t_max })?;
    Ok(sup_dist(a.last_state(), b.last_state()))
}

/// Place a reduced state on the twin spheres from the vertical splitting:
/// the circle level and sigma6 fix the third components, the phases fix the
/// horizontal circles. Radii come from `params.h`.
pub fn reduced_state(
    params: &Params,
    sigma6: f64,
    phase_xi: f64,
    phase_eta: f64,
) -> Result<([f64; 3], [f64; 3]), StarkError> {
    let (h, k) = (params.h, params.k);
    let xi3 = k + sigma6;
    let eta3 = k - sigma6;
    if xi3.abs() > h || eta3.abs() > h {
        return Err(StarkError::BadLevel(format!(
            "vertical data leave the sphere: |k +- sigma6| must stay within h = {h}"
        )));
    }
    let rx = (h * h - xi3 * xi3).sqrt();
    let re = (h * h - eta3 * eta3).sqrt();
    Ok((
        [rx * phase_xi.cos(), rx * phase_xi.sin(), xi3],
        [re * phase_eta.cos(), re * phase_eta.sin(), eta3],
    ))
}

/// Integrate the reduced twin-sphere flow of the second-stage Hamiltonian.
/// Initial data must sit on both spheres of radius `params.h`. Logged
/// series: the reduced energy, the six orbit-chart functions, both sphere
/// Casimirs and the residual of the defining relation of the reduced space.
pub fn integrate_reduced(
    xi0: &[f64; 3],
    eta0: &[f64; 3],
    params: &Params,
    config: &IntegratorConfig,
) -> Result<Trajectory, StarkError> {
    let h = params.h;
    let rx = (xi0[0] * xi0[0] + xi0[1] * xi0[1] + xi0[2] * xi0[2]).sqrt();
    let re = (eta0[0] * eta0[0] + eta0[1] * eta0[1] + eta0[2] * eta0[2]).sqrt();
    if (rx - h).abs() > tol::REDUCED_INPUT || (re - h).abs() > tol::REDUCED_INPUT {
        return Err(StarkError::BadLevel(format!(
            "reduced initial data must sit on the twin spheres: |xi| = {rx:.17e}, |eta| = {re:.17e}, h = {h:.17e}"
        )));
    }
    let binds = params.orbit_bindings();
    let ham = xieta::to_xi_eta(&normalform::second_stage().on_sphere, Convention::FlowDisplay)?;
    let structure = xieta::xieta_structure();
    let sp = space::xieta();
    let mut comps = Vec::with_capacity(6);
    for i in 0..sp.n_main() {
        let var = Poly::var(sp.clone(), sp.name(i))?;
        comps.push(structure.bracket(&var, &ham).compile(&binds)?);
    }
    let field = PolyField { comps };

    let chart = xieta::sigma_chart();
    let hh = Poly::var(sp.clone(), "h")?;
    let cap = |w: &Poly| hh.pow(2).sub(&w.pow(2));
    let relation = chart
        .image("sigma3")
        .pow(2)
        .add(&chart.image("sigma4").pow(2))
        .sub(&cap(&Poly::var(sp.clone(), "xi3")?).mul(&cap(&Poly::var(sp.clone(), "eta3")?)));
    let casimirs = xieta::casimirs();
    let mut obs = vec![("Hred", ham.compile(&binds)?)];
    for (name, img) in
        ["sigma1", "sigma2", "sigma3", "sigma4", "sigma5", "sigma6"].iter().zip(chart.images())
    {
        obs.push((name, img.compile(&binds)?));
    }
    obs.push(("xi_sphere", casimirs[0].compile(&binds)?));
    obs.push(("eta_sphere", casimirs[1].compile(&binds)?));
    obs.push(("relation", relation.compile(&binds)?));

    let y0 = [xi0[0], xi0[1], xi0[2], eta0[0], eta0[1], eta0[2]];
    run_with_logs(&field, &y0, config, &obs)
}

/// Quadrature average of an observable along a closed circle flow, next to
/// the exact symbolic average at the same point.
#[derive(Clone, Copy, Debug)]
pub struct AverageCheck {
    pub numeric: f64,
    pub symbolic: f64,
}

impl AverageCheck {
    pub fn error(&self) -> f64 {
        (self.numeric - self.symbolic).abs()
    }
}

const GL_NODES: [f64; 5] = [
    -0.906179845938664,
    -0.5384693101056831,
    0.0,
    0.5384693101056831,
    0.906179845938664,
];

const GL_WEIGHTS: [f64; 5] = [
    0.23692688505618908,
    0.47862867049936647,
    0.5688888888888889,
    0.47862867049936647,
    0.23692688505618908,
];

const GL_PANELS: usize = 32;

/// Average an observable over one period of a circle flow by composite
/// Gauss quadrature, evaluating the flow in closed form (plane rotations),
/// and compare against the exact average evaluated at the same point. The
/// only numerical content is the quadrature itself.
pub fn numeric_average_oracle(
    flow: &FlowSpec,
    f: &Poly,
    pt: &Point,
) -> Result<AverageCheck, StarkError> {
    let sp = f.space();
    if sp.id != flow.space().id || sp.id != pt.space.id {
        return Err(StarkError::Verification(
            "the observable, the flow and the point must share a space".into(),
        ));
    }
    let n_main = sp.n_main();
    let full = pt.to_f64();
    let binds: Vec<(&str, f64)> =
        (n_main..sp.dim()).map(|i| (sp.name(i), full[i])).collect();
    let compiled = f.compile(&binds)?;
    let base = &full[..n_main];
    let omega = flow
        .omega()
        .to_f64()
        .ok_or_else(|| StarkError::Verification("frequency does not fit in f64".into()))?;
    let period = 2.0 * tol::PI / omega;
    let mut state = base.to_vec();
    let mut acc = 0.0;
    let panel = period / GL_PANELS as f64;
    for p in 0..GL_PANELS {
        let mid = (p as f64 + 0.5) * panel;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let t = mid + 0.5 * panel * x;
            let (s, c) = (omega * t).sin_cos();
            state.copy_from_slice(base);
            for pair in flow.pairs() {
                let (a, b) = (base[pair.a], base[pair.b]);
                let s = if pair.sign > 0 { s } else { -s };
                state[pair.a] = a * c + b * s;
                state[pair.b] = -a * s + b * c;
            }
            acc += 0.5 * w * compiled.eval(&state);
        }
    }
    let numeric = acc / GL_PANELS as f64;
    let symbolic = flow.average(f).eval_exact(pt)?.to_f64();
    Ok(AverageCheck { numeric, symbolic })
}

/// The second-order normal form assembled from the certified first-stage
/// artifacts: the quadratic term re-derives the averaged bracket directly,
/// so a sign slip in the staged audit could not leak into the predictor.
pub fn second_normal_form() -> Poly {
    let stage = normalform::first_stage();
    let structure = gens::invariant_structure();
    let flow = flows::y_h2();
    let half = crate::coeff::rat(1, 2);
    let c2 = flow
        .average(&structure.bracket(&stage.perturbation.add(&stage.mean), &stage.generator))
        .scale_rat(&half);
    let eps = Poly::var(space::invariant(), "eps").expect("eps parameter");
    gens::inv_var("H2")
        .add(&stage.mean.mul(&eps))
        .add(&c2.mul(&eps.pow(2)))
}

/// Outcome of the normal-form scaling study.
#[derive(Clone, Debug)]
pub struct ScalingStudy {
    pub slow_time: f64,
    pub eps_ladder: Vec<f64>,
    pub horizons: Vec<f64>,
    /// Largest deviation of the slow observables over the window, per rung.
    pub deviations: Vec<f64>,
    /// Deviation ratios of consecutive strictly positive rungs.
    pub ratios: Vec<f64>,
}

/// Sample spacing of the scaling study in fast time. The deviation carries
/// a bounded oscillation at the fast frequency next to its secular part, so
/// the grid must resolve the fast period or the sup-norm becomes a matter
/// of phase luck.
const SCALING_SPACING: f64 = 0.4;
const SCALING_MAX_SAMPLES: usize = 50_000;

/// Measure how well the second-order normal form predicts the slow motion.
///
/// For each rung the true flow is sampled over the window s = eps * t in
/// [0, slow_time]; the prediction conjugates the normal-form flow by the
/// first-stage transform (the time-eps flow of the generator). Deviations
/// are taken on the two slow observables that are well defined on the orbit
/// space. Against a halving ladder the deviation is quartered per rung; the
/// transform is first order, and what remains after it is second order,
/// part secular from the truncated third order, part bounded oscillation.
pub fn compare_normalform(
    eps_ladder: &[f64],
    slow_time: f64,
    beta: f64,
    x0: &[f64],
    method: &Method,
) -> Result<ScalingStudy, StarkError> {
    if eps_ladder.len() < 2 {
        return Err(StarkError::Verification("a scaling ladder needs at least two rungs".into()));
    }
    if eps_ladder.windows(2).any(|w| !(w[1] < w[0])) || eps_ladder.iter().any(|e| !(*e >= 0.0)) {
        return Err(StarkError::Verification(
            "ladder rungs must be nonnegative and strictly decreasing".into(),
        ));
    }
    if !(slow_time > 0.0 && slow_time.is_finite()) {
        return Err(StarkError::Verification("the slow window must be positive".into()));
    }
    if x0.len() != 8 {
        return Err(StarkError::Integration("a full state has eight coordinates".into()));
    }
    let table = gens::table();
    let h_canon = gens::hamiltonian_canonical();
    let nf2 = table.embed(&second_normal_form());
    let gen_canon = table.embed(&normalform::first_stage().generator);
    let slow: Vec<CompiledPoly> = ["K3", "L3"]
        .iter()
        .map(|n| table.get(n).compile(&[("h", 0.0), ("eps", 0.0), ("beta", 0.0)]))
        .collect::<Result<_, _>>()?;
    let transform_method = Method::adaptive();

    let mut horizons = Vec::new();
    let mut deviations = Vec::new();
    for &eps in eps_ladder {
        let params = Params::new(eps, beta, 1.0, 0.0)?;
        let horizon = if eps > 0.0 { slow_time / eps } else { slow_time };
        let truth_field = canonical_field(&h_canon, &params)?;
        let nf_field = canonical_field(&nf2, &params)?;
        let gen_field = canonical_field(&gen_canon, &params)?;
        let samples = ((horizon / SCALING_SPACING).ceil() as usize).clamp(24, SCALING_MAX_SAMPLES);
        let span = horizon / samples as f64;
        let mut truth = x0.to_vec();
        let mut nf = if eps > 0.0 { advance(&gen_field, x0, -eps, &transform_method)? } else { x0.to_vec() };
        let mut dev = 0.0_f64;
        for _ in 0..samples {
            truth = advance(&truth_field, &truth, span, method)?;
            nf = advance(&nf_field, &nf, span, method)?;
            let predicted =
                if eps > 0.0 { advance(&gen_field, &nf, eps, &transform_method)? } else { nf.clone() };
            for c in &slow {
                dev = dev.max((c.eval(&predicted) - c.eval(&truth)).abs());
            }
        }
        horizons.push(horizon);
        deviations.push(dev);
    }
    let mut ratios = Vec::new();
    for (w, d) in eps_ladder.windows(2).zip(deviations.windows(2)) {
        if w[1] > 0.0 && d[1] > 0.0 {
            ratios.push(d[0] / d[1]);
        }
    }
    Ok(ScalingStudy {
        slow_time,
        eps_ladder: eps_ladder.to_vec(),
        horizons,
        deviations,
        ratios,
    })
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(v: &[f64; 3]) -> f64 {
    dot3(v, v).sqrt()
}

/// Kepler energy with a vertical linear field.
pub fn kepler_energy(x: &[f64; 3], y: &[f64; 3], field: f64) -> f64 {
    0.5 * dot3(y, y) - 1.0 / norm3(x) + field * x[2]
}

/// Lifted Hamiltonian on the Kepler side, tight grouping: the square of the
/// position norm never appears.
fn lift_tight(x: &[f64; 3], y: &[f64; 3], k: f64, field: f64) -> f64 {
    let r = norm3(x);
    (r * dot3(y, y) + k * k * r) / (2.0 * k) + field * x[2] * r / k
}

/// Lifted Hamiltonian, loose grouping: the norm multiplies the whole bracket
/// and a squared norm appears. Kept for the audit of the discrepancy.
fn lift_loose(x: &[f64; 3], y: &[f64; 3], k: f64, field: f64) -> f64 {
    let r = norm3(x);
    r * (dot3(y, y) + k * k * r) / (2.0 * k) + field * x[2] * r / k
}

fn regularized_tight(x: &[f64; 3], y: &[f64; 3], field: f64) -> f64 {
    let r = norm3(x);
    0.5 * r * (dot3(y, y) + 1.0) + field * x[2] * r
}

fn regularized_loose(x: &[f64; 3], y: &[f64; 3], field: f64) -> f64 {
    let r = norm3(x);
    0.5 * r * (dot3(y, y) + r) + field * x[2] * r
}

/// A fibre point of the regularizing map over (x, y), from the better
/// conditioned of the two polar charts. The momentum is carried by the
/// transpose frame, which lands on the zero set of the bilinear constraint
/// automatically.
pub fn ks_preimage(x: &[f64; 3], y: &[f64; 3]) -> Result<[f64; 8], StarkError> {
    let r = norm3(x);
    if r == 0.0 {
        return Err(StarkError::BadLevel("the collision set has no preimage".into()));
    }
    let q = if x[2] >= 0.0 {
        let a = ((r + x[2]) / 2.0).sqrt();
        [a, 0.0, x[0] / (2.0 * a), x[1] / (2.0 * a)]
    } else {
        let b = ((r - x[2]) / 2.0).sqrt();
        [x[0] / (2.0 * b), -x[1] / (2.0 * b), b, 0.0]
    };
    let rows = [
        [q[2], q[3], q[0], q[1]],
        [q[3], -q[2], -q[1], q[0]],
        [q[0], q[1], -q[2], -q[3]],
    ];
    let mut p = [0.0; 4];
    for (row, yj) in rows.iter().zip(y) {
        for i in 0..4 {
            p[i] += row[i] * yj;
        }
    }
    Ok([q[0], q[1], q[2], q[3], p[0], p[1], p[2], p[3]])
}

/// A Kepler-side state with its level and field strength.
#[derive(Clone, Copy, Debug)]
pub struct KeplerInput {
    pub x: [f64; 3],
    pub y: [f64; 3],
    pub k: f64,
    pub field: f64,
}

impl KeplerInput {
    /// Scale the speed along the given direction so the energy sits exactly
    /// on the level -k^2/2.
    pub fn on_level(
        x: [f64; 3],
        y_dir: [f64; 3],
        k: f64,
        field: f64,
    ) -> Result<Self, StarkError> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(StarkError::BadLevel("k > 0 fixes the branch of the level".into()));
        }
        let r = norm3(&x);
        if r == 0.0 {
            return Err(StarkError::BadLevel("the collision set carries no state".into()));
        }
        let need = 2.0 * (1.0 / r - field * x[2] - 0.5 * k * k);
        if need < 0.0 {
            return Err(StarkError::BadLevel(
                "the prescribed level has no real speed at this position".into(),
            ));
        }
        let d = dot3(&y_dir, &y_dir);
        let y = if need == 0.0 {
            [0.0; 3]
        } else {
            if d == 0.0 {
                return Err(StarkError::BadLevel("a nonzero direction is needed off the zero-speed set".into()));
            }
            let s = (need / d).sqrt();
            [y_dir[0] * s, y_dir[1] * s, y_dir[2] * s]
        };
        Ok(KeplerInput { x, y, k, field })
    }
}

/// One audited identity of the regularization chain.
#[derive(Clone, Debug)]
pub struct PreregRow {
    pub label: &'static str,
    pub computed: f64,
    pub expected: f64,
    pub tol: f64,
}

impl PreregRow {
    pub fn error(&self) -> f64 {
        (self.computed - self.expected).abs()
    }

    pub fn within(&self) -> bool {
        self.error() <= self.tol
    }
}

/// Numerical audit of the chain from the Kepler side to the oscillator
/// side: level lift, normalization to the unit branch, regularizing
/// preimage, and the value identity on the constraint set.
#[derive(Clone, Debug)]
pub struct PreregReport {
    pub input: KeplerInput,
    pub rows: Vec<PreregRow>,
    /// Whether the loose grouping happens to agree at this state; it does
    /// exactly when the normalized position norm is one.
    pub loose_grouping_agrees: bool,
}

impl PreregReport {
    pub fn all_within(&self) -> bool {
        self.rows.iter().all(PreregRow::within)
    }
}

/// Run the regularization chain on a Kepler state sitting on the level
/// -k^2/2. The input level is a precondition; everything downstream is a
/// report row. The loose grouping of the lifted Hamiltonian is audited
/// against its closed-form defect rather than asserted away.
pub fn verify_preregularization(input: &KeplerInput) -> Result<PreregReport, StarkError> {
    let KeplerInput { x, y, k, field } = *input;
    let r = norm3(&x);
    if r == 0.0 {
        return Err(StarkError::BadLevel("the collision set carries no state".into()));
    }
    let level = kepler_energy(&x, &y, field);
    if (level + 0.5 * k * k).abs() > tol::ORACLE * k.mul_add(k, 1.0) {
        return Err(StarkError::BadLevel(format!(
            "input misses the Kepler level: K = {level:.17e}, wanted {:.17e}",
            -0.5 * k * k
        )));
    }
    let mut rows = vec![PreregRow {
        label: "kepler level",
        computed: level,
        expected: -0.5 * k * k,
        tol: tol::ORACLE,
    }];
    rows.push(PreregRow {
        label: "lifted value",
        computed: lift_tight(&x, &y, k, field),
        expected: 1.0 / k,
        tol: tol::ORACLE,
    });
    rows.push(PreregRow {
        label: "loose lift defect",
        computed: lift_loose(&x, &y, k, field) - lift_tight(&x, &y, k, field),
        expected: 0.5 * k * r * (r - 1.0),
        tol: tol::ORACLE,
    });

    // normalize to the unit branch: scale positions by k^2, speeds by 1/k,
    // the field strength by 1/k^4
    let xs = [k * k * x[0], k * k * x[1], k * k * x[2]];
    let ys = [y[0] / k, y[1] / k, y[2] / k];
    let fs = field / (k * k * k * k);
    let rs = norm3(&xs);
    rows.push(PreregRow {
        label: "normalized level",
        computed: kepler_energy(&xs, &ys, fs),
        expected: -0.5,
        tol: tol::ORACLE,
    });
    let reg = regularized_tight(&xs, &ys, fs);
    rows.push(PreregRow { label: "regularized value", computed: reg, expected: 1.0, tol: tol::ORACLE });

    let state = ks_preimage(&xs, &ys)?;
    let params = Params::new(fs.max(0.0), 1.0, 1.0, 0.0)?;
    rows.push(PreregRow {
        label: "preimage constraint",
        computed: eval(&gens::table().get("Xi").clone(), &state, &params)?,
        expected: 0.0,
        tol: tol::CONSTRAINT,
    });
    rows.push(PreregRow {
        label: "preimage radius",
        computed: eval(&gens::qq_norm(), &state, &params)?,
        expected: rs,
        tol: tol::ORACLE,
    });
    let back = gens::cartesian_x();
    let mut worst = 0.0_f64;
    for (poly, want) in back.iter().zip(&xs) {
        worst = worst.max((eval(poly, &state, &params)? - want).abs());
    }
    rows.push(PreregRow { label: "preimage position", computed: worst, expected: 0.0, tol: tol::ORACLE });
    let nums = gens::cartesian_y_numerators();
    let qn = eval(&gens::qq_norm(), &state, &params)?;
    let mut worst = 0.0_f64;
    for (poly, want) in nums.iter().zip(&ys) {
        worst = worst.max((eval(poly, &state, &params)? / qn - want).abs());
    }
    rows.push(PreregRow { label: "preimage velocity", computed: worst, expected: 0.0, tol: tol::ORACLE });

    let osc = eval(&gens::hamiltonian_canonical(), &state, &params)?;
    rows.push(PreregRow { label: "oscillator pullback", computed: osc, expected: reg, tol: tol::ORACLE });
    rows.push(PreregRow { label: "oscillator level", computed: osc, expected: 1.0, tol: tol::ORACLE });

    let loose = regularized_loose(&xs, &ys, fs);
    rows.push(PreregRow {
        label: "loose grouping defect",
        computed: loose - reg,
        expected: 0.5 * rs * (rs - 1.0),
        tol: tol::ORACLE,
    });
    Ok(PreregReport { input: *input, rows, loose_grouping_agrees: (loose - reg).abs() <= tol::ORACLE })
}

/// Exact witness that the two groupings of the regularized Hamiltonian are
/// different functions: away from the unit sphere they differ by
/// |x| (|x| - 1) / 2, and only the tight grouping matches the oscillator
/// Hamiltonian on the constraint set.
#[derive(Clone, Debug)]
pub struct GroupingWitness {
    pub q: [Rat; 4],
    pub p: [Rat; 4],
    pub x: [Rat; 3],
    pub y: [Rat; 3],
    pub eps: Rat,
    pub beta: Rat,
    /// The oscillator Hamiltonian, evaluated exactly at (q, p).
    pub oscillator: Rat,
    /// The tight grouping at (x, y).
    pub tight: Rat,
    /// The loose grouping at (x, y).
    pub loose: Rat,
}

/// The frozen counterexample state: q = (1, 1, 0, 0), p = 0, whose image
/// has position norm two. All values are exact rationals.
pub fn preregularization_counterexample() -> GroupingWitness {
    let sp = space::canonical();
    let mut vals = vec![Rat::zero(); sp.dim()];
    vals[0] = rat_int(1);
    vals[1] = rat_int(1);
    let eps = crate::coeff::rat(1, 8);
    let beta = rat_int(1);
    vals[sp.index_of("h").expect("h parameter")] = rat_int(1);
    vals[sp.index_of("eps").expect("eps parameter")] = eps.clone();
    vals[sp.index_of("beta").expect("beta parameter")] = beta.clone();
    let pt = Point::new(sp, vals.clone());

    let xv: Vec<Rat> = gens::cartesian_x()
        .iter()
        .map(|p| expect_rat(&p.eval_exact(&pt).expect("exact image")).clone())
        .collect();
    assert_eq!(xv, vec![rat_int(0), rat_int(0), rat_int(2)], "frozen witness moved");
    let radius = rat_int(2);
    let y = [Rat::zero(), Rat::zero(), Rat::zero()];
    let half = crate::coeff::rat(1, 2);
    let speed_sq = Rat::zero();
    let fxr = &eps * &beta * &xv[2] * &radius;
    let tight = &half * &radius * (&speed_sq + rat_int(1)) + &fxr;
    let loose = &half * &radius * (&speed_sq + &radius) + &fxr;
    let oscillator = expect_rat(
        &gens::hamiltonian_canonical().eval_exact(&pt).expect("exact oscillator value"),
    )
    .clone();
    GroupingWitness {
        q: [vals[0].clone(), vals[1].clone(), vals[2].clone(), vals[3].clone()],
        p: [vals[4].clone(), vals[5].clone(), vals[6].clone(), vals[7].clone()],
        x: [xv[0].clone(), xv[1].clone(), xv[2].clone()],
        y,
        eps,
        beta,
        oscillator,
        tight,
        loose,
    }
}

/// Push an exact point of the constraint variety to floats. The constraint
/// holds identically before rounding, so its floating residual measures the
/// representation, not the sampler.
pub fn sampled_state(seed: u64) -> ([f64; 8], Point) {
    let mut s = Sampler::new(seed);
    let pt = s.constraint_point();
    let v = pt.to_f64();
    let mut state = [0.0; 8];
    state.copy_from_slice(&v[..8]);
    (state, pt)
}

/// Like [`sampled_state`], but normalized to the oscillator level h. Long
/// integrations use these: the perturbing potential is indefinite, so a
/// state of uncontrolled amplitude can sit outside the stability basin and
/// escape in finite time, which is physics, not an integrator defect.
pub fn sampled_level_state(seed: u64, h: &Rat) -> Result<([f64; 8], Point), StarkError> {
    let mut s = Sampler::new(seed);
    let pt = s.level_point(h)?;
    let v = pt.to_f64();
    let mut state = [0.0; 8];
    state.copy_from_slice(&v[..8]);
    Ok((state, pt))
}
