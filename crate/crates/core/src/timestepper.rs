//! Time integration of
//! `u_t = div(d1 grad u - chi u grad ln(v + c))`, `v_t = d2 Lap v - alpha v + beta u`
//! with no-flux boundaries.
//!
//! The cell flux is the exponentially fitted (Scharfetter-Gummel) form of the
//! upwind flux, `J = d1 e^psi grad(u e^-psi)` with `psi = (chi/d1) ln(v + c)`.
//! Each step solves for `u` implicitly with `v` lagged, using the Slotboom
//! variable `s = u e^-psi` which makes the system symmetric positive definite,
//! and then applies the fluxes face by face so that `int u` is conserved to
//! rounding. The `v` step is linearly implicit in diffusion and decay.

use crate::error::{Error, Result};
use crate::grid::{integrate, Field, Grid};
use crate::linalg::{conjugate_gradient, SpdSolver, StencilMatrix};
use crate::scalar::ModelParams;

/// `x / (e^x - 1)`, the Bernoulli function.
pub fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 - 0.5 * x + x * x / 12.0
    } else {
        x / x.exp_m1()
    }
}

/// `e^psi = (v + c)^p` per cell.
fn boltzmann(v: &Field, params: &ModelParams) -> Vec<f64> {
    let (c, p) = (params.c(), params.p());
    v.values().iter().map(|&x| (x + c).powf(p)).collect()
}

/// Symmetric face conductances `k_f = B(psi_a - psi_b) e^psi_a`, scaled by `d1 / h^2`.
fn face_conductances(grid: &Grid, e_psi: &[f64], params: &ModelParams) -> StencilMatrix {
    let mut m = StencilMatrix::zeros(*grid);
    let ax = params.d1() / (grid.hx() * grid.hx());
    let ay = params.d1() / (grid.hy() * grid.hy());
    let psi: Vec<f64> = e_psi.iter().map(|e| e.ln()).collect();
    let (xf, yf) = (&mut m.x_faces, &mut m.y_faces);
    StencilMatrix::for_each_face(grid, |f, a, b, is_x| {
        let k = bernoulli(psi[a] - psi[b]) * e_psi[a];
        if is_x {
            xf[f] = ax * k;
        } else {
            yf[f] = ay * k;
        }
    });
    m
}

/// Discrete `div(d1 grad u - chi u grad ln(v + c))` with the fitted flux.
pub fn taxis_divergence(u: &Field, v: &Field, params: &ModelParams) -> Field {
    let grid = *u.grid();
    let e_psi = boltzmann(v, params);
    let cond = face_conductances(&grid, &e_psi, params);
    let s: Vec<f64> = u.values().iter().zip(&e_psi).map(|(u, e)| u / e).collect();
    let mut out = vec![0.0; s.len()];
    // `cond` with a zero diagonal is the graph Laplacian; the divergence is its negative.
    cond.apply(&s, &mut out);
    out.iter_mut().for_each(|x| *x = -*x);
    Field::from_values(grid, out).unwrap_or_else(|_| Field::constant(grid, f64::NAN))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeConfig {
    /// Upper bound on the step.
    pub dt_max: f64,
    /// Scales the per-step relative change target (0.1 at 1.0).
    pub cfl_safety: f64,
    /// Steady when `max(|du|/|u|, |dv|/|v|) / dt` drops below this.
    pub steady_tol: f64,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            dt_max: 1.0,
            cfl_safety: 0.5,
            steady_tol: 1e-7,
            t_end: 100.0,
            snapshot_times: Vec::new(),
        }
    }
}

/// Relative change per step that the controller aims for at `cfl_safety = 1`.
pub const CHANGE_TARGET: f64 = 0.1;

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::Validation(format!("cfl_safety must lie in (0, 1], got {}", self.cfl_safety)));
        }
        if !(self.steady_tol > 0.0) {
            return Err(Error::Validation(format!("steady_tol must be positive, got {}", self.steady_tol)));
        }
        if !(self.dt_max > 0.0) {
            return Err(Error::Validation(format!("dt_max must be positive, got {}", self.dt_max)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Validation(format!("t_end must be positive and finite, got {}", self.t_end)));
        }
        if self.snapshot_times.iter().any(|&t| !(t >= 0.0 && t <= self.t_end)) {
            return Err(Error::Validation("snapshot times must lie in [0, t_end]".into()));
        }
        if self.snapshot_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("snapshot times must be increasing".into()));
        }
        Ok(())
    }

    fn change_target(&self) -> f64 {
        CHANGE_TARGET * self.cfl_safety
    }
}

/// One cosine term `amp cos(kx pi (x - sx)) cos(ky pi (y - sy))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CosineTerm {
    pub amp: f64,
    pub kx: f64,
    pub sx: f64,
    pub ky: f64,
    pub sy: f64,
}

/// Constant plus a sum of cosine products.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct InitialData {
    pub constant: f64,
    pub terms: Vec<CosineTerm>,
}

impl InitialData {
    pub fn constant(value: f64) -> Self {
        Self { constant: value, terms: Vec::new() }
    }

    pub fn with_term(mut self, amp: f64, kx: f64, sx: f64, ky: f64, sy: f64) -> Self {
        self.terms.push(CosineTerm { amp, kx, sx, ky, sy });
        self
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        use std::f64::consts::PI;
        self.constant
            + self
                .terms
                .iter()
                .map(|t| t.amp * (t.kx * PI * (x - t.sx)).cos() * (t.ky * PI * (y - t.sy)).cos())
                .sum::<f64>()
    }

    pub fn sample(&self, grid: &Grid) -> Field {
        Field::from_fn(*grid, |x, y| self.eval(x, y))
    }
}

#[derive(Clone, Debug)]
pub struct SimState {
    pub t: f64,
    pub u: Field,
    pub v: Field,
    pub mass0: f64,
}

impl SimState {
    pub fn new(u: Field, v: Field) -> Result<Self> {
        if u.grid() != v.grid() {
            return Err(Error::InvalidParameter("u and v live on different grids".into()));
        }
        if u.min() < 0.0 || v.min() < 0.0 {
            return Err(Error::InvalidParameter("initial data must be nonnegative".into()));
        }
        let mass0 = integrate(&u);
        Ok(Self { t: 0.0, u, v, mass0 })
    }

    pub fn mass(&self) -> f64 {
        integrate(&self.u)
    }

    pub fn mass_drift(&self) -> f64 {
        (self.mass() - self.mass0).abs() / self.mass0
    }
}

fn relative_change(a: &Field, b: &Field) -> f64 {
    let diff = a
        .values()
        .iter()
        .zip(b.values())
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
    diff / b.norm_inf().max(f64::MIN_POSITIVE)
}

/// `max(|du|_inf / |u|_inf, |dv|_inf / |v|_inf) / dt < steady_tol`.
pub fn steady_detect(prev: &SimState, next: &SimState, config: &SchemeConfig) -> bool {
    let dt = next.t - prev.t;
    let change = relative_change(&next.u, &prev.u).max(relative_change(&next.v, &prev.v));
    if change == 0.0 {
        return true;
    }
    dt > 0.0 && change / dt < config.steady_tol
}

/// Smallest step the controller will take before declaring the problem stiff.
pub const DT_FLOOR: f64 = 1e-12;

/// Explicit-scheme step bound, used only to pick the first step.
pub fn explicit_step_bound(state: &SimState, params: &ModelParams) -> f64 {
    let grid = state.u.grid();
    let h = grid.h_min();
    let n = grid.dim() as f64;
    let ln: Vec<f64> = state.v.values().iter().map(|v| (v + params.c()).ln()).collect();
    let mut speed = 0.0f64;
    StencilMatrix::for_each_face(grid, |_, a, b, is_x| {
        let hh = if is_x { grid.hx() } else { grid.hy() };
        speed = speed.max(params.chi() * (ln[a] - ln[b]).abs() / hh);
    });
    let diffusive = h * h / (2.0 * n * params.d1());
    if speed > 0.0 {
        diffusive.min(h / speed)
    } else {
        diffusive
    }
}

/// Reusable integrator with cached factorization structure.
pub struct Stepper {
    params: ModelParams,
    config: SchemeConfig,
    spd: SpdSolver,
    dt: f64,
}

impl Stepper {
    pub fn new(params: ModelParams, config: SchemeConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { params, config, spd: SpdSolver::new(), dt: 0.0 })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    /// Step size the controller will try next.
    pub fn proposed_dt(&self) -> f64 {
        self.dt
    }

    /// One step of exactly `dt`.
    pub fn step_fixed(&mut self, state: &SimState, dt: f64) -> Result<SimState> {
        let grid = *state.u.grid();
        let p = &self.params;
        let e_psi = boltzmann(&state.v, p);
        let mut cond = face_conductances(&grid, &e_psi, p);

        // (diag(e^psi) + dt L_k) s = u^n
        let mut sys = cond.clone();
        sys.diag.copy_from_slice(&e_psi);
        sys.x_faces.iter_mut().for_each(|w| *w *= dt);
        sys.y_faces.iter_mut().for_each(|w| *w *= dt);
        let mut s = state.u.values().to_vec();
        self.spd.solve(&sys, &mut s)?;

        // Conservative update: u_a -= dt k (s_a - s_b), u_b += the same.
        let mut u_new = state.u.values().to_vec();
        cond.diag.iter_mut().for_each(|d| *d = 0.0);
        let (xf, yf) = (&cond.x_faces, &cond.y_faces);
        StencilMatrix::for_each_face(&grid, |f, a, b, is_x| {
            let k = if is_x { xf[f] } else { yf[f] };
            let flux = dt * k * (s[a] - s[b]);
            u_new[a] -= flux;
            u_new[b] += flux;
        });
        if u_new.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what: "u", t: state.t + dt });
        }
        // Rounding can leave a cell a hair below zero where the exact update is positive.
        for (x, (si, e)) in u_new.iter_mut().zip(s.iter().zip(&e_psi)) {
            if *x < 0.0 {
                *x = (si * e).max(0.0);
            }
        }

        let v_sys = StencilMatrix::scaled_laplacian(grid, dt * p.d2(), vec![1.0 + dt * p.alpha(); grid.len()]);
        let rhs: Vec<f64> = state
            .v
            .values()
            .iter()
            .zip(&u_new)
            .map(|(v, u)| v + dt * p.beta() * u)
            .collect();
        let mut v_new = state.v.values().to_vec();
        conjugate_gradient(&v_sys, &rhs, &mut v_new, 1e-10, 10_000)?;
        if v_new.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what: "v", t: state.t + dt });
        }
        Ok(SimState {
            t: state.t + dt,
            u: Field::from_values(grid, u_new).map_err(|_| Error::NonFinite { what: "u", t: state.t + dt })?,
            v: Field::from_values(grid, v_new).map_err(|_| Error::NonFinite { what: "v", t: state.t + dt })?,
            mass0: state.mass0,
        })
    }

    /// One accepted step no later than `t_limit`, with step-size control.
    pub fn advance(&mut self, state: &SimState, t_limit: f64) -> Result<SimState> {
        if self.dt == 0.0 {
            self.dt = explicit_step_bound(state, &self.params).min(self.config.dt_max);
        }
        let target = self.config.change_target();
        loop {
            let remaining = t_limit - state.t;
            let mut dt = self.dt.min(self.config.dt_max);
            let landing = dt >= remaining * (1.0 - 1e-12);
            if landing {
                dt = remaining;
            }
            if dt < DT_FLOOR {
                return Err(Error::Stiffness { t: state.t, dt });
            }
            let next = match self.step_fixed(state, dt) {
                Ok(next) => next,
                Err(Error::NonFinite { .. }) | Err(Error::LinearSolver(_)) => {
                    self.dt = 0.25 * dt;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let change = relative_change(&next.u, &state.u).max(relative_change(&next.v, &state.v));
            if change > 2.0 * target {
                self.dt = 0.5 * dt;
                continue;
            }
            let grow = if change > 0.0 { (target / change).clamp(0.5, 2.0) } else { 2.0 };
            if !landing || grow < 1.0 {
                self.dt = (dt * grow).min(self.config.dt_max);
            }
            let mut next = next;
            if landing {
                next.t = t_limit;
            }
            return Ok(next);
        }
    }
}

/// One controlled step with a fresh integrator.
pub fn step(state: &SimState, params: &ModelParams, config: &SchemeConfig) -> Result<SimState> {
    Stepper::new(*params, config.clone())?.advance(state, config.t_end)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub mass: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl TraceRow {
    fn of(s: &SimState) -> Self {
        Self {
            t: s.t,
            mass: s.mass(),
            u_min: s.u.min(),
            u_max: s.u.max(),
            v_min: s.v.min(),
            v_max: s.v.max(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub final_state: SimState,
    pub snapshots: Vec<SimState>,
    pub trace: Vec<TraceRow>,
    /// Time at which steady detection fired, if it did.
    pub steady_at: Option<f64>,
    pub steps: usize,
    /// Largest `|int u - mass0| / mass0` over all accepted steps.
    pub max_mass_drift: f64,
}

/// Integrates to `t_end` or steady state, recording snapshots and traces.
pub fn run(state0: SimState, params: &ModelParams, config: &SchemeConfig) -> Result<RunSummary> {
    run_observed(state0, params, config, |_| {})
}

/// [`run`] with a callback after every accepted step.
pub fn run_observed(
    state0: SimState,
    params: &ModelParams,
    config: &SchemeConfig,
    mut observe: impl FnMut(&SimState),
) -> Result<RunSummary> {
    let mut stepper = Stepper::new(*params, config.clone())?;
    let mut snapshots = Vec::new();
    let mut pending = config.snapshot_times.iter().copied().peekable();
    while let Some(&t) = pending.peek() {
        if t > state0.t {
            break;
        }
        snapshots.push(state0.clone());
        pending.next();
    }
    let mut trace = vec![TraceRow::of(&state0)];
    let mut state = state0;
    let mut steps = 0;
    let mut max_drift = 0.0f64;
    let mut steady_at = None;
    while state.t < config.t_end {
        let limit = pending.peek().copied().unwrap_or(config.t_end).min(config.t_end);
        let next = stepper.advance(&state, limit)?;
        steps += 1;
        max_drift = max_drift.max(next.mass_drift());
        let steady = steady_detect(&state, &next, config);
        state = next;
        trace.push(TraceRow::of(&state));
        observe(&state);
        if pending.peek().is_some_and(|&t| t <= state.t) {
            snapshots.push(state.clone());
            pending.next();
        }
        if steady {
            steady_at = Some(state.t);
            break;
        }
    }
    Ok(RunSummary { final_state: state, snapshots, trace, steady_at, steps, max_mass_drift: max_drift })
}
