//! The nonlocal steady problem: pick the normalizer `delta` so that the
//! fixed-`delta` spike solution satisfies `delta = int (v + c)^p`, equivalently
//! `int v = m`, then rebuild `v = delta^(1/(p-1)) w + t1` and
//! `u = M (v + c)^p / int (v + c)^p`.

use crate::error::{Error, Result};
use crate::grid::{apply_laplacian, integrate, Domain, Field, Grid};
use crate::ground_state::{shoot_ground_state, RadialProfile};
use crate::least_energy::{
    is_constant, least_energy_select, solve_local, transplant_spike, NewtonOptions,
};
use crate::scalar::{analyze_delta, delta_for_small_root, delta_lower_bound, DeltaAnalysis, ModelParams};
use crate::timestepper::taxis_divergence;

/// Spike seeds: the corners of the domain (both endpoints in 1D), in
/// lexicographic order.
pub fn corner_points(grid: &Grid) -> Vec<(f64, f64)> {
    let d = grid.domain();
    if grid.dim() == 1 {
        vec![(0.0, 0.0), (d.lx(), 0.0)]
    } else {
        vec![(0.0, 0.0), (0.0, d.ly()), (d.lx(), 0.0), (d.lx(), d.ly())]
    }
}

/// Ground state radius that keeps the shooting preconditions satisfied.
pub fn profile_radius(c_delta: f64) -> f64 {
    40f64.max(25.0 / c_delta.sqrt())
}

/// Evaluation of `rho(delta) = int v` with the selected least-energy solution.
#[derive(Clone, Debug)]
pub struct RhoEval {
    pub delta: f64,
    pub rho: f64,
    pub analysis: DeltaAnalysis,
    /// Selected transformed solution `w`.
    pub w: Field,
    pub constant_selected: bool,
    /// The constant candidate had lower energy than an available spike.
    pub constant_beats_spike: bool,
}

/// Stateful evaluator for `rho`, warm-starting each corner candidate from its
/// previous solution.
pub struct RhoEvaluator {
    eps: f64,
    params: ModelParams,
    grid: Grid,
    newton: NewtonOptions,
    warm: Vec<Option<Field>>,
}

impl RhoEvaluator {
    pub fn new(eps: f64, params: ModelParams, grid: Grid) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        let corners = corner_points(&grid).len();
        Ok(Self { eps, params, grid, newton: NewtonOptions::default(), warm: vec![None; corners] })
    }

    fn spike_candidate(&mut self, k: usize, point: (f64, f64), a: &DeltaAnalysis, profile: &Option<RadialProfile>) -> Option<Field> {
        let nl = a.nonlinearity();
        if let Some(prev) = self.warm[k].take() {
            if let Ok(sol) = solve_local(self.eps, &nl, &prev, &self.newton) {
                if !is_constant(&sol.w) && sol.w.min() > 0.0 {
                    return Some(sol.w);
                }
            }
        }
        let profile = profile.as_ref()?;
        let init = transplant_spike(profile, &self.grid, self.eps, point);
        let sol = solve_local(self.eps, &nl, &init, &self.newton).ok()?;
        if sol.w.min() > 0.0 {
            Some(sol.w)
        } else {
            None
        }
    }

    /// `rho(delta)`; at `delta0` the constant branch value `c |Omega| / (p-1)`.
    pub fn eval(&mut self, delta: f64) -> Result<RhoEval> {
        let a = analyze_delta(&self.params, delta)?;
        let volume = self.grid.domain().volume();
        if a.c_delta <= 0.0 {
            let w = Field::zeros(self.grid);
            return Ok(RhoEval {
                delta,
                rho: a.t1 * volume,
                analysis: a,
                w,
                constant_selected: true,
                constant_beats_spike: false,
            });
        }
        let profile = shoot_ground_state(&a, self.grid.dim(), profile_radius(a.c_delta)).ok();
        let mut candidates = Vec::new();
        let mut slots = Vec::new();
        for (k, point) in corner_points(&self.grid).into_iter().enumerate() {
            if let Some(w) = self.spike_candidate(k, point, &a, &profile) {
                candidates.push(w);
                slots.push(Some(k));
            }
        }
        candidates.push(Field::constant(self.grid, a.constant_solution()));
        slots.push(None);

        let sel = least_energy_select(&candidates, self.eps, &a.nonlinearity())?;
        let mut chosen = None;
        for (w, slot) in candidates.into_iter().zip(slots) {
            match slot {
                Some(k) => {
                    if chosen.is_none() && sel.index == k {
                        chosen = Some(w.clone());
                    }
                    self.warm[k] = Some(w);
                }
                None => {
                    if chosen.is_none() {
                        chosen = Some(w);
                    }
                }
            }
        }
        let w = chosen.expect("selection index in range");
        let scale = a.scale();
        let rho = integrate(&w) * scale + a.t1 * volume;
        Ok(RhoEval {
            delta,
            rho,
            analysis: a,
            constant_selected: is_constant(&w),
            w,
            constant_beats_spike: sel.constant_beats_spike,
        })
    }
}

/// `int v` for the least-energy solution at `delta` (cold start).
pub fn rho(eps: f64, params: &ModelParams, delta: f64, grid: &Grid) -> Result<f64> {
    Ok(RhoEvaluator::new(eps, *params, *grid)?.eval(delta)?.rho)
}

/// `u = M (v + c)^p / int (v + c)^p`.
pub fn reconstruct_u(v: &Field, params: &ModelParams) -> Result<Field> {
    let c = params.c();
    if v.min() <= -c {
        return Err(Error::InvalidParameter("v must exceed -c everywhere".into()));
    }
    let shifted = v.map(|x| (x + c).powf(params.p()));
    let total = integrate(&shifted);
    Ok(shifted.scaled(params.mass() / total))
}

#[derive(Clone, Debug)]
pub struct NonlocalSolution {
    pub params: ModelParams,
    pub eps: f64,
    pub delta_eps: f64,
    pub analysis: DeltaAnalysis,
    pub w: Field,
    pub v: Field,
    pub u: Field,
    /// `|int (v+c)^p - delta| / delta`
    pub constraint_residual: f64,
    /// `|int v - m| / m`
    pub mass_residual: f64,
    /// `t1(delta_eps)`
    pub platform: f64,
    pub bisection_steps: usize,
    pub hypothesis_holds: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct NonlocalOptions {
    /// Stop when `|rho - m| <= tol * m`.
    pub tol: f64,
    pub max_bisections: usize,
}

impl Default for NonlocalOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_bisections: 200 }
    }
}

/// Bracket `[delta0 (1 + 1e-6), delta1]` with `t1(delta1) |Omega| = m / 2`.
pub fn delta_bracket(params: &ModelParams, domain: &Domain) -> Result<(f64, f64)> {
    let d0 = delta_lower_bound(params)?;
    let d1 = delta_for_small_root(params, params.m() / (2.0 * domain.volume()))?;
    Ok((d0 * (1.0 + 1e-6), d1))
}

pub fn solve_nonlocal(eps: f64, params: &ModelParams, grid: &Grid) -> Result<NonlocalSolution> {
    solve_nonlocal_with(eps, params, grid, &NonlocalOptions::default())
}

pub fn solve_nonlocal_with(eps: f64, params: &ModelParams, grid: &Grid, opts: &NonlocalOptions) -> Result<NonlocalSolution> {
    // The chemical diffusion is whatever makes `eps` the singular parameter.
    let params = &params.with_d2(params.alpha() * eps * eps)?;
    let m = params.m();
    let (mut lo, mut hi) = delta_bracket(params, grid.domain())?;
    let mut evaluator = RhoEvaluator::new(eps, *params, *grid)?;
    let h_hi = evaluator.eval(hi)?;
    let h_lo = evaluator.eval(lo)?;
    let (f_lo, f_hi) = (h_lo.rho - m, h_hi.rho - m);
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::EpsilonTooLarge { lo, hi });
    }
    let lo_positive = f_lo > 0.0;
    let mut best = if f_lo.abs() < f_hi.abs() { h_lo } else { h_hi };
    let mut steps = 0;
    while (best.rho - m).abs() > opts.tol * m && steps < opts.max_bisections {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let e = evaluator.eval(mid)?;
        steps += 1;
        if ((e.rho - m) > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
        if (e.rho - m).abs() <= (best.rho - m).abs() {
            best = e;
        }
    }
    let a = best.analysis;
    let v = best.w.map(|w| a.scale() * w + a.t1);
    let u = reconstruct_u(&v, params)?;
    let constraint = (integrate(&v.map(|x| (x + params.c()).powf(params.p()))) - best.delta).abs() / best.delta;
    let mass_residual = (integrate(&v) - m).abs() / m;
    Ok(NonlocalSolution {
        params: *params,
        eps,
        delta_eps: best.delta,
        analysis: a,
        w: best.w,
        v,
        u,
        constraint_residual: constraint,
        mass_residual,
        platform: a.t1,
        bisection_steps: steps,
        hypothesis_holds: params.mass_hypothesis_holds(grid.domain().volume()),
    })
}

/// `(rho(delta) - m)` on `n` points across the bracket, for diagnosing
/// missing or multiple sign changes.
pub fn rho_scan(eps: f64, params: &ModelParams, grid: &Grid, n: usize) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = delta_bracket(params, grid.domain())?;
    let mut evaluator = RhoEvaluator::new(eps, *params, *grid)?;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let delta = hi - (hi - lo) * k as f64 / (n - 1).max(1) as f64;
        out.push((delta, evaluator.eval(delta)?.rho - params.m()));
    }
    out.reverse();
    Ok(out)
}

/// Steady residuals of the full system:
/// `div(d1 grad u - chi u grad ln(v + c))` and `d2 Lap v - alpha v + beta u`,
/// both in the sup norm.
pub fn full_system_residual(u: &Field, v: &Field, params: &ModelParams) -> (f64, f64) {
    let ru = taxis_divergence(u, v, params).norm_inf();
    let mut lap = vec![0.0; v.values().len()];
    apply_laplacian(v.grid(), v.values(), &mut lap);
    let rv = lap
        .iter()
        .zip(v.values())
        .zip(u.values())
        .map(|((l, v), u)| (params.d2() * l - params.alpha() * v + params.beta() * u).abs())
        .fold(0.0, f64::max);
    (ru, rv)
}

/// A grid resolving `eps` with at least `cells_per_eps` cells.
pub fn resolving_grid(domain: &Domain, eps: f64, cells_per_eps: f64) -> Result<Grid> {
    let n = |len: f64| ((cells_per_eps * len / eps).ceil() as usize).max(64);
    if domain.dim() == 1 {
        Grid::new_1d(*domain, n(domain.lx()))
    } else {
        Grid::new_2d(*domain, n(domain.lx()), n(domain.ly()))
    }
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub eps: f64,
    pub outcome: std::result::Result<(f64, f64), String>,
}

impl SweepPoint {
    pub fn delta(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|r| r.0)
    }
    pub fn platform(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|r| r.1)
    }
}

/// `(eps, delta_eps, t*_eps)` along a decreasing `eps` list. Failures are kept
/// in the table instead of aborting the sweep.
pub fn platform_limit_sweep(params: &ModelParams, domain: &Domain, eps_list: &[f64], cells_per_eps: f64) -> Result<Vec<SweepPoint>> {
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("eps list must be strictly decreasing".into()));
    }
    let mut out = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let grid = resolving_grid(domain, eps, cells_per_eps)?;
        let outcome = solve_nonlocal(eps, params, &grid)
            .map(|s| (s.delta_eps, s.platform))
            .map_err(|e| e.to_string());
        out.push(SweepPoint { eps, outcome });
    }
    Ok(out)
}

/// Linear extrapolation to `eps = 0` through the last two successful points.
pub fn extrapolate_to_zero(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let (e1, y1) = points[n - 2];
    let (e2, y2) = points[n - 1];
    Some(y2 - e2 * (y1 - y2) / (e1 - e2))
}
