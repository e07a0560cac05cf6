//! Solutions of the fixed-normalizer Neumann problem
//! `eps^2 Lap w - c_delta w + f(w) = 0` on a grid, and the energy
//! `J(w) = 1/2 int (eps^2 |grad w|^2 + c_delta w^2) - int F(w)`.
//!
//! Solutions are computed by damped Newton from a transplanted ground state.
//! The Nehari scale and the cone test function are kept as independent
//! checks on the mountain-pass structure.

use crate::error::{Error, Result};
use crate::grid::{grad_dot, inner, integrate_slice, laplacian_neumann, Field, Grid};
use crate::ground_state::RadialProfile;
use crate::linalg::{LuSolver, StencilMatrix};
use crate::scalar::{safeguarded_newton, Nonlinearity};

/// Relative spread below which a field counts as constant.
pub const CONSTANT_SPREAD: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyReport {
    /// `J(w)`
    pub value: f64,
    /// `||w||_eps^2 = int eps^2 |grad w|^2 + c_delta w^2`
    pub norm_sq: f64,
    /// `|norm_sq - int f(w) w| / norm_sq`
    pub residual_identity_gap: f64,
    pub is_constant: bool,
}

pub fn is_constant(w: &Field) -> bool {
    let (hi, lo) = (w.max(), w.min());
    hi - lo < CONSTANT_SPREAD * hi.abs()
}

fn norm_sq(w: &Field, eps: f64, c: f64) -> f64 {
    eps * eps * grad_dot(w, w) + c * inner(w, w)
}

fn integrate_map(w: &Field, g: impl Fn(f64) -> f64) -> f64 {
    let vals: Vec<f64> = w.values().iter().map(|&x| g(x)).collect();
    integrate_slice(w.grid(), &vals)
}

pub fn energy(w: &Field, eps: f64, nl: &Nonlinearity) -> EnergyReport {
    let ns = norm_sq(w, eps, nl.c_delta);
    let big_f = integrate_map(w, |x| nl.antiderivative(x));
    let fw = integrate_map(w, |x| nl.f(x) * x);
    let gap = if ns > 0.0 { (ns - fw).abs() / ns } else { 0.0 };
    EnergyReport {
        value: 0.5 * ns - big_f,
        norm_sq: ns,
        residual_identity_gap: gap,
        is_constant: is_constant(w),
    }
}

/// `|‖w‖_eps^2 - int f(w) w| / ‖w‖_eps^2`; vanishes on solutions.
pub fn residual_identity_check(w: &Field, eps: f64, nl: &Nonlinearity) -> f64 {
    energy(w, eps, nl).residual_identity_gap
}

/// `G(w) = eps^2 Lap w - c_delta w + f(w)`.
pub fn residual(w: &Field, eps: f64, nl: &Nonlinearity) -> Field {
    let lap = laplacian_neumann(w);
    lap.zip_map(w, |l, x| eps * eps * l - nl.c_delta * x + nl.f(x))
}

/// `DJ(w)[phi] = -int G(w) phi`.
pub fn directional_derivative(w: &Field, phi: &Field, eps: f64, nl: &Nonlinearity) -> f64 {
    -inner(&residual(w, eps, nl), phi)
}

/// The `t > 0` maximising `J(t w)`, i.e. the zero of `t ‖w‖^2 - int f(t w) w`.
pub fn nehari_scale(w: &Field, eps: f64, nl: &Nonlinearity) -> Result<f64> {
    if !(w.max() > 0.0) {
        return Err(Error::InvalidParameter("Nehari scale needs a field with a positive part".into()));
    }
    let ns = norm_sq(w, eps, nl.c_delta);
    let g = |t: f64| {
        let fw = integrate_map(w, |x| nl.f(t * x) * x);
        let dfw = integrate_map(w, |x| nl.derivative(t * x) * x * x);
        (t * ns - fw, ns - dfw)
    };
    let (mut lo, mut hi) = (1.0, 1.0);
    if g(1.0).0 > 0.0 {
        while g(hi).0 > 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::InvalidParameter("Nehari scale diverges".into()));
            }
        }
    } else {
        while g(lo).0 <= 0.0 {
            hi = lo;
            lo *= 0.5;
            if lo < 1e-300 {
                return Err(Error::InvalidParameter("Nehari scale vanishes".into()));
            }
        }
    }
    Ok(safeguarded_newton(g, lo, hi, 1e-15))
}

/// Places `w_delta(|x - point| / eps)` on the grid.
pub fn transplant_spike(profile: &RadialProfile, grid: &Grid, eps: f64, point: (f64, f64)) -> Field {
    Field::from_fn(*grid, |x, y| {
        let dx = x - point.0;
        let dy = if grid.dim() == 2 { y - point.1 } else { 0.0 };
        profile.eval((dx * dx + dy * dy).sqrt() / eps)
    })
}

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    /// Converged when `‖G‖_inf <= rel_tol * c_delta * ‖w‖_inf`.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Consecutive damped steps without residual decrease before giving up.
    pub max_stagnation: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, max_iter: 200, max_stagnation: 20 }
    }
}

#[derive(Clone, Debug)]
pub struct LocalSolution {
    pub w: Field,
    pub iterations: usize,
    /// Final `‖G(w)‖_inf`.
    pub residual: f64,
}

fn l2(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Damped Newton for the discrete Neumann problem from `init`.
pub fn solve_local(eps: f64, nl: &Nonlinearity, init: &Field, opts: &NewtonOptions) -> Result<LocalSolution> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    if !(nl.c_delta > 0.0) {
        return Err(Error::InvalidParameter("solve_local needs c_delta > 0".into()));
    }
    let grid = *init.grid();
    let c = nl.c_delta;
    let mut solver = LuSolver::new();
    let mut w = init.clone();
    let mut g = residual(&w, eps, nl);
    let mut g_norm = l2(g.values());
    let mut stagnant = 0;
    for it in 0..=opts.max_iter {
        let g_inf = g.norm_inf();
        if g_inf <= opts.rel_tol * c * w.norm_inf() {
            return Ok(LocalSolution { w, iterations: it, residual: g_inf });
        }
        if it == opts.max_iter {
            break;
        }
        let diag: Vec<f64> = w.values().iter().map(|&x| c - nl.derivative(x)).collect();
        let jac = StencilMatrix::scaled_laplacian(grid, eps * eps, diag);
        let mut step = g.values().to_vec();
        solver.solve(&jac, &mut step)?;

        let mut lambda = 1.0;
        let mut accepted = None;
        let mut fallback = None;
        for _ in 0..12 {
            let trial_vals: Vec<f64> = w.values().iter().zip(&step).map(|(x, d)| x + lambda * d).collect();
            let trial = Field::from_values(grid, trial_vals)
                .map_err(|_| Error::NonFinite { what: "Newton iterate", t: 0.0 })?;
            let g_trial = residual(&trial, eps, nl);
            let n_trial = l2(g_trial.values());
            if n_trial < g_norm {
                accepted = Some((trial, g_trial, n_trial));
                break;
            }
            fallback = Some((trial, g_trial, n_trial));
            lambda *= 0.5;
        }
        let decreased = accepted.is_some();
        let (trial, g_trial, n_trial) = accepted.or(fallback).expect("line search ran");
        if decreased {
            stagnant = 0;
        } else {
            stagnant += 1;
            if stagnant >= opts.max_stagnation {
                let res = g_trial.norm_inf();
                return Err(Error::NonConvergence { iterations: it + 1, residual: res, last: Some(Box::new(trial)) });
            }
        }
        w = trial;
        g = g_trial;
        g_norm = n_trial;
    }
    Err(Error::NonConvergence { iterations: opts.max_iter, residual: g.norm_inf(), last: Some(Box::new(w)) })
}

/// Outcome of [`least_energy_select`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub energy: f64,
    /// A constant candidate won although a nonconstant one was offered.
    pub constant_beats_spike: bool,
}

/// Candidate with the least energy; near-ties go to the lexicographically
/// smallest maximum location.
pub fn least_energy_select(candidates: &[Field], eps: f64, nl: &Nonlinearity) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("no candidates to select from".into()));
    }
    let energies: Vec<f64> = candidates.iter().map(|w| energy(w, eps, nl).value).collect();
    let location = |w: &Field| {
        let k = w.argmax();
        let g = w.grid();
        g.center(k % g.nx(), k / g.nx())
    };
    let mut best = 0;
    for k in 1..candidates.len() {
        let (ek, eb) = (energies[k], energies[best]);
        let tie = (ek - eb).abs() <= 1e-9 * eb.abs().max(ek.abs());
        if (!tie && ek < eb) || (tie && location(&candidates[k]) < location(&candidates[best])) {
            best = k;
        }
    }
    let constant_won = is_constant(&candidates[best]);
    let spike_offered = candidates.iter().any(|w| !is_constant(w));
    Ok(Selection {
        index: best,
        energy: energies[best],
        constant_beats_spike: constant_won && spike_offered,
    })
}

/// `e(x) = eps^-N (1 - |x - P| / eps)_+` centred at the corner `P = 0`.
pub fn cone_function(eps: f64, grid: &Grid) -> Result<Field> {
    let cells = grid.cells_per_length(eps);
    if cells < 8.0 {
        return Err(Error::Resolution { cells_per_radius: cells });
    }
    let norm = eps.powi(grid.dim() as i32);
    Ok(Field::from_fn(*grid, |x, y| {
        let r = (x * x + y * y).sqrt();
        (1.0 - r / eps).max(0.0) / norm
    }))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeTest {
    /// `sup_t J(t e)`
    pub sup: f64,
    pub t_max: f64,
}

/// Maximises `J(t e)` over `t > 0` for the corner cone.
pub fn cone_test_energy(eps: f64, nl: &Nonlinearity, grid: &Grid) -> Result<ConeTest> {
    let e = cone_function(eps, grid)?;
    let t = nehari_scale(&e, eps, nl)?;
    let sup = energy(&e.scaled(t), eps, nl).value;
    Ok(ConeTest { sup, t_max: t })
}
