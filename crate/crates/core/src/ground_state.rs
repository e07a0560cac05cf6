//! Radial ground states of `w'' + (N-1)/r w' - c w + f(w) = 0` on all of `R^N`.
//!
//! The profile is found by shooting on `s = w(0)`: a trajectory that crosses
//! zero started too high, one that turns back upwards while still positive
//! started too low. Bisection pins `s` to rounding level; past the radius
//! where the two bracketing trajectories separate, the profile is continued
//! by the linearised tail `C exp(-sqrt(c) r) r^((1-N)/2)`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::{safeguarded_newton, DeltaAnalysis, Nonlinearity};

/// Sampled radial ground state and the quantities derived from it.
#[derive(Clone, Debug)]
pub struct RadialProfile {
    pub dim: usize,
    pub nonlinearity: Nonlinearity,
    pub r: Vec<f64>,
    pub w: Vec<f64>,
    /// `w'(r)` at the sample radii.
    pub dw: Vec<f64>,
    pub w0: f64,
    /// Fitted tail `w(r) r^((N-1)/2) ~ tail_c exp(-mu r)`.
    pub mu: f64,
    pub tail_c: f64,
    /// Radius past which the samples come from the linearised tail.
    pub r_match: f64,
    pub mass: f64,
    pub energy: f64,
}

/// `|S^(N-1)| = 2 pi^(N/2) / Gamma(N/2)`; 2 for `N = 1`.
pub fn sphere_area(dim: usize) -> f64 {
    let half = dim as f64 / 2.0;
    let mut gamma = if dim % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut x = if dim % 2 == 0 { 1.0 } else { 0.5 };
    while x < half {
        gamma *= x;
        x += 1.0;
    }
    2.0 * std::f64::consts::PI.powf(half) / gamma
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Outcome {
    /// `w` went negative: `s` too large.
    Crossed,
    /// `w' > 0` while `w > 0`: `s` too small.
    TurnedBack,
    /// Neither happened before `r_max`.
    Undecided,
}

struct Ode {
    dim: f64,
    c: f64,
    nl: Nonlinearity,
}

impl Ode {
    fn rhs(&self, r: f64, w: f64, dw: f64) -> (f64, f64) {
        (dw, -(self.dim - 1.0) / r * dw + self.c * w - self.nl.f(w))
    }

    /// Taylor start `w = s + a r^2 + b r^4` about the regular centre.
    fn series(&self, s: f64, r: f64) -> (f64, f64) {
        let n = self.dim;
        let g = self.c * s - self.nl.f(s);
        let dg = self.c - self.nl.derivative(s);
        let a = g / (2.0 * n);
        let b = dg * a / (4.0 * (n + 2.0));
        (s + a * r * r + b * r.powi(4), 2.0 * a * r + 4.0 * b * r.powi(3))
    }

    fn rk4(&self, r: f64, w: f64, dw: f64, h: f64) -> (f64, f64) {
        let (k1w, k1d) = self.rhs(r, w, dw);
        let (k2w, k2d) = self.rhs(r + 0.5 * h, w + 0.5 * h * k1w, dw + 0.5 * h * k1d);
        let (k3w, k3d) = self.rhs(r + 0.5 * h, w + 0.5 * h * k2w, dw + 0.5 * h * k2d);
        let (k4w, k4d) = self.rhs(r + h, w + h * k3w, dw + h * k3d);
        (
            w + h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w),
            dw + h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d),
        )
    }

    /// Integrates on `r_k = k h`, stopping at the first decisive event.
    /// Samples are stored only while the trajectory is positive and decreasing.
    fn shoot(&self, s: f64, h: f64, steps: usize, keep: bool) -> (Outcome, Vec<f64>, Vec<f64>) {
        let mut ws = Vec::new();
        let mut dws = Vec::new();
        if keep {
            ws.reserve(steps + 1);
            dws.reserve(steps + 1);
            ws.push(s);
            dws.push(0.0);
        }
        let (mut w, mut dw) = self.series(s, h);
        for k in 1..=steps {
            if k > 1 {
                let next = self.rk4((k - 1) as f64 * h, w, dw, h);
                w = next.0;
                dw = next.1;
            }
            if w < 0.0 {
                return (Outcome::Crossed, ws, dws);
            }
            if dw > 0.0 {
                return (Outcome::TurnedBack, ws, dws);
            }
            if keep {
                ws.push(w);
                dws.push(dw);
            }
        }
        (Outcome::Undecided, ws, dws)
    }
}

/// Positive zero of `f(w) = c w`: the constant solution of the transformed problem.
pub fn constant_level(nl: &Nonlinearity) -> f64 {
    let g = |w: f64| (nl.f(w) - nl.c_delta * w, nl.derivative(w) - nl.c_delta);
    let mut w = 1.0;
    if g(w).0 < 0.0 {
        while g(w).0 < 0.0 {
            w *= 2.0;
        }
        safeguarded_newton(g, 0.5 * w, w, 1e-15)
    } else {
        while g(w).0 >= 0.0 {
            w *= 0.5;
        }
        safeguarded_newton(g, w, 2.0 * w, 1e-15)
    }
}

/// Integration step used by [`shoot_ground_state`].
pub fn default_step(c: f64) -> f64 {
    0.01f64.min(0.1 / c.sqrt())
}

/// Ground state for the transformed problem at one normalizer.
pub fn shoot_ground_state(analysis: &DeltaAnalysis, dim: usize, r_max: f64) -> Result<RadialProfile> {
    shoot_with(&analysis.nonlinearity(), dim, r_max, default_step(analysis.c_delta))
}

/// Ground state for an arbitrary nonlinearity (including the pure-power limit).
pub fn shoot_nonlinearity(nl: &Nonlinearity, dim: usize, r_max: f64) -> Result<RadialProfile> {
    shoot_with(nl, dim, r_max, default_step(nl.c_delta))
}

/// Shooting with an explicit nominal step (rounded so that it divides `r_max` evenly).
pub fn shoot_with(nl: &Nonlinearity, dim: usize, r_max: f64, step: f64) -> Result<RadialProfile> {
    let c = nl.c_delta;
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("c_delta must be positive, got {c}")));
    }
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    if !(r_max >= 20.0 / c.sqrt()) {
        return Err(Error::InvalidParameter(format!(
            "r_max = {r_max} is below 20/sqrt(c_delta) = {}",
            20.0 / c.sqrt()
        )));
    }
    let mut steps = (r_max / step).ceil() as usize;
    steps += steps % 2;
    let h = r_max / steps as f64;
    let ode = Ode { dim: dim as f64, c, nl: *nl };

    let scale = constant_level(nl);
    let mut lo = scale;
    let mut hi = 2.0 * scale;
    loop {
        match ode.shoot(hi, h, steps, false).0 {
            Outcome::Crossed => break,
            Outcome::TurnedBack => lo = hi,
            Outcome::Undecided => {
                lo = hi;
                hi *= 1.0 + 1e-12;
                break;
            }
        }
        hi *= 2.0;
        if hi > 1e3 * scale {
            return Err(Error::Shooting(format!(
                "no overshooting value below 1e3 times the constant level {scale}"
            )));
        }
    }

    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi {
            break;
        }
        match ode.shoot(mid, h, steps, false).0 {
            Outcome::Crossed => hi = mid,
            Outcome::TurnedBack => lo = mid,
            Outcome::Undecided => {
                lo = mid;
                break;
            }
        }
    }

    let (_, w_lo, dw_lo) = ode.shoot(lo, h, steps, true);
    let (_, w_hi, dw_hi) = ode.shoot(hi, h, steps, true);
    let common = w_lo.len().min(w_hi.len());
    let mut ws = Vec::with_capacity(steps + 1);
    let mut dws = Vec::with_capacity(steps + 1);
    for k in 0..common {
        let w = 0.5 * (w_lo[k] + w_hi[k]);
        if (w_hi[k] - w_lo[k]).abs() > 1e-5 * w || (k > 0 && w >= ws[k - 1]) {
            break;
        }
        ws.push(w);
        dws.push(0.5 * (dw_lo[k] + dw_hi[k]));
    }
    let k_match = ws.len() - 1;
    let r_match = k_match as f64 * h;
    if r_match < 5.0 / c.sqrt() {
        return Err(Error::Shooting(format!(
            "bracketing trajectories separate already at r = {r_match}"
        )));
    }

    let sqc = c.sqrt();
    let expo = (1.0 - dim as f64) / 2.0;
    let tail = |r: f64| (-sqc * r).exp() * r.powf(expo);
    let amp = ws[k_match] / tail(r_match);
    for k in (k_match + 1)..=steps {
        let r = k as f64 * h;
        let w = amp * tail(r);
        ws.push(w);
        dws.push(w * (-sqc + expo / r));
    }
    let r: Vec<f64> = (0..=steps).map(|k| k as f64 * h).collect();

    let mut profile = RadialProfile {
        dim,
        nonlinearity: *nl,
        r,
        w: ws,
        dw: dws,
        w0: 0.5 * (lo + hi),
        mu: f64::NAN,
        tail_c: f64::NAN,
        r_match,
        mass: f64::NAN,
        energy: f64::NAN,
    };
    profile.w[0] = profile.w0;
    if let Some(k) = profile.w.windows(2).position(|p| !(p[1] < p[0]) || p[1] <= 0.0) {
        return Err(Error::Shooting(format!(
            "profile not strictly positive and decreasing at r = {}",
            profile.r[k + 1]
        )));
    }
    let (tail_c, mu) = decay_rate_fit(&profile)?;
    profile.tail_c = tail_c;
    profile.mu = mu;
    profile.mass = ground_state_mass(&profile);
    profile.energy = ground_state_energy(&profile);
    Ok(profile)
}

impl RadialProfile {
    /// Builds a profile from given samples (uniform radii from 0) and fits its tail.
    /// Useful for checking the quadratures on synthetic inputs.
    pub fn from_samples(dim: usize, nonlinearity: Nonlinearity, r: Vec<f64>, w: Vec<f64>, dw: Vec<f64>) -> Result<Self> {
        if r.len() != w.len() || r.len() != dw.len() || r.len() < 3 || (r.len() - 1) % 2 != 0 {
            return Err(Error::InvalidParameter(
                "need an odd number (>= 3) of matching r, w, w' samples".into(),
            ));
        }
        let r_max = *r.last().expect("non-empty");
        let mut profile = RadialProfile {
            dim,
            nonlinearity,
            w0: w[0],
            r,
            w,
            dw,
            mu: f64::NAN,
            tail_c: f64::NAN,
            r_match: r_max,
            mass: f64::NAN,
            energy: f64::NAN,
        };
        let (tail_c, mu) = decay_rate_fit(&profile)?;
        profile.tail_c = tail_c;
        profile.mu = mu;
        profile.mass = ground_state_mass(&profile);
        profile.energy = ground_state_energy(&profile);
        Ok(profile)
    }

    pub fn r_max(&self) -> f64 {
        *self.r.last().expect("non-empty profile")
    }

    fn step(&self) -> f64 {
        self.r[1] - self.r[0]
    }

    fn tail(&self, r: f64) -> f64 {
        self.tail_c * (-self.mu * r).exp() * r.powf((1.0 - self.dim as f64) / 2.0)
    }

    /// `w(r)` by cubic Hermite interpolation, clamped between neighbouring samples;
    /// the fitted tail beyond the last sample.
    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= self.r_max() {
            return self.tail(r);
        }
        let h = self.step();
        let k = ((r / h) as usize).min(self.r.len() - 2);
        let s = (r - self.r[k]) / h;
        let (w0, w1) = (self.w[k], self.w[k + 1]);
        let (d0, d1) = (self.dw[k] * h, self.dw[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * w0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * w1
            + (s3 - s2) * d1;
        v.clamp(w0.min(w1), w0.max(w1))
    }

    /// Smallest constant `C` with `w(r) <= C exp(-mu r)` on the samples with `r > 1`.
    pub fn tail_bound_constant(&self) -> f64 {
        self.r
            .iter()
            .zip(&self.w)
            .filter(|(&r, _)| r > 1.0)
            .map(|(&r, &w)| w * (self.mu * r).exp())
            .fold(0.0, f64::max)
    }

    /// Two-column `(r, w)` CSV with the snapshot header convention.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "# nx={} ny=1 Lx={} Ly=1 t=0 name=w",
            self.r.len(),
            self.r_max()
        )?;
        for (r, w) in self.r.iter().zip(&self.w) {
            writeln!(out, "{r:.16e},{w:.16e}")?;
        }
        Ok(())
    }
}

/// Least-squares fit of `log(w r^((N-1)/2)) = log C - mu r` on the tail window.
/// Returns `(C, mu)`.
pub fn decay_rate_fit(profile: &RadialProfile) -> Result<(f64, f64)> {
    let c = profile.nonlinearity.c_delta;
    let w0 = profile.w0;
    let first_small = profile
        .r
        .iter()
        .zip(&profile.w)
        .find(|(_, &w)| w < 1e-3 * w0)
        .map(|(&r, _)| r)
        .unwrap_or(profile.r_max());
    let start = 1f64.max(5.0 / c.sqrt()).max(first_small);
    let end = profile.r_match;
    let expo = (profile.dim as f64 - 1.0) / 2.0;
    let floor = f64::MIN_POSITIVE / f64::EPSILON;
    let points: Vec<(f64, f64)> = profile
        .r
        .iter()
        .zip(&profile.w)
        .filter(|(&r, &w)| r >= start && r <= end && w > floor * w0.max(1.0))
        .map(|(&r, &w)| (r, (w * r.powf(expo)).ln()))
        .collect();
    if points.len() < 20 {
        return Err(Error::Shooting(format!(
            "only {} tail samples in [{start}, {end}] for the decay fit",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mean_r = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_r) * (p.1 - mean_y)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_r).powi(2)).sum();
    let slope = sxy / sxx;
    let mu = -slope;
    if !(mu > 0.0) {
        return Err(Error::Shooting(format!("fitted decay rate {mu} is not positive")));
    }
    Ok(((mean_y - slope * mean_r).exp(), mu))
}

/// Composite Simpson over the uniform samples, weighted by `|S^(N-1)| r^(N-1)`.
fn radial_simpson(profile: &RadialProfile, integrand: impl Fn(usize) -> f64) -> f64 {
    let n = profile.r.len() - 1;
    let h = profile.step();
    let area = sphere_area(profile.dim);
    let weight = |k: usize| profile.r[k].powi(profile.dim as i32 - 1);
    let mut s = 0.0;
    for k in 0..=n {
        let coef = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        s += coef * weight(k) * integrand(k);
    }
    area * s * h / 3.0
}

/// `|S^(N-1)| int_R^inf g(r) r^(N-1) dr` for a function decaying like the fitted tail.
fn radial_tail(profile: &RadialProfile, g: impl Fn(f64) -> f64) -> f64 {
    let start = profile.r_max();
    let length = 60.0 / profile.mu;
    let n = 4000;
    let h = length / n as f64;
    let mut s = 0.0;
    for k in 0..=n {
        let r = start + k as f64 * h;
        let coef = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        s += coef * g(r) * r.powi(profile.dim as i32 - 1);
    }
    sphere_area(profile.dim) * s * h / 3.0
}

/// `int_{R^N} w dz`, with the fitted tail completing the integral past `r_max`.
pub fn ground_state_mass(profile: &RadialProfile) -> f64 {
    radial_simpson(profile, |k| profile.w[k]) + radial_tail(profile, |r| profile.tail(r))
}

/// Radial integrals entering the energy and the Nehari identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialIntegrals {
    /// `int |w'|^2`
    pub gradient: f64,
    /// `int w^2`
    pub square: f64,
    /// `int F(w)`
    pub primitive: f64,
    /// `int f(w) w`
    pub nehari: f64,
}

pub fn radial_integrals(profile: &RadialProfile) -> RadialIntegrals {
    let nl = &profile.nonlinearity;
    let mu = profile.mu;
    let dtail = |r: f64| profile.tail(r) * (mu + (profile.dim as f64 - 1.0) / (2.0 * r));
    RadialIntegrals {
        gradient: radial_simpson(profile, |k| profile.dw[k].powi(2))
            + radial_tail(profile, |r| dtail(r).powi(2)),
        square: radial_simpson(profile, |k| profile.w[k].powi(2))
            + radial_tail(profile, |r| profile.tail(r).powi(2)),
        primitive: radial_simpson(profile, |k| nl.antiderivative(profile.w[k]))
            + radial_tail(profile, |r| nl.antiderivative(profile.tail(r))),
        nehari: radial_simpson(profile, |k| nl.f(profile.w[k]) * profile.w[k])
            + radial_tail(profile, |r| nl.f(profile.tail(r)) * profile.tail(r)),
    }
}

/// `I = 1/2 int (|w'|^2 + c w^2) - int F(w)` over `R^N`.
pub fn ground_state_energy(profile: &RadialProfile) -> f64 {
    let q = radial_integrals(profile);
    0.5 * (q.gradient + profile.nonlinearity.c_delta * q.square) - q.primitive
}
