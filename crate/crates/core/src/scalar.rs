//! Scalar structure of the fixed-normalizer problem.
//!
//! For a fixed normalizer `delta` the steady chemical profile balances
//! `R_delta(t) = -t + m (t + c)^p / delta`. This module locates the roots of
//! `R_delta`, the existence threshold `delta0`, and the shifted nonlinearity
//! `f_delta` obtained by writing `v = delta^(1/(p-1)) w + t1`.

use crate::error::{Error, Result};

/// Physical parameters of the chemotaxis system together with the total cell mass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    d1: f64,
    d2: f64,
    chi: f64,
    alpha: f64,
    beta: f64,
    c: f64,
    mass: f64,
}

impl ModelParams {
    pub fn new(d1: f64, d2: f64, chi: f64, alpha: f64, beta: f64, c: f64, mass: f64) -> Result<Self> {
        let named = [
            ("d1", d1),
            ("d2", d2),
            ("chi", chi),
            ("alpha", alpha),
            ("beta", beta),
            ("c", c),
            ("mass", mass),
        ];
        for (name, value) in named {
            // chi = 0 switches chemotaxis off, which is a valid (if degenerate) system.
            let ok = if name == "chi" { value >= 0.0 } else { value > 0.0 };
            if !(value.is_finite() && ok) {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {value}")));
            }
        }
        Ok(Self { d1, d2, chi, alpha, beta, c, mass })
    }

    /// Parameters of the reduced problem: `d1 = alpha = beta = 1`, so `chi = p`,
    /// `d2 = eps^2` and the total mass equals `m`.
    pub fn reduced(eps: f64, p: f64, c: f64, m: f64) -> Result<Self> {
        Self::new(1.0, eps * eps, p, 1.0, 1.0, c, m)
    }

    pub fn with_mass(&self, mass: f64) -> Result<Self> {
        Self::new(self.d1, self.d2, self.chi, self.alpha, self.beta, self.c, mass)
    }

    pub fn with_d2(&self, d2: f64) -> Result<Self> {
        Self::new(self.d1, d2, self.chi, self.alpha, self.beta, self.c, self.mass)
    }

    pub fn d1(&self) -> f64 {
        self.d1
    }
    pub fn d2(&self) -> f64 {
        self.d2
    }
    pub fn chi(&self) -> f64 {
        self.chi
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    /// Total cell mass `M`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `eps = sqrt(d2 / alpha)`.
    pub fn eps(&self) -> f64 {
        (self.d2 / self.alpha).sqrt()
    }

    /// `p = chi / d1`.
    pub fn p(&self) -> f64 {
        self.chi / self.d1
    }

    /// `m = beta M / alpha`.
    pub fn m(&self) -> f64 {
        self.beta * self.mass / self.alpha
    }

    /// `p > 1`, and `p < (N+2)/(N-2)` when `dim >= 3`.
    pub fn is_subcritical(&self, dim: usize) -> bool {
        let p = self.p();
        if p <= 1.0 {
            return false;
        }
        if dim >= 3 {
            let n = dim as f64;
            return p < (n + 2.0) / (n - 2.0);
        }
        true
    }

    /// Upper bound on the mass for which boundary spikes are guaranteed,
    /// `alpha c |Omega| / (beta (p - 1))`.
    pub fn mass_bound(&self, volume: f64) -> f64 {
        self.alpha * self.c * volume / (self.beta * (self.p() - 1.0))
    }

    /// Whether `M <= alpha c |Omega| / (beta (p-1))`. Recorded, never enforced.
    pub fn mass_hypothesis_holds(&self, volume: f64) -> bool {
        self.p() > 1.0 && self.mass <= self.mass_bound(volume)
    }
}

/// Shifted nonlinearity `f(w) = m((w + t)^p - p t^(p-1) w - t^p)` of the
/// transformed equation `eps^2 Lap w - c_delta w + f(w) = 0`.
///
/// Negative arguments are truncated: `f(w) = F(w) = 0` for `w < 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nonlinearity {
    pub m: f64,
    pub p: f64,
    pub t_delta: f64,
    pub c_delta: f64,
}

/// Below this ratio `w / t_delta` the binomial series replaces the closed form,
/// which would cancel catastrophically.
const SERIES_SWITCH: f64 = 0.05;

/// `sum_{k >= k0} C(a, k) x^k` for small `|x|`.
fn binomial_tail(a: f64, x: f64, k0: u32) -> f64 {
    let mut coeff = 1.0;
    for k in 1..=k0 {
        coeff *= (a - (k as f64 - 1.0)) / k as f64;
    }
    let mut term = coeff * x.powi(k0 as i32);
    let mut sum = 0.0;
    let mut k = k0;
    while k < k0 + 80 {
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        term *= (a - k as f64) / (k as f64 + 1.0) * x;
        k += 1;
    }
    sum
}

impl Nonlinearity {
    /// The limiting pure-power nonlinearity `m w^p` (normalizer sent to infinity).
    pub fn pure_power(m: f64, p: f64, c_delta: f64) -> Self {
        Self { m, p, t_delta: 0.0, c_delta }
    }

    pub fn f(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        let (m, p, t) = (self.m, self.p, self.t_delta);
        if t == 0.0 {
            return m * w.powf(p);
        }
        let x = w / t;
        if x <= SERIES_SWITCH {
            m * t.powf(p) * binomial_tail(p, x, 2)
        } else {
            m * ((w + t).powf(p) - p * t.powf(p - 1.0) * w - t.powf(p))
        }
    }

    /// `F(w) = int_0^w f(s) ds`.
    pub fn antiderivative(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        let (m, p, t) = (self.m, self.p, self.t_delta);
        if t == 0.0 {
            return m * w.powf(p + 1.0) / (p + 1.0);
        }
        let x = w / t;
        if x <= SERIES_SWITCH {
            m * t.powf(p + 1.0) / (p + 1.0) * binomial_tail(p + 1.0, x, 3)
        } else {
            m * ((w + t).powf(p + 1.0) / (p + 1.0)
                - 0.5 * p * t.powf(p - 1.0) * w * w
                - t.powf(p) * w
                - t.powf(p + 1.0) / (p + 1.0))
        }
    }

    /// `f'(w)`, zero for negative arguments.
    pub fn derivative(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        let (m, p, t) = (self.m, self.p, self.t_delta);
        if t == 0.0 {
            return m * p * w.powf(p - 1.0);
        }
        let x = w / t;
        if x <= SERIES_SWITCH {
            m * p * t.powf(p - 1.0) * binomial_tail(p - 1.0, x, 1)
        } else {
            m * p * ((w + t).powf(p - 1.0) - t.powf(p - 1.0))
        }
    }
}

/// Roots of `R_delta` on `(0, inf)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Roots {
    Two { t1: f64, t2: f64 },
    Double(f64),
    None,
}

/// Everything the transformed problem needs at one value of the normalizer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaAnalysis {
    pub m: f64,
    pub p: f64,
    pub c: f64,
    pub delta: f64,
    pub delta0: f64,
    pub t1: f64,
    pub t2: f64,
    pub t_star: f64,
    pub c_delta: f64,
    pub t_delta: f64,
}

impl DeltaAnalysis {
    pub fn nonlinearity(&self) -> Nonlinearity {
        Nonlinearity {
            m: self.m,
            p: self.p,
            t_delta: self.t_delta,
            c_delta: self.c_delta,
        }
    }

    /// `delta^(1/(p-1))`, the amplitude factor in `v = scale * w + t1`.
    pub fn scale(&self) -> f64 {
        self.delta.powf(1.0 / (self.p - 1.0))
    }

    /// The constant positive solution `(t2 - t1) delta^(-1/(p-1))` of the transformed problem.
    pub fn constant_solution(&self) -> f64 {
        (self.t2 - self.t1) / self.scale()
    }

    pub fn f(&self, w: f64) -> f64 {
        self.nonlinearity().f(w)
    }

    pub fn antiderivative(&self, w: f64) -> f64 {
        self.nonlinearity().antiderivative(w)
    }
}

/// `R_delta(t) = -t + m (t+c)^p / delta`.
pub fn reaction(params: &ModelParams, delta: f64, t: f64) -> f64 {
    -t + params.m() * (t + params.c()).powf(params.p()) / delta
}

fn reaction_derivative(params: &ModelParams, delta: f64, t: f64) -> f64 {
    let p = params.p();
    -1.0 + params.m() * p * (t + params.c()).powf(p - 1.0) / delta
}

fn require_superlinear(params: &ModelParams) -> Result<()> {
    if params.p() <= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "p = chi/d1 must exceed 1, got {}",
            params.p()
        )));
    }
    Ok(())
}

/// Existence threshold `delta0 = m p (p c / (p-1))^(p-1)`.
pub fn delta_lower_bound(params: &ModelParams) -> Result<f64> {
    require_superlinear(params)?;
    let (m, p, c) = (params.m(), params.p(), params.c());
    Ok(m * p * (p * c / (p - 1.0)).powf(p - 1.0))
}

/// Minimiser of `R_delta`: `(delta / (m p))^(1/(p-1)) - c`.
pub fn critical_point(params: &ModelParams, delta: f64) -> f64 {
    let p = params.p();
    (delta / (params.m() * p)).powf(1.0 / (p - 1.0)) - params.c()
}

fn at_threshold(delta: f64, delta0: f64) -> bool {
    (delta - delta0).abs() <= 1e-10 * delta0
}

/// Root of `g` on `[lo, hi]` where `g(lo)` and `g(hi)` differ in sign.
/// Newton steps are taken when they stay inside the bracket, bisection otherwise.
pub(crate) fn safeguarded_newton(
    g: impl Fn(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    rel_tol: f64,
) -> f64 {
    let (g_lo, _) = g(lo);
    let (g_hi, _) = g(hi);
    if g_lo == 0.0 {
        return lo;
    }
    if g_hi == 0.0 {
        return hi;
    }
    let lo_negative = g_lo < 0.0;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..400 {
        let (gx, dgx) = g(x);
        if gx == 0.0 {
            return x;
        }
        if (gx < 0.0) == lo_negative {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - gx / dgx;
        let next = if dgx != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - x).abs();
        x = next;
        if step <= rel_tol * x.abs() || (hi - lo) <= rel_tol * x.abs() {
            break;
        }
    }
    x
}

/// Positive roots of `R_delta`, bracketed by the critical point.
pub fn solve_roots(params: &ModelParams, delta: f64) -> Result<Roots> {
    let delta0 = delta_lower_bound(params)?;
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    let p = params.p();
    if at_threshold(delta, delta0) {
        return Ok(Roots::Double(params.c() / (p - 1.0)));
    }
    if delta < delta0 {
        return Ok(Roots::None);
    }
    let t_star = critical_point(params, delta);
    let upper = (delta / params.m()).powf(1.0 / (p - 1.0));
    let g = |t: f64| (reaction(params, delta, t), reaction_derivative(params, delta, t));
    let t1 = safeguarded_newton(g, 0.0, t_star, 1e-15);
    let t2 = safeguarded_newton(g, t_star, upper, 1e-15);
    Ok(Roots::Two { t1, t2 })
}

/// Full scalar structure at `delta >= delta0`.
pub fn analyze_delta(params: &ModelParams, delta: f64) -> Result<DeltaAnalysis> {
    let delta0 = delta_lower_bound(params)?;
    let (m, p, c) = (params.m(), params.p(), params.c());
    let (t1, t2, t_star) = match solve_roots(params, delta)? {
        Roots::None => return Err(Error::BelowThreshold { delta, delta0 }),
        Roots::Double(t) => (t, t, t),
        Roots::Two { t1, t2 } => (t1, t2, critical_point(params, delta)),
    };
    let c_delta = if t1 == t2 {
        0.0
    } else {
        1.0 - p * t1 / (t1 + c)
    };
    debug_assert!(
        t1 == t2 || (c_delta - (1.0 - m * p / delta * (t1 + c).powf(p - 1.0))).abs() <= 1e-10,
        "c_delta formulas disagree"
    );
    let t_delta = (t1 + c) * delta.powf(-1.0 / (p - 1.0));
    Ok(DeltaAnalysis {
        m,
        p,
        c,
        delta,
        delta0,
        t1,
        t2,
        t_star,
        c_delta,
        t_delta,
    })
}

/// The normalizer at which the smaller root equals `t`: `m (t+c)^p / t`.
/// Valid on the smaller-root branch, i.e. for `0 < t < c/(p-1)`.
pub fn delta_for_small_root(params: &ModelParams, t: f64) -> Result<f64> {
    require_superlinear(params)?;
    let limit = params.c() / (params.p() - 1.0);
    if !(t > 0.0 && t < limit) {
        return Err(Error::InvalidParameter(format!(
            "target root {t} must lie in (0, c/(p-1) = {limit})"
        )));
    }
    Ok(params.m() * (t + params.c()).powf(params.p()) / t)
}

/// `sup_t F(t) / (f(t) t)` over the sample points.
pub fn theta_bound(nl: &Nonlinearity, t_grid: &[f64]) -> f64 {
    t_grid
        .iter()
        .filter(|&&t| t > 0.0)
        .map(|&t| nl.antiderivative(t) / (nl.f(t) * t))
        .filter(|r| r.is_finite())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Witness `(a1, a2)` for the envelope `f(t) <= a1 + a2 t^p`, with `a2 = 2m` fixed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthEnvelope {
    pub a1: f64,
    pub a2: f64,
}

pub fn growth_envelope_check(nl: &Nonlinearity, t_grid: &[f64]) -> GrowthEnvelope {
    let a2 = 2.0 * nl.m;
    let a1 = t_grid
        .iter()
        .map(|&t| nl.f(t) - a2 * t.max(0.0).powf(nl.p))
        .fold(0.0, f64::max);
    GrowthEnvelope { a1, a2 }
}

/// `n` log-spaced points from `a` to `b` inclusive.
pub fn log_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && a > 0.0 && b > 0.0);
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                b
            } else {
                (la + (lb - la) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}
