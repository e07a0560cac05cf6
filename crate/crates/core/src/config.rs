//! Run configuration: `key = value` lines grouped under `[section]` headers.
//!
//! `#` starts a comment. Top-level keys are `mode` and `preset`. Manifests
//! written by the harness use the same format, so a manifest parses back to
//! the configuration that produced it; its `[run]`, `[results]` and `[spike]`
//! sections are ignored on input.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{integrate, Domain, Grid};
use crate::presets::preset;
use crate::scalar::ModelParams;
use crate::timestepper::{CosineTerm, InitialData, SchemeConfig};

/// Defaults and keys, shown by `--help`.
pub const CONFIG_HELP: &str = "\
Config file: `key = value` lines under [section] headers, `#` comments.
  mode = analyze-delta | ground-state | solve-steady | simulate | reproduce | sweep-epsilon
  preset = fig1 | fig2 | fig3 | fig4a | fig4b | fig5   (base values; later keys override)
[params]   d1=1 d2=0.01 chi=3 alpha=1 beta=1 c=1
           mass: default int u0 when initial data are given, else required
[grid]     dim=2 nx=128 ny=nx lx=1 ly=1
           (solve-steady without nx: cells_per_eps cells per eps, at least 64)
[scheme]   dt_max=20 cfl_safety=0.5 steady_tol=1e-7 t_end=1000
           snapshot_times=0,10,100 (comma list)
[initial]  u_constant=3 v_constant=3
           u_term / v_term = amp, kx, sx, ky, sy   (repeatable;
           adds amp cos(kx pi (x - sx)) cos(ky pi (y - sy)))
[steady]   eps: default sqrt(d2/alpha)   delta (analyze-delta, ground-state)
           eps_list=0.08,0.04,0.02,0.01 cells_per_eps=16 r_max=40
[output]   dir=out images=true";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    AnalyzeDelta,
    GroundState,
    SolveSteady,
    Simulate,
    Reproduce,
    SweepEpsilon,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::AnalyzeDelta,
        Mode::GroundState,
        Mode::SolveSteady,
        Mode::Simulate,
        Mode::Reproduce,
        Mode::SweepEpsilon,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::AnalyzeDelta => "analyze-delta",
            Mode::GroundState => "ground-state",
            Mode::SolveSteady => "solve-steady",
            Mode::Simulate => "simulate",
            Mode::Reproduce => "reproduce",
            Mode::SweepEpsilon => "sweep-epsilon",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("unknown mode {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    /// `None` lets solve-steady pick a resolving grid.
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub lx: f64,
    pub ly: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { dim: 2, nx: None, ny: None, lx: 1.0, ly: 1.0 }
    }
}

impl GridSpec {
    pub const DEFAULT_CELLS: usize = 128;

    pub fn domain(&self) -> Result<Domain> {
        match self.dim {
            1 => Domain::interval(self.lx),
            2 => Domain::rectangle(self.lx, self.ly),
            d => Err(Error::Validation(format!("dim must be 1 or 2, got {d}"))),
        }
    }

    pub fn build(&self) -> Result<Grid> {
        let nx = self.nx.unwrap_or(Self::DEFAULT_CELLS);
        let domain = self.domain()?;
        match self.dim {
            1 => Grid::new_1d(domain, nx),
            _ => Grid::new_2d(domain, nx, self.ny.unwrap_or(nx)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadySpec {
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub eps_list: Vec<f64>,
    pub cells_per_eps: f64,
    pub r_max: f64,
}

impl Default for SteadySpec {
    fn default() -> Self {
        Self { eps: None, delta: None, eps_list: vec![0.08, 0.04, 0.02, 0.01], cells_per_eps: 16.0, r_max: 40.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub preset: Option<String>,
    pub params: ModelParams,
    pub grid: GridSpec,
    pub scheme: SchemeConfig,
    pub u0: InitialData,
    pub v0: InitialData,
    pub steady: SteadySpec,
    pub out_dir: Option<PathBuf>,
    pub images: bool,
}

impl RunConfig {
    /// Configuration that reproduces a named preset.
    pub fn from_preset(name: &str) -> Result<Self> {
        let p = preset(name)?;
        Ok(Self {
            mode: Mode::Reproduce,
            preset: Some(p.name.to_string()),
            params: p.params,
            grid: GridSpec { dim: 2, nx: Some(p.cells), ny: Some(p.cells), lx: 1.0, ly: 1.0 },
            scheme: p.scheme,
            u0: p.u0,
            v0: p.v0,
            steady: SteadySpec::default(),
            out_dir: None,
            images: true,
        })
    }

    /// `eps` for steady modes.
    pub fn eps(&self) -> f64 {
        self.steady.eps.unwrap_or_else(|| self.params.eps())
    }

    /// The configuration as config text; [`parse_config`] inverts it exactly.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mode = {}", self.mode.as_str());
        if let Some(p) = &self.preset {
            let _ = writeln!(s, "preset = {p}");
        }
        let p = &self.params;
        let _ = writeln!(s, "\n[params]");
        for (k, v) in [
            ("d1", p.d1()),
            ("d2", p.d2()),
            ("chi", p.chi()),
            ("alpha", p.alpha()),
            ("beta", p.beta()),
            ("c", p.c()),
            ("mass", p.mass()),
        ] {
            let _ = writeln!(s, "{k} = {v}");
        }
        let g = &self.grid;
        let _ = writeln!(s, "\n[grid]\ndim = {}", g.dim);
        if let Some(nx) = g.nx {
            let _ = writeln!(s, "nx = {nx}");
        }
        if let Some(ny) = g.ny {
            let _ = writeln!(s, "ny = {ny}");
        }
        let _ = writeln!(s, "lx = {}\nly = {}", g.lx, g.ly);
        let c = &self.scheme;
        let _ = writeln!(
            s,
            "\n[scheme]\ndt_max = {}\ncfl_safety = {}\nsteady_tol = {}\nt_end = {}\nsnapshot_times = {}",
            c.dt_max,
            c.cfl_safety,
            c.steady_tol,
            c.t_end,
            join(&c.snapshot_times)
        );
        let _ = writeln!(s, "\n[initial]\nu_constant = {}", self.u0.constant);
        for t in &self.u0.terms {
            let _ = writeln!(s, "u_term = {}", term_text(t));
        }
        let _ = writeln!(s, "v_constant = {}", self.v0.constant);
        for t in &self.v0.terms {
            let _ = writeln!(s, "v_term = {}", term_text(t));
        }
        let st = &self.steady;
        let _ = writeln!(s, "\n[steady]");
        if let Some(e) = st.eps {
            let _ = writeln!(s, "eps = {e}");
        }
        if let Some(d) = st.delta {
            let _ = writeln!(s, "delta = {d}");
        }
        let _ = writeln!(s, "eps_list = {}\ncells_per_eps = {}\nr_max = {}", join(&st.eps_list), st.cells_per_eps, st.r_max);
        let _ = writeln!(s, "\n[output]");
        if let Some(d) = &self.out_dir {
            let _ = writeln!(s, "dir = {}", d.display());
        }
        let _ = writeln!(s, "images = {}", self.images);
        s
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn term_text(t: &CosineTerm) -> String {
    format!("{}, {}, {}, {}, {}", t.amp, t.kx, t.sx, t.ky, t.sy)
}

/// Values collected before validation.
#[derive(Default)]
struct Raw {
    mode: Option<Mode>,
    preset: Option<String>,
    d1: Option<f64>,
    d2: Option<f64>,
    chi: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    c: Option<f64>,
    mass: Option<f64>,
    grid: GridSpec,
    scheme: Option<SchemeConfig>,
    u_constant: Option<f64>,
    v_constant: Option<f64>,
    u_terms: Option<Vec<CosineTerm>>,
    v_terms: Option<Vec<CosineTerm>>,
    /// Set once the file itself lists terms, which then replace preset terms.
    u_terms_local: bool,
    v_terms_local: bool,
    steady: SteadySpec,
    out_dir: Option<PathBuf>,
    images: bool,
}

fn parse_num<T: FromStr>(value: &str, line: usize, key: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Parse { line, msg: format!("{key}: cannot parse {value:?}") })
}

fn parse_list(value: &str, line: usize, key: &str) -> Result<Vec<f64>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse_num(v.trim(), line, key)).collect()
}

fn parse_term(value: &str, line: usize, key: &str) -> Result<CosineTerm> {
    let v = parse_list(value, line, key)?;
    if v.len() != 5 {
        return Err(Error::Parse { line, msg: format!("{key} needs 5 numbers (amp, kx, sx, ky, sy), got {}", v.len()) });
    }
    Ok(CosineTerm { amp: v[0], kx: v[1], sx: v[2], ky: v[3], sy: v[4] })
}

const IGNORED_SECTIONS: [&str; 3] = ["run", "results", "spike"];
const SECTIONS: [&str; 6] = ["params", "grid", "scheme", "initial", "steady", "output"];

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_as(text, None)
}

/// Like [`parse_config`], with `mode` (when given) replacing any `mode =`
/// line before validation.
pub fn parse_config_as(text: &str, mode: Option<Mode>) -> Result<RunConfig> {
    let mut raw = Raw { images: true, ..Raw::default() };
    let mut section = String::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Parse { line: line_no, msg: format!("malformed section header {line:?}") })?
                .trim();
            if !SECTIONS.contains(&name) && !IGNORED_SECTIONS.contains(&name) {
                return Err(Error::Parse { line: line_no, msg: format!("unknown section [{name}]") });
            }
            section = name.to_string();
            continue;
        }
        if IGNORED_SECTIONS.contains(&section.as_str()) {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: line_no, msg: format!("expected key = value, got {line:?}") })?;
        let (key, value) = (key.trim(), value.trim());
        apply(&mut raw, &section, key, value, line_no)?;
    }
    if mode.is_some() {
        raw.mode = mode;
    }
    finish(raw)
}

fn apply(raw: &mut Raw, section: &str, key: &str, value: &str, line: usize) -> Result<()> {
    let num = |v: &str| parse_num::<f64>(v, line, key);
    let unknown = || Err(Error::Parse { line, msg: format!("unknown key {key:?} in {}", if section.is_empty() { "top level".to_string() } else { format!("[{section}]") }) });
    match section {
        "" => match key {
            "mode" => raw.mode = Some(value.parse().map_err(|e: Error| Error::Parse { line, msg: e.to_string() })?),
            "preset" => {
                let base = RunConfig::from_preset(value).map_err(|e| Error::Parse { line, msg: e.to_string() })?;
                let p = base.params;
                raw.preset = Some(value.to_string());
                raw.d1 = Some(p.d1());
                raw.d2 = Some(p.d2());
                raw.chi = Some(p.chi());
                raw.alpha = Some(p.alpha());
                raw.beta = Some(p.beta());
                raw.c = Some(p.c());
                raw.mass = Some(p.mass());
                raw.grid = base.grid;
                raw.scheme = Some(base.scheme);
                raw.u_constant = Some(base.u0.constant);
                raw.v_constant = Some(base.v0.constant);
                raw.u_terms = Some(base.u0.terms);
                raw.v_terms = Some(base.v0.terms);
            }
            _ => return unknown(),
        },
        "params" => {
            let slot = match key {
                "d1" => &mut raw.d1,
                "d2" => &mut raw.d2,
                "chi" => &mut raw.chi,
                "alpha" => &mut raw.alpha,
                "beta" => &mut raw.beta,
                "c" => &mut raw.c,
                "mass" => &mut raw.mass,
                _ => return unknown(),
            };
            *slot = Some(num(value)?);
        }
        "grid" => match key {
            "dim" => raw.grid.dim = parse_num(value, line, key)?,
            "nx" => raw.grid.nx = Some(parse_num(value, line, key)?),
            "ny" => raw.grid.ny = Some(parse_num(value, line, key)?),
            "lx" => raw.grid.lx = num(value)?,
            "ly" => raw.grid.ly = num(value)?,
            _ => return unknown(),
        },
        "scheme" => {
            let s = raw.scheme.get_or_insert_with(default_scheme);
            match key {
                "dt_max" => s.dt_max = num(value)?,
                "cfl_safety" => s.cfl_safety = num(value)?,
                "steady_tol" => s.steady_tol = num(value)?,
                "t_end" => s.t_end = num(value)?,
                "snapshot_times" => s.snapshot_times = parse_list(value, line, key)?,
                _ => return unknown(),
            }
        }
        "initial" => match key {
            "u_constant" => raw.u_constant = Some(num(value)?),
            "v_constant" => raw.v_constant = Some(num(value)?),
            "u_term" => {
                let t = parse_term(value, line, key)?;
                if !std::mem::replace(&mut raw.u_terms_local, true) {
                    raw.u_terms = Some(Vec::new());
                }
                raw.u_terms.get_or_insert_with(Vec::new).push(t);
            }
            "v_term" => {
                let t = parse_term(value, line, key)?;
                if !std::mem::replace(&mut raw.v_terms_local, true) {
                    raw.v_terms = Some(Vec::new());
                }
                raw.v_terms.get_or_insert_with(Vec::new).push(t);
            }
            _ => return unknown(),
        },
        "steady" => match key {
            "eps" => raw.steady.eps = Some(num(value)?),
            "delta" => raw.steady.delta = Some(num(value)?),
            "eps_list" => raw.steady.eps_list = parse_list(value, line, key)?,
            "cells_per_eps" => raw.steady.cells_per_eps = num(value)?,
            "r_max" => raw.steady.r_max = num(value)?,
            _ => return unknown(),
        },
        "output" => match key {
            "dir" => raw.out_dir = Some(PathBuf::from(value)),
            "images" => {
                raw.images = value.parse().map_err(|_| Error::Parse { line, msg: format!("images: expected true or false, got {value:?}") })?
            }
            _ => return unknown(),
        },
        _ => unreachable!("sections are checked on entry"),
    }
    Ok(())
}

fn default_scheme() -> SchemeConfig {
    SchemeConfig { dt_max: 20.0, t_end: 1000.0, ..SchemeConfig::default() }
}

fn finish(raw: Raw) -> Result<RunConfig> {
    let mode = match (raw.mode, &raw.preset) {
        (Some(m), _) => m,
        (None, Some(_)) => Mode::Reproduce,
        (None, None) => return Err(Error::Validation("mode is required".into())),
    };
    if mode == Mode::Reproduce && raw.preset.is_none() {
        return Err(Error::Validation("reproduce mode needs a preset".into()));
    }
    let has_initial = raw.u_constant.is_some() || raw.u_terms.is_some();
    let u0 = InitialData { constant: raw.u_constant.unwrap_or(0.0), terms: raw.u_terms.unwrap_or_default() };
    let v0 = InitialData { constant: raw.v_constant.unwrap_or(0.0), terms: raw.v_terms.unwrap_or_default() };
    let grid = raw.grid;
    grid.domain()?;
    if let Some(n) = grid.nx.into_iter().chain(grid.ny).find(|&n| n < crate::grid::MIN_CELLS) {
        return Err(Error::Validation(format!("grid needs at least {} cells per side, got {n}", crate::grid::MIN_CELLS)));
    }
    let simulating = matches!(mode, Mode::Simulate | Mode::Reproduce);
    if simulating && !has_initial {
        return Err(Error::Validation("simulate needs initial data in [initial]".into()));
    }
    let mass = match raw.mass {
        Some(m) => m,
        None if has_initial => integrate(&u0.sample(&grid.build()?)),
        None => return Err(Error::Validation("mass is required when no initial data are given".into())),
    };
    let params = ModelParams::new(
        raw.d1.unwrap_or(1.0),
        raw.d2.unwrap_or(0.01),
        raw.chi.unwrap_or(3.0),
        raw.alpha.unwrap_or(1.0),
        raw.beta.unwrap_or(1.0),
        raw.c.unwrap_or(1.0),
        mass,
    )
    .map_err(|e| Error::Validation(e.to_string()))?;
    let scheme = raw.scheme.unwrap_or_else(default_scheme);
    scheme.validate()?;
    let steady = raw.steady;
    if let Some(e) = steady.eps {
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::Validation(format!("eps must be positive, got {e}")));
        }
    }
    if steady.eps_list.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::Validation("eps_list entries must be positive".into()));
    }
    if !(steady.cells_per_eps > 0.0) || !(steady.r_max > 0.0) {
        return Err(Error::Validation("cells_per_eps and r_max must be positive".into()));
    }
    if matches!(mode, Mode::AnalyzeDelta | Mode::GroundState) && steady.delta.is_none() {
        return Err(Error::Validation(format!("{} needs [steady] delta", mode.as_str())));
    }
    if mode == Mode::SweepEpsilon && steady.eps_list.is_empty() {
        return Err(Error::Validation("sweep-epsilon needs a non-empty eps_list".into()));
    }
    if simulating && !(u0.sample(&grid.build()?).min() >= 0.0 && v0.sample(&grid.build()?).min() >= 0.0) {
        return Err(Error::Validation("initial data must be nonnegative".into()));
    }
    Ok(RunConfig {
        mode,
        preset: raw.preset,
        params,
        grid,
        scheme,
        u0,
        v0,
        steady,
        out_dir: raw.out_dir,
        images: raw.images,
    })
}
