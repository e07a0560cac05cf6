//! Runs a [`RunConfig`] and writes its artifacts and manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::{Mode, RunConfig};
use crate::diagnostics::{
    corner_migration_track, count_spikes, default_eta, locate_spikes, normal_decay_rate, platform_height, profile_match,
    superlevel_diameter, SpikeReport,
};
use crate::error::Result;
use crate::grid::{Field, Grid};
use crate::ground_state::{decay_rate_fit, shoot_ground_state, RadialProfile};
use crate::nonlocal::{extrapolate_to_zero, platform_limit_sweep, profile_radius, resolving_grid, solve_nonlocal, NonlocalSolution};
use crate::output::{emit_image, write_extremes_trace, write_field_csv, write_mass_trace, write_table};
use crate::presets::preset;
use crate::scalar::{analyze_delta, theta_bound, log_space, Roots};
use crate::timestepper::{run_observed, RunSummary, SimState};

pub const MANIFEST: &str = "manifest.txt";

/// Spike count threshold: maxima above `mean + 0.1 (max - mean)`.
pub const SPIKE_FRACTION: f64 = 0.1;

pub const DETERMINISM: &str =
    "deterministic: no random numbers, single-threaded kernels, fixed summation order; identical manifests give identical files";

#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: PathBuf,
    pub results: Vec<(String, String)>,
    pub spike: Option<SpikeReport>,
    pub simulation: Option<RunSummary>,
    pub steady: Option<NonlocalSolution>,
}

struct Collector {
    results: Vec<(String, String)>,
}

impl Collector {
    fn put(&mut self, key: &str, value: impl ToString) {
        self.results.push((key.to_string(), value.to_string()));
    }
}

/// Runs `cfg`, writing into `out` (or the configured directory).
pub fn run_config(cfg: &RunConfig, out: Option<&Path>) -> Result<RunOutcome> {
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(cfg.preset.as_deref().unwrap_or(cfg.mode.as_str())));
    std::fs::create_dir_all(&dir)?;
    let mut col = Collector { results: Vec::new() };
    let mut outcome = RunOutcome {
        manifest: dir.join(MANIFEST),
        dir: dir.clone(),
        results: Vec::new(),
        spike: None,
        simulation: None,
        steady: None,
    };
    match cfg.mode {
        Mode::AnalyzeDelta => analyze(cfg, &mut col)?,
        Mode::GroundState => ground_state(cfg, &dir, &mut col)?,
        Mode::SolveSteady => {
            let (sol, report) = solve_steady(cfg, &dir, &mut col)?;
            outcome.steady = Some(sol);
            outcome.spike = Some(report);
        }
        Mode::Simulate | Mode::Reproduce => {
            let (summary, report) = simulate(cfg, &dir, &mut col)?;
            outcome.simulation = Some(summary);
            outcome.spike = Some(report);
        }
        Mode::SweepEpsilon => sweep(cfg, &dir, &mut col)?,
    }
    outcome.results = col.results;
    std::fs::write(&outcome.manifest, manifest_text(cfg, &outcome.results, outcome.spike.as_ref()))?;
    Ok(outcome)
}

/// Runs a named preset.
pub fn run_preset(name: &str, out: Option<&Path>) -> Result<RunOutcome> {
    run_config(&RunConfig::from_preset(name)?, out)
}

/// Manifest: the configuration, then derived quantities and results in
/// sections that [`crate::config::parse_config`] skips.
pub fn manifest_text(cfg: &RunConfig, results: &[(String, String)], spike: Option<&SpikeReport>) -> String {
    let mut s = String::from("# spikekit run manifest\n");
    s.push_str(&cfg.to_config_text());
    let p = &cfg.params;
    let _ = writeln!(s, "\n[run]");
    let _ = writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "determinism = {DETERMINISM}");
    let _ = writeln!(s, "eps = {}", cfg.eps());
    let _ = writeln!(s, "p = {}", p.p());
    let _ = writeln!(s, "m = {}", p.m());
    let _ = writeln!(s, "M = {}", p.mass());
    if let Ok(domain) = cfg.grid.domain() {
        let bound = p.mass_bound(domain.volume());
        let holds = p.mass_hypothesis_holds(domain.volume());
        let _ = writeln!(s, "mass_bound = {bound}");
        let _ = writeln!(
            s,
            "mass_hypothesis = {}",
            if holds { "holds: M <= alpha c |Omega| / (beta (p - 1))" } else { "fails: M > alpha c |Omega| / (beta (p - 1))" }
        );
    }
    if let Some(name) = &cfg.preset {
        if let Ok(pr) = preset(name) {
            let _ = writeln!(s, "description = {}", pr.description);
            for (k, note) in pr.notes.iter().enumerate() {
                let _ = writeln!(s, "note_{k} = {note}");
            }
        }
    }
    let _ = writeln!(s, "\n[results]");
    for (k, v) in results {
        let _ = writeln!(s, "{k} = {v}");
    }
    if let Some(r) = spike {
        let _ = writeln!(s, "\n[spike]");
        for line in r.to_key_values().lines() {
            let (k, v) = line.split_once('=').unwrap_or((line, ""));
            let _ = writeln!(s, "{k} = {v}");
        }
    }
    s
}

fn analyze(cfg: &RunConfig, col: &mut Collector) -> Result<()> {
    let delta = cfg.steady.delta.expect("validated");
    let a = analyze_delta(&cfg.params, delta)?;
    col.put("delta", delta);
    col.put("delta0", a.delta0);
    match crate::scalar::solve_roots(&cfg.params, delta)? {
        Roots::Two { t1, t2 } => {
            col.put("roots", "two");
            col.put("t1", t1);
            col.put("t2", t2);
        }
        Roots::Double(t) => {
            col.put("roots", "double");
            col.put("t1", t);
        }
        Roots::None => col.put("roots", "none"),
    }
    col.put("t_star", a.t_star);
    col.put("c_delta", a.c_delta);
    col.put("t_delta", a.t_delta);
    let nl = a.nonlinearity();
    col.put("theta_bound", theta_bound(&nl, &log_space(1e-6, 1e6, 400)));
    Ok(())
}

fn ground_state(cfg: &RunConfig, dir: &Path, col: &mut Collector) -> Result<()> {
    let a = analyze_delta(&cfg.params, cfg.steady.delta.expect("validated"))?;
    let prof = shoot_ground_state(&a, cfg.grid.dim, cfg.steady.r_max)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("profile.csv"))?);
    prof.write_csv(&mut f)?;
    std::io::Write::flush(&mut f)?;
    put_profile(&prof, col)?;
    Ok(())
}

fn put_profile(prof: &RadialProfile, col: &mut Collector) -> Result<()> {
    let (c, mu) = decay_rate_fit(prof)?;
    col.put("w0", prof.w0);
    col.put("mu", mu);
    col.put("mu_expected", prof.nonlinearity.c_delta.sqrt());
    col.put("tail_c", c);
    col.put("tail_bound_constant", prof.tail_bound_constant());
    col.put("ground_state_mass", prof.mass);
    col.put("ground_state_energy", prof.energy);
    Ok(())
}

/// Spike report of a steady solution: locations from `v`, platform from `v`,
/// superlevel set, decay and profile match from `w`.
pub fn steady_report(sol: &NonlocalSolution, profile: &RadialProfile) -> SpikeReport {
    let mut report = locate_spikes(&sol.v);
    let eps = sol.eps;
    report.platform = platform_height(&sol.v, &report, eps).ok();
    let eta = default_eta(&sol.w);
    report.eta = Some(eta);
    report.superlevel_diameter = Some(superlevel_diameter(&sol.w, eta).diameter);
    report.decay_mu = normal_decay_rate(&sol.w, &report, eps, (1e-7, 1e-3)).ok();
    report.profile_error = Some(profile_match(&sol.w, profile, (report.primary.x, report.primary.y), eps));
    report
}

/// The ground state matching a steady solution's normalizer.
pub fn steady_profile(sol: &NonlocalSolution) -> Result<RadialProfile> {
    shoot_ground_state(&sol.analysis, sol.w.grid().dim(), profile_radius(sol.analysis.c_delta))
}

fn steady_grid(cfg: &RunConfig) -> Result<Grid> {
    match cfg.grid.nx {
        Some(_) => cfg.grid.build(),
        None => resolving_grid(&cfg.grid.domain()?, cfg.eps(), cfg.steady.cells_per_eps),
    }
}

fn solve_steady(cfg: &RunConfig, dir: &Path, col: &mut Collector) -> Result<(NonlocalSolution, SpikeReport)> {
    let grid = steady_grid(cfg)?;
    let sol = solve_nonlocal(cfg.eps(), &cfg.params, &grid)?;
    for (name, f) in [("w", &sol.w), ("v", &sol.v), ("u", &sol.u)] {
        write_field_csv(&dir.join(format!("{name}.csv")), f, 0.0, name)?;
        if cfg.images {
            emit_image(f, &dir.join(format!("{name}.ppm")))?;
        }
    }
    let prof = steady_profile(&sol)?;
    let report = steady_report(&sol, &prof);
    let (ru, rv) = crate::nonlocal::full_system_residual(&sol.u, &sol.v, &sol.params);
    col.put("grid", format!("{}x{}", grid.nx(), grid.ny()));
    col.put("delta_eps", sol.delta_eps);
    col.put("platform_t1", sol.platform);
    col.put("platform_limit", sol.params.m() / grid.domain().volume());
    col.put("constraint_residual", sol.constraint_residual);
    col.put("mass_residual", sol.mass_residual);
    col.put("residual_u", ru);
    col.put("residual_v", rv);
    col.put("bisection_steps", sol.bisection_steps);
    col.put("hypothesis_holds", sol.hypothesis_holds);
    Ok((sol, report))
}

fn sweep(cfg: &RunConfig, dir: &Path, col: &mut Collector) -> Result<()> {
    let domain = cfg.grid.domain()?;
    let pts = platform_limit_sweep(&cfg.params, &domain, &cfg.steady.eps_list, cfg.steady.cells_per_eps)?;
    let rows: Vec<Vec<String>> = pts
        .iter()
        .map(|p| match &p.outcome {
            Ok((d, t)) => vec![p.eps.to_string(), d.to_string(), t.to_string(), "ok".into()],
            Err(e) => vec![p.eps.to_string(), String::new(), String::new(), format!("\"{e}\"")],
        })
        .collect();
    write_table(&dir.join("sweep.csv"), "eps, delta_eps, platform, status", &rows)?;
    let ok: Vec<_> = pts.iter().filter_map(|p| Some((p.eps, p.delta()?, p.platform()?))).collect();
    col.put("solved", format!("{}/{}", ok.len(), pts.len()));
    let deltas: Vec<(f64, f64)> = ok.iter().map(|&(e, d, _)| (e, d)).collect();
    let plats: Vec<(f64, f64)> = ok.iter().map(|&(e, _, t)| (e, t)).collect();
    if let Some(d) = extrapolate_to_zero(&deltas) {
        col.put("delta_extrapolated", d);
    }
    if let Some(t) = extrapolate_to_zero(&plats) {
        col.put("platform_extrapolated", t);
    }
    let limit = cfg.params.m() / domain.volume();
    col.put("platform_limit", limit);
    if let Ok(d) = crate::scalar::delta_for_small_root(&cfg.params, limit) {
        col.put("delta_limit", d);
    }
    Ok(())
}

fn simulate(cfg: &RunConfig, dir: &Path, col: &mut Collector) -> Result<(RunSummary, SpikeReport)> {
    let grid = cfg.grid.build()?;
    let params = cfg.params;
    let state0 = SimState::new(cfg.u0.sample(&grid), cfg.v0.sample(&grid))?;
    let mut counts = vec![(state0.t, count_spikes(&state0.u, SPIKE_FRACTION))];
    let summary = run_observed(state0, &params, &cfg.scheme, |s| counts.push((s.t, count_spikes(&s.u, SPIKE_FRACTION))))?;
    for (k, snap) in summary.snapshots.iter().enumerate() {
        for (name, f) in [("u", &snap.u), ("v", &snap.v)] {
            write_field_csv(&dir.join(format!("{name}_{k:03}.csv")), f, snap.t, name)?;
            if cfg.images {
                emit_image(f, &dir.join(format!("{name}_{k:03}.ppm")))?;
            }
        }
    }
    let last = &summary.final_state;
    write_field_csv(&dir.join("u_final.csv"), &last.u, last.t, "u")?;
    write_field_csv(&dir.join("v_final.csv"), &last.v, last.t, "v")?;
    if cfg.images {
        emit_image(&last.u, &dir.join("u_final.ppm"))?;
        emit_image(&last.v, &dir.join("v_final.ppm"))?;
    }
    write_mass_trace(&dir.join("mass.csv"), &summary.trace)?;
    write_extremes_trace(&dir.join("extremes.csv"), &summary.trace)?;
    let rows: Vec<Vec<String>> = counts.iter().map(|(t, n)| vec![format!("{t:.16e}"), n.to_string()]).collect();
    write_table(&dir.join("spikes.csv"), "t, spike_count", &rows)?;

    col.put("steps", summary.steps);
    col.put("final_t", last.t);
    col.put("steady_at", summary.steady_at.map_or("none".to_string(), |t| t.to_string()));
    col.put("mass0", last.mass0);
    col.put("max_mass_drift", summary.max_mass_drift);
    col.put("u_max", last.u.max());
    col.put("u_min", last.u.min());
    col.put("v_max", last.v.max());
    col.put("v_min", last.v.min());
    col.put("u_minus_mean_sup", last.u.values().iter().map(|x| (x - last.mass0 / grid.domain().volume()).abs()).fold(0.0, f64::max));
    let (t_peak, n_peak) = counts.iter().fold((0.0, 0), |acc, &(t, n)| if n > acc.1 { (t, n) } else { acc });
    col.put("max_spike_count", n_peak);
    col.put("max_spike_count_t", t_peak);
    col.put("final_spike_count", counts.last().map_or(0, |c| c.1));
    if let Some(k) = first_spiky_snapshot(&summary.snapshots) {
        let fields: Vec<Field> = summary.snapshots[k..].iter().map(|s| s.u.clone()).chain([last.u.clone()]).collect();
        if let Ok(track) = corner_migration_track(&fields) {
            col.put("track_corner", format!("{},{}", track.corner.0, track.corner.1));
            col.put("track_monotone_after_transient", track.monotone_after(0, 1e-12));
        }
    }

    let mut report = locate_spikes(&last.u);
    report.platform = platform_height(&last.v, &report, params.eps()).ok();
    if cfg.preset.as_deref() == Some("fig2") {
        col.put("platform_measured_far_median", report.platform.map_or("unavailable".into(), |p| p.to_string()));
        col.put("platform_measured_v_min", last.v.min());
        col.put("platform_theory", params.beta() * params.mass() / (params.alpha() * grid.domain().volume()));
        col.put("platform_flag", "published 0.02 differs from theory");
    }
    Ok((summary, report))
}

/// First snapshot whose `u` peak stands well above its mean.
pub fn first_spiky_snapshot(snaps: &[SimState]) -> Option<usize> {
    snaps.iter().position(|s| {
        let mean = s.u.values().iter().sum::<f64>() / s.u.values().len() as f64;
        s.u.max() > 10.0 * mean
    })
}
