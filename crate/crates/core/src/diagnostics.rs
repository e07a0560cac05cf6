//! Spike structure read off computed fields.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::ground_state::RadialProfile;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryClass {
    Interior,
    Edge,
    Corner,
}

impl BoundaryClass {
    pub fn of(grid: &Grid, i: usize, j: usize) -> Self {
        let on_x = i == 0 || i + 1 == grid.nx();
        let on_y = grid.dim() == 2 && (j == 0 || j + 1 == grid.ny());
        match (on_x, on_y) {
            (true, true) => BoundaryClass::Corner,
            (false, false) => BoundaryClass::Interior,
            _ => BoundaryClass::Edge,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryClass::Interior => "interior",
            BoundaryClass::Edge => "edge",
            BoundaryClass::Corner => "corner",
        }
    }

    pub fn on_boundary(self) -> bool {
        self != BoundaryClass::Interior
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpikeLocation {
    pub i: usize,
    pub j: usize,
    pub x: f64,
    pub y: f64,
    pub value: f64,
    pub class: BoundaryClass,
}

impl SpikeLocation {
    fn at(f: &Field, i: usize, j: usize) -> Self {
        let g = f.grid();
        let (x, y) = g.center(i, j);
        Self { i, j, x, y, value: f.get(i, j), class: BoundaryClass::of(g, i, j) }
    }

    pub fn distance_to(&self, p: (f64, f64)) -> f64 {
        (self.x - p.0).hypot(self.y - p.1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpikeReport {
    /// Local maxima, primary first, the rest in descending value.
    pub locations: Vec<SpikeLocation>,
    pub primary: SpikeLocation,
    pub boundary_class: BoundaryClass,
    pub platform: Option<f64>,
    pub superlevel_diameter: Option<f64>,
    pub decay_mu: Option<f64>,
    pub profile_error: Option<f64>,
    pub eta: Option<f64>,
}

impl SpikeReport {
    /// `key=value` lines for manifests.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let p = &self.primary;
        let _ = writeln!(s, "spike_count={}", self.locations.len());
        let _ = writeln!(s, "primary_x={}", p.x);
        let _ = writeln!(s, "primary_y={}", p.y);
        let _ = writeln!(s, "primary_value={}", p.value);
        let _ = writeln!(s, "boundary_class={}", self.boundary_class.as_str());
        for (k, loc) in self.locations.iter().enumerate() {
            let _ = writeln!(s, "location_{k}={},{},{},{}", loc.x, loc.y, loc.value, loc.class.as_str());
        }
        let opt = |name: &str, v: Option<f64>, s: &mut String| {
            if let Some(v) = v {
                let _ = writeln!(s, "{name}={v}");
            }
        };
        opt("platform", self.platform, &mut s);
        opt("superlevel_diameter", self.superlevel_diameter, &mut s);
        opt("decay_mu", self.decay_mu, &mut s);
        opt("profile_error", self.profile_error, &mut s);
        opt("eta", self.eta, &mut s);
        s
    }
}

/// Fields whose spread is below this fraction of their size count as flat.
const FLAT_SPREAD: f64 = 1e-9;

fn neighbours(g: &Grid, i: usize, j: usize, diagonal: bool) -> impl Iterator<Item = (usize, usize)> {
    let (nx, ny) = (g.nx() as i64, g.ny() as i64);
    let offsets: &[(i64, i64)] = if diagonal {
        &[(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)]
    } else {
        &[(0, -1), (-1, 0), (1, 0), (0, 1)]
    };
    offsets.iter().filter_map(move |&(di, dj)| {
        let (a, b) = (i as i64 + di, j as i64 + dj);
        (a >= 0 && b >= 0 && a < nx && b < ny).then_some((a as usize, b as usize))
    })
}

/// Local maxima over the 4-neighbourhood (2-neighbourhood in 1D).
///
/// Plateaus of equal values count once, at their first cell, if every cell
/// bordering the plateau is strictly lower. A flat field reports its argmax.
pub fn locate_spikes(f: &Field) -> SpikeReport {
    let g = *f.grid();
    let vals = f.values();
    let (lo, hi) = (f.min(), f.max());
    let mut locations = Vec::new();
    if hi - lo > FLAT_SPREAD * hi.abs().max(lo.abs()) {
        let weak: Vec<bool> = (0..g.len())
            .map(|k| {
                let (i, j) = (k % g.nx(), k / g.nx());
                neighbours(&g, i, j, false).all(|(a, b)| f.get(a, b) <= vals[k])
            })
            .collect();
        let mut seen = vec![false; g.len()];
        for start in 0..g.len() {
            if !weak[start] || seen[start] {
                continue;
            }
            // Flood the plateau of equal weak maxima containing `start`.
            let level = vals[start];
            let mut stack = vec![start];
            let mut strict = true;
            seen[start] = true;
            while let Some(k) = stack.pop() {
                let (i, j) = (k % g.nx(), k / g.nx());
                for (a, b) in neighbours(&g, i, j, false) {
                    let n = g.index(a, b);
                    if vals[n] == level {
                        if !seen[n] {
                            seen[n] = true;
                            stack.push(n);
                        }
                        if !weak[n] {
                            strict = false;
                        }
                    }
                }
            }
            if strict {
                locations.push(SpikeLocation::at(f, start % g.nx(), start / g.nx()));
            }
        }
    }
    if locations.is_empty() {
        let k = f.argmax();
        locations.push(SpikeLocation::at(f, k % g.nx(), k / g.nx()));
    }
    // Stable sort keeps lexicographic (row-major) order among ties.
    locations.sort_by(|a, b| b.value.total_cmp(&a.value));
    let primary = locations[0];
    SpikeReport {
        locations,
        primary,
        boundary_class: primary.class,
        platform: None,
        superlevel_diameter: None,
        decay_mu: None,
        profile_error: None,
        eta: None,
    }
}

/// Far-field cut in units of `eps`.
pub const PLATFORM_CUT: f64 = 10.0;
/// Minimum share of cells in the far field.
pub const PLATFORM_MIN_FRACTION: f64 = 0.1;

/// Median of `v` over cells farther than `10 eps` from the primary spike.
pub fn platform_height(v: &Field, report: &SpikeReport, eps: f64) -> Result<f64> {
    let g = v.grid();
    let p = (report.primary.x, report.primary.y);
    let mut far: Vec<f64> = (0..g.ny())
        .flat_map(|j| (0..g.nx()).map(move |i| (i, j)))
        .filter(|&(i, j)| {
            let (x, y) = g.center(i, j);
            (x - p.0).hypot(y - p.1) > PLATFORM_CUT * eps
        })
        .map(|(i, j)| v.get(i, j))
        .collect();
    let fraction = far.len() as f64 / g.len() as f64;
    if fraction < PLATFORM_MIN_FRACTION {
        return Err(Error::FarFieldTooSmall { far_fraction: fraction });
    }
    far.sort_by(f64::total_cmp);
    let n = far.len();
    Ok(if n % 2 == 1 { far[n / 2] } else { 0.5 * (far[n / 2 - 1] + far[n / 2]) })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Superlevel {
    pub diameter: f64,
    pub cells: usize,
    pub empty: bool,
}

/// Diameter of the cell-centre set `{w > eta}`.
pub fn superlevel_diameter(w: &Field, eta: f64) -> Superlevel {
    let g = w.grid();
    // The farthest pair is always among the row extremes.
    let mut extremes = Vec::new();
    let mut cells = 0;
    for j in 0..g.ny() {
        let row: Vec<usize> = (0..g.nx()).filter(|&i| w.get(i, j) > eta).collect();
        cells += row.len();
        if let (Some(&a), Some(&b)) = (row.first(), row.last()) {
            extremes.push(g.center(a, j));
            if b != a {
                extremes.push(g.center(b, j));
            }
        }
    }
    let mut diameter = 0.0f64;
    for (k, p) in extremes.iter().enumerate() {
        for q in &extremes[k + 1..] {
            diameter = diameter.max((p.0 - q.0).hypot(p.1 - q.1));
        }
    }
    Superlevel { diameter, cells, empty: cells == 0 }
}

/// Default superlevel threshold, a tenth of the maximum.
pub fn default_eta(w: &Field) -> f64 {
    0.1 * w.max()
}

/// `sup |w(x) - w_d(|x - P| / eps)| / w_d(0)`.
pub fn profile_match(w: &Field, profile: &RadialProfile, point: (f64, f64), eps: f64) -> f64 {
    let g = w.grid();
    let mut err = 0.0f64;
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let (x, y) = g.center(i, j);
            let r = (x - point.0).hypot(y - point.1) / eps;
            err = err.max((w.get(i, j) - profile.eval(r)).abs());
        }
    }
    err / profile.w0
}

/// Least-squares line `y = a + b x`, returning `(a, b, r2)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let b = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (my - b * mx, b, r2)
}

/// Decay rate `mu` from a log-linear fit of `w` along the inward normal from
/// the primary spike, using the band `w in [lo, hi] * w_max`.
///
/// The normal runs along x for edge spikes on a vertical side and corners,
/// along y for edge spikes on a horizontal side. Interior spikes use +x.
pub fn normal_decay_rate(w: &Field, report: &SpikeReport, eps: f64, band: (f64, f64)) -> Result<f64> {
    let g = w.grid();
    let p = report.primary;
    let along_y = g.dim() == 2 && p.class == BoundaryClass::Edge && p.i != 0 && p.i + 1 != g.nx();
    let n = if along_y { g.ny() } else { g.nx() };
    let start = if along_y { p.j } else { p.i };
    let step: i64 = if start + 1 == n { -1 } else { 1 };
    let (lo, hi) = (band.0 * p.value, band.1 * p.value);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut k = start as i64;
    while k >= 0 && (k as usize) < n {
        let (i, j) = if along_y { (p.i, k as usize) } else { (k as usize, p.j) };
        let val = w.get(i, j);
        if val < lo {
            break;
        }
        if val <= hi {
            let (x, y) = g.center(i, j);
            xs.push((x - p.x).hypot(y - p.y));
            ys.push(val.ln());
        }
        k += step;
    }
    if xs.len() < 3 {
        return Err(Error::Resolution { cells_per_radius: xs.len() as f64 });
    }
    let (_, slope, _) = linear_fit(&xs, &ys);
    Ok(-slope * eps)
}

/// Nearest domain corner to a point.
pub fn nearest_corner(grid: &Grid, p: (f64, f64)) -> (f64, f64) {
    let d = grid.domain();
    let cx = if p.0 <= 0.5 * d.lx() { 0.0 } else { d.lx() };
    let cy = if grid.dim() == 1 || p.1 <= 0.5 * d.ly() { 0.0 } else { d.ly() };
    (cx, cy)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MigrationTrack {
    pub path: Vec<SpikeLocation>,
    /// Distance of each point to `corner`.
    pub distances: Vec<f64>,
    /// Corner nearest the final location.
    pub corner: (f64, f64),
}

impl MigrationTrack {
    /// Distances never increase from index `skip` on, up to `slack`.
    pub fn monotone_after(&self, skip: usize, slack: f64) -> bool {
        self.distances.iter().skip(skip).collect::<Vec<_>>().windows(2).all(|w| *w[1] <= *w[0] + slack)
    }
}

/// Primary spike location per snapshot, with distances to the corner nearest
/// the last one.
pub fn corner_migration_track(snapshots: &[Field]) -> Result<MigrationTrack> {
    if snapshots.len() < 2 {
        return Err(Error::Validation("migration track needs at least two snapshots".into()));
    }
    let grid = *snapshots[0].grid();
    if snapshots.iter().any(|f| *f.grid() != grid) {
        return Err(Error::Validation("snapshots must share one grid".into()));
    }
    let path: Vec<SpikeLocation> = snapshots.iter().map(|f| locate_spikes(f).primary).collect();
    let last = path[path.len() - 1];
    let corner = nearest_corner(&grid, (last.x, last.y));
    let distances = path.iter().map(|p| p.distance_to(corner)).collect();
    Ok(MigrationTrack { path, distances, corner })
}

/// Number of maxima over the 8-neighbourhood that rise above
/// `mean + frac (max - mean)`.
pub fn count_spikes(f: &Field, frac: f64) -> usize {
    spike_peaks(f, frac).len()
}

/// The maxima counted by [`count_spikes`].
pub fn spike_peaks(f: &Field, frac: f64) -> Vec<SpikeLocation> {
    let g = *f.grid();
    let mean = f.values().iter().sum::<f64>() / g.len() as f64;
    let (hi, lo) = (f.max(), f.min());
    if hi - lo <= FLAT_SPREAD * hi.abs().max(lo.abs()) {
        return Vec::new();
    }
    let thr = mean + frac * (hi - mean);
    let mut peaks: Vec<SpikeLocation> = Vec::new();
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let x = f.get(i, j);
            if x <= thr {
                continue;
            }
            // Ties with an earlier neighbour defer to it.
            let top = neighbours(&g, i, j, true).all(|(a, b)| {
                let y = f.get(a, b);
                y < x || (y == x && g.index(a, b) > g.index(i, j))
            });
            if top {
                peaks.push(SpikeLocation::at(f, i, j));
            }
        }
    }
    peaks
}

/// `max v > int v / |Omega|`, attained at a boundary cell.
pub fn mean_bound_at_boundary(v: &Field) -> bool {
    let report = locate_spikes(v);
    let mean = crate::grid::integrate(v) / v.grid().domain().volume();
    report.primary.value > mean && report.boundary_class.on_boundary()
}
