//! Cell-centred uniform grids on intervals and rectangles with homogeneous
//! Neumann boundaries.
//!
//! Ghost cells reflect the boundary value, so the discrete Laplacian, the
//! midpoint rule and the face-gradient quadrature satisfy summation by parts
//! exactly: `integrate(g * laplacian(f)) == -grad_dot(f, g)` up to rounding.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    dim: usize,
    lx: f64,
    ly: f64,
}

impl Domain {
    pub fn interval(length: f64) -> Result<Self> {
        check_length("length", length)?;
        Ok(Self { dim: 1, lx: length, ly: 1.0 })
    }

    pub fn rectangle(lx: f64, ly: f64) -> Result<Self> {
        check_length("lx", lx)?;
        check_length("ly", ly)?;
        Ok(Self { dim: 2, lx, ly })
    }

    pub fn unit_square() -> Self {
        Self { dim: 2, lx: 1.0, ly: 1.0 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    /// Second side length; 1 for intervals.
    pub fn ly(&self) -> f64 {
        self.ly
    }

    /// `|Omega|`.
    pub fn volume(&self) -> f64 {
        if self.dim == 1 {
            self.lx
        } else {
            self.lx * self.ly
        }
    }
}

fn check_length(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {value}")))
    }
}

/// Cell layout over a [`Domain`]. One-dimensional grids have `ny == 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    domain: Domain,
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
}

pub const MIN_CELLS: usize = 8;

impl Grid {
    pub fn new_1d(domain: Domain, nx: usize) -> Result<Self> {
        if domain.dim != 1 {
            return Err(Error::InvalidParameter("new_1d needs an interval".into()));
        }
        check_cells("nx", nx)?;
        Ok(Self { domain, nx, ny: 1, hx: domain.lx / nx as f64, hy: 1.0 })
    }

    pub fn new_2d(domain: Domain, nx: usize, ny: usize) -> Result<Self> {
        if domain.dim != 2 {
            return Err(Error::InvalidParameter("new_2d needs a rectangle".into()));
        }
        check_cells("nx", nx)?;
        check_cells("ny", ny)?;
        Ok(Self {
            domain,
            nx,
            ny,
            hx: domain.lx / nx as f64,
            hy: domain.ly / ny as f64,
        })
    }

    /// `(0, length)` with `n` cells.
    pub fn interval(length: f64, n: usize) -> Result<Self> {
        Self::new_1d(Domain::interval(length)?, n)
    }

    /// `(0, 1)^2` with `n x n` cells.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new_2d(Domain::unit_square(), n, n)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }
    pub fn dim(&self) -> usize {
        self.domain.dim
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    /// Mesh width in y; 1 in 1D so that `cell_volume` is uniform.
    pub fn hy(&self) -> f64 {
        self.hy
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Smallest mesh width.
    pub fn h_min(&self) -> f64 {
        if self.dim() == 1 {
            self.hx
        } else {
            self.hx.min(self.hy)
        }
    }
    pub fn cell_volume(&self) -> f64 {
        self.hx * self.hy
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Cell centre; `y` is 0 in 1D.
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        let x = (i as f64 + 0.5) * self.hx;
        if self.dim() == 1 {
            (x, 0.0)
        } else {
            (x, (j as f64 + 0.5) * self.hy)
        }
    }

    /// Number of cells a ball of radius `r` spans, measured on the coarser axis.
    pub fn cells_per_length(&self, r: f64) -> f64 {
        let h = if self.dim() == 1 { self.hx } else { self.hx.max(self.hy) };
        r / h
    }

    /// Same layout with `n` times the resolution in every direction.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        if self.dim() == 1 {
            Self::new_1d(self.domain, self.nx * factor)
        } else {
            Self::new_2d(self.domain, self.nx * factor, self.ny * factor)
        }
    }
}

fn check_cells(name: &str, n: usize) -> Result<()> {
    if n >= MIN_CELLS {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be at least {MIN_CELLS}, got {n}")))
    }
}

/// One value per cell, stored row-major (x fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value at cell {bad}")));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f(x, y)` at cell centres.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.center(i, j);
                values.push(f(x, y));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        Field {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn scaled(&self, k: f64) -> Field {
        self.map(|v| k * v)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Index of the largest value (first on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = k;
            }
        }
        best
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Writes the snapshot format: one header line, then one value per line.
    pub fn write_csv(&self, mut out: impl Write, t: f64, name: &str) -> std::io::Result<()> {
        writeln!(
            out,
            "# nx={} ny={} Lx={} Ly={} t={} name={}",
            self.grid.nx,
            self.grid.ny,
            self.grid.domain.lx,
            self.grid.domain.ly,
            t,
            name
        )?;
        for v in &self.values {
            writeln!(out, "{v:.16e}")?;
        }
        Ok(())
    }

    /// Reads a snapshot written by [`Field::write_csv`]. Returns the field, its time and name.
    pub fn read_csv(input: impl BufRead) -> Result<(Field, f64, String)> {
        let mut lines = input.lines();
        let header = match lines.next() {
            Some(line) => line?,
            None => return Err(Error::Parse { line: 1, msg: "empty snapshot".into() }),
        };
        let header = SnapshotHeader::parse(&header)?;
        let grid = header.grid()?;
        let mut values = Vec::with_capacity(grid.len());
        for (k, line) in lines.enumerate() {
            let line = line?;
            let text = line.trim();
            if text.is_empty() {
                continue;
            }
            let v: f64 = text.parse().map_err(|_| Error::Parse {
                line: k + 2,
                msg: format!("not a number: {text:?}"),
            })?;
            values.push(v);
        }
        let field = Field::from_values(grid, values)
            .map_err(|e| Error::Parse { line: 0, msg: e.to_string() })?;
        Ok((field, header.t, header.name))
    }
}

/// Parsed `# nx=.. ny=.. Lx=.. Ly=.. t=.. name=..` header.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotHeader {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub t: f64,
    pub name: String,
}

impl SnapshotHeader {
    pub fn parse(line: &str) -> Result<Self> {
        let bad = |msg: String| Error::Parse { line: 1, msg };
        let body = line
            .strip_prefix('#')
            .ok_or_else(|| bad("header must start with '#'".into()))?;
        let mut nx = None;
        let mut ny = None;
        let mut lx = None;
        let mut ly = None;
        let mut t = None;
        let mut name = None;
        for token in body.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| bad(format!("malformed header token {token:?}")))?;
            let num = || value.parse::<f64>().map_err(|_| bad(format!("bad value for {key}: {value:?}")));
            let int = || value.parse::<usize>().map_err(|_| bad(format!("bad value for {key}: {value:?}")));
            match key {
                "nx" => nx = Some(int()?),
                "ny" => ny = Some(int()?),
                "Lx" => lx = Some(num()?),
                "Ly" => ly = Some(num()?),
                "t" => t = Some(num()?),
                "name" => name = Some(value.to_string()),
                _ => return Err(bad(format!("unknown header key {key:?}"))),
            }
        }
        let missing = |k: &str| bad(format!("header lacks {k}"));
        Ok(Self {
            nx: nx.ok_or_else(|| missing("nx"))?,
            ny: ny.ok_or_else(|| missing("ny"))?,
            lx: lx.ok_or_else(|| missing("Lx"))?,
            ly: ly.ok_or_else(|| missing("Ly"))?,
            t: t.ok_or_else(|| missing("t"))?,
            name: name.ok_or_else(|| missing("name"))?,
        })
    }

    /// `ny = 1` denotes an interval of length `Lx`.
    pub fn grid(&self) -> Result<Grid> {
        let wrap = |e: Error| Error::Parse { line: 1, msg: e.to_string() };
        if self.ny == 1 {
            Grid::interval(self.lx, self.nx).map_err(wrap)
        } else {
            Grid::new_2d(Domain::rectangle(self.lx, self.ly).map_err(wrap)?, self.nx, self.ny).map_err(wrap)
        }
    }
}

/// Pairwise summation in a fixed tree order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if xs.len() <= BLOCK {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// 3-point (1D) or 5-point (2D) Laplacian with reflected ghost cells.
pub fn laplacian_neumann(f: &Field) -> Field {
    let mut out = vec![0.0; f.values.len()];
    apply_laplacian(&f.grid, &f.values, &mut out);
    Field { grid: f.grid, values: out }
}

/// Raw-slice form of [`laplacian_neumann`].
pub fn apply_laplacian(grid: &Grid, f: &[f64], out: &mut [f64]) {
    let (nx, ny) = (grid.nx, grid.ny);
    let ax = 1.0 / (grid.hx * grid.hx);
    let ay = 1.0 / (grid.hy * grid.hy);
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let c = f[k];
            let mut s = 0.0;
            if i > 0 {
                s += (f[k - 1] - c) * ax;
            }
            if i + 1 < nx {
                s += (f[k + 1] - c) * ax;
            }
            if grid.dim() == 2 {
                if j > 0 {
                    s += (f[k - nx] - c) * ay;
                }
                if j + 1 < ny {
                    s += (f[k + nx] - c) * ay;
                }
            }
            out[k] = s;
        }
    }
}

/// Midpoint rule `sum f * cell_volume`.
pub fn integrate(f: &Field) -> f64 {
    integrate_slice(&f.grid, &f.values)
}

pub fn integrate_slice(grid: &Grid, values: &[f64]) -> f64 {
    pairwise_sum(values) * grid.cell_volume()
}

/// `int f g` by the midpoint rule.
pub fn inner(f: &Field, g: &Field) -> f64 {
    let prod: Vec<f64> = f.values.iter().zip(&g.values).map(|(a, b)| a * b).collect();
    integrate_slice(&f.grid, &prod)
}

/// Face quadrature of `int grad f . grad g`; boundary faces carry no flux.
pub fn grad_dot(f: &Field, g: &Field) -> f64 {
    grad_dot_slice(&f.grid, &f.values, &g.values)
}

pub fn grad_dot_slice(grid: &Grid, f: &[f64], g: &[f64]) -> f64 {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut terms = Vec::with_capacity(2 * f.len());
    // Each x-face carries weight hy / hx, each y-face hx / hy.
    let wx = grid.hy / grid.hx;
    let wy = grid.hx / grid.hy;
    for j in 0..ny {
        for i in 0..nx - 1 {
            let k = j * nx + i;
            terms.push(wx * (f[k + 1] - f[k]) * (g[k + 1] - g[k]));
        }
    }
    if grid.dim() == 2 {
        for j in 0..ny - 1 {
            for i in 0..nx {
                let k = j * nx + i;
                terms.push(wy * (f[k + nx] - f[k]) * (g[k + nx] - g[k]));
            }
        }
    }
    pairwise_sum(&terms)
}

/// `sqrt(int eps^2 |grad f|^2 + c_delta f^2)`.
pub fn h1_eps_norm(f: &Field, eps: f64, c_delta: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    if !(c_delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "c_delta must be positive, got {c_delta}"
        )));
    }
    Ok((eps * eps * grad_dot(f, f) + c_delta * inner(f, f)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_has_zero_laplacian() {
        let g = Grid::unit_square(16).unwrap();
        let lap = laplacian_neumann(&Field::constant(g, 2.5));
        assert_eq!(lap.norm_inf(), 0.0);
    }

    #[test]
    fn cosine_laplacian_1d() {
        let g = Grid::interval(1.0, 256).unwrap();
        let f = Field::from_fn(g, |x, _| (PI * x).cos());
        let lap = laplacian_neumann(&f);
        let err = lap
            .values()
            .iter()
            .zip(f.values())
            .map(|(l, v)| (l + PI * PI * v).abs())
            .fold(0.0, f64::max);
        assert!(err < 5e-4, "err = {err}");
    }

    #[test]
    fn cosine_laplacian_2d() {
        let g = Grid::unit_square(256).unwrap();
        let f = Field::from_fn(g, |x, y| (PI * x).cos() * (PI * y).cos());
        let lap = laplacian_neumann(&f);
        let err = lap
            .values()
            .iter()
            .zip(f.values())
            .map(|(l, v)| (l + 2.0 * PI * PI * v).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "err = {err}");
    }

    #[test]
    fn laplacian_converges_at_second_order() {
        let mut errs = Vec::new();
        for &n in &[32usize, 64, 128] {
            let g = Grid::interval(2.0, n).unwrap();
            let k = 3.0 * PI / 2.0;
            let f = Field::from_fn(g, |x, _| (k * x).cos());
            let lap = laplacian_neumann(&f);
            let err = lap
                .values()
                .iter()
                .zip(f.values())
                .map(|(l, v)| (l + k * k * v).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        for pair in errs.windows(2) {
            let order = (pair[0] / pair[1]).log2();
            assert!(order >= 1.9, "observed order {order}");
        }
    }

    #[test]
    fn divergence_theorem() {
        let g = Grid::new_2d(Domain::rectangle(1.5, 0.75).unwrap(), 40, 24).unwrap();
        let f = Field::from_fn(g, |x, y| (3.0 * x).sin() * (y * y + x).exp());
        let total = integrate(&laplacian_neumann(&f));
        assert!(total.abs() <= 1e-12 * f.norm_inf() / g.cell_volume().sqrt());
    }

    #[test]
    fn integrate_examples() {
        let g = Grid::unit_square(32).unwrap();
        assert!((integrate(&Field::constant(g, 3.0)) - 3.0).abs() < 1e-14);
        let g = Grid::interval(1.0, 256).unwrap();
        assert!(integrate(&Field::from_fn(g, |x, _| (PI * x).cos())).abs() < 1e-12);
        let sq = integrate(&Field::from_fn(g, |x, _| (PI * x).cos().powi(2)));
        assert!((sq - 0.5).abs() < 1e-6);
    }

    #[test]
    fn h1_norm_examples() {
        let g = Grid::interval(1.0, 256).unwrap();
        let k = Field::constant(g, 2.0);
        assert!((h1_eps_norm(&k, 0.3, 0.5).unwrap() - (0.5f64 * 4.0).sqrt()).abs() < 1e-14);

        let f = Field::from_fn(g, |x, _| (PI * x).cos());
        let n = h1_eps_norm(&f, 1.0, 1.0).unwrap();
        assert!((n - (PI * PI / 2.0 + 0.5).sqrt()).abs() < 1e-4);
        let n2 = h1_eps_norm(&f.scaled(2.0), 1.0, 1.0).unwrap();
        assert!((n2 - 2.0 * n).abs() < 1e-12);

        assert!(h1_eps_norm(&f, 1.0, 0.0).is_err());
        assert_eq!(h1_eps_norm(&Field::zeros(g), 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_coarse_grids_and_bad_values() {
        assert!(Grid::interval(1.0, 7).is_err());
        assert!(Grid::interval(-1.0, 16).is_err());
        let g = Grid::interval(1.0, 8).unwrap();
        assert!(Field::from_values(g, vec![f64::NAN; 8]).is_err());
        assert!(Field::from_values(g, vec![0.0; 9]).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let g = Grid::new_2d(Domain::rectangle(1.0, 2.0).unwrap(), 9, 11).unwrap();
        let f = Field::from_fn(g, |x, y| (x * 7.1).sin() / (1.0 + y) + 1e-300);
        let mut buf = Vec::new();
        f.write_csv(&mut buf, 0.125, "u").unwrap();
        let (back, t, name) = Field::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, f);
        assert_eq!(t, 0.125);
        assert_eq!(name, "u");

        let g1 = Grid::interval(3.0, 10).unwrap();
        let f1 = Field::from_fn(g1, |x, _| x);
        let mut buf = Vec::new();
        f1.write_csv(&mut buf, 0.0, "w").unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("# nx=10 ny=1 Lx=3 Ly=1 t=0 name=w\n"));
        assert_eq!(Field::read_csv(buf.as_slice()).unwrap().0, f1);
    }

    #[test]
    fn csv_rejects_malformed_input() {
        assert!(Field::read_csv("nx=8\n".as_bytes()).is_err());
        let text = "# nx=8 ny=1 Lx=1 Ly=1 t=0 name=u\n1\n2\n";
        assert!(Field::read_csv(text.as_bytes()).is_err());
        let text = "# nx=8 ny=1 Lx=1 Ly=1 t=0 name=u\n1\n2\n3\n4\n5\n6\nseven\n8\n";
        match Field::read_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 8),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pairwise_sum_is_accurate() {
        let xs: Vec<f64> = (0..100_000).map(|i| if i % 2 == 0 { 0.1 } else { 1e8 }).collect();
        let exact = 50_000.0 * 0.1 + 50_000.0 * 1e8;
        assert!((pairwise_sum(&xs) - exact).abs() / exact < 1e-15);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn smooth(g: Grid, a: [f64; 4]) -> Field {
            Field::from_fn(g, move |x, y| {
                a[0] * (a[1] * x + 0.3).sin() + a[2] * (a[3] * y - x * y).cos()
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn summation_by_parts(
                a in proptest::array::uniform4(-3.0f64..3.0),
                b in proptest::array::uniform4(-3.0f64..3.0),
                nx in 8usize..40,
                ny in 8usize..40,
                two_d in any::<bool>(),
            ) {
                let g = if two_d {
                    Grid::new_2d(Domain::rectangle(1.3, 0.7).unwrap(), nx, ny).unwrap()
                } else {
                    Grid::interval(1.3, nx).unwrap()
                };
                let f = smooth(g, a);
                let h = smooth(g, b);
                let lhs = inner(&h, &laplacian_neumann(&f));
                let rhs = -grad_dot(&f, &h);
                let scale = grad_dot(&f, &f).sqrt() * grad_dot(&h, &h).sqrt() + 1e-12;
                prop_assert!((lhs - rhs).abs() <= 1e-10 * scale);
            }

            #[test]
            fn integrate_is_linear_and_positive(
                a in proptest::array::uniform4(-3.0f64..3.0),
                b in proptest::array::uniform4(-3.0f64..3.0),
                s in -5.0f64..5.0,
            ) {
                let g = Grid::unit_square(16).unwrap();
                let f = smooth(g, a);
                let h = smooth(g, b);
                let combo = f.zip_map(&h, |x, y| x + s * y);
                let lhs = integrate(&combo);
                let rhs = integrate(&f) + s * integrate(&h);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
                prop_assert!(integrate(&f.map(f64::abs)) >= 0.0);
            }
        }
    }
}
