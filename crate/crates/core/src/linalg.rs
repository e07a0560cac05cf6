//! Sparse linear algebra on grid stencils.
//!
//! Every implicit operator in the crate has the shape
//! `A = diag(d) + sum_faces w_f (e_i - e_j)(e_i - e_j)^T`, a diagonal plus a
//! weighted graph Laplacian over the cell faces. [`StencilMatrix`] stores it
//! that way; factorizations are delegated to `faer` with the symbolic phase
//! computed once per grid.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{MatMut, Side};

use crate::error::{Error, Result};
use crate::grid::{pairwise_sum, Grid};

/// Diagonal plus face-coupling operator on a grid.
#[derive(Clone, Debug)]
pub struct StencilMatrix {
    grid: Grid,
    pub diag: Vec<f64>,
    /// One weight per x-face `(i, j) -- (i+1, j)`, indexed `j * (nx-1) + i`.
    pub x_faces: Vec<f64>,
    /// One weight per y-face `(i, j) -- (i, j+1)`, indexed `j * nx + i`; empty in 1D.
    pub y_faces: Vec<f64>,
}

impl StencilMatrix {
    pub fn zeros(grid: Grid) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let ny_faces = if grid.dim() == 2 { nx * (ny - 1) } else { 0 };
        Self {
            grid,
            diag: vec![0.0; grid.len()],
            x_faces: vec![0.0; (nx - 1) * ny],
            y_faces: vec![0.0; ny_faces],
        }
    }

    /// `-scale * Laplacian` plus `diag`: face weights `scale / h^2`.
    pub fn scaled_laplacian(grid: Grid, scale: f64, diag: Vec<f64>) -> Self {
        let mut m = Self::zeros(grid);
        let ax = scale / (grid.hx() * grid.hx());
        let ay = scale / (grid.hy() * grid.hy());
        m.x_faces.iter_mut().for_each(|w| *w = ax);
        m.y_faces.iter_mut().for_each(|w| *w = ay);
        m.diag = diag;
        m
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Visits every face as `(face_index, cell_a, cell_b, is_x_face)`.
    pub fn for_each_face(grid: &Grid, mut visit: impl FnMut(usize, usize, usize, bool)) {
        let (nx, ny) = (grid.nx(), grid.ny());
        for j in 0..ny {
            for i in 0..nx - 1 {
                visit(j * (nx - 1) + i, j * nx + i, j * nx + i + 1, true);
            }
        }
        if grid.dim() == 2 {
            for j in 0..ny - 1 {
                for i in 0..nx {
                    visit(j * nx + i, j * nx + i, (j + 1) * nx + i, false);
                }
            }
        }
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (k, yk) in y.iter_mut().enumerate() {
            *yk = self.diag[k] * x[k];
        }
        let (xf, yf) = (&self.x_faces, &self.y_faces);
        Self::for_each_face(&self.grid, |f, a, b, is_x| {
            let w = if is_x { xf[f] } else { yf[f] };
            let flux = w * (x[a] - x[b]);
            y[a] += flux;
            y[b] -= flux;
        });
    }

    fn triplets(&self) -> Vec<Triplet<usize, usize, f64>> {
        let n = self.grid.len();
        let mut diag = self.diag.clone();
        let mut entries = Vec::with_capacity(n + 2 * (self.x_faces.len() + self.y_faces.len()));
        let (xf, yf) = (&self.x_faces, &self.y_faces);
        Self::for_each_face(&self.grid, |f, a, b, is_x| {
            let w = if is_x { xf[f] } else { yf[f] };
            diag[a] += w;
            diag[b] += w;
            entries.push(Triplet::new(a, b, -w));
            entries.push(Triplet::new(b, a, -w));
        });
        for (k, d) in diag.into_iter().enumerate() {
            entries.push(Triplet::new(k, k, d));
        }
        entries
    }

    pub fn to_sparse(&self) -> Result<SparseColMat<usize, f64>> {
        let n = self.grid.len();
        SparseColMat::try_new_from_triplets(n, n, &self.triplets())
            .map_err(|e| Error::LinearSolver(format!("assembly failed: {e:?}")))
    }
}

/// Direct solver for symmetric positive definite stencils (sparse Cholesky).
#[derive(Default)]
pub struct SpdSolver {
    symbolic: Option<SymbolicLlt<usize>>,
}

impl SpdSolver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Solves `A x = rhs` in place.
    pub fn solve(&mut self, a: &StencilMatrix, rhs: &mut [f64]) -> Result<()> {
        let mat = a.to_sparse()?;
        if self.symbolic.is_none() {
            let sym = SymbolicLlt::try_new(mat.symbolic(), Side::Lower)
                .map_err(|e| Error::LinearSolver(format!("symbolic Cholesky: {e:?}")))?;
            self.symbolic = Some(sym);
        }
        let sym = self.symbolic.clone().expect("symbolic factor present");
        let llt = Llt::try_new_with_symbolic(sym, mat.as_ref(), Side::Lower)
            .map_err(|e| Error::LinearSolver(format!("Cholesky: {e:?}")))?;
        let n = rhs.len();
        llt.solve_in_place(MatMut::from_column_major_slice_mut(rhs, n, 1));
        check_finite(rhs)
    }
}

/// Direct solver for general (possibly indefinite) stencils (sparse LU).
#[derive(Default)]
pub struct LuSolver {
    symbolic: Option<SymbolicLu<usize>>,
}

impl LuSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve(&mut self, a: &StencilMatrix, rhs: &mut [f64]) -> Result<()> {
        let mat = a.to_sparse()?;
        if self.symbolic.is_none() {
            let sym = SymbolicLu::try_new(mat.symbolic())
                .map_err(|e| Error::LinearSolver(format!("symbolic LU: {e:?}")))?;
            self.symbolic = Some(sym);
        }
        let sym = self.symbolic.clone().expect("symbolic factor present");
        let lu = Lu::try_new_with_symbolic(sym, mat.as_ref())
            .map_err(|e| Error::LinearSolver(format!("LU: {e:?}")))?;
        let n = rhs.len();
        lu.solve_in_place(MatMut::from_column_major_slice_mut(rhs, n, 1));
        check_finite(rhs)
    }
}

fn check_finite(x: &[f64]) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::LinearSolver("singular or ill-conditioned system".into()))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    pairwise_sum(&prod)
}

/// Outcome of a conjugate gradient solve.
#[derive(Clone, Copy, Debug)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for an SPD stencil.
/// `x` holds the initial guess on entry.
pub fn conjugate_gradient(
    a: &StencilMatrix,
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<CgReport> {
    let n = b.len();
    let mut inv_diag = a.diag.clone();
    StencilMatrix::for_each_face(a.grid(), |f, i, j, is_x| {
        let w = if is_x { a.x_faces[f] } else { a.y_faces[f] };
        inv_diag[i] += w;
        inv_diag[j] += w;
    });
    for d in inv_diag.iter_mut() {
        *d = 1.0 / *d;
    }
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgReport { iterations: 0, relative_residual: 0.0 });
    }
    let mut r = vec![0.0; n];
    a.apply(x, &mut r);
    for k in 0..n {
        r[k] = b[k] - r[k];
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = dot(&r, &r).sqrt() / b_norm;
    let mut it = 0;
    while res > rel_tol {
        if it == max_iter {
            return Err(Error::LinearSolver(format!(
                "conjugate gradients stalled at relative residual {res:.3e} after {it} iterations"
            )));
        }
        a.apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
        res = dot(&r, &r).sqrt() / b_norm;
        it += 1;
    }
    check_finite(x)?;
    Ok(CgReport { iterations: it, relative_residual: res })
}
