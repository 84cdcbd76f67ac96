//! Vietoris–Rips filtrations up to dimension 2, oriented boundary matrices and
//! persistent combinatorial Laplacians with their spectra.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::euclidean;
use crate::linalg::dense_eig::{count_below, default_zero_tol};
use crate::linalg::qr::null_space;
use crate::linalg::{dense_eig, DenseMatrix};
use crate::scalar::Scalar;

/// Rank tolerance for the kernel of the new-simplex block.
pub const KERNEL_TOL: f64 = 1e-10;

/// Largest Laplacian the spectra routines will diagonalise densely.
pub const MAX_LAPLACIAN_SIZE: usize = 1500;

#[derive(Debug, Clone, PartialEq)]
pub struct Simplex<T> {
    /// Ascending vertex indices.
    pub vertices: Vec<usize>,
    pub birth: T,
}

impl<T> Simplex<T> {
    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }
}

#[derive(Debug, Clone)]
pub struct Filtration<T> {
    points: DenseMatrix<T>,
    simplices: Vec<Simplex<T>>,
    index: HashMap<Vec<usize>, usize>,
}

impl<T: Scalar> Filtration<T> {
    pub fn points(&self) -> &DenseMatrix<T> {
        &self.points
    }

    /// All simplices ordered by `(birth, dim, vertices)`.
    pub fn simplices(&self) -> &[Simplex<T>] {
        &self.simplices
    }

    pub fn get(&self, vertices: &[usize]) -> Option<&Simplex<T>> {
        self.index.get(vertices).map(|&i| &self.simplices[i])
    }

    /// `q`-simplices born at or before `radius`, in filtration order.
    pub fn simplices_at(&self, q: usize, radius: T) -> Vec<&Simplex<T>> {
        self.simplices
            .iter()
            .filter(|s| s.dim() == q && s.birth <= radius)
            .collect()
    }

    pub fn count_at(&self, q: usize, radius: T) -> usize {
        self.simplices.iter().filter(|s| s.dim() == q && s.birth <= radius).count()
    }
}

/// Rips complex of `points` (one point per row) up to dimension 2 and radius `max_radius`.
///
/// Edges are born at the pairwise distance and triangles at their longest edge.
pub fn rips_filtration<T: Scalar>(points: &DenseMatrix<T>, max_radius: T) -> Result<Filtration<T>> {
    let m = points.rows();
    if m == 0 {
        return Err(Error::Empty("point set"));
    }
    if !(max_radius >= T::zero()) {
        return Err(Error::InvalidArgument(format!("max_radius must be >= 0, got {max_radius}")));
    }
    let mut dist = vec![T::infinity(); m * m];
    let mut simplices: Vec<Simplex<T>> = (0..m)
        .map(|i| Simplex {
            vertices: vec![i],
            birth: T::zero(),
        })
        .collect();
    for i in 0..m {
        for j in (i + 1)..m {
            let d = euclidean(points.row(i), points.row(j));
            if d <= max_radius {
                dist[i * m + j] = d;
                dist[j * m + i] = d;
                simplices.push(Simplex {
                    vertices: vec![i, j],
                    birth: d,
                });
            }
        }
    }
    for i in 0..m {
        for j in (i + 1)..m {
            let dij = dist[i * m + j];
            if !dij.is_finite() {
                continue;
            }
            for k in (j + 1)..m {
                let (dik, djk) = (dist[i * m + k], dist[j * m + k]);
                if dik.is_finite() && djk.is_finite() {
                    simplices.push(Simplex {
                        vertices: vec![i, j, k],
                        birth: dij.max(dik).max(djk),
                    });
                }
            }
        }
    }
    simplices.sort_by(|a, b| {
        a.birth
            .partial_cmp(&b.birth)
            .unwrap_or(Ordering::Equal)
            .then(a.dim().cmp(&b.dim()))
            .then_with(|| a.vertices.cmp(&b.vertices))
    });
    let index = simplices
        .iter()
        .enumerate()
        .map(|(i, s)| (s.vertices.clone(), i))
        .collect();
    Ok(Filtration {
        points: points.clone(),
        simplices,
        index,
    })
}

/// Integer boundary matrix from `q`-chains to `(q−1)`-chains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryMatrix {
    pub rows: Vec<Vec<usize>>,
    pub cols: Vec<Vec<usize>>,
    /// Row-major `rows.len() × cols.len()` entries in `{−1, 0, 1}`.
    pub entries: Vec<i8>,
}

impl BoundaryMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn get(&self, r: usize, c: usize) -> i8 {
        self.entries[r * self.cols.len() + c]
    }

    pub fn to_dense<T: Scalar>(&self) -> DenseMatrix<T> {
        let data = self.entries.iter().map(|&v| T::of(f64::from(v))).collect();
        DenseMatrix::from_vec(self.n_rows(), self.n_cols(), data).expect("shape is consistent")
    }

    /// Integer product `self · rhs`; `self.cols` must equal `rhs.rows`.
    pub fn compose(&self, rhs: &BoundaryMatrix) -> Result<Vec<i64>> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols(),
                got: rhs.n_rows(),
            });
        }
        let (r, k, c) = (self.n_rows(), self.n_cols(), rhs.n_cols());
        let mut out = vec![0i64; r * c];
        for i in 0..r {
            for t in 0..k {
                let a = i64::from(self.get(i, t));
                if a != 0 {
                    for j in 0..c {
                        out[i * c + j] += a * i64::from(rhs.get(t, j));
                    }
                }
            }
        }
        Ok(out)
    }
}

/// `∂_q` with columns for the `q`-simplices born by `col_radius` and rows for the
/// `(q−1)`-simplices born by `row_radius`. Faces outside the row set are dropped.
pub fn boundary_between<T: Scalar>(f: &Filtration<T>, q: usize, row_radius: T, col_radius: T) -> Result<BoundaryMatrix> {
    if q == 0 || q > 2 {
        return Err(Error::InvalidArgument(format!("boundary dimension must be 1 or 2, got {q}")));
    }
    let rows: Vec<Vec<usize>> = f.simplices_at(q - 1, row_radius).into_iter().map(|s| s.vertices.clone()).collect();
    let cols: Vec<Vec<usize>> = f.simplices_at(q, col_radius).into_iter().map(|s| s.vertices.clone()).collect();
    let row_of: HashMap<&[usize], usize> = rows.iter().enumerate().map(|(i, v)| (v.as_slice(), i)).collect();
    let mut entries = vec![0i8; rows.len() * cols.len()];
    for (c, verts) in cols.iter().enumerate() {
        for omit in 0..verts.len() {
            let face: Vec<usize> = verts
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != omit)
                .map(|(_, &v)| v)
                .collect();
            if let Some(&r) = row_of.get(face.as_slice()) {
                entries[r * cols.len() + c] = if omit % 2 == 0 { 1 } else { -1 };
            }
        }
    }
    Ok(BoundaryMatrix { rows, cols, entries })
}

/// `∂_q` of the complex at `radius`.
pub fn boundary_matrix<T: Scalar>(f: &Filtration<T>, q: usize, radius: T) -> Result<BoundaryMatrix> {
    boundary_between(f, q, radius, radius)
}

/// `L_q^{t,p} = B Bᵀ + (∂_q^t)ᵀ ∂_q^t` on the `q`-chains of `K_t`, where `B = ∂_{q+1}^{tp} Z`
/// restricted to the rows of `K_t`, and `Z` is an orthonormal basis of the `(q+1)`-chains of
/// `K_{tp}` whose boundary has no component on `q`-simplices outside `K_t`.
pub fn persistent_laplacian_q<T: Scalar>(f: &Filtration<T>, q: usize, r_t: T, r_tp: T) -> Result<DenseMatrix<T>> {
    if q > 1 {
        return Err(Error::InvalidArgument(format!("q must be 0 or 1, got {q}")));
    }
    if r_t > r_tp {
        return Err(Error::InvalidArgument(format!("need r_t <= r_tp, got {r_t} > {r_tp}")));
    }
    let n_q = f.count_at(q, r_t);
    let mut lap = DenseMatrix::zeros(n_q, n_q);
    if n_q == 0 {
        return Ok(lap);
    }

    if q > 0 {
        let down = boundary_matrix(f, q, r_t)?.to_dense::<T>();
        lap = down.transpose_matmul(&down)?;
    }

    // Rows of ∂_{q+1}^{tp} are the q-simplices of K_{tp} in filtration order, so the
    // first n_q rows are exactly those of K_t.
    let up = boundary_matrix(f, q + 1, r_tp)?.to_dense::<T>();
    if up.cols() > 0 {
        let n_all = up.rows();
        let old: Vec<usize> = (0..n_q).collect();
        let new: Vec<usize> = (n_q..n_all).collect();
        let d_old = up.select_rows(&old);
        let b = if new.is_empty() {
            d_old
        } else {
            let z = null_space(&up.select_rows(&new), T::of(KERNEL_TOL));
            d_old.matmul(&z)?
        };
        if b.cols() > 0 {
            let bbt = b.matmul(&b.transpose())?;
            for (x, y) in lap.data_mut().iter_mut().zip(bbt.data()) {
                *x += *y;
            }
        }
    }
    Ok(lap)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PersistentSpectrum<T> {
    pub q: usize,
    /// Index of `r_t` in the radius grid.
    pub t: usize,
    /// Grid offset of `r_tp` from `r_t`.
    pub p: usize,
    pub radius: T,
    pub eigenvalues: Vec<T>,
    pub betti: usize,
    pub lambda_min_nonzero: Option<T>,
}

/// Spectrum of `L_q^{t,p}` with `r_t = grid[t]` and `r_tp = grid[t + p]`.
pub fn persistent_spectrum<T: Scalar>(f: &Filtration<T>, q: usize, grid: &[T], t: usize, p: usize) -> Result<PersistentSpectrum<T>> {
    let (r_t, r_tp) = match (grid.get(t), grid.get(t + p)) {
        (Some(&a), Some(&b)) => (a, b),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "grid index {} out of range ({} radii)",
                t + p,
                grid.len()
            )))
        }
    };
    let size = f.count_at(q, r_t);
    if size > MAX_LAPLACIAN_SIZE {
        return Err(Error::InvalidArgument(format!(
            "{size} {q}-simplices at radius {r_t} exceeds the limit of {MAX_LAPLACIAN_SIZE}"
        )));
    }
    let lap = persistent_laplacian_q(f, q, r_t, r_tp)?;
    let eigenvalues = dense_eig(&lap)?.values;
    let tol = default_zero_tol(&eigenvalues);
    let betti = count_below(&eigenvalues, Some(tol));
    let lambda_min_nonzero = eigenvalues.iter().copied().find(|&v| v >= tol);
    Ok(PersistentSpectrum {
        q,
        t,
        p,
        radius: r_t,
        eigenvalues,
        betti,
        lambda_min_nonzero,
    })
}

/// One grid radius of a Betti/first-eigenvalue curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectraRow<T> {
    pub radius: T,
    pub beta0: usize,
    pub beta1: usize,
    pub lambda0: Option<T>,
    pub lambda1: Option<T>,
}

/// β_0, β_1 and the first nonzero eigenvalues of `L_0`, `L_1` at each grid radius (`p = 0`).
pub fn spectra_curves<T: Scalar>(points: &DenseMatrix<T>, grid: &[T]) -> Result<Vec<SpectraRow<T>>> {
    if grid.is_empty() {
        return Err(Error::Empty("radius grid"));
    }
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidArgument("radius grid must be ascending".into()));
    }
    let f = rips_filtration(points, grid[grid.len() - 1])?;
    (0..grid.len())
        .into_par_iter()
        .map(|t| {
            let s0 = persistent_spectrum(&f, 0, grid, t, 0)?;
            let s1 = persistent_spectrum(&f, 1, grid, t, 0)?;
            Ok(SpectraRow {
                radius: grid[t],
                beta0: s0.betti,
                beta1: s1.betti,
                lambda0: s0.lambda_min_nonzero,
                lambda1: s1.lambda_min_nonzero,
            })
        })
        .collect()
}

/// Four corners of the unit square.
pub fn unit_square() -> DenseMatrix<f64> {
    DenseMatrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).expect("static fixture")
}

/// Seven planar points: a unit square (a loop for radii in `[1, √2)`) and a tight
/// triangle of points to its right that joins the square at radius 1.5.
pub fn seven_points() -> DenseMatrix<f64> {
    DenseMatrix::from_rows(&[
        [0.0, 0.0],
        [1.0, 0.0],
        [1.0, 1.0],
        [0.0, 1.0],
        [2.5, 0.0],
        [3.3, 0.0],
        [2.9, 0.6],
    ])
    .expect("static fixture")
}
