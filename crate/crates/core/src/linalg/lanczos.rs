//! Smallest eigenpairs of a sparse symmetric matrix by thick-restart Lanczos.
//!
//! Every new Krylov vector is orthogonalised twice against the whole basis and against
//! all previously locked eigenvectors, so the projected matrix is the full Rayleigh
//! quotient `Vᵀ M V`. On restart the lowest Ritz vectors are kept together with the
//! residual direction (Krylov–Schur form). A single Krylov sequence only sees one vector
//! per eigenspace, so after the first solve the converged pairs are locked and the
//! deflated operator is probed again until no eigenvalue below the current cut remains.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::dense_eig::dense_eig;
use crate::linalg::{DenseMatrix, SparseSymMatrix};
use crate::scalar::Scalar;

/// The `n_e` smallest eigenvalues (ascending) and matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenBasis<T> {
    pub values: Vec<T>,
    /// `N × n_e`, one eigenvector per column.
    pub vectors: DenseMatrix<T>,
}

impl<T: Scalar> EigenBasis<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `‖M x − λ x‖₂` for every stored pair.
    pub fn residuals(&self, m: &SparseSymMatrix<T>) -> Result<Vec<T>> {
        (0..self.len())
            .map(|k| {
                let x = self.vectors.column(k);
                let mx = m.matvec(&x)?;
                Ok(mx
                    .iter()
                    .zip(&x)
                    .map(|(&a, &b)| {
                        let r = a - self.values[k] * b;
                        r * r
                    })
                    .sum::<T>()
                    .sqrt())
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    /// Residual tolerance relative to `max(1, ‖M‖_F)`.
    pub tol: f64,
    pub max_restarts: usize,
    /// Seeds the start vectors; fixed so that solves are reproducible.
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_restarts: 2000,
            seed: 0x1A2C_0505,
        }
    }
}

/// The `n_e` smallest eigenpairs of `m`, each with residual `≤ tol · max(1, ‖M‖_F)`.
pub fn smallest_eigenpairs<T: Scalar>(m: &SparseSymMatrix<T>, n_e: usize, tol: f64) -> Result<EigenBasis<T>> {
    smallest_eigenpairs_with(
        m,
        n_e,
        &LanczosOptions {
            tol,
            ..LanczosOptions::default()
        },
    )
}

pub fn smallest_eigenpairs_with<T: Scalar>(
    m: &SparseSymMatrix<T>,
    n_e: usize,
    opts: &LanczosOptions,
) -> Result<EigenBasis<T>> {
    let n = m.n();
    if n_e == 0 || n_e > n {
        return Err(Error::InvalidArgument(format!(
            "requested {n_e} eigenpairs of a {n}x{n} matrix"
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("eigensolver tolerance must be positive".into()));
    }
    let scale = m.frobenius_norm().max(T::one());
    let target = T::of(opts.tol) * scale;

    if n_e == n {
        let eig = dense_eig(&m.to_dense())?;
        return Ok(EigenBasis {
            values: eig.values,
            vectors: eig.vectors,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut solver = KrylovSchur {
        m,
        scale,
        target,
        max_restarts: opts.max_restarts,
    };

    let mut locked: Vec<(T, Vec<T>)> = solver.run(&[], n_e, &mut rng)?;
    loop {
        if locked.len() >= n {
            break;
        }
        locked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let cut = locked[n_e - 1].0;
        let basis: Vec<&[T]> = locked.iter().map(|(_, v)| v.as_slice()).collect();
        let mut probe = solver.run(&basis, 1, &mut rng)?;
        let (theta, x) = probe.swap_remove(0);
        if theta < cut - target {
            locked.push((theta, x));
        } else {
            break;
        }
    }
    locked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    locked.truncate(n_e);

    let mut vectors = DenseMatrix::zeros(n, n_e);
    let mut values = Vec::with_capacity(n_e);
    for (k, (val, vec)) in locked.into_iter().enumerate() {
        values.push(val);
        vectors.set_column(k, &vec);
    }
    let basis = EigenBasis { values, vectors };

    let worst = basis.residuals(m)?.into_iter().fold(T::zero(), T::max);
    if !(worst <= target * T::of(10.0)) {
        return Err(Error::NoConvergence {
            restarts: opts.max_restarts,
            best_residual: worst.as_f64(),
            target: target.as_f64(),
        });
    }
    Ok(basis)
}

struct KrylovSchur<'a, T> {
    m: &'a SparseSymMatrix<T>,
    scale: T,
    target: T,
    max_restarts: usize,
}

impl<T: Scalar> KrylovSchur<'_, T> {
    /// Lowest `want` converged eigenpairs of `M` restricted to the complement of `locked`.
    fn run(&mut self, locked: &[&[T]], want: usize, rng: &mut ChaCha8Rng) -> Result<Vec<(T, Vec<T>)>> {
        let n = self.m.n();
        let dim = n - locked.len();
        let want = want.min(dim);
        let max_basis = dim.min((2 * want + 20).max(want + 30));
        let keep = (want + (max_basis - want) / 2).min(max_basis.saturating_sub(1)).max(want.min(max_basis - 1));

        let breakdown = (self.target * T::of(1e-2)).max(T::epsilon() * self.scale * T::of(10.0));

        let mut basis: Vec<Vec<T>> = Vec::with_capacity(max_basis);
        let mut h = DenseMatrix::<T>::zeros(max_basis, max_basis);
        let start = self.random_orthogonal(locked, &basis, rng)?;
        basis.push(start);

        let mut best = f64::INFINITY;
        let mut w = vec![T::zero(); n];
        for _restart in 0..self.max_restarts {
            // Expand to `max_basis` vectors; the last product's remainder is the residual `f`.
            let (f, beta) = loop {
                let j = basis.len() - 1;
                self.m.matvec_into(&basis[j], &mut w);
                let mut coeffs = vec![T::zero(); basis.len()];
                for _pass in 0..2 {
                    for v in locked {
                        let c = dot(v, &w);
                        axpy(-c, v, &mut w);
                    }
                    for (i, v) in basis.iter().enumerate() {
                        let c = dot(v, &w);
                        axpy(-c, v, &mut w);
                        coeffs[i] += c;
                    }
                }
                for (i, &c) in coeffs.iter().enumerate() {
                    h[(i, j)] = c;
                    h[(j, i)] = c;
                }
                let beta = norm(&w);
                if basis.len() == max_basis {
                    break (w.clone(), beta);
                }
                if beta <= breakdown {
                    // Invariant subspace reached: continue in a fresh direction, uncoupled.
                    let v = self.random_orthogonal(locked, &basis, rng)?;
                    basis.push(v);
                } else {
                    let inv = T::one() / beta;
                    basis.push(w.iter().map(|&x| x * inv).collect());
                    h[(j + 1, j)] = beta;
                    h[(j, j + 1)] = beta;
                }
            };

            let size = basis.len();
            let eig = dense_eig(&h)?;
            let beta_eff = if beta <= breakdown { T::zero() } else { beta };
            let residual = |k: usize| beta_eff * eig.vectors[(size - 1, k)].abs();
            let worst = (0..want).map(residual).fold(T::zero(), T::max);
            best = best.min(worst.as_f64());

            if worst <= self.target {
                return Ok((0..want)
                    .map(|k| (eig.values[k], combine(&basis, &eig.vectors, k)))
                    .collect());
            }

            // Thick restart: lowest `keep` Ritz vectors plus the normalised residual.
            let ritz: Vec<Vec<T>> = (0..keep).map(|k| combine(&basis, &eig.vectors, k)).collect();
            let mut next_h = DenseMatrix::zeros(max_basis, max_basis);
            for k in 0..keep {
                next_h[(k, k)] = eig.values[k];
            }
            basis = ritz;
            if beta <= breakdown {
                let v = self.random_orthogonal(locked, &basis, rng)?;
                basis.push(v);
            } else {
                let inv = T::one() / beta;
                basis.push(f.iter().map(|&x| x * inv).collect());
                for k in 0..keep {
                    let b = beta * eig.vectors[(size - 1, k)];
                    next_h[(keep, k)] = b;
                    next_h[(k, keep)] = b;
                }
            }
            h = next_h;
        }
        Err(Error::NoConvergence {
            restarts: self.max_restarts,
            best_residual: best,
            target: self.target.as_f64(),
        })
    }

    fn random_orthogonal(&self, locked: &[&[T]], basis: &[Vec<T>], rng: &mut ChaCha8Rng) -> Result<Vec<T>> {
        let n = self.m.n();
        for _attempt in 0..16 {
            let mut v: Vec<T> = (0..n).map(|_| T::of(rng.random::<f64>() - 0.5)).collect();
            let before = norm(&v);
            for _pass in 0..2 {
                for u in locked.iter().copied().chain(basis.iter().map(Vec::as_slice)) {
                    let c = dot(u, &v);
                    axpy(-c, u, &mut v);
                }
            }
            let after = norm(&v);
            if after > before * T::of(1e-6) {
                let inv = T::one() / after;
                v.iter_mut().for_each(|x| *x *= inv);
                return Ok(v);
            }
        }
        Err(Error::InvalidArgument(
            "could not draw a start vector outside the current subspace".into(),
        ))
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

fn combine<T: Scalar>(basis: &[Vec<T>], coeffs: &DenseMatrix<T>, col: usize) -> Vec<T> {
    let n = basis[0].len();
    let mut out = vec![T::zero(); n];
    for (i, v) in basis.iter().enumerate() {
        let c = coeffs[(i, col)];
        if c != T::zero() {
            axpy(c, v, &mut out);
        }
    }
    out
}
