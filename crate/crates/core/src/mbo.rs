//! Graph MBO threshold dynamics on a truncated eigenbasis: fidelity-forced diffusion,
//! projection onto the Gibbs simplex and displacement to its vertices.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::euclidean;
use crate::linalg::{smallest_eigenpairs, DenseMatrix, EigenBasis, SparseSymMatrix};
use crate::scalar::Scalar;

/// Row-sum tolerance for simplex membership.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// `N × K` class-assignment matrix whose rows lie on the Gibbs simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix<T> {
    u: DenseMatrix<T>,
}

impl<T: Scalar> StateMatrix<T> {
    /// Wraps `u`, checking that every row is nonnegative and sums to one.
    pub fn new(u: DenseMatrix<T>) -> Result<Self> {
        if u.cols() == 0 {
            return Err(Error::Empty("class dimension"));
        }
        for i in 0..u.rows() {
            if !on_simplex(u.row(i)) {
                return Err(Error::InvalidArgument(format!("row {i} is not on the simplex")));
            }
        }
        Ok(Self { u })
    }

    pub fn n(&self) -> usize {
        self.u.rows()
    }

    pub fn k(&self) -> usize {
        self.u.cols()
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.u
    }

    pub fn into_matrix(self) -> DenseMatrix<T> {
        self.u
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.u.row(i)
    }

    /// Largest coordinate of every row, ties to the lowest class.
    pub fn assignments(&self) -> Vec<usize> {
        (0..self.n()).map(|i| argmax(self.u.row(i))).collect()
    }

    /// Every row is exactly some `e_k`.
    pub fn is_indicator(&self) -> bool {
        (0..self.n()).all(|i| is_indicator_row(self.u.row(i)))
    }
}

pub fn is_indicator_row<T: Scalar>(row: &[T]) -> bool {
    row.iter().filter(|&&x| x == T::one()).count() == 1 && row.iter().all(|&x| x == T::zero() || x == T::one())
}

fn on_simplex<T: Scalar>(row: &[T]) -> bool {
    let sum: T = row.iter().copied().sum();
    row.iter().all(|&x| x >= T::zero() && x.is_finite()) && (sum - T::one()).abs() <= T::of(SIMPLEX_TOL)
}

fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (k, &x) in row.iter().enumerate().skip(1) {
        if x > row[best] {
            best = k;
        }
    }
    best
}

/// Labeled points, their indicator rows and per-point fidelity weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelitySpec<T> {
    mu: Vec<T>,
    labeled_mask: Vec<bool>,
    u_labeled: DenseMatrix<T>,
    labels: Vec<Option<usize>>,
}

impl<T: Scalar> FidelitySpec<T> {
    /// The same `mu` at every labeled point.
    pub fn new(labels: &[Option<usize>], k: usize, mu: T) -> Result<Self> {
        let per_point = labels.iter().map(|l| if l.is_some() { mu } else { T::zero() }).collect();
        Self::with_weights(labels, k, per_point)
    }

    /// Per-point weights; weights at unlabeled points must be zero.
    pub fn with_weights(labels: &[Option<usize>], k: usize, mu: Vec<T>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("need at least one class".into()));
        }
        if mu.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                got: mu.len(),
            });
        }
        let mut u_labeled = DenseMatrix::zeros(labels.len(), k);
        for (i, (l, &m)) in labels.iter().zip(&mu).enumerate() {
            if !(m >= T::zero()) || !m.is_finite() {
                return Err(Error::InvalidArgument(format!("fidelity weight at {i} must be finite and >= 0")));
            }
            match *l {
                Some(c) if c >= k => {
                    return Err(Error::InvalidArgument(format!("label {c} at point {i} is not below K = {k}")))
                }
                Some(c) => u_labeled[(i, c)] = T::one(),
                None if m != T::zero() => {
                    return Err(Error::InvalidArgument(format!("unlabeled point {i} has nonzero fidelity weight")))
                }
                None => {}
            }
        }
        Ok(Self {
            labeled_mask: labels.iter().map(Option::is_some).collect(),
            labels: labels.to_vec(),
            mu,
            u_labeled,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.u_labeled.cols()
    }

    pub fn mu(&self) -> &[T] {
        &self.mu
    }

    pub fn labeled_mask(&self) -> &[bool] {
        &self.labeled_mask
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn u_labeled(&self) -> &DenseMatrix<T> {
        &self.u_labeled
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    Random,
    #[default]
    Voronoi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MboConfig {
    pub dt: f64,
    pub n_t: usize,
    pub n_e: usize,
    /// Interface width; only used by [`gl_energy`].
    pub epsilon: f64,
    pub seed: u64,
    pub init_mode: InitMode,
    /// Eigensolver residual tolerance.
    pub eig_tol: f64,
}

impl Default for MboConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            n_t: 30,
            n_e: 50,
            epsilon: 1.0,
            seed: 0,
            init_mode: InitMode::Voronoi,
            eig_tol: 1e-8,
        }
    }
}

impl MboConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.n_e == 0 {
            return Err(Error::InvalidArgument("n_e must be positive".into()));
        }
        if !(self.eig_tol > 0.0) {
            return Err(Error::InvalidArgument("eig_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Euclidean projection onto `{x : x ≥ 0, Σx = 1}`.
pub fn project_to_simplex<T: Scalar>(v: &[T]) -> Vec<T> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let mut cumsum = T::zero();
    let mut shift = T::zero();
    for (j, &x) in sorted.iter().enumerate() {
        cumsum += x;
        let candidate = (T::one() - cumsum) / T::of_usize(j + 1);
        if x + candidate > T::zero() {
            shift = candidate;
        }
    }
    let mut out: Vec<T> = v.iter().map(|&x| (x + shift).max(T::zero())).collect();
    // Renormalise away the rounding left by the shift so rows sum to one.
    let s: T = out.iter().copied().sum();
    if s > T::zero() && s != T::one() {
        for x in &mut out {
            *x /= s;
        }
    }
    out
}

/// Initial state: labeled rows are their indicators, the rest follow `cfg.init_mode`.
pub fn initialize_state<T: Scalar>(fid: &FidelitySpec<T>, data: &Dataset<T>, cfg: &MboConfig) -> Result<StateMatrix<T>> {
    let (n, k) = (fid.n(), fid.k());
    if data.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: data.len(),
        });
    }
    let mut u = DenseMatrix::zeros(n, k);
    match cfg.init_mode {
        InitMode::Voronoi => {
            let seeds: Vec<(usize, usize)> = fid
                .labels()
                .iter()
                .enumerate()
                .filter_map(|(i, l)| l.map(|c| (i, c)))
                .collect();
            for c in 0..k {
                if !seeds.iter().any(|&(_, s)| s == c) {
                    return Err(Error::UnlabeledClass(c));
                }
            }
            for i in 0..n {
                let mut best = (T::infinity(), usize::MAX, 0usize);
                for &(j, c) in &seeds {
                    let d = euclidean(data.point(i), data.point(j));
                    if d < best.0 || (d == best.0 && j < best.1) {
                        best = (d, j, c);
                    }
                }
                u[(i, best.2)] = T::one();
            }
        }
        InitMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            for i in 0..n {
                let raw: Vec<T> = (0..k).map(|_| T::of(rng.random::<f64>())).collect();
                u.row_mut(i).copy_from_slice(&project_to_simplex(&raw));
            }
        }
    }
    for i in 0..n {
        if fid.labeled_mask()[i] {
            u.row_mut(i).copy_from_slice(fid.u_labeled().row(i));
        }
    }
    StateMatrix::new(u)
}

/// `X (I + dt Λ)⁻¹ Xᵀ (U − dt μ (U − U_labeled))` with `μ` applied row by row.
pub fn diffusion_step<T: Scalar>(u: &DenseMatrix<T>, basis: &EigenBasis<T>, fid: &FidelitySpec<T>, dt: T) -> Result<DenseMatrix<T>> {
    let (n, k) = (u.rows(), u.cols());
    if basis.vectors.rows() != n || fid.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: basis.vectors.rows(),
        });
    }
    if fid.k() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: fid.k(),
        });
    }
    let mut forced = u.clone();
    for i in 0..n {
        let m = fid.mu()[i];
        if m != T::zero() {
            let lab = fid.u_labeled().row(i);
            for (x, &l) in forced.row_mut(i).iter_mut().zip(lab) {
                *x = *x - dt * m * (*x - l);
            }
        }
    }
    let mut coeffs = basis.vectors.transpose_matmul(&forced)?;
    for (j, &lam) in basis.values.iter().enumerate() {
        let s = T::one() / (T::one() + dt * lam);
        for x in coeffs.row_mut(j) {
            *x *= s;
        }
    }
    basis.vectors.matmul(&coeffs)
}

/// Projects each row to the simplex and snaps it to its nearest vertex.
pub fn displacement<T: Scalar>(u_half: &DenseMatrix<T>) -> StateMatrix<T> {
    let mut out = DenseMatrix::zeros(u_half.rows(), u_half.cols());
    for i in 0..u_half.rows() {
        let v = project_to_simplex(u_half.row(i));
        out[(i, argmax(&v))] = T::one();
    }
    StateMatrix { u: out }
}

#[derive(Debug, Clone)]
pub struct MboOutcome<T> {
    pub state: StateMatrix<T>,
    /// Iterations actually performed.
    pub iterations: usize,
    /// The loop stopped because an iteration reproduced its input.
    pub stalled: bool,
}

/// Per-iteration observer arguments: iteration number (from 1), new state, rows changed.
pub type Observer<'a, T> = dyn FnMut(usize, &StateMatrix<T>, usize) + 'a;

/// Runs up to `n_t` diffusion/displacement rounds from `init`.
pub fn mbo_iterate<T: Scalar>(
    basis: &EigenBasis<T>,
    fid: &FidelitySpec<T>,
    init: StateMatrix<T>,
    dt: T,
    n_t: usize,
    observer: Option<&mut Observer<'_, T>>,
) -> Result<MboOutcome<T>> {
    let mut observer = observer;
    let mut state = init;
    for it in 1..=n_t {
        let half = diffusion_step(state.matrix(), basis, fid, dt)?;
        let next = displacement(&half);
        let changed = (0..next.n()).filter(|&i| next.row(i) != state.row(i)).count();
        if let Some(obs) = observer.as_deref_mut() {
            obs(it, &next, changed);
        }
        let same = changed == 0;
        state = next;
        if same {
            return Ok(MboOutcome {
                state,
                iterations: it,
                stalled: true,
            });
        }
    }
    Ok(MboOutcome {
        state,
        iterations: n_t,
        stalled: false,
    })
}

/// Full run on one Laplacian: eigenbasis, initialisation, iteration.
pub fn mbo_run<T: Scalar>(
    member: &SparseSymMatrix<T>,
    fid: &FidelitySpec<T>,
    data: &Dataset<T>,
    cfg: &MboConfig,
) -> Result<MboOutcome<T>> {
    cfg.validate()?;
    let basis = smallest_eigenpairs(member, cfg.n_e.min(member.n()), cfg.eig_tol)?;
    let init = initialize_state(fid, data, cfg)?;
    mbo_iterate(&basis, fid, init, T::of(cfg.dt), cfg.n_t, None)
}

/// `(ε/2)⟨U, LU⟩ + (1/2ε) Σ_i Π_k ¼‖u_i − e_k‖₁² + Σ_i (μ_i/2)‖u_i − û_i‖²`.
pub fn gl_energy<T: Scalar>(u: &StateMatrix<T>, member: &SparseSymMatrix<T>, fid: &FidelitySpec<T>, epsilon: T) -> Result<T> {
    if !(epsilon > T::zero()) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let lu = member.matmul_dense(u.matrix())?;
    let dirichlet: T = u.matrix().data().iter().zip(lu.data()).map(|(&a, &b)| a * b).sum();
    let quarter = T::of(0.25);
    let two = T::of(2.0);
    let mut well = T::zero();
    let mut fidelity = T::zero();
    for i in 0..u.n() {
        let row = u.row(i);
        let mut prod = T::one();
        for k in 0..u.k() {
            let l1: T = row
                .iter()
                .enumerate()
                .map(|(j, &x)| (x - if j == k { T::one() } else { T::zero() }).abs())
                .sum();
            prod *= quarter * l1 * l1;
        }
        well += prod;
        let m = fid.mu()[i];
        if m != T::zero() {
            let d2: T = row.iter().zip(fid.u_labeled().row(i)).map(|(&a, &b)| (a - b) * (a - b)).sum();
            fidelity += m / two * d2;
        }
    }
    Ok(epsilon / two * dirichlet + well / (two * epsilon) + fidelity)
}
