//! Nearest-neighbour similarity graphs and the symmetric normalised graph Laplacian.

mod kdtree;

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::SparseSymMatrix;
use crate::scalar::Scalar;

pub use kdtree::KdTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    /// `1 − cos θ` between feature vectors.
    Cosine,
}

/// Union-symmetrised kNN edge list: pairs `(i, j, distance)` with `i < j`, sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnPairs<T> {
    pub n: usize,
    pub n_neighbors: usize,
    pub pairs: Vec<(usize, usize, T)>,
}

impl<T: Scalar> KnnPairs<T> {
    pub fn edge_set(&self) -> Vec<(usize, usize)> {
        self.pairs.iter().map(|&(i, j, _)| (i, j)).collect()
    }
}

/// Gaussian-weighted similarity graph over kNN pairs.
#[derive(Debug, Clone)]
pub struct SimilarityGraph<T> {
    pub weights: SparseSymMatrix<T>,
    pub n_neighbors: usize,
    pub sigma: T,
}

impl<T: Scalar> SimilarityGraph<T> {
    pub fn degrees(&self) -> Vec<T> {
        let n = self.weights.n();
        (0..n).map(|i| self.weights.row(i).map(|(_, w)| w).sum()).collect()
    }
}

#[inline]
pub(crate) fn euclidean<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x - y;
            d * d
        })
        .sum::<T>()
        .sqrt()
}

#[inline]
fn by_distance_then_index<T: Scalar>(a: &(T, usize), b: &(T, usize)) -> Ordering {
    a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
}

/// `n_n` nearest other points of every point by exhaustive search, symmetrised by union.
/// Ties at equal distance go to the lower index.
pub fn knn_graph<T: Scalar>(data: &Dataset<T>, n_n: usize, metric: Metric) -> Result<KnnPairs<T>> {
    let n = data.len();
    check_neighbors(n, n_n)?;
    let norms: Vec<T> = match metric {
        Metric::Euclidean => Vec::new(),
        Metric::Cosine => {
            let norms: Vec<T> = (0..n)
                .map(|i| data.point(i).iter().map(|&x| x * x).sum::<T>().sqrt())
                .collect();
            if let Some(i) = norms.iter().position(|&v| v == T::zero()) {
                return Err(Error::ZeroVector(i));
            }
            norms
        }
    };
    let distance = |i: usize, j: usize| -> T {
        match metric {
            Metric::Euclidean => euclidean(data.point(i), data.point(j)),
            Metric::Cosine => {
                let dot: T = data.point(i).iter().zip(data.point(j)).map(|(&a, &b)| a * b).sum();
                (T::one() - dot / (norms[i] * norms[j])).max(T::zero())
            }
        }
    };
    let lists: Vec<Vec<(T, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(T, usize)> = (0..n).filter(|&j| j != i).map(|j| (distance(i, j), j)).collect();
            cand.select_nth_unstable_by(n_n - 1, by_distance_then_index);
            cand.truncate(n_n);
            cand.sort_by(by_distance_then_index);
            cand
        })
        .collect();
    Ok(symmetrize(n, n_n, &lists))
}

/// Euclidean kNN through a kd-tree; returns exactly the pairs [`knn_graph`] returns.
pub fn knn_graph_kdtree<T: Scalar>(data: &Dataset<T>, n_n: usize) -> Result<KnnPairs<T>> {
    let n = data.len();
    check_neighbors(n, n_n)?;
    let tree = KdTree::build(data.features());
    let lists: Vec<Vec<(T, usize)>> = (0..n).into_par_iter().map(|i| tree.nearest(i, n_n)).collect();
    Ok(symmetrize(n, n_n, &lists))
}

fn check_neighbors(n: usize, n_n: usize) -> Result<()> {
    if n_n == 0 || n_n >= n {
        return Err(Error::InvalidArgument(format!(
            "number of neighbours must satisfy 1 <= n_n < N (n_n = {n_n}, N = {n})"
        )));
    }
    Ok(())
}

fn symmetrize<T: Scalar>(n: usize, n_n: usize, lists: &[Vec<(T, usize)>]) -> KnnPairs<T> {
    let mut edges: BTreeMap<(usize, usize), T> = BTreeMap::new();
    for (i, list) in lists.iter().enumerate() {
        for &(d, j) in list {
            edges.entry((i.min(j), i.max(j))).or_insert(d);
        }
    }
    KnnPairs {
        n,
        n_neighbors: n_n,
        pairs: edges.into_iter().map(|((i, j), d)| (i, j, d)).collect(),
    }
}

/// Median of the kNN pair distances, ignoring zero distances; `1` if none are positive.
pub fn median_distance<T: Scalar>(pairs: &KnnPairs<T>) -> T {
    let mut d: Vec<T> = pairs.pairs.iter().map(|p| p.2).filter(|&x| x > T::zero()).collect();
    if d.is_empty() {
        return T::one();
    }
    d.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let m = d.len();
    if m % 2 == 1 {
        d[m / 2]
    } else {
        (d[m / 2 - 1] + d[m / 2]) / T::of(2.0)
    }
}

/// `w = exp(−d²/σ²)` on every retained pair.
///
/// Weights that would underflow to zero are raised to the smallest positive normal value
/// so every kNN edge stays in the graph.
pub fn gaussian_weights<T: Scalar>(pairs: &KnnPairs<T>, sigma: T) -> Result<SimilarityGraph<T>> {
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let s2 = sigma * sigma;
    let triplets = pairs.pairs.iter().map(|&(i, j, d)| {
        let w = (-(d * d) / s2).exp().max(T::min_positive_value());
        (i, j, w)
    });
    Ok(SimilarityGraph {
        weights: SparseSymMatrix::from_triplets(pairs.n, triplets)?,
        n_neighbors: pairs.n_neighbors,
        sigma,
    })
}

/// `L_s = I − D^{-1/2} W D^{-1/2}`.
pub fn symmetric_laplacian<T: Scalar>(g: &SimilarityGraph<T>) -> Result<SparseSymMatrix<T>> {
    let degrees = g.degrees();
    if let Some(i) = degrees.iter().position(|&d| !(d > T::zero())) {
        return Err(Error::IsolatedVertex(i));
    }
    let inv_sqrt: Vec<T> = degrees.iter().map(|&d| T::one() / d.sqrt()).collect();
    let n = g.weights.n();
    let diag = (0..n).map(|i| (i, i, T::one()));
    let off = g
        .weights
        .off_diagonal()
        .map(|(i, j, w)| (i, j, -(w * inv_sqrt[i] * inv_sqrt[j])));
    SparseSymMatrix::from_triplets(n, diag.chain(off))
}
