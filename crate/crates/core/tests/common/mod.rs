//! Independent reference implementations shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use plmbo::{DenseMatrix, SparseSymMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Weighted graph Laplacian plus a nonnegative diagonal shift: sparse, symmetric, PSD.
/// About `density · n²` stored entries counting both triangles.
pub fn random_sparse_psd(rng: &mut ChaCha8Rng, n: usize, density: f64) -> SparseSymMatrix<f64> {
    let n_edges = ((density * (n * n) as f64 - n as f64) / 2.0).max(1.0) as usize;
    let mut diag = vec![0.0; n];
    let mut trip = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for _ in 0..n_edges {
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        if i == j || !seen.insert((i.min(j), i.max(j))) {
            continue;
        }
        let w: f64 = rng.random_range(0.05..2.0);
        trip.push((i.min(j), i.max(j), -w));
        diag[i] += w;
        diag[j] += w;
    }
    for (i, d) in diag.into_iter().enumerate() {
        let shift: f64 = if rng.random_bool(0.3) { rng.random_range(0.0..0.5) } else { 0.0 };
        trip.push((i, i, d + shift));
    }
    SparseSymMatrix::from_triplets(n, trip).unwrap()
}

/// Solves `A X = B` by Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &DenseMatrix<f64>, b: &DenseMatrix<f64>) -> DenseMatrix<f64> {
    let n = a.rows();
    let m = b.cols();
    let mut aa: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    let mut bb: Vec<Vec<f64>> = (0..n).map(|i| b.row(i).to_vec()).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| aa[x][c].abs().total_cmp(&aa[y][c].abs())).unwrap();
        aa.swap(c, p);
        bb.swap(c, p);
        for r in (c + 1)..n {
            let f = aa[r][c] / aa[c][c];
            if f == 0.0 {
                continue;
            }
            for k in c..n {
                aa[r][k] -= f * aa[c][k];
            }
            for k in 0..m {
                bb[r][k] -= f * bb[c][k];
            }
        }
    }
    let mut x = vec![vec![0.0; m]; n];
    for r in (0..n).rev() {
        for k in 0..m {
            let s: f64 = ((r + 1)..n).map(|j| aa[r][j] * x[j][k]).sum();
            x[r][k] = (bb[r][k] - s) / aa[r][r];
        }
    }
    DenseMatrix::from_rows(&x).unwrap()
}

/// Rank over the rationals of an integer matrix given row-major.
pub fn rational_rank(rows: usize, cols: usize, entries: &[i64]) -> usize {
    let mut m: Vec<Vec<BigRational>> = (0..rows)
        .map(|r| {
            (0..cols)
                .map(|c| BigRational::from_integer(BigInt::from(entries[r * cols + c])))
                .collect()
        })
        .collect();
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows).find(|&r| !m[r][c].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        for r in 0..rows {
            if r != rank && !m[r][c].is_zero() {
                let f = &m[r][c] / &m[rank][c];
                for k in c..cols {
                    let t = &f * &m[rank][k];
                    m[r][k] -= t;
                }
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

pub fn components(n: usize, edges: &[(usize, usize)]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut count = n;
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            count -= 1;
        }
    }
    count
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Rips complex at a single radius, built from scratch.
pub struct Complex {
    pub n_vertices: usize,
    pub edges: Vec<[usize; 2]>,
    pub triangles: Vec<[usize; 3]>,
}

impl Complex {
    pub fn rips(points: &[Vec<f64>], r: f64) -> Self {
        let m = points.len();
        let close = |i: usize, j: usize| dist(&points[i], &points[j]) <= r;
        let mut edges = Vec::new();
        let mut triangles = Vec::new();
        for i in 0..m {
            for j in (i + 1)..m {
                if close(i, j) {
                    edges.push([i, j]);
                    for k in (j + 1)..m {
                        if close(i, k) && close(j, k) {
                            triangles.push([i, j, k]);
                        }
                    }
                }
            }
        }
        Complex {
            n_vertices: m,
            edges,
            triangles,
        }
    }

    /// `∂_1` row-major, vertices × edges.
    pub fn d1(&self) -> Vec<i64> {
        let c = self.edges.len();
        let mut out = vec![0; self.n_vertices * c];
        for (k, e) in self.edges.iter().enumerate() {
            out[e[0] * c + k] = -1;
            out[e[1] * c + k] = 1;
        }
        out
    }

    /// `∂_2` row-major, rows indexed by `edge_rows`, one column per triangle.
    pub fn d2_on(&self, edge_rows: &[[usize; 2]]) -> Vec<i64> {
        let c = self.triangles.len();
        let mut out = vec![0; edge_rows.len() * c];
        for (k, t) in self.triangles.iter().enumerate() {
            for (face, sign) in [([t[1], t[2]], 1), ([t[0], t[2]], -1), ([t[0], t[1]], 1)] {
                if let Some(r) = edge_rows.iter().position(|e| *e == face) {
                    out[r * c + k] = sign;
                }
            }
        }
        out
    }

    pub fn d2(&self) -> Vec<i64> {
        self.d2_on(&self.edges)
    }

    pub fn betti(&self) -> (usize, usize) {
        let r1 = rational_rank(self.n_vertices, self.edges.len(), &self.d1());
        let r2 = rational_rank(self.edges.len(), self.triangles.len(), &self.d2());
        (self.n_vertices - r1, self.edges.len() - r1 - r2)
    }
}

/// Persistent Betti numbers `(β_0^{t,p}, β_1^{t,p})` of `K_t ⊆ K_tp`.
pub fn persistent_betti(small: &Complex, big: &Complex) -> (usize, usize) {
    // q = 0: cycles are all vertices; boundaries come from edges of K_tp, every vertex is old.
    let rank_big_d1 = rational_rank(big.n_vertices, big.edges.len(), &big.d1());
    let b0 = small.n_vertices - rank_big_d1;

    let z1 = small.edges.len() - rational_rank(small.n_vertices, small.edges.len(), &small.d1());
    let d = big.d2();
    let rank_d = rational_rank(big.edges.len(), big.triangles.len(), &d);
    let new_rows: Vec<[usize; 2]> = big.edges.iter().filter(|e| !small.edges.contains(e)).copied().collect();
    let d_new = big.d2_on(&new_rows);
    let rank_new = rational_rank(new_rows.len(), big.triangles.len(), &d_new);
    (b0, z1 - (rank_d - rank_new))
}

/// Exact Euclidean projection onto the simplex by enumerating supports.
pub fn simplex_projection_oracle(v: &[f64]) -> Vec<f64> {
    let k = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << k) {
        let support: Vec<usize> = (0..k).filter(|&i| mask & (1 << i) != 0).collect();
        let s: f64 = support.iter().map(|&i| v[i]).sum();
        let shift = (1.0 - s) / support.len() as f64;
        let mut x = vec![0.0; k];
        let mut ok = true;
        for &i in &support {
            x[i] = v[i] + shift;
            ok &= x[i] >= -1e-15;
        }
        if !ok {
            continue;
        }
        let d: f64 = x.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, x));
        }
    }
    best.expect("singleton supports are always feasible").1
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `n` points in `dim` dimensions scattered around `clusters` well-separated centres.
pub fn cloud(seed: u64, n: usize, dim: usize, clusters: usize) -> plmbo::Dataset<f64> {
    let mut r = rng(seed);
    let centers: Vec<Vec<f64>> = (0..clusters)
        .map(|_| (0..dim).map(|_| r.random_range(-50.0..50.0)).collect())
        .collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| centers[i % clusters].iter().map(|c| c + r.random_range(-1.0..1.0)).collect())
        .collect();
    plmbo::Dataset::unlabeled("cloud", DenseMatrix::from_rows(&rows).unwrap()).unwrap()
}

/// Symmetric normalised Laplacian of a Gaussian kNN graph on a random cloud.
pub fn random_base_laplacian(seed: u64) -> SparseSymMatrix<f64> {
    use plmbo::graph::{gaussian_weights, knn_graph, median_distance, symmetric_laplacian, Metric};
    let mut r = rng(seed ^ 0xBA5E);
    let n = r.random_range(8..70);
    let clusters = r.random_range(1..4);
    let n_n = r.random_range(1..6);
    let data = cloud(seed, n, 2, clusters);
    let pairs = knn_graph(&data, n_n, Metric::Euclidean).unwrap();
    let g = gaussian_weights(&pairs, median_distance(&pairs)).unwrap();
    symmetric_laplacian(&g).unwrap()
}

/// Checks one family; returns a description of the first violated property.
pub fn check_family(base: &SparseSymMatrix<f64>, l_n: usize, invert: bool) -> Result<(), String> {
    use plmbo::linalg::{dense_eig, nullity};
    let fam = plmbo::pl_family::build_family(base, l_n, true, invert).map_err(|e| e.to_string())?;
    if fam.len() != l_n {
        return Err(format!("{} members for l_n = {l_n}", fam.len()));
    }
    let base_edges = base.edge_set();
    let mut prev: Option<Vec<(usize, usize)>> = None;
    for (k, m) in fam.members.iter().enumerate() {
        let dense = m.to_dense();
        let n = dense.rows();
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                let v = dense[(i, j)];
                if i != j && v != 0.0 && v != -1.0 {
                    return Err(format!("member {} entry ({i},{j}) = {v}", k + 1));
                }
                sum += v;
            }
            if sum != 0.0 {
                return Err(format!("member {} row {i} sums to {sum}", k + 1));
            }
        }
        let edges = m.edge_set();
        if !edges.iter().all(|e| base_edges.binary_search(e).is_ok()) {
            return Err(format!("member {} has an edge absent from the base", k + 1));
        }
        if let Some(p) = &prev {
            if !edges.iter().all(|e| p.binary_search(e).is_ok()) {
                return Err(format!("member {} is not nested in member {}", k + 1, k));
            }
        }
        let eig = dense_eig(&dense).map_err(|e| e.to_string())?;
        if eig.values.first().is_some_and(|&v| v < -1e-9 * dense.max_abs().max(1.0)) {
            return Err(format!("member {} has eigenvalue {}", k + 1, eig.values[0]));
        }
        let comps = components(n, &edges);
        let nul = nullity(&dense, None).map_err(|e| e.to_string())?;
        if nul != comps {
            return Err(format!("member {} nullity {nul} but {comps} components", k + 1));
        }
        prev = Some(edges);
    }
    if !fam.members[l_n - 1].edge_set().is_empty() {
        return Err("last member still has edges".into());
    }
    Ok(())
}
