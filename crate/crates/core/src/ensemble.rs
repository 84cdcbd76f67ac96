//! Stacking of per-member MBO outputs and the final random-forest classifier.
//!
//! Bootstrap multiplicities are Poisson(1) draws keyed by `(seed, tree, row id)`, so a
//! tree depends on the training rows as a set rather than on their order.

use std::cmp::Ordering;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::mbo::StateMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleFeatures<T> {
    pub x: DenseMatrix<T>,
    pub n_members: usize,
    /// Columns per member: `K`, or 1 in the binary case.
    pub block: usize,
}

/// `[U_1 | U_2 | …]`; with `K = 2` only the first column of each member is kept.
pub fn concatenate_outputs<T: Scalar>(members: &[StateMatrix<T>], k: usize) -> Result<EnsembleFeatures<T>> {
    let first = members.first().ok_or(Error::Empty("member outputs"))?;
    let n = first.n();
    for m in members {
        if m.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: m.n(),
            });
        }
        if m.k() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: m.k(),
            });
        }
    }
    let block = if k == 2 { 1 } else { k };
    let width = block * members.len();
    let mut x = DenseMatrix::zeros(n, width);
    for (b, m) in members.iter().enumerate() {
        for i in 0..n {
            x.row_mut(i)[b * block..(b + 1) * block].copy_from_slice(&m.row(i)[..block]);
        }
    }
    Ok(EnsembleFeatures {
        x,
        n_members: members.len(),
        block,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTestSplit<T> {
    pub train_rows: Vec<usize>,
    pub train_x: DenseMatrix<T>,
    pub train_y: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub test_x: DenseMatrix<T>,
    /// Ground truth of the test rows where known.
    pub test_y: Vec<Option<usize>>,
}

/// Rows with `mask[i]` become training rows (their label must be known); the rest test rows.
pub fn split_by_mask<T: Scalar>(f: &EnsembleFeatures<T>, labels: &[Option<usize>], mask: &[bool]) -> Result<TrainTestSplit<T>> {
    let n = f.x.rows();
    if labels.len() != n || mask.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if labels.len() != n { labels.len() } else { mask.len() },
        });
    }
    let (train_rows, test_rows): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| mask[i]);
    if train_rows.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let train_y = train_rows
        .iter()
        .map(|&i| labels[i].ok_or_else(|| Error::InvalidArgument(format!("training row {i} has no label"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainTestSplit {
        train_x: f.x.select_rows(&train_rows),
        test_x: f.x.select_rows(&test_rows),
        test_y: test_rows.iter().map(|&i| labels[i]).collect(),
        train_y,
        train_rows,
        test_rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 8,
            min_leaf: 1,
        }
    }
}

/// One tree as parallel node arrays. Leaves have `feature = −1`, `children = [−1, −1]`;
/// internal nodes have `leaf_class = −1` and send `x[feature] <= threshold` left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature: Vec<i64>,
    pub threshold: Vec<f64>,
    pub children: Vec<[i64; 2]>,
    pub leaf_class: Vec<i64>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> usize {
        let mut node = 0usize;
        loop {
            let f = self.feature[node];
            if f < 0 {
                return self.leaf_class[node] as usize;
            }
            let [l, r] = self.children[node];
            node = if row[f as usize] <= self.threshold[node] { l as usize } else { r as usize };
        }
    }

    fn push_leaf(&mut self, class: usize) -> usize {
        self.feature.push(-1);
        self.threshold.push(0.0);
        self.children.push([-1, -1]);
        self.leaf_class.push(class as i64);
        self.feature.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub seed: u64,
    pub n_features: usize,
    pub n_classes: usize,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        for t in &m.trees {
            let nodes = t.feature.len();
            let consistent = t.threshold.len() == nodes && t.children.len() == nodes && t.leaf_class.len() == nodes;
            let valid = consistent
                && (0..nodes).all(|i| {
                    if t.feature[i] < 0 {
                        t.leaf_class[i] >= 0 && (t.leaf_class[i] as usize) < m.n_classes
                    } else {
                        (t.feature[i] as usize) < m.n_features
                            && t.children[i].iter().all(|&c| c > i as i64 && (c as usize) < nodes)
                    }
                });
            if !valid {
                return Err(Error::InvalidArgument("malformed tree in forest model".into()));
            }
        }
        Ok(m)
    }
}

/// 64-bit mix used to key bootstrap draws.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Poisson(1) bootstrap multiplicity of `row_id` in tree `tree`.
fn bootstrap_count(seed: u64, tree: usize, row_id: u64) -> u32 {
    let h = splitmix64(splitmix64(splitmix64(seed) ^ tree as u64) ^ row_id);
    let u = (h >> 11) as f64 / (1u64 << 53) as f64;
    let mut k = 0u32;
    let mut p = (-1.0f64).exp();
    let mut cdf = p;
    while u > cdf && k < 20 {
        k += 1;
        p /= f64::from(k);
        cdf += p;
    }
    k
}

/// Trains `params.n_trees` trees. `row_ids` identify training rows for the bootstrap;
/// when `None` the row position is used.
pub fn forest_fit<T: Scalar>(
    x: &DenseMatrix<T>,
    y: &[usize],
    row_ids: Option<&[u64]>,
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel> {
    let n = x.rows();
    if n == 0 {
        return Err(Error::Empty("training set"));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if params.n_trees == 0 || params.min_leaf == 0 {
        return Err(Error::InvalidArgument("n_trees and min_leaf must be positive".into()));
    }
    let ids: Vec<u64> = match row_ids {
        Some(ids) if ids.len() != n => {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: ids.len(),
            })
        }
        Some(ids) => ids.to_vec(),
        None => (0..n as u64).collect(),
    };
    let xf: Vec<f64> = x.data().iter().map(|v| v.as_f64()).collect();
    let n_features = x.cols();
    let n_classes = y.iter().max().map_or(0, |&m| m + 1);
    let data = TrainData {
        x: &xf,
        y,
        n_features,
        n_classes,
    };
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut weights: Vec<f64> = ids.iter().map(|&id| f64::from(bootstrap_count(seed, t, id))).collect();
            if weights.iter().all(|&w| w == 0.0) {
                weights.iter_mut().for_each(|w| *w = 1.0);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let rows: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
            let mut tree = Tree {
                feature: Vec::new(),
                threshold: Vec::new(),
                children: Vec::new(),
                leaf_class: Vec::new(),
            };
            grow(&data, &weights, rows, 0, params, &mut rng, &mut tree);
            tree
        })
        .collect();
    Ok(ForestModel {
        params: *params,
        seed,
        n_features,
        n_classes,
        trees,
    })
}

struct TrainData<'a> {
    x: &'a [f64],
    y: &'a [usize],
    n_features: usize,
    n_classes: usize,
}

impl TrainData<'_> {
    fn value(&self, row: usize, f: usize) -> f64 {
        self.x[row * self.n_features + f]
    }
}

fn gini(counts: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|&c| (c / total) * (c / total)).sum::<f64>()
}

fn majority(counts: &[f64]) -> usize {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best
}

struct BestSplit {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

fn grow(
    d: &TrainData<'_>,
    w: &[f64],
    rows: Vec<usize>,
    depth: usize,
    params: &ForestParams,
    rng: &mut ChaCha8Rng,
    tree: &mut Tree,
) -> usize {
    let mut counts = vec![0.0; d.n_classes];
    for &r in &rows {
        counts[d.y[r]] += w[r];
    }
    let total: f64 = counts.iter().sum();
    let class = majority(&counts);
    let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
    if pure || depth >= params.max_depth || total < 2.0 * params.min_leaf as f64 {
        return tree.push_leaf(class);
    }
    let best = find_split(d, w, &rows, params, rng);
    let Some(best) = best else {
        return tree.push_leaf(class);
    };
    let (left, right): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&r| d.value(r, best.feature) <= best.threshold);
    let node = tree.feature.len();
    tree.feature.push(best.feature as i64);
    tree.threshold.push(best.threshold);
    tree.children.push([-1, -1]);
    tree.leaf_class.push(-1);
    let l = grow(d, w, left, depth + 1, params, rng, tree);
    let r = grow(d, w, right, depth + 1, params, rng, tree);
    tree.children[node] = [l as i64, r as i64];
    node
}

fn find_split(d: &TrainData<'_>, w: &[f64], rows: &[usize], params: &ForestParams, rng: &mut ChaCha8Rng) -> Option<BestSplit> {
    let f = d.n_features;
    let mtry = ((f as f64).sqrt().floor() as usize).clamp(1, f);
    let mut order: Vec<usize> = sample(rng, f, f).into_vec();
    let (tried, rest) = order.split_at_mut(mtry);
    tried.sort_unstable();
    rest.sort_unstable();
    let mut best = best_among(d, w, rows, tried, params);
    if best.is_none() {
        best = best_among(d, w, rows, rest, params);
    }
    best
}

fn best_among(d: &TrainData<'_>, w: &[f64], rows: &[usize], features: &[usize], params: &ForestParams) -> Option<BestSplit> {
    let min_leaf = params.min_leaf as f64;
    let mut best: Option<BestSplit> = None;
    let mut sorted = rows.to_vec();
    let mut right_total = vec![0.0; d.n_classes];
    for &r in rows {
        right_total[d.y[r]] += w[r];
    }
    let total: f64 = right_total.iter().sum();
    for &feat in features {
        sorted.sort_by(|&a, &b| d.value(a, feat).partial_cmp(&d.value(b, feat)).unwrap_or(Ordering::Equal));
        let mut left = vec![0.0; d.n_classes];
        let mut left_w = 0.0;
        for pos in 0..sorted.len() - 1 {
            let r = sorted[pos];
            left[d.y[r]] += w[r];
            left_w += w[r];
            let (v, next) = (d.value(r, feat), d.value(sorted[pos + 1], feat));
            if v == next {
                continue;
            }
            let right_w = total - left_w;
            if left_w < min_leaf || right_w < min_leaf {
                continue;
            }
            let right: Vec<f64> = right_total.iter().zip(&left).map(|(&t, &l)| t - l).collect();
            let impurity = (left_w * gini(&left, left_w) + right_w * gini(&right, right_w)) / total;
            if best.as_ref().is_none_or(|b| impurity < b.impurity - 1e-12) {
                let mut threshold = v + (next - v) / 2.0;
                if threshold >= next {
                    threshold = v;
                }
                best = Some(BestSplit {
                    impurity,
                    feature: feat,
                    threshold,
                });
            }
        }
    }
    best
}

/// Majority vote over trees, ties to the lower class id.
pub fn forest_predict<T: Scalar>(model: &ForestModel, x: &DenseMatrix<T>) -> Result<Vec<usize>> {
    if x.cols() != model.n_features {
        return Err(Error::DimensionMismatch {
            expected: model.n_features,
            got: x.cols(),
        });
    }
    Ok((0..x.rows())
        .map(|i| {
            let row: Vec<f64> = x.row(i).iter().map(|v| v.as_f64()).collect();
            let mut votes = vec![0usize; model.n_classes.max(1)];
            for t in &model.trees {
                votes[t.predict_row(&row)] += 1;
            }
            let mut best = 0;
            for (k, &v) in votes.iter().enumerate() {
                if v > votes[best] {
                    best = k;
                }
            }
            best
        })
        .collect())
}

/// Fraction of positions where `pred` and `truth` agree.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::Empty("prediction"));
    }
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: pred.len(),
        });
    }
    Ok(pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / pred.len() as f64)
}
