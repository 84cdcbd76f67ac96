//! Exact k-nearest-neighbour search with a static kd-tree.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

use super::euclidean;

enum Node<T> {
    Leaf(Vec<usize>),
    Split {
        axis: usize,
        value: T,
        left: Box<Node<T>>,
        right: Box<Node<T>>,
    },
}

pub struct KdTree<'a, T> {
    points: &'a DenseMatrix<T>,
    root: Node<T>,
}

const LEAF_SIZE: usize = 16;

#[derive(PartialEq)]
struct Candidate<T>(T, usize);

impl<T: Scalar> Eq for Candidate<T> {}

impl<T: Scalar> PartialOrd for Candidate<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for Candidate<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .partial_cmp(&other.0)
            .unwrap_or(Ordering::Equal)
            .then(self.1.cmp(&other.1))
    }
}

impl<'a, T: Scalar> KdTree<'a, T> {
    pub fn build(points: &'a DenseMatrix<T>) -> Self {
        let idx: Vec<usize> = (0..points.rows()).collect();
        let root = Self::build_node(points, idx);
        Self { points, root }
    }

    fn build_node(points: &DenseMatrix<T>, mut idx: Vec<usize>) -> Node<T> {
        if idx.len() <= LEAF_SIZE {
            return Node::Leaf(idx);
        }
        // Split along the widest axis at the median.
        let dim = points.cols();
        let axis = (0..dim)
            .map(|a| {
                let (lo, hi) = idx.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &i| {
                    let v = points[(i, a)];
                    (lo.min(v), hi.max(v))
                });
                (a, hi - lo)
            })
            .fold((0, T::neg_infinity()), |best, x| if x.1 > best.1 { x } else { best })
            .0;
        let mid = idx.len() / 2;
        idx.select_nth_unstable_by(mid, |&a, &b| {
            points[(a, axis)]
                .partial_cmp(&points[(b, axis)])
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        let value = points[(idx[mid], axis)];
        let right = idx.split_off(mid);
        Node::Split {
            axis,
            value,
            left: Box::new(Self::build_node(points, idx)),
            right: Box::new(Self::build_node(points, right)),
        }
    }

    /// `k` nearest other points of point `query`, ordered by `(distance, index)`.
    pub fn nearest(&self, query: usize, k: usize) -> Vec<(T, usize)> {
        let mut heap: BinaryHeap<Candidate<T>> = BinaryHeap::with_capacity(k + 1);
        self.search(&self.root, query, k, &mut heap);
        let mut out: Vec<(T, usize)> = heap.into_iter().map(|c| (c.0, c.1)).collect();
        out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
        out
    }

    fn search(&self, node: &Node<T>, query: usize, k: usize, heap: &mut BinaryHeap<Candidate<T>>) {
        let q = self.points.row(query);
        match node {
            Node::Leaf(ids) => {
                for &j in ids {
                    if j == query {
                        continue;
                    }
                    let cand = Candidate(euclidean(q, self.points.row(j)), j);
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[*axis] - *value;
                let (near, far) = if diff < T::zero() { (left, right) } else { (right, left) };
                self.search(near, query, k, heap);
                // Slightly conservative bound: a rounded distance can undercut the exact
                // plane gap by an ulp, and ties must still be visited for index order.
                let gap = diff.abs() * (T::one() - T::epsilon() * T::of(8.0));
                if heap.len() < k || gap <= heap.peek().expect("heap is full").0 {
                    self.search(far, query, k, heap);
                }
            }
        }
    }
}
