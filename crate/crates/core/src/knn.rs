//! Exact directed k-nearest-neighbour graphs.
//!
//! Neighbours are ordered by ascending squared Euclidean distance, ties by
//! ascending node id. Planar inputs go through a k-d tree, everything else
//! through a brute-force scan; both return identical graphs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::matrix::Matrix;
use crate::scalar::{dist2, Scalar};

/// Out-neighbour lists of every node.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph<T> {
    pub k: usize,
    pub neighbors: Vec<Vec<usize>>,
    /// Squared distances matching `neighbors`.
    pub dist2: Vec<Vec<T>>,
}

impl<T: Scalar> KnnGraph<T> {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    /// Nodes whose out-degree fell short of `k`.
    pub fn truncated(&self) -> usize {
        self.neighbors.iter().filter(|n| n.len() < self.k).count()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(s, ns)| ns.iter().map(move |&t| (s, t)))
    }
}

#[derive(Clone, Copy, Debug)]
struct Cand<T> {
    d2: T,
    id: usize,
}

impl<T: Scalar> PartialEq for Cand<T> {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl<T: Scalar> Eq for Cand<T> {}
impl<T: Scalar> PartialOrd for Cand<T> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<T: Scalar> Ord for Cand<T> {
    fn cmp(&self, o: &Self) -> Ordering {
        self.d2
            .partial_cmp(&o.d2)
            .unwrap_or(Ordering::Equal)
            .then(self.id.cmp(&o.id))
    }
}

fn finish<T: Scalar>(k: usize, lists: Vec<Vec<Cand<T>>>) -> KnnGraph<T> {
    let (neighbors, dist2) = lists
        .into_iter()
        .map(|l| l.into_iter().map(|c| (c.id, c.d2)).unzip())
        .unzip();
    KnnGraph { k, neighbors, dist2 }
}

#[inline]
fn admissible(q: usize, c: usize, groups: Option<&[usize]>) -> bool {
    c != q && groups.is_none_or(|g| g[c] != g[q])
}

/// Exact KNN graph. With `groups`, candidates sharing the query's group are
/// excluded; nodes with fewer than `k` admissible candidates get fewer edges.
pub fn build_knn<T: Scalar>(points: &Matrix<T>, k: usize, groups: Option<&[usize]>) -> KnnGraph<T> {
    if points.cols() == 2 {
        build_knn_kdtree(points, k, groups)
    } else {
        build_knn_brute(points, k, groups)
    }
}

/// O(n²) scan.
pub fn build_knn_brute<T: Scalar>(
    points: &Matrix<T>,
    k: usize,
    groups: Option<&[usize]>,
) -> KnnGraph<T> {
    let n = points.rows();
    let lists = (0..n)
        .into_par_iter()
        .map(|q| {
            let qr = points.row(q);
            let mut cands: Vec<Cand<T>> = (0..n)
                .filter(|&c| admissible(q, c, groups))
                .map(|c| Cand {
                    d2: dist2(qr, points.row(c)),
                    id: c,
                })
                .collect();
            if cands.len() > k && k > 0 {
                cands.select_nth_unstable(k - 1);
            }
            cands.truncate(k);
            cands.sort_unstable();
            cands
        })
        .collect();
    finish(k, lists)
}

/// Balanced 2-d tree stored implicitly over a permutation of the rows: the
/// node of range `[lo, hi)` sits at `(lo + hi) / 2`.
struct KdTree<'a, T> {
    points: &'a Matrix<T>,
    perm: Vec<usize>,
}

impl<'a, T: Scalar> KdTree<'a, T> {
    fn new(points: &'a Matrix<T>) -> Self {
        let mut perm: Vec<usize> = (0..points.rows()).collect();
        Self::build(points, &mut perm, 0);
        Self { points, perm }
    }

    fn build(points: &Matrix<T>, idx: &mut [usize], depth: usize) {
        if idx.len() <= 1 {
            return;
        }
        let axis = depth % 2;
        let mid = idx.len() / 2;
        idx.select_nth_unstable_by(mid, |&a, &b| {
            points
                .get(a, axis)
                .partial_cmp(&points.get(b, axis))
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        let (left, right) = idx.split_at_mut(mid);
        Self::build(points, left, depth + 1);
        Self::build(points, &mut right[1..], depth + 1);
    }

    fn query(&self, q: usize, k: usize, groups: Option<&[usize]>) -> Vec<Cand<T>> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 {
            self.search(0, self.perm.len(), 0, q, k, groups, &mut heap);
        }
        heap.into_sorted_vec()
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        &self,
        lo: usize,
        hi: usize,
        depth: usize,
        q: usize,
        k: usize,
        groups: Option<&[usize]>,
        heap: &mut BinaryHeap<Cand<T>>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let node = self.perm[mid];
        let qr = self.points.row(q);
        if admissible(q, node, groups) {
            let c = Cand {
                d2: dist2(qr, self.points.row(node)),
                id: node,
            };
            if heap.len() < k {
                heap.push(c);
            } else if c < *heap.peek().expect("heap is full") {
                heap.pop();
                heap.push(c);
            }
        }
        let axis = depth % 2;
        let diff = qr[axis] - self.points.get(node, axis);
        let (near, far) = if diff < T::zero() {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(near.0, near.1, depth + 1, q, k, groups, heap);
        // Equality still descends: a tie at the bound may win on node id.
        if heap.len() < k || diff * diff <= heap.peek().expect("heap is full").d2 {
            self.search(far.0, far.1, depth + 1, q, k, groups, heap);
        }
    }
}

/// Planar KNN through a k-d tree.
pub fn build_knn_kdtree<T: Scalar>(
    points: &Matrix<T>,
    k: usize,
    groups: Option<&[usize]>,
) -> KnnGraph<T> {
    assert_eq!(points.cols(), 2, "k-d tree search is planar");
    let tree = KdTree::new(points);
    let lists = (0..points.rows())
        .into_par_iter()
        .map(|q| tree.query(q, k, groups))
        .collect();
    finish(k, lists)
}
