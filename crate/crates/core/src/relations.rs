//! Overlap and proximity between sub-clusters and classes.
//!
//! Both relations are fractions of directed KNN edges:
//!
//! * overlap: edges of the `K_O`-NN graph over the data points, grouped by
//!   the sub-cluster (or class) of the source and target point;
//! * proximity: edges of the `K_P`-NN graph over the anchors where anchors of
//!   the same class may not link, grouped by class.
//!
//! Each row is normalized by the out-edges of its source group, so every
//! non-empty row sums to one.

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::knn::{build_knn, KnnGraph};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::subclustering::SubClustering;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelationParams {
    /// Neighbours per point in the overlap graphs.
    pub k_overlap: usize,
    /// Neighbours per anchor in the proximity graph.
    pub k_proximity: usize,
    /// Neighbours per point in the confusion classifier.
    pub k_confusion: usize,
}

impl Default for RelationParams {
    fn default() -> Self {
        Self {
            k_overlap: 10,
            k_proximity: 5,
            k_confusion: 10,
        }
    }
}

impl RelationParams {
    pub fn validate(&self, n_points: usize) -> Result<()> {
        for (name, k) in [
            ("k-overlap", self.k_overlap),
            ("k-prox", self.k_proximity),
            ("k-confusion", self.k_confusion),
        ] {
            if k == 0 {
                return Err(Error::Param(format!("{name} must be >= 1")));
            }
        }
        if self.k_overlap >= n_points {
            return Err(Error::Param(format!(
                "k-overlap {} must be below the point count {n_points}",
                self.k_overlap
            )));
        }
        Ok(())
    }
}

/// Square matrix of edge fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationMatrix {
    n: usize,
    data: Vec<f64>,
}

impl RelationMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Shape(format!(
                "{} values do not form a {n}x{n} matrix",
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Entry-wise `|self - other|`.
    pub fn abs_diff(&self, other: &Self) -> Result<Self> {
        check_shape(self, other)?;
        Ok(Self {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (a - b).abs())
                .collect(),
        })
    }

    /// Off-diagonal entries in row-major order.
    pub fn off_diagonal(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.n.saturating_sub(1));
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    out.push(self.get(i, j));
                }
            }
        }
        out
    }
}

/// Raw directed edge counts between groups.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeCounts {
    pub n: usize,
    pub counts: Vec<u64>,
}

impl EdgeCounts {
    /// Counts graph edges by `(group[source], group[target])`.
    pub fn from_graph<T: Scalar>(graph: &KnnGraph<T>, group: &[usize], n_groups: usize) -> Self {
        let mut counts = vec![0u64; n_groups * n_groups];
        for (s, t) in graph.edges() {
            counts[group[s] * n_groups + group[t]] += 1;
        }
        Self {
            n: n_groups,
            counts,
        }
    }

    /// Merges groups through `map` (e.g. anchor → label).
    pub fn aggregate(&self, map: &[usize], n_groups: usize) -> Self {
        let mut counts = vec![0u64; n_groups * n_groups];
        for i in 0..self.n {
            for j in 0..self.n {
                counts[map[i] * n_groups + map[j]] += self.counts[i * self.n + j];
            }
        }
        Self {
            n: n_groups,
            counts,
        }
    }

    /// Row-normalized fractions plus the ids of rows without any out-edge
    /// (left as zeros).
    pub fn normalize(&self) -> (RelationMatrix, Vec<usize>) {
        let n = self.n;
        let mut m = RelationMatrix::zeros(n);
        let mut empty = Vec::new();
        for i in 0..n {
            let row = &self.counts[i * n..(i + 1) * n];
            let total: u64 = row.iter().sum();
            if total == 0 {
                empty.push(i);
                continue;
            }
            for (j, &c) in row.iter().enumerate() {
                m.set(i, j, c as f64 / total as f64);
            }
        }
        (m, empty)
    }
}

/// Anchor-level overlap from a KNN graph over the data points. Rows of
/// anchors without members are zero and logged.
pub fn anchor_overlap<T: Scalar>(
    graph: &KnnGraph<T>,
    assignment: &[usize],
    n_anchors: usize,
) -> RelationMatrix {
    let (m, empty) = EdgeCounts::from_graph(graph, assignment, n_anchors).normalize();
    if !empty.is_empty() {
        log::debug!("{} anchors own no points; their overlap rows are zero", empty.len());
    }
    m
}

/// Class-level overlap from a KNN graph over the data points.
pub fn label_overlap<T: Scalar>(graph: &KnnGraph<T>, labels: &[usize], n_labels: usize) -> RelationMatrix {
    EdgeCounts::from_graph(graph, labels, n_labels).normalize().0
}

/// Class-level proximity over anchors, same-class edges excluded.
pub fn proximity<T: Scalar>(
    anchors: &Matrix<T>,
    anchor_label: &[usize],
    n_labels: usize,
    k: usize,
) -> Result<RelationMatrix> {
    let mut per_label = vec![0usize; n_labels];
    for &l in anchor_label {
        per_label[l] += 1;
    }
    let total = anchor_label.len();
    for (l, &c) in per_label.iter().enumerate() {
        if c == 0 {
            return Err(Error::Data(format!("label {l} has no anchors")));
        }
        if c == total {
            return Err(Error::Data(format!(
                "label {l} has no anchors of other labels to link to"
            )));
        }
        if total - c < k {
            log::warn!(
                "label {l}: only {} foreign anchors for k-prox {k}; out-degree truncated",
                total - c
            );
        }
    }
    let graph = build_knn(anchors, k, Some(anchor_label));
    Ok(label_overlap(&graph, anchor_label, n_labels))
}

/// The three high-dimensional relation matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationMatrices {
    pub anchor_overlap: RelationMatrix,
    pub label_overlap: RelationMatrix,
    pub proximity: RelationMatrix,
}

/// Overlap over the data points and proximity over the anchors, both in the
/// original feature space.
pub fn measure_highdim<T: Scalar>(
    ds: &LabeledDataset<T>,
    sc: &SubClustering<T>,
    params: &RelationParams,
) -> Result<RelationMatrices> {
    params.validate(ds.len())?;
    let graph = build_knn(ds.points(), params.k_overlap, None);
    let counts = EdgeCounts::from_graph(&graph, &sc.assignment, sc.num_anchors());
    Ok(RelationMatrices {
        anchor_overlap: counts.normalize().0,
        label_overlap: counts
            .aggregate(&sc.anchor_label, ds.num_classes())
            .normalize()
            .0,
        proximity: proximity(
            &sc.anchors,
            &sc.anchor_label,
            ds.num_classes(),
            params.k_proximity,
        )?,
    })
}

fn check_shape(h: &RelationMatrix, l: &RelationMatrix) -> Result<()> {
    if h.n != l.n {
        return Err(Error::Shape(format!("{0}x{0} vs {1}x{1}", h.n, l.n)));
    }
    Ok(())
}

/// Largest absolute entry-wise difference and its first row-major position.
pub fn mae(h: &RelationMatrix, l: &RelationMatrix) -> Result<(f64, (usize, usize))> {
    mae_masked(h, l, |_, _| true)
}

/// [`mae`] over the entries where `include(i, j)` holds. Returns `(0, (0, 0))`
/// when nothing is included.
pub fn mae_masked(
    h: &RelationMatrix,
    l: &RelationMatrix,
    include: impl Fn(usize, usize) -> bool,
) -> Result<(f64, (usize, usize))> {
    check_shape(h, l)?;
    let mut best = (0.0, (0, 0));
    let mut first = true;
    for i in 0..h.n {
        for j in 0..h.n {
            if !include(i, j) {
                continue;
            }
            let d = (h.get(i, j) - l.get(i, j)).abs();
            if first || d > best.0 {
                best = (d, (i, j));
                first = false;
            }
        }
    }
    Ok(best)
}

/// Leave-one-out KNN classifier confusion: entry `(i, j)` is the fraction of
/// class-`i` points predicted as `j`. Vote ties go to the smaller summed
/// neighbour distance, then the lower label.
pub fn knn_confusion<T: Scalar>(ds: &LabeledDataset<T>, k: usize) -> Result<RelationMatrix> {
    if k == 0 {
        return Err(Error::Param("k-confusion must be >= 1".into()));
    }
    let m = ds.num_classes();
    if let Some(c) = ds.class_sizes().iter().position(|&s| s < 2) {
        return Err(Error::Data(format!(
            "class {c} needs more than one point for leave-one-out voting"
        )));
    }
    let graph = build_knn(ds.points(), k, None);
    let labels = ds.labels();
    let mut counts = vec![0u64; m * m];
    for (p, (ns, ds2)) in graph.neighbors.iter().zip(&graph.dist2).enumerate() {
        let mut votes = vec![0usize; m];
        let mut dsum = vec![0.0f64; m];
        for (&q, &d2) in ns.iter().zip(ds2) {
            votes[labels[q]] += 1;
            dsum[labels[q]] += d2.as_f64().sqrt();
        }
        let mut pred = 0;
        for c in 1..m {
            let better = votes[c] > votes[pred]
                || (votes[c] == votes[pred] && votes[c] > 0 && dsum[c] < dsum[pred])
                || (votes[pred] == 0 && votes[c] > 0);
            if better {
                pred = c;
            }
        }
        counts[labels[p] * m + pred] += 1;
    }
    Ok(EdgeCounts { n: m, counts }.normalize().0)
}
