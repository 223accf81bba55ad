//! Per-class sub-clustering with a BIRCH clustering-feature tree.
//!
//! Each class is reduced independently to radius-bounded sub-clusters whose
//! centroids (anchors) sample the class's area rather than its density:
//! a dense region and a sparse region of the same extent yield roughly the
//! same number of anchors.
//!
//! Only the tree-building phase of BIRCH is run. Points are inserted in row
//! order, which makes the result fully deterministic.

use std::fmt::Write as _;
use std::ops::Range;

use rayon::prelude::*;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{dist2, Scalar};

/// Clustering feature: count, linear sum and sum of squared norms.
#[derive(Debug, Clone, PartialEq)]
pub struct CfEntry<T> {
    pub n: usize,
    pub ls: Vec<T>,
    pub ss: T,
}

impl<T: Scalar> CfEntry<T> {
    pub fn from_point(x: &[T]) -> Self {
        Self {
            n: 1,
            ls: x.to_vec(),
            ss: x.iter().map(|&v| v * v).sum(),
        }
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            n: 0,
            ls: vec![T::zero(); dim],
            ss: T::zero(),
        }
    }

    pub fn centroid(&self) -> Vec<T> {
        let n = T::of_usize(self.n);
        self.ls.iter().map(|&v| v / n).collect()
    }

    /// Mean squared distance to the centroid, clamped at zero.
    pub fn radius2(&self) -> T {
        if self.n == 0 {
            return T::zero();
        }
        let n = T::of_usize(self.n);
        let c2: T = self.ls.iter().map(|&v| (v / n) * (v / n)).sum();
        (self.ss / n - c2).max(T::zero())
    }

    pub fn radius(&self) -> T {
        self.radius2().sqrt()
    }

    pub fn merge(&mut self, other: &Self) {
        self.n += other.n;
        for (a, &b) in self.ls.iter_mut().zip(&other.ls) {
            *a += b;
        }
        self.ss += other.ss;
    }

    pub fn add_point(&mut self, x: &[T]) {
        self.n += 1;
        for (a, &b) in self.ls.iter_mut().zip(x) {
            *a += b;
        }
        self.ss += x.iter().map(|&v| v * v).sum::<T>();
    }

    /// Radius² of `self ∪ {x}` without mutating.
    fn radius2_with(&self, x: &[T]) -> T {
        let n = T::of_usize(self.n + 1);
        let ss = self.ss + x.iter().map(|&v| v * v).sum::<T>();
        let c2: T = self
            .ls
            .iter()
            .zip(x)
            .map(|(&a, &b)| {
                let c = (a + b) / n;
                c * c
            })
            .sum();
        (ss / n - c2).max(T::zero())
    }

    fn centroid_dist2(&self, x: &[T]) -> T {
        let n = T::of_usize(self.n);
        let mut acc = T::zero();
        for (&a, &b) in self.ls.iter().zip(x) {
            let d = a / n - b;
            acc += d * d;
        }
        acc
    }

    fn centroid_dist2_cf(&self, other: &Self) -> T {
        dist2(&self.centroid(), &other.centroid())
    }
}

struct Entry<T> {
    cf: CfEntry<T>,
    child: Option<usize>,
    members: Vec<usize>,
}

struct Node<T> {
    leaf: bool,
    entries: Vec<Entry<T>>,
}

struct CfTree<'a, T> {
    nodes: Vec<Node<T>>,
    root: usize,
    threshold2: T,
    branching: usize,
    dim: usize,
    points: &'a Matrix<T>,
}

impl<'a, T: Scalar> CfTree<'a, T> {
    fn new(points: &'a Matrix<T>, threshold: T, branching: usize) -> Self {
        Self {
            nodes: vec![Node {
                leaf: true,
                entries: Vec::new(),
            }],
            root: 0,
            threshold2: threshold * threshold,
            branching,
            dim: points.cols(),
            points,
        }
    }

    fn nearest_entry(&self, node: usize, x: &[T]) -> Option<usize> {
        let mut best: Option<(usize, T)> = None;
        for (k, e) in self.nodes[node].entries.iter().enumerate() {
            let d = e.cf.centroid_dist2(x);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((k, d));
            }
        }
        best.map(|(k, _)| k)
    }

    fn insert(&mut self, row: usize) {
        if let Some(sibling) = self.insert_into(self.root, row) {
            let old = self.root;
            let entries = [old, sibling]
                .into_iter()
                .map(|child| Entry {
                    cf: self.node_cf(child),
                    child: Some(child),
                    members: Vec::new(),
                })
                .collect();
            self.nodes.push(Node {
                leaf: false,
                entries,
            });
            self.root = self.nodes.len() - 1;
        }
    }

    /// Inserts a point below `node`; returns the id of a new sibling node when
    /// `node` had to split.
    fn insert_into(&mut self, node: usize, row: usize) -> Option<usize> {
        let x = self.points.row(row);
        let nearest = self.nearest_entry(node, x);
        if self.nodes[node].leaf {
            match nearest {
                Some(k) if self.nodes[node].entries[k].cf.radius2_with(x) <= self.threshold2 => {
                    let e = &mut self.nodes[node].entries[k];
                    e.cf.add_point(x);
                    e.members.push(row);
                }
                _ => self.nodes[node].entries.push(Entry {
                    cf: CfEntry::from_point(x),
                    child: None,
                    members: vec![row],
                }),
            }
        } else {
            let k = nearest.expect("internal nodes are never empty");
            let child = self.nodes[node].entries[k].child.expect("internal entry has child");
            self.nodes[node].entries[k].cf.add_point(x);
            if let Some(sibling) = self.insert_into(child, row) {
                self.nodes[node].entries[k].cf = self.node_cf(child);
                let cf = self.node_cf(sibling);
                self.nodes[node].entries.push(Entry {
                    cf,
                    child: Some(sibling),
                    members: Vec::new(),
                });
            }
        }
        if self.nodes[node].entries.len() > self.branching {
            Some(self.split(node))
        } else {
            None
        }
    }

    fn node_cf(&self, node: usize) -> CfEntry<T> {
        let mut cf = CfEntry::empty(self.dim);
        for e in &self.nodes[node].entries {
            cf.merge(&e.cf);
        }
        cf
    }

    /// Farthest-pair seeding; every entry goes to the nearer seed.
    fn split(&mut self, node: usize) -> usize {
        let entries = std::mem::take(&mut self.nodes[node].entries);
        let (mut sa, mut sb, mut far) = (0, 1, T::neg_infinity());
        for a in 0..entries.len() {
            for b in a + 1..entries.len() {
                let d = entries[a].cf.centroid_dist2_cf(&entries[b].cf);
                if d > far {
                    (sa, sb, far) = (a, b, d);
                }
            }
        }
        let ca = entries[sa].cf.centroid();
        let cb = entries[sb].cf.centroid();
        let (mut keep, mut moved) = (Vec::new(), Vec::new());
        for (k, e) in entries.into_iter().enumerate() {
            let to_b = if k == sa {
                false
            } else if k == sb {
                true
            } else {
                let c = e.cf.centroid();
                dist2(&c, &cb) < dist2(&c, &ca)
            };
            if to_b {
                moved.push(e);
            } else {
                keep.push(e);
            }
        }
        let leaf = self.nodes[node].leaf;
        self.nodes[node].entries = keep;
        self.nodes.push(Node {
            leaf,
            entries: moved,
        });
        self.nodes.len() - 1
    }

    fn into_leaves(self) -> Vec<(CfEntry<T>, Vec<usize>)> {
        let mut out = Vec::new();
        let mut nodes: Vec<Option<Node<T>>> = self.nodes.into_iter().map(Some).collect();
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            let node = nodes[id].take().expect("tree nodes visited once");
            for e in node.entries {
                match e.child {
                    Some(c) => stack.push(c),
                    None => out.push((e.cf, e.members)),
                }
            }
        }
        out.sort_by_key(|(_, m)| m[0]);
        out
    }
}

/// Result of one CF-tree build.
#[derive(Debug, Clone, PartialEq)]
pub struct BirchFit<T> {
    /// Leaf entries ordered by their first member row.
    pub leaves: Vec<CfEntry<T>>,
    /// Leaf index of every input row (in the order rows were given).
    pub assignment: Vec<usize>,
}

/// Builds a CF-tree over all rows of `points` with radius bound `threshold`
/// and at most `branching` entries per node.
pub fn birch_fit<T: Scalar>(points: &Matrix<T>, threshold: T, branching: usize) -> BirchFit<T> {
    let rows: Vec<usize> = (0..points.rows()).collect();
    birch_fit_rows(points, &rows, threshold, branching)
}

/// [`birch_fit`] restricted to `rows`, inserted in the given order. The
/// assignment is indexed by position in `rows`.
pub fn birch_fit_rows<T: Scalar>(
    points: &Matrix<T>,
    rows: &[usize],
    threshold: T,
    branching: usize,
) -> BirchFit<T> {
    let mut tree = CfTree::new(points, threshold, branching.max(2));
    for &r in rows {
        tree.insert(r);
    }
    let leaves = tree.into_leaves();
    let mut slot = vec![usize::MAX; points.rows()];
    for (pos, &r) in rows.iter().enumerate() {
        slot[r] = pos;
    }
    let mut assignment = vec![usize::MAX; rows.len()];
    for (leaf, (_, members)) in leaves.iter().enumerate() {
        for &m in members {
            assignment[slot[m]] = leaf;
        }
    }
    BirchFit {
        leaves: leaves.into_iter().map(|(cf, _)| cf).collect(),
        assignment,
    }
}

/// Radius bound for the CF-tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold<T> {
    /// Search for a bound that lands the median anchors-per-class in the
    /// target band.
    Auto,
    Fixed(T),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BirchParams<T> {
    pub threshold: Threshold<T>,
    pub branching: usize,
    /// Inclusive band for the median anchor count per class (auto mode).
    pub auto_target: (usize, usize),
    /// Search the threshold separately for every class instead of sharing one.
    pub per_class_auto: bool,
    pub max_bisection_steps: usize,
}

impl<T> Default for BirchParams<T> {
    fn default() -> Self {
        Self {
            threshold: Threshold::Auto,
            branching: 50,
            auto_target: (20, 60),
            per_class_auto: false,
            max_bisection_steps: 20,
        }
    }
}

impl<T: Scalar> BirchParams<T> {
    pub fn validate(&self) -> Result<()> {
        if let Threshold::Fixed(t) = self.threshold {
            if !(t > T::zero()) || !t.is_finite() {
                return Err(Error::Param(format!("birch threshold must be > 0, got {t}")));
            }
        }
        if self.branching < 2 {
            return Err(Error::Param(format!(
                "birch branching must be >= 2, got {}",
                self.branching
            )));
        }
        let (lo, hi) = self.auto_target;
        if lo > hi || lo < 3 {
            return Err(Error::Param(format!(
                "anchor target band [{lo}, {hi}] needs 3 <= lo <= hi"
            )));
        }
        Ok(())
    }
}

/// Anchors of every class, concatenated in label order.
#[derive(Debug, Clone, PartialEq)]
pub struct SubClustering<T> {
    /// Anchor id of every data point.
    pub assignment: Vec<usize>,
    /// `N_A × D` centroids.
    pub anchors: Matrix<T>,
    pub anchor_label: Vec<usize>,
    pub sizes: Vec<usize>,
    pub radii: Vec<T>,
    /// Anchor id range of each class.
    pub class_ranges: Vec<Range<usize>>,
    /// Threshold used for each class (identical unless per-class auto).
    pub thresholds: Vec<T>,
    /// Set when the automatic search did not reach the target band.
    pub auto_warning: bool,
}

impl<T: Scalar> SubClustering<T> {
    pub fn num_anchors(&self) -> usize {
        self.anchors.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.class_ranges.len()
    }

    pub fn max_threshold(&self) -> T {
        self.thresholds
            .iter()
            .copied()
            .fold(T::zero(), T::max)
    }
}

fn fit_classes<T: Scalar>(
    points: &Matrix<T>,
    members: &[Vec<usize>],
    thresholds: &[T],
    branching: usize,
) -> Vec<BirchFit<T>> {
    members
        .par_iter()
        .zip(thresholds.par_iter())
        .map(|(rows, &t)| birch_fit_rows(points, rows, t, branching))
        .collect()
}

fn median(counts: &mut [usize]) -> f64 {
    counts.sort_unstable();
    let n = counts.len();
    if n % 2 == 1 {
        counts[n / 2] as f64
    } else {
        (counts[n / 2 - 1] + counts[n / 2]) as f64 / 2.0
    }
}

/// Search bracket for the threshold: a quarter of the smallest nonzero
/// nearest-neighbour distance (estimated on up to 256 rows per class) and the
/// diagonal of the data bounding box.
fn threshold_bracket<T: Scalar>(points: &Matrix<T>, members: &[Vec<usize>]) -> (T, T) {
    let d = points.cols();
    let mut lo = vec![T::infinity(); d];
    let mut hi = vec![T::neg_infinity(); d];
    for r in points.iter_rows() {
        for j in 0..d {
            lo[j] = lo[j].min(r[j]);
            hi[j] = hi[j].max(r[j]);
        }
    }
    let diag = dist2(&lo, &hi).sqrt();
    let min_nn = members
        .par_iter()
        .map(|rows| {
            let mut best = T::infinity();
            for &a in rows.iter().take(256) {
                for &b in rows {
                    if a != b {
                        let dd = dist2(points.row(a), points.row(b));
                        if dd > T::zero() && dd < best {
                            best = dd;
                        }
                    }
                }
            }
            best
        })
        .reduce(|| T::infinity(), T::min)
        .sqrt();
    let floor = diag * T::of(1e-9);
    let lo = if min_nn.is_finite() {
        (min_nn / T::of(4.0)).max(floor)
    } else {
        floor
    };
    (lo.max(T::min_positive_value()), diag.max(lo))
}

struct Search<T> {
    thresholds: Vec<T>,
    fits: Vec<BirchFit<T>>,
    hit: bool,
}

/// Geometric bisection on the threshold so that `score(fits)` lands in the
/// band. Anchor count falls as the threshold grows.
fn bisect<T: Scalar>(
    lo: T,
    hi: T,
    band: (usize, usize),
    steps: usize,
    mut eval: impl FnMut(T) -> (Vec<BirchFit<T>>, f64),
) -> (T, Vec<BirchFit<T>>, bool) {
    let (blo, bhi) = (band.0 as f64, band.1 as f64);
    let miss = |m: f64| {
        if m < blo {
            blo - m
        } else if m > bhi {
            m - bhi
        } else {
            0.0
        }
    };
    let (mut a, mut b) = (lo, hi);
    let mut best: Option<(f64, T, Vec<BirchFit<T>>)> = None;
    for _ in 0..steps.max(1) {
        let mid = (a * b).sqrt();
        let (fits, m) = eval(mid);
        let err = miss(m);
        if best.as_ref().is_none_or(|(e, _, _)| err < *e) {
            best = Some((err, mid, fits));
        }
        if err == 0.0 {
            break;
        }
        if m > bhi {
            a = mid;
        } else {
            b = mid;
        }
    }
    let (err, t, fits) = best.expect("at least one bisection step");
    (t, fits, err == 0.0)
}

/// Fits every class separately and concatenates the anchors in label order.
pub fn subcluster_dataset<T: Scalar>(
    ds: &LabeledDataset<T>,
    params: &BirchParams<T>,
) -> Result<SubClustering<T>> {
    params.validate()?;
    let members = ds.class_members();
    let points = ds.points();
    let m = members.len();
    let search = match params.threshold {
        Threshold::Fixed(t) => {
            let thresholds = vec![t; m];
            let fits = fit_classes(points, &members, &thresholds, params.branching);
            Search {
                thresholds,
                fits,
                hit: true,
            }
        }
        Threshold::Auto if !params.per_class_auto => {
            let (lo, hi) = threshold_bracket(points, &members);
            let (t, fits, hit) = bisect(lo, hi, params.auto_target, params.max_bisection_steps, |t| {
                let fits = fit_classes(points, &members, &vec![t; m], params.branching);
                let mut counts: Vec<usize> = fits.iter().map(|f| f.leaves.len()).collect();
                let med = median(&mut counts);
                (fits, med)
            });
            Search {
                thresholds: vec![t; m],
                fits,
                hit,
            }
        }
        Threshold::Auto => {
            let per: Vec<(T, BirchFit<T>, bool)> = members
                .par_iter()
                .map(|rows| {
                    let one = [rows.clone()];
                    let (lo, hi) = threshold_bracket(points, &one);
                    let (t, mut fits, hit) =
                        bisect(lo, hi, params.auto_target, params.max_bisection_steps, |t| {
                            let fit = birch_fit_rows(points, rows, t, params.branching);
                            let c = fit.leaves.len() as f64;
                            (vec![fit], c)
                        });
                    (t, fits.remove(0), hit)
                })
                .collect();
            let hit = per.iter().all(|p| p.2);
            let (thresholds, fits) = per.into_iter().map(|(t, f, _)| (t, f)).unzip();
            Search {
                thresholds,
                fits,
                hit,
            }
        }
    };
    if !search.hit {
        log::warn!(
            "threshold search did not reach the anchor band {:?}; using closest",
            params.auto_target
        );
    }
    Ok(assemble(ds, &members, search))
}

fn assemble<T: Scalar>(
    ds: &LabeledDataset<T>,
    members: &[Vec<usize>],
    search: Search<T>,
) -> SubClustering<T> {
    let mut assignment = vec![usize::MAX; ds.len()];
    let mut anchor_rows = Vec::new();
    let (mut anchor_label, mut sizes, mut radii, mut class_ranges) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (label, (rows, fit)) in members.iter().zip(&search.fits).enumerate() {
        let base = sizes.len();
        for (pos, &r) in rows.iter().enumerate() {
            assignment[r] = base + fit.assignment[pos];
        }
        for leaf in &fit.leaves {
            anchor_rows.push(leaf.centroid());
            anchor_label.push(label);
            sizes.push(leaf.n);
            radii.push(leaf.radius());
        }
        class_ranges.push(base..sizes.len());
    }
    SubClustering {
        assignment,
        anchors: Matrix::from_rows(&anchor_rows).expect("anchors share the data dimension"),
        anchor_label,
        sizes,
        radii,
        class_ranges,
        thresholds: search.thresholds,
        auto_warning: !search.hit,
    }
}

/// Read-only summary of a sub-clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorStats<T> {
    pub per_class_counts: Vec<usize>,
    /// `size_histogram[k]` counts anchors with size in `[2^k, 2^(k+1))`.
    pub size_histogram: Vec<usize>,
    pub total_points: usize,
    pub total_anchors: usize,
    pub max_radius: T,
}

pub fn anchor_stats<T: Scalar>(sc: &SubClustering<T>) -> AnchorStats<T> {
    let mut hist = Vec::new();
    for &s in &sc.sizes {
        let bin = (usize::BITS - 1 - s.max(1).leading_zeros()) as usize;
        if hist.len() <= bin {
            hist.resize(bin + 1, 0);
        }
        hist[bin] += 1;
    }
    AnchorStats {
        per_class_counts: sc.class_ranges.iter().map(|r| r.len()).collect(),
        size_histogram: hist,
        total_points: sc.sizes.iter().sum(),
        total_anchors: sc.num_anchors(),
        max_radius: sc.radii.iter().copied().fold(T::zero(), T::max),
    }
}

/// Text table `id,label,size,radius,x0,..,x{D-1}` with a header row.
pub fn anchor_dump<T: Scalar>(sc: &SubClustering<T>) -> String {
    let d = sc.anchors.cols();
    let mut out = String::from("id,label,size,radius");
    for j in 0..d {
        let _ = write!(out, ",x{j}");
    }
    out.push('\n');
    for (id, row) in sc.anchors.iter_rows().enumerate() {
        let _ = write!(
            out,
            "{id},{},{},{}",
            sc.anchor_label[id], sc.sizes[id], sc.radii[id]
        );
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}
