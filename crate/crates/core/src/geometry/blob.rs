//! Per-label blob assembly.

use crate::error::{Error, Result};
use crate::geometry::alpha::{alpha_from_triangulation, capsule, AlphaRadius};
use crate::geometry::delaunay::delaunay;
use crate::geometry::lof::lof;
use crate::geometry::polygon::{nearest_on_boundary, point_in_region, region_area, Loop};
use crate::geometry::smooth::smooth_outline;
use crate::geometry::voronoi::{clipped_voronoi, Cell};
use crate::point::Point2;
use crate::scalar::Scalar;
use crate::subclustering::SubClustering;

/// Vertices per circle in the capsule fallback.
const CAPSULE_SEGMENTS: usize = 32;
/// Anchors always kept by the outlier filter.
const MIN_INLIERS: usize = 3;

/// Neighbourhood size for a label with `n > 3` anchors. Half the label at
/// most: with `k = n − 1` every neighbourhood is the whole label and an
/// isolated anchor scores about 1.
pub fn default_lof_k(n: usize) -> usize {
    ((n - 1) / 2).clamp(2, 20)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryParams<T> {
    pub alpha_radius: AlphaRadius<T>,
    /// `None` means `min(20, max(2, (anchors − 1) / 2))` per label.
    pub lof_k: Option<usize>,
    pub lof_threshold: T,
    pub smoothing_passes: usize,
    pub virtual_cap: usize,
    /// Disk radius of the fallback shape for degenerate labels.
    pub capsule_radius: T,
    pub seed: u64,
}

impl<T: Scalar> Default for GeometryParams<T> {
    fn default() -> Self {
        Self {
            alpha_radius: AlphaRadius::Auto,
            lof_k: None,
            lof_threshold: T::of(1.5),
            smoothing_passes: 3,
            virtual_cap: 20_000,
            capsule_radius: T::of(2.0),
            seed: 0,
        }
    }
}

impl<T: Scalar> GeometryParams<T> {
    pub fn validate(&self, n_anchors: usize) -> Result<()> {
        if let AlphaRadius::Fixed(r) = self.alpha_radius {
            if !(r > T::zero() && r.is_finite()) {
                return Err(Error::Param(format!("alpha radius must be > 0, got {r}")));
            }
        }
        if self.lof_k.is_some_and(|k| k < 2) {
            return Err(Error::Param("lof-k must be >= 2".into()));
        }
        if !(self.lof_threshold > T::one()) {
            return Err(Error::Param(format!(
                "lof threshold must be > 1, got {}",
                self.lof_threshold
            )));
        }
        if self.virtual_cap < n_anchors {
            return Err(Error::Param(format!(
                "virtual cap {} is below the anchor count {n_anchors}",
                self.virtual_cap
            )));
        }
        if !(self.capsule_radius > T::zero()) {
            return Err(Error::Param("capsule radius must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlobGeometry<T> {
    pub label: usize,
    /// Every anchor of the label, ascending.
    pub anchor_ids: Vec<usize>,
    /// LOF score per entry of `anchor_ids` (1 when the filter did not run).
    pub lof_scores: Vec<T>,
    /// Anchors owning a cell, ascending; parallel to `cells`.
    pub inlier_anchor_ids: Vec<usize>,
    pub outlier_anchor_ids: Vec<usize>,
    /// `(from, to)`: populations moved onto an inlier, for outliers and for
    /// anchors coinciding with an earlier inlier.
    pub reassigned: Vec<(usize, usize)>,
    /// Outer loops counter-clockwise, holes clockwise.
    pub boundary: Vec<Loop<T>>,
    /// Radius used; `None` when the capsule fallback was taken.
    pub alpha_radius: Option<T>,
    pub cells: Vec<Cell<T>>,
    pub outline: Vec<Loop<T>>,
    pub area: T,
}

impl<T: Scalar> BlobGeometry<T> {
    /// Population of every cell: its own sub-cluster plus those reassigned
    /// to it.
    pub fn cell_sizes(&self, sizes: &[usize]) -> Vec<usize> {
        self.inlier_anchor_ids
            .iter()
            .map(|&a| {
                sizes[a]
                    + self
                        .reassigned
                        .iter()
                        .filter(|&&(_, to)| to == a)
                        .map(|&(from, _)| sizes[from])
                        .sum::<usize>()
            })
            .collect()
    }
}

fn nearest(p: Point2<impl Scalar>, candidates: &[(usize, Point2<impl Scalar>)]) -> usize {
    let p = p.to_f64();
    candidates
        .iter()
        .map(|&(id, q)| (p.dist2(q.to_f64()), id))
        .min_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal))
        .expect("at least one inlier")
        .1
}

/// Builds the blob of `label` from the canonical anchor coordinates.
pub fn build_blob<T: Scalar>(
    label: usize,
    coords: &[Point2<T>],
    sc: &SubClustering<T>,
    params: &GeometryParams<T>,
) -> Result<BlobGeometry<T>> {
    let range = sc
        .class_ranges
        .get(label)
        .cloned()
        .ok_or_else(|| Error::Param(format!("no label {label}")))?;
    if range.is_empty() {
        return Err(Error::Geometry(format!("label {label} has no anchors")));
    }
    if coords.len() != sc.num_anchors() {
        return Err(Error::Shape(format!(
            "{} coordinates for {} anchors",
            coords.len(),
            sc.num_anchors()
        )));
    }
    let anchor_ids: Vec<usize> = range.collect();
    let pts: Vec<Point2<T>> = anchor_ids.iter().map(|&a| coords[a]).collect();
    let n = pts.len();

    let mut lof_scores = vec![T::one(); n];
    let mut keep = vec![true; n];
    if n > MIN_INLIERS {
        let k = match params.lof_k {
            Some(k) => k.min(n - 1),
            None => default_lof_k(n),
        };
        lof_scores = lof(&pts, k)?;
        for (flag, &s) in keep.iter_mut().zip(&lof_scores) {
            *flag = s <= params.lof_threshold;
        }
        if keep.iter().filter(|&&f| f).count() < MIN_INLIERS {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                lof_scores[a]
                    .partial_cmp(&lof_scores[b])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            keep = vec![false; n];
            for &i in &order[..MIN_INLIERS] {
                keep[i] = true;
            }
        }
    }

    let mut inliers: Vec<(usize, Point2<T>)> = Vec::new();
    let mut outlier_anchor_ids = Vec::new();
    let mut reassigned = Vec::new();
    for i in 0..n {
        let (a, p) = (anchor_ids[i], pts[i]);
        if !keep[i] {
            outlier_anchor_ids.push(a);
        } else if let Some(&(first, _)) = inliers.iter().find(|(_, q)| *q == p) {
            reassigned.push((a, first));
        } else {
            inliers.push((a, p));
        }
    }
    for &a in &outlier_anchor_ids {
        reassigned.push((a, nearest(coords[a], &inliers)));
    }
    reassigned.sort_unstable();

    let sites: Vec<Point2<T>> = inliers.iter().map(|&(_, p)| p).collect();
    let tris = if sites.len() >= 3 { delaunay(&sites) } else { Vec::new() };
    let (boundary, alpha_radius) = if tris.is_empty() {
        (vec![capsule(&sites, params.capsule_radius, CAPSULE_SEGMENTS)], None)
    } else {
        let shape = alpha_from_triangulation(&sites, &tris, params.alpha_radius)
            .map_err(|e| Error::Geometry(format!("label {label}: {e}")))?;
        (shape.loops, Some(shape.radius))
    };

    // Inliers left outside an explicit-radius shape act from the boundary.
    let snapped: Vec<Point2<T>> = sites
        .iter()
        .map(|&p| {
            if point_in_region(p, &boundary) {
                p
            } else {
                nearest_on_boundary(p, &boundary).unwrap_or(p)
            }
        })
        .collect();
    let cells = clipped_voronoi(&snapped, &boundary);
    let outline = smooth_outline(&boundary, params.smoothing_passes);
    let area = region_area(&boundary);

    Ok(BlobGeometry {
        label,
        anchor_ids,
        lof_scores,
        inlier_anchor_ids: inliers.iter().map(|&(a, _)| a).collect(),
        outlier_anchor_ids,
        reassigned,
        boundary,
        alpha_radius,
        cells,
        outline,
        area,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::polygon::{is_simple, signed_area};
    use crate::matrix::Matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(x: f64, y: f64) -> Point2<f64> {
        Point2::new(x, y)
    }

    /// A sub-clustering with one class whose anchors sit at `pts`.
    fn single_class(pts: &[Point2<f64>], sizes: &[usize]) -> SubClustering<f64> {
        let n = pts.len();
        let rows: Vec<[f64; 2]> = pts.iter().map(|q| [q.x, q.y]).collect();
        SubClustering {
            assignment: (0..n).flat_map(|a| std::iter::repeat_n(a, sizes[a])).collect(),
            anchors: Matrix::from_rows(&rows).unwrap(),
            anchor_label: vec![0; n],
            sizes: sizes.to_vec(),
            radii: vec![0.0; n],
            class_ranges: vec![0..n],
            thresholds: vec![1.0],
            auto_warning: false,
        }
    }

    fn check_invariants(b: &BlobGeometry<f64>) {
        let total: f64 = b.cells.iter().map(|c| c.area).sum();
        assert!((total - b.area).abs() <= 0.005 * b.area.abs(), "{total} vs {}", b.area);
        for (c, &a) in b.cells.iter().zip(&b.inlier_anchor_ids) {
            assert!(c.area > 0.0, "anchor {a}");
            let inside = point_in_region(c.site, &c.loops)
                || nearest_on_boundary(c.site, &c.loops).unwrap().dist(c.site) < 1e-9;
            assert!(inside, "anchor {a}");
        }
        for l in &b.outline {
            assert!(is_simple(l));
        }
    }

    #[test]
    fn three_anchors_make_a_triangle() {
        let pts = [p(10.0, 10.0), p(30.0, 10.0), p(20.0, 30.0)];
        let sc = single_class(&pts, &[5, 5, 5]);
        let b = build_blob(0, &pts, &sc, &GeometryParams::default()).unwrap();
        assert_eq!(b.cells.len(), 3);
        assert_eq!(b.boundary.len(), 1);
        assert!((b.area - 200.0).abs() < 1e-9);
        assert!(b.outlier_anchor_ids.is_empty());
        check_invariants(&b);
    }

    #[test]
    fn far_anchor_is_filtered_and_merged() {
        let mut pts: Vec<Point2<f64>> = (0..20).map(|i| p((i % 5) as f64 * 5.0, (i / 5) as f64 * 5.0)).collect();
        pts.push(p(90.0, 90.0));
        let sizes: Vec<usize> = (1..=21).collect();
        let sc = single_class(&pts, &sizes);
        let b = build_blob(0, &pts, &sc, &GeometryParams::default()).unwrap();
        assert_eq!(b.outlier_anchor_ids, vec![20]);
        // (15, 20) is the grid corner nearest to (90, 90): anchor 19.
        assert_eq!(b.reassigned, vec![(20, 19)]);
        let cs = b.cell_sizes(&sc.sizes);
        assert_eq!(cs[19], 20 + 21);
        assert_eq!(cs.iter().sum::<usize>(), sizes.iter().sum::<usize>());
        assert!(b.boundary.iter().flatten().all(|q| q.x <= 20.0 && q.y <= 15.0));
        check_invariants(&b);
    }

    #[test]
    fn degenerate_labels_use_capsule() {
        for pts in [vec![p(50.0, 50.0)], vec![p(10.0, 10.0), p(20.0, 20.0), p(30.0, 30.0)]] {
            let sc = single_class(&pts, &vec![3; pts.len()]);
            let b = build_blob(0, &pts, &sc, &GeometryParams::default()).unwrap();
            assert!(b.alpha_radius.is_none());
            assert_eq!(b.cells.len(), pts.len());
            assert!(signed_area(&b.boundary[0]) > 0.0);
            check_invariants(&b);
        }
    }

    #[test]
    fn duplicate_anchors_share_a_cell() {
        let pts = [p(10.0, 10.0), p(30.0, 10.0), p(20.0, 30.0), p(30.0, 10.0)];
        let sc = single_class(&pts, &[1, 2, 3, 4]);
        let b = build_blob(0, &pts, &sc, &GeometryParams::default()).unwrap();
        assert_eq!(b.inlier_anchor_ids, vec![0, 1, 2]);
        assert_eq!(b.reassigned, vec![(3, 1)]);
        assert_eq!(b.cell_sizes(&sc.sizes), vec![1, 6, 3]);
    }

    #[test]
    fn random_blobs_partition_and_claim() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let pts: Vec<Point2<f64>> = (0..40)
                .map(|_| p(rng.random_range(20.0..80.0), rng.random_range(20.0..80.0)))
                .collect();
            let sc = single_class(&pts, &[1; 40]);
            let b = build_blob(0, &pts, &sc, &GeometryParams::default()).unwrap();
            check_invariants(&b);
            // Points in the boundary are claimed by exactly their nearest cell.
            for _ in 0..1000 {
                let q = p(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0));
                if !point_in_region(q, &b.boundary) {
                    continue;
                }
                let claims: Vec<usize> = (0..b.cells.len()).filter(|&c| point_in_region(q, &b.cells[c].loops)).collect();
                let d: Vec<f64> = b.cells.iter().map(|c| q.dist(c.site)).collect();
                let best = d.iter().cloned().fold(f64::INFINITY, f64::min);
                match claims.as_slice() {
                    [c] => assert!(d[*c] <= best + 1e-9),
                    _ => {
                        // Only tolerated on a cell border.
                        let near: Vec<usize> = (0..d.len()).filter(|&c| d[c] <= best + 1e-9).collect();
                        assert!(near.len() > 1, "claims {claims:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn explicit_radius_too_small_errors() {
        let pts = [p(10.0, 10.0), p(30.0, 10.0), p(20.0, 30.0), p(20.0, 15.0)];
        let sc = single_class(&pts, &[1; 4]);
        let params = GeometryParams {
            alpha_radius: AlphaRadius::Fixed(0.5),
            ..GeometryParams::default()
        };
        assert!(build_blob(0, &pts, &sc, &params).is_err());
    }
}
