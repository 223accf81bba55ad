//! Virtual points: uniform rejection samples inside Voronoi cells.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::polygon::{bbox, point_in_region};
use crate::geometry::voronoi::Cell;
use crate::point::Point2;
use crate::scalar::Scalar;
use crate::seed::rng_for;

/// Attempts after which a cell's acceptance rate is checked.
pub const ATTEMPT_CHECK: u64 = 1_000_000;
pub const MIN_ACCEPTANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VirtualPointSet<T> {
    pub points: Vec<Point2<T>>,
    pub owner_anchor: Vec<usize>,
    pub owner_label: Vec<usize>,
}

impl<T: Scalar> VirtualPointSet<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn extend(&mut self, other: VirtualPointSet<T>) {
        self.points.extend(other.points);
        self.owner_anchor.extend(other.owner_anchor);
        self.owner_label.extend(other.owner_label);
    }
}

/// Draws exactly `count` points uniformly inside `cell`.
pub fn sample_cell<T: Scalar, R: Rng>(cell: &Cell<T>, count: usize, rng: &mut R, name: &str) -> Result<Vec<Point2<T>>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if cell.area <= T::zero() {
        return Err(Error::Geometry(format!("cell {name} has zero area but needs {count} points")));
    }
    let (lo, hi) = bbox(cell.loops.iter().flatten().copied()).expect("cell with area has vertices");
    let span = hi - lo;
    let mut out = Vec::with_capacity(count);
    let mut attempts: u64 = 0;
    while out.len() < count {
        attempts += 1;
        let q = Point2::new(
            lo.x + span.x * T::of(rng.random::<f64>()),
            lo.y + span.y * T::of(rng.random::<f64>()),
        );
        if point_in_region(q, &cell.loops) {
            out.push(q);
        }
        if attempts % ATTEMPT_CHECK == 0 && (out.len() as f64) < MIN_ACCEPTANCE * attempts as f64 {
            return Err(Error::Geometry(format!(
                "cell {name}: acceptance {} of {attempts} attempts (degenerate sliver)",
                out.len()
            )));
        }
    }
    Ok(out)
}

/// Samples every cell of one label. `anchors[c]` is the anchor owning
/// `cells[c]`; each cell draws from its own stream keyed by
/// `(seed, label, anchor)`, so the result does not depend on cell order or
/// thread count.
pub fn sample_virtual<T: Scalar>(
    cells: &[Cell<T>],
    anchors: &[usize],
    counts: &[usize],
    label: usize,
    seed: u64,
) -> Result<VirtualPointSet<T>> {
    if cells.len() != anchors.len() || cells.len() != counts.len() {
        return Err(Error::Shape(format!(
            "{} cells, {} anchors, {} counts",
            cells.len(),
            anchors.len(),
            counts.len()
        )));
    }
    let mut set = VirtualPointSet::default();
    for ((cell, &a), &count) in cells.iter().zip(anchors).zip(counts) {
        let mut rng = rng_for(&[seed, label as u64, a as u64]);
        let pts = sample_cell(cell, count, &mut rng, &format!("{a} (label {label})"))?;
        set.owner_anchor.extend(std::iter::repeat_n(a, pts.len()));
        set.owner_label.extend(std::iter::repeat_n(label, pts.len()));
        set.points.extend(pts);
    }
    Ok(set)
}

/// Scales sub-cluster sizes so they sum to at most `cap`, keeping every
/// non-empty one at ≥ 1: `1 + floor((s − 1)(cap − k) / Σ(s − 1))` with `k`
/// non-empty entries. Sizes already within the cap are returned unchanged.
pub fn scale_counts(sizes: &[usize], cap: usize) -> Result<Vec<usize>> {
    let total: usize = sizes.iter().sum();
    if total <= cap {
        return Ok(sizes.to_vec());
    }
    let nonempty = sizes.iter().filter(|&&s| s > 0).count();
    if nonempty > cap {
        return Err(Error::Param(format!(
            "virtual cap {cap} is below the {nonempty} non-empty sub-clusters"
        )));
    }
    let excess: u128 = sizes.iter().filter(|&&s| s > 0).map(|&s| (s - 1) as u128).sum();
    let room = (cap - nonempty) as u128;
    Ok(sizes
        .iter()
        .map(|&s| {
            if s == 0 {
                0
            } else {
                1 + ((s - 1) as u128 * room / excess) as usize
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::voronoi::clipped_voronoi;

    fn p(x: f64, y: f64) -> Point2<f64> {
        Point2::new(x, y)
    }

    fn square_cells() -> Vec<Cell<f64>> {
        let sq = vec![vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)]];
        clipped_voronoi(&[p(0.25, 0.5), p(0.75, 0.5)], &sq)
    }

    #[test]
    fn exact_counts_inside_cells() {
        let cells = square_cells();
        let v = sample_virtual(&cells, &[4, 9], &[3, 5], 1, 7).unwrap();
        assert_eq!(v.len(), 8);
        assert_eq!(v.owner_anchor.iter().filter(|&&a| a == 4).count(), 3);
        assert_eq!(v.owner_anchor.iter().filter(|&&a| a == 9).count(), 5);
        assert!(v.owner_label.iter().all(|&l| l == 1));
        for (q, &a) in v.points.iter().zip(&v.owner_anchor) {
            let c = if a == 4 { &cells[0] } else { &cells[1] };
            assert!(point_in_region(*q, &c.loops));
        }
        assert_eq!(v, sample_virtual(&cells, &[4, 9], &[3, 5], 1, 7).unwrap());
        assert_ne!(v, sample_virtual(&cells, &[4, 9], &[3, 5], 1, 8).unwrap());
    }

    #[test]
    fn streams_do_not_depend_on_cell_order() {
        let cells = square_cells();
        let a = sample_virtual(&cells, &[4, 9], &[3, 5], 0, 1).unwrap();
        let rev: Vec<Cell<f64>> = cells.iter().rev().cloned().collect();
        let b = sample_virtual(&rev, &[9, 4], &[5, 3], 0, 1).unwrap();
        assert_eq!(a.points[..3], b.points[5..]);
    }

    #[test]
    fn centroid_of_samples() {
        let tri = vec![vec![p(0.0, 0.0), p(3.0, 0.0), p(0.0, 3.0)]];
        let cells = clipped_voronoi(&[p(1.0, 1.0)], &tri);
        let v = sample_virtual(&cells, &[0], &[10_000], 0, 3).unwrap();
        let c = v.points.iter().fold(p(0.0, 0.0), |a, &b| a + b) * (1.0 / 10_000.0);
        // Triangle centroid (1, 1); side length 3.
        assert!((c.x - 1.0).abs() < 0.02 * 3.0 && (c.y - 1.0).abs() < 0.02 * 3.0);
    }

    #[test]
    fn uniform_chi_square() {
        let sq = vec![vec![p(0.0, 0.0), p(4.0, 0.0), p(4.0, 4.0), p(0.0, 4.0)]];
        let cells = clipped_voronoi(&[p(2.0, 2.0)], &sq);
        let v = sample_virtual(&cells, &[0], &[10_000], 0, 11).unwrap();
        let mut bins = [0f64; 16];
        for q in &v.points {
            bins[(q.x.floor() as usize).min(3) * 4 + (q.y.floor() as usize).min(3)] += 1.0;
        }
        let e = 10_000.0 / 16.0;
        let chi2: f64 = bins.iter().map(|&o| (o - e) * (o - e) / e).sum();
        // 15 degrees of freedom, p = 0.01.
        assert!(chi2 < 30.578, "{chi2}");
    }

    #[test]
    fn zero_area_cell_errors() {
        let sq = vec![vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)]];
        let cells = clipped_voronoi(&[p(0.5, 0.5), p(0.5, 0.5)], &sq);
        assert!(sample_virtual(&cells, &[0, 1], &[1, 1], 0, 0).is_err());
        assert!(sample_virtual(&cells, &[0, 1], &[1, 0], 0, 0).is_ok());
    }

    #[test]
    fn sliver_cell_errors() {
        let sliver = Cell {
            site: p(0.0, 0.0),
            convex: vec![],
            loops: vec![vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1e-9), p(0.0, 1.0)]],
            area: 0.0,
        };
        assert!(sample_cell(&sliver, 1, &mut rng_for(&[0]), "x").is_err());
        // Diagonal sliver: positive area, almost nothing of its bounding box.
        let thin = Cell {
            site: p(0.0, 0.0),
            convex: vec![],
            loops: vec![vec![p(0.0, 0.0), p(1.0, 1.0), p(1.0 - 1e-9, 1.0)]],
            area: 5e-10,
        };
        assert!(sample_cell(&thin, 1_000, &mut rng_for(&[0]), "thin").is_err());
    }

    #[test]
    fn count_scaling() {
        assert_eq!(scale_counts(&[3, 5], 100).unwrap(), vec![3, 5]);
        let s = scale_counts(&[1, 100, 1000, 0], 110).unwrap();
        assert!(s.iter().sum::<usize>() <= 110);
        assert_eq!(s[0], 1);
        assert_eq!(s[3], 0);
        assert!(s[2] > s[1]);
        assert!(scale_counts(&[5, 5, 5], 2).is_err());
    }
}
