//! Voronoi cells of planar sites, clipped to a region.

use crate::geometry::polygon::{bbox, clip_halfplane, signed_area, Loop};
use crate::point::Point2;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Cell<T> {
    pub site: Point2<T>,
    /// Unclipped Voronoi polygon (convex, counter-clockwise), bounded by a
    /// box around the region.
    pub convex: Loop<T>,
    /// `convex` intersected with the region.
    pub loops: Vec<Loop<T>>,
    pub area: T,
}

/// One cell per site. Where two sites coincide, the later one gets an empty
/// cell.
pub fn clipped_voronoi<T: Scalar>(sites: &[Point2<T>], region: &[Loop<T>]) -> Vec<Cell<T>> {
    let Some((lo, hi)) = bbox(sites.iter().copied().chain(region.iter().flatten().copied())) else {
        return Vec::new();
    };
    let pad = (hi.x - lo.x).max(hi.y - lo.y) + T::one();
    let (lo, hi) = (lo - Point2::new(pad, pad), hi + Point2::new(pad, pad));
    let frame = vec![lo, Point2::new(hi.x, lo.y), hi, Point2::new(lo.x, hi.y)];

    sites
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let mut convex = frame.clone();
            // Bisectors that cut the cell when applied. Clipping the region by
            // these instead of by the cell's edges avoids tiny, badly
            // oriented edges left by near-coincident cell vertices.
            let mut planes: Vec<(Point2<T>, T)> = Vec::new();
            for (j, &o) in sites.iter().enumerate() {
                if j == i || convex.is_empty() {
                    continue;
                }
                if o == s {
                    if j < i {
                        convex.clear();
                    }
                    continue;
                }
                let normal = o - s;
                let offset = normal.dot((s + o) * T::of(0.5));
                if convex.iter().any(|&v| normal.dot(v) > offset) {
                    planes.push((normal, offset));
                    convex = clip_halfplane(&convex, normal, offset);
                }
            }
            let loops: Vec<Loop<T>> = if convex.len() < 3 {
                Vec::new()
            } else {
                region
                    .iter()
                    .map(|l| {
                        planes
                            .iter()
                            .fold(l.clone(), |acc, &(n, c)| clip_halfplane(&acc, n, c))
                    })
                    .filter(|l| l.len() >= 3 && signed_area(l) != T::zero())
                    .collect()
            };
            let area = loops.iter().map(|l| signed_area(l)).sum();
            Cell {
                site: s,
                convex,
                loops,
                area,
            }
        })
        .collect()
}
