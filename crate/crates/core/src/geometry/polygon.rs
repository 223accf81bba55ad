//! Polygon primitives. A region is a list of closed loops (last vertex not
//! repeated); outer loops run counter-clockwise and holes clockwise, and
//! membership follows the even-odd rule.

use robust::Coord;

use crate::point::Point2;
use crate::scalar::Scalar;

pub type Loop<T> = Vec<Point2<T>>;

#[inline]
pub(crate) fn coord<T: Scalar>(p: Point2<T>) -> Coord<f64> {
    Coord {
        x: p.x.as_f64(),
        y: p.y.as_f64(),
    }
}

/// Exact orientation sign: positive when `a, b, c` turn counter-clockwise.
#[inline]
pub fn orient<T: Scalar>(a: Point2<T>, b: Point2<T>, c: Point2<T>) -> f64 {
    robust::orient2d(coord(a), coord(b), coord(c))
}

/// Shoelace area, positive for counter-clockwise loops.
pub fn signed_area<T: Scalar>(poly: &[Point2<T>]) -> T {
    let n = poly.len();
    if n < 3 {
        return T::zero();
    }
    let mut acc = T::zero();
    for i in 0..n {
        acc += poly[i].cross(poly[(i + 1) % n]);
    }
    acc * T::of(0.5)
}

/// Signed areas summed over all loops.
pub fn region_area<T: Scalar>(loops: &[Loop<T>]) -> T {
    loops.iter().map(|l| signed_area(l)).sum()
}

/// Even-odd membership over all loops.
pub fn point_in_region<T: Scalar>(p: Point2<T>, loops: &[Loop<T>]) -> bool {
    let mut inside = false;
    for poly in loops {
        let n = poly.len();
        let mut j = n.wrapping_sub(1);
        for i in 0..n {
            let (a, b) = (poly[i], poly[j]);
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
            j = i;
        }
    }
    inside
}

pub fn bbox<T: Scalar>(pts: impl IntoIterator<Item = Point2<T>>) -> Option<(Point2<T>, Point2<T>)> {
    let mut it = pts.into_iter();
    let first = it.next()?;
    Some(it.fold((first, first), |(lo, hi), p| {
        (
            Point2::new(lo.x.min(p.x), lo.y.min(p.y)),
            Point2::new(hi.x.max(p.x), hi.y.max(p.y)),
        )
    }))
}

/// Andrew's monotone chain; counter-clockwise, collinear points dropped.
pub fn convex_hull<T: Scalar>(points: &[Point2<T>]) -> Loop<T> {
    let mut pts: Vec<Point2<T>> = points.to_vec();
    pts.sort_by(|a, b| {
        a.x.partial_cmp(&b.x)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.y.partial_cmp(&b.y).unwrap_or(std::cmp::Ordering::Equal))
    });
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point2<T>> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point2<T>>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && orient(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Keeps the part of `poly` where `normal · p <= offset` (Sutherland–Hodgman
/// for one half-plane). Works for non-convex input; the result may contain
/// zero-width bridges along the clip line, which do not change its area.
pub fn clip_halfplane<T: Scalar>(poly: &[Point2<T>], normal: Point2<T>, offset: T) -> Loop<T> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 2);
    if n == 0 {
        return out;
    }
    let side = |p: Point2<T>| normal.dot(p) - offset;
    let mut prev = poly[n - 1];
    let mut sp = side(prev);
    for &cur in poly {
        let sc = side(cur);
        let (pin, cin) = (sp <= T::zero(), sc <= T::zero());
        if pin != cin {
            let t = sp / (sp - sc);
            out.push(prev.lerp(cur, t));
        }
        if cin {
            out.push(cur);
        }
        prev = cur;
        sp = sc;
    }
    out
}

/// Clips `poly` by every edge of the counter-clockwise convex polygon `clip`.
pub fn clip_by_convex<T: Scalar>(poly: &[Point2<T>], clip: &[Point2<T>]) -> Loop<T> {
    let mut cur = poly.to_vec();
    let m = clip.len();
    for i in 0..m {
        if cur.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % m]);
        let e = b - a;
        // Interior is on the left of a→b; outward normal is (e.y, -e.x).
        let normal = Point2::new(e.y, -e.x);
        cur = clip_halfplane(&cur, normal, normal.dot(a));
    }
    cur
}

fn on_segment<T: Scalar>(a: Point2<T>, b: Point2<T>, p: Point2<T>) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test with exact orientation predicates.
pub fn segments_intersect<T: Scalar>(p1: Point2<T>, p2: Point2<T>, q1: Point2<T>, q2: Point2<T>) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

fn edges<T: Scalar>(loops: &[Loop<T>]) -> impl Iterator<Item = (Point2<T>, Point2<T>)> + '_ {
    loops
        .iter()
        .flat_map(|l| (0..l.len()).map(move |i| (l[i], l[(i + 1) % l.len()])))
}

/// Whether two regions share any point (touching counts). `false` proves the
/// intersection area is exactly zero.
pub fn regions_intersect<T: Scalar>(a: &[Loop<T>], b: &[Loop<T>]) -> bool {
    let (Some(ba), Some(bb)) = (
        bbox(a.iter().flatten().copied()),
        bbox(b.iter().flatten().copied()),
    ) else {
        return false;
    };
    if ba.1.x < bb.0.x || bb.1.x < ba.0.x || ba.1.y < bb.0.y || bb.1.y < ba.0.y {
        return false;
    }
    for (p1, p2) in edges(a) {
        for (q1, q2) in edges(b) {
            if segments_intersect(p1, p2, q1, q2) {
                return true;
            }
        }
    }
    // No boundary contact: either nested or disjoint.
    a.iter().flatten().any(|&p| point_in_region(p, b))
        || b.iter().flatten().any(|&p| point_in_region(p, a))
}

/// Whether the loop has two non-adjacent edges that touch.
pub fn is_simple<T: Scalar>(poly: &[Point2<T>]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a1, a2) = (poly[i], poly[(i + 1) % n]);
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (b1, b2) = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(a1, a2, b1, b2) {
                return false;
            }
        }
    }
    true
}

/// Closest point to `p` on the loops' edges.
pub fn nearest_on_boundary<T: Scalar>(p: Point2<T>, loops: &[Loop<T>]) -> Option<Point2<T>> {
    let mut best: Option<(T, Point2<T>)> = None;
    for (a, b) in edges(loops) {
        let e = b - a;
        let len2 = e.norm2();
        let t = if len2 > T::zero() {
            ((p - a).dot(e) / len2).max(T::zero()).min(T::one())
        } else {
            T::zero()
        };
        let q = a + e * t;
        let d = q.dist2(p);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, q));
        }
    }
    best.map(|(_, q)| q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point2<f64> {
        Point2::new(x, y)
    }

    fn square() -> Loop<f64> {
        vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)]
    }

    #[test]
    fn area_and_orientation() {
        assert_eq!(signed_area(&square()), 1.0);
        let mut cw = square();
        cw.reverse();
        assert_eq!(signed_area(&cw), -1.0);
        let with_hole = vec![
            vec![p(0.0, 0.0), p(4.0, 0.0), p(4.0, 4.0), p(0.0, 4.0)],
            vec![p(1.0, 1.0), p(1.0, 2.0), p(2.0, 2.0), p(2.0, 1.0)],
        ];
        assert_eq!(region_area(&with_hole), 15.0);
        assert!(!point_in_region(p(1.5, 1.5), &with_hole));
        assert!(point_in_region(p(3.0, 3.0), &with_hole));
    }

    #[test]
    fn hull_drops_interior_and_collinear() {
        let pts = vec![p(0.0, 0.0), p(2.0, 0.0), p(1.0, 0.0), p(2.0, 2.0), p(0.0, 2.0), p(1.0, 1.0)];
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
        assert!(signed_area(&h) > 0.0);
    }

    #[test]
    fn halfplane_clip_of_nonconvex() {
        // U shape; clipping at y <= 1 leaves the base bar of area 3.
        let u = vec![
            p(0.0, 0.0), p(3.0, 0.0), p(3.0, 3.0), p(2.0, 3.0),
            p(2.0, 1.0), p(1.0, 1.0), p(1.0, 3.0), p(0.0, 3.0),
        ];
        let c = clip_halfplane(&u, p(0.0, 1.0), 1.0);
        assert!((signed_area(&c) - 3.0).abs() < 1e-12);
        let c = clip_halfplane(&u, p(0.0, 1.0), 2.0);
        assert!((signed_area(&c) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn intersect_tests() {
        let a = vec![square()];
        let b = vec![square().into_iter().map(|q| q + p(0.5, 0.5)).collect::<Vec<_>>()];
        let c = vec![square().into_iter().map(|q| q + p(3.0, 0.0)).collect::<Vec<_>>()];
        let inner = vec![vec![p(0.25, 0.25), p(0.75, 0.25), p(0.5, 0.75)]];
        assert!(regions_intersect(&a, &b));
        assert!(!regions_intersect(&a, &c));
        assert!(regions_intersect(&a, &inner));
        assert!(is_simple(&square()));
        let bow = vec![p(0.0, 0.0), p(1.0, 1.0), p(1.0, 0.0), p(0.0, 1.0)];
        assert!(!is_simple(&bow));
    }

    #[test]
    fn nearest_boundary_point() {
        let q = nearest_on_boundary(p(2.0, 0.5), &[square()]).unwrap();
        assert_eq!(q, p(1.0, 0.5));
    }
}
