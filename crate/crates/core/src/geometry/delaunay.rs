//! Incremental Delaunay triangulation (Bowyer–Watson) over exact predicates.
//!
//! The convex hull is closed off with ghost triangles sharing a vertex at
//! infinity, so points outside the current hull need no super-triangle.

use std::collections::{HashMap, HashSet};

use crate::geometry::polygon::{coord, orient};
use crate::point::Point2;
use crate::scalar::Scalar;

const GHOST: usize = usize::MAX;

/// Triangles as counter-clockwise index triples into the input slice.
/// Exact duplicates are triangulated once, under their first index.
/// Empty when fewer than three distinct points exist or all are collinear.
pub fn delaunay<T: Scalar>(points: &[Point2<T>]) -> Vec<[usize; 3]> {
    let mut seen: HashSet<(u64, u64)> = HashSet::with_capacity(points.len());
    let unique: Vec<usize> = (0..points.len())
        .filter(|&i| {
            let p = points[i].to_f64();
            seen.insert(((p.x + 0.0).to_bits(), (p.y + 0.0).to_bits()))
        })
        .collect();
    if unique.len() < 3 {
        return Vec::new();
    }
    let (a, b) = (unique[0], unique[1]);
    let Some(ci) = (2..unique.len()).find(|&c| orient(points[a], points[b], points[unique[c]]) != 0.0) else {
        return Vec::new();
    };
    let c = unique[ci];
    let first = if orient(points[a], points[b], points[c]) > 0.0 {
        [a, b, c]
    } else {
        [a, c, b]
    };

    let mut tri = Triangulation {
        points,
        tris: Vec::new(),
        alive: Vec::new(),
    };
    tri.push(first);
    for k in 0..3 {
        tri.push([first[(k + 1) % 3], first[k], GHOST]);
    }
    for (n, &p) in unique.iter().enumerate() {
        if n < 2 || n == ci {
            continue;
        }
        tri.insert(p);
    }
    tri.tris
        .iter()
        .zip(&tri.alive)
        .filter(|(t, &live)| live && !t.contains(&GHOST))
        .map(|(t, _)| *t)
        .collect()
}

struct Triangulation<'a, T> {
    points: &'a [Point2<T>],
    tris: Vec<[usize; 3]>,
    alive: Vec<bool>,
}

impl<T: Scalar> Triangulation<'_, T> {
    fn push(&mut self, t: [usize; 3]) {
        self.tris.push(t);
        self.alive.push(true);
    }

    fn conflicts(&self, t: [usize; 3], p: usize) -> bool {
        let pp = self.points[p];
        if let Some(g) = t.iter().position(|&v| v == GHOST) {
            let x = self.points[t[(g + 1) % 3]];
            let y = self.points[t[(g + 2) % 3]];
            let o = orient(x, y, pp);
            if o != 0.0 {
                return o > 0.0;
            }
            // On the hull line: only the open segment belongs to this ghost.
            (pp - x).dot(y - x) > T::zero() && (pp - y).dot(x - y) > T::zero()
        } else {
            let [a, b, c] = t.map(|v| coord(self.points[v]));
            robust::incircle(a, b, c, coord(pp)) > 0.0
        }
    }

    fn insert(&mut self, p: usize) {
        let bad: Vec<usize> = (0..self.tris.len())
            .filter(|&i| self.alive[i] && self.conflicts(self.tris[i], p))
            .collect();
        let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(bad.len() * 3);
        for &i in &bad {
            let t = self.tris[i];
            for k in 0..3 {
                *directed.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
            }
            self.alive[i] = false;
        }
        let mut rim: Vec<(usize, usize)> = directed
            .keys()
            .filter(|&&(u, v)| !directed.contains_key(&(v, u)))
            .copied()
            .collect();
        rim.sort_unstable();
        for (u, v) in rim {
            self.push([u, v, p]);
        }
    }
}

/// Circumradius of a triangle; infinite when degenerate.
pub fn circumradius<T: Scalar>(a: Point2<T>, b: Point2<T>, c: Point2<T>) -> T {
    let area2 = (b - a).cross(c - a).abs();
    if area2 == T::zero() {
        return T::infinity();
    }
    a.dist(b) * b.dist(c) * c.dist(a) / (T::of(2.0) * area2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(x: f64, y: f64) -> Point2<f64> {
        Point2::new(x, y)
    }

    fn check_delaunay(pts: &[Point2<f64>], tris: &[[usize; 3]]) {
        for t in tris {
            assert!(orient(pts[t[0]], pts[t[1]], pts[t[2]]) > 0.0);
            let [a, b, c] = t.map(|v| coord(pts[v]));
            for (i, &q) in pts.iter().enumerate() {
                if t.contains(&i) {
                    continue;
                }
                assert!(robust::incircle(a, b, c, coord(q)) <= 0.0, "point {i} inside {t:?}");
            }
        }
    }

    fn hull_area(pts: &[Point2<f64>]) -> f64 {
        crate::geometry::polygon::signed_area(&crate::geometry::polygon::convex_hull(pts))
    }

    fn tri_area(pts: &[Point2<f64>], tris: &[[usize; 3]]) -> f64 {
        tris.iter()
            .map(|t| 0.5 * (pts[t[1]] - pts[t[0]]).cross(pts[t[2]] - pts[t[0]]))
            .sum()
    }

    #[test]
    fn square_two_triangles() {
        let pts = vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)];
        let t = delaunay(&pts);
        assert_eq!(t.len(), 2);
        assert!((tri_area(&pts, &t) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_and_tiny_inputs_are_empty() {
        assert!(delaunay(&[p(0.0, 0.0), p(1.0, 1.0)]).is_empty());
        assert!(delaunay(&[p(0.0, 0.0), p(1.0, 1.0), p(2.0, 2.0), p(3.0, 3.0)]).is_empty());
        assert!(delaunay(&[p(1.0, 1.0), p(1.0, 1.0), p(1.0, 1.0)]).is_empty());
    }

    #[test]
    fn collinear_prefix_then_offline_point() {
        let pts = vec![p(0.0, 0.0), p(1.0, 0.0), p(2.0, 0.0), p(3.0, 0.0), p(1.5, 1.0), p(1.5, -1.0)];
        let t = delaunay(&pts);
        check_delaunay(&pts, &t);
        assert!((tri_area(&pts, &t) - hull_area(&pts)).abs() < 1e-12);
        assert_eq!(t.len(), 6);
    }

    #[test]
    fn random_and_grid_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for grid in [false, true] {
            let pts: Vec<Point2<f64>> = (0..150)
                .map(|_| {
                    if grid {
                        p(rng.random_range(0..9) as f64, rng.random_range(0..9) as f64)
                    } else {
                        p(rng.random(), rng.random())
                    }
                })
                .collect();
            let t = delaunay(&pts);
            check_delaunay(&pts, &t);
            assert!((tri_area(&pts, &t) - hull_area(&pts)).abs() < 1e-9);
        }
    }

    #[test]
    fn circumradius_of_right_triangle() {
        assert!((circumradius(p(0.0, 0.0), p(2.0, 0.0), p(0.0, 2.0)) - 2f64.sqrt()).abs() < 1e-12);
        assert!(circumradius(p(0.0, 0.0), p(1.0, 0.0), p(2.0, 0.0)).is_infinite());
    }
}
