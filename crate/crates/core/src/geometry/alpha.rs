//! Alpha shapes as unions of Delaunay triangles with bounded circumradius.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::geometry::delaunay::{circumradius, delaunay};
use crate::geometry::polygon::{convex_hull, Loop};
use crate::point::Point2;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaRadius<T> {
    /// Smallest radius at which kept triangles sharing edges form one
    /// region touching every point. Stray triangles outside it are dropped.
    Auto,
    Fixed(T),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaShape<T> {
    /// Outer loops counter-clockwise, holes clockwise.
    pub loops: Vec<Loop<T>>,
    pub radius: T,
    /// Kept triangles, counter-clockwise.
    pub triangles: Vec<[usize; 3]>,
}

/// Alpha shape of `points`. Fails on fewer than three distinct points, on
/// collinear input, and when a fixed radius keeps no triangle.
pub fn alpha_shape<T: Scalar>(points: &[Point2<T>], radius: AlphaRadius<T>) -> Result<AlphaShape<T>> {
    let tris = delaunay(points);
    if tris.is_empty() {
        return Err(Error::Geometry(
            "alpha shape needs three non-collinear points".into(),
        ));
    }
    alpha_from_triangulation(points, &tris, radius)
}

pub(crate) fn alpha_from_triangulation<T: Scalar>(
    points: &[Point2<T>],
    tris: &[[usize; 3]],
    radius: AlphaRadius<T>,
) -> Result<AlphaShape<T>> {
    let radii: Vec<T> = tris
        .iter()
        .map(|t| circumradius(points[t[0]], points[t[1]], points[t[2]]))
        .collect();
    let (r, kept) = match radius {
        AlphaRadius::Fixed(r) => {
            let kept: Vec<[usize; 3]> = tris
                .iter()
                .zip(&radii)
                .filter(|(_, &cr)| cr <= r)
                .map(|(t, _)| *t)
                .collect();
            (r, kept)
        }
        AlphaRadius::Auto => {
            let (r, ids) = auto_radius(tris, &radii);
            (r, ids.into_iter().map(|k| tris[k]).collect())
        }
    };
    if kept.is_empty() {
        return Err(Error::Geometry(format!(
            "alpha radius {r} keeps no triangle (empty shape)"
        )));
    }
    Ok(AlphaShape {
        loops: stitch(points, &kept),
        radius: r,
        triangles: kept,
    })
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Pairs of triangles sharing an edge.
fn edge_neighbours(tris: &[[usize; 3]]) -> Vec<(usize, usize)> {
    let mut by_edge: HashMap<(usize, usize), usize> = HashMap::new();
    let mut pairs = Vec::new();
    for (k, t) in tris.iter().enumerate() {
        for e in 0..3 {
            let (a, b) = (t[e], t[(e + 1) % 3]);
            match by_edge.entry((a.min(b), a.max(b))) {
                Entry::Occupied(o) => pairs.push((*o.get(), k)),
                Entry::Vacant(v) => {
                    v.insert(k);
                }
            }
        }
    }
    pairs
}

/// Kept triangles (circumradius ≤ `r`) of the lowest edge-connected
/// component that touches all `vertices`, if any.
fn covering_component<T: Scalar>(
    tris: &[[usize; 3]],
    radii: &[T],
    pairs: &[(usize, usize)],
    r: T,
    vertices: usize,
) -> Option<Vec<usize>> {
    let keep = |k: usize| radii[k] <= r;
    let mut uf = UnionFind((0..tris.len()).collect());
    for &(a, b) in pairs {
        if keep(a) && keep(b) {
            uf.union(a, b);
        }
    }
    let mut touched: BTreeMap<usize, HashSet<usize>> = BTreeMap::new();
    for k in (0..tris.len()).filter(|&k| keep(k)) {
        touched.entry(uf.find(k)).or_default().extend(tris[k]);
    }
    let root = touched.iter().find(|(_, vs)| vs.len() == vertices).map(|(&r, _)| r)?;
    Some((0..tris.len()).filter(|&k| keep(k) && uf.find(k) == root).collect())
}

/// Smallest radius at which one edge-connected group of kept triangles
/// touches every vertex, with that group. Adding triangles never splits a
/// group, so the predicate is monotone and binary search applies. Groups
/// joined only through a vertex do not count: their union would be a pinched
/// region that falls apart once smoothed.
fn auto_radius<T: Scalar>(tris: &[[usize; 3]], radii: &[T]) -> (T, Vec<usize>) {
    let mut sorted: Vec<T> = radii.iter().copied().filter(|r| r.is_finite()).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    sorted.dedup();
    let vertices = tris.iter().flatten().copied().collect::<HashSet<usize>>().len();
    let pairs = edge_neighbours(tris);
    // The whole triangulation is edge-connected, so the last radius passes.
    let (mut lo, mut hi) = (0, sorted.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if covering_component(tris, radii, &pairs, sorted[mid], vertices).is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let ids = covering_component(tris, radii, &pairs, sorted[lo], vertices)
        .expect("full triangulation is edge-connected");
    (sorted[lo], ids)
}

/// Turns the directed boundary edges of the kept triangles into closed loops.
/// At pinch vertices the walk takes the sharpest left turn, which keeps each
/// loop inside one face.
fn stitch<T: Scalar>(points: &[Point2<T>], kept: &[[usize; 3]]) -> Vec<Loop<T>> {
    let directed: HashSet<(usize, usize)> = kept
        .iter()
        .flat_map(|t| (0..3).map(move |k| (t[k], t[(k + 1) % 3])))
        .collect();
    let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut boundary: Vec<(usize, usize)> = directed
        .iter()
        .filter(|&&(u, v)| !directed.contains(&(v, u)))
        .copied()
        .collect();
    boundary.sort_unstable();
    for &(u, v) in &boundary {
        out.entry(u).or_default().push(v);
    }
    let mut used: HashSet<(usize, usize)> = HashSet::new();
    let mut loops = Vec::new();
    for &start in &boundary {
        if used.contains(&start) {
            continue;
        }
        used.insert(start);
        let mut ids = vec![start.0];
        let (mut u, mut v) = start;
        loop {
            let din = points[v] - points[u];
            let mut best: Option<(T, usize)> = None;
            for &w in &out[&v] {
                let cand = (v, w);
                if used.contains(&cand) && cand != start {
                    continue;
                }
                let dout = points[w] - points[v];
                let turn = din.cross(dout).atan2(din.dot(dout));
                if best.is_none_or(|(b, _)| turn > b) {
                    best = Some((turn, w));
                }
            }
            let w = best.expect("boundary edges are balanced").1;
            if (v, w) == start {
                break;
            }
            used.insert((v, w));
            ids.push(v);
            (u, v) = (v, w);
        }
        loops.push(ids.into_iter().map(|i| points[i]).collect());
    }
    loops
}

/// Hull of disks of radius `r` around every point, each disk approximated by
/// `segments` vertices.
pub fn capsule<T: Scalar>(points: &[Point2<T>], r: T, segments: usize) -> Loop<T> {
    let ring: Vec<Point2<T>> = (0..segments)
        .map(|k| {
            let a = T::TAU() * T::of_usize(k) / T::of_usize(segments);
            Point2::new(a.cos() * r, a.sin() * r)
        })
        .collect();
    let all: Vec<Point2<T>> = points
        .iter()
        .flat_map(|&p| ring.iter().map(move |&o| p + o))
        .collect();
    convex_hull(&all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::polygon::{region_area, signed_area};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(x: f64, y: f64) -> Point2<f64> {
        Point2::new(x, y)
    }

    fn sorted(mut v: Vec<Point2<f64>>) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = v.drain(..).map(|q| (q.x, q.y)).collect();
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out
    }

    #[test]
    fn unit_square() {
        let pts = vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)];
        let s = alpha_shape(&pts, AlphaRadius::Fixed(10.0)).unwrap();
        assert_eq!(s.loops.len(), 1);
        assert_eq!(sorted(s.loops[0].clone()), sorted(pts.clone()));
        assert_eq!(signed_area(&s.loops[0]), 1.0);
        assert!(alpha_shape(&pts, AlphaRadius::Fixed(0.1)).is_err());
    }

    #[test]
    fn large_radius_is_hull() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let pts: Vec<Point2<f64>> = (0..40).map(|_| p(rng.random(), rng.random())).collect();
            let s = alpha_shape(&pts, AlphaRadius::Fixed(1e9)).unwrap();
            assert_eq!(s.loops.len(), 1);
            assert_eq!(sorted(s.loops[0].clone()), sorted(convex_hull(&pts)));
        }
    }

    /// Independent oracle: linear scan over the sorted radii for the first
    /// one where a flood fill across shared edges, started from some kept
    /// triangle, reaches every vertex.
    fn oracle_radius(pts: &[Point2<f64>]) -> f64 {
        let tris = delaunay(pts);
        let cr: Vec<f64> = tris
            .iter()
            .map(|t| circumradius(pts[t[0]], pts[t[1]], pts[t[2]]))
            .collect();
        let mut radii = cr.clone();
        radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let shares_edge = |a: &[usize; 3], b: &[usize; 3]| a.iter().filter(|v| b.contains(v)).count() == 2;
        for &r in &radii {
            let keep: Vec<usize> = (0..tris.len()).filter(|&k| cr[k] <= r).collect();
            for &seed in &keep {
                let mut seen = vec![false; tris.len()];
                let mut stack = vec![seed];
                seen[seed] = true;
                let mut covered = vec![false; pts.len()];
                while let Some(t) = stack.pop() {
                    for &v in &tris[t] {
                        covered[v] = true;
                    }
                    for &u in &keep {
                        if !seen[u] && shares_edge(&tris[t], &tris[u]) {
                            seen[u] = true;
                            stack.push(u);
                        }
                    }
                }
                if covered.iter().all(|&c| c) {
                    return r;
                }
            }
        }
        unreachable!()
    }

    #[test]
    fn auto_matches_oracle_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..15 {
            let n = rng.random_range(5..60);
            let pts: Vec<Point2<f64>> = (0..n).map(|_| p(rng.random(), rng.random())).collect();
            let s = alpha_shape(&pts, AlphaRadius::Auto).unwrap();
            assert_eq!(s.radius, oracle_radius(&pts));
        }
    }

    #[test]
    fn auto_ignores_vertex_only_links() {
        // Two fans joined at the origin: at the small radius they touch only
        // through that vertex, so auto must grow until an edge links them.
        let pts = vec![
            p(0.0, 0.0), p(-2.0, -0.5), p(-2.0, 0.5), p(2.0, -0.5), p(2.0, 0.5),
        ];
        let s = alpha_shape(&pts, AlphaRadius::Auto).unwrap();
        assert_eq!(s.loops.len(), 1);
        assert!(s.radius > circumradius(pts[0], pts[1], pts[2]));
    }

    #[test]
    fn auto_connects_two_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pts: Vec<Point2<f64>> = (0..30).map(|_| p(rng.random(), rng.random())).collect();
        pts.extend((0..30).map(|_| p(20.0 + rng.random::<f64>(), rng.random())));
        let s = alpha_shape(&pts, AlphaRadius::Auto).unwrap();
        assert_eq!(s.radius, oracle_radius(&pts));
        let mut covered = vec![false; pts.len()];
        for t in &s.triangles {
            for &v in t {
                covered[v] = true;
            }
        }
        assert!(covered.iter().all(|&c| c));
        assert!(region_area(&s.loops) > 0.0);
    }

    #[test]
    fn pinch_vertex_gives_two_loops() {
        // Two triangles sharing only the origin.
        let pts = vec![p(0.0, 0.0), p(-2.0, -0.5), p(-2.0, 0.5), p(2.0, -0.5), p(2.0, 0.5)];
        let kept = vec![[0, 2, 1], [0, 3, 4]];
        let loops = stitch(&pts, &kept);
        assert_eq!(loops.len(), 2);
        for l in &loops {
            assert_eq!(l.len(), 3);
            assert!(signed_area(l) > 0.0);
        }
    }

    #[test]
    fn hole_runs_clockwise() {
        // Ring of 8 triangles around an empty square.
        let pts = vec![
            p(0.0, 0.0), p(3.0, 0.0), p(3.0, 3.0), p(0.0, 3.0),
            p(1.0, 1.0), p(2.0, 1.0), p(2.0, 2.0), p(1.0, 2.0),
        ];
        let kept = vec![
            [0, 1, 5], [0, 5, 4], [1, 2, 6], [1, 6, 5],
            [2, 3, 7], [2, 7, 6], [3, 0, 4], [3, 4, 7],
        ];
        let loops = stitch(&pts, &kept);
        assert_eq!(loops.len(), 2);
        assert!((region_area(&loops) - 8.0).abs() < 1e-12);
        assert!(loops.iter().any(|l| signed_area(l) < 0.0));
    }

    #[test]
    fn capsule_surrounds_points() {
        let c = capsule(&[p(0.0, 0.0), p(10.0, 0.0)], 2.0, 32);
        let area = signed_area(&c);
        let ideal = 40.0 + std::f64::consts::PI * 4.0;
        assert!(area > 0.97 * ideal && area <= ideal);
    }
}
