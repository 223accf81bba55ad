//! Chaikin corner cutting.

use crate::geometry::polygon::Loop;
use crate::scalar::Scalar;

/// Applies `passes` rounds of ¼–¾ corner cutting to every closed loop.
pub fn smooth_outline<T: Scalar>(loops: &[Loop<T>], passes: usize) -> Vec<Loop<T>> {
    loops
        .iter()
        .map(|l| {
            let mut cur = l.clone();
            for _ in 0..passes {
                let n = cur.len();
                if n < 3 {
                    break;
                }
                let mut next = Vec::with_capacity(2 * n);
                for i in 0..n {
                    let (a, b) = (cur[i], cur[(i + 1) % n]);
                    next.push(a.lerp(b, T::of(0.25)));
                    next.push(a.lerp(b, T::of(0.75)));
                }
                cur = next;
            }
            cur
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::polygon::{convex_hull, is_simple, point_in_region};
    use crate::point::Point2;
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> Point2<f64> {
        Point2::new(x, y)
    }

    #[test]
    fn square_to_octagon() {
        let sq = vec![vec![p(0.0, 0.0), p(4.0, 0.0), p(4.0, 4.0), p(0.0, 4.0)]];
        let o = smooth_outline(&sq, 1);
        assert_eq!(
            o[0],
            vec![
                p(1.0, 0.0), p(3.0, 0.0), p(4.0, 1.0), p(4.0, 3.0),
                p(3.0, 4.0), p(1.0, 4.0), p(0.0, 3.0), p(0.0, 1.0),
            ]
        );
        assert_eq!(smooth_outline(&sq, 0), sq);
        assert_eq!(smooth_outline(&sq, 3)[0].len(), 32);
    }

    proptest! {
        #[test]
        fn stays_in_hull_and_simple_for_convex(
            raw in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 3..30),
            passes in 0usize..4,
        ) {
            let pts: Vec<Point2<f64>> = raw.iter().map(|&(x, y)| p(x, y)).collect();
            let hull = convex_hull(&pts);
            prop_assume!(hull.len() >= 3);
            let out = smooth_outline(&[hull.clone()], passes);
            prop_assert_eq!(out[0].len(), hull.len() << passes);
            prop_assert!(is_simple(&out[0]));
            // Hull containment with a small tolerance band.
            let grown: Vec<Point2<f64>> = {
                let c = hull.iter().fold(p(0.0, 0.0), |a, &b| a + b) * (1.0 / hull.len() as f64);
                hull.iter().map(|&v| c + (v - c) * (1.0 + 1e-9)).collect()
            };
            for &q in &out[0] {
                prop_assert!(point_in_region(q, &[grown.clone()]));
            }
        }
    }
}
