//! Local outlier factor over planar points.

use crate::error::{Error, Result};
use crate::point::Point2;
use crate::scalar::Scalar;

/// Floor on mean reachability distance, so duplicate points get a large but
/// finite density.
pub const LOF_EPS: f64 = 1e-10;

/// LOF scores with the usual k-distance neighbourhoods: every point at or
/// within the k-distance is a neighbour, so ties can make a neighbourhood
/// larger than `k`.
pub fn lof<T: Scalar>(points: &[Point2<T>], k: usize) -> Result<Vec<T>> {
    let n = points.len();
    if k == 0 || n <= k {
        return Err(Error::Param(format!("LOF needs more than k={k} points, got {n}")));
    }
    let mut kdist = vec![T::zero(); n];
    let mut hoods: Vec<Vec<(usize, T)>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut d: Vec<(usize, T)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (j, points[i].dist(points[j])))
            .collect();
        d.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
        let kd = d[k - 1].1;
        let cut = d.partition_point(|&(_, x)| x <= kd);
        d.truncate(cut);
        kdist[i] = kd;
        hoods.push(d);
    }
    let eps = T::of(LOF_EPS);
    let lrd: Vec<T> = hoods
        .iter()
        .map(|h| {
            let reach: T = h.iter().map(|&(o, d)| kdist[o].max(d)).sum();
            T::one() / (reach / T::of_usize(h.len())).max(eps)
        })
        .collect();
    Ok(hoods
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let s: T = h.iter().map(|&(o, _)| lrd[o] / lrd[i]).sum();
            s / T::of_usize(h.len())
        })
        .collect())
}
