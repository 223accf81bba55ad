//! Power iteration with deflation for the leading eigenpairs of a symmetric
//! positive semi-definite operator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair<T> {
    pub value: T,
    pub vector: Vec<T>,
    pub converged: bool,
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn normalize<T: Scalar>(v: &mut [T]) -> T {
    let n = dot(v, v).sqrt();
    if n > T::zero() {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

fn orthogonalize<T: Scalar>(v: &mut [T], basis: &[EigenPair<T>]) {
    for p in basis {
        let c = dot(v, &p.vector);
        for (x, &b) in v.iter_mut().zip(&p.vector) {
            *x -= c * b;
        }
    }
}

/// Flips `v` so its largest-magnitude entry is positive.
pub fn fix_sign<T: Scalar>(v: &mut [T]) {
    let mut best = T::zero();
    for &x in v.iter() {
        if x.abs() > best.abs() {
            best = x;
        }
    }
    if best < T::zero() {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Leading `k` eigenpairs of the symmetric PSD operator `apply` on `R^dim`,
/// in descending eigenvalue order. Each pair is found by power iteration on
/// the operator deflated by the pairs already found.
pub fn top_eigenpairs<T: Scalar>(
    dim: usize,
    k: usize,
    apply: impl Fn(&[T]) -> Vec<T>,
) -> Vec<EigenPair<T>> {
    let tol = T::of(POWER_TOL);
    let mut rng = ChaCha8Rng::seed_from_u64(0x00c1_5eed);
    let mut found: Vec<EigenPair<T>> = Vec::with_capacity(k);
    for _ in 0..k.min(dim) {
        let deflated = |v: &[T]| {
            let mut w = apply(v);
            for p in &found {
                let c = p.value * dot(&p.vector, v);
                for (x, &b) in w.iter_mut().zip(&p.vector) {
                    *x -= c * b;
                }
            }
            w
        };
        let mut v: Vec<T> = (0..dim).map(|_| T::of(rng.random::<f64>() - 0.5)).collect();
        orthogonalize(&mut v, &found);
        normalize(&mut v);
        let mut converged = false;
        for _ in 0..POWER_MAX_ITER {
            let mut w = deflated(&v);
            orthogonalize(&mut w, &found);
            if normalize(&mut w) == T::zero() {
                converged = true;
                break;
            }
            let delta = w
                .iter()
                .zip(&v)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<T>()
                .sqrt();
            v = w;
            if delta < tol {
                converged = true;
                break;
            }
        }
        let value = dot(&v, &deflated(&v)).max(T::zero());
        fix_sign(&mut v);
        found.push(EigenPair {
            value,
            vector: v,
            converged,
        });
    }
    found
}
