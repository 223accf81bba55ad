//! Synthetic labeled datasets.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::rng_for;

/// Two 3D classes. "blue" (75% of points) is an hourglass: Gaussian lobes at
/// z = ±4 joined by a sparse cylindrical neck of radius 0.5. "orange" is a
/// small dense Gaussian next to the neck.
pub fn hourglass(n: usize, seed: u64) -> Result<LabeledDataset<f64>> {
    if n < 20 {
        return Err(Error::Param(format!("hourglass needs n >= 20, got {n}")));
    }
    let mut rng = rng_for(&[seed, 0x686f]);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let n_blue = n * 3 / 4;
    let n_neck = n_blue / 10;
    let n_lobe = n_blue - n_neck;
    let mut rows: Vec<[f64; 3]> = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for k in 0..n_lobe {
        let z0 = if k % 2 == 0 { 4.0 } else { -4.0 };
        rows.push([unit.sample(&mut rng), unit.sample(&mut rng), z0 + unit.sample(&mut rng)]);
        labels.push(0);
    }
    for _ in 0..n_neck {
        let r = 0.5 * rng.random::<f64>().sqrt();
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        rows.push([r * a.cos(), r * a.sin(), rng.random_range(-3.0..3.0)]);
        labels.push(0);
    }
    for _ in n_blue..n {
        rows.push([
            1.2 + 0.3 * unit.sample(&mut rng),
            0.3 * unit.sample(&mut rng),
            0.3 * unit.sample(&mut rng),
        ]);
        labels.push(1);
    }
    LabeledDataset::new(Matrix::from_rows(&rows)?, labels, vec!["blue".into(), "orange".into()])
}

/// Centres of the cross: the origin and ±2.5 along each axis.
pub const CROSS_CENTERS: [[f64; 3]; 7] = [
    [0.0, 0.0, 0.0],
    [2.5, 0.0, 0.0],
    [-2.5, 0.0, 0.0],
    [0.0, 2.5, 0.0],
    [0.0, -2.5, 0.0],
    [0.0, 0.0, 2.5],
    [0.0, 0.0, -2.5],
];

/// Seven uniformly filled cubes of side 2 forming a 3D cross. Point counts
/// grow geometrically from arm 0 to arm 6 with a 10× ratio overall.
pub fn cross(n: usize, seed: u64) -> Result<LabeledDataset<f64>> {
    let weights: Vec<f64> = (0..7).map(|k| 10f64.powf(k as f64 / 6.0)).collect();
    let total: f64 = weights.iter().sum();
    let counts: Vec<usize> = weights.iter().map(|w| (n as f64 * w / total).round() as usize).collect();
    if counts[0] < 2 {
        return Err(Error::Param(format!("cross needs more points than {n}")));
    }
    let mut rng = rng_for(&[seed, 0x6372]);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (arm, (&c, ctr)) in counts.iter().zip(&CROSS_CENTERS).enumerate() {
        for _ in 0..c {
            rows.push([
                ctr[0] + rng.random_range(-1.0..1.0),
                ctr[1] + rng.random_range(-1.0..1.0),
                ctr[2] + rng.random_range(-1.0..1.0),
            ]);
            labels.push(arm);
        }
    }
    let names = ["center", "+x", "-x", "+y", "-y", "+z", "-z"].map(String::from).to_vec();
    LabeledDataset::new(Matrix::from_rows(&rows)?, labels, names)
}

/// `m` isotropic Gaussians of standard deviation `sigma` in `dim ≥ m`
/// dimensions, centred at `separation·σ/√2 · e_k`, so every pair of centres
/// is `separation·σ` apart.
pub fn gaussians(
    m: usize,
    dim: usize,
    per_class: usize,
    separation: f64,
    sigma: f64,
    seed: u64,
) -> Result<LabeledDataset<f64>> {
    if m < 2 || dim < m || per_class < 2 || !(sigma > 0.0) {
        return Err(Error::Param(format!(
            "gaussians needs m >= 2, dim >= m, per-class >= 2, sigma > 0 (got {m}, {dim}, {per_class}, {sigma})"
        )));
    }
    let mut rng = rng_for(&[seed, 0x6761]);
    let noise = Normal::new(0.0, sigma).expect("valid normal");
    let offset = separation * sigma / std::f64::consts::SQRT_2;
    let mut data = Vec::with_capacity(m * per_class * dim);
    let mut labels = Vec::with_capacity(m * per_class);
    for c in 0..m {
        for _ in 0..per_class {
            for d in 0..dim {
                let centre = if d == c { offset } else { 0.0 };
                data.push(centre + noise.sample(&mut rng));
            }
            labels.push(c);
        }
    }
    let names = (0..m).map(|c| format!("g{c}")).collect();
    LabeledDataset::new(Matrix::from_vec(m * per_class, dim, data)?, labels, names)
}

/// Gaussian classes with planted label noise: for every pair `(a, b)` with
/// rate `r = rates[pair]`, a fraction `r` of class `a`'s points is drawn from
/// class `b`'s distribution instead (and vice versa). Pairs are enumerated
/// as `(0,1), (0,2), …, (m−2, m−1)`, and `rates` is cycled over them.
pub fn planted_mixture(
    m: usize,
    dim: usize,
    per_class: usize,
    separation: f64,
    rates: &[f64],
    seed: u64,
) -> Result<(LabeledDataset<f64>, Vec<Vec<f64>>)> {
    if m < 2 || dim < m || rates.is_empty() {
        return Err(Error::Param("planted mixture needs m >= 2, dim >= m, rates".into()));
    }
    let mut planted = vec![vec![0.0; m]; m];
    let mut k = 0;
    for a in 0..m {
        for b in a + 1..m {
            planted[a][b] = rates[k % rates.len()];
            planted[b][a] = planted[a][b];
            k += 1;
        }
    }
    for (a, row) in planted.iter().enumerate() {
        let off: f64 = row.iter().sum();
        if off >= 1.0 {
            return Err(Error::Param(format!("class {a}: planted rates sum to {off}")));
        }
    }
    let mut rng = rng_for(&[seed, 0x6d69]);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let offset = separation / std::f64::consts::SQRT_2;
    let mut data = Vec::with_capacity(m * per_class * dim);
    let mut labels = Vec::with_capacity(m * per_class);
    for (a, row) in planted.iter().enumerate() {
        // Deterministic quotas: round(r · per_class) points from each source.
        let mut sources: Vec<usize> = Vec::with_capacity(per_class);
        for (b, &r) in row.iter().enumerate() {
            sources.extend(std::iter::repeat_n(b, (r * per_class as f64).round() as usize));
        }
        sources.resize(per_class, a);
        for src in sources {
            for d in 0..dim {
                let centre = if d == src { offset } else { 0.0 };
                data.push(centre + unit.sample(&mut rng));
            }
            labels.push(a);
        }
    }
    let names = (0..m).map(|c| format!("c{c}")).collect();
    let ds = LabeledDataset::new(Matrix::from_vec(m * per_class, dim, data)?, labels, names)?;
    Ok((ds, planted))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hourglass_sizes() {
        let ds = hourglass(2000, 42).unwrap();
        assert_eq!(ds.num_classes(), 2);
        assert_eq!(ds.class_sizes(), vec![1500, 500]);
        assert_eq!(ds.dim(), 3);
        assert_eq!(ds.points(), hourglass(2000, 42).unwrap().points());
    }

    #[test]
    fn cross_has_seven_arms_with_10x_density_range() {
        let ds = cross(3000, 1).unwrap();
        assert_eq!(ds.num_classes(), 7);
        let s = ds.class_sizes();
        let ratio = *s.iter().max().unwrap() as f64 / *s.iter().min().unwrap() as f64;
        assert!((ratio - 10.0).abs() < 0.5, "{ratio}");
        for (i, row) in ds.points().iter_rows().enumerate() {
            let c = CROSS_CENTERS[ds.labels()[i]];
            assert!((0..3).all(|d| (row[d] - c[d]).abs() <= 1.0));
        }
    }

    #[test]
    fn gaussian_centres_are_equidistant() {
        let ds = gaussians(4, 6, 400, 10.0, 1.0, 3).unwrap();
        let mut means = vec![vec![0.0; 6]; 4];
        for (i, row) in ds.points().iter_rows().enumerate() {
            for d in 0..6 {
                means[ds.labels()[i]][d] += row[d] / 400.0;
            }
        }
        for a in 0..4 {
            for b in a + 1..4 {
                let dist: f64 = (0..6).map(|d| (means[a][d] - means[b][d]).powi(2)).sum::<f64>().sqrt();
                assert!((dist - 10.0).abs() < 0.3, "{dist}");
            }
        }
    }

    #[test]
    fn planted_rates_are_symmetric() {
        let (ds, r) = planted_mixture(5, 5, 200, 12.0, &[0.0, 0.05, 0.1, 0.2], 0).unwrap();
        assert_eq!(ds.class_sizes(), vec![200; 5]);
        for a in 0..5 {
            assert_eq!(r[a][a], 0.0);
            for b in 0..5 {
                assert_eq!(r[a][b], r[b][a]);
            }
        }
        assert!(r.iter().flatten().any(|&x| x == 0.2));
    }
}
