//! Initial 2D placement of anchors and the canonical `[0, 100]²` frame.
//!
//! Built-in backends are PCA and classical MDS, both via power iteration.
//! Any other reduction (UMAP with `min_dist = 1` reproduces the original
//! figures best) can be run externally on the anchor dump and imported as an
//! `id,x,y` file.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::linalg::top_eigenpairs;
use crate::matrix::Matrix;
use crate::point::Point2;
use crate::scalar::{dist2, Scalar};

/// Side length of the canonical frame.
pub const CANONICAL_SIZE: f64 = 100.0;

/// Below this fraction of the leading eigenvalue the second axis is treated
/// as absent.
const RANK_TOL: f64 = 1e-10;

/// Uncanonicalized 2D coordinates from a backend.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEmbedding<T> {
    pub coords: Vec<Point2<T>>,
    /// Leading two eigenvalues (zero for imported coordinates).
    pub eigenvalues: [T; 2],
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EmbedSpec {
    Pca,
    Mds,
    External(PathBuf),
}

fn center_rows<T: Scalar>(m: &Matrix<T>) -> Matrix<T> {
    let (n, d) = (m.rows(), m.cols());
    let nf = T::of_usize(n);
    let means: Vec<T> = (0..d)
        .map(|j| (0..n).map(|i| m.get(i, j)).sum::<T>() / nf)
        .collect();
    let mut out = m.clone();
    for i in 0..n {
        for (x, &mu) in out.row_mut(i).iter_mut().zip(&means) {
            *x -= mu;
        }
    }
    out
}

fn rank_warning<T: Scalar>(values: &mut [T; 2], columns: &mut [Vec<T>; 2]) -> Option<String> {
    if values[1] <= T::of(RANK_TOL) * values[0] {
        for c in columns[1].iter_mut() {
            *c = T::zero();
        }
        values[1] = T::zero();
        Some("anchors span fewer than two dimensions; second axis set to zero".into())
    } else {
        None
    }
}

fn check_count(n: usize) -> Result<()> {
    if n < 3 {
        Err(Error::Data(format!("need at least 3 anchors to embed, got {n}")))
    } else {
        Ok(())
    }
}

/// Projection onto the two leading principal axes of the anchor covariance.
/// The covariance is applied implicitly, so `D` may be large.
pub fn pca_2d<T: Scalar>(anchors: &Matrix<T>) -> Result<RawEmbedding<T>> {
    let n = anchors.rows();
    check_count(n)?;
    let x = center_rows(anchors);
    let denom = T::of_usize(n - 1);
    let pairs = top_eigenpairs(x.cols(), 2, |v: &[T]| {
        let xv: Vec<T> = x.iter_rows().map(|r| dot(r, v)).collect();
        let mut out = vec![T::zero(); x.cols()];
        for (r, &s) in x.iter_rows().zip(&xv) {
            for (o, &a) in out.iter_mut().zip(r) {
                *o += a * s;
            }
        }
        out.iter_mut().for_each(|o| *o /= denom);
        out
    });
    let mut values = [pairs[0].value, pairs.get(1).map_or(T::zero(), |p| p.value)];
    let mut cols: [Vec<T>; 2] = [0, 1].map(|k| {
        pairs.get(k).map_or(vec![T::zero(); n], |p| {
            x.iter_rows().map(|r| dot(r, &p.vector)).collect()
        })
    });
    let warning = rank_warning(&mut values, &mut cols);
    Ok(RawEmbedding {
        coords: (0..n).map(|i| Point2::new(cols[0][i], cols[1][i])).collect(),
        eigenvalues: values,
        warning,
    })
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Double-centered Gram matrix `-½ J D² J` of the anchors.
pub fn centered_gram<T: Scalar>(anchors: &Matrix<T>) -> Matrix<T> {
    let n = anchors.rows();
    let mut d2 = Matrix::filled(n, n, T::zero());
    for i in 0..n {
        for j in i + 1..n {
            let v = dist2(anchors.row(i), anchors.row(j));
            d2.set(i, j, v);
            d2.set(j, i, v);
        }
    }
    let nf = T::of_usize(n);
    let row_mean: Vec<T> = d2.iter_rows().map(|r| r.iter().copied().sum::<T>() / nf).collect();
    let grand = row_mean.iter().copied().sum::<T>() / nf;
    let half = T::of(0.5);
    let mut b = Matrix::filled(n, n, T::zero());
    for i in 0..n {
        for j in 0..n {
            b.set(i, j, -half * (d2.get(i, j) - row_mean[i] - row_mean[j] + grand));
        }
    }
    b
}

/// Classical (Torgerson) MDS: leading eigenvectors of the double-centered
/// squared-distance matrix scaled by the root of their eigenvalues.
pub fn mds_2d<T: Scalar>(anchors: &Matrix<T>) -> Result<RawEmbedding<T>> {
    let n = anchors.rows();
    check_count(n)?;
    let b = centered_gram(anchors);
    let pairs = top_eigenpairs(n, 2, |v: &[T]| b.iter_rows().map(|r| dot(r, v)).collect());
    // Euclidean input makes the Gram matrix PSD; the power iteration clamps
    // Rayleigh quotients at zero.
    assert!(pairs.iter().all(|p| p.value >= T::zero()));
    let mut values = [pairs[0].value, pairs[1].value];
    let mut cols: [Vec<T>; 2] = [0, 1].map(|k| {
        let s = pairs[k].value.sqrt();
        pairs[k].vector.iter().map(|&v| v * s).collect()
    });
    let warning = rank_warning(&mut values, &mut cols);
    Ok(RawEmbedding {
        coords: (0..n).map(|i| Point2::new(cols[0][i], cols[1][i])).collect(),
        eigenvalues: values,
        warning,
    })
}

/// Reads `id,x,y` rows (no header) and aligns them to anchor ids
/// `0..expected`.
pub fn import_coords<T: Scalar>(path: impl AsRef<Path>, expected: usize) -> Result<RawEmbedding<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_coords(&text, expected, &path.display().to_string())
}

pub fn parse_coords<T: Scalar>(text: &str, expected: usize, origin: &str) -> Result<RawEmbedding<T>> {
    let err = |line: usize, column: usize, msg: String| Error::Parse {
        path: origin.to_string(),
        line,
        column,
        msg,
    };
    let mut slots: Vec<Option<Point2<T>>> = vec![None; expected];
    let mut rows = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        rows += 1;
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 3 {
            return Err(err(i + 1, 0, format!("expected id,x,y, got {line:?}")));
        }
        let id: usize = cells[0]
            .parse()
            .map_err(|_| err(i + 1, 0, format!("bad anchor id {:?}", cells[0])))?;
        let mut xy = [T::zero(); 2];
        for k in 0..2 {
            let v: T = cells[k + 1]
                .parse()
                .map_err(|_| err(i + 1, k + 1, format!("cannot parse {:?}", cells[k + 1])))?;
            if !v.is_finite() {
                return Err(err(i + 1, k + 1, format!("non-finite coordinate {:?}", cells[k + 1])));
            }
            xy[k] = v;
        }
        let slot = slots
            .get_mut(id)
            .ok_or_else(|| err(i + 1, 0, format!("anchor id {id} out of range 0..{expected}")))?;
        if slot.is_some() {
            return Err(err(i + 1, 0, format!("duplicate anchor id {id}")));
        }
        *slot = Some(Point2::from(xy));
    }
    if rows != expected {
        return Err(Error::Data(format!(
            "{origin}: {rows} coordinate rows for {expected} anchors"
        )));
    }
    Ok(RawEmbedding {
        coords: slots.into_iter().map(|s| s.expect("all ids present")).collect(),
        eigenvalues: [T::zero(); 2],
        warning: None,
    })
}

/// Uniform scale plus offset: `canonical = raw * scale + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame<T> {
    pub scale: T,
    pub offset: Point2<T>,
}

impl<T: Scalar> Frame<T> {
    pub fn apply(&self, p: Point2<T>) -> Point2<T> {
        p * self.scale + self.offset
    }
}

/// Anchor positions in the canonical frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorEmbedding<T> {
    pub coords: Vec<Point2<T>>,
    pub frame: Frame<T>,
}

impl<T: Scalar> AnchorEmbedding<T> {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// Centers the bounding box in `[0, 100]²` with its longer side spanning the
/// full 100 units.
pub fn to_canonical<T: Scalar>(raw: &[Point2<T>]) -> Result<AnchorEmbedding<T>> {
    let Some(first) = raw.first() else {
        return Err(Error::Data("cannot canonicalize an empty embedding".into()));
    };
    let (mut lo, mut hi) = (*first, *first);
    for p in raw {
        if !p.is_finite() {
            return Err(Error::Numerical("non-finite embedding coordinate".into()));
        }
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let extent = (hi.x - lo.x).max(hi.y - lo.y);
    if !(extent > T::zero()) {
        return Err(Error::Data("all anchors coincide in the embedding".into()));
    }
    let size = T::of(CANONICAL_SIZE);
    let scale = size / extent;
    let half = T::of(0.5);
    let center = (lo + hi) * half;
    let offset = Point2::new(size * half, size * half) - center * scale;
    let frame = Frame { scale, offset };
    Ok(AnchorEmbedding {
        coords: raw.iter().map(|&p| frame.apply(p)).collect(),
        frame,
    })
}

/// Runs the selected backend and canonicalizes the result.
pub fn embed<T: Scalar>(
    anchors: &Matrix<T>,
    spec: &EmbedSpec,
) -> Result<(AnchorEmbedding<T>, Option<String>)> {
    let raw = match spec {
        EmbedSpec::Pca => pca_2d(anchors)?,
        EmbedSpec::Mds => mds_2d(anchors)?,
        EmbedSpec::External(p) => import_coords(p, anchors.rows())?,
    };
    if let Some(w) = &raw.warning {
        log::warn!("{w}");
    }
    Ok((to_canonical(&raw.coords)?, raw.warning))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pairwise(points: &[Vec<f64>]) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                out.push(dist2(&points[i], &points[j]).sqrt());
            }
        }
        out
    }

    fn coords_vec(e: &RawEmbedding<f64>) -> Vec<Vec<f64>> {
        e.coords.iter().map(|p| vec![p.x, p.y]).collect()
    }

    fn planar_anchors(seed: u64) -> (Vec<Vec<f64>>, Matrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let flat: Vec<Vec<f64>> = (0..25)
            .map(|_| vec![rng.random::<f64>() * 10.0, rng.random::<f64>() * 3.0])
            .collect();
        let rows: Vec<Vec<f64>> = flat.iter().map(|p| vec![p[0], p[1], 0.0]).collect();
        (flat, Matrix::from_rows(&rows).unwrap())
    }

    #[test]
    fn pca_planar_data_preserves_distances() {
        let (flat, m) = planar_anchors(1);
        let e = pca_2d(&m).unwrap();
        assert!(e.warning.is_none());
        for (a, b) in pairwise(&flat).iter().zip(pairwise(&coords_vec(&e))) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn pca_rank_one_sets_warning() {
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|i| {
                let t = i as f64;
                vec![t, 2.0 * t, -t, 0.5 * t, 3.0]
            })
            .collect();
        let e = pca_2d(&Matrix::from_rows(&rows).unwrap()).unwrap();
        assert!(e.warning.is_some());
        assert!(e.coords.iter().all(|p| p.y == 0.0));
    }

    #[test]
    fn pca_variance_matches_dense_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let scales = [5.0, 3.0, 2.0, 1.5, 1.0, 0.8, 0.6, 0.4, 0.3, 0.2];
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|_| scales.iter().map(|s| (rng.random::<f64>() - 0.5) * s).collect())
            .collect();
        let m = Matrix::from_rows(&rows).unwrap();
        let e = pca_2d(&m).unwrap();
        let n = rows.len() as f64;
        let var: f64 = e.coords.iter().map(|p| p.norm2()).sum::<f64>() / (n - 1.0);

        let x = nalgebra::DMatrix::from_fn(60, 10, |i, j| rows[i][j]);
        let mean = x.row_mean();
        let xc = nalgebra::DMatrix::from_fn(60, 10, |i, j| x[(i, j)] - mean[j]);
        let cov = xc.transpose() * &xc / (n - 1.0);
        let mut ev: Vec<f64> = cov.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!((var - (ev[0] + ev[1])).abs() < 1e-6, "{var} vs {}", ev[0] + ev[1]);
    }

    #[test]
    fn pca_is_translation_invariant() {
        let (_, m) = planar_anchors(4);
        let shifted = m.map(|v| v + 123.25);
        let a = pca_2d(&m).unwrap();
        let b = pca_2d(&shifted).unwrap();
        for (p, q) in a.coords.iter().zip(&b.coords) {
            assert!(p.dist(*q) < 1e-9);
        }
    }

    #[test]
    fn mds_reproduces_planar_distances() {
        let (flat, m) = planar_anchors(2);
        let e = mds_2d(&m).unwrap();
        for (a, b) in pairwise(&flat).iter().zip(pairwise(&coords_vec(&e))) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn mds_tetrahedron_has_positive_stress() {
        let rows = vec![
            vec![1.0, 1.0, 1.0],
            vec![1.0, -1.0, -1.0],
            vec![-1.0, 1.0, -1.0],
            vec![-1.0, -1.0, 1.0],
        ];
        let e = mds_2d(&Matrix::from_rows(&rows).unwrap()).unwrap();
        let stress: f64 = pairwise(&rows)
            .iter()
            .zip(pairwise(&coords_vec(&e)))
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        assert!(stress > 1e-3);
    }

    #[test]
    fn mds_gram_matches_spectral_truncation() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| {
                vec![
                    (rng.random::<f64>() - 0.5) * 20.0,
                    (rng.random::<f64>() - 0.5) * 8.0,
                    (rng.random::<f64>() - 0.5) * 1.0,
                    (rng.random::<f64>() - 0.5) * 0.5,
                ]
            })
            .collect();
        let m = Matrix::from_rows(&rows).unwrap();
        let e = mds_2d(&m).unwrap();
        let b = centered_gram(&m);
        let bm = nalgebra::DMatrix::from_fn(30, 30, |i, j| b.get(i, j));
        let eig = bm.symmetric_eigen();
        let mut order: Vec<usize> = (0..30).collect();
        order.sort_by(|&a, &c| eig.eigenvalues[c].partial_cmp(&eig.eigenvalues[a]).unwrap());
        for i in 0..30 {
            for j in 0..30 {
                let trunc: f64 = order[..2]
                    .iter()
                    .map(|&k| eig.eigenvalues[k] * eig.eigenvectors[(i, k)] * eig.eigenvectors[(j, k)])
                    .sum();
                let got = e.coords[i].dot(e.coords[j]);
                assert!((trunc - got).abs() < 1e-6, "({i},{j}) {trunc} vs {got}");
            }
        }
    }

    #[test]
    fn import_alignment_and_errors() {
        let ok: RawEmbedding<f64> = parse_coords("3,3,0\n0,0,0\n1,1,1\n2,2,2\n4,4,4\n", 5, "t").unwrap();
        assert_eq!(ok.coords[3], Point2::new(3.0, 0.0));
        assert!(matches!(
            parse_coords::<f64>("0,0,0\n1,1,1\n2,2,2\n3,3,3\n", 5, "t"),
            Err(Error::Data(_))
        ));
        let dup = parse_coords::<f64>("0,0,0\n1,1,1\n3,2,2\n3,3,3\n4,4,4\n", 5, "t").unwrap_err();
        assert!(dup.to_string().contains("duplicate anchor id 3"));
        assert!(parse_coords::<f64>("0,inf,0\n1,1,1\n2,2,2\n", 3, "t").is_err());
    }

    #[test]
    fn canonical_examples() {
        let e = to_canonical(&[Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)]).unwrap();
        assert_eq!(e.coords, vec![Point2::new(0.0, 50.0), Point2::new(100.0, 50.0)]);
        let e = to_canonical(&[Point2::new(2.0, 2.0), Point2::new(2.0, 4.0)]).unwrap();
        assert_eq!(e.coords, vec![Point2::new(50.0, 0.0), Point2::new(50.0, 100.0)]);
        let pts = [Point2::new(0.0, 0.0), Point2::new(100.0, 100.0), Point2::new(30.0, 60.0)];
        let e = to_canonical(&pts).unwrap();
        for (a, b) in e.coords.iter().zip(&pts) {
            assert!(a.dist(*b) < 1e-12);
        }
        assert!(to_canonical(&[Point2::new(1.0, 1.0); 3]).is_err());
    }

    #[test]
    fn canonical_preserves_distance_ratios() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<Point2<f64>> = (0..20)
            .map(|_| Point2::new(rng.random::<f64>() * 7.0 - 3.0, rng.random::<f64>() * 2.0))
            .collect();
        let e = to_canonical(&pts).unwrap();
        let d0 = pts[0].dist(pts[1]);
        let c0 = e.coords[0].dist(e.coords[1]);
        for i in 0..20 {
            for j in i + 1..20 {
                let r = e.coords[i].dist(e.coords[j]) / c0;
                assert!((r - pts[i].dist(pts[j]) / d0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pca_f32() {
        let rows: Vec<Vec<f32>> = vec![vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 2.0], vec![0.0, 2.0, 0.5], vec![3.0, 1.0, 0.0]];
        let e = pca_2d(&Matrix::from_rows(&rows).unwrap()).unwrap();
        assert_eq!(e.coords.len(), 4);
    }
}
