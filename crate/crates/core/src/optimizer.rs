//! Greedy push/pull placement of anchors in the plane.
//!
//! Each iteration measures the planar anchor overlap from virtual points,
//! finds the pair with the largest disagreement against the original-space
//! overlap, and moves one anchor of that pair along the line joining them.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{build_blob, sample_virtual, scale_counts, BlobGeometry, GeometryParams, VirtualPointSet};
use crate::knn::build_knn;
use crate::matrix::Matrix;
use crate::point::Point2;
use crate::relations::{mae_masked, proximity, EdgeCounts, RelationMatrix, RelationParams};
use crate::scalar::Scalar;
use crate::seed::{mix_seed, rng_for};
use crate::subclustering::SubClustering;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeParams {
    pub iterations: usize,
    pub learning_rate: f64,
    pub delta: f64,
    pub stall_patience: usize,
    pub damp_factor: f64,
    /// Restrict the loss to pairs of anchors with different labels.
    pub inter_label_only: bool,
    /// Rebuild only the moved anchor's label each iteration.
    pub lazy: bool,
    pub seed: u64,
}

impl Default for OptimizeParams {
    fn default() -> Self {
        Self {
            iterations: 1000,
            learning_rate: 0.05,
            delta: 0.02,
            stall_patience: 25,
            damp_factor: 0.5,
            inter_label_only: false,
            lazy: false,
            seed: 0,
        }
    }
}

impl OptimizeParams {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Param("iterations must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.learning_rate) {
            return Err(Error::Param(format!(
                "learning rate must be in [0, 1), got {}",
                self.learning_rate
            )));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::Param(format!("delta must be >= 0, got {}", self.delta)));
        }
        if !(self.damp_factor > 0.0 && self.damp_factor < 1.0) {
            return Err(Error::Param(format!(
                "damp factor must be in (0, 1), got {}",
                self.damp_factor
            )));
        }
        if self.stall_patience == 0 {
            return Err(Error::Param("stall patience must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Push,
    Pull,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Push => "push",
            Direction::Pull => "pull",
        })
    }
}

/// Moves anchor `i` away from (push) or toward (pull) anchor `j` by the
/// fraction `l` of their offset. Coincident anchors use a unit offset at an
/// angle drawn from `seed`.
pub fn step<T: Scalar>(
    coords: &mut [Point2<T>],
    i: usize,
    j: usize,
    direction: Direction,
    l: T,
    seed: u64,
) -> Result<()> {
    if i == j || i >= coords.len() || j >= coords.len() {
        return Err(Error::Param(format!("invalid step pair ({i}, {j})")));
    }
    let mut d = coords[i] - coords[j];
    if d.norm2() == T::zero() {
        let a: f64 = rng_for(&[seed, i as u64, j as u64]).random_range(0.0..std::f64::consts::TAU);
        d = Point2::new(T::of(a.cos()), T::of(a.sin()));
    }
    let sign = match direction {
        Direction::Push => T::one(),
        Direction::Pull => -T::one(),
    };
    coords[i] += d * (sign * l);
    Ok(())
}

/// Planar measurement of the current embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct LowDimMeasure<T> {
    pub anchor_overlap: RelationMatrix,
    pub label_overlap: RelationMatrix,
    pub blobs: Vec<BlobGeometry<T>>,
    pub virtual_points: VirtualPointSet<T>,
}

impl<T: Scalar> LowDimMeasure<T> {
    /// Anchors that own a Voronoi cell.
    pub fn inlier_mask(&self, n_anchors: usize) -> Vec<bool> {
        let mut mask = vec![false; n_anchors];
        for b in &self.blobs {
            for &a in &b.inlier_anchor_ids {
                mask[a] = true;
            }
        }
        mask
    }
}

/// Virtual-point budget per sub-cluster, fixed for a whole optimization so
/// one label's blob never changes another label's counts.
pub fn virtual_budget<T: Scalar>(sc: &SubClustering<T>, geom: &GeometryParams<T>) -> Result<Vec<usize>> {
    scale_counts(&sc.sizes, geom.virtual_cap)
}

fn label_blob<T: Scalar>(
    label: usize,
    coords: &[Point2<T>],
    epoch: u64,
    sc: &SubClustering<T>,
    geom: &GeometryParams<T>,
    budget: &[usize],
) -> Result<(BlobGeometry<T>, VirtualPointSet<T>)> {
    let blob = build_blob(label, coords, sc, geom)?;
    let counts = blob.cell_sizes(budget);
    let vps = sample_virtual(
        &blob.cells,
        &blob.inlier_anchor_ids,
        &counts,
        label,
        mix_seed(&[geom.seed, epoch]),
    )?;
    Ok((blob, vps))
}

fn assemble<T: Scalar>(
    parts: Vec<(BlobGeometry<T>, VirtualPointSet<T>)>,
    sc: &SubClustering<T>,
    rel: &RelationParams,
) -> Result<LowDimMeasure<T>> {
    let mut blobs = Vec::with_capacity(parts.len());
    let mut pool = VirtualPointSet::default();
    for (b, v) in parts {
        blobs.push(b);
        pool.extend(v);
    }
    if pool.len() < 2 {
        return Err(Error::Geometry(format!("only {} virtual points", pool.len())));
    }
    let pts = Matrix::from_vec(
        pool.len(),
        2,
        pool.points.iter().flat_map(|p| [p.x, p.y]).collect(),
    )?;
    let graph = build_knn(&pts, rel.k_overlap, None);
    let counts = EdgeCounts::from_graph(&graph, &pool.owner_anchor, sc.num_anchors());
    Ok(LowDimMeasure {
        anchor_overlap: counts.normalize().0,
        label_overlap: counts.aggregate(&sc.anchor_label, sc.num_classes()).normalize().0,
        blobs,
        virtual_points: pool,
    })
}

/// Measures with every label at epoch 0.
pub fn measure_lowdim<T: Scalar>(
    coords: &[Point2<T>],
    sc: &SubClustering<T>,
    geom: &GeometryParams<T>,
    rel: &RelationParams,
) -> Result<LowDimMeasure<T>> {
    measure_lowdim_at(coords, &vec![0; sc.num_classes()], sc, geom, rel)
}

/// Blobs per label, virtual points per cell, then the planar KNN overlap.
/// `epochs[label]` keys the label's sampling streams.
pub fn measure_lowdim_at<T: Scalar>(
    coords: &[Point2<T>],
    epochs: &[u64],
    sc: &SubClustering<T>,
    geom: &GeometryParams<T>,
    rel: &RelationParams,
) -> Result<LowDimMeasure<T>> {
    let budget = virtual_budget(sc, geom)?;
    let parts = (0..sc.num_classes())
        .into_par_iter()
        .map(|label| label_blob(label, coords, epochs[label], sc, geom, &budget))
        .collect::<Result<Vec<_>>>()?;
    assemble(parts, sc, rel)
}

/// Label proximity over the planar anchors.
pub fn lowdim_proximity<T: Scalar>(coords: &[Point2<T>], sc: &SubClustering<T>, k: usize) -> Result<RelationMatrix> {
    let m = Matrix::from_vec(coords.len(), 2, coords.iter().flat_map(|p| [p.x, p.y]).collect())?;
    proximity(&m, &sc.anchor_label, sc.num_classes(), k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub mae: f64,
    pub pair: (usize, usize),
    /// `None` on the iteration that met the threshold.
    pub direction: Option<Direction>,
    /// Learning rate applied (after damping).
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    Exhausted,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Converged => "converged",
            Status::Exhausted => "exhausted",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationTrace {
    pub records: Vec<TraceRecord>,
    pub status: Status,
    pub initial_mae: f64,
    pub best_mae: f64,
    pub best_iteration: usize,
}

impl OptimizationTrace {
    /// `iteration,mae,i,j,direction,step` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,mae,i,j,direction,step\n");
        for r in &self.records {
            let dir = r.direction.map_or("none".to_string(), |d| d.to_string());
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.iteration, r.mae, r.pair.0, r.pair.1, dir, r.step
            ));
        }
        s.push_str(&format!(
            "# status={} initial_mae={} best_mae={} best_iteration={}\n",
            self.status, self.initial_mae, self.best_mae, self.best_iteration
        ));
        s
    }
}

#[derive(Debug, Clone)]
pub struct Optimized<T> {
    /// Best-scoring embedding seen.
    pub coords: Vec<Point2<T>>,
    /// Sampling epochs belonging to `coords`.
    pub epochs: Vec<u64>,
    pub trace: OptimizationTrace,
    /// Measurement of the starting embedding.
    pub initial: LowDimMeasure<T>,
    /// Measurement of `coords`, recomputed after the loop.
    pub last: LowDimMeasure<T>,
}

/// Loss used by the loop: largest disagreement over pairs of distinct
/// anchors that both own a cell (and differ in label if requested).
pub fn loss<T: Scalar>(
    hma: &RelationMatrix,
    low: &LowDimMeasure<T>,
    sc: &SubClustering<T>,
    inter_label_only: bool,
) -> Result<(f64, (usize, usize))> {
    let inlier = low.inlier_mask(sc.num_anchors());
    mae_masked(hma, &low.anchor_overlap, |i, j| {
        i != j
            && inlier[i]
            && inlier[j]
            && (!inter_label_only || sc.anchor_label[i] != sc.anchor_label[j])
    })
}

struct Measurer<'a, T> {
    sc: &'a SubClustering<T>,
    geom: &'a GeometryParams<T>,
    rel: &'a RelationParams,
    budget: Vec<usize>,
    cache: Vec<Option<(BlobGeometry<T>, VirtualPointSet<T>)>>,
    lazy: bool,
}

impl<T: Scalar> Measurer<'_, T> {
    fn measure(&mut self, coords: &[Point2<T>], epochs: &[u64], dirty: Option<usize>) -> Result<LowDimMeasure<T>> {
        let stale: Vec<usize> = (0..self.sc.num_classes())
            .filter(|&l| !self.lazy || self.cache[l].is_none() || dirty == Some(l))
            .collect();
        let fresh = stale
            .par_iter()
            .map(|&l| label_blob(l, coords, epochs[l], self.sc, self.geom, &self.budget))
            .collect::<Result<Vec<_>>>()?;
        for (l, part) in stale.into_iter().zip(fresh) {
            self.cache[l] = Some(part);
        }
        let parts = self.cache.iter().map(|p| p.clone().expect("all labels measured")).collect();
        assemble(parts, self.sc, self.rel)
    }
}

/// Runs the greedy loop from `initial` against `hma`.
pub fn optimize<T: Scalar>(
    initial: &[Point2<T>],
    hma: &RelationMatrix,
    sc: &SubClustering<T>,
    params: &OptimizeParams,
    geom: &GeometryParams<T>,
    rel: &RelationParams,
) -> Result<Optimized<T>> {
    params.validate()?;
    geom.validate(sc.num_anchors())?;
    if hma.n() != sc.num_anchors() || initial.len() != sc.num_anchors() {
        return Err(Error::Shape(format!(
            "overlap {0}x{0} and {1} coordinates for {2} anchors",
            hma.n(),
            initial.len(),
            sc.num_anchors()
        )));
    }
    let mut m = Measurer {
        sc,
        geom,
        rel,
        budget: virtual_budget(sc, geom)?,
        cache: vec![None; sc.num_classes()],
        lazy: params.lazy,
    };
    let mut coords = initial.to_vec();
    let mut epochs = vec![0u64; sc.num_classes()];
    let mut records = Vec::new();
    let mut status = Status::Exhausted;
    let mut lr = params.learning_rate;
    let mut stall = 0;
    let mut dirty = None;
    let mut best: Option<(f64, usize, Vec<Point2<T>>, Vec<u64>)> = None;
    let mut first: Option<(f64, LowDimMeasure<T>)> = None;

    for it in 0..params.iterations {
        let low = m.measure(&coords, &epochs, dirty)?;
        let (mae, (i, j)) = loss(hma, &low, sc, params.inter_label_only)?;
        if best.as_ref().is_none_or(|b| mae < b.0) {
            best = Some((mae, it, coords.clone(), epochs.clone()));
            stall = 0;
        } else {
            stall += 1;
            if stall >= params.stall_patience {
                lr *= params.damp_factor;
                stall = 0;
            }
        }
        let lma_ij = low.anchor_overlap.get(i, j);
        if first.is_none() {
            first = Some((mae, low));
        }
        if mae <= params.delta || i == j {
            records.push(TraceRecord {
                iteration: it,
                mae,
                pair: (i, j),
                direction: None,
                step: 0.0,
            });
            if mae <= params.delta {
                status = Status::Converged;
            }
            break;
        }
        let direction = if hma.get(i, j) <= lma_ij {
            Direction::Push
        } else {
            Direction::Pull
        };
        step(&mut coords, i, j, direction, T::of(lr), mix_seed(&[params.seed, it as u64]))?;
        let label = sc.anchor_label[i];
        epochs[label] += 1;
        dirty = Some(label);
        records.push(TraceRecord {
            iteration: it,
            mae,
            pair: (i, j),
            direction: Some(direction),
            step: lr,
        });
    }

    let (best_mae, best_iteration, coords, epochs) = best.expect("at least one iteration");
    let (initial_mae, initial_measure) = first.expect("at least one iteration");
    let last = measure_lowdim_at(&coords, &epochs, sc, geom, rel)?;
    Ok(Optimized {
        coords,
        epochs,
        trace: OptimizationTrace {
            records,
            status,
            initial_mae,
            best_mae,
            best_iteration,
        },
        initial: initial_measure,
        last,
    })
}
