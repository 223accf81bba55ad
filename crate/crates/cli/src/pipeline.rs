//! The end-to-end pipeline and its artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use clusterplot::dataset::load;
use clusterplot::embedding::embed;
use clusterplot::optimizer::{lowdim_proximity, optimize};
use clusterplot::relations::{knn_confusion, measure_highdim, RelationMatrices, RelationMatrix};
use clusterplot::render::{geometry_dump, render_clusterplot, render_heatmap, RenderConfig};
use clusterplot::subclustering::{anchor_dump, subcluster_dataset};
use clusterplot::{Dataset, Point, SubClusters};

use crate::config::RunConfig;
use crate::error::CliError;

pub const MANIFEST: &str = "manifest.txt";

/// One output file, held in memory until the whole run has succeeded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn new(name: &str, text: String) -> Self {
        Self {
            name: name.to_string(),
            bytes: text.into_bytes(),
        }
    }
}

/// Headline numbers of a run, for logging and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub points: usize,
    pub anchors: usize,
    pub initial_mae: Option<f64>,
    pub best_mae: Option<f64>,
}

fn join_names(names: &[String]) -> String {
    names
        .iter()
        .map(|n| {
            if n.contains([',', '"', '\n', '\r']) {
                format!("\"{}\"", n.replace('"', "\"\""))
            } else {
                n.clone()
            }
        })
        .collect::<Vec<_>>()
        .join(",")
}

/// Class names on the first line, then one row per line, values at full
/// precision (shortest text that parses back to the same `f64`).
pub fn matrix_text(m: &RelationMatrix, names: &[String]) -> String {
    let mut out = join_names(names);
    out.push('\n');
    for i in 0..m.n() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// `class:k` for the `k`-th anchor of each class.
pub fn anchor_names(sc: &SubClusters, class_names: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(sc.num_anchors());
    for (label, range) in sc.class_ranges.iter().enumerate() {
        for k in 0..range.len() {
            out.push(format!("{}:{k}", class_names[label]));
        }
    }
    out
}

fn coords_text(sc: &SubClusters, initial: &[Point], last: &[Point]) -> String {
    let mut s = String::from("id,label,x_initial,y_initial,x,y\n");
    for (id, (a, b)) in initial.iter().zip(last).enumerate() {
        let _ = writeln!(s, "{id},{},{},{},{},{}", sc.anchor_label[id], a.x, a.y, b.x, b.y);
    }
    s
}

struct Front {
    ds: Dataset,
    sc: SubClusters,
    high: RelationMatrices,
}

fn front(cfg: &RunConfig) -> Result<Front, CliError> {
    let spec = cfg
        .ingest
        .as_ref()
        .ok_or_else(|| CliError::Config("no input dataset (set `input`)".into()))?;
    let ds: Dataset = load(spec).map_err(|e| CliError::stage("dataset", e))?;
    log::info!("loaded {} points, {} dims, {} classes", ds.len(), ds.dim(), ds.num_classes());
    let sc = subcluster_dataset(&ds, &cfg.birch).map_err(|e| CliError::stage("subclustering", e))?;
    if sc.auto_warning {
        log::warn!("automatic threshold missed the anchor target band");
    }
    log::info!("{} anchors", sc.num_anchors());
    let high = measure_highdim(&ds, &sc, &cfg.relations).map_err(|e| CliError::stage("relations", e))?;
    Ok(Front { ds, sc, high })
}

fn heatmap(
    out: &mut Vec<Artifact>,
    name: &str,
    m: &RelationMatrix,
    names: &[String],
    title: &str,
    render: &RenderConfig,
) -> Result<(), CliError> {
    let svg = render_heatmap(m, names, title, render).map_err(|e| CliError::stage("render", e))?;
    out.push(Artifact::new(name, svg));
    Ok(())
}

fn common_artifacts(cfg: &RunConfig, f: &Front, out: &mut Vec<Artifact>) -> Result<(), CliError> {
    let names = f.ds.class_names();
    out.push(Artifact::new("config.txt", cfg.echo()));
    out.push(Artifact::new("anchors.csv", anchor_dump(&f.sc)));
    out.push(Artifact::new("overlap_high.csv", matrix_text(&f.high.label_overlap, names)));
    out.push(Artifact::new("proximity_high.csv", matrix_text(&f.high.proximity, names)));
    let anames = anchor_names(&f.sc, names);
    out.push(Artifact::new("anchor_overlap_high.csv", matrix_text(&f.high.anchor_overlap, &anames)));
    heatmap(out, "heatmap_overlap_high.svg", &f.high.label_overlap, names, "overlap (original space)", &cfg.render)?;
    heatmap(out, "heatmap_proximity_high.svg", &f.high.proximity, names, "proximity (original space)", &cfg.render)?;
    if cfg.confusion {
        let c = knn_confusion(&f.ds, cfg.relations.k_confusion).map_err(|e| CliError::stage("confusion", e))?;
        out.push(Artifact::new("confusion.csv", matrix_text(&c, names)));
        heatmap(out, "heatmap_confusion.svg", &c, names, "KNN confusion", &cfg.render)?;
    }
    Ok(())
}

/// Relation matrices of the input, without embedding or optimization.
pub fn measure(cfg: &RunConfig) -> Result<(Vec<Artifact>, Summary), CliError> {
    let f = front(cfg)?;
    let mut out = Vec::new();
    common_artifacts(cfg, &f, &mut out)?;
    let summary = Summary {
        points: f.ds.len(),
        anchors: f.sc.num_anchors(),
        initial_mae: None,
        best_mae: None,
    };
    Ok((out, summary))
}

/// The full pipeline: relations, embedding, optimization, final blobs and
/// every plot.
pub fn run(cfg: &RunConfig) -> Result<(Vec<Artifact>, Summary), CliError> {
    let f = front(cfg)?;
    let (emb, _) = embed(&f.sc.anchors, &cfg.embed).map_err(|e| CliError::stage("embedding", e))?;
    let opt = optimize(
        &emb.coords,
        &f.high.anchor_overlap,
        &f.sc,
        &cfg.optimize,
        &cfg.geometry,
        &cfg.relations,
    )
    .map_err(|e| CliError::stage("optimizer", e))?;
    log::info!(
        "optimizer {}: loss {} -> {} (iteration {})",
        opt.trace.status,
        opt.trace.initial_mae,
        opt.trace.best_mae,
        opt.trace.best_iteration
    );
    let low_prox =
        lowdim_proximity(&opt.coords, &f.sc, cfg.relations.k_proximity).map_err(|e| CliError::stage("relations", e))?;

    let names = f.ds.class_names();
    let anames = anchor_names(&f.sc, names);
    let mut out = Vec::new();
    common_artifacts(cfg, &f, &mut out)?;
    let plot = render_clusterplot(&opt.last.blobs, names, &cfg.render).map_err(|e| CliError::stage("render", e))?;
    out.push(Artifact::new("clusterplot.svg", plot));
    out.push(Artifact::new("overlap_low.csv", matrix_text(&opt.last.label_overlap, names)));
    out.push(Artifact::new("proximity_low.csv", matrix_text(&low_prox, names)));
    out.push(Artifact::new(
        "anchor_overlap_low_initial.csv",
        matrix_text(&opt.initial.anchor_overlap, &anames),
    ));
    out.push(Artifact::new("anchor_overlap_low.csv", matrix_text(&opt.last.anchor_overlap, &anames)));
    heatmap(&mut out, "heatmap_overlap_low.svg", &opt.last.label_overlap, names, "overlap (plot)", &cfg.render)?;
    heatmap(&mut out, "heatmap_proximity_low.svg", &low_prox, names, "proximity (plot)", &cfg.render)?;
    let diff = |low: &RelationMatrix| {
        f.high
            .anchor_overlap
            .abs_diff(low)
            .map_err(|e| CliError::stage("relations", e))
    };
    let before = diff(&opt.initial.anchor_overlap)?;
    let after = diff(&opt.last.anchor_overlap)?;
    heatmap(&mut out, "heatmap_diff_before.svg", &before, &anames, "anchor overlap |high - plot|, before", &cfg.render)?;
    heatmap(&mut out, "heatmap_diff_after.svg", &after, &anames, "anchor overlap |high - plot|, after", &cfg.render)?;
    out.push(Artifact::new("anchors_2d.csv", coords_text(&f.sc, &emb.coords, &opt.coords)));
    out.push(Artifact::new("trace.csv", opt.trace.to_csv()));
    out.push(Artifact::new("geometry.csv", geometry_dump(&opt.last.blobs, names)));

    let summary = Summary {
        points: f.ds.len(),
        anchors: f.sc.num_anchors(),
        initial_mae: Some(opt.trace.initial_mae),
        best_mae: Some(opt.trace.best_mae),
    };
    Ok((out, summary))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `<sha256>  <name>` lines sorted by name.
pub fn manifest_text(artifacts: &[Artifact]) -> String {
    let mut lines: Vec<(&str, String)> = artifacts
        .iter()
        .map(|a| (a.name.as_str(), sha256_hex(&a.bytes)))
        .collect();
    lines.sort();
    lines.iter().map(|(n, h)| format!("{h}  {n}\n")).collect()
}

/// Names listed in a manifest.
pub fn parse_manifest(text: &str) -> Vec<String> {
    text.lines()
        .filter_map(|l| l.split_once("  ").map(|(_, n)| n.to_string()))
        .collect()
}

/// Writes the artifacts and the manifest into `dir`. Files listed by a
/// previous manifest there are removed first; if any write fails, the files
/// of this run are removed again.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<PathBuf, CliError> {
    let io = |p: &Path, e: std::io::Error| CliError::Pipeline(format!("writing {}: {e}", p.display()));
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let manifest_path = dir.join(MANIFEST);
    if let Ok(old) = std::fs::read_to_string(&manifest_path) {
        for name in parse_manifest(&old) {
            if !name.contains(['/', '\\']) {
                let _ = std::fs::remove_file(dir.join(name));
            }
        }
    }
    let mut written: Vec<PathBuf> = Vec::new();
    let manifest = Artifact::new(MANIFEST, manifest_text(artifacts));
    for a in artifacts.iter().chain(std::iter::once(&manifest)) {
        let p = dir.join(&a.name);
        if let Err(e) = std::fs::write(&p, &a.bytes) {
            for w in &written {
                let _ = std::fs::remove_file(w);
            }
            let _ = std::fs::remove_file(&p);
            return Err(io(&p, e));
        }
        written.push(p);
    }
    Ok(manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_file_layout() {
        let m = RelationMatrix::from_vec(2, vec![0.1 + 0.2, 0.7, 0.0, 1.0]).unwrap();
        let t = matrix_text(&m, &["a".into(), "b,\"c\"".into()]);
        assert_eq!(t, "a,\"b,\"\"c\"\"\"\n0.30000000000000004,0.7\n0,1\n");
    }

    #[test]
    fn manifest_sorted_with_hashes() {
        let arts = vec![Artifact::new("b.txt", "x".into()), Artifact::new("a.txt", String::new())];
        let m = manifest_text(&arts);
        assert_eq!(
            m,
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855  a.txt\n\
             2d711642b726b04401627ca9fbac32f5c8530fb1903cc4db02258717921a4881  b.txt\n"
        );
        assert_eq!(parse_manifest(&m), vec!["a.txt", "b.txt"]);
    }

    #[test]
    fn stale_artifacts_replaced() {
        let dir = tempfile::tempdir().unwrap();
        write_artifacts(dir.path(), &[Artifact::new("old.csv", "1".into())]).unwrap();
        std::fs::write(dir.path().join("mine.txt"), "keep").unwrap();
        write_artifacts(dir.path(), &[Artifact::new("new.csv", "2".into())]).unwrap();
        assert!(!dir.path().join("old.csv").exists());
        assert!(dir.path().join("new.csv").exists());
        assert!(dir.path().join("mine.txt").exists());
    }
}
