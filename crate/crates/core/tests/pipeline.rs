//! The library end to end, in both scalar widths.

use clusterplot::dataset::LabeledDataset;
use clusterplot::embedding::{embed, EmbedSpec};
use clusterplot::geometry::GeometryParams;
use clusterplot::optimizer::{optimize, OptimizeParams};
use clusterplot::relations::{measure_highdim, RelationMatrix, RelationParams};
use clusterplot::render::{render_clusterplot, render_heatmap, RenderConfig};
use clusterplot::subclustering::{subcluster_dataset, BirchParams};
use clusterplot::{toy, Scalar};

fn rows_are_distributions(m: &RelationMatrix) {
    for i in 0..m.n() {
        let row = m.row(i);
        let s: f64 = row.iter().sum();
        assert!(row.iter().all(|v| (0.0..=1.0 + 1e-12).contains(v)));
        assert!(s == 0.0 || (s - 1.0).abs() < 1e-9, "row {i} sums to {s}");
    }
}

struct Outcome {
    anchors: usize,
    initial: f64,
    best: f64,
    svg: String,
}

fn run<T: Scalar>(ds: &LabeledDataset<T>) -> Outcome {
    let sc = subcluster_dataset(ds, &BirchParams::default()).unwrap();
    let rel = RelationParams::default();
    let high = measure_highdim(ds, &sc, &rel).unwrap();
    rows_are_distributions(&high.anchor_overlap);
    rows_are_distributions(&high.label_overlap);
    rows_are_distributions(&high.proximity);

    let (emb, _) = embed(&sc.anchors, &EmbedSpec::Pca).unwrap();
    for p in &emb.coords {
        let (x, y) = (p.x.as_f64(), p.y.as_f64());
        assert!((-1e-3..=100.001).contains(&x) && (-1e-3..=100.001).contains(&y));
    }
    let params = OptimizeParams {
        iterations: 30,
        ..OptimizeParams::default()
    };
    let geom = GeometryParams::<T> {
        seed: 3,
        ..GeometryParams::default()
    };
    let out = optimize(&emb.coords, &high.anchor_overlap, &sc, &params, &geom, &rel).unwrap();
    rows_are_distributions(&out.last.label_overlap);
    assert_eq!(out.last.blobs.len(), ds.num_classes());

    let cfg = RenderConfig::default();
    let svg = render_clusterplot(&out.last.blobs, ds.class_names(), &cfg).unwrap();
    roxmltree::Document::parse(&svg).unwrap();
    let heat = render_heatmap(&high.label_overlap, ds.class_names(), "overlap", &cfg).unwrap();
    roxmltree::Document::parse(&heat).unwrap();
    Outcome {
        anchors: sc.num_anchors(),
        initial: out.trace.initial_mae,
        best: out.trace.best_mae,
        svg,
    }
}

#[test]
fn gaussians_in_f64() {
    let ds = toy::gaussians(3, 5, 150, 4.0, 1.0, 11).unwrap();
    let o = run(&ds);
    assert!(o.anchors >= 3);
    assert!(o.best <= o.initial);
    assert_eq!(o.svg.matches("class=\"fill\"").count(), 3);
}

#[test]
fn gaussians_in_f32() {
    let ds = toy::gaussians(3, 5, 150, 4.0, 1.0, 11).unwrap();
    let narrow = LabeledDataset::new(
        ds.points().map(|v| v as f32),
        ds.labels().to_vec(),
        ds.class_names().to_vec(),
    )
    .unwrap();
    let o = run(&narrow);
    assert!(o.anchors >= 3);
    assert!(o.best <= o.initial);
}

#[test]
fn same_seed_same_plot() {
    let ds = toy::hourglass(600, 5).unwrap();
    assert_eq!(run(&ds).svg, run(&ds).svg);
}
