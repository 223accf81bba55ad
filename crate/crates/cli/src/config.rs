//! Run configuration: built-in defaults, then a config file, then flags.
//!
//! Every setting is a flat key. Files are `key=value` lines (`#` starts a
//! comment) or a JSON object; flags are the same keys with a `--` prefix.
//! Underscores and dashes in keys are interchangeable.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clusterplot::dataset::{IngestFormat, IngestSpec, LabelColumn, StandardizeMode};
use clusterplot::embedding::EmbedSpec;
use clusterplot::geometry::{AlphaRadius, GeometryParams};
use clusterplot::optimizer::OptimizeParams;
use clusterplot::relations::RelationParams;
use clusterplot::render::{RenderConfig, DEFAULT_PALETTE};
use clusterplot::seed::module_seed;
use clusterplot::subclustering::{BirchParams, Threshold};

use crate::error::CliError;

/// Which subcommands accept a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Data,
    Optimize,
    Render,
    Common,
}

#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
    pub group: Group,
    /// Boolean switch: a bare `--name` means `true`.
    pub switch: bool,
}

const fn key(name: &'static str, default: &'static str, group: Group, help: &'static str) -> Key {
    Key {
        name,
        default,
        help,
        group,
        switch: false,
    }
}

const fn switch(name: &'static str, default: &'static str, group: Group, help: &'static str) -> Key {
    Key {
        name,
        default,
        help,
        group,
        switch: true,
    }
}

pub const KEYS: &[Key] = &[
    key("input", "", Group::Data, "dataset file"),
    key("format", "text", Group::Data, "text | binary"),
    key("label-col", "label", Group::Data, "label column: header name or 0-based index"),
    key("sidecar", "", Group::Data, "sidecar describing a binary payload"),
    key("standardize", "none", Group::Data, "none | zscore"),
    key("birch-threshold", "auto", Group::Data, "sub-cluster radius bound, or auto"),
    key("birch-branching", "50", Group::Data, "CF-tree branching factor"),
    key("anchors-target", "20,60", Group::Data, "lo,hi band for the median anchors per class (auto threshold)"),
    switch("per-class-auto", "false", Group::Data, "search the auto threshold per class"),
    key("embed", "pca", Group::Data, "pca | mds | external"),
    key("external-coords", "", Group::Data, "anchor coordinates file for embed=external"),
    key("k-overlap", "10", Group::Data, "neighbours per point for overlap"),
    key("k-prox", "5", Group::Data, "neighbours per anchor for proximity"),
    key("k-confusion", "off", Group::Data, "neighbours for the KNN confusion matrix, or off"),
    key("alpha-radius", "auto", Group::Optimize, "alpha-shape radius, or auto"),
    key("lof-k", "auto", Group::Optimize, "LOF neighbourhood size, or auto"),
    key("lof-threshold", "1.5", Group::Optimize, "LOF score above which an anchor is an outlier"),
    key("smoothing-passes", "3", Group::Optimize, "outline smoothing passes"),
    key("virtual-cap", "20000", Group::Optimize, "total virtual points"),
    key("iterations", "1000", Group::Optimize, "optimizer iterations"),
    key("lr", "0.05", Group::Optimize, "learning rate"),
    key("delta", "0.02", Group::Optimize, "stop once the loss is at most this"),
    key("stall-patience", "25", Group::Optimize, "iterations without improvement before damping"),
    key("damp-factor", "0.5", Group::Optimize, "learning-rate multiplier on a stall"),
    switch("inter-label-only", "false", Group::Optimize, "loss over anchor pairs of different labels only"),
    switch("lazy", "false", Group::Optimize, "re-measure only the moved label each iteration"),
    key("canvas", "1000", Group::Render, "canvas size in pixels"),
    key("palette", "tab10", Group::Render, "tab10 or comma-separated #rrggbb colours"),
    key("fill-opacity", "0.25", Group::Render, "blob fill opacity"),
    key("stroke-frac", "0.008", Group::Render, "outline width as a fraction of the canvas"),
    switch("legend", "true", Group::Render, "draw the legend"),
    key("colormap", "viridis", Group::Render, "heatmap colours: viridis | greys"),
    key("seed", "0", Group::Common, "global seed"),
    key("threads", "0", Group::Common, "worker threads, 0 for all cores"),
    key("out", "clusterplot-out", Group::Common, "output directory"),
];

/// Keys left out of the echoed config: they change where and how fast a run
/// happens, not what it produces.
const EXECUTION_KEYS: [&str; 2] = ["threads", "out"];

pub fn find_key(name: &str) -> Option<&'static Key> {
    let norm = name.replace('_', "-");
    KEYS.iter().find(|k| k.name == norm)
}

/// Raw string settings, keyed by canonical key name.
pub type Settings = BTreeMap<&'static str, String>;

fn insert(map: &mut Settings, name: &str, value: String, origin: &str) -> Result<(), CliError> {
    let k = find_key(name).ok_or_else(|| CliError::Config(format!("{origin}: unknown key `{name}`")))?;
    map.insert(k.name, value);
    Ok(())
}

/// Parses a config file's text, either `key=value` lines or a JSON object.
pub fn parse_settings(text: &str, origin: &str) -> Result<Settings, CliError> {
    let mut map = Settings::new();
    if text.trim_start().starts_with('{') {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
        let obj = v
            .as_object()
            .ok_or_else(|| CliError::Config(format!("{origin}: expected a JSON object")))?;
        for (k, v) in obj {
            let s = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Null => String::new(),
                serde_json::Value::Bool(_) | serde_json::Value::Number(_) => v.to_string(),
                serde_json::Value::Array(items) => items
                    .iter()
                    .map(|x| x.as_str().map(String::from).unwrap_or_else(|| x.to_string()))
                    .collect::<Vec<_>>()
                    .join(","),
                serde_json::Value::Object(_) => {
                    return Err(CliError::Config(format!("{origin}: key `{k}` has a nested object")))
                }
            };
            insert(&mut map, k, s, origin)?;
        }
        return Ok(map);
    }
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("{origin}:{}: expected key=value", n + 1)))?;
        insert(&mut map, k.trim(), v.trim().to_string(), origin)?;
    }
    Ok(map)
}

pub fn read_settings(path: &Path) -> Result<Settings, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("config file {}: {e}", path.display())))?;
    parse_settings(&text, &path.display().to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// `None` until an input is given; `run` and `measure` require one.
    pub ingest: Option<IngestSpec>,
    pub birch: BirchParams<f64>,
    pub embed: EmbedSpec,
    pub relations: RelationParams,
    /// Write the KNN confusion matrix (`k-confusion` set to a number).
    pub confusion: bool,
    pub geometry: GeometryParams<f64>,
    pub optimize: OptimizeParams,
    pub render: RenderConfig,
    pub seed: u64,
    pub threads: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        resolve(&Settings::new(), &Settings::new()).expect("built-in defaults are valid")
    }
}

fn parse_num<V: std::str::FromStr>(key: &str, v: &str) -> Result<V, CliError> {
    v.parse()
        .map_err(|_| CliError::Config(format!("`{key}`: cannot parse {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(CliError::Config(format!("`{key}`: expected true or false, got {v:?}"))),
    }
}

fn opt_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

/// Merges file and flag settings over the defaults and builds the typed
/// configuration. Flags win over the file.
pub fn resolve(file: &Settings, flags: &Settings) -> Result<RunConfig, CliError> {
    let mut s: BTreeMap<&str, String> = KEYS.iter().map(|k| (k.name, k.default.to_string())).collect();
    for (k, v) in file.iter().chain(flags) {
        s.insert(k, v.clone());
    }
    let get = |k: &str| s[k].as_str();

    if !["text", "binary"].contains(&get("format")) {
        return Err(CliError::Config(format!("`format`: unknown value {:?}", get("format"))));
    }
    let ingest = match opt_path(get("input")) {
        None => None,
        Some(path) => {
            let mut spec = match get("format") {
                "text" => IngestSpec::text(path, LabelColumn::parse(get("label-col"))),
                "binary" => {
                    let side = opt_path(get("sidecar"))
                        .ok_or_else(|| CliError::Config("format=binary needs `sidecar`".into()))?;
                    IngestSpec::binary(path, side)
                }
                other => return Err(CliError::Config(format!("`format`: unknown value {other:?}"))),
            };
            spec.standardize = match get("standardize") {
                "none" => StandardizeMode::None,
                "zscore" => StandardizeMode::ZScore,
                other => return Err(CliError::Config(format!("`standardize`: unknown value {other:?}"))),
            };
            Some(spec)
        }
    };

    let (lo, hi) = get("anchors-target")
        .split_once(',')
        .ok_or_else(|| CliError::Config("`anchors-target`: expected lo,hi".into()))?;
    let birch = BirchParams {
        threshold: match get("birch-threshold") {
            "auto" => Threshold::Auto,
            v => Threshold::Fixed(parse_num("birch-threshold", v)?),
        },
        branching: parse_num("birch-branching", get("birch-branching"))?,
        auto_target: (
            parse_num("anchors-target", lo.trim())?,
            parse_num("anchors-target", hi.trim())?,
        ),
        per_class_auto: parse_bool("per-class-auto", get("per-class-auto"))?,
        ..BirchParams::default()
    };

    let external = opt_path(get("external-coords"));
    let embed = match (get("embed"), external) {
        ("pca", None) => EmbedSpec::Pca,
        ("mds", None) => EmbedSpec::Mds,
        ("external", Some(p)) => EmbedSpec::External(p),
        ("external", None) => return Err(CliError::Config("embed=external needs `external-coords`".into())),
        ("pca" | "mds", Some(_)) => {
            return Err(CliError::Config("`external-coords` is only used with embed=external".into()))
        }
        (other, _) => return Err(CliError::Config(format!("`embed`: unknown value {other:?}"))),
    };

    let (confusion, k_confusion) = match get("k-confusion") {
        "off" => (false, RelationParams::default().k_confusion),
        v => (true, parse_num("k-confusion", v)?),
    };
    let relations = RelationParams {
        k_overlap: parse_num("k-overlap", get("k-overlap"))?,
        k_proximity: parse_num("k-prox", get("k-prox"))?,
        k_confusion,
    };

    let seed: u64 = parse_num("seed", get("seed"))?;
    let geometry = GeometryParams {
        alpha_radius: match get("alpha-radius") {
            "auto" => AlphaRadius::Auto,
            v => AlphaRadius::Fixed(parse_num("alpha-radius", v)?),
        },
        lof_k: match get("lof-k") {
            "auto" => None,
            v => Some(parse_num("lof-k", v)?),
        },
        lof_threshold: parse_num("lof-threshold", get("lof-threshold"))?,
        smoothing_passes: parse_num("smoothing-passes", get("smoothing-passes"))?,
        virtual_cap: parse_num("virtual-cap", get("virtual-cap"))?,
        seed: module_seed(seed, "geometry"),
        ..GeometryParams::default()
    };
    let optimize = OptimizeParams {
        iterations: parse_num("iterations", get("iterations"))?,
        learning_rate: parse_num("lr", get("lr"))?,
        delta: parse_num("delta", get("delta"))?,
        stall_patience: parse_num("stall-patience", get("stall-patience"))?,
        damp_factor: parse_num("damp-factor", get("damp-factor"))?,
        inter_label_only: parse_bool("inter-label-only", get("inter-label-only"))?,
        lazy: parse_bool("lazy", get("lazy"))?,
        seed: module_seed(seed, "optimizer"),
    };
    let render = RenderConfig {
        canvas_px: parse_num("canvas", get("canvas"))?,
        palette: match get("palette") {
            "tab10" => DEFAULT_PALETTE.iter().map(|c| c.to_string()).collect(),
            v => v.split(',').map(|c| c.trim().to_string()).collect(),
        },
        fill_opacity: parse_num("fill-opacity", get("fill-opacity"))?,
        stroke_width_frac: parse_num("stroke-frac", get("stroke-frac"))?,
        legend: parse_bool("legend", get("legend"))?,
        heatmap_colormap: get("colormap").to_string(),
    };

    let cfg = RunConfig {
        ingest,
        birch,
        embed,
        relations,
        confusion,
        geometry,
        optimize,
        render,
        seed,
        threads: parse_num("threads", get("threads"))?,
        out: PathBuf::from(get("out")),
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Checks every component's parameters that do not depend on the data.
    pub fn validate(&self) -> Result<(), CliError> {
        let param = |r: clusterplot::Result<()>| r.map_err(|e| CliError::Config(e.to_string()));
        param(self.birch.validate())?;
        param(self.optimize.validate())?;
        param(self.render.validate())?;
        // Anchor count is unknown here; 3 is the smallest any label can have
        // and only affects count-dependent checks.
        param(self.geometry.validate(3))?;
        let r = &self.relations;
        if r.k_overlap == 0 || r.k_proximity == 0 || r.k_confusion == 0 {
            return Err(CliError::Config("neighbour counts must be >= 1".into()));
        }
        if self.out.as_os_str().is_empty() {
            return Err(CliError::Config("`out` is empty".into()));
        }
        Ok(())
    }

    /// Every key with its resolved value, in table order.
    pub fn to_settings(&self) -> Vec<(&'static str, String)> {
        let mut v: Vec<(&'static str, String)> = Vec::with_capacity(KEYS.len());
        let (input, format, label_col, sidecar, standardize) = match &self.ingest {
            None => (String::new(), "text", "label".to_string(), String::new(), StandardizeMode::None),
            Some(spec) => {
                let (format, label_col, sidecar) = match &spec.format {
                    IngestFormat::DelimitedText { label_column } => (
                        "text",
                        match label_column {
                            LabelColumn::Name(n) => n.clone(),
                            LabelColumn::Index(i) => i.to_string(),
                        },
                        String::new(),
                    ),
                    IngestFormat::RawBinary { sidecar_path } => {
                        ("binary", "label".to_string(), sidecar_path.display().to_string())
                    }
                };
                (spec.path.display().to_string(), format, label_col, sidecar, spec.standardize)
            }
        };
        v.push(("input", input));
        v.push(("format", format.into()));
        v.push(("label-col", label_col));
        v.push(("sidecar", sidecar));
        v.push((
            "standardize",
            match standardize {
                StandardizeMode::None => "none",
                StandardizeMode::ZScore => "zscore",
            }
            .into(),
        ));
        v.push((
            "birch-threshold",
            match self.birch.threshold {
                Threshold::Auto => "auto".into(),
                Threshold::Fixed(t) => t.to_string(),
            },
        ));
        v.push(("birch-branching", self.birch.branching.to_string()));
        let (lo, hi) = self.birch.auto_target;
        v.push(("anchors-target", format!("{lo},{hi}")));
        v.push(("per-class-auto", self.birch.per_class_auto.to_string()));
        let (embed, external) = match &self.embed {
            EmbedSpec::Pca => ("pca", String::new()),
            EmbedSpec::Mds => ("mds", String::new()),
            EmbedSpec::External(p) => ("external", p.display().to_string()),
        };
        v.push(("embed", embed.into()));
        v.push(("external-coords", external));
        v.push(("k-overlap", self.relations.k_overlap.to_string()));
        v.push(("k-prox", self.relations.k_proximity.to_string()));
        v.push((
            "k-confusion",
            if self.confusion {
                self.relations.k_confusion.to_string()
            } else {
                "off".into()
            },
        ));
        let g = &self.geometry;
        v.push((
            "alpha-radius",
            match g.alpha_radius {
                AlphaRadius::Auto => "auto".into(),
                AlphaRadius::Fixed(r) => r.to_string(),
            },
        ));
        v.push(("lof-k", g.lof_k.map_or("auto".into(), |k| k.to_string())));
        v.push(("lof-threshold", g.lof_threshold.to_string()));
        v.push(("smoothing-passes", g.smoothing_passes.to_string()));
        v.push(("virtual-cap", g.virtual_cap.to_string()));
        let o = &self.optimize;
        v.push(("iterations", o.iterations.to_string()));
        v.push(("lr", o.learning_rate.to_string()));
        v.push(("delta", o.delta.to_string()));
        v.push(("stall-patience", o.stall_patience.to_string()));
        v.push(("damp-factor", o.damp_factor.to_string()));
        v.push(("inter-label-only", o.inter_label_only.to_string()));
        v.push(("lazy", o.lazy.to_string()));
        let r = &self.render;
        v.push(("canvas", r.canvas_px.to_string()));
        v.push(("palette", r.palette.join(",")));
        v.push(("fill-opacity", r.fill_opacity.to_string()));
        v.push(("stroke-frac", r.stroke_width_frac.to_string()));
        v.push(("legend", r.legend.to_string()));
        v.push(("colormap", r.heatmap_colormap.clone()));
        v.push(("seed", self.seed.to_string()));
        v.push(("threads", self.threads.to_string()));
        v.push(("out", self.out.display().to_string()));
        debug_assert!(v.iter().map(|(k, _)| *k).eq(KEYS.iter().map(|k| k.name)));
        v
    }

    /// `key=value` text of everything except the execution keys.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for (k, val) in self.to_settings() {
            if !EXECUTION_KEYS.contains(&k) {
                let _ = writeln!(out, "{k}={val}");
            }
        }
        out
    }
}
