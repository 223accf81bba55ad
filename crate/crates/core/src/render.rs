//! SVG output: the blob plot and matrix heatmaps.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{BlobGeometry, Loop};
use crate::relations::RelationMatrix;
use crate::scalar::Scalar;

/// Categorical palette: blue, orange, green, red, purple, brown, pink, grey,
/// pear, light blue.
pub const DEFAULT_PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];

const VIRIDIS: [[u8; 3]; 5] = [
    [0x44, 0x01, 0x54],
    [0x3b, 0x52, 0x8b],
    [0x21, 0x91, 0x8c],
    [0x5e, 0xc9, 0x62],
    [0xfd, 0xe7, 0x25],
];
const GREYS: [[u8; 3]; 5] = [
    [0xff, 0xff, 0xff],
    [0xc0, 0xc0, 0xc0],
    [0x80, 0x80, 0x80],
    [0x40, 0x40, 0x40],
    [0x00, 0x00, 0x00],
];

/// Fraction of the canvas left blank around the canonical square.
const PLOT_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct RenderConfig {
    pub canvas_px: u32,
    pub palette: Vec<String>,
    pub fill_opacity: f64,
    pub stroke_width_frac: f64,
    pub legend: bool,
    pub heatmap_colormap: String,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            canvas_px: 1000,
            palette: DEFAULT_PALETTE.iter().map(|s| s.to_string()).collect(),
            fill_opacity: 0.25,
            stroke_width_frac: 0.008,
            legend: true,
            heatmap_colormap: "viridis".into(),
        }
    }
}

fn valid_hex(c: &str) -> bool {
    c.len() == 7 && c.starts_with('#') && c[1..].chars().all(|ch| ch.is_ascii_hexdigit())
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.canvas_px == 0 {
            return Err(Error::Param("canvas must be > 0 pixels".into()));
        }
        if self.palette.is_empty() {
            return Err(Error::Param("palette is empty".into()));
        }
        if let Some(bad) = self.palette.iter().find(|c| !valid_hex(c)) {
            return Err(Error::Param(format!("palette colour {bad:?} is not #rrggbb")));
        }
        if !(0.0..=1.0).contains(&self.fill_opacity) {
            return Err(Error::Param(format!("fill opacity {} outside [0, 1]", self.fill_opacity)));
        }
        if !(self.stroke_width_frac > 0.0 && self.stroke_width_frac.is_finite()) {
            return Err(Error::Param("stroke fraction must be > 0".into()));
        }
        colormap(&self.heatmap_colormap)?;
        Ok(())
    }

    /// Colour of label `k`; the palette cycles.
    pub fn color(&self, k: usize) -> &str {
        &self.palette[k % self.palette.len()]
    }
}

fn colormap(name: &str) -> Result<&'static [[u8; 3]; 5]> {
    match name {
        "viridis" => Ok(&VIRIDIS),
        "greys" => Ok(&GREYS),
        other => Err(Error::Param(format!("unknown colormap {other:?} (viridis, greys)"))),
    }
}

/// Linear interpolation over the 5-stop ramp, `v` clamped to `[0, 1]`.
pub fn ramp(name: &str, v: f64) -> Result<[u8; 3]> {
    let stops = colormap(name)?;
    let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let pos = v * 4.0;
    let k = (pos.floor() as usize).min(3);
    let t = pos - k as f64;
    let mut out = [0u8; 3];
    for c in 0..3 {
        let (a, b) = (stops[k][c] as f64, stops[k + 1][c] as f64);
        out[c] = (a + (b - a) * t).round() as u8;
    }
    Ok(out)
}

pub fn hex(rgb: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", rgb[0], rgb[1], rgb[2])
}

/// Up to three decimals, trailing zeros trimmed.
pub fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&apos;")
}

/// What the plot needs of a blob.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotBlob<T> {
    pub label: usize,
    pub area: T,
    pub outline: Vec<Loop<T>>,
}

impl<T: Scalar> From<&BlobGeometry<T>> for PlotBlob<T> {
    fn from(b: &BlobGeometry<T>) -> Self {
        Self {
            label: b.label,
            area: b.area,
            outline: b.outline.clone(),
        }
    }
}

fn header(out: &mut String, w: u32, h: u32) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(out, r##"<rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>"##);
}

/// Blob plot of blob geometries.
pub fn render_clusterplot<T: Scalar>(
    blobs: &[BlobGeometry<T>],
    class_names: &[String],
    config: &RenderConfig,
) -> Result<String> {
    let plot: Vec<PlotBlob<T>> = blobs.iter().map(PlotBlob::from).collect();
    render_outlines(&plot, class_names, config)
}

/// Blob plot: fills first (largest area behind), then strokes in label
/// order, then the legend.
pub fn render_outlines<T: Scalar>(
    blobs: &[PlotBlob<T>],
    class_names: &[String],
    config: &RenderConfig,
) -> Result<String> {
    config.validate()?;
    if blobs.is_empty() {
        return Err(Error::Param("nothing to render".into()));
    }
    let size = config.canvas_px as f64;
    let margin = size * PLOT_MARGIN;
    let scale = (size - 2.0 * margin) / 100.0;
    let path = |loops: &[Loop<T>]| {
        let mut d = String::new();
        for l in loops.iter().filter(|l| l.len() >= 3) {
            for (k, p) in l.iter().enumerate() {
                let x = margin + p.x.as_f64() * scale;
                let y = margin + (100.0 - p.y.as_f64()) * scale;
                let _ = write!(d, "{}{} {} ", if k == 0 { "M" } else { "L" }, num(x), num(y));
            }
            d.push('Z');
            d.push(' ');
        }
        d.trim_end().to_string()
    };

    let mut drawable: Vec<(&PlotBlob<T>, String)> = Vec::new();
    for b in blobs {
        let d = path(&b.outline);
        if d.is_empty() {
            log::warn!("blob of label {} has an empty outline; skipped", b.label);
            continue;
        }
        drawable.push((b, d));
    }

    let mut out = String::new();
    header(&mut out, config.canvas_px, config.canvas_px);
    let mut by_area: Vec<usize> = (0..drawable.len()).collect();
    by_area.sort_by(|&a, &b| {
        drawable[b]
            .0
            .area
            .partial_cmp(&drawable[a].0.area)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(drawable[a].0.label.cmp(&drawable[b].0.label))
    });
    out.push_str("<g id=\"fills\">\n");
    for &k in &by_area {
        let (b, d) = &drawable[k];
        let _ = writeln!(
            out,
            r#"<path class="fill" data-label="{}" d="{d}" fill="{}" fill-opacity="{}" fill-rule="evenodd" stroke="none"/>"#,
            b.label,
            config.color(b.label),
            num(config.fill_opacity)
        );
    }
    out.push_str("</g>\n<g id=\"strokes\">\n");
    let mut by_label: Vec<usize> = (0..drawable.len()).collect();
    by_label.sort_by_key(|&k| drawable[k].0.label);
    let width = num(config.stroke_width_frac * size);
    for &k in &by_label {
        let (b, d) = &drawable[k];
        let _ = writeln!(
            out,
            r#"<path class="stroke" data-label="{}" d="{d}" fill="none" stroke="{}" stroke-width="{width}" stroke-linejoin="round"/>"#,
            b.label,
            config.color(b.label)
        );
    }
    out.push_str("</g>\n");
    if config.legend {
        let row = (size * 0.03).max(10.0);
        let font = num(row * 0.7);
        let mut labels: Vec<usize> = drawable.iter().map(|(b, _)| b.label).collect();
        labels.sort_unstable();
        labels.dedup();
        out.push_str("<g id=\"legend\">\n");
        for (r, &l) in labels.iter().enumerate() {
            let y = margin * 0.5 + r as f64 * row;
            let name = class_names.get(l).cloned().unwrap_or_else(|| l.to_string());
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
                num(margin * 0.5),
                num(y),
                num(row * 0.7),
                num(row * 0.7),
                config.color(l)
            );
            let _ = writeln!(
                out,
                r##"<text x="{}" y="{}" font-family="sans-serif" font-size="{font}" fill="#000000">{}</text>"##,
                num(margin * 0.5 + row),
                num(y + row * 0.6),
                escape(&name)
            );
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Cells narrower than this many pixels carry no value annotation.
const MIN_ANNOTATED_CELL: f64 = 20.0;
/// Rows narrower than this carry no name.
const MIN_LABELED_CELL: f64 = 8.0;

/// Heatmap of a square matrix with 2-decimal annotations. Large matrices
/// (anchor-level ones, typically) drop annotations, then names, once cells
/// get too small to hold them.
pub fn render_heatmap(
    matrix: &RelationMatrix,
    class_names: &[String],
    title: &str,
    config: &RenderConfig,
) -> Result<String> {
    config.validate()?;
    let m = matrix.n();
    if class_names.len() != m {
        return Err(Error::Shape(format!("{m}x{m} matrix with {} names", class_names.len())));
    }
    let size = config.canvas_px as f64;
    let label_band = size * 0.15;
    let cell = (size - label_band - size * 0.03) / m.max(1) as f64;
    let font = num((cell * 0.25).clamp(6.0, size * 0.03));
    let mut out = String::new();
    header(&mut out, config.canvas_px, config.canvas_px);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="{}" text-anchor="middle">{}</text>"#,
        num(size / 2.0),
        num(label_band * 0.3),
        num(size * 0.025),
        escape(title)
    );
    out.push_str("<g id=\"cells\">\n");
    for i in 0..m {
        for j in 0..m {
            let v = matrix.get(i, j);
            let rgb = ramp(&config.heatmap_colormap, v)?;
            let lum = (0.2126 * rgb[0] as f64 + 0.7152 * rgb[1] as f64 + 0.0722 * rgb[2] as f64) / 255.0;
            let text = if lum > 0.5 { "#000000" } else { "#ffffff" };
            let (x, y) = (label_band + j as f64 * cell, label_band + i as f64 * cell);
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}" data-row="{i}" data-col="{j}"/>"#,
                num(x),
                num(y),
                num(cell),
                num(cell),
                hex(rgb)
            );
            if cell < MIN_ANNOTATED_CELL {
                continue;
            }
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="{font}" text-anchor="middle" dominant-baseline="central" fill="{text}">{v:.2}</text>"#,
                num(x + cell / 2.0),
                num(y + cell / 2.0)
            );
        }
    }
    out.push_str("</g>\n<g id=\"labels\">\n");
    for (k, name) in class_names.iter().enumerate().filter(|_| cell >= MIN_LABELED_CELL) {
        let c = label_band + (k as f64 + 0.5) * cell;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="{font}" text-anchor="end" dominant-baseline="central">{}</text>"#,
            num(label_band - 6.0),
            num(c),
            escape(name)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="{font}" text-anchor="middle">{}</text>"#,
            num(c),
            num(label_band - 6.0),
            escape(name)
        );
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

/// Text dump of the final blobs, read back by [`parse_geometry`]. The first
/// record holds the class names; every further record is `area,label,value`
/// or a polygon loop `kind,label,index,x0,y0,x1,y1,...` where `kind` is
/// `outline` or `boundary` (index = loop number) or `cell` (index = anchor
/// id, one record per loop of the cell).
pub fn geometry_dump<T: Scalar>(blobs: &[BlobGeometry<T>], class_names: &[String]) -> String {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    let rec = |w: &mut csv::Writer<Vec<u8>>, fields: Vec<String>| w.write_record(fields).expect("in-memory write");
    rec(&mut w, class_names.to_vec());
    for b in blobs {
        rec(&mut w, vec!["area".into(), b.label.to_string(), b.area.to_string()]);
        let loops = b
            .outline
            .iter()
            .enumerate()
            .map(|(k, l)| ("outline", k, l))
            .chain(b.boundary.iter().enumerate().map(|(k, l)| ("boundary", k, l)))
            .chain(
                b.inlier_anchor_ids
                    .iter()
                    .zip(&b.cells)
                    .flat_map(|(&a, c)| c.loops.iter().map(move |l| ("cell", a, l))),
            );
        for (kind, k, l) in loops {
            let mut f = vec![kind.to_string(), b.label.to_string(), k.to_string()];
            for p in l {
                f.push(p.x.to_string());
                f.push(p.y.to_string());
            }
            rec(&mut w, f);
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// Inverse of [`geometry_dump`]; `origin` names the source in errors.
pub fn parse_geometry(text: &str, origin: &str) -> Result<(Vec<String>, Vec<PlotBlob<f64>>)> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let perr = |line: usize, msg: String| Error::Parse {
        path: origin.to_string(),
        line,
        column: 1,
        msg,
    };
    let mut names = None;
    let mut blobs: Vec<PlotBlob<f64>> = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| perr(line, e.to_string()))?;
        let Some(names) = names.as_ref() else {
            names = Some(rec.iter().map(String::from).collect::<Vec<String>>());
            continue;
        };
        let names: &Vec<String> = names;
        let field = |k: usize| rec.get(k).ok_or_else(|| perr(line, format!("missing field {}", k + 1)));
        let label: usize = field(1)?.parse().map_err(|_| perr(line, "bad label".into()))?;
        if label >= names.len() {
            return Err(perr(line, format!("label {label} with {} classes", names.len())));
        }
        let idx = match blobs.iter().position(|b| b.label == label) {
            Some(k) => k,
            None => {
                blobs.push(PlotBlob {
                    label,
                    area: 0.0,
                    outline: Vec::new(),
                });
                blobs.len() - 1
            }
        };
        let num = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| perr(line, format!("bad number {s:?}")));
        match field(0)? {
            "area" => blobs[idx].area = num(field(2)?)?,
            "outline" => {
                let coords = rec.iter().skip(3).map(num).collect::<Result<Vec<f64>>>()?;
                if coords.len() % 2 != 0 {
                    return Err(perr(line, "odd coordinate count".into()));
                }
                blobs[idx].outline.push(coords.chunks(2).map(|c| crate::point::Point2::new(c[0], c[1])).collect());
            }
            "boundary" | "cell" => {}
            other => return Err(perr(line, format!("unknown record kind {other:?}"))),
        }
    }
    let names = names.ok_or_else(|| perr(1, "empty geometry file".into()))?;
    Ok((names, blobs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point::Point2;

    fn square(x: f64, y: f64, s: f64) -> Loop<f64> {
        vec![
            Point2::new(x, y),
            Point2::new(x + s, y),
            Point2::new(x + s, y + s),
            Point2::new(x, y + s),
        ]
    }

    fn two_blobs() -> Vec<PlotBlob<f64>> {
        vec![
            PlotBlob {
                label: 0,
                area: 100.0,
                outline: vec![square(10.0, 10.0, 10.0)],
            },
            PlotBlob {
                label: 1,
                area: 400.0,
                outline: vec![square(60.0, 60.0, 20.0)],
            },
        ]
    }

    fn names() -> Vec<String> {
        vec!["a".into(), "b & c".into()]
    }

    #[test]
    fn structure_and_ordering() {
        let svg = render_outlines(&two_blobs(), &names(), &RenderConfig::default()).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let paths: Vec<roxmltree::Node> = doc.descendants().filter(|n| n.has_tag_name("path")).collect();
        let classes: Vec<&str> = paths.iter().map(|n| n.attribute("class").unwrap()).collect();
        assert_eq!(classes, vec!["fill", "fill", "stroke", "stroke"]);
        // Larger blob (label 1) is filled first.
        assert_eq!(paths[0].attribute("data-label"), Some("1"));
        assert_eq!(paths[2].attribute("data-label"), Some("0"));
        assert_eq!(paths[2].attribute("stroke-width"), Some("8"));
        assert_eq!(paths[0].attribute("fill-rule"), Some("evenodd"));
        assert!(doc.descendants().any(|n| n.attribute("id") == Some("legend")));
        for p in &paths {
            let d = p.attribute("d").unwrap();
            assert!(d.chars().filter(|c| c.is_ascii_alphabetic()).all(|c| "MLZ".contains(c)));
        }
        assert_eq!(svg, render_outlines(&two_blobs(), &names(), &RenderConfig::default()).unwrap());
    }

    #[test]
    fn y_axis_is_flipped() {
        let svg = render_outlines(&two_blobs()[..1], &names(), &RenderConfig::default()).unwrap();
        // (10, 10) → x = 50 + 10·9 = 140, y = 50 + 90·9 = 860.
        assert!(svg.contains("M140 860 "));
    }

    #[test]
    fn empty_outline_skipped_and_palette_cycles() {
        let mut blobs = two_blobs();
        blobs[0].outline.clear();
        let cfg = RenderConfig {
            palette: vec!["#000000".into()],
            legend: false,
            ..RenderConfig::default()
        };
        let svg = render_outlines(&blobs, &names(), &cfg).unwrap();
        assert_eq!(svg.matches("<path").count(), 2);
        assert!(!svg.contains("legend"));
        assert_eq!(cfg.color(7), "#000000");
        assert_eq!(RenderConfig::default().color(11), "#ff7f0e");
    }

    #[test]
    fn ramp_values() {
        assert_eq!(hex(ramp("viridis", 0.0).unwrap()), "#440154");
        assert_eq!(hex(ramp("viridis", 0.5).unwrap()), "#21918c");
        assert_eq!(hex(ramp("viridis", 1.0).unwrap()), "#fde725");
        assert_eq!(ramp("viridis", 0.125).unwrap(), [0x40, 0x2a, 0x70]);
        assert!(ramp("jet", 0.1).is_err());
    }

    #[test]
    fn heatmap_identity() {
        let svg = render_heatmap(&RelationMatrix::identity(3), &["x".into(), "y".into(), "z".into()], "t", &RenderConfig::default()).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let cells: Vec<roxmltree::Node> = doc
            .descendants()
            .filter(|n| n.has_tag_name("rect") && n.attribute("data-row").is_some())
            .collect();
        assert_eq!(cells.len(), 9);
        for c in cells {
            let diag = c.attribute("data-row") == c.attribute("data-col");
            assert_eq!(c.attribute("fill"), Some(if diag { "#fde725" } else { "#440154" }));
        }
    }

    #[test]
    fn annotation_rounding() {
        let m = RelationMatrix::from_vec(1, vec![0.456]).unwrap();
        let svg = render_heatmap(&m, &["only".into()], "t", &RenderConfig::default()).unwrap();
        assert!(svg.contains(">0.46</text>"));
    }

    #[test]
    fn large_heatmap_drops_annotations() {
        let names: Vec<String> = (0..60).map(|k| format!("a{k}")).collect();
        let svg = render_heatmap(&RelationMatrix::identity(60), &names, "anchors", &RenderConfig::default()).unwrap();
        roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(svg.matches("<rect").count(), 1 + 3600);
        assert!(!svg.contains(">1.00<"));
        assert!(svg.contains(">a59<"));
    }

    #[test]
    fn number_format() {
        assert_eq!(num(8.0), "8");
        assert_eq!(num(1.23456), "1.235");
        assert_eq!(num(-0.0001), "0");
        assert_eq!(num(0.25), "0.25");
    }

    #[test]
    fn bad_config() {
        let cfg = RenderConfig {
            palette: vec!["red".into()],
            ..RenderConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = RenderConfig {
            stroke_width_frac: 0.0,
            ..RenderConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
    #[test]
    fn geometry_round_trip() {
        let geoms: Vec<BlobGeometry<f64>> = two_blobs()
            .into_iter()
            .map(|b| BlobGeometry {
                label: b.label,
                anchor_ids: vec![b.label],
                lof_scores: vec![1.0],
                inlier_anchor_ids: vec![b.label],
                outlier_anchor_ids: Vec::new(),
                reassigned: Vec::new(),
                boundary: b.outline.clone(),
                alpha_radius: None,
                cells: vec![crate::geometry::Cell {
                    site: b.outline[0][0],
                    convex: b.outline[0].clone(),
                    loops: b.outline.clone(),
                    area: b.area,
                }],
                outline: b.outline,
                area: b.area + 0.1,
            })
            .collect();
        let names = vec!["a".to_string(), "b, c".to_string()];
        let text = geometry_dump(&geoms, &names);
        assert_eq!(text.lines().filter(|l| l.starts_with("cell,1,1,")).count(), 1);
        assert_eq!(text.lines().filter(|l| l.starts_with("boundary,")).count(), 2);
        let (back_names, back) = parse_geometry(&text, "mem").unwrap();
        assert_eq!(back_names, names);
        let want: Vec<PlotBlob<f64>> = geoms.iter().map(PlotBlob::from).collect();
        assert_eq!(back, want);
        assert!(parse_geometry("a\nbogus,0,1\n", "mem").is_err());
        assert!(parse_geometry("a\narea,3,1\n", "mem").is_err());
    }
}
