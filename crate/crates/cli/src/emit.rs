//! Table, plot, and image emission. Everything written here is
//! byte-deterministic for a fixed experiment configuration: fixed field
//! order, fixed float formatting, no timestamps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use bfpfft_core::sar::DataMatrix;
use sha2::{Digest, Sha256};

pub const VERSION: &str = concat!("bfpfft ", env!("CARGO_PKG_VERSION"));

/// Short stable fingerprint of the canonical parameter string.
pub fn digest(canonical: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let out = hasher.finalize();
    out[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Render a float so tables stay diffable: finite values in fixed
/// scientific form, specials spelled out.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.6e}")
    }
}

/// A table destined for CSV and JSON mirrors.
pub struct Table {
    pub experiment: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub meta: Vec<(String, String)>,
}

impl Table {
    pub fn new(experiment: &str, columns: Vec<&'static str>) -> Self {
        Table {
            experiment: experiment.to_string(),
            columns,
            rows: Vec::new(),
            meta: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl Into<String>) {
        self.meta.push((key.to_string(), value.into()));
    }

    pub fn csv(&self) -> String {
        let mut out = String::new();
        let mut header: Vec<&str> = self.columns.clone();
        header.push("config_digest");
        header.push("version");
        let digest = self
            .meta
            .iter()
            .find(|(k, _)| k == "config_digest")
            .map(|(_, v)| v.clone())
            .unwrap_or_default();
        writeln!(out, "{}", header.join(",")).unwrap();
        for row in &self.rows {
            let mut cells = row.clone();
            cells.push(digest.clone());
            cells.push(VERSION.to_string());
            writeln!(out, "{}", cells.join(",")).unwrap();
        }
        out
    }

    pub fn json(&self) -> String {
        let mut meta = serde_json::Map::new();
        meta.insert("experiment".into(), self.experiment.clone().into());
        meta.insert("version".into(), VERSION.into());
        for (k, v) in &self.meta {
            meta.insert(k.clone(), v.clone().into());
        }
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = serde_json::Map::new();
                for (col, cell) in self.columns.iter().zip(row) {
                    obj.insert((*col).into(), cell.clone().into());
                }
                serde_json::Value::Object(obj)
            })
            .collect();
        let doc = serde_json::json!({ "meta": meta, "rows": rows });
        serde_json::to_string_pretty(&doc).expect("json encoding")
    }
}

/// Which artifact kinds to write.
#[derive(Debug, Clone, Copy)]
pub struct EmitSet {
    pub csv: bool,
    pub json: bool,
    pub svg: bool,
}

impl EmitSet {
    pub fn parse(s: &str) -> Result<EmitSet, String> {
        let mut set = EmitSet {
            csv: false,
            json: false,
            svg: false,
        };
        for part in s.split(',').filter(|p| !p.is_empty()) {
            match part.trim() {
                "csv" => set.csv = true,
                "json" => set.json = true,
                "svg" => set.svg = true,
                other => return Err(format!("unknown emit kind '{other}' (csv, json, svg)")),
            }
        }
        Ok(set)
    }
}

pub fn write_table(out_dir: &Path, name: &str, table: &Table, emit: EmitSet) -> std::io::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if emit.csv {
        let p = out_dir.join(format!("{name}.csv"));
        fs::write(&p, table.csv())?;
        written.push(p);
    }
    if emit.json {
        let p = out_dir.join(format!("{name}.json"));
        fs::write(&p, table.json())?;
        written.push(p);
    }
    Ok(written)
}

/// Horizontal-bar SVG on a log magnitude axis with an optional ceiling
/// line (the half-precision maximum, in the trace plots).
pub fn bar_chart_svg(
    title: &str,
    labels: &[String],
    values: &[f64],
    ceiling: Option<f64>,
) -> String {
    let width = 860.0;
    let bar_h = 22.0;
    let top = 48.0;
    let left = 240.0;
    let height = top + labels.len() as f64 * (bar_h + 6.0) + 30.0;
    let floor_log = -6.0f64;
    let max_log = values
        .iter()
        .filter(|v| v.is_finite() && **v > 0.0)
        .map(|v| v.log10())
        .fold(8.0f64, f64::max)
        .max(ceiling.map_or(5.0, |c| c.log10() + 1.0));
    let span = max_log - floor_log;
    let x_of = |v: f64| -> f64 {
        if !v.is_finite() {
            return width - 20.0;
        }
        if v <= 0.0 {
            return left;
        }
        left + (v.log10().clamp(floor_log, max_log) - floor_log) / span * (width - left - 40.0)
    };

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="monospace" font-size="12">"#
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="12" y="24" font-size="15" font-weight="bold">{title}</text>"#
    )
    .unwrap();
    for (i, (label, &v)) in labels.iter().zip(values).enumerate() {
        let y = top + i as f64 * (bar_h + 6.0);
        let w = (x_of(v) - left).max(1.0);
        let color = if !v.is_finite() {
            "#c0392b"
        } else if ceiling.is_some_and(|c| v > c) {
            "#e67e22"
        } else {
            "#2e6da4"
        };
        writeln!(
            svg,
            r##"<text x="12" y="{:.1}">{label}</text><rect x="{left}" y="{:.1}" width="{w:.1}" height="{bar_h}" fill="{color}"/><text x="{:.1}" y="{:.1}">{}</text>"##,
            y + bar_h - 6.0,
            y,
            left + w + 6.0,
            y + bar_h - 6.0,
            if v.is_finite() { format!("{v:.4e}") } else { "non-finite".into() },
        )
        .unwrap();
    }
    if let Some(c) = ceiling {
        let x = x_of(c);
        writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#c0392b" stroke-width="2" stroke-dasharray="6,4"/><text x="{:.1}" y="{:.1}" fill="#c0392b">{c:.0}</text>"##,
            top - 8.0,
            height - 24.0,
            x + 4.0,
            top - 12.0,
        )
        .unwrap();
    }
    writeln!(svg, "</svg>").unwrap();
    svg
}

/// Log-magnitude grayscale PNG of a focused image (60 dB display range,
/// NaN rendered white).
pub fn write_magnitude_png(path: &Path, image: &DataMatrix) -> std::io::Result<()> {
    let peak = image.max_abs().max(f64::MIN_POSITIVE);
    let floor_db = -60.0;
    let mut img = image::GrayImage::new(image.cols() as u32, image.rows() as u32);
    for r in 0..image.rows() {
        for c in 0..image.cols() {
            let z = image.at(r, c);
            let px = if z.re.is_nan() || z.im.is_nan() {
                255
            } else {
                let db = 20.0 * (z.norm() / peak).max(1e-30).log10();
                let t = ((db - floor_db) / -floor_db).clamp(0.0, 1.0);
                (t * 240.0) as u8
            };
            img.put_pixel(c as u32, r as u32, image::Luma([px]));
        }
    }
    img.save(path).map_err(std::io::Error::other)
}
