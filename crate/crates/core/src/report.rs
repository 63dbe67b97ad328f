//! Run artifacts: the JSON report, CSV series and SVG plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};

/// One acceptance check of an experiment.
#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Verdict {
    /// Passes when `value <= tol`.
    pub fn at_most(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Verdict { name: name.into(), pass: value <= tol, value, tol, note: None }
    }

    /// Passes when `value >= tol`.
    pub fn at_least(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Verdict { name: name.into(), pass: value >= tol, value, tol, note: None }
    }

    pub fn flag(name: impl Into<String>, pass: bool) -> Self {
        Verdict { name: name.into(), pass, value: if pass { 1.0 } else { 0.0 }, tol: 1.0, note: None }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    /// SHA-256 of the resolved config as JSON.
    pub config_sha256: String,
    pub code_version: String,
}

impl Provenance {
    pub fn of(config: &RunConfig) -> Self {
        let bytes = serde_json::to_vec(config).expect("config serializes");
        Provenance {
            config_sha256: hex::encode(Sha256::digest(&bytes)),
            code_version: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub experiment: String,
    pub pass: bool,
    pub checks: Vec<Verdict>,
    pub results: serde_json::Value,
    pub config: RunConfig,
    pub provenance: Provenance,
}

impl Report {
    pub fn new(experiment: &str, config: &RunConfig, checks: Vec<Verdict>, results: serde_json::Value) -> Self {
        Report {
            experiment: experiment.into(),
            pass: checks.iter().all(|c| c.pass),
            checks,
            results,
            config: config.clone(),
            provenance: Provenance::of(config),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// A named table destined for a CSV file.
#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| format_value(*v))).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Shortest round-trip decimal with a `.` separator; integers keep no
/// fractional part.
fn format_value(v: f64) -> String {
    if v.is_finite() && v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:e}")
    }
}

/// A line plot of one or more series sharing the x axis.
#[derive(Clone, Debug)]
pub struct Plot {
    pub name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<(String, Vec<(f64, f64)>)>,
}

const COLORS: [&str; 4] = ["#1f5fa8", "#c0392b", "#2e8b57", "#7d3c98"];

impl Plot {
    pub fn new(name: impl Into<String>, title: impl Into<String>, x: &str, y: &str) -> Self {
        Plot {
            name: name.into(),
            title: title.into(),
            x_label: x.into(),
            y_label: y.into(),
            log_x: false,
            log_y: false,
            series: Vec::new(),
        }
    }

    pub fn log_log(mut self) -> Self {
        self.log_x = true;
        self.log_y = true;
        self
    }

    pub fn add(mut self, label: &str, pts: Vec<(f64, f64)>) -> Self {
        self.series.push((label.into(), pts));
        self
    }

    pub fn to_svg(&self) -> String {
        let (w, h, pad) = (640.0, 420.0, 60.0);
        let tx = |v: f64| if self.log_x { v.abs().max(1e-300).log10() } else { v };
        let ty = |v: f64| if self.log_y { v.abs().max(1e-300).log10() } else { v };
        let pts: Vec<(f64, f64)> =
            self.series.iter().flat_map(|(_, p)| p.iter().map(|&(x, y)| (tx(x), ty(y)))).collect();
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 - x0 < 1e-300 {
            x1 = x0 + 1.0;
        }
        if y1 - y0 < 1e-300 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
        let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
        let axis = |v: f64, log: bool| if log { format!("1e{v:.1}") } else { format!("{v:.4e}") };

        let mut s = String::new();
        let _ =
            writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#,
            w / 2.0,
            esc(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<polyline points="{pad},{} {pad},{} {},{}" fill="none" stroke="black"/>"#,
            pad,
            h - pad,
            w - pad,
            h - pad
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
            w / 2.0,
            h - 16.0,
            esc(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {})">{}</text>"#,
            h / 2.0,
            h / 2.0,
            esc(&self.y_label)
        );
        for (v, x) in [(x0, pad), (x1, w - pad)] {
            let _ = writeln!(
                s,
                r#"<text x="{x}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="10">{}</text>"#,
                h - pad + 14.0,
                axis(v, self.log_x)
            );
        }
        for (v, y) in [(y0, h - pad), (y1, pad)] {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{y}" text-anchor="end" font-family="sans-serif" font-size="10">{}</text>"#,
                pad - 4.0,
                axis(v, self.log_y)
            );
        }
        for (i, (label, p)) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let coords: Vec<String> = p
                .iter()
                .map(|&(x, y)| (tx(x), ty(y)))
                .filter(|q| q.0.is_finite() && q.1.is_finite())
                .map(|(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                coords.join(" ")
            );
            for c in &coords {
                let (cx, cy) = c.split_once(',').expect("pair");
                let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="2.5" fill="{color}"/>"#);
            }
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
                w - pad - 150.0,
                pad + 14.0 * (i as f64 + 1.0),
                esc(label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn esc(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Everything a run produces, written once at the end.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub report: Report,
    pub tables: Vec<Table>,
    pub plots: Vec<Plot>,
}

impl Artifacts {
    /// Writes `<experiment>.json`, one CSV per table and, if enabled, one SVG
    /// per plot. Returns the paths written.
    pub fn write(&self, dir: &Path, plots: bool) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        let json = dir.join(format!("{}.json", self.report.experiment));
        std::fs::write(&json, self.report.to_json())?;
        out.push(json);
        for t in &self.tables {
            let p = dir.join(format!("{}.csv", t.name));
            std::fs::write(&p, t.to_csv()?)?;
            out.push(p);
        }
        if plots {
            for pl in &self.plots {
                let p = dir.join(format!("{}.svg", pl.name));
                std::fs::write(&p, pl.to_svg())?;
                out.push(p);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_dot_decimals() {
        let mut t = Table::new("s", &["radius", "value"]);
        t.push(vec![2.0, 0.15915494309189535]);
        t.push(vec![4.0, -1.5e-12]);
        let s = t.to_csv().unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("radius,value"));
        assert_eq!(lines.next(), Some("2,1.5915494309189535e-1"));
        assert_eq!(lines.next(), Some("4,-1.5e-12"));
        let back: f64 = "1.5915494309189535e-1".parse().unwrap();
        assert_eq!(back, 0.15915494309189535);
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let p =
            Plot::new("p", "a < b", "x", "y").add("one", vec![(1.0, 2.0), (2.0, 3.0)]).add("flat", vec![(1.0, 1.0)]);
        let s = p.to_svg();
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("a &lt; b"));
        assert_eq!(s.matches("<polyline").count(), 3);
    }

    #[test]
    fn verdict_directions() {
        assert!(Verdict::at_most("a", 1e-9, 1e-8).pass);
        assert!(!Verdict::at_most("a", f64::NAN, 1e-8).pass);
        assert!(Verdict::at_least("b", 3.1, 3.0).pass);
    }
}
