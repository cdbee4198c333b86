//! CSV tables, JSON manifests and log-log SVG plots.
//!
//! CSV files carry only deterministic quantities; wall times go to the manifest.

use crate::error::Result;
use crate::fit::LineFit;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Csv, Format::Json, Format::Svg];
}

/// One CSV file.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip text of a float, exponent form outside `[1e-4, 1e15)`; empty for NaN.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v.is_nan() {
        String::new()
    } else if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Points of a log-log plot and the fit drawn through them.
#[derive(Clone, Debug, PartialEq)]
pub struct LogLogPlot {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
    pub fit: Option<LineFit>,
}

/// Anything [`emit`] can write.
pub trait Artifact {
    fn tables(&self) -> Vec<Table>;
    fn plots(&self) -> Vec<LogLogPlot> {
        Vec::new()
    }
    /// Full report for the JSON output.
    fn report_json(&self) -> serde_json::Value;
    /// True when there is nothing but configuration to write.
    fn is_empty(&self) -> bool {
        self.tables().iter().all(|t| t.rows.is_empty())
    }
}

/// Several artifacts written into one directory.
pub struct Bundle<'a>(pub Vec<&'a dyn Artifact>);

impl Artifact for Bundle<'_> {
    fn tables(&self) -> Vec<Table> {
        self.0.iter().flat_map(|a| a.tables()).collect()
    }

    fn plots(&self) -> Vec<LogLogPlot> {
        self.0.iter().flat_map(|a| a.plots()).collect()
    }

    fn report_json(&self) -> serde_json::Value {
        serde_json::Value::Array(self.0.iter().map(|a| a.report_json()).collect())
    }
}

/// Writes `manifest.json` and, unless the report is empty, the requested formats.
///
/// `manifest` should hold every setting that affected the results. Returns
/// the written paths in a fixed order.
pub fn emit(
    artifact: &dyn Artifact,
    formats: &[Format],
    manifest: serde_json::Value,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let empty = artifact.is_empty();
    let mut m = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "empty": empty,
    });
    if let (Some(obj), serde_json::Value::Object(extra)) = (m.as_object_mut(), manifest) {
        obj.extend(extra);
    }
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&m)?)?;
    written.push(path);
    if empty {
        return Ok(written);
    }
    if formats.contains(&Format::Csv) {
        for t in artifact.tables() {
            let path = dir.join(format!("{}.csv", t.name));
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(&t.header)?;
            for r in &t.rows {
                w.write_record(r)?;
            }
            w.flush()?;
            written.push(path);
        }
    }
    if formats.contains(&Format::Json) {
        let path = dir.join("report.json");
        std::fs::write(
            &path,
            serde_json::to_string_pretty(&artifact.report_json())?,
        )?;
        written.push(path);
    }
    if formats.contains(&Format::Svg) {
        for p in artifact.plots() {
            if let Some(svg) = render_svg(&p) {
                let path = dir.join(format!("{}.svg", p.name));
                std::fs::write(&path, svg)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

const W: f64 = 480.0;
const H: f64 = 360.0;
const MARGIN: f64 = 56.0;

/// Log-log plot with one `<circle>` per point and a single `<line>` for the fit.
///
/// Frame and ticks are paths so that the fit is the only line element. `None`
/// when there is no fit or a point is not positive.
pub fn render_svg(plot: &LogLogPlot) -> Option<String> {
    let fit = plot.fit.as_ref()?;
    if plot.points.is_empty() || plot.points.iter().any(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = plot.points.iter().map(|p| p.0.log10()).collect();
    let ly: Vec<f64> = plot.points.iter().map(|p| p.1.log10()).collect();
    let (x0, x1) = padded(&lx);
    // the fit is in natural logs; convert to base 10 along the x range
    let fit_at = |x: f64| {
        (fit.slope * x * std::f64::consts::LN_10 + fit.intercept) / std::f64::consts::LN_10
    };
    let mut ys = ly.clone();
    ys.extend([fit_at(x0), fit_at(x1)]);
    let (y0, y1) = padded(&ys);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path class="frame" d="M{m} {m} V{b} H{r}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    );
    let mut ticks = String::new();
    for d in (x0.ceil() as i32)..=(x1.floor() as i32) {
        let x = sx(d as f64);
        let _ = write!(ticks, "M{x:.2} {} v5 ", H - MARGIN);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{}" font-size="11" text-anchor="middle">1e{d}</text>"#,
            H - MARGIN + 18.0
        );
    }
    for d in (y0.ceil() as i32)..=(y1.floor() as i32) {
        let y = sy(d as f64);
        let _ = write!(ticks, "M{MARGIN} {y:.2} h-5 ");
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" font-size="11" text-anchor="end">1e{d}</text>"#,
            MARGIN - 8.0,
            y + 4.0
        );
    }
    if !ticks.is_empty() {
        let _ = writeln!(
            s,
            r#"<path class="ticks" d="{}" stroke="black"/>"#,
            ticks.trim_end()
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 12.0,
        escape(&plot.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(&plot.y_label)
    );
    let _ = writeln!(
        s,
        r#"<line class="fit" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="crimson" stroke-width="1.5"/>"#,
        sx(x0),
        sy(fit_at(x0)),
        sx(x1),
        sy(fit_at(x1))
    );
    for (x, y) in lx.iter().zip(&ly) {
        let _ = writeln!(
            s,
            r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="4" fill="steelblue"/>"#,
            sx(*x),
            sy(*y)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="end">slope {:.3}</text>"#,
        W - MARGIN,
        MARGIN - 12.0,
        fit.slope
    );
    s.push_str("</svg>\n");
    Some(s)
}

fn padded(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pad = ((hi - lo) * 0.08).max(0.05);
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit;

    struct Dummy(Vec<f64>);

    impl Artifact for Dummy {
        fn tables(&self) -> Vec<Table> {
            let mut t = Table::new("t", &["x"]);
            for v in &self.0 {
                t.push(vec![num(*v)]);
            }
            vec![t]
        }
        fn report_json(&self) -> serde_json::Value {
            serde_json::json!(self.0)
        }
    }

    #[test]
    fn empty_report_writes_only_the_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let out = emit(
            &Dummy(vec![]),
            &Format::ALL,
            serde_json::json!({"tol": 1e-9}),
            dir.path(),
        )
        .unwrap();
        assert_eq!(out, vec![dir.path().join("manifest.json")]);
        let m: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&out[0]).unwrap()).unwrap();
        assert_eq!(m["tol"], 1e-9);
        assert_eq!(m["empty"], true);
    }

    #[test]
    fn svg_has_one_line_and_one_point_each() {
        let xs = [0.1, 0.05, 0.025, 0.0125];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let plot = LogLogPlot {
            name: "p".into(),
            x_label: "eps".into(),
            y_label: "err <sup>".into(),
            points: xs.iter().cloned().zip(ys.iter().cloned()).collect(),
            fit: fit::log_log(&xs, &ys),
        };
        let svg = render_svg(&plot).unwrap();
        assert_eq!(svg.matches("<line").count(), 1);
        assert_eq!(svg.matches("<circle").count(), 4);
        assert!(svg.contains("err &lt;sup&gt;"));
        // the fit passes through the points
        assert!(svg.contains("slope 1.000"));
        let no_fit = LogLogPlot { fit: None, ..plot };
        assert!(render_svg(&no_fit).is_none());
    }

    #[test]
    fn numbers_round_trip() {
        for v in [
            0.1,
            1e-300,
            -3.25,
            12345.678901234567,
            8.005932084973442e-16,
            0.0,
        ] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(f64::NAN), "");
    }
}
