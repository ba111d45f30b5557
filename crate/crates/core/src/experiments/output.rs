//! Reports, CSV tables, manifests and optional SVG plots.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{ExperimentConfig, ExperimentKind};
use crate::Result;

/// Bumped whenever a CSV header or the manifest layout changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        let row: Vec<String> = row.into_iter().collect();
        assert_eq!(row.len(), self.header.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].parse().unwrap_or(f64::NAN)).collect())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Everything an experiment writes, apart from its manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub kind: ExperimentKind,
    /// `key: value` lines for `summary.txt`.
    pub summary: Vec<(String, String)>,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn new(kind: ExperimentKind) -> Self {
        Report { kind, summary: Vec::new(), tables: Vec::new() }
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.summary {
            let _ = writeln!(s, "{k}: {v}");
        }
        s
    }
}

pub fn manifest_text(kind: ExperimentKind, cfg: &ExperimentConfig) -> String {
    format!(
        "# rwre run manifest, schema {SCHEMA_VERSION}\n\
         # replica streams: derive_seed(master_seed, tag(experiment), n, replica)\n\
         experiment = {}\nversion = {}\n{}",
        kind.name(),
        env!("CARGO_PKG_VERSION"),
        cfg.to_text()
    )
}

/// Write `manifest.txt`, `summary.txt`, one CSV per table and, if enabled,
/// one SVG per table. Returns the written paths.
pub fn write_report(dir: &Path, cfg: &ExperimentConfig, report: &Report) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, body)?;
        out.push(p);
        Ok(())
    };
    put("manifest.txt".into(), manifest_text(report.kind, cfg))?;
    put("summary.txt".into(), report.summary_text())?;
    for t in &report.tables {
        put(format!("{}.csv", t.name), t.to_csv()?)?;
        if cfg.svg {
            if let Some(svg) = svg_plot(t) {
                put(format!("{}.svg", t.name), svg)?;
            }
        }
    }
    Ok(out)
}

/// Scatter-and-line plot of every numeric column against the first one.
pub fn svg_plot(t: &Table) -> Option<String> {
    let xs = t.column(&t.header[0])?;
    let series: Vec<(String, Vec<f64>)> = t.header[1..]
        .iter()
        .filter_map(|h| {
            let c = t.column(h)?;
            c.iter().all(|v| v.is_finite()).then(|| (h.clone(), c))
        })
        .collect();
    if xs.is_empty() || !xs.iter().all(|v| v.is_finite()) || series.is_empty() {
        return None;
    }
    let (w, h, pad) = (640.0, 400.0, 40.0);
    let span = |v: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) }
    };
    let (x0, x1) = span(&mut xs.iter().copied());
    let (y0, y1) = span(&mut series.iter().flat_map(|s| s.1.iter().copied()));
    let px = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let py = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n");
    let _ = writeln!(s, "<text x=\"{pad}\" y=\"20\" font-size=\"14\">{}</text>", t.name);
    let _ = writeln!(s, "<rect x=\"{pad}\" y=\"{pad}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#999\"/>", w - 2.0 * pad, h - 2.0 * pad);
    for (i, (name, ys)) in series.iter().enumerate() {
        let c = colors[i % colors.len()];
        let pts: Vec<String> = xs.iter().zip(ys).map(|(&x, &y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{c}\" points=\"{}\"/>", pts.join(" "));
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{c}\">{name}</text>", w - pad - 120.0, pad + 14.0 * (i + 1) as f64);
    }
    let _ = writeln!(s, "<text x=\"{pad}\" y=\"{}\" font-size=\"11\">{} in [{x0}, {x1}], y in [{y0:.4}, {y1:.4}]</text>", h - 10.0, t.header[0]);
    s.push_str("</svg>\n");
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_svg() {
        let mut t = Table::new("demo", &["x", "y", "label"]);
        t.push(["1".to_string(), "2.5".into(), "a,b".into()]);
        t.push(["2".to_string(), "3".into(), "c".into()]);
        assert_eq!(t.to_csv().unwrap(), "x,y,label\n1,2.5,\"a,b\"\n2,3,c\n");
        assert_eq!(t.column("y").unwrap(), vec![2.5, 3.0]);
        let svg = svg_plot(&t).unwrap();
        assert!(svg.contains("polyline") && !svg.contains("label<"));
    }
}
