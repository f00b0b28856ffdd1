use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulations::Formulation;

pub const RESULTS_HEADER: [&str; 11] =
    ["instance", "formulation", "N", "status", "objective", "md", "lof10", "nearest_rows", "total_rows", "nodes", "time_s"];

/// One solve of one instance with one formulation and reference-set size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub instance: usize,
    pub formulation: Formulation,
    #[serde(rename = "N")]
    pub n: usize,
    pub status: String,
    pub objective: Option<f64>,
    pub md: Option<f64>,
    pub lof10: Option<f64>,
    pub nearest_rows: usize,
    pub total_rows: usize,
    pub nodes: usize,
    pub time_s: f64,
}

impl BenchRecord {
    pub fn is_optimal(&self) -> bool {
        self.status == "optimal"
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_results(path: &Path, records: &[BenchRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(RESULTS_HEADER).map_err(io)?;
    for r in records {
        w.write_record([
            r.instance.to_string(),
            r.formulation.to_string(),
            r.n.to_string(),
            r.status.clone(),
            opt(r.objective),
            opt(r.md),
            opt(r.lof10),
            r.nearest_rows.to_string(),
            r.total_rows.to_string(),
            r.nodes.to_string(),
            r.time_s.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Mean and sample standard deviation; the deviation is `None` below two values.
pub fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (Some(mean), Some(var.sqrt()))
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub n: usize,
    pub formulation: Formulation,
    pub explained: usize,
    pub optimal: usize,
    pub non_optimal: usize,
    pub md: (Option<f64>, Option<f64>),
    pub lof10: (Option<f64>, Option<f64>),
    pub time: (Option<f64>, Option<f64>),
    pub time_median: Option<f64>,
    pub nearest_rows: usize,
}

pub const SUMMARY_HEADER: [&str; 14] = [
    "N",
    "formulation",
    "explained",
    "optimal",
    "non_optimal",
    "md_mean",
    "md_std",
    "lof10_mean",
    "lof10_std",
    "time_mean",
    "time_std",
    "time_median",
    "nearest_rows",
    "note",
];

/// Groups records by `(N, formulation)`; statistics use optimal rows only.
pub fn summarize(records: &[BenchRecord], explained: usize, ns: &[usize], forms: &[Formulation]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for &n in ns {
        for &f in forms {
            let group: Vec<&BenchRecord> = records.iter().filter(|r| r.n == n && r.formulation == f).collect();
            let ok: Vec<&BenchRecord> = group.iter().copied().filter(|r| r.is_optimal()).collect();
            let col = |g: fn(&BenchRecord) -> Option<f64>| ok.iter().filter_map(|r| g(r)).collect::<Vec<f64>>();
            let times = col(|r| Some(r.time_s));
            out.push(SummaryRow {
                n,
                formulation: f,
                explained,
                optimal: ok.len(),
                non_optimal: group.len() - ok.len(),
                md: mean_std(&col(|r| r.md)),
                lof10: mean_std(&col(|r| r.lof10)),
                time: mean_std(&times),
                time_median: median(&times),
                nearest_rows: group.first().map_or(0, |r| r.nearest_rows),
            });
        }
    }
    out
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(SUMMARY_HEADER).map_err(io)?;
    for r in rows {
        let note = if r.explained == 0 { "no rejected instances to explain" } else { "" };
        w.write_record([
            r.n.to_string(),
            r.formulation.to_string(),
            r.explained.to_string(),
            r.optimal.to_string(),
            r.non_optimal.to_string(),
            opt(r.md.0),
            opt(r.md.1),
            opt(r.lof10.0),
            opt(r.lof10.1),
            opt(r.time.0),
            opt(r.time.1),
            opt(r.time_median),
            r.nearest_rows.to_string(),
            note.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Tidy `(N, formulation, time)` rows, one per optimal record.
pub fn write_plot_csv(path: &Path, records: &[BenchRecord]) -> Result<()> {
    let mut s = String::from("N,formulation,time_s\n");
    for r in records.iter().filter(|r| r.is_optimal()) {
        let _ = writeln!(s, "{},{},{}", r.n, r.formulation, r.time_s);
    }
    write_file(path, &s)
}

/// Line chart of mean solve time against N, one polyline per formulation.
pub fn render_svg(rows: &[SummaryRow]) -> String {
    let (w, h, pad) = (640.0, 400.0, 60.0);
    let mut series: BTreeMap<Formulation, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        if let Some(t) = r.time.0 {
            series.entry(r.formulation).or_default().push((r.n as f64, t));
        }
    }
    let xs: Vec<f64> = series.values().flatten().map(|p| p.0).collect();
    let ys: Vec<f64> = series.values().flatten().map(|p| p.1).collect();
    let (x0, x1) = (xs.iter().copied().fold(f64::INFINITY, f64::min), xs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let y1 = ys.iter().copied().fold(0.0, f64::max);
    let sx = |x: f64| if x1 > x0 { pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad) } else { w / 2.0 };
    let sy = |y: f64| if y1 > 0.0 { h - pad - y / y1 * (h - 2.0 * pad) } else { h - pad };
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<line x1="{pad}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - pad, w - pad, h - pad);
    let _ = writeln!(s, r#"<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{}" stroke="black"/>"#, h - pad);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">N</text>"#, w / 2.0, h - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" font-size="14" transform="rotate(-90 18 {})">mean solve time (s)</text>"#,
        h / 2.0,
        h / 2.0
    );
    let mut ticks: Vec<f64> = xs.clone();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for x in ticks {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle" font-size="12">{x}</text>"#, sx(x), h - pad + 18.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end" font-size="12">{y1:.3}</text>"#, pad - 6.0, pad + 4.0);
    for (k, (f, pts)) in series.iter().enumerate() {
        let color = if *f == Formulation::Reduced { "#d62728" } else { "#1f77b4" };
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, path.join(" "));
        let ly = pad + 16.0 * k as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{ly}" font-size="12" fill="{color}">{f}</text>"#, w - pad - 70.0);
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    write_file(path, &render_svg(rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std_by_hand() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, Some(2.5));
        assert!((s.unwrap() - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]), (Some(7.0), None));
        assert_eq!(mean_std(&[]), (None, None));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }

    #[test]
    fn svg_has_two_series() {
        let row = |n, f, t| SummaryRow {
            n,
            formulation: f,
            explained: 1,
            optimal: 1,
            non_optimal: 0,
            md: (None, None),
            lof10: (None, None),
            time: (Some(t), None),
            time_median: Some(t),
            nearest_rows: 0,
        };
        let svg = render_svg(&[
            row(20, Formulation::Original, 2.0),
            row(50, Formulation::Original, 9.0),
            row(20, Formulation::Reduced, 1.0),
            row(50, Formulation::Reduced, 2.0),
        ]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }
}
