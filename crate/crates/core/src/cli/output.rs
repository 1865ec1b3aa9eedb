//! Trace, summary and plot writers.

use std::fmt::Write as _;

use crate::iterate::Trace;

pub const TRACE_HEADER: [&str; 5] = ["n", "step_norm", "residual", "apriori_bound", "aposteriori_bound"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TraceFormat {
    Csv,
    Json,
}

impl TraceFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TraceFormat::Csv => "csv",
            TraceFormat::Json => "json",
        }
    }
}

/// 17 significant digits, enough to recover every `f64` exactly.
fn float_field(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trace_csv(trace: &Trace) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_HEADER).expect("in-memory write");
    for row in &trace.rows {
        let opt = |v: Option<f64>| v.map(float_field).unwrap_or_default();
        w.write_record([
            row.n.to_string(),
            float_field(row.step_norm),
            float_field(row.residual),
            opt(row.apriori_bound),
            opt(row.aposteriori_bound),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

pub fn trace_json(trace: &Trace) -> String {
    serde_json::to_string_pretty(trace).expect("traces serialize") + "\n"
}

pub fn render_trace(trace: &Trace, format: TraceFormat) -> String {
    match format {
        TraceFormat::Csv => trace_csv(trace),
        TraceFormat::Json => trace_json(trace),
    }
}

const PLOT_W: f64 = 640.0;
const PLOT_H: f64 = 400.0;
const MARGIN: f64 = 56.0;
/// Values below this are drawn on the floor of the log axis.
const LOG_FLOOR: f64 = 1e-17;

/// Static SVG plot of step norms and bounds against `n` on a log scale.
pub fn plot_svg(trace: &Trace) -> String {
    let series: [(&str, &str, Vec<Option<f64>>); 3] = [
        ("step_norm", "#1f77b4", trace.rows.iter().map(|r| Some(r.step_norm)).collect()),
        ("apriori_bound", "#d62728", trace.rows.iter().map(|r| r.apriori_bound).collect()),
        ("aposteriori_bound", "#2ca02c", trace.rows.iter().map(|r| r.aposteriori_bound).collect()),
    ];
    let logs = |v: f64| v.max(LOG_FLOOR).log10();
    let values: Vec<f64> = series.iter().flat_map(|s| s.2.iter().flatten().map(|v| logs(*v))).collect();
    let mut lo = values.iter().copied().fold(f64::INFINITY, f64::min).floor();
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max).ceil();
    if !lo.is_finite() || !hi.is_finite() {
        (lo, hi) = (-1.0, 0.0);
    }
    if hi <= lo {
        hi = lo + 1.0;
    }
    let n_max = trace.rows.len().saturating_sub(1).max(1) as f64;
    let px = |n: usize| MARGIN + (n as f64 / n_max) * (PLOT_W - 2.0 * MARGIN);
    let py = |v: f64| PLOT_H - MARGIN - (logs(v) - lo) / (hi - lo) * (PLOT_H - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PLOT_W}" height="{PLOT_H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, x1, y0, y1) = (MARGIN, PLOT_W - MARGIN, MARGIN, PLOT_H - MARGIN);
    let _ = writeln!(svg, r#"<path d="M{x0},{y0} L{x0},{y1} L{x1},{y1}" stroke="black" fill="none"/>"#);
    for e in (lo as i64)..=(hi as i64) {
        let y = py(10f64.powi(e as i32));
        let _ = writeln!(svg, r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#ddd"/>"##);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{e}</text>"#, x0 - 6.0, y + 4.0);
    }
    let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">n</text>"#, (x0 + x1) / 2.0, PLOT_H - 16.0);
    let _ = writeln!(svg, r#"<text x="{x1:.2}" y="{:.2}" text-anchor="end">{}</text>"#, y1 + 16.0, trace.rows.len().saturating_sub(1));
    for (i, (name, colour, vals)) in series.iter().enumerate() {
        let points: Vec<String> = vals
            .iter()
            .enumerate()
            .filter_map(|(n, v)| v.map(|v| format!("{:.2},{:.2}", px(n), py(v))))
            .collect();
        if points.is_empty() {
            continue;
        }
        let _ = writeln!(svg, r#"<polyline points="{}" stroke="{colour}" fill="none" stroke-width="1.5"/>"#, points.join(" "));
        let ly = y0 + 16.0 * i as f64;
        let _ = writeln!(svg, r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{colour}" stroke-width="2"/>"#, x1 - 150.0, x1 - 130.0);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}">{name}</text>"#, x1 - 125.0, ly + 4.0);
    }
    svg.push_str("</svg>\n");
    svg
}
