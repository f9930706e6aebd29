//! CSV rows, run reports and manifests.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::experiment::{Experiment, PointResult};

/// Fixed CSV column order; documented in `schema/results.columns.json`.
pub const COLUMNS: [&str; 10] = ["method", "graph", "beta", "n_tau", "ell", "converged", "quantity", "anchor", "target", "value"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub method: String,
    pub graph: String,
    pub beta: f64,
    pub n_tau: Option<u32>,
    pub ell: Option<usize>,
    pub converged: bool,
    pub quantity: &'static str,
    pub anchor: Option<usize>,
    pub target: Option<usize>,
    pub value: f64,
}

/// Shortest round-trip decimal, switching to exponent form for very small
/// or very large magnitudes.
pub fn format_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x != 0.0 && (x.abs() < 1e-4 || x.abs() >= 1e15) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Rows of one grid point, in a fixed order.
pub fn rows(exp: &Experiment, r: &PointResult) -> Vec<Row> {
    let row = |quantity: &'static str, anchor: Option<usize>, target: Option<usize>, value: f64| Row {
        method: exp.method.name().into(),
        graph: exp.graph_id.clone(),
        beta: r.beta,
        n_tau: exp.method.n_tau(),
        ell: exp.method.ell(),
        converged: r.converged,
        quantity,
        anchor,
        target,
        value,
    };
    let mut out = Vec::new();
    if let Some(p) = &r.correlations {
        for (&t, &v) in &p.values {
            out.push(row("correlation", Some(p.anchor), Some(t), v));
        }
    }
    if !matches!(exp.method, crate::experiment::Method::Exact) {
        if let Some(p) = &r.exact_correlations {
            for (&t, &v) in &p.values {
                out.push(row("exact_correlation", Some(p.anchor), Some(t), v));
            }
        }
    }
    if let Some(e) = r.energy_density {
        out.push(row("energy_density", None, None, e));
    }
    if let (Some(e), false) = (r.exact_energy_density, matches!(exp.method, crate::experiment::Method::Exact)) {
        out.push(row("exact_energy_density", None, None, e));
    }
    if let Some(err) = &r.error {
        for (name, v) in [
            ("error_total", err.total),
            ("error_ts_only", err.ts_only),
            ("error_loop_only", err.loop_only),
            ("error_energy", err.energy),
        ] {
            if let Some(v) = v {
                out.push(row(name, None, None, v));
            }
        }
    }
    if let Some(f) = r.fluctuation_magnitude {
        out.push(row("fluctuation_magnitude", None, None, f));
    }
    if let Some(run) = &r.run {
        out.push(row("rounds", None, None, run.rounds_executed as f64));
    }
    out
}

/// CSV text with `#`-prefixed metadata lines before the header.
pub fn render_csv(metadata: &[(String, String)], rows: &[Row]) -> String {
    let mut s = String::new();
    for (k, v) in metadata {
        let _ = writeln!(s, "# {k}: {v}");
    }
    let _ = writeln!(s, "{}", COLUMNS.join(","));
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.method,
            r.graph,
            format_f64(r.beta),
            opt(r.n_tau),
            opt(r.ell),
            r.converged,
            r.quantity,
            opt(r.anchor),
            opt(r.target),
            format_f64(r.value)
        );
    }
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}
