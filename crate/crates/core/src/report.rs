//! JSON report encoding: fixed key order, reals with 17 significant digits,
//! complex numbers as `[re, im]`, non-finite reals as `null`.
//!
//! Reals are stored as floating-point JSON numbers and only formatted by
//! [`render`], so integers and reals stay distinguishable.

use num_complex::Complex64;
use std::fmt::Write;

use serde_json::{json, Map, Value};

use crate::spectral::{Moments, RepresentationReport, SpectralModel};

pub fn real(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn reals(xs: &[f64]) -> Value {
    Value::Array(xs.iter().copied().map(real).collect())
}

pub fn complex(z: Complex64) -> Value {
    Value::Array(vec![real(z.re), real(z.im)])
}

pub fn moments(m: &Moments) -> Value {
    json!({
        "first": real(m.first),
        "first_abs": real(m.first_abs),
        "second": real(m.second),
    })
}

pub fn representation(label: &str, r: &RepresentationReport) -> Value {
    json!({
        "section": label,
        "q_direct": real(r.q_direct),
        "q_spectral": real(r.q_spectral),
        "q_global_spectral": real(r.q_global_spectral),
        "abs_error": real(r.abs_error),
        "rel_error": real(r.rel_error),
        "moments": moments(&r.moments),
        "norm_sqr": real(r.norm_sqr),
        "graph_norm": real(r.graph_norm),
        "in_dfin": r.in_dfin,
        "in_dt": r.in_dt,
        "verdict": r.verdict.as_str(),
    })
}

/// `[{atom, weight, eigenvalues}]` in atom order.
pub fn spectra(model: &SpectralModel) -> Value {
    let space = model.form().layout().space();
    Value::Array(
        model
            .fibers()
            .iter()
            .zip(space.weights())
            .map(|(f, w)| {
                json!({
                    "atom": f.atom,
                    "weight": real(*w),
                    "eigenvalues": reals(f.eigenvalues.as_slice()),
                })
            })
            .collect(),
    )
}

/// Appends a `timestamp` entry (seconds since the Unix epoch) unless suppressed.
pub fn finish(mut report: Map<String, Value>, timestamp: bool) -> Value {
    if timestamp {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        report.insert("timestamp".into(), json!(secs));
    }
    Value::Object(report)
}

/// Pretty-printed JSON with two-space indentation and a trailing newline.
pub fn render(report: &Value) -> String {
    let mut s = String::new();
    write_value(&mut s, report, 0);
    s.push('\n');
    s
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap();
            write!(out, "{x:.16e}").unwrap();
        }
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                out.push_str(if i == 0 { "\n" } else { ",\n" });
                indent(out, depth + 1);
                write_value(out, item, depth + 1);
            }
            out.push('\n');
            indent(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                out.push_str(if i == 0 { "\n" } else { ",\n" });
                indent(out, depth + 1);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_value(out, item, depth + 1);
            }
            out.push('\n');
            indent(out, depth);
            out.push('}');
        }
        other => out.push_str(&other.to_string()),
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}
