use std::io::Write;
use std::path::PathBuf;

use clap::ValueEnum;
use effop::{Operator, Scalar};
use serde::Serialize;
use serde_json::Value;

use crate::config::CliResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// A complex number as `[re, im]`.
pub type Pair = [f64; 2];

pub fn pair<T: Scalar>(x: T) -> Pair {
    let c = x.to_complex();
    [c.re, c.im]
}

pub fn matrix_pairs<T: Scalar>(a: &Operator<T>) -> Vec<Vec<Pair>> {
    (0..a.rows()).map(|i| (0..a.cols()).map(|j| pair(a.get(i, j))).collect()).collect()
}

/// Writes to `--out` or stdout.
pub fn emit(out: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

/// Pretty JSON with arrays of scalars kept on one line.
pub fn to_json<S: Serialize>(value: &S) -> String {
    let v = serde_json::to_value(value).expect("report serializes");
    let mut s = String::new();
    write_value(&v, 0, &mut s);
    s.push('\n');
    s
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Array(items) if items.iter().all(is_flat) => {
            out.push_str(&inline(v));
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (k, x) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(x, indent + 1, out);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) if !map.is_empty() => {
            out.push_str("{\n");
            for (k, (key, x)) in map.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_value(x, indent + 1, out);
                out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
        other => out.push_str(&other.to_string()),
    }
}

fn inline(v: &Value) -> String {
    match v {
        Value::Array(items) => format!("[{}]", items.iter().map(inline).collect::<Vec<_>>().join(", ")),
        other => other.to_string(),
    }
}

/// Scalars and arrays of scalars (complex pairs) stay inline.
fn is_flat(v: &Value) -> bool {
    match v {
        Value::Array(items) => items.iter().all(|x| !x.is_array() && !x.is_object()),
        Value::Object(_) => false,
        _ => true,
    }
}

/// Shortest round-trip decimal form, with an exponent for very large or
/// small magnitudes; empty for non-finite values.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        serde_json::to_string(&x).expect("finite float")
    } else {
        String::new()
    }
}

/// Quotes a CSV field when it contains a separator, quote or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn csv_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut s = String::new();
    let line = |cells: &[String]| cells.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(",");
    s.push_str(&line(header));
    s.push('\n');
    for r in rows {
        s.push_str(&line(r));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compact_pairs() {
        let v = serde_json::json!({"m": [[[1.0, 0.0], [2.0, 0.5]]], "s": "ok", "e": {}});
        let text = to_json(&v);
        assert!(text.contains("[[1.0, 0.0], [2.0, 0.5]]"));
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back, v);
        assert_eq!(num(5.8e-33), "5.8e-33");
        assert_eq!(num(f64::NAN), "");
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("ok"), "ok");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"x\""), "\"say \"\"x\"\"\"");
    }
}
