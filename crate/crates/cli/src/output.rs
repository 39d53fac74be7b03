//! CSV and JSON emission. Floating-point numbers are always written in
//! shortest round-trip scientific notation, so output is reproducible
//! byte for byte.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Scientific notation with the fewest digits that round-trip.
pub fn sci(x: f64) -> String {
    format!("{x:e}")
}

fn write_number(out: &mut String, n: &serde_json::Number) {
    if n.is_f64() {
        let x = n.as_f64().unwrap_or(f64::NAN);
        out.push_str(&sci(x));
    } else {
        out.push_str(&n.to_string());
    }
}

fn write_json(out: &mut String, v: &Value, indent: usize) {
    let pad = |out: &mut String, n: usize| out.push_str(&"  ".repeat(n));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(out, n),
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) if items.iter().all(|x| x.is_number()) => {
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                write_json(out, item, indent);
            }
            out.push(']');
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                pad(out, indent + 1);
                write_json(out, item, indent + 1);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push_str("{\n");
            for (k, (key, item)) in map.iter().enumerate() {
                pad(out, indent + 1);
                let _ = write!(out, "{}: ", Value::String(key.clone()));
                write_json(out, item, indent + 1);
                out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

/// Pretty JSON with scientific-notation floats and a trailing newline.
pub fn json_string(v: &Value) -> String {
    let mut out = String::new();
    write_json(&mut out, v, 0);
    out.push('\n');
    out
}

/// Serialize any value through [`json_string`].
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| crate::error::CliError::Usage(e.to_string()))?;
    Ok(json_string(&v))
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => {
            let mut s = String::new();
            write_number(&mut s, n);
            s
        }
        Value::String(s) => s.clone(),
        other => {
            let mut s = String::new();
            write_json(&mut s, other, 0);
            s
        }
    }
}

/// CSV of flat rows. The header comes from the first row's keys; every row
/// must share them.
pub fn csv_string(rows: &[Value]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if let Some(Value::Object(first)) = rows.first() {
        w.write_record(first.keys())?;
    }
    for row in rows {
        if let Value::Object(map) = row {
            w.write_record(map.values().map(csv_cell))?;
        }
    }
    let bytes = w.into_inner().map_err(|e| crate::error::CliError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Render flat rows in the requested format.
pub fn render_rows(rows: &[Value], format: Format) -> Result<String> {
    match format {
        Format::Csv => csv_string(rows),
        Format::Json => Ok(json_string(&Value::Array(rows.to_vec()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_are_scientific() {
        let s = json_string(&json!({ "a": 0.25, "b": [1.0, -3e-20], "n": 7, "t": "x,y" }));
        assert!(s.contains("\"a\": 2.5e-1"));
        assert!(s.contains("[1e0, -3e-20]"));
        assert!(s.contains("\"n\": 7"));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["b"][1].as_f64(), Some(-3e-20));
    }

    #[test]
    fn scientific_notation_round_trips() {
        for x in [1.0 / 3.0, 3.358709020250798e-5, f64::MIN_POSITIVE, 1e300, -0.1] {
            assert_eq!(sci(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_quotes_text_and_keeps_column_order() {
        let rows = vec![json!({ "z": 1.5, "a": null, "e": "bad, worse" }), json!({ "z": 2.0, "a": true, "e": "" })];
        let s = csv_string(&rows).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "z,a,e");
        assert_eq!(lines[1], "1.5e0,,\"bad, worse\"");
        assert_eq!(lines[2], "2e0,true,");
    }
}
