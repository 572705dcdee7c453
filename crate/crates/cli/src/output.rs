//! Record output. Records are JSON objects; serde_json keeps object keys in
//! sorted order, and floats go out with 17 significant digits so every value
//! round-trips exactly.

use std::collections::BTreeMap;
use std::io::{self, Write};

use clap::ValueEnum;
use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::{Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

pub type Record = Map<String, Value>;

/// Non-finite values become `null`.
pub fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

pub fn vec3(v: &[f64; 3]) -> Value {
    Value::Array(v.iter().map(|&c| num(c)).collect())
}

pub fn opt_vec3(v: Option<&[f64; 3]>) -> Value {
    v.map_or(Value::Null, vec3)
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct Precise;

impl Formatter for Precise {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt_f64(v).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }
}

pub fn to_json(v: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Precise);
    v.serialize(&mut ser).expect("in-memory serialisation");
    String::from_utf8(buf).expect("json is utf-8")
}

/// One JSON document per line.
pub fn write_json_lines<W: Write>(out: &mut W, records: &[Record]) -> io::Result<()> {
    for r in records {
        writeln!(out, "{}", to_json(&Value::Object(r.clone())))?;
    }
    Ok(())
}

fn flatten(prefix: &str, v: &Value, out: &mut BTreeMap<String, String>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        Value::Array(a) if prefix == "point" && a.len() == 3 => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("x{}", i + 1), x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}.{}", i + 1), x, out);
            }
        }
        Value::Null => {
            out.insert(prefix.to_string(), String::new());
        }
        Value::Number(n) => {
            let s = match (n.as_i64(), n.as_u64(), n.as_f64()) {
                (Some(i), _, _) => i.to_string(),
                (_, Some(u), _) => u.to_string(),
                (_, _, Some(f)) => fmt_f64(f),
                _ => n.to_string(),
            };
            out.insert(prefix.to_string(), s);
        }
        Value::String(s) => {
            out.insert(prefix.to_string(), csv_field(s));
        }
        Value::Bool(b) => {
            out.insert(prefix.to_string(), b.to_string());
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Nested values flatten to dotted columns (`omegas.1.2`), the point to
/// `x1,x2,x3`. The header is the union of all columns, coordinates first.
pub fn write_csv<W: Write>(out: &mut W, records: &[Record]) -> io::Result<()> {
    let rows: Vec<BTreeMap<String, String>> = records
        .iter()
        .map(|r| {
            let mut m = BTreeMap::new();
            flatten("", &Value::Object(r.clone()), &mut m);
            m
        })
        .collect();
    let mut cols: Vec<String> = rows.iter().flat_map(|r| r.keys().cloned()).collect();
    cols.sort_by(|a, b| {
        let rank = |s: &str| !matches!(s, "x1" | "x2" | "x3");
        (rank(a), a).cmp(&(rank(b), b))
    });
    cols.dedup();
    writeln!(out, "{}", cols.join(","))?;
    for r in &rows {
        let line: Vec<&str> = cols.iter().map(|c| r.get(c).map_or("", String::as_str)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn write_records<W: Write>(out: &mut W, format: Format, records: &[Record]) -> io::Result<()> {
    match format {
        Format::Json => write_json_lines(out, records),
        Format::Csv => write_csv(out, records),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(to_json(&json!({"b": 1, "a": [2.5, null]})), r#"{"a":[2.5000000000000000e0,null],"b":1}"#);
        assert_eq!(num(f64::NAN), Value::Null);
    }

    #[test]
    fn csv_flattens_and_unions_columns() {
        let a = json!({"point": [1.0, 2.0, 3.0], "w": [[1.0, 2.0, 3.0]], "name": "a,b"});
        let b = json!({"point": [0.0, 0.0, 0.0], "w": [], "name": null});
        let recs: Vec<Record> = [a, b].into_iter().map(|v| v.as_object().unwrap().clone()).collect();
        let mut buf = Vec::new();
        write_csv(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x1,x2,x3,name,w.1.1,w.1.2,w.1.3");
        assert!(lines[1].contains("\"a,b\""));
        assert!(lines[2].ends_with(",,,,"));
    }
}
