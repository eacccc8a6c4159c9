//! Report envelope, canonical JSON and flattened CSV output.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub const TOOL_NAME: &str = "texdim";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// The top-level document every command emits.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportEnvelope {
    pub command: String,
    pub config: Value,
    pub results: Value,
    pub flags: Vec<String>,
}

impl ReportEnvelope {
    /// Serializes `config` and `results`. Report types omit absent optional
    /// fields, so any `null` left in the results stands for a non-finite
    /// number and is flagged with its path.
    pub fn new(command: &str, config: &impl Serialize, results: &impl Serialize, mut flags: Vec<String>) -> Result<Self> {
        let config = to_value(config)?;
        let results = to_value(results)?;
        collect_nulls(&results, "results", &mut flags);
        flags.sort();
        flags.dedup();
        Ok(Self {
            command: command.to_string(),
            config,
            results,
            flags,
        })
    }

    pub fn to_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("tool".into(), Value::from(TOOL_NAME));
        m.insert("version".into(), Value::from(TOOL_VERSION));
        m.insert("command".into(), Value::from(self.command.clone()));
        m.insert("config".into(), self.config.clone());
        m.insert("results".into(), self.results.clone());
        m.insert("flags".into(), Value::from(self.flags.clone()));
        Value::Object(m)
    }

    pub fn to_json(&self) -> String {
        canonical_json(&self.to_value())
    }
}

pub fn to_value(v: &impl Serialize) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::domain(format!("serialization failed: {e}")))
}

fn collect_nulls(v: &Value, path: &str, out: &mut Vec<String>) {
    match v {
        Value::Null => out.push(format!("non_finite:{path}")),
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                collect_nulls(item, &format!("{path}[{i}]"), out);
            }
        }
        Value::Object(m) => {
            for (k, item) in m {
                collect_nulls(item, &format!("{path}.{k}"), out);
            }
        }
        _ => {}
    }
}

/// Formats a finite float with 17 significant digits, dropping trailing
/// zeros. Exponent form is used outside `[1e-5, 1e17)`.
pub fn format_f64(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    if !(-5..17).contains(&exp) {
        let (head, tail) = digits.split_at(1);
        let tail = if tail.is_empty() { "0" } else { tail };
        return format!("{sign}{head}.{tail}e{exp}");
    }
    let mut out = String::from(sign);
    if exp < 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
        out.push_str(digits);
    } else {
        let int_len = exp as usize + 1;
        if digits.len() <= int_len {
            out.push_str(digits);
            out.extend(std::iter::repeat_n('0', int_len - digits.len()));
            out.push_str(".0");
        } else {
            out.push_str(&digits[..int_len]);
            out.push('.');
            out.push_str(&digits[int_len..]);
        }
    }
    out
}

fn format_number(n: &serde_json::Number) -> String {
    if n.is_u64() || n.is_i64() {
        n.to_string()
    } else {
        format_f64(n.as_f64().expect("json number"))
    }
}

/// Key-sorted, two-space indented JSON with a trailing newline.
pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, 0, &mut out);
    out.push('\n');
    out
}

fn write_value(v: &Value, depth: usize, out: &mut String) {
    let pad = |d: usize| "  ".repeat(d);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => out.push_str(&format_number(n)),
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                write_value(item, depth + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            let _ = write!(out, "{}]", pad(depth));
        }
        Value::Object(m) if m.is_empty() => out.push_str("{}"),
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                let _ = write!(out, "{}{}: ", pad(depth + 1), Value::String((*k).clone()));
                write_value(&m[*k], depth + 1, out);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            let _ = write!(out, "{}}}", pad(depth));
        }
    }
}

fn flatten_into(v: &Value, prefix: &str, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            for k in keys {
                let name = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten_into(&m[k], &name, out);
            }
        }
        Value::Array(items) if items.iter().all(|i| !i.is_object() && !i.is_array()) => {
            let cells: Vec<String> = items.iter().map(scalar_cell).collect();
            out.push((prefix.to_string(), cells.join(";")));
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                flatten_into(item, &format!("{prefix}[{i}]"), out);
            }
        }
        scalar => out.push((prefix.to_string(), scalar_cell(scalar))),
    }
}

fn scalar_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => format_number(n),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// One CSV row per element of `rows`, with nested fields flattened into
/// dotted column names. The header is the sorted union of all columns;
/// missing cells are empty.
pub fn rows_to_csv(rows: &[Value]) -> Result<String> {
    let flat: Vec<Vec<(String, String)>> = rows
        .iter()
        .map(|r| {
            let mut cells = Vec::new();
            flatten_into(r, "", &mut cells);
            cells
        })
        .collect();
    let mut columns: Vec<String> = flat.iter().flatten().map(|(k, _)| k.clone()).collect();
    columns.sort();
    columns.dedup();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&columns)?;
    for row in &flat {
        let record = columns.iter().map(|c| {
            row.iter()
                .find(|(k, _)| k == c)
                .map(|(_, v)| v.as_str())
                .unwrap_or("")
        });
        w.write_record(record)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::domain(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
