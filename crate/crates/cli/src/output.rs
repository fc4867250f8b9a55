use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::args::{Format, OutputArgs};
use crate::CliError;

/// `{"config": ..., "result": ...}`, the shape of every JSON output.
#[derive(Debug, Serialize)]
pub struct Envelope<C: Serialize, R: Serialize> {
    pub config: C,
    pub result: R,
}

pub fn open(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            CliError::Input(format!("cannot create {}: {e}", p.display()))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_text(out: &OutputArgs, text: &str) -> Result<(), CliError> {
    let mut w = open(out.out.as_deref())?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Input(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Writes `value` as JSON, or as a two-line CSV of its flattened fields.
pub fn write_record<T: Serialize>(out: &OutputArgs, value: &T) -> Result<(), CliError> {
    match out.format {
        Format::Json => write_text(out, &json(value)?),
        Format::Csv => {
            let v = serde_json::to_value(value)
                .map_err(|e| CliError::Input(format!("serialization failed: {e}")))?;
            let mut fields = Vec::new();
            flatten("", &v, &mut fields);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(fields.iter().map(|f| f.0.as_str()))?;
            w.write_record(fields.iter().map(|f| f.1.as_str()))?;
            let bytes = w
                .into_inner()
                .map_err(|e| CliError::Input(format!("csv output: {e}")))?;
            write_text(out, &String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        Format::Markdown | Format::Wide => Err(CliError::Input(
            "markdown and wide formats are only available for simulate".into(),
        )),
    }
}

/// Full-precision text for a scalar.
fn scalar(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) if n.is_f64() => format!("{:.16e}", n.as_f64().expect("f64 number")),
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Dotted keys for nested objects; arrays of scalars are joined with ';'.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                flatten(&key(k), child, out);
            }
        }
        Value::Array(items) if items.iter().all(|i| !i.is_object() && !i.is_array()) => {
            let joined: Vec<String> = items.iter().map(scalar).collect();
            out.push((prefix.to_string(), joined.join(";")));
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), child, out);
            }
        }
        _ => out.push((prefix.to_string(), scalar(v))),
    }
}
