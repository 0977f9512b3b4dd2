//! Where payloads go and how they are formatted.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use kirchhoff_core::report::{fmt_num, json_num, write_csv};
use serde_json::Value;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "KIRCHHOFF_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => anyhow::bail!("unknown format `{other}` (csv or json)"),
        }
    }

    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Rewrites every non-integer number with 17 significant digits.
pub fn normalize(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_i64() || n.is_u64() => Value::Number(n),
        Value::Number(n) => n.as_f64().map_or(Value::Null, json_num),
        Value::Array(items) => Value::Array(items.into_iter().map(normalize).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, normalize(v))).collect()),
        other => other,
    }
}

/// Output target: `--out`, else `$KIRCHHOFF_OUT_DIR/<name>.<ext>`, else
/// stdout.
pub fn target(out: Option<PathBuf>, name: &str, format: Format) -> Option<PathBuf> {
    out.or_else(|| {
        std::env::var_os(OUT_DIR_ENV)
            .filter(|d| !d.is_empty())
            .map(|d| PathBuf::from(d).join(format!("{name}.{}", format.extension())))
    })
}

pub fn open(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_json(mut out: impl Write, value: Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, &normalize(value))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_i64() || n.is_u64() => n.to_string(),
        Value::Number(n) => n.as_f64().map_or_else(String::new, fmt_num),
        Value::String(s) => s.clone(),
        Value::Null => "nan".to_string(),
        other => other.to_string(),
    }
}

/// Flattens a JSON object into `key,value` rows with dotted keys.
pub fn write_key_value_csv(out: impl Write, meta: &[(&str, String)], value: &Value) -> Result<()> {
    fn walk(prefix: &str, v: &Value, rows: &mut Vec<Vec<String>>) {
        match v {
            Value::Object(map) => {
                for (k, x) in map {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, x, rows);
                }
            }
            Value::Array(items) => {
                for (i, x) in items.iter().enumerate() {
                    walk(&format!("{prefix}.{i}"), x, rows);
                }
            }
            _ => rows.push(vec![prefix.to_string(), scalar_text(v)]),
        }
    }
    let mut rows = Vec::new();
    walk("", value, &mut rows);
    write_csv(out, meta, &["key", "value"], rows)?;
    Ok(())
}
