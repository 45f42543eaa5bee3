use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Minimal JSON tree; objects keep keys sorted.
#[derive(Debug, Clone, PartialEq)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(BTreeMap<String, Json>),
}

impl Json {
    pub fn obj<K: Into<String>>(pairs: impl IntoIterator<Item = (K, Json)>) -> Json {
        Json::Obj(pairs.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn arr<T: Into<Json>>(items: impl IntoIterator<Item = T>) -> Json {
        Json::Arr(items.into_iter().map(Into::into).collect())
    }

    pub fn get(&self, key: &str) -> Option<&Json> {
        match self {
            Json::Obj(m) => m.get(key),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Json::Num(v) => Some(*v),
            Json::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    /// Inserts into an object; no-op otherwise.
    pub fn insert(&mut self, key: impl Into<String>, value: Json) {
        if let Json::Obj(m) = self {
            m.insert(key.into(), value);
        }
    }

    /// Deterministic text: two-space indent, sorted keys, floats with 17
    /// significant digits, non-finite floats as strings. For objects, a
    /// top-level `warnings` array lists the paths of non-finite values.
    pub fn render(&self) -> String {
        let mut warnings = Vec::new();
        self.collect_nonfinite("", &mut warnings);
        let mut root = self.clone();
        if let Json::Obj(m) = &mut root {
            let mut all: Vec<Json> = match m.remove("warnings") {
                Some(Json::Arr(v)) => v,
                _ => Vec::new(),
            };
            all.extend(warnings.into_iter().map(|p| Json::Str(format!("non-finite value at {p}"))));
            m.insert("warnings".into(), Json::Arr(all));
        }
        let mut out = String::new();
        root.write(&mut out, 0);
        out.push('\n');
        out
    }

    /// As [`Json::render`] without the `warnings` entry.
    pub fn render_plain(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, 0);
        out.push('\n');
        out
    }

    fn collect_nonfinite(&self, path: &str, out: &mut Vec<String>) {
        match self {
            Json::Num(v) if !v.is_finite() => out.push(if path.is_empty() { "$".into() } else { path.into() }),
            Json::Arr(v) => {
                for (i, x) in v.iter().enumerate() {
                    x.collect_nonfinite(&format!("{path}[{i}]"), out);
                }
            }
            Json::Obj(m) => {
                for (k, x) in m {
                    let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                    x.collect_nonfinite(&p, out);
                }
            }
            _ => {}
        }
    }

    fn write(&self, out: &mut String, indent: usize) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Int(v) => {
                let _ = write!(out, "{v}");
            }
            Json::Num(v) => {
                if v.is_nan() {
                    out.push_str("\"nan\"");
                } else if v.is_infinite() {
                    out.push_str(if *v > 0.0 { "\"inf\"" } else { "\"-inf\"" });
                } else {
                    let _ = write!(out, "{v:.16e}");
                }
            }
            Json::Str(s) => write_str(out, s),
            Json::Arr(v) if v.is_empty() => out.push_str("[]"),
            Json::Arr(v) => {
                // Arrays of scalars stay on one line.
                let flat = v.iter().all(|x| !matches!(x, Json::Arr(_) | Json::Obj(_)));
                out.push('[');
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    if flat {
                        if i > 0 {
                            out.push(' ');
                        }
                    } else {
                        newline(out, indent + 1);
                    }
                    x.write(out, indent + 1);
                }
                if !flat {
                    newline(out, indent);
                }
                out.push(']');
            }
            Json::Obj(m) if m.is_empty() => out.push_str("{}"),
            Json::Obj(m) => {
                out.push('{');
                for (i, (k, x)) in m.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    newline(out, indent + 1);
                    write_str(out, k);
                    out.push_str(": ");
                    x.write(out, indent + 1);
                }
                newline(out, indent);
                out.push('}');
            }
        }
    }
}

fn newline(out: &mut String, indent: usize) {
    out.push('\n');
    for _ in 0..indent {
        out.push_str("  ");
    }
}

fn write_str(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

impl From<f64> for Json {
    fn from(v: f64) -> Self {
        Json::Num(v)
    }
}

impl From<usize> for Json {
    fn from(v: usize) -> Self {
        Json::Int(v as i64)
    }
}

impl From<u64> for Json {
    fn from(v: u64) -> Self {
        Json::Int(v as i64)
    }
}

impl From<bool> for Json {
    fn from(v: bool) -> Self {
        Json::Bool(v)
    }
}

impl From<&str> for Json {
    fn from(v: &str) -> Self {
        Json::Str(v.to_string())
    }
}

impl From<String> for Json {
    fn from(v: String) -> Self {
        Json::Str(v)
    }
}

impl From<[f64; 2]> for Json {
    fn from(v: [f64; 2]) -> Self {
        Json::arr(v)
    }
}

impl<T: Into<Json>> From<Option<T>> for Json {
    fn from(v: Option<T>) -> Self {
        v.map_or(Json::Null, Into::into)
    }
}

impl<T: Into<Json>> From<Vec<T>> for Json {
    fn from(v: Vec<T>) -> Self {
        Json::arr(v)
    }
}

pub fn write_report(report: &Json, path: &Path) -> Result<()> {
    std::fs::write(path, report.render()).map_err(|e| Error::io(path, e))
}
