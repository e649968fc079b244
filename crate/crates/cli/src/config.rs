//! Flat `key = value` configuration files.
//!
//! Keys are long flag names of the subcommand. `#` starts a comment line.
//! List values are comma separated. A file is applied by splicing
//! `--key value` pairs in front of the user's own flags, so flags given on
//! the command line win.

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};
use serde::Serialize;

pub type Config = BTreeMap<String, String>;

pub fn parse(text: &str) -> Result<Config> {
    let mut out = Config::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected key = value", n + 1);
        };
        let k = k.trim();
        if k.is_empty() || k.contains(char::is_whitespace) {
            bail!("config line {}: bad key {k:?}", n + 1);
        }
        if out.insert(k.to_owned(), v.trim().to_owned()).is_some() {
            bail!("config line {}: duplicate key {k:?}", n + 1);
        }
    }
    Ok(out)
}

pub fn render(c: &Config) -> String {
    c.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

/// Flattens serialized arguments into config entries. `None` values are
/// dropped and lists are joined with commas.
pub fn from_args<T: Serialize>(args: &T) -> Result<Config> {
    let value = serde_json::to_value(args)?;
    let serde_json::Value::Object(map) = value else {
        bail!("arguments must serialize to an object");
    };
    let scalar = |v: &serde_json::Value| -> Option<String> {
        match v {
            serde_json::Value::Null => None,
            serde_json::Value::String(s) => Some(s.clone()),
            other => Some(other.to_string()),
        }
    };
    let mut out = Config::new();
    for (k, v) in map {
        let s = match &v {
            serde_json::Value::Array(items) => {
                if items.is_empty() {
                    continue;
                }
                items
                    .iter()
                    .filter_map(scalar)
                    .collect::<Vec<_>>()
                    .join(",")
            }
            other => match scalar(other) {
                Some(s) => s,
                None => continue,
            },
        };
        out.insert(k, s);
    }
    Ok(out)
}

/// Reads the file named by `--config` (if any) and splices its entries
/// after the subcommand token.
pub fn splice(argv: Vec<String>, subcommands: &[&str]) -> Result<Vec<String>> {
    let mut path = None;
    let mut i = 1;
    while i < argv.len() {
        if argv[i] == "--config" {
            path = argv.get(i + 1).cloned();
            break;
        }
        if let Some(p) = argv[i].strip_prefix("--config=") {
            path = Some(p.to_owned());
            break;
        }
        i += 1;
    }
    let Some(path) = path else {
        return Ok(argv);
    };
    let Some(at) = argv
        .iter()
        .skip(1)
        .position(|a| subcommands.contains(&a.as_str()))
    else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {path}"))?;
    let cfg = parse(&text)?;
    let mut out: Vec<String> = argv[..=at + 1].to_vec();
    for (k, v) in cfg {
        out.push(format!("--{k}"));
        out.push(v);
    }
    out.extend_from_slice(&argv[at + 2..]);
    Ok(out)
}
