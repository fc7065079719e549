//! `key = value` config files spliced into the argument list.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::Value;

pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected key = value", i + 1);
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            bail!("config line {}: invalid key `{}`", i + 1, k.trim());
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn to_flags(pairs: &[(String, String)]) -> Vec<OsString> {
    let mut out = Vec::new();
    for (k, v) in pairs {
        match v.as_str() {
            "true" => out.push(format!("--{k}").into()),
            "false" => {}
            _ => out.push(format!("--{k}={v}").into()),
        }
    }
    out
}

/// Global options taking a value, which may precede the subcommand.
const VALUED_GLOBALS: &[&str] = &["--seed", "--config", "--save-config"];

fn config_path(args: &[OsString]) -> Option<(usize, OsString)> {
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if a == "--" {
            break;
        }
        if a == "--config" {
            return args.get(i + 1).map(|p| (i, p.clone()));
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some((i, p.into()));
        }
        i += 1;
    }
    None
}

fn subcommand_position(args: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if VALUED_GLOBALS.contains(&a.as_ref()) {
            i += 2;
        } else if a.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

/// Inserts the config file's flags right after the subcommand so that any
/// flag given on the command line, coming later, overrides them.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some((_, path)) = config_path(&args) else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let flags = to_flags(&parse(&text)?);
    let Some(at) = subcommand_position(&args) else {
        return Ok(args);
    };
    let mut out = args[..=at].to_vec();
    out.extend(flags);
    out.extend_from_slice(&args[at + 1..]);
    Ok(out)
}

/// Serializes resolved arguments back into config-file form.
pub fn render(seed: u64, args: &Value) -> String {
    let mut s = format!("seed = {seed}\n");
    if let Value::Object(map) = args {
        for (k, v) in map {
            let key = k.replace('_', "-");
            match v {
                Value::Null | Value::Bool(false) => {}
                Value::String(x) => s.push_str(&format!("{key} = {x}\n")),
                other => s.push_str(&format!("{key} = {other}\n")),
            }
        }
    }
    s
}
