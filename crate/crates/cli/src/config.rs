//! Flat `key=value` config files.
//!
//! Keys are the long flag names of the subcommand (`skeleton-size=64`).
//! Entries are spliced in front of the command-line flags, and the parser
//! lets a later occurrence override an earlier one, so flags win.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Parses config text into `--key value` tokens. A value of `true` yields a
/// bare switch; `false` drops the entry.
pub fn config_tokens(text: &str) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected key=value, got '{raw}'", no + 1);
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || key.starts_with('-') || key == "config" {
            bail!("config line {}: bad key '{key}'", no + 1);
        }
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            v => {
                out.push(format!("--{key}").into());
                out.push(v.into());
            }
        }
    }
    Ok(out)
}

/// Expands `--config <path>` (anywhere after the subcommand) into the
/// file's entries, placed directly after the subcommand name.
pub fn expand_config_args(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = Some(it.next().context("--config needs a path")?);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(OsString::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .with_context(|| format!("reading config {}", Path::new(&path).display()))?;
    let tokens = config_tokens(&text)?;
    // binary name, subcommand, then config entries, then the user's flags
    let split = rest.len().min(2);
    let mut out: Vec<OsString> = rest[..split].to_vec();
    out.extend(tokens);
    out.extend_from_slice(&rest[split..]);
    Ok(out)
}
