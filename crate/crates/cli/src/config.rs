//! TOML config layering.
//!
//! A config file holds top-level keys that apply to every subcommand plus an
//! optional table per subcommand. Keys are flag names (`train_end` or
//! `train-end`). Entries become ordinary flags inserted right after the
//! subcommand, so flags typed on the command line come later and win.

use std::ffi::OsString;

use anyhow::{bail, Context, Result};
use toml::Value;

pub const SUBCOMMANDS: [&str; 6] = ["ingest", "split", "featurize", "merge", "train-eval", "report"];

/// Rewrite `args` (including the program name) with config-derived flags.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(config) = find_config(&args)? else {
        return Ok(args);
    };
    let Some(sub_pos) = args
        .iter()
        .position(|a| SUBCOMMANDS.iter().any(|s| a.to_str() == Some(s)))
    else {
        return Ok(args);
    };
    let sub = args[sub_pos].to_str().unwrap_or_default().to_string();
    let text = std::fs::read_to_string(&config).with_context(|| format!("reading config {}", config.display()))?;
    let table: toml::Table = text
        .parse()
        .with_context(|| format!("parsing config {}", config.display()))?;
    let cmd = <crate::Cli as clap::CommandFactory>::command();
    let known: Vec<String> = cmd
        .find_subcommand(&sub)
        .into_iter()
        .flat_map(|c| c.get_arguments())
        .chain(cmd.get_arguments())
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect();
    let flags = config_flags(&table, &sub, |flag| known.iter().any(|k| k == flag))?;
    let mut out = args[..=sub_pos].to_vec();
    out.extend(flags.into_iter().map(OsString::from));
    out.extend(args[sub_pos + 1..].iter().cloned());
    Ok(out)
}

fn find_config(args: &[OsString]) -> Result<Option<std::path::PathBuf>> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let Some(s) = a.to_str() else { continue };
        if s == "--config" {
            let Some(p) = it.next() else {
                bail!("--config needs a path")
            };
            return Ok(Some(p.into()));
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Ok(Some(p.into()));
        }
    }
    Ok(None)
}

/// Flags for `sub`: top-level keys the subcommand `accepts` (by long flag
/// name) first, then every key of the subcommand's own table.
pub fn config_flags(table: &toml::Table, sub: &str, accepts: impl Fn(&str) -> bool) -> Result<Vec<String>> {
    let mut flags = Vec::new();
    for (k, v) in table {
        if !v.is_table() && accepts(&k.replace('_', "-")) {
            push_flag(&mut flags, k, v)?;
        }
    }
    let section = table.get(sub).or_else(|| table.get(&sub.replace('-', "_")));
    if let Some(Value::Table(t)) = section {
        for (k, v) in t {
            push_flag(&mut flags, k, v)?;
        }
    }
    Ok(flags)
}

fn push_flag(flags: &mut Vec<String>, key: &str, value: &Value) -> Result<()> {
    let flag = format!("--{}", key.replace('_', "-"));
    if flag == "--config" {
        return Ok(());
    }
    match value {
        Value::Boolean(true) => flags.push(flag),
        Value::Boolean(false) => {}
        Value::Array(items) => {
            for item in items {
                flags.push(flag.clone());
                flags.push(scalar(key, item)?);
            }
        }
        other => {
            flags.push(flag);
            flags.push(scalar(key, other)?);
        }
    }
    Ok(())
}

fn scalar(key: &str, v: &Value) -> Result<String> {
    Ok(match v {
        Value::String(s) => s.clone(),
        Value::Integer(i) => i.to_string(),
        Value::Float(f) => f.to_string(),
        Value::Boolean(b) => b.to_string(),
        _ => bail!("config key '{key}' must be a scalar or a list of scalars"),
    })
}
