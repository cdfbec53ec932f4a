//! Flat key=value config files merged into the argument list.

use std::ffi::OsString;
use std::path::Path;

use clap::CommandFactory;

use crate::cli::Cli;
use crate::CliError;

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!(
                "config line {}: expected key=value, got {line:?}",
                i + 1
            ))
        })?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            return Err(CliError::Usage(format!("config line {}: empty key", i + 1)));
        }
        pairs.push((key, v.trim().to_string()));
    }
    Ok(pairs)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

fn mentions(args: &[OsString], key: &str) -> bool {
    let flag = format!("--{key}");
    let with_eq = format!("--{key}=");
    args.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag.as_str() || s.starts_with(&with_eq)
    })
}

/// Appends the config file's settings to `args` for every flag the command
/// line does not set. Boolean flags accept true/false.
pub fn overlay(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path)).map_err(|e| {
        CliError::Usage(format!(
            "cannot read config {}: {e}",
            Path::new(&path).display()
        ))
    })?;
    let pairs = parse(&text)?;

    let root = Cli::command();
    let sub_name = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .find(|a| root.find_subcommand(a).is_some());
    let sub = sub_name.as_deref().and_then(|s| root.find_subcommand(s));

    let mut out = args.clone();
    for (key, value) in pairs {
        if key == "config" || mentions(&args, &key) {
            continue;
        }
        let arg = sub
            .and_then(|c| {
                c.get_arguments()
                    .find(|a| a.get_long() == Some(key.as_str()))
            })
            .or_else(|| {
                root.get_arguments()
                    .find(|a| a.get_long() == Some(key.as_str()))
            })
            .ok_or_else(|| {
                CliError::Usage(format!("config key {key:?} is not a flag of this command"))
            })?;
        if arg.get_action().takes_values() {
            out.push(format!("--{key}").into());
            out.push(value.into());
        } else {
            match value.as_str() {
                "true" | "1" | "yes" => out.push(format!("--{key}").into()),
                "false" | "0" | "no" => {}
                other => {
                    return Err(CliError::Usage(format!(
                        "config key {key:?} is a switch; expected true or false, got {other:?}"
                    )))
                }
            }
        }
    }
    Ok(out)
}
