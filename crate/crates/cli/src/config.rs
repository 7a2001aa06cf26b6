//! Merges a `key = value` config file underneath the command line.
//!
//! Keys are the subcommand's long flag names, with `_` accepted for `-`.
//! Config entries for flags that also appear on the command line are
//! dropped; the rest are inserted right after the subcommand name.

use std::ffi::OsString;
use std::fs;

use clap::{ArgAction, CommandFactory, Parser};
use voxsource::eval::grid::parse_key_value_lines;

use crate::args::Cli;
use crate::error::{usage, CliError};

const SUBCOMMANDS: [&str; 4] = ["synth", "extract", "train", "eval"];

/// Either a clap error (help, version, bad flags) or a config problem.
#[derive(Debug)]
pub enum ParseFailure {
    Clap(clap::Error),
    Config(CliError),
}

fn find_config_and_subcommand(raw: &[OsString]) -> (Option<OsString>, Option<usize>) {
    let mut config = None;
    let mut sub = None;
    let mut i = 1;
    while i < raw.len() {
        let tok = raw[i].to_string_lossy();
        if tok == "--config" {
            config = raw.get(i + 1).cloned();
            i += 2;
            continue;
        }
        if let Some(v) = tok.strip_prefix("--config=") {
            config = Some(v.into());
        } else if sub.is_none() && SUBCOMMANDS.contains(&tok.as_ref()) {
            sub = Some(i);
        }
        i += 1;
    }
    (config, sub)
}

fn truthy(v: &str) -> Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("expected a boolean, found {v:?}")),
    }
}

/// Turns config lines into flags for subcommand `sub`.
pub fn config_flags(sub: &str, text: &str) -> Result<Vec<OsString>, CliError> {
    let cmd = Cli::command();
    let sc = cmd.find_subcommand(sub).ok_or_else(|| usage(format!("unknown subcommand {sub}")))?;
    let mut flags = Vec::new();
    for (line, key, value) in parse_key_value_lines(text).map_err(usage)? {
        let long = key.replace('_', "-");
        let arg = sc
            .get_arguments()
            .find(|a| a.get_long() == Some(long.as_str()) && long != "config")
            .ok_or_else(|| usage(format!("config line {line}: {sub} has no option {key:?}")))?;
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            if truthy(&value).map_err(|e| usage(format!("config line {line}: {key}: {e}")))? {
                flags.push(format!("--{long}").into());
            }
        } else {
            flags.push(format!("--{long}={value}").into());
        }
    }
    Ok(flags)
}

fn flag_name(token: &str) -> Option<String> {
    let name = token.strip_prefix("--")?;
    Some(name.split('=').next().unwrap_or(name).to_string())
}

/// Parses `raw` (including the program name), merging the file named by
/// `--config` if present.
pub fn parse_args(raw: Vec<OsString>) -> Result<Cli, ParseFailure> {
    let (config, sub) = find_config_and_subcommand(&raw);
    let merged = match (config, sub) {
        (Some(path), Some(idx)) => {
            let text = fs::read_to_string(&path)
                .map_err(|e| ParseFailure::Config(usage(format!("config file {}: {e}", path.to_string_lossy()))))?;
            let sub = raw[idx].to_string_lossy().into_owned();
            // list flags append rather than override, so drop any config
            // entry the command line sets itself
            let given: Vec<String> = raw[idx + 1..].iter().filter_map(|t| flag_name(&t.to_string_lossy())).collect();
            let extra = config_flags(&sub, &text)
                .map_err(ParseFailure::Config)?
                .into_iter()
                .filter(|f| flag_name(&f.to_string_lossy()).is_none_or(|n| !given.contains(&n)));
            let mut merged = raw[..=idx].to_vec();
            merged.extend(extra);
            merged.extend_from_slice(&raw[idx + 1..]);
            merged
        }
        _ => raw,
    };
    Cli::try_parse_from(merged).map_err(ParseFailure::Clap)
}
