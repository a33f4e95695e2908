//! `key = value` configuration files and command-line overrides.

use std::fmt::Write as _;
use std::path::Path;

use sritm_core::trainer::TrainConfig;
use sritm_core::NetworkConfig;

use crate::error::{io_err, CliError, CliResult};

/// One setting together with where it came from, for error messages.
#[derive(Clone, Debug, PartialEq)]
pub struct Setting {
    pub key: String,
    pub value: String,
    pub origin: String,
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_config(text: &str, source: &str) -> CliResult<Vec<Setting>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let origin = format!("{source}:{}", i + 1);
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{origin}: expected `key = value`, found `{line}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(CliError::Usage(format!("{origin}: empty key")));
        }
        out.push(Setting {
            key: k.to_string(),
            value: v.to_string(),
            origin,
        });
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> CliResult<Vec<Setting>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_config(&text, &path.display().to_string())
}

/// `--set key=value` flags.
pub fn parse_overrides(sets: &[String]) -> CliResult<Vec<Setting>> {
    sets.iter()
        .map(|s| {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got `{s}`")))?;
            Ok(Setting {
                key: k.trim().to_string(),
                value: v.trim().to_string(),
                origin: "--set".into(),
            })
        })
        .collect()
}

/// File settings followed by flag overrides, so later entries win.
pub fn gather(config: Option<&Path>, sets: &[String]) -> CliResult<Vec<Setting>> {
    let mut all = match config {
        Some(p) => read_config(p)?,
        None => Vec::new(),
    };
    all.extend(parse_overrides(sets)?);
    Ok(all)
}

/// Value of the last setting for `key`, if any.
pub fn lookup<'a>(settings: &'a [Setting], key: &str) -> Option<&'a str> {
    settings.iter().rev().find(|s| s.key == key).map(|s| s.value.as_str())
}

/// Routes each setting to the network or training config. Keys neither
/// owns are rejected by name.
pub fn apply(settings: &[Setting], net: &mut NetworkConfig, train: &mut TrainConfig) -> CliResult<()> {
    for s in settings {
        let owned = net.set(&s.key, &s.value).map_err(|e| with_origin(s, e))?
            || train.set(&s.key, &s.value).map_err(|e| with_origin(s, e))?;
        if !owned {
            return Err(CliError::Usage(format!("{}: unknown config key `{}`", s.origin, s.key)));
        }
    }
    Ok(())
}

fn with_origin(s: &Setting, e: sritm_core::Error) -> CliError {
    CliError::Usage(format!("{}: {e}", s.origin))
}

/// Writes `pairs` to stderr under a heading naming the subcommand.
pub fn log_resolved(command: &str, pairs: &[(&str, String)]) {
    eprint!("{}", resolved_text(command, pairs));
}

pub fn resolved_text(command: &str, pairs: &[(&str, String)]) -> String {
    let mut s = format!("# resolved config: {command}\n");
    for (k, v) in pairs {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

/// Splits `key = value` text (as produced by `to_kv`) into pairs.
pub fn kv_pairs(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}
