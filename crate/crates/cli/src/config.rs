//! `--config` files: `key = value` lines whose keys are long flag names.
//!
//! Config entries are spliced into the argument list directly after the
//! subcommand, ahead of the user's own flags. Every subcommand lets a later
//! occurrence of a flag override an earlier one, so explicit flags win.

use std::ffi::OsString;
use std::path::Path;

use tad_core::{Result, TadError};

pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            TadError::Parse {
                line: i + 1,
                message: format!("expected key=value, got '{line}'"),
            }
        })?;
        let key = key.trim().trim_start_matches("--");
        if key.is_empty() {
            return Err(TadError::Parse {
                line: i + 1,
                message: "empty key".into(),
            });
        }
        pairs.push((key.to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut iter = args.iter();
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return iter.next().cloned();
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(rest.into());
        }
    }
    None
}

/// Returns `args` with the config file's entries inserted after the subcommand.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path))?;
    let pairs = parse_config(&text)?;
    let Some(sub) = args.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')) else {
        return Ok(args);
    };
    let at = sub + 2;
    let mut injected: Vec<OsString> = Vec::new();
    for (key, value) in pairs {
        match value.as_str() {
            "true" => injected.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                injected.push(format!("--{key}").into());
                injected.push(value.into());
            }
        }
    }
    let mut out = args[..at].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[at..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_comments() {
        let pairs = parse_config("# run\nseed = 4\n\n--bin-width=0.02\n").unwrap();
        assert_eq!(pairs, vec![("seed".into(), "4".into()), ("bin-width".into(), "0.02".into())]);
        assert!(parse_config("novalue\n").is_err());
    }

    #[test]
    fn injects_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "seed=9\nper-pool=true\nparallel=false\n").unwrap();
        let args: Vec<OsString> = ["tad", "sample", "--config", cfg.to_str().unwrap(), "--seed", "1"]
            .iter()
            .map(OsString::from)
            .collect();
        let out: Vec<String> = expand_args(args)
            .unwrap()
            .into_iter()
            .map(|a| a.into_string().unwrap())
            .collect();
        assert_eq!(out[..5], ["tad", "sample", "--seed", "9", "--per-pool"]);
        assert_eq!(out[out.len() - 2..], ["--seed", "1"]);
    }
}
