//! `--config FILE` support: flat `key = value` lines spliced into the
//! argument list right after the subcommand, so explicit flags win.

use std::fs;

use anyhow::{bail, Context, Result};

/// Parses `key = value` lines into flag arguments. Blank lines and lines
/// starting with `#` are skipped; `true` becomes a bare flag and `false`
/// drops the key.
pub fn parse(text: &str) -> Result<Vec<String>> {
    let mut args = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected key = value, got {line:?}", n + 1);
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() {
            bail!("config line {}: empty key", n + 1);
        }
        match value {
            "true" => args.push(format!("--{key}")),
            "false" => {}
            _ => {
                args.push(format!("--{key}"));
                args.push(value.to_string());
            }
        }
    }
    Ok(args)
}

/// Removes `--config PATH` (or `--config=PATH`) from `args` and inserts the
/// file's flags after the subcommand name.
pub fn expand(mut args: Vec<String>, subcommands: &[&str]) -> Result<Vec<String>> {
    let mut path = None;
    let mut i = 1;
    while i < args.len() {
        if args[i] == "--config" {
            if i + 1 >= args.len() {
                bail!("--config needs a file path");
            }
            path = Some(args.remove(i + 1));
            args.remove(i);
        } else if let Some(p) = args[i].strip_prefix("--config=") {
            path = Some(p.to_string());
            args.remove(i);
        } else {
            i += 1;
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config file {path}"))?;
    let extra = parse(&text)?;
    let at = args
        .iter()
        .position(|a| subcommands.contains(&a.as_str()))
        .map_or(args.len(), |p| p + 1);
    args.splice(at..at, extra);
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lines() {
        let args = parse("# comment\ngamma = 3\n\ntrace = true\njson=false\nmax_tokens=10\n").unwrap();
        assert_eq!(args, ["--gamma", "3", "--trace", "--max-tokens", "10"]);
        assert!(parse("gamma 3").is_err());
    }

    #[test]
    fn splices_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "gamma = 2\n").unwrap();
        let args: Vec<String> = ["specdec", "decode", "--config", path.to_str().unwrap(), "--gamma", "5"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let out = expand(args, &["decode"]).unwrap();
        assert_eq!(out, ["specdec", "decode", "--gamma", "2", "--gamma", "5"]);
    }
}
