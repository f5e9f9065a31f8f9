//! `key=value` config files.
//!
//! Every key names a long flag of the subcommand. The file's entries are
//! placed before the command-line flags, so flags given explicitly win.

use crate::error::{Error, Result};

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {}: expected key=value, got {raw:?}", i + 1)))?;
        let k = k.trim();
        if k.is_empty() || k.contains(char::is_whitespace) {
            return Err(Error::Config(format!("config line {}: bad key {k:?}", i + 1)));
        }
        out.push((k.replace('_', "-"), v.trim().to_string()));
    }
    Ok(out)
}

/// Turns config entries into flags. `true` becomes a bare switch and
/// `false` is dropped.
pub fn config_args(entries: &[(String, String)]) -> Vec<String> {
    let mut args = Vec::new();
    for (k, v) in entries {
        match v.as_str() {
            "true" => args.push(format!("--{k}")),
            "false" => {}
            _ => args.push(format!("--{k}={v}")),
        }
    }
    args
}

/// Splices `--config FILE` (or `--config=FILE`) into `args`, which start
/// with the program name and the subcommand.
pub fn expand_config(args: Vec<String>) -> Result<Vec<String>> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().ok_or_else(|| Error::Config("--config needs a file".into()))?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Config(format!("cannot read config {path}: {e}")))?;
    let injected = config_args(&parse_config(&text)?);
    let head = rest.len().min(2);
    let mut out: Vec<String> = rest[..head].to_vec();
    out.extend(injected);
    out.extend_from_slice(&rest[head..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_switches() {
        let e = parse_config("# run\ntrials = 10\nsolver=alpha # preset\ntiming=true\nquiet=false\n").unwrap();
        assert_eq!(config_args(&e), ["--trials=10", "--solver=alpha", "--timing"]);
        assert!(parse_config("trials 10").is_err());
        assert_eq!(parse_config("lambda_max=3").unwrap()[0].0, "lambda-max");
    }
}
