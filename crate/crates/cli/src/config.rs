//! Line-oriented `key = value` configuration files.
//!
//! Each entry becomes the flag `--key value` and is inserted right after the
//! subcommand, so flags given on the command line override the file.

use std::path::Path;

use crate::error::{CliError, CliResult};

/// Turns a config file's text into flag tokens. `true` and `false` toggle
/// bare switches.
pub fn config_tokens(text: &str, origin: &Path) -> CliResult<Vec<String>> {
    let mut tokens = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: &str| CliError::Usage(format!("{}:{}: {msg}", origin.display(), i + 1));
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad("expected 'key = value'"))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Err(bad(&format!("invalid key '{key}'")));
        }
        if key == "config" {
            return Err(bad("config files cannot include other config files"));
        }
        let value = value.trim();
        let value = value
            .strip_prefix('"')
            .and_then(|v| v.strip_suffix('"'))
            .unwrap_or(value);
        match value {
            "true" => tokens.push(format!("--{key}")),
            "false" => {}
            _ => {
                tokens.push(format!("--{key}"));
                tokens.push(value.to_string());
            }
        }
    }
    Ok(tokens)
}

/// Finds `--config PATH` (or `--config=PATH`) and splices the file's flags
/// in after the subcommand.
pub fn expand_args(argv: &[String]) -> CliResult<Vec<String>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut config = None;
    let mut iter = argv.iter().skip(1);
    while let Some(arg) = iter.next() {
        if arg == "--config" {
            let path = iter
                .next()
                .ok_or_else(|| CliError::Usage("--config needs a path".into()))?;
            config = Some(path.clone());
        } else if let Some(path) = arg.strip_prefix("--config=") {
            config = Some(path.to_string());
        } else {
            rest.push(arg.clone());
        }
    }
    let mut out = vec![argv.first().cloned().unwrap_or_else(|| "cps".into())];
    let Some(path) = config else {
        out.extend(rest);
        return Ok(out);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let tokens = config_tokens(&text, path)?;
    let sub = rest
        .iter()
        .position(|a| !a.starts_with('-'))
        .ok_or_else(|| CliError::Usage("--config needs a subcommand".into()))?;
    out.extend(rest[..=sub].iter().cloned());
    out.extend(tokens);
    out.extend(rest[sub + 1..].iter().cloned());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_from_file() {
        let text = "# comment\npenalty = cauchy\nmax_iter = 20 # trailing\nquick = true\nverbose = false\nreport = \"a b.json\"\n";
        let t = config_tokens(text, Path::new("x.cfg")).unwrap();
        assert_eq!(
            t,
            [
                "--penalty",
                "cauchy",
                "--max-iter",
                "20",
                "--quick",
                "--report",
                "a b.json"
            ]
        );
    }

    #[test]
    fn malformed_lines_are_rejected() {
        let err = config_tokens("penalty cauchy\n", Path::new("x.cfg")).unwrap_err();
        assert!(err.to_string().contains("x.cfg:1"));
        assert!(config_tokens("config = y\n", Path::new("x.cfg")).is_err());
    }

    #[test]
    fn no_config_passes_through() {
        let argv: Vec<String> = ["cps", "superres", "--seed", "3"]
            .map(String::from)
            .to_vec();
        assert_eq!(expand_args(&argv).unwrap(), argv);
    }
}
