//! `key = value` config files, merged into the argument list ahead of the
//! command-line flags so that flags win.

use std::ffi::OsString;
use std::fs;

use crate::CliError;

/// Parses config file contents into `--key=value` arguments.
pub fn parse_config(text: &str) -> Result<Vec<OsString>, CliError> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("config line {}: expected `key = value`", no + 1)));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key == "config" {
            return Err(CliError::Usage(format!("config line {}: invalid key `{}`", no + 1, key)));
        }
        out.push(OsString::from(format!("--{key}={value}")));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Result<Option<OsString>, CliError> {
    let mut iter = args.iter().skip(1);
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return match iter.next() {
                Some(p) => Ok(Some(p.clone())),
                None => Err(CliError::Usage("--config needs a path".into())),
            };
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Ok(Some(p.into()));
        }
    }
    Ok(None)
}

/// Expands `--config <path>` by inserting the file's settings right after the
/// program name.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&args)? else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.to_string_lossy())))?;
    let settings = parse_config(&text)?;
    let mut out = Vec::with_capacity(args.len() + settings.len());
    let mut rest = args.into_iter();
    out.extend(rest.next());
    out.extend(settings);
    out.extend(rest);
    Ok(out)
}
