//! `--config FILE`: a TOML table whose keys are the subcommand's flag names.
//! The file's values are spliced in front of the command-line flags, and
//! every flag overrides itself, so the command line wins.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{ArgAction, Command};

/// Value of `--config` in the raw arguments, if any.
fn config_path(raw: &[OsString]) -> Option<PathBuf> {
    let mut it = raw.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(rest));
        }
    }
    None
}

/// Position just after the subcommand tokens and the (innermost) subcommand.
fn subcommand_path<'a>(raw: &[OsString], root: &'a Command) -> Option<(usize, &'a Command)> {
    let mut cmd = root;
    let mut end = None;
    for (i, a) in raw.iter().enumerate().skip(1) {
        let s = a.to_string_lossy();
        if let Some(sub) = cmd.find_subcommand(s.as_ref()) {
            cmd = sub;
            end = Some(i + 1);
        }
    }
    end.map(|e| (e, cmd))
}

fn toml_to_arg(value: &toml::Value) -> Option<String> {
    match value {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(f.to_string()),
        toml::Value::Boolean(b) => Some(b.to_string()),
        toml::Value::Array(items) => items.iter().map(toml_to_arg).collect::<Option<Vec<_>>>().map(|v| v.join(",")),
        _ => None,
    }
}

/// Arguments with the config file merged in.
pub fn merged_args(raw: Vec<OsString>, root: &Command) -> Result<Vec<OsString>, clap::Error> {
    let Some(path) = config_path(&raw) else {
        return Ok(raw);
    };
    let usage = |kind, msg: String| root.clone().error(kind, msg);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| usage(ErrorKind::Io, format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| usage(ErrorKind::InvalidValue, format!("config {}: {e}", path.display())))?;
    let Some((at, cmd)) = subcommand_path(&raw, root) else {
        return Ok(raw);
    };
    let mut spliced = Vec::new();
    for (key, value) in &table {
        let name = key.replace('_', "-");
        let arg = cmd
            .get_arguments()
            .chain(root.get_arguments())
            .find(|a| a.get_long() == Some(name.as_str()) && a.get_long() != Some("config"));
        let Some(arg) = arg else {
            return Err(usage(
                ErrorKind::UnknownArgument,
                format!("config {}: unknown key `{key}`", path.display()),
            ));
        };
        let text = toml_to_arg(value).ok_or_else(|| {
            usage(
                ErrorKind::InvalidValue,
                format!("config {}: key `{key}` needs a string, number, boolean or array", path.display()),
            )
        })?;
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            if text == "true" {
                spliced.push(OsString::from(format!("--{name}")));
            }
        } else {
            spliced.push(OsString::from(format!("--{name}={text}")));
        }
    }
    let mut out = raw[..at].to_vec();
    out.extend(spliced);
    out.extend_from_slice(&raw[at..]);
    Ok(out)
}
