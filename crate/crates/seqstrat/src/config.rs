//! Config files mirror the command line: top-level keys are global flags,
//! tables named after subcommands hold that subcommand's flags.
//!
//! ```toml
//! seed = 7
//! [rank]
//! methods = ["msss", "msegsss"]
//! n = 200
//! ```
//!
//! The file is expanded into flags placed ahead of the user's own, so flags
//! given on the command line win.

use std::ffi::OsString;
use std::path::Path;

use toml::Value;

use crate::{Error, Result};

/// Global flags that consume the following token.
const GLOBAL_VALUE_FLAGS: [&str; 4] = ["--seed", "--jobs", "--config", "--out-dir"];

fn flag_tokens(key: &str, value: &Value, out: &mut Vec<OsString>) -> Result<()> {
    let flag = format!("--{}", key.replace('_', "-"));
    let scalar = |v: &Value| -> Result<String> {
        match v {
            Value::String(s) => Ok(s.clone()),
            Value::Integer(i) => Ok(i.to_string()),
            Value::Float(f) => Ok(f.to_string()),
            Value::Boolean(b) => Ok(b.to_string()),
            other => Err(Error::Usage(format!("config key {key:?}: unsupported value {other}"))),
        }
    };
    match value {
        Value::Boolean(true) => out.push(flag.into()),
        Value::Boolean(false) => {}
        Value::Array(items) => {
            let joined = items.iter().map(scalar).collect::<Result<Vec<_>>>()?.join(",");
            out.push(flag.into());
            out.push(joined.into());
        }
        Value::Table(_) => return Err(Error::Usage(format!("config key {key:?}: nested tables are not flags"))),
        v => {
            out.push(flag.into());
            out.push(scalar(v)?.into());
        }
    }
    Ok(())
}

/// Location of `--config` in `args` (after the program name), if any.
fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut iter = args.iter().skip(1);
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return iter.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

/// Index of the subcommand token in `args`.
fn subcommand_index(args: &[OsString], subcommands: &[&str]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let s = args[i].to_string_lossy();
        if GLOBAL_VALUE_FLAGS.contains(&s.as_ref()) {
            i += 2;
            continue;
        }
        if subcommands.contains(&s.as_ref()) {
            return Some(i);
        }
        if !s.starts_with('-') {
            return None;
        }
        i += 1;
    }
    None
}

/// Expand a `--config` file into explicit flags. Without a config file or a
/// recognizable subcommand the arguments are returned unchanged.
pub fn expand_args(args: Vec<OsString>, subcommands: &[&str]) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let Some(at) = subcommand_index(&args, subcommands) else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Usage(format!("{}: {}", path.display(), e.message())))?;
    let command = args[at].to_string_lossy().into_owned();

    let mut from_file = Vec::new();
    for (key, value) in &doc {
        match value {
            Value::Table(table) => {
                if !subcommands.contains(&key.as_str()) {
                    return Err(Error::Usage(format!("{}: unknown section [{key}]", path.display())));
                }
                if *key == command {
                    for (k, v) in table {
                        flag_tokens(k, v, &mut from_file)?;
                    }
                }
            }
            v => flag_tokens(key, v, &mut from_file)?,
        }
    }
    // global flags are accepted after the subcommand, so everything the user
    // typed can follow the config-derived flags
    let mut out = vec![args[0].clone(), args[at].clone()];
    out.extend(from_file);
    out.extend(args[1..at].iter().cloned());
    out.extend(args[at + 1..].iter().cloned());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_flags_precede_user_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seed = 3\n[split]\nratios = [0.8, 0.2]\nmethod = \"msss\"\n[rank]\nn = 5\n").unwrap();
        let p = path.to_str().unwrap();
        let out = expand_args(os(&["seqstrat", "--config", p, "split", "--seed", "9"]), &["split", "rank"]).unwrap();
        assert_eq!(
            out,
            os(&["seqstrat", "split", "--seed", "3", "--method", "msss", "--ratios", "0.8,0.2", "--config", p, "--seed", "9"])
        );
    }

    #[test]
    fn untouched_without_config() {
        let args = os(&["seqstrat", "split", "--seed", "1"]);
        assert_eq!(expand_args(args.clone(), &["split"]).unwrap(), args);
    }

    #[test]
    fn unknown_section_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[bogus]\nx = 1\n").unwrap();
        let args = os(&["seqstrat", "--config", path.to_str().unwrap(), "split"]);
        assert!(expand_args(args, &["split"]).is_err());
    }
}
