//! `--config` merging. Config keys become extra flags appended to the
//! command line, skipping any flag the user already passed.

use std::ffi::OsString;
use std::path::Path;

use clap::parser::ValueSource;
use clap::{ArgMatches, Command};
use serde_json::Value;

use crate::error::{CliError, Result};

fn render(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Flags contributed by the config file at `path` for the matched subcommand.
pub fn config_args(path: &Path, root: &Command, matches: &ArgMatches) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let Value::Object(map) = value else {
        return Err(CliError::Usage(format!(
            "{}: config must be a JSON object",
            path.display()
        )));
    };
    let (name, sub_matches) = matches
        .subcommand()
        .ok_or_else(|| CliError::Usage("no subcommand".into()))?;
    let sub = root
        .find_subcommand(name)
        .expect("matched subcommand exists");

    let mut out = Vec::new();
    for (key, v) in map {
        let flag = key.replace('_', "-");
        let arg = sub
            .get_arguments()
            .chain(root.get_arguments())
            .find(|a| a.get_long() == Some(flag.as_str()) && flag != "config")
            .ok_or_else(|| CliError::Usage(format!("unknown config key {key:?} for `{name}`")))?;
        let long = arg.get_long().expect("matched on the long name");
        if sub_matches.value_source(arg.get_id().as_str()) == Some(ValueSource::CommandLine) {
            continue;
        }
        let bad = || CliError::Usage(format!("config key {key:?} has an unsupported value"));
        match &v {
            Value::Bool(true) => out.push(format!("--{long}").into()),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                for item in items {
                    out.push(format!("--{long}={}", render(item).ok_or_else(bad)?).into());
                }
            }
            other => out.push(format!("--{long}={}", render(other).ok_or_else(bad)?).into()),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::Cli;
    use clap::CommandFactory;

    fn merged(cfg: &str, argv: &[&str]) -> Result<Vec<String>> {
        let dir = std::env::temp_dir().join(format!("aggtruth-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(format!("{:x}.json", cfg.len() ^ argv.len() << 8));
        std::fs::write(&path, cfg).unwrap();
        let root = Cli::command();
        let matches = root.clone().try_get_matches_from(argv).unwrap();
        let out = config_args(&path, &root, &matches);
        std::fs::remove_file(&path).unwrap();
        Ok(out?.into_iter().map(|s| s.into_string().unwrap()).collect())
    }

    #[test]
    fn keys_become_flags() {
        let args = merged(
            r#"{"stride": 2, "hidden": true, "window_size": null, "seed": 7}"#,
            &["aggtruth", "dataset", "--in", "a", "--out", "b"],
        )
        .unwrap();
        assert_eq!(args, ["--hidden", "--seed=7", "--stride=2"]);
    }

    #[test]
    fn command_line_wins_and_arrays_repeat() {
        let args = merged(
            r#"{"alpha": 0.5, "in": ["x", "y"]}"#,
            &["aggtruth", "ttest", "--alpha", "0.1", "--in", "z"],
        )
        .unwrap();
        assert!(args.is_empty(), "{args:?}");
        let args = merged(r#"{"in": ["x", "y"]}"#, &["aggtruth", "ttest", "--in", "z"]).unwrap();
        assert!(args.is_empty());
        let args = merged(r#"{"in": ["x", "y"]}"#, &["aggtruth", "inspect", "z"]);
        assert!(matches!(args, Err(CliError::Usage(_))));
        let args = merged(
            r#"{"grid": ["all", "center:0.5"]}"#,
            &["aggtruth", "sweep", "--protocol", "p", "--grid", "all"],
        );
        assert!(args.unwrap().is_empty());
    }

    #[test]
    fn bad_keys_and_values_are_usage_errors() {
        let argv = ["aggtruth", "dataset", "--in", "a", "--out", "b"];
        for cfg in [
            r#"{"colour": 1}"#,
            r#"{"config": "x"}"#,
            r#"{"stride": {"a": 1}}"#,
            "[1]",
            "{",
        ] {
            assert!(
                matches!(merged(cfg, &argv), Err(CliError::Usage(_))),
                "{cfg}"
            );
        }
    }
}
