//! Layered configuration: built-in defaults, then a TOML file, then
//! `--override KEY=VALUE` pairs. Unknown keys are rejected.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

pub fn resolve<T>(file: Option<&Path>, overrides: &[String]) -> CliResult<T>
where
    T: Serialize + DeserializeOwned + Default,
{
    let mut tree = match Value::try_from(T::default()) {
        Ok(Value::Table(t)) => t,
        _ => return Err(CliError::Config("defaults do not form a table".into())),
    };
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let layer: Table = text
            .parse()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        merge(&mut tree, layer);
    }
    for item in overrides {
        let (key, value) = parse_override(item)?;
        set_path(&mut tree, &key, value)?;
    }
    Value::Table(tree)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))
}

fn merge(base: &mut Table, layer: Table) {
    for (k, v) in layer {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(l)) => merge(b, l),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_override(item: &str) -> CliResult<(Vec<String>, Value)> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{item}` is not KEY=VALUE")))?;
    let key: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if key.iter().any(String::is_empty) {
        return Err(CliError::Config(format!("override `{item}` has an empty key")));
    }
    // Bare words that are not TOML literals are taken as strings.
    let value = format!("v = {}", raw.trim())
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.trim().to_string()));
    Ok((key, value))
}

fn set_path(tree: &mut Table, key: &[String], value: Value) -> CliResult<()> {
    let (last, parents) = key.split_last().expect("non-empty key");
    let mut node = tree;
    for part in parents {
        node = match node.entry(part.clone()).or_insert_with(|| Value::Table(Table::new())) {
            Value::Table(t) => t,
            _ => return Err(CliError::Config(format!("`{part}` is not a table"))),
        };
    }
    node.insert(last.clone(), value);
    Ok(())
}

/// Serializes a resolved config back to TOML so a run can be replayed.
pub fn to_toml<T: Serialize>(params: &T) -> CliResult<String> {
    toml::to_string(params).map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))
}
