//! CSV and JSON emission plus the run manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::CliResult;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shortest round-trip decimal form, so replays compare byte for byte.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub struct Table {
    schema: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(schema: &str, header: &[&str]) -> Self {
        Self { schema: schema.to_string(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Collects the files written by one run and the metadata stamped on each.
pub struct RunOutput {
    dir: PathBuf,
    subcommand: String,
    meta: Vec<(String, String)>,
    files: Vec<String>,
    schemas: Map<String, Value>,
}

impl RunOutput {
    pub fn new(dir: &Path, subcommand: &str) -> CliResult<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            subcommand: subcommand.to_string(),
            meta: vec![("version".into(), VERSION.into()), ("subcommand".into(), subcommand.into())],
            files: Vec::new(),
            schemas: Map::new(),
        })
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn csv(&mut self, name: &str, table: &Table) -> CliResult<()> {
        let mut file = BufWriter::new(File::create(self.dir.join(name))?);
        writeln!(file, "# schema: {}", table.schema)?;
        for (k, v) in &self.meta {
            writeln!(file, "# {k}: {v}")?;
        }
        let mut w = csv::Writer::from_writer(file);
        w.write_record(&table.header)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        self.schemas.insert(name.to_string(), Value::String(table.schema.clone()));
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        std::fs::write(self.dir.join(name), text + "\n")?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn text(&mut self, name: &str, body: &str) -> CliResult<()> {
        std::fs::write(self.dir.join(name), body)?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Writes `manifest.json` echoing every resolved parameter.
    pub fn finish(mut self, params: &Value, extra: Value) -> CliResult<PathBuf> {
        let mut manifest = json!({
            "tool": "mlt",
            "version": VERSION,
            "subcommand": self.subcommand,
            "params": params,
            "metadata": self.meta.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect::<Map<_, _>>(),
            "csv_schemas": Value::Object(std::mem::take(&mut self.schemas)),
            "replay": format!("mlt {} --config config.toml", self.subcommand),
        });
        if let (Value::Object(m), Value::Object(e)) = (&mut manifest, extra) {
            m.extend(e);
        }
        self.files.push("manifest.json".into());
        manifest["files"] = json!(self.files);
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)? + "\n")?;
        Ok(path)
    }
}
