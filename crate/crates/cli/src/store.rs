//! Append-only results store: one directory per run, named by a content hash
//! of the normalized config.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::records::{tables, RunRecords, Summary};

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "FRACDN_OUTPUT_DIR";

const CONFIG_FILE: &str = "config.json";
const RECORDS_FILE: &str = "records.json";
const SUMMARY_FILE: &str = "summary.json";
const LOG_FILE: &str = "run.log";

/// JSON text with object keys sorted at every level.
pub fn canonical_json(v: &Value) -> String {
    match v {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            let body: Vec<String> = keys
                .into_iter()
                .map(|k| format!("{}:{}", Value::String(k.clone()), canonical_json(&map[k])))
                .collect();
            format!("{{{}}}", body.join(","))
        }
        Value::Array(items) => {
            format!("[{}]", items.iter().map(canonical_json).collect::<Vec<_>>().join(","))
        }
        other => other.to_string(),
    }
}

/// The config as hashed and stored: defaults filled in, `output_dir`
/// removed, plus content digests of any tables it references.
pub fn normalized_config(config: &RunConfig, table_digests: &[(String, String)]) -> Value {
    let mut v = serde_json::to_value(config).expect("config serializes");
    if let Value::Object(map) = &mut v {
        map.remove("output_dir");
        if !table_digests.is_empty() {
            let tables: serde_json::Map<String, Value> = table_digests
                .iter()
                .map(|(k, d)| (k.clone(), Value::String(d.clone())))
                .collect();
            map.insert("table_digests".into(), Value::Object(tables));
        }
    }
    v
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Run id: the first 16 hex digits of the SHA-256 of the canonical config.
pub fn run_id(normalized: &Value) -> String {
    sha256_hex(canonical_json(normalized).as_bytes())[..16].to_string()
}

/// Output root: the environment override if set, otherwise `configured`.
pub fn output_root(configured: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => configured.to_path_buf(),
    }
}

#[derive(Debug, Clone)]
pub struct ResultsStore {
    root: PathBuf,
}

impl ResultsStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    /// A run counts as present once its records are written.
    pub fn contains(&self, id: &str) -> bool {
        self.run_dir(id).join(RECORDS_FILE).is_file()
    }

    fn write(&self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(path, bytes).map_err(|e| CliError::io(path, e))
    }

    /// Writes config snapshot, records, summary, log and CSV tables.
    pub fn save(
        &self,
        id: &str,
        normalized: &Value,
        records: &RunRecords,
        log: &str,
    ) -> Result<Summary, CliError> {
        let dir = self.run_dir(id);
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        self.write(
            &dir.join(CONFIG_FILE),
            serde_json::to_string_pretty(normalized).expect("json").as_bytes(),
        )?;
        self.write(
            &dir.join(RECORDS_FILE),
            serde_json::to_string_pretty(records).expect("json").as_bytes(),
        )?;
        let summary = records.summary(id);
        self.write(
            &dir.join(SUMMARY_FILE),
            serde_json::to_string_pretty(&summary).expect("json").as_bytes(),
        )?;
        self.write(&dir.join(LOG_FILE), log.as_bytes())?;
        for t in tables(records) {
            self.write(&dir.join(format!("{}.csv", t.name)), &t.bytes)?;
        }
        Ok(summary)
    }

    pub fn load(&self, id: &str) -> Result<RunRecords, CliError> {
        if !self.contains(id) {
            return Err(CliError::UnknownRun(id.to_string()));
        }
        let path = self.run_dir(id).join(RECORDS_FILE);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Corrupt {
            run: id.to_string(),
            reason: e.to_string(),
        })
    }

    /// Writes CSV tables or the JSON summary into `<run>/export/` and returns
    /// the written paths.
    pub fn export(&self, id: &str, format: ExportFormat) -> Result<Vec<PathBuf>, CliError> {
        let records = self.load(id)?;
        let dir = self.run_dir(id).join("export");
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let mut written = Vec::new();
        match format {
            ExportFormat::Csv => {
                for t in tables(&records) {
                    let path = dir.join(format!("{}.csv", t.name));
                    self.write(&path, &t.bytes)?;
                    written.push(path);
                }
            }
            ExportFormat::Json => {
                let path = dir.join(SUMMARY_FILE);
                let summary = records.summary(id);
                self.write(&path, serde_json::to_string_pretty(&summary).expect("json").as_bytes())?;
                written.push(path);
            }
        }
        Ok(written)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExportFormat {
    Csv,
    Json,
}
