//! Output files: `<id>.csv`, `<id>.json` and `<id>.meta.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::scenario::config::ScenarioConfig;
use crate::scenario::figures::{ScenarioOutput, Table};
use crate::{Error, Result};

/// Provenance of one run. The wall clock makes this file differ between runs;
/// the CSV and JSON outputs do not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: String,
    pub config: ScenarioConfig,
    /// `sha256("blob <len>\0" + canonical config JSON)`.
    pub config_hash: String,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_s: f64,
    pub version: String,
    pub converged: bool,
}

/// Canonical JSON of the resolved config.
pub fn canonical_config(config: &ScenarioConfig) -> Result<String> {
    Ok(serde_json::to_string(&config.resolved())?)
}

/// Git-style content hash: SHA-256 over a `blob <len>` header, a NUL byte and
/// the content.
pub fn content_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    hex::encode(h.finalize())
}

/// Comma-separated, LF-terminated, header row of `name[unit]` labels, floats
/// in shortest round-trip form.
pub fn table_csv(table: &Table) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| format!("{v}")))?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Results document echoing the resolved config.
pub fn results_json(output: &ScenarioOutput, config: &ScenarioConfig) -> Result<String> {
    let doc = json!({
        "scenario": output.id,
        "config": config.resolved(),
        "results": output.summary,
        "converged": output.converged,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    Ok(text)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the three files into `dir`, creating it if needed.
pub fn write_outputs(
    dir: &Path,
    output: &ScenarioOutput,
    config: &ScenarioConfig,
    wall_clock: Duration,
) -> Result<RunRecord> {
    fs::create_dir_all(dir).map_err(|source| Error::File {
        path: dir.to_path_buf(),
        source,
    })?;
    let id = output.id.as_str();
    let csv_path = dir.join(format!("{id}.csv"));
    let json_path = dir.join(format!("{id}.json"));
    let meta_path = dir.join(format!("{id}.meta.json"));
    write(&csv_path, &table_csv(&output.table)?)?;
    write(&json_path, results_json(output, config)?.as_bytes())?;
    let record = RunRecord {
        scenario: id.to_string(),
        config: config.resolved(),
        config_hash: content_hash(canonical_config(config)?.as_bytes()),
        outputs: vec![csv_path, json_path, meta_path.clone()],
        wall_clock_s: wall_clock.as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        converged: output.converged,
    };
    let mut text = serde_json::to_string_pretty(&record)?;
    text.push('\n');
    write(&meta_path, text.as_bytes())?;
    Ok(record)
}
