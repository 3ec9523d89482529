use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use serde::Serialize;
use serde_json::Value;

/// Self-describing result of one command invocation.
#[derive(Debug, Serialize)]
pub struct ExperimentRecord {
    pub command: String,
    pub parameters: Value,
    pub seed: Option<u64>,
    pub version: String,
    pub outputs: Value,
    pub wall_time_s: f64,
}

pub struct Recorder {
    command: &'static str,
    parameters: Value,
    start: Instant,
}

impl Recorder {
    pub fn start(command: &'static str, parameters: &impl Serialize) -> Result<Self> {
        Ok(Recorder { command, parameters: serde_json::to_value(parameters)?, start: Instant::now() })
    }

    pub fn finish(self, seed: Option<u64>, outputs: impl Serialize) -> Result<ExperimentRecord> {
        Ok(ExperimentRecord {
            command: self.command.to_string(),
            parameters: self.parameters,
            seed,
            version: concat!("povmsim ", env!("CARGO_PKG_VERSION")).to_string(),
            outputs: serde_json::to_value(outputs)?,
            wall_time_s: self.start.elapsed().as_secs_f64(),
        })
    }
}

/// Print the record to stdout, or to stderr when stdout carries data, and
/// optionally save it.
pub fn emit(record: &ExperimentRecord, path: Option<&Path>, stdout_busy: bool) -> Result<()> {
    let text = serde_json::to_string_pretty(record)?;
    if stdout_busy {
        eprintln!("{text}");
    } else {
        println!("{text}");
    }
    if let Some(p) = path {
        std::fs::write(p, text + "\n")?;
    }
    Ok(())
}
