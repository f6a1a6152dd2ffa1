//! Batch front end for interplab: JSON experiment configs in, JSON reports
//! and CSV tables out.

pub mod commands;
pub mod config;
pub mod emit;

use std::path::Path;

use serde_json::Value;

pub use commands::{equivalence_band, execute, BandRow, BandSpec, BandSummary, Command, Outcome, RunError};
pub use config::{parse_text, ConfigError};

/// Exit statuses.
pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Result of [`run`]: the exit status and a one-line summary for stderr.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunStatus {
    pub code: i32,
    pub message: String,
}

/// Parses `text`, applies the seed override, runs `cmd` and writes
/// `<cmd>.json` plus its CSV tables into `out_dir`.
pub fn run(cmd: Command, text: &str, seed: Option<u64>, out_dir: &Path) -> RunStatus {
    let mut config = match parse_text(text) {
        Ok(v) => v,
        Err(e) => return schema_error(e),
    };
    if let Some(s) = seed {
        match config.as_object_mut() {
            Some(m) => {
                m.insert("seed".into(), Value::from(s));
            }
            None => {
                return schema_error(ConfigError {
                    path: String::new(),
                    message: "expected an object".into(),
                })
            }
        }
    }
    let hash = emit::config_hash(&config);
    let effective_seed = config.get("seed").and_then(Value::as_u64).unwrap_or(0);
    let (report, tables, failed) = match execute(cmd, &config) {
        Ok(out) => {
            let report = commands::report(cmd, &hash, effective_seed, &out);
            let failed: Vec<String> = out
                .assertions
                .iter()
                .filter(|a| !a.passed)
                .map(|a| a.name.clone())
                .collect();
            (report, out.tables, failed)
        }
        Err(RunError::Config(e)) => return schema_error(e),
        Err(RunError::Compute(e)) => {
            let report = serde_json::json!({
                "schema_version": 1,
                "command": cmd.name(),
                "config_sha256": hash,
                "seed": effective_seed,
                "error": e.to_string(),
                "passed": false,
            });
            (report, Vec::new(), vec![format!("computation failed: {e}")])
        }
    };
    let mut artifacts = vec![emit::Artifact {
        name: format!("{}.json", cmd.name()),
        contents: emit::to_json(&report),
    }];
    for (suffix, contents) in tables {
        let name = if suffix.is_empty() {
            format!("{}.csv", cmd.name())
        } else if suffix.contains('.') {
            format!("{}_{suffix}", cmd.name())
        } else {
            format!("{}_{suffix}.csv", cmd.name())
        };
        artifacts.push(emit::Artifact { name, contents });
    }
    if let Err(e) = emit::write_all(out_dir, &artifacts) {
        return RunStatus {
            code: EXIT_IO,
            message: format!("cannot write artifacts to {}: {e}", out_dir.display()),
        };
    }
    if failed.is_empty() {
        RunStatus {
            code: EXIT_OK,
            message: format!("{}: all assertions passed", cmd.name()),
        }
    } else {
        RunStatus {
            code: EXIT_ASSERTION,
            message: format!("{}: failed: {}", cmd.name(), failed.join(", ")),
        }
    }
}

fn schema_error(e: ConfigError) -> RunStatus {
    RunStatus {
        code: EXIT_SCHEMA,
        message: e.to_string(),
    }
}
