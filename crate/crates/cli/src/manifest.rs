use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::Serialize;

use crate::commands::Outcome;

/// Provenance record written next to the primary output of every run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    /// SHA-256 of each input file, keyed by the flag that named it.
    pub input_sha256: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub version: &'static str,
    pub wall_time_seconds: f64,
    pub exit_code: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunManifest {
    pub fn new(command_line: Vec<String>, outcome: &Outcome, elapsed: Duration) -> Self {
        Self {
            command_line,
            input_sha256: outcome.input_hashes.clone(),
            seed: outcome.seed,
            version: env!("CARGO_PKG_VERSION"),
            wall_time_seconds: elapsed.as_secs_f64(),
            exit_code: 0,
            error: None,
        }
    }

    /// Writes to `explicit` when given, else to `<primary>.manifest.json`
    /// when the run wrote a file, else as one line on stderr.
    pub fn emit(&self, explicit: Option<&Path>, primary: Option<&Path>) -> pomdp_lab::Result<()> {
        let target = explicit.map(Path::to_path_buf).or_else(|| {
            primary.map(|p| {
                let mut s = p.as_os_str().to_owned();
                s.push(".manifest.json");
                s.into()
            })
        });
        match target {
            Some(path) => pomdp_lab::io::write_text(&path, &pomdp_lab::io::to_json(self)),
            None => {
                eprintln!(
                    "manifest: {}",
                    serde_json::to_string(self).expect("manifest serializes")
                );
                Ok(())
            }
        }
    }
}
