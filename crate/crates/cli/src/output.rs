use std::io::Write;
use std::path::Path;

use pomdp_lab::{Error, Result};

/// Shortest decimal form that parses back to the same `f64`.
pub fn float(x: f64) -> String {
    format!("{x:?}")
}

/// CSV built in memory so that a failed run leaves no partial file.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[String]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { writer }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.writer.write_record(fields).expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }
}

/// Writes `bytes` to `path`, or to stdout when no path is given.
pub fn deliver(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Error::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|e| Error::Io {
                    path: "<stdout>".into(),
                    message: e.to_string(),
                })
        }
    }
}

pub fn json(path: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    deliver(path, pomdp_lab::io::to_json(value).as_bytes())
}
