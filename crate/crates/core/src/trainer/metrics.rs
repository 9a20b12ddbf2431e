use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const METRICS_HEADER: &str = "iter,split,xent,miscls_pct,mean_rate_hz,reg_err";

/// Aggregate statistics of one evaluation pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub iter: usize,
    pub split: String,
    /// Mean cross-entropy per frame.
    pub xent: f64,
    /// Frames whose argmax prediction differs from the label, in percent.
    pub miscls_pct: f64,
    /// Mean firing rate over neurons and frames.
    pub mean_rate_hz: f64,
    /// Mean firing-rate regularization error per sample.
    pub reg_err: f64,
}

impl MetricsRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.iter, self.split, self.xent, self.miscls_pct, self.mean_rate_hz, self.reg_err
        )
    }
}

/// Append-only CSV sink; the header is written once when the file is new or empty.
pub struct MetricsWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl MetricsWriter {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        let empty = file.metadata().map_err(|e| Error::io(&path, e))?.len() == 0;
        let mut w = Self {
            out: BufWriter::new(file),
            path,
        };
        if empty {
            w.line(METRICS_HEADER)?;
        }
        Ok(w)
    }

    pub fn write(&mut self, rec: &MetricsRecord) -> Result<()> {
        self.line(&rec.csv_row())
    }

    fn line(&mut self, s: &str) -> Result<()> {
        self.out
            .write_all(s.as_bytes())
            .and_then(|_| self.out.write_all(b"\n"))
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_once_then_append() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let rec = MetricsRecord {
            iter: 3,
            split: "val".into(),
            xent: 1.5,
            miscls_pct: 20.0,
            mean_rate_hz: 10.0,
            reg_err: 0.25,
        };
        MetricsWriter::open(&path).unwrap().write(&rec).unwrap();
        MetricsWriter::open(&path).unwrap().write(&rec).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "iter,split,xent,miscls_pct,mean_rate_hz,reg_err\n3,val,1.5,20,10,0.25\n3,val,1.5,20,10,0.25\n"
        );
    }
}
