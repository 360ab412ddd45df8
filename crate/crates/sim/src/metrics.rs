//! Per-batch metric traces as CSV.

use crate::error::{Result, SimError};
use irs_core::metrics::BatchMetrics;
use std::fs::File;
use std::path::{Path, PathBuf};

pub const METRICS_HEADER: [&str; 7] = ["step", "batch", "mean_reward", "entropy", "actor_loss", "critic_loss", "clip_fraction"];

/// Append-only CSV writer; every row is flushed as soon as it is written so a
/// failed run leaves a readable prefix behind.
pub struct MetricsWriter {
    path: PathBuf,
    inner: csv::Writer<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(SimError::io(dir))?;
        }
        let file = File::create(path).map_err(SimError::io(path))?;
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        inner.write_record(METRICS_HEADER)?;
        inner.flush().map_err(SimError::io(path))?;
        Ok(Self {
            path: path.to_path_buf(),
            inner,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, row: &BatchMetrics) -> Result<()> {
        self.inner.serialize(row)?;
        self.inner.flush().map_err(SimError::io(&self.path))
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<BatchMetrics>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != METRICS_HEADER {
        return Err(SimError::Invalid(format!("{}: unexpected header {header:?}", path.display())));
    }
    Ok(reader.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_parse_back_losslessly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let rows = vec![
            BatchMetrics {
                step: 2048,
                batch: 0,
                mean_reward: 4.123456789012345,
                entropy: 1.6094379124341003,
                actor_loss: -0.1 / 3.0,
                critic_loss: 1e-300,
                clip_fraction: 0.0,
            },
            BatchMetrics {
                step: 4096,
                batch: 1,
                mean_reward: f64::MIN_POSITIVE,
                ..BatchMetrics::default()
            },
        ];
        let mut w = MetricsWriter::create(&path).unwrap();
        for r in &rows {
            w.append(r).unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("step,batch,mean_reward,entropy,actor_loss,critic_loss,clip_fraction\n"));
        assert_eq!(read_metrics(&path).unwrap(), rows);
    }

    #[test]
    fn rows_are_visible_before_drop() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/m.csv");
        let mut w = MetricsWriter::create(&path).unwrap();
        w.append(&BatchMetrics::default()).unwrap();
        assert_eq!(read_metrics(&path).unwrap().len(), 1);
        drop(w);
    }
}
