use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RunConfig, TileRecord, TileStatus};
use crate::error::{Error, Result};
use crate::metrics::{aggregate_with, Aggregate, MetricsReport};

/// Dataset-level report; `records` are ordered by tile id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub backend: String,
    pub tiles: usize,
    pub completed: usize,
    pub skipped: usize,
    pub failed: usize,
    /// Over completed tiles with ground truth; skipped tiles never count.
    pub aggregate: Option<Aggregate>,
    pub records: Vec<TileRecord>,
}

impl Summary {
    pub fn new(cfg: &RunConfig, records: Vec<TileRecord>) -> Result<Self> {
        let count = |f: fn(&TileStatus) -> bool| records.iter().filter(|r| f(&r.status)).count();
        let completed = count(|s| matches!(s, TileStatus::Completed));
        let skipped = count(|s| matches!(s, TileStatus::Skipped { .. }));
        let failed = count(|s| matches!(s, TileStatus::Failed { .. }));
        let scored: Vec<MetricsReport> = records.iter().filter_map(|r| r.metrics.clone()).collect();
        let aggregate = if scored.is_empty() {
            None
        } else {
            Some(aggregate_with(&scored, cfg.f1_mode)?)
        };
        Ok(Self {
            seed: cfg.seed,
            backend: cfg.backend.kind.as_str().to_owned(),
            tiles: records.len(),
            completed,
            skipped,
            failed,
            aggregate,
            records,
        })
    }

    pub fn record(&self, tile_id: &str) -> Option<&TileRecord> {
        self.records.iter().find(|r| r.tile_id == tile_id)
    }
}

fn report_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Report(format!("{}: {e}", path.display()))
}

pub fn write_summary(path: impl AsRef<Path>, summary: &Summary) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(summary).map_err(|e| report_err(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_summary(path: impl AsRef<Path>) -> Result<Summary> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| report_err(path, e))
}

/// One row per scored tile: `tile_id,tp,fp,fn,tn,oa,miou,f1`. Undefined
/// metrics are empty cells.
pub fn write_tiles_csv(path: impl AsRef<Path>, records: &[TileRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    w.write_record(["tile_id", "tp", "fp", "fn", "tn", "oa", "miou", "f1"])
        .map_err(|e| report_err(path, e))?;
    for r in records {
        let Some(m) = &r.metrics else { continue };
        w.write_record([
            r.tile_id.clone(),
            m.cm.tp.to_string(),
            m.cm.fp.to_string(),
            m.cm.fn_.to_string(),
            m.cm.tn.to_string(),
            cell(m.oa),
            cell(m.miou),
            cell(m.f1),
        ])
        .map_err(|e| report_err(path, e))?;
    }
    let mut inner = w.into_inner().map_err(|e| report_err(path, e))?;
    inner.flush().map_err(|e| Error::io(path, e))
}
