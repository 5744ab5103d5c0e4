use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{run_experiment, GridConfig, RunRecord, RESULTS_FILE};
use crate::dataman::load_manifest;
use crate::error::{Error, Result};

/// One line of the results CSV. Failed cells leave the metrics empty and
/// carry the error text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub extractor: String,
    pub ipca_dims: usize,
    pub normalization: String,
    pub auc: Option<f64>,
    pub eer: Option<f64>,
    pub n_frames: Option<usize>,
    pub seed: u64,
    pub error: String,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.error.is_empty()
    }
}

/// Appends rows to a results CSV, flushing after each one.
pub struct ResultsWriter {
    inner: csv::Writer<File>,
    path: std::path::PathBuf,
}

impl ResultsWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let inner = csv::Writer::from_path(&path).map_err(|e| Error::parse(path.display().to_string(), e))?;
        Ok(Self { inner, path })
    }

    pub fn write(&mut self, row: &ResultRow) -> Result<()> {
        self.inner
            .serialize(row)
            .map_err(|e| Error::parse(self.path.display().to_string(), e))?;
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::parse(path.display().to_string(), e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::parse(path.display().to_string(), e)))
        .collect()
}

/// Run every cell of the grid in order. A failing cell becomes an error
/// row and the sweep continues. Rows go to `on_row` as they complete and,
/// when `grid.out` is set, to `<out>/results.csv`.
pub fn run_grid(grid: &GridConfig, mut on_row: impl FnMut(&ResultRow)) -> Result<Vec<(ResultRow, Option<RunRecord>)>> {
    grid.validate()?;
    let mut writer = match &grid.out {
        Some(out) => {
            std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
            Some(ResultsWriter::create(out.join(RESULTS_FILE))?)
        }
        None => None,
    };
    let dataset = load_manifest(&grid.manifest).map(|m| m.name).unwrap_or_default();

    let mut outcomes = Vec::new();
    for (extractor, cell) in grid.cells() {
        log::info!("grid cell {extractor} k={} norm={}", cell.dims, cell.norm);
        let (row, record) = match run_experiment(&cell) {
            Ok(record) => (record.result_row(), Some(record)),
            Err(e) => {
                log::warn!("grid cell {extractor} k={} norm={} failed: {e}", cell.dims, cell.norm);
                let row = ResultRow {
                    dataset: dataset.clone(),
                    extractor,
                    ipca_dims: cell.dims,
                    normalization: cell.norm.clone(),
                    auc: None,
                    eer: None,
                    n_frames: None,
                    seed: cell.seed,
                    error: e.to_string(),
                };
                (row, None)
            }
        };
        if let Some(w) = writer.as_mut() {
            w.write(&row)?;
        }
        on_row(&row);
        outcomes.push((row, record));
    }
    Ok(outcomes)
}
