//! End-to-end experiment orchestration.
//!
//! One experiment: fit the normalizer on the training store, fit IPCA on
//! normalized training rows, index the reduced training rows, then score
//! every test patch by its nearest-neighbour distance and evaluate the
//! per-frame maxima. Normalizer and IPCA only ever see training data.

mod config;
mod grid;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{AnnSettings, ExperimentConfig, ExtractorStores, GridConfig};
pub use grid::{read_results_csv, run_grid, ResultRow, ResultsWriter};

use crate::annindex::{self, NearestNeighbor, Points};
use crate::dataman::{load_manifest, DatasetManifest, Split};
use crate::error::{Error, Result, StageExt};
use crate::evalkit::{self, FrameScore, RocReport};
use crate::featio::{validate_against_manifest, FeatureStore};
use crate::ipca::IpcaModel;
use crate::normlib::{self, Normalizer};

pub const NORMALIZER_FILE: &str = "normalizer.json";
pub const IPCA_FILE: &str = "ipca.ipc";
pub const SCORES_FILE: &str = "scores.csv";
pub const RECORD_FILE: &str = "run_record.json";
pub const RESULTS_FILE: &str = "results.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub normalizer: Option<PathBuf>,
    pub ipca: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub record: Option<PathBuf>,
    pub results: Option<PathBuf>,
}

/// Outcome of one experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub dataset: String,
    pub extractor: String,
    pub feature_dim: usize,
    pub train_rows: u64,
    pub test_frames: usize,
    pub positives: usize,
    pub negatives: usize,
    pub auc: f64,
    pub eer: f64,
    pub timings: Vec<StageTiming>,
    pub artifacts: Artifacts,
    #[serde(skip)]
    pub scores: Vec<FrameScore>,
}

impl RunRecord {
    pub fn result_row(&self) -> ResultRow {
        ResultRow {
            dataset: self.dataset.clone(),
            extractor: self.extractor.clone(),
            ipca_dims: self.config.dims,
            normalization: self.config.norm.clone(),
            auc: Some(self.auc),
            eer: Some(self.eer),
            n_frames: Some(self.test_frames),
            seed: self.config.seed,
            error: String::new(),
        }
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::parse("run record", e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Manifest plus both stores, checked against each other.
pub struct Inputs {
    pub manifest: DatasetManifest,
    pub train: FeatureStore,
    pub test: FeatureStore,
}

/// Load and cross-check manifest and stores without touching payloads.
pub fn load_inputs(config: &ExperimentConfig) -> Result<Inputs> {
    let manifest = load_manifest(&config.manifest)?;
    let train = FeatureStore::open(&config.train_store)?;
    let test = FeatureStore::open(&config.test_store)?;
    if !train.header().compatible_with(test.header()) {
        return Err(Error::Invalid(format!(
            "train store ({}, dim {}) and test store ({}, dim {}) differ in extractor, dim or grid",
            train.header().extractor_name,
            train.dim(),
            test.header().extractor_name,
            test.dim()
        )));
    }
    validate_against_manifest(train.header(), &manifest, Split::Train)?;
    validate_against_manifest(test.header(), &manifest, Split::Test)?;
    Ok(Inputs { manifest, train, test })
}

/// Fit the normalizer, then IPCA on normalized rows, streaming the
/// training store twice.
pub fn fit_models(config: &ExperimentConfig, train: &FeatureStore) -> Result<(Box<dyn Normalizer>, IpcaModel)> {
    let batch_rows = config.batch_rows.max(config.dims).max(1);
    let normalizer = normlib::fit(&config.norm, train.dim(), train.batches(batch_rows)?).stage("normalize")?;
    let ipca = fit_ipca(config.dims, train, normalizer.as_ref(), batch_rows).stage("ipca")?;
    Ok((normalizer, ipca))
}

fn fit_ipca(dims: usize, train: &FeatureStore, normalizer: &dyn Normalizer, batch_rows: usize) -> Result<IpcaModel> {
    let mut model = IpcaModel::new(dims, train.dim())?;
    if train.n_rows() < dims as u64 {
        return Err(Error::Invalid(format!(
            "{} training rows cannot support {dims} components",
            train.n_rows()
        )));
    }
    for batch in train.batches(batch_rows)? {
        let mut batch = batch?;
        normalizer.apply_batch(&mut batch)?;
        model.partial_fit_batch(&batch)?;
    }
    Ok(model)
}

/// Normalize and project every row of a store, in store order.
pub fn reduce_store(
    store: &FeatureStore,
    normalizer: &dyn Normalizer,
    ipca: &IpcaModel,
    batch_rows: usize,
) -> Result<Vec<f32>> {
    let mut out = Vec::with_capacity(store.n_rows() as usize * ipca.n_components());
    for batch in store.batches(batch_rows.max(1))? {
        let mut batch = batch?;
        normalizer.apply_batch(&mut batch)?;
        out.extend(ipca.transform(&batch.data)?);
    }
    Ok(out)
}

/// Build the nearest-neighbour index over reduced training rows.
pub fn build_index(
    config: &ExperimentConfig,
    train: &FeatureStore,
    normalizer: &dyn Normalizer,
    ipca: &IpcaModel,
) -> Result<Box<dyn NearestNeighbor>> {
    let reduced = reduce_store(train, normalizer, ipca, config.batch_rows)?;
    let points = Points::new(ipca.n_components(), reduced)?;
    annindex::build(&config.ann.mode, points, &config.ann_params())
}

/// Score every test frame: max over its patches of the 1-NN distance.
pub fn score_test(
    config: &ExperimentConfig,
    manifest: &DatasetManifest,
    test: &FeatureStore,
    normalizer: &dyn Normalizer,
    ipca: &IpcaModel,
    index: &dyn NearestNeighbor,
) -> Result<Vec<FrameScore>> {
    let patch_count = test.patch_count();
    let frames_per_batch = (config.batch_rows / patch_count).max(1);
    let mut scores = Vec::with_capacity(test.n_frames());
    for batch in test.frame_batches(frames_per_batch)? {
        let mut batch = batch?;
        normalizer.apply_batch(&mut batch)?;
        let reduced = ipca.transform(&batch.data)?;
        let distances: Vec<f64> = index
            .batch_nn_distances(&reduced)?
            .into_iter()
            .map(|r| r.distance)
            .collect();
        let span = batch.frame_span(patch_count);
        scores.extend(evalkit::frame_scores(
            &test.header().frames[span],
            &distances,
            patch_count,
            manifest,
        )?);
    }
    Ok(scores)
}

pub fn evaluate(scores: &[FrameScore]) -> Result<RocReport> {
    evalkit::roc_auc(scores)
}

struct Stopwatch {
    timings: Vec<StageTiming>,
    last: Instant,
}

impl Stopwatch {
    fn new() -> Self {
        Self { timings: Vec::new(), last: Instant::now() }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings.push(StageTiming {
            stage: stage.to_string(),
            seconds: (now - self.last).as_secs_f64(),
        });
        self.last = now;
    }
}

/// Run one experiment end to end. When `config.out` is set, the fitted
/// normalizer, IPCA model, per-frame scores, a one-row results CSV and
/// the run record are written there.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunRecord> {
    config.validate()?;
    let mut clock = Stopwatch::new();
    let inputs = load_inputs(config).stage("validate")?;
    clock.lap("validate");

    let (normalizer, ipca) = fit_models(config, &inputs.train)?;
    clock.lap("fit");

    let index = build_index(config, &inputs.train, normalizer.as_ref(), &ipca).stage("index")?;
    clock.lap("index");

    let scores = score_test(
        config,
        &inputs.manifest,
        &inputs.test,
        normalizer.as_ref(),
        &ipca,
        index.as_ref(),
    )
    .stage("score")?;
    clock.lap("score");

    let report = evaluate(&scores).stage("evaluate")?;
    clock.lap("evaluate");

    let mut record = RunRecord {
        config: config.clone(),
        dataset: inputs.manifest.name.clone(),
        extractor: inputs.train.header().extractor_name.clone(),
        feature_dim: inputs.train.dim(),
        train_rows: inputs.train.n_rows(),
        test_frames: scores.len(),
        positives: report.positives,
        negatives: report.negatives,
        auc: report.auc,
        eer: report.eer,
        timings: clock.timings,
        artifacts: Artifacts::default(),
        scores,
    };

    if let Some(out) = &config.out {
        write_artifacts(out, &mut record, normalizer.as_ref(), &ipca).stage("write")?;
    }
    Ok(record)
}

fn write_artifacts(out: &Path, record: &mut RunRecord, normalizer: &dyn Normalizer, ipca: &IpcaModel) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let artifacts = Artifacts {
        normalizer: Some(out.join(NORMALIZER_FILE)),
        ipca: Some(out.join(IPCA_FILE)),
        scores: Some(out.join(SCORES_FILE)),
        record: Some(out.join(RECORD_FILE)),
        results: Some(out.join(RESULTS_FILE)),
    };
    normalizer.save().write(out.join(NORMALIZER_FILE))?;
    ipca.write(out.join(IPCA_FILE))?;
    evalkit::write_scores_csv(out.join(SCORES_FILE), &record.scores)?;
    let mut results = ResultsWriter::create(out.join(RESULTS_FILE))?;
    results.write(&record.result_row())?;
    record.artifacts = artifacts;
    record.write_json(out.join(RECORD_FILE))
}
