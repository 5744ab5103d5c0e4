//! Synthetic datasets with planted outliers, for tests and demos.
//!
//! Normal patches come from a shared low-rank Gaussian model with a
//! positive offset, so every normalization sees structured data. In
//! anomalous test frames a few patches are replaced by rows pushed
//! `outlier_sigma` per-dimension standard deviations away from the mean,
//! with random signs.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataman::{ClipEntry, DatasetManifest, FrameRange, PatchGrid, Split};
use crate::error::{Error, Result};
use crate::featio::{FrameRef, StoreHeader, StoreWriter};

#[derive(Debug, Clone)]
pub struct PlantedSpec {
    pub name: String,
    pub extractor: String,
    pub dim: usize,
    /// Rank of the structured part of normal rows.
    pub rank: usize,
    pub grid: PatchGrid,
    pub train_clips: usize,
    pub test_clips: usize,
    pub frames_per_clip: u32,
    /// The last `anomalous_clips` test clips carry `anomaly` as ground truth.
    pub anomalous_clips: usize,
    pub anomaly: FrameRange,
    /// Patches per anomalous frame replaced by outliers.
    pub outlier_patches: usize,
    pub outlier_sigma: f64,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            name: "planted".into(),
            extractor: "synthetic".into(),
            dim: 128,
            rank: 8,
            grid: PatchGrid::new(96, 64, 32, 16).expect("valid grid"),
            train_clips: 4,
            test_clips: 4,
            frames_per_clip: 25,
            anomalous_clips: 2,
            anomaly: FrameRange { first: 10, last: 19 },
            outlier_patches: 2,
            outlier_sigma: 10.0,
            seed: 0,
        }
    }
}

/// Files written by [`write_planted`].
#[derive(Debug, Clone)]
pub struct PlantedDataset {
    pub manifest_path: PathBuf,
    pub train_store: PathBuf,
    pub test_store: PathBuf,
    pub manifest: DatasetManifest,
}

struct Model {
    mean: Vec<f64>,
    /// dim x rank, row-major.
    basis: Vec<f64>,
    sigma: Vec<f64>,
    rank: usize,
}

const ISO_NOISE: f64 = 0.05;

impl Model {
    fn new(dim: usize, rank: usize, rng: &mut ChaCha8Rng) -> Self {
        let mean: Vec<f64> = (0..dim).map(|_| rng.random_range(1.0..2.0)).collect();
        let scale = 0.3 / (rank as f64).sqrt();
        let basis: Vec<f64> = (0..dim * rank)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
            .collect();
        let sigma = (0..dim)
            .map(|j| {
                let w = &basis[j * rank..(j + 1) * rank];
                (w.iter().map(|v| v * v).sum::<f64>() + ISO_NOISE * ISO_NOISE).sqrt()
            })
            .collect();
        Self { mean, basis, sigma, rank }
    }

    fn normal_row(&self, rng: &mut ChaCha8Rng, out: &mut [f32]) {
        let z: Vec<f64> = (0..self.rank).map(|_| rng.sample(StandardNormal)).collect();
        for (j, o) in out.iter_mut().enumerate() {
            let w = &self.basis[j * self.rank..(j + 1) * self.rank];
            let s: f64 = w.iter().zip(&z).map(|(a, b)| a * b).sum();
            let e: f64 = rng.sample(StandardNormal);
            *o = (self.mean[j] + s + ISO_NOISE * e) as f32;
        }
    }

    fn outlier_row(&self, sigmas: f64, rng: &mut ChaCha8Rng, out: &mut [f32]) {
        for (j, o) in out.iter_mut().enumerate() {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            *o = (self.mean[j] + sign * sigmas * self.sigma[j]) as f32;
        }
    }
}

fn clip_id(split: Split, i: usize) -> String {
    format!("{split}{:02}", i + 1)
}

/// Write `manifest.toml`, `train.pfv` and `test.pfv` into `dir`.
pub fn write_planted(dir: impl AsRef<Path>, spec: &PlantedSpec) -> Result<PlantedDataset> {
    let dir = dir.as_ref();
    let patch_count = spec.grid.patch_count();
    if spec.anomalous_clips > spec.test_clips
        || spec.outlier_patches > patch_count
        || spec.anomaly.first > spec.anomaly.last
        || spec.anomaly.last >= spec.frames_per_clip
        || spec.rank == 0
        || spec.train_clips == 0
        || spec.test_clips == 0
        || spec.frames_per_clip == 0
    {
        return Err(Error::Invalid("inconsistent planted dataset spec".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut clips = Vec::new();
    for i in 0..spec.train_clips {
        let id = clip_id(Split::Train, i);
        clips.push(ClipEntry {
            frame_dir: PathBuf::from("frames").join(&id),
            clip_id: id,
            split: Split::Train,
            frame_count: spec.frames_per_clip,
            anomaly_ranges: vec![],
        });
    }
    for i in 0..spec.test_clips {
        let id = clip_id(Split::Test, i);
        let anomalous = i >= spec.test_clips - spec.anomalous_clips;
        clips.push(ClipEntry {
            frame_dir: PathBuf::from("frames").join(&id),
            clip_id: id,
            split: Split::Test,
            frame_count: spec.frames_per_clip,
            anomaly_ranges: if anomalous { vec![spec.anomaly] } else { vec![] },
        });
    }
    clips.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));
    let manifest = DatasetManifest {
        name: spec.name.clone(),
        frame_width: spec.grid.frame_width,
        frame_height: spec.grid.frame_height,
        fps: 10,
        clips,
        base_dir: dir.to_path_buf(),
    };
    let manifest_path = dir.join("manifest.toml");
    std::fs::write(&manifest_path, manifest.to_toml_string()?).map_err(|e| Error::io(&manifest_path, e))?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let model = Model::new(spec.dim, spec.rank, &mut rng);
    let mut row = vec![0f32; spec.dim];
    let mut paths = Vec::new();
    for split in [Split::Train, Split::Test] {
        let frames: Vec<FrameRef> = manifest
            .clips_in(split)
            .flat_map(|c| (0..c.frame_count).map(move |f| FrameRef::new(c.clip_id.clone(), f)))
            .collect();
        let header = StoreHeader::new(spec.extractor.clone(), spec.dim, spec.grid, frames);
        let path = dir.join(format!("{split}.pfv"));
        let mut writer = StoreWriter::create(&path, &header)?;
        for f in &header.frames {
            let anomalous = manifest.clip(&f.clip_id).is_some_and(|c| c.is_anomalous(f.frame_index));
            for p in 0..patch_count {
                if anomalous && p < spec.outlier_patches {
                    model.outlier_row(spec.outlier_sigma, &mut rng, &mut row);
                } else {
                    model.normal_row(&mut rng, &mut row);
                }
                writer.push_row(&row)?;
            }
        }
        writer.finish()?;
        paths.push(path);
    }
    let test_store = paths.pop().expect("two stores");
    let train_store = paths.pop().expect("two stores");
    Ok(PlantedDataset { manifest_path, train_store, test_store, manifest })
}
