use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::annindex::{self, AnnParams};
use crate::error::{Error, Result};
use crate::ipca::DEFAULT_BATCH_ROWS;
use crate::normlib;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnSettings {
    /// Registered backend name: `exact` or `approx`.
    pub mode: String,
    pub trees: usize,
    pub budget: usize,
    pub leaf_size: usize,
}

impl Default for AnnSettings {
    fn default() -> Self {
        let p = AnnParams::default();
        Self {
            mode: "approx".into(),
            trees: p.trees,
            budget: p.budget,
            leaf_size: p.leaf_size,
        }
    }
}

fn default_norm() -> String {
    "zscore".into()
}

fn default_dims() -> usize {
    100
}

fn default_batch_rows() -> usize {
    DEFAULT_BATCH_ROWS
}

/// One experiment: a single (extractor, dims, normalization) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub manifest: PathBuf,
    pub train_store: PathBuf,
    pub test_store: PathBuf,
    #[serde(default = "default_norm")]
    pub norm: String,
    #[serde(default = "default_dims")]
    pub dims: usize,
    #[serde(default)]
    pub ann: AnnSettings,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_batch_rows")]
    pub batch_rows: usize,
}

impl ExperimentConfig {
    pub fn new(manifest: impl Into<PathBuf>, train_store: impl Into<PathBuf>, test_store: impl Into<PathBuf>) -> Self {
        Self {
            manifest: manifest.into(),
            train_store: train_store.into(),
            test_store: test_store.into(),
            norm: default_norm(),
            dims: default_dims(),
            ann: AnnSettings::default(),
            seed: 0,
            out: None,
            batch_rows: default_batch_rows(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse("experiment config", e))
    }

    /// Load a TOML config; relative paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.manifest, &mut cfg.train_store, &mut cfg.test_store] {
            *p = resolve(base, p);
        }
        cfg.out = cfg.out.map(|o| resolve(base, &o));
        Ok(cfg)
    }

    pub fn ann_params(&self) -> AnnParams {
        AnnParams {
            trees: self.ann.trees,
            budget: self.ann.budget,
            leaf_size: self.ann.leaf_size,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        normlib::registry().get(&self.norm)?;
        annindex::registry().get(&self.ann.mode)?;
        if self.dims == 0 {
            return Err(Error::Invalid("dims must be positive".into()));
        }
        if self.batch_rows == 0 {
            return Err(Error::Invalid("batch_rows must be positive".into()));
        }
        Ok(())
    }
}

pub(crate) fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() || base.as_os_str().is_empty() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractorStores {
    pub name: String,
    pub train_store: PathBuf,
    pub test_store: PathBuf,
}

fn default_grid_dims() -> Vec<usize> {
    vec![50, 100]
}

fn default_grid_norms() -> Vec<String> {
    ["zeroone", "zscore", "l1", "l2"].map(String::from).to_vec()
}

/// Cartesian sweep: extractors x dims x normalizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub manifest: PathBuf,
    pub extractors: Vec<ExtractorStores>,
    #[serde(default = "default_grid_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_grid_norms")]
    pub norms: Vec<String>,
    #[serde(default)]
    pub ann: AnnSettings,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_batch_rows")]
    pub batch_rows: usize,
}

impl GridConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse("grid config", e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.manifest = resolve(base, &cfg.manifest);
        for e in &mut cfg.extractors {
            e.train_store = resolve(base, &e.train_store);
            e.test_store = resolve(base, &e.test_store);
        }
        cfg.out = cfg.out.map(|o| resolve(base, &o));
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.extractors.is_empty() || self.dims.is_empty() || self.norms.is_empty() {
            return Err(Error::Invalid(
                "grid needs at least one extractor, one dims value and one normalization".into(),
            ));
        }
        Ok(())
    }

    /// Every cell in sweep order: extractor, then dims, then normalization.
    pub fn cells(&self) -> Vec<(String, ExperimentConfig)> {
        let mut cells = Vec::new();
        for ex in &self.extractors {
            for &dims in &self.dims {
                for norm in &self.norms {
                    cells.push((ex.name.clone(), ExperimentConfig {
                        manifest: self.manifest.clone(),
                        train_store: ex.train_store.clone(),
                        test_store: ex.test_store.clone(),
                        norm: norm.clone(),
                        dims,
                        ann: self.ann.clone(),
                        seed: self.seed,
                        out: self
                            .out
                            .as_ref()
                            .map(|o| o.join(format!("{}_k{dims}_{norm}", ex.name))),
                        batch_rows: self.batch_rows,
                    }));
                }
            }
        }
        cells
    }
}
