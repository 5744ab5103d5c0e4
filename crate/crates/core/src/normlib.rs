//! Feature normalization schemes, fitted on training rows and applied to
//! every row afterwards.
//!
//! * `zscore`  – per feature `(f - mean) / std`, population std.
//! * `zeroone` – per feature `(f - min) / (max - min)`, no clipping.
//! * `l1`      – per row `x / sum |x_f|`.
//! * `l2`      – per row `x / sqrt(sum x_f^2)`.
//!
//! Constant features map to 0 and all-zero rows pass through unchanged.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featio::FeatureBatch;
use crate::registry::Registry;

/// A normalization scheme: knows how to fit itself and how to restore a
/// fitted instance from saved parameters.
pub trait Normalization: Send + Sync {
    fn name(&self) -> &'static str;

    /// Fresh accumulator for rows of width `dim`.
    fn fitter(&self, dim: usize) -> Box<dyn NormFitter>;

    fn restore(&self, saved: &SavedNormalizer) -> Result<Box<dyn Normalizer>>;
}

/// Streaming accumulator of training statistics.
pub trait NormFitter {
    fn update(&mut self, rows: &[f32]) -> Result<()>;

    fn finish(self: Box<Self>) -> Result<Box<dyn Normalizer>>;
}

/// A fitted normalizer. `apply` is pure and may run concurrently.
pub trait Normalizer: Send + Sync {
    fn kind(&self) -> &'static str;

    /// Row width, `None` for stateless kinds that accept any width.
    fn dim(&self) -> Option<usize>;

    fn apply_row(&self, row: &mut [f32]);

    fn save(&self) -> SavedNormalizer;

    /// Normalize a flat row-major buffer in place.
    fn apply(&self, data: &mut [f32], width: usize) -> Result<()> {
        if let Some(d) = self.dim() {
            if d != width {
                return Err(Error::WidthMismatch { expected: d, got: width });
            }
        }
        if width == 0 || !data.len().is_multiple_of(width) {
            return Err(Error::WidthMismatch {
                expected: width,
                got: data.len() % width.max(1),
            });
        }
        data.chunks_exact_mut(width).for_each(|r| self.apply_row(r));
        Ok(())
    }

    fn apply_batch(&self, batch: &mut FeatureBatch) -> Result<()> {
        let width = batch.dim;
        self.apply(&mut batch.data, width)
    }
}

/// On-disk form of a fitted normalizer (JSON). Parameters are kept at
/// f64 so a save/load cycle reproduces transforms exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedNormalizer {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, Vec<f64>>,
}

impl SavedNormalizer {
    fn param(&self, name: &str, dim: usize) -> Result<Vec<f64>> {
        let v = self
            .params
            .get(name)
            .ok_or_else(|| Error::NotFitted(format!("{} normalizer lacks '{name}'", self.kind)))?;
        if v.len() != dim {
            return Err(Error::WidthMismatch { expected: dim, got: v.len() });
        }
        Ok(v.clone())
    }

    fn saved_dim(&self) -> Result<usize> {
        self.dim
            .ok_or_else(|| Error::NotFitted(format!("{} normalizer lacks 'dim'", self.kind)))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::parse("normalizer", e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse("normalizer", e))
    }
}

/// Registry with the four built-in schemes.
pub fn registry() -> Registry<dyn Normalization> {
    let mut reg: Registry<dyn Normalization> = Registry::new("normalization");
    reg.register("zscore", Box::new(ZScore))
        .register("zeroone", Box::new(ZeroOne))
        .register("l1", Box::new(RowNorm::L1))
        .register("l2", Box::new(RowNorm::L2));
    reg
}

/// Fit a scheme by name over a stream of batches.
pub fn fit<I>(kind: &str, dim: usize, batches: I) -> Result<Box<dyn Normalizer>>
where
    I: IntoIterator<Item = Result<FeatureBatch>>,
{
    let reg = registry();
    let mut fitter = reg.get(kind)?.fitter(dim);
    for batch in batches {
        let batch = batch?;
        if batch.dim != dim {
            return Err(Error::WidthMismatch { expected: dim, got: batch.dim });
        }
        fitter.update(&batch.data)?;
    }
    fitter.finish()
}

pub fn restore(saved: &SavedNormalizer) -> Result<Box<dyn Normalizer>> {
    registry().get(&saved.kind)?.restore(saved)
}

fn check_width(data: &[f32], dim: usize) -> Result<()> {
    if !data.len().is_multiple_of(dim) {
        return Err(Error::WidthMismatch {
            expected: dim,
            got: data.len() % dim,
        });
    }
    Ok(())
}

// ---- z-score ---------------------------------------------------------------

pub struct ZScore;

/// Per-feature running mean and sum of squared deviations, merged batch
/// by batch (Chan et al. pairwise update).
struct MomentFitter {
    dim: usize,
    n: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl NormFitter for MomentFitter {
    fn update(&mut self, rows: &[f32]) -> Result<()> {
        check_width(rows, self.dim)?;
        let nb = (rows.len() / self.dim) as u64;
        if nb == 0 {
            return Ok(());
        }
        let mut bmean = vec![0f64; self.dim];
        for r in rows.chunks_exact(self.dim) {
            for (m, &v) in bmean.iter_mut().zip(r) {
                *m += f64::from(v);
            }
        }
        bmean.iter_mut().for_each(|m| *m /= nb as f64);
        let mut bm2 = vec![0f64; self.dim];
        for r in rows.chunks_exact(self.dim) {
            for ((s, &m), &v) in bm2.iter_mut().zip(&bmean).zip(r) {
                let d = f64::from(v) - m;
                *s += d * d;
            }
        }
        let (na, nbf) = (self.n as f64, nb as f64);
        let n = na + nbf;
        for j in 0..self.dim {
            let delta = bmean[j] - self.mean[j];
            self.mean[j] += delta * nbf / n;
            self.m2[j] += bm2[j] + delta * delta * na * nbf / n;
        }
        self.n += nb;
        Ok(())
    }

    fn finish(self: Box<Self>) -> Result<Box<dyn Normalizer>> {
        if self.n == 0 {
            return Err(Error::Empty("zscore fit needs at least one training row".into()));
        }
        let n = self.n as f64;
        let std = self.m2.iter().map(|s| (s / n).max(0.0).sqrt()).collect();
        Ok(Box::new(ZScoreNormalizer { mean: self.mean, std }))
    }
}

pub struct ZScoreNormalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization for ZScore {
    fn name(&self) -> &'static str {
        "zscore"
    }

    fn fitter(&self, dim: usize) -> Box<dyn NormFitter> {
        Box::new(MomentFitter {
            dim,
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        })
    }

    fn restore(&self, saved: &SavedNormalizer) -> Result<Box<dyn Normalizer>> {
        let dim = saved.saved_dim()?;
        let std = saved.param("std", dim)?;
        if std.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Invalid("std must be non-negative".into()));
        }
        Ok(Box::new(ZScoreNormalizer {
            mean: saved.param("mean", dim)?,
            std,
        }))
    }
}

impl Normalizer for ZScoreNormalizer {
    fn kind(&self) -> &'static str {
        "zscore"
    }

    fn dim(&self) -> Option<usize> {
        Some(self.mean.len())
    }

    fn apply_row(&self, row: &mut [f32]) {
        for ((v, &m), &s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = if s > 0.0 {
                ((f64::from(*v) - m) / s) as f32
            } else {
                0.0
            };
        }
    }

    fn save(&self) -> SavedNormalizer {
        SavedNormalizer {
            kind: "zscore".into(),
            dim: Some(self.mean.len()),
            params: BTreeMap::from([
                ("mean".to_string(), self.mean.clone()),
                ("std".to_string(), self.std.clone()),
            ]),
        }
    }
}

// ---- 0-1 -------------------------------------------------------------------

pub struct ZeroOne;

struct RangeFitter {
    dim: usize,
    n: u64,
    min: Vec<f64>,
    max: Vec<f64>,
}

impl NormFitter for RangeFitter {
    fn update(&mut self, rows: &[f32]) -> Result<()> {
        check_width(rows, self.dim)?;
        for r in rows.chunks_exact(self.dim) {
            for ((lo, hi), &v) in self.min.iter_mut().zip(self.max.iter_mut()).zip(r) {
                let v = f64::from(v);
                *lo = lo.min(v);
                *hi = hi.max(v);
            }
            self.n += 1;
        }
        Ok(())
    }

    fn finish(self: Box<Self>) -> Result<Box<dyn Normalizer>> {
        if self.n == 0 {
            return Err(Error::Empty("zeroone fit needs at least one training row".into()));
        }
        Ok(Box::new(ZeroOneNormalizer {
            min: self.min,
            max: self.max,
        }))
    }
}

pub struct ZeroOneNormalizer {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalization for ZeroOne {
    fn name(&self) -> &'static str {
        "zeroone"
    }

    fn fitter(&self, dim: usize) -> Box<dyn NormFitter> {
        Box::new(RangeFitter {
            dim,
            n: 0,
            min: vec![f64::INFINITY; dim],
            max: vec![f64::NEG_INFINITY; dim],
        })
    }

    fn restore(&self, saved: &SavedNormalizer) -> Result<Box<dyn Normalizer>> {
        let dim = saved.saved_dim()?;
        let (min, max) = (saved.param("min", dim)?, saved.param("max", dim)?);
        if min.iter().zip(&max).any(|(lo, hi)| !(hi >= lo)) {
            return Err(Error::Invalid("max must be >= min for every feature".into()));
        }
        Ok(Box::new(ZeroOneNormalizer { min, max }))
    }
}

impl Normalizer for ZeroOneNormalizer {
    fn kind(&self) -> &'static str {
        "zeroone"
    }

    fn dim(&self) -> Option<usize> {
        Some(self.min.len())
    }

    fn apply_row(&self, row: &mut [f32]) {
        for ((v, &lo), &hi) in row.iter_mut().zip(&self.min).zip(&self.max) {
            let span = hi - lo;
            *v = if span > 0.0 {
                ((f64::from(*v) - lo) / span) as f32
            } else {
                0.0
            };
        }
    }

    fn save(&self) -> SavedNormalizer {
        SavedNormalizer {
            kind: "zeroone".into(),
            dim: Some(self.min.len()),
            params: BTreeMap::from([
                ("min".to_string(), self.min.clone()),
                ("max".to_string(), self.max.clone()),
            ]),
        }
    }
}

// ---- L1 / L2 ---------------------------------------------------------------

/// Stateless per-row scaling to unit L1 or L2 norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowNorm {
    L1,
    L2,
}

struct StatelessFitter {
    norm: RowNorm,
    dim: usize,
    n: u64,
}

impl NormFitter for StatelessFitter {
    fn update(&mut self, rows: &[f32]) -> Result<()> {
        check_width(rows, self.dim)?;
        self.n += (rows.len() / self.dim) as u64;
        Ok(())
    }

    fn finish(self: Box<Self>) -> Result<Box<dyn Normalizer>> {
        if self.n == 0 {
            return Err(Error::Empty(format!(
                "{} fit needs at least one training row",
                self.norm.name()
            )));
        }
        Ok(Box::new(self.norm))
    }
}

impl Normalization for RowNorm {
    fn name(&self) -> &'static str {
        match self {
            RowNorm::L1 => "l1",
            RowNorm::L2 => "l2",
        }
    }

    fn fitter(&self, dim: usize) -> Box<dyn NormFitter> {
        Box::new(StatelessFitter { norm: *self, dim, n: 0 })
    }

    fn restore(&self, _saved: &SavedNormalizer) -> Result<Box<dyn Normalizer>> {
        Ok(Box::new(*self))
    }
}

impl Normalizer for RowNorm {
    fn kind(&self) -> &'static str {
        self.name()
    }

    fn dim(&self) -> Option<usize> {
        None
    }

    fn apply_row(&self, row: &mut [f32]) {
        let norm = match self {
            RowNorm::L1 => row.iter().map(|v| f64::from(*v).abs()).sum::<f64>(),
            RowNorm::L2 => row.iter().map(|v| f64::from(*v).powi(2)).sum::<f64>().sqrt(),
        };
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v = (f64::from(*v) / norm) as f32);
        }
    }

    fn save(&self) -> SavedNormalizer {
        SavedNormalizer {
            kind: self.name().into(),
            dim: None,
            params: BTreeMap::new(),
        }
    }
}
