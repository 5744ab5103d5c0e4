//! Incremental PCA.
//!
//! Each batch is merged into the running model by taking the SVD of the
//! stacked matrix
//!
//! ```text
//! [ diag(s) * components           ]   k rows (previous basis)
//! [ batch - batch_mean             ]   b rows
//! [ sqrt(n*b/(n+b)) * (mean - batch_mean) ]   1 row
//! ```
//!
//! and keeping the top `k` right singular vectors, so memory stays at
//! `O((k + b) * d)` regardless of how many rows have been seen.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::featio::FeatureBatch;

pub const MAGIC: &[u8; 4] = b"IPC1";
pub const VERSION: u32 = 1;
pub const DEFAULT_BATCH_ROWS: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct IpcaModel {
    k: usize,
    d: usize,
    n_seen: u64,
    mean: Vec<f64>,
    /// `k x d`, orthonormal rows.
    components: DMatrix<f64>,
    /// Non-increasing.
    singular_values: Vec<f64>,
    /// Row-major copy of `components` for projection.
    projection: Vec<f64>,
}

impl IpcaModel {
    pub fn new(k: usize, d: usize) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(Error::Invalid("IPCA dimensions must be positive".into()));
        }
        if k > d {
            return Err(Error::Invalid(format!(
                "cannot reduce {d} features to {k} components"
            )));
        }
        Ok(Self {
            k,
            d,
            n_seen: 0,
            mean: vec![0.0; d],
            components: DMatrix::zeros(0, d),
            singular_values: Vec::new(),
            projection: Vec::new(),
        })
    }

    fn set_components(&mut self, components: DMatrix<f64>) {
        self.projection = components.transpose().as_slice().to_vec();
        self.components = components;
    }

    pub fn n_components(&self) -> usize {
        self.k
    }

    pub fn n_features(&self) -> usize {
        self.d
    }

    pub fn n_seen(&self) -> u64 {
        self.n_seen
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn is_fitted(&self) -> bool {
        self.n_seen >= self.k as u64 && self.components.nrows() == self.k
    }

    /// Variance captured by each component (population normalization).
    pub fn explained_variance(&self) -> Vec<f64> {
        let n = self.n_seen.max(1) as f64;
        self.singular_values.iter().map(|s| s * s / n).collect()
    }

    pub fn partial_fit_batch(&mut self, batch: &FeatureBatch) -> Result<()> {
        if batch.dim != self.d {
            return Err(Error::WidthMismatch {
                expected: self.d,
                got: batch.dim,
            });
        }
        self.partial_fit(&batch.data)
    }

    /// Fold a flat row-major block of `d`-wide rows into the model.
    pub fn partial_fit(&mut self, rows: &[f32]) -> Result<()> {
        if rows.is_empty() {
            return Err(Error::Empty("IPCA batch has no rows".into()));
        }
        if !rows.len().is_multiple_of(self.d) {
            return Err(Error::WidthMismatch {
                expected: self.d,
                got: rows.len() % self.d,
            });
        }
        let b = rows.len() / self.d;
        if self.n_seen == 0 && b < self.k {
            return Err(Error::Invalid(format!(
                "first IPCA batch has {b} rows, needs at least k = {}",
                self.k
            )));
        }

        let mut batch_mean = vec![0f64; self.d];
        for r in rows.chunks_exact(self.d) {
            for (m, &v) in batch_mean.iter_mut().zip(r) {
                *m += f64::from(v);
            }
        }
        batch_mean.iter_mut().for_each(|m| *m /= b as f64);

        let prev = if self.n_seen == 0 { 0 } else { self.components.nrows() };
        let correction = usize::from(self.n_seen > 0);
        let m = prev + b + correction;
        let mut stacked = DMatrix::<f64>::zeros(m, self.d);
        for i in 0..prev {
            let s = self.singular_values[i];
            for j in 0..self.d {
                stacked[(i, j)] = s * self.components[(i, j)];
            }
        }
        for (i, r) in rows.chunks_exact(self.d).enumerate() {
            for j in 0..self.d {
                stacked[(prev + i, j)] = f64::from(r[j]) - batch_mean[j];
            }
        }
        let n_old = self.n_seen as f64;
        let n_total = n_old + b as f64;
        if correction == 1 {
            let scale = (n_old * b as f64 / n_total).sqrt();
            for j in 0..self.d {
                stacked[(m - 1, j)] = scale * (self.mean[j] - batch_mean[j]);
            }
        }

        let svd = stacked.svd(false, true);
        let v_t = svd
            .v_t
            .ok_or_else(|| Error::LinAlg("SVD did not return right singular vectors".into()))?;
        let sv = svd.singular_values;
        let mut order: Vec<usize> = (0..sv.len()).collect();
        // stable: ties keep the decomposition's order
        order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
        if order.len() < self.k {
            return Err(Error::LinAlg(format!(
                "SVD produced {} singular values, need {}",
                order.len(),
                self.k
            )));
        }

        let mut components = DMatrix::<f64>::zeros(self.k, self.d);
        let mut singular_values = Vec::with_capacity(self.k);
        for (row, &src) in order.iter().take(self.k).enumerate() {
            let mut comp: Vec<f64> = v_t.row(src).iter().copied().collect();
            canonicalize_sign(&mut comp);
            for (j, v) in comp.into_iter().enumerate() {
                components[(row, j)] = v;
            }
            singular_values.push(sv[src]);
        }

        for j in 0..self.d {
            self.mean[j] = (n_old * self.mean[j] + b as f64 * batch_mean[j]) / n_total;
        }
        self.set_components(components);
        self.singular_values = singular_values;
        self.n_seen += b as u64;
        Ok(())
    }

    /// Project one row: `components * (x - mean)`.
    pub fn transform_row(&self, x: &[f32], out: &mut [f32]) -> Result<()> {
        if !self.is_fitted() {
            return Err(Error::NotFitted(format!(
                "IPCA has seen {} rows, needs at least {}",
                self.n_seen, self.k
            )));
        }
        if x.len() != self.d {
            return Err(Error::WidthMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        if out.len() != self.k {
            return Err(Error::WidthMismatch {
                expected: self.k,
                got: out.len(),
            });
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(&v, m)| f64::from(v) - m).collect();
        for (o, comp) in out.iter_mut().zip(self.projection.chunks_exact(self.d)) {
            let acc: f64 = comp.iter().zip(&centered).map(|(c, x)| c * x).sum();
            *o = acc as f32;
        }
        Ok(())
    }

    /// Project a flat row-major block; output is `n x k`, row-major.
    pub fn transform(&self, rows: &[f32]) -> Result<Vec<f32>> {
        if !rows.len().is_multiple_of(self.d) {
            return Err(Error::WidthMismatch {
                expected: self.d,
                got: rows.len() % self.d,
            });
        }
        let n = rows.len() / self.d;
        let mut out = vec![0f32; n * self.k];
        rows.par_chunks_exact(self.d)
            .zip(out.par_chunks_exact_mut(self.k))
            .try_for_each(|(x, o)| self.transform_row(x, o))?;
        Ok(out)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        w.write_u64::<LittleEndian>(self.k as u64)?;
        w.write_u64::<LittleEndian>(self.d as u64)?;
        w.write_u64::<LittleEndian>(self.n_seen)?;
        let fitted_rows = self.components.nrows() as u64;
        w.write_u64::<LittleEndian>(fitted_rows)?;
        for v in &self.mean {
            w.write_f64::<LittleEndian>(*v)?;
        }
        for i in 0..self.components.nrows() {
            for j in 0..self.d {
                w.write_f64::<LittleEndian>(self.components[(i, j)])?;
            }
        }
        for v in &self.singular_values {
            w.write_f64::<LittleEndian>(*v)?;
        }
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let io = |e| Error::io(path, e);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(Error::Invalid(format!("{}: not an IPC1 model", path.display())));
        }
        let version = r.read_u32::<LittleEndian>().map_err(io)?;
        if version != VERSION {
            return Err(Error::Invalid(format!("IPC1 version {version} unsupported")));
        }
        let k = r.read_u64::<LittleEndian>().map_err(io)? as usize;
        let d = r.read_u64::<LittleEndian>().map_err(io)? as usize;
        let n_seen = r.read_u64::<LittleEndian>().map_err(io)?;
        let rows = r.read_u64::<LittleEndian>().map_err(io)? as usize;
        let mut model = IpcaModel::new(k, d)?;
        if rows != 0 && rows != k {
            return Err(Error::Invalid(format!("IPC1 stores {rows} components, expected {k}")));
        }
        model.n_seen = n_seen;
        for m in model.mean.iter_mut() {
            *m = r.read_f64::<LittleEndian>().map_err(io)?;
        }
        let mut components = DMatrix::zeros(rows, d);
        for i in 0..rows {
            for j in 0..d {
                components[(i, j)] = r.read_f64::<LittleEndian>().map_err(io)?;
            }
        }
        model.set_components(components);
        model.singular_values = (0..rows)
            .map(|_| r.read_f64::<LittleEndian>())
            .collect::<std::io::Result<_>>()
            .map_err(io)?;
        Ok(model)
    }
}

/// Flip `v` so its largest-magnitude coordinate (first on ties) is
/// positive.
fn canonicalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}
