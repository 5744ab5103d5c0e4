//! `PFV1` feature store: per-patch feature vectors plus frame geometry.
//!
//! Layout (little-endian):
//!
//! ```text
//! 0..4    magic "PFV1"
//! 4..8    u32 version (= 1)
//! 8..12   u32 header_len
//! 12..    header_len bytes of JSON header
//! ...     payload: n_frames * patch_count rows of `dim` f32, frame-major,
//!         patch rows in grid order
//! ```

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use byteorder::{ByteOrder, LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::dataman::{DatasetManifest, PatchGrid, Split};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PFV1";
pub const VERSION: u32 = 1;
const PREAMBLE_LEN: u64 = 12;

/// Output width of the convolutional part of each supported backbone.
pub const KNOWN_EXTRACTORS: &[(&str, usize)] = &[
    ("vgg16", 512),
    ("resnet50", 2048),
    ("xception", 2048),
    ("densenet121", 1024),
];

pub fn known_extractor_dim(name: &str) -> Option<usize> {
    KNOWN_EXTRACTORS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|&(_, d)| d)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FrameRef {
    pub clip_id: String,
    /// 0-based.
    pub frame_index: u32,
}

impl FrameRef {
    pub fn new(clip_id: impl Into<String>, frame_index: u32) -> Self {
        Self {
            clip_id: clip_id.into(),
            frame_index,
        }
    }
}

/// Metadata carried in the store header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreHeader {
    pub extractor_name: String,
    pub dim: usize,
    pub patch_size: u32,
    pub stride: u32,
    pub frame_width: u32,
    pub frame_height: u32,
    pub frames: Vec<FrameRef>,
}

impl StoreHeader {
    pub fn new(extractor_name: impl Into<String>, dim: usize, grid: PatchGrid, frames: Vec<FrameRef>) -> Self {
        Self {
            extractor_name: extractor_name.into(),
            dim,
            patch_size: grid.patch_size,
            stride: grid.stride,
            frame_width: grid.frame_width,
            frame_height: grid.frame_height,
            frames,
        }
    }

    pub fn grid(&self) -> PatchGrid {
        PatchGrid {
            frame_width: self.frame_width,
            frame_height: self.frame_height,
            patch_size: self.patch_size,
            stride: self.stride,
        }
    }

    pub fn patch_count(&self) -> usize {
        self.grid().patch_count()
    }

    pub fn n_rows(&self) -> u64 {
        self.frames.len() as u64 * self.patch_count() as u64
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Store("dim must be positive".into()));
        }
        if let Some(expected) = known_extractor_dim(&self.extractor_name) {
            if expected != self.dim {
                return Err(Error::Store(format!(
                    "extractor '{}' produces {expected} features, header says {}",
                    self.extractor_name, self.dim
                )));
            }
        }
        self.grid().validate()?;
        if self.frames.is_empty() {
            return Err(Error::Empty("a feature store must contain at least one frame".into()));
        }
        Ok(())
    }

    /// True when two stores can be compared row for row.
    pub fn compatible_with(&self, other: &StoreHeader) -> bool {
        self.extractor_name == other.extractor_name && self.dim == other.dim && self.grid() == other.grid()
    }
}

/// Streaming writer. Rows must arrive frame-major, patch-row-major; the
/// file only appears at `path` once [`StoreWriter::finish`] succeeds.
pub struct StoreWriter {
    path: PathBuf,
    tmp_path: PathBuf,
    out: Option<BufWriter<File>>,
    dim: usize,
    expected_rows: u64,
    rows: u64,
}

impl StoreWriter {
    pub fn create(path: impl AsRef<Path>, header: &StoreHeader) -> Result<Self> {
        header.validate()?;
        let path = path.as_ref().to_path_buf();
        let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
        tmp_name.push(".partial");
        let tmp_path = path.with_file_name(tmp_name);
        let file = File::create(&tmp_path).map_err(|e| Error::io(&tmp_path, e))?;
        let mut out = BufWriter::new(file);
        let json = serde_json::to_vec(header).map_err(|e| Error::parse("store header", e))?;
        let io = |e| Error::io(&tmp_path, e);
        out.write_all(MAGIC).map_err(io)?;
        out.write_u32::<LittleEndian>(VERSION).map_err(io)?;
        out.write_u32::<LittleEndian>(json.len() as u32).map_err(io)?;
        out.write_all(&json).map_err(io)?;
        Ok(Self {
            dim: header.dim,
            expected_rows: header.n_rows(),
            rows: 0,
            path,
            tmp_path,
            out: Some(out),
        })
    }

    pub fn push_row(&mut self, row: &[f32]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::WidthMismatch {
                expected: self.dim,
                got: row.len(),
            });
        }
        if self.rows >= self.expected_rows {
            return Err(Error::Store(format!(
                "more rows than the header allows ({})",
                self.expected_rows
            )));
        }
        if let Some(col) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: self.rows, col });
        }
        let out = self.out.as_mut().expect("writer is open until finish");
        for &v in row {
            out.write_f32::<LittleEndian>(v)
                .map_err(|e| Error::io(&self.tmp_path, e))?;
        }
        self.rows += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        if self.rows != self.expected_rows {
            return Err(Error::Store(format!(
                "header announces {} rows, {} written",
                self.expected_rows, self.rows
            )));
        }
        if let Some(mut out) = self.out.take() {
            out.flush().map_err(|e| Error::io(&self.tmp_path, e))?;
        }
        std::fs::rename(&self.tmp_path, &self.path).map_err(|e| Error::io(&self.path, e))
    }
}

impl Drop for StoreWriter {
    fn drop(&mut self) {
        // no-op after a successful rename
        let _ = std::fs::remove_file(&self.tmp_path);
    }
}

/// Write a whole store from an iterator of rows.
pub fn write_store<I, R>(path: impl AsRef<Path>, header: &StoreHeader, rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f32]>,
{
    let mut w = StoreWriter::create(path, header)?;
    for row in rows {
        w.push_row(row.as_ref())?;
    }
    w.finish()
}

/// A block of consecutive rows read from a store.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBatch {
    /// Index of the first row within the store.
    pub first_row: u64,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl FeatureBatch {
    pub fn new(first_row: u64, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 || data.is_empty() {
            return Err(Error::Empty("feature batch has no rows".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::WidthMismatch {
                expected: dim,
                got: data.len() % dim,
            });
        }
        Ok(Self { first_row, dim, data })
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dim)
    }

    pub fn rows_mut(&mut self) -> std::slice::ChunksExactMut<'_, f32> {
        self.data.chunks_exact_mut(self.dim)
    }

    /// Frames covered by this batch, as a half-open range of store frame
    /// positions.
    pub fn frame_span(&self, patch_count: usize) -> std::ops::Range<usize> {
        let first = self.first_row as usize / patch_count;
        let end = (self.first_row as usize + self.n_rows()).div_ceil(patch_count);
        first..end
    }
}

/// Opened store. Only the header is held in memory; rows are streamed.
#[derive(Debug, Clone)]
pub struct FeatureStore {
    path: PathBuf,
    header: StoreHeader,
    payload_offset: u64,
}

impl FeatureStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let file_len = file.metadata().map_err(|e| Error::io(&path, e))?.len();
        let mut r = BufReader::new(file);
        if file_len < PREAMBLE_LEN {
            return Err(Error::Truncated {
                offset: file_len,
                expected: PREAMBLE_LEN,
                found: file_len,
            });
        }
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|e| Error::io(&path, e))?;
        if &magic != MAGIC {
            return Err(Error::Store(format!("bad magic {magic:?}, expected \"PFV1\"")));
        }
        let version = r.read_u32::<LittleEndian>().map_err(|e| Error::io(&path, e))?;
        if version != VERSION {
            return Err(Error::Store(format!("unsupported version {version}, expected {VERSION}")));
        }
        let header_len = r.read_u32::<LittleEndian>().map_err(|e| Error::io(&path, e))? as u64;
        let payload_offset = PREAMBLE_LEN + header_len;
        if file_len < payload_offset {
            return Err(Error::Truncated {
                offset: file_len,
                expected: payload_offset,
                found: file_len,
            });
        }
        let mut json = vec![0u8; header_len as usize];
        r.read_exact(&mut json).map_err(|e| Error::io(&path, e))?;
        let header: StoreHeader =
            serde_json::from_slice(&json).map_err(|e| Error::parse("store header", e))?;
        header.validate()?;

        let expected_len = payload_offset + header.n_rows() * header.dim as u64 * 4;
        if file_len < expected_len {
            let row_bytes = header.dim as u64 * 4;
            let whole_rows = (file_len - payload_offset) / row_bytes;
            return Err(Error::Truncated {
                offset: payload_offset + whole_rows * row_bytes,
                expected: expected_len,
                found: file_len,
            });
        }
        if file_len > expected_len {
            return Err(Error::Store(format!(
                "{} trailing bytes after payload",
                file_len - expected_len
            )));
        }
        Ok(Self {
            path,
            header,
            payload_offset,
        })
    }

    pub fn header(&self) -> &StoreHeader {
        &self.header
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn dim(&self) -> usize {
        self.header.dim
    }

    pub fn n_rows(&self) -> u64 {
        self.header.n_rows()
    }

    pub fn n_frames(&self) -> usize {
        self.header.frames.len()
    }

    pub fn patch_count(&self) -> usize {
        self.header.patch_count()
    }

    /// Stream rows in batches of at most `batch_rows`.
    pub fn batches(&self, batch_rows: usize) -> Result<BatchReader> {
        if batch_rows == 0 {
            return Err(Error::Invalid("batch size must be positive".into()));
        }
        let mut file = File::open(&self.path).map_err(|e| Error::io(&self.path, e))?;
        file.seek(SeekFrom::Start(self.payload_offset))
            .map_err(|e| Error::io(&self.path, e))?;
        Ok(BatchReader {
            path: self.path.clone(),
            reader: BufReader::with_capacity(1 << 16, file),
            dim: self.header.dim,
            payload_offset: self.payload_offset,
            total_rows: self.n_rows(),
            next_row: 0,
            batch_rows,
            bytes: Vec::new(),
        })
    }

    /// Stream whole frames, `frames_per_batch` at a time.
    pub fn frame_batches(&self, frames_per_batch: usize) -> Result<BatchReader> {
        self.batches(frames_per_batch.max(1) * self.patch_count())
    }

    /// Read every row into memory.
    pub fn read_all(&self) -> Result<Vec<f32>> {
        let mut out = Vec::with_capacity(self.n_rows() as usize * self.dim());
        for batch in self.batches(4096)? {
            out.extend_from_slice(&batch?.data);
        }
        Ok(out)
    }
}

/// Iterator over [`FeatureBatch`]es; memory use is one batch.
pub struct BatchReader {
    path: PathBuf,
    reader: BufReader<File>,
    dim: usize,
    payload_offset: u64,
    total_rows: u64,
    next_row: u64,
    batch_rows: usize,
    bytes: Vec<u8>,
}

impl BatchReader {
    fn read_batch(&mut self) -> Result<FeatureBatch> {
        let n = (self.total_rows - self.next_row).min(self.batch_rows as u64) as usize;
        let row_bytes = self.dim * 4;
        self.bytes.resize(n * row_bytes, 0);
        if let Err(e) = self.reader.read_exact(&mut self.bytes) {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                let offset = self.payload_offset + self.next_row * row_bytes as u64;
                return Err(Error::Truncated {
                    offset,
                    expected: self.payload_offset + self.total_rows * row_bytes as u64,
                    found: std::fs::metadata(&self.path).map(|m| m.len()).unwrap_or(0),
                });
            }
            return Err(Error::io(&self.path, e));
        }
        let mut data = vec![0f32; n * self.dim];
        LittleEndian::read_f32_into(&self.bytes, &mut data);
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: self.next_row + (pos / self.dim) as u64,
                col: pos % self.dim,
            });
        }
        let batch = FeatureBatch {
            first_row: self.next_row,
            dim: self.dim,
            data,
        };
        self.next_row += n as u64;
        Ok(batch)
    }
}

impl Iterator for BatchReader {
    type Item = Result<FeatureBatch>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next_row >= self.total_rows {
            return None;
        }
        let out = self.read_batch();
        if out.is_err() {
            // stop after the first error
            self.next_row = self.total_rows;
        }
        Some(out)
    }
}

/// Check that a store covers exactly the frames of one manifest split,
/// each frame once.
pub fn validate_against_manifest(header: &StoreHeader, manifest: &DatasetManifest, split: Split) -> Result<()> {
    let counts: HashMap<&str, u32> = manifest
        .clips_in(split)
        .map(|c| (c.clip_id.as_str(), c.frame_count))
        .collect();
    let mut seen: HashSet<(&str, u32)> = HashSet::with_capacity(header.frames.len());
    for f in &header.frames {
        let in_split = counts
            .get(f.clip_id.as_str())
            .is_some_and(|&n| f.frame_index < n);
        if !in_split {
            return Err(Error::ExtraFrame {
                clip_id: f.clip_id.clone(),
                frame_index: f.frame_index,
                split: split.to_string(),
            });
        }
        if !seen.insert((f.clip_id.as_str(), f.frame_index)) {
            return Err(Error::DuplicateFrame {
                clip_id: f.clip_id.clone(),
                frame_index: f.frame_index,
            });
        }
    }
    let expected: BTreeSet<(&str, u32)> = manifest
        .clips_in(split)
        .flat_map(|c| (0..c.frame_count).map(move |i| (c.clip_id.as_str(), i)))
        .collect();
    if let Some(&(clip, idx)) = expected.iter().find(|k| !seen.contains(*k)) {
        return Err(Error::MissingFrame {
            clip_id: clip.to_string(),
            frame_index: idx,
        });
    }
    Ok(())
}
