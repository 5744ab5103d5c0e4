//! Dataset manifests, frame loading, resizing and the fixed patch grid.
//!
//! Manifests use 1-based inclusive frame ranges (the UCSD ground-truth
//! convention). Everything in memory is 0-based; the conversion happens
//! in [`DatasetManifest::from_toml_str`] / [`DatasetManifest::to_toml_string`]
//! and their JSON counterparts.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use image::imageops::{self, FilterType};
use image::{DynamicImage, GrayImage, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Train or test partition of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Invalid(format!("split must be train|test, got '{other}'"))),
        }
    }
}

/// Inclusive 0-based range of anomalous frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameRange {
    pub first: u32,
    pub last: u32,
}

impl FrameRange {
    pub fn contains(&self, frame_index: u32) -> bool {
        self.first <= frame_index && frame_index <= self.last
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipEntry {
    pub clip_id: String,
    pub split: Split,
    pub frame_dir: PathBuf,
    pub frame_count: u32,
    /// Sorted, non-overlapping, 0-based.
    pub anomaly_ranges: Vec<FrameRange>,
}

impl ClipEntry {
    /// Ground-truth label of a 0-based frame index.
    pub fn is_anomalous(&self, frame_index: u32) -> bool {
        self.anomaly_ranges.iter().any(|r| r.contains(frame_index))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub frame_width: u32,
    pub frame_height: u32,
    pub fps: u32,
    /// Sorted by `clip_id`.
    pub clips: Vec<ClipEntry>,
    /// Directory relative `frame_dir` entries are resolved against.
    pub base_dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct RawManifest {
    name: String,
    frame_width: u32,
    frame_height: u32,
    fps: u32,
    clips: Vec<RawClip>,
}

#[derive(Serialize, Deserialize)]
struct RawClip {
    clip_id: String,
    split: Split,
    frame_dir: PathBuf,
    frame_count: u32,
    #[serde(default)]
    anomaly_ranges: Vec<[i64; 2]>,
}

impl DatasetManifest {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawManifest = toml::from_str(text).map_err(|e| Error::parse("manifest", e))?;
        Self::from_raw(raw)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawManifest =
            serde_json::from_str(text).map_err(|e| Error::parse("manifest", e))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawManifest) -> Result<Self> {
        if raw.frame_width == 0 || raw.frame_height == 0 {
            return Err(Error::Manifest("frame resolution must be positive".into()));
        }
        let mut seen = HashSet::new();
        let mut clips = Vec::with_capacity(raw.clips.len());
        for c in raw.clips {
            if !seen.insert(c.clip_id.clone()) {
                return Err(Error::Manifest(format!("duplicate clip_id '{}'", c.clip_id)));
            }
            if c.frame_count == 0 {
                return Err(Error::Manifest(format!("clip '{}' has zero frames", c.clip_id)));
            }
            if c.split == Split::Train && !c.anomaly_ranges.is_empty() {
                return Err(Error::Manifest(format!(
                    "train clip '{}' lists anomaly ranges",
                    c.clip_id
                )));
            }
            let mut ranges = Vec::with_capacity(c.anomaly_ranges.len());
            for [lo, hi] in c.anomaly_ranges {
                if lo < 1 || lo > hi || hi > i64::from(c.frame_count) {
                    return Err(Error::Manifest(format!(
                        "clip '{}': anomaly range [{lo}, {hi}] outside [1, {}] or inverted",
                        c.clip_id, c.frame_count
                    )));
                }
                ranges.push(FrameRange {
                    first: (lo - 1) as u32,
                    last: (hi - 1) as u32,
                });
            }
            ranges.sort_by_key(|r| r.first);
            if let Some(w) = ranges.windows(2).find(|w| w[1].first <= w[0].last) {
                return Err(Error::Manifest(format!(
                    "clip '{}': anomaly ranges [{}, {}] and [{}, {}] overlap",
                    c.clip_id,
                    w[0].first + 1,
                    w[0].last + 1,
                    w[1].first + 1,
                    w[1].last + 1
                )));
            }
            clips.push(ClipEntry {
                clip_id: c.clip_id,
                split: c.split,
                frame_dir: c.frame_dir,
                frame_count: c.frame_count,
                anomaly_ranges: ranges,
            });
        }
        clips.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));
        Ok(Self {
            name: raw.name,
            frame_width: raw.frame_width,
            frame_height: raw.frame_height,
            fps: raw.fps,
            clips,
            base_dir: PathBuf::new(),
        })
    }

    fn to_raw(&self) -> RawManifest {
        RawManifest {
            name: self.name.clone(),
            frame_width: self.frame_width,
            frame_height: self.frame_height,
            fps: self.fps,
            clips: self
                .clips
                .iter()
                .map(|c| RawClip {
                    clip_id: c.clip_id.clone(),
                    split: c.split,
                    frame_dir: c.frame_dir.clone(),
                    frame_count: c.frame_count,
                    anomaly_ranges: c
                        .anomaly_ranges
                        .iter()
                        .map(|r| [i64::from(r.first) + 1, i64::from(r.last) + 1])
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(&self.to_raw()).map_err(|e| Error::parse("manifest", e))
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.to_raw()).map_err(|e| Error::parse("manifest", e))
    }

    pub fn clips_in(&self, split: Split) -> impl Iterator<Item = &ClipEntry> {
        self.clips.iter().filter(move |c| c.split == split)
    }

    pub fn clip(&self, clip_id: &str) -> Option<&ClipEntry> {
        self.clips
            .binary_search_by(|c| c.clip_id.as_str().cmp(clip_id))
            .ok()
            .map(|i| &self.clips[i])
    }

    /// Frame directory of a clip, resolved against the manifest location.
    pub fn frame_dir(&self, clip: &ClipEntry) -> PathBuf {
        if clip.frame_dir.is_absolute() {
            clip.frame_dir.clone()
        } else {
            self.base_dir.join(&clip.frame_dir)
        }
    }
}

/// Load a manifest from a `.toml` or `.json` file.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut manifest = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => DatasetManifest::from_json_str(&text)?,
        _ => DatasetManifest::from_toml_str(&text)?,
    };
    manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(manifest)
}

/// Square patch placed on a frame; `x`, `y` are the top-left pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PatchRect {
    pub x: u32,
    pub y: u32,
    pub size: u32,
}

/// Regular lattice of square, possibly overlapping patches that tiles a
/// frame exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchGrid {
    pub frame_width: u32,
    pub frame_height: u32,
    pub patch_size: u32,
    pub stride: u32,
}

impl Default for PatchGrid {
    /// 384x256 frames, 32 px patches, 16 px stride: 23 x 15 = 345 patches.
    fn default() -> Self {
        Self {
            frame_width: 384,
            frame_height: 256,
            patch_size: 32,
            stride: 16,
        }
    }
}

impl PatchGrid {
    pub fn new(frame_width: u32, frame_height: u32, patch_size: u32, stride: u32) -> Result<Self> {
        let grid = Self {
            frame_width,
            frame_height,
            patch_size,
            stride,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 || self.stride == 0 {
            return Err(Error::Grid("patch size and stride must be positive".into()));
        }
        for (axis, extent) in [("width", self.frame_width), ("height", self.frame_height)] {
            if extent < self.patch_size {
                return Err(Error::Grid(format!(
                    "frame {axis} {extent} is smaller than patch size {}",
                    self.patch_size
                )));
            }
            if !(extent - self.patch_size).is_multiple_of(self.stride) {
                return Err(Error::Grid(format!(
                    "stride {} does not place the last patch at the frame {axis} edge ({extent} px, patch {})",
                    self.stride, self.patch_size
                )));
            }
        }
        Ok(())
    }

    pub fn cols(&self) -> u32 {
        (self.frame_width - self.patch_size) / self.stride + 1
    }

    pub fn rows(&self) -> u32 {
        (self.frame_height - self.patch_size) / self.stride + 1
    }

    pub fn patch_count(&self) -> usize {
        self.cols() as usize * self.rows() as usize
    }

    /// Rectangle of patch `i` in row-major order (`i = r * cols + c`).
    pub fn rect(&self, i: usize) -> PatchRect {
        let cols = self.cols() as usize;
        let (r, c) = (i / cols, i % cols);
        PatchRect {
            x: c as u32 * self.stride,
            y: r as u32 * self.stride,
            size: self.patch_size,
        }
    }

    /// All patch rectangles, row-major.
    pub fn enumerate(&self) -> Result<Vec<PatchRect>> {
        self.validate()?;
        Ok((0..self.patch_count()).map(|i| self.rect(i)).collect())
    }
}

/// 8-bit image, grayscale (1 channel) or RGB (3 channels), row-major
/// interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub clip_id: String,
    pub frame_index: u32,
    pub width: u32,
    pub height: u32,
    pub channels: u8,
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn new(
        clip_id: impl Into<String>,
        frame_index: u32,
        width: u32,
        height: u32,
        channels: u8,
        pixels: Vec<u8>,
    ) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Image(format!("unsupported channel count {channels}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::Image("empty image".into()));
        }
        let expected = width as usize * height as usize * channels as usize;
        if pixels.len() != expected {
            return Err(Error::Image(format!(
                "pixel buffer holds {} bytes, {width}x{height}x{channels} needs {expected}",
                pixels.len()
            )));
        }
        Ok(Self {
            clip_id: clip_id.into(),
            frame_index,
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn pixel(&self, x: u32, y: u32, channel: u8) -> u8 {
        let idx = (y as usize * self.width as usize + x as usize) * self.channels as usize
            + channel as usize;
        self.pixels[idx]
    }

    fn from_dynamic(img: DynamicImage, clip_id: &str, frame_index: u32) -> Result<Self> {
        let (width, height, channels, pixels) = match img {
            DynamicImage::ImageLuma8(g) => (g.width(), g.height(), 1, g.into_raw()),
            DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA8(_) => {
                let g = img.to_luma8();
                (g.width(), g.height(), 1, g.into_raw())
            }
            other => {
                let rgb = other.to_rgb8();
                (rgb.width(), rgb.height(), 3, rgb.into_raw())
            }
        };
        Frame::new(clip_id, frame_index, width, height, channels, pixels)
    }
}

/// Bilinear, aspect-ignoring resize to `width` x `height`. A frame that
/// already has the target size is returned unchanged.
pub fn resize_frame(frame: &Frame, width: u32, height: u32) -> Result<Frame> {
    if frame.width == 0 || frame.height == 0 || frame.pixels.is_empty() {
        return Err(Error::Image("cannot resize an empty frame".into()));
    }
    if width == 0 || height == 0 {
        return Err(Error::Image("target size must be positive".into()));
    }
    if frame.width == width && frame.height == height {
        return Ok(frame.clone());
    }
    let pixels = match frame.channels {
        1 => {
            let img = GrayImage::from_raw(frame.width, frame.height, frame.pixels.clone())
                .ok_or_else(|| Error::Image("corrupt grayscale buffer".into()))?;
            imageops::resize(&img, width, height, FilterType::Triangle).into_raw()
        }
        3 => {
            let img = RgbImage::from_raw(frame.width, frame.height, frame.pixels.clone())
                .ok_or_else(|| Error::Image("corrupt RGB buffer".into()))?;
            imageops::resize(&img, width, height, FilterType::Triangle).into_raw()
        }
        c => return Err(Error::Image(format!("unsupported channel count {c}"))),
    };
    Frame::new(
        frame.clip_id.clone(),
        frame.frame_index,
        width,
        height,
        frame.channels,
        pixels,
    )
}

/// Pixel block cut from a frame, same channel layout as the frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchBlock {
    pub size: u32,
    pub channels: u8,
    pub pixels: Vec<u8>,
}

/// Exact pixel copy of `rect`.
pub fn crop_patch(frame: &Frame, rect: PatchRect) -> Result<PatchBlock> {
    let fits = rect.x.checked_add(rect.size).is_some_and(|r| r <= frame.width)
        && rect.y.checked_add(rect.size).is_some_and(|b| b <= frame.height);
    if !fits {
        return Err(Error::OutOfBounds {
            rect: (rect.x, rect.y, rect.size, rect.size),
            width: frame.width,
            height: frame.height,
        });
    }
    let ch = frame.channels as usize;
    let row_bytes = rect.size as usize * ch;
    let mut pixels = Vec::with_capacity(row_bytes * rect.size as usize);
    for y in rect.y..rect.y + rect.size {
        let start = (y as usize * frame.width as usize + rect.x as usize) * ch;
        pixels.extend_from_slice(&frame.pixels[start..start + row_bytes]);
    }
    Ok(PatchBlock {
        size: rect.size,
        channels: frame.channels,
        pixels,
    })
}

const FRAME_EXTENSIONS: &[&str] = &["tif", "tiff", "png", "jpg", "jpeg", "bmp"];

/// Image files of a directory in lexicographic filename order.
pub fn list_frame_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_frame = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| FRAME_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if is_frame && path.is_file() {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

pub fn load_frame(path: impl AsRef<Path>, clip_id: &str, frame_index: u32) -> Result<Frame> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
    Frame::from_dynamic(img, clip_id, frame_index)
}

/// Load every frame of a clip, checking count and source resolution
/// against the manifest.
pub fn load_clip_frames(manifest: &DatasetManifest, clip: &ClipEntry) -> Result<Vec<Frame>> {
    let files = list_frame_files(manifest.frame_dir(clip))?;
    if files.len() != clip.frame_count as usize {
        return Err(Error::Manifest(format!(
            "clip '{}' lists {} frames but its directory holds {}",
            clip.clip_id,
            clip.frame_count,
            files.len()
        )));
    }
    files
        .iter()
        .enumerate()
        .map(|(i, path)| {
            let frame = load_frame(path, &clip.clip_id, i as u32)?;
            if frame.width != manifest.frame_width || frame.height != manifest.frame_height {
                return Err(Error::Image(format!(
                    "{}: {}x{} does not match manifest resolution {}x{}",
                    path.display(),
                    frame.width,
                    frame.height,
                    manifest.frame_width,
                    manifest.frame_height
                )));
            }
            Ok(frame)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest_text(clips: &str) -> String {
        format!(
            "name = \"toy\"\nframe_width = 360\nframe_height = 240\nfps = 10\n{clips}"
        )
    }

    #[test]
    fn parses_and_sorts_clips() {
        let text = manifest_text(
            r#"
[[clips]]
clip_id = "Test002"
split = "test"
frame_dir = "Test/Test002"
frame_count = 180
anomaly_ranges = [[95, 180]]

[[clips]]
clip_id = "Test001"
split = "test"
frame_dir = "Test/Test001"
frame_count = 180
anomaly_ranges = [[120, 150], [61, 100]]

[[clips]]
clip_id = "Train001"
split = "train"
frame_dir = "Train/Train001"
frame_count = 120
"#,
        );
        let m = DatasetManifest::from_toml_str(&text).unwrap();
        let ids: Vec<_> = m.clips.iter().map(|c| c.clip_id.as_str()).collect();
        assert_eq!(ids, ["Test001", "Test002", "Train001"]);
        let t1 = m.clip("Test001").unwrap();
        assert_eq!(t1.anomaly_ranges[0], FrameRange { first: 60, last: 99 });
        // frame 100 (1-based) is index 99
        assert!(t1.is_anomalous(99));
        assert!(!t1.is_anomalous(100));
        assert_eq!(m.clips_in(Split::Train).count(), 1);

        let again = DatasetManifest::from_toml_str(&m.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, m);
        let json = DatasetManifest::from_json_str(&m.to_json_string().unwrap()).unwrap();
        assert_eq!(json, m);
    }

    #[test]
    fn rejects_bad_ranges() {
        let clip = |ranges: &str, split: &str| {
            manifest_text(&format!(
                "[[clips]]\nclip_id = \"c\"\nsplit = \"{split}\"\nframe_dir = \"c\"\nframe_count = 10\nanomaly_ranges = {ranges}\n"
            ))
        };
        for (ranges, split) in [
            ("[[5, 3]]", "test"),
            ("[[0, 3]]", "test"),
            ("[[3, 11]]", "test"),
            ("[[1, 5], [5, 8]]", "test"),
            ("[[1, 2]]", "train"),
        ] {
            let err = DatasetManifest::from_toml_str(&clip(ranges, split)).unwrap_err();
            assert!(matches!(err, Error::Manifest(_)), "{ranges}/{split}: {err}");
        }
        assert!(matches!(
            DatasetManifest::from_toml_str("name = 3").unwrap_err(),
            Error::Parse { .. }
        ));
    }

    #[test]
    fn rejects_zero_frames_and_duplicates() {
        let zero = manifest_text(
            "[[clips]]\nclip_id = \"c\"\nsplit = \"train\"\nframe_dir = \"c\"\nframe_count = 0\n",
        );
        assert!(DatasetManifest::from_toml_str(&zero).is_err());
        let dup = manifest_text(
            "[[clips]]\nclip_id = \"c\"\nsplit = \"train\"\nframe_dir = \"c\"\nframe_count = 3\n\
             [[clips]]\nclip_id = \"c\"\nsplit = \"test\"\nframe_dir = \"d\"\nframe_count = 3\n",
        );
        assert!(DatasetManifest::from_toml_str(&dup).is_err());
    }

    #[test]
    fn default_grid_has_345_patches() {
        let g = PatchGrid::default();
        assert_eq!((g.cols(), g.rows()), (23, 15));
        let rects = g.enumerate().unwrap();
        assert_eq!(rects.len(), 345);
        let last = rects.last().unwrap();
        assert_eq!((last.x + last.size, last.y + last.size), (384, 256));
    }

    #[test]
    fn degenerate_and_overlapping_grids() {
        let one = PatchGrid::new(32, 32, 32, 16).unwrap().enumerate().unwrap();
        assert_eq!(one, vec![PatchRect { x: 0, y: 0, size: 32 }]);

        let four = PatchGrid::new(48, 48, 32, 16).unwrap().enumerate().unwrap();
        let corners: Vec<_> = four.iter().map(|r| (r.x, r.y)).collect();
        assert_eq!(corners, [(0, 0), (16, 0), (0, 16), (16, 16)]);
    }

    #[test]
    fn non_tiling_grid_is_rejected() {
        assert!(matches!(PatchGrid::new(50, 48, 32, 16), Err(Error::Grid(_))));
        assert!(matches!(PatchGrid::new(16, 48, 32, 16), Err(Error::Grid(_))));
        assert!(matches!(PatchGrid::new(48, 48, 32, 0), Err(Error::Grid(_))));
    }

    fn constant_frame(w: u32, h: u32, v: u8) -> Frame {
        Frame::new("c", 0, w, h, 1, vec![v; (w * h) as usize]).unwrap()
    }

    #[test]
    fn crop_constant_and_corner() {
        let f = constant_frame(384, 256, 77);
        let b = crop_patch(&f, PatchRect { x: 0, y: 0, size: 32 }).unwrap();
        assert_eq!(b.pixels.len(), 32 * 32);
        assert!(b.pixels.iter().all(|&p| p == 77));

        let mut f = constant_frame(384, 256, 0);
        f.pixels[255 * 384 + 383] = 9;
        let b = crop_patch(&f, PatchRect { x: 352, y: 224, size: 32 }).unwrap();
        assert_eq!(*b.pixels.last().unwrap(), 9);

        let err = crop_patch(&f, PatchRect { x: 368, y: 0, size: 32 }).unwrap_err();
        assert!(matches!(err, Error::OutOfBounds { .. }));
    }

    #[test]
    fn crop_recovers_coordinates() {
        // RGB frame with pixel = (x, y, x ^ y); stays within u8 on a 64x48 frame.
        let (w, h) = (64u32, 48u32);
        let mut px = Vec::new();
        for y in 0..h {
            for x in 0..w {
                px.extend_from_slice(&[x as u8, y as u8, (x ^ y) as u8]);
            }
        }
        let f = Frame::new("c", 0, w, h, 3, px).unwrap();
        let grid = PatchGrid::new(w, h, 32, 16).unwrap();
        for (i, rect) in grid.enumerate().unwrap().into_iter().enumerate() {
            assert_eq!(grid.rect(i), rect);
            let b = crop_patch(&f, rect).unwrap();
            for dy in 0..32u32 {
                for dx in 0..32u32 {
                    let o = ((dy * 32 + dx) * 3) as usize;
                    assert_eq!(b.pixels[o], (rect.x + dx) as u8);
                    assert_eq!(b.pixels[o + 1], (rect.y + dy) as u8);
                }
            }
        }
    }

    #[test]
    fn resize_to_grid_resolution() {
        for (w, h) in [(238, 158), (360, 240)] {
            let f = constant_frame(w, h, 120);
            let r = resize_frame(&f, 384, 256).unwrap();
            assert_eq!((r.width, r.height, r.pixels.len()), (384, 256, 384 * 256));
            assert!(r.pixels.iter().all(|&p| p == 120));
        }
        let mut f = constant_frame(384, 256, 0);
        f.pixels.iter_mut().enumerate().for_each(|(i, p)| *p = (i % 251) as u8);
        assert_eq!(resize_frame(&f, 384, 256).unwrap(), f);

        let empty = Frame {
            clip_id: "c".into(),
            frame_index: 0,
            width: 0,
            height: 0,
            channels: 1,
            pixels: vec![],
        };
        assert!(resize_frame(&empty, 384, 256).is_err());
    }

    #[test]
    fn loads_frames_from_directory() {
        let dir = tempfile::tempdir().unwrap();
        let clip_dir = dir.path().join("Train001");
        std::fs::create_dir(&clip_dir).unwrap();
        for (i, name) in ["002.png", "001.png", "010.png"].iter().enumerate() {
            GrayImage::from_pixel(36, 24, image::Luma([i as u8 * 10]))
                .save(clip_dir.join(name))
                .unwrap();
        }
        std::fs::write(clip_dir.join("notes.txt"), "x").unwrap();
        let manifest_path = dir.path().join("m.toml");
        std::fs::write(
            &manifest_path,
            "name = \"t\"\nframe_width = 36\nframe_height = 24\nfps = 10\n\
             [[clips]]\nclip_id = \"Train001\"\nsplit = \"train\"\nframe_dir = \"Train001\"\nframe_count = 3\n",
        )
        .unwrap();
        let m = load_manifest(&manifest_path).unwrap();
        let frames = load_clip_frames(&m, &m.clips[0]).unwrap();
        // lexicographic: 001 (value 10), 002 (value 0), 010 (value 20)
        let first_px: Vec<_> = frames.iter().map(|f| f.pixels[0]).collect();
        assert_eq!(first_px, [10, 0, 20]);
        assert_eq!(frames[2].frame_index, 2);
        assert_eq!(frames[0].channels, 1);

        let mut short = m.clone();
        short.clips[0].frame_count = 4;
        assert!(load_clip_frames(&short, &short.clips[0]).is_err());
    }
}
