//! Raster data model and file I/O.
//!
//! Pixels are addressed as `(row, col)`, row-major, origin top-left. Every
//! band is stored as `f64`, which holds all supported sample types exactly.

mod bsq;
mod pnm;
mod stack;

use std::collections::BTreeMap;
use std::path::Path;

pub use bsq::{header_path, read_bsq, write_bsq, BsqHeader, SampleType};
pub use pnm::{read_pnm, write_pnm, PnmEncoding};
pub use stack::{load_stack, save_stack, FeatureStack, LayerMeta, Operator, PostFeature};

use crate::error::{Error, Result};

/// On-disk raster formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterFormat {
    Pgm,
    Ppm,
    Bsq,
}

impl RasterFormat {
    /// Guess the format from a file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some("pgm") => Ok(RasterFormat::Pgm),
            Some("ppm") => Ok(RasterFormat::Ppm),
            Some("bsq") => Ok(RasterFormat::Bsq),
            _ => Err(Error::validation(format!(
                "cannot infer raster format from {}",
                path.display()
            ))),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "pgm" => Ok(RasterFormat::Pgm),
            "ppm" => Ok(RasterFormat::Ppm),
            "bsq" => Ok(RasterFormat::Bsq),
            other => Err(Error::validation(format!("unknown raster format '{other}'"))),
        }
    }
}

/// A multi-band 2-D grid of scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    bands: Vec<Vec<f64>>,
    band_meta: Vec<Option<String>>,
}

impl Raster {
    pub fn new(width: usize, height: usize, bands: Vec<Vec<f64>>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::validation("raster width and height must be >= 1"));
        }
        if bands.is_empty() {
            return Err(Error::validation("raster needs at least one band"));
        }
        for band in &bands {
            if band.len() != width * height {
                return Err(Error::DimensionMismatch {
                    expected: width * height,
                    found: band.len(),
                });
            }
        }
        let band_meta = vec![None; bands.len()];
        Ok(Raster {
            width,
            height,
            bands,
            band_meta,
        })
    }

    /// Single-band raster from row-major values.
    pub fn from_band(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        Raster::new(width, height, vec![values])
    }

    /// Single-band raster from rows; all rows must have equal length.
    pub fn from_rows<T: Copy + Into<f64>>(rows: &[Vec<T>]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::validation("ragged rows"));
        }
        let values = rows.iter().flatten().map(|&v| v.into()).collect();
        Raster::from_band(width, height, values)
    }

    pub fn with_band_meta(mut self, meta: Vec<Option<String>>) -> Result<Self> {
        if meta.len() != self.bands.len() {
            return Err(Error::DimensionMismatch {
                expected: self.bands.len(),
                found: meta.len(),
            });
        }
        self.band_meta = meta;
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn extent(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn band_count(&self) -> usize {
        self.bands.len()
    }

    pub fn band(&self, index: usize) -> &[f64] {
        &self.bands[index]
    }

    pub fn bands(&self) -> &[Vec<f64>] {
        &self.bands
    }

    pub fn band_meta(&self) -> &[Option<String>] {
        &self.band_meta
    }

    pub fn get(&self, band: usize, row: usize, col: usize) -> f64 {
        self.bands[band][row * self.width + col]
    }

    /// Extract one band as a new single-band raster.
    pub fn select_band(&self, index: usize) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            bands: vec![self.bands[index].clone()],
            band_meta: vec![self.band_meta[index].clone()],
        }
    }

    pub fn into_bands(self) -> Vec<Vec<f64>> {
        self.bands
    }
}

/// Per-pixel class ids: 0 is unlabeled, 1..=C are thematic classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
}

impl LabelMap {
    /// Build a label map of any class ids; see [`LabelMap::check_classes`]
    /// for the reference-map contract.
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                found: labels.len(),
            });
        }
        Ok(LabelMap {
            width,
            height,
            labels,
        })
    }

    /// Reference maps must label something, with ids forming `1..=C`.
    pub fn check_classes(&self) -> Result<()> {
        let counts = self.class_counts();
        let Some((&max, _)) = counts.iter().next_back() else {
            log::warn!("no labeled pixels");
            return Ok(());
        };
        let missing: Vec<String> = (1..=max)
            .filter(|c| !counts.contains_key(c))
            .map(|c| c.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::validation(format!(
                "non-contiguous class range: class {} missing",
                missing.join(", ")
            )));
        }
        Ok(())
    }

    /// Interpret a single-band integer raster as labels.
    pub fn from_raster(raster: &Raster) -> Result<Self> {
        if raster.band_count() != 1 {
            return Err(Error::validation(format!(
                "label raster must have one band, found {}",
                raster.band_count()
            )));
        }
        let mut labels = Vec::with_capacity(raster.pixel_count());
        for (i, &v) in raster.band(0).iter().enumerate() {
            if !v.is_finite() || v.fract() != 0.0 || v > u32::MAX as f64 {
                return Err(Error::validation(format!(
                    "label at pixel ({}, {}) is not an integer: {v}",
                    i / raster.width(),
                    i % raster.width()
                )));
            }
            if v < 0.0 {
                return Err(Error::validation(format!(
                    "negative label {v} at pixel ({}, {})",
                    i / raster.width(),
                    i % raster.width()
                )));
            }
            labels.push(v as u32);
        }
        LabelMap::new(raster.width(), raster.height(), labels)
    }

    pub fn to_raster(&self) -> Raster {
        let values = self.labels.iter().map(|&l| l as f64).collect();
        Raster::from_band(self.width, self.height, values).expect("label map extent is valid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn extent(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Number of thematic classes, i.e. the largest label.
    pub fn class_count(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// Pixel count per class id, unlabeled pixels excluded.
    pub fn class_counts(&self) -> BTreeMap<u32, usize> {
        let mut counts = BTreeMap::new();
        for &l in self.labels.iter().filter(|&&l| l != 0) {
            *counts.entry(l).or_insert(0) += 1;
        }
        counts
    }

    pub fn unlabeled_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 0).count()
    }

    /// Reject pairing with a raster of different extent.
    pub fn check_extent(&self, extent: (usize, usize)) -> Result<()> {
        if self.extent() != extent {
            return Err(Error::ExtentMismatch {
                expected: extent,
                found: self.extent(),
            });
        }
        Ok(())
    }
}

pub fn load_raster(path: impl AsRef<Path>, format: RasterFormat) -> Result<Raster> {
    let path = path.as_ref();
    match format {
        RasterFormat::Pgm | RasterFormat::Ppm => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            let raster = read_pnm(&bytes)?;
            let expected = if format == RasterFormat::Pgm { 1 } else { 3 };
            if raster.band_count() != expected {
                return Err(Error::format(
                    0,
                    format!(
                        "expected {} file but found {} band(s)",
                        if expected == 1 { "PGM" } else { "PPM" },
                        raster.band_count()
                    ),
                ));
            }
            Ok(raster)
        }
        RasterFormat::Bsq => read_bsq(path).map(|(raster, _)| raster),
    }
}

pub fn save_raster(raster: &Raster, path: impl AsRef<Path>, format: RasterFormat) -> Result<()> {
    let path = path.as_ref();
    match format {
        RasterFormat::Pgm | RasterFormat::Ppm => {
            let expected = if format == RasterFormat::Pgm { 1 } else { 3 };
            if raster.band_count() != expected {
                return Err(Error::validation(format!(
                    "{} output needs {expected} band(s), raster has {}",
                    if expected == 1 { "PGM" } else { "PPM" },
                    raster.band_count()
                )));
            }
            let bytes = write_pnm(raster, PnmEncoding::Raw)?;
            std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
        }
        RasterFormat::Bsq => write_bsq(path, raster, SampleType::narrowest(raster), &[]),
    }
}

/// Load a reference label map from a PGM or BSQ file (format taken from the
/// extension), validating its class range.
pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    let format = RasterFormat::from_path(path)?;
    let raster = load_raster(path, format)?;
    let map = LabelMap::from_raster(&raster)?;
    map.check_classes()?;
    for (class, count) in map.class_counts() {
        log::info!("{}: class {class}: {count} px", path.display());
    }
    Ok(map)
}

pub fn save_labels(map: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let format = RasterFormat::from_path(path)?;
    save_raster(&map.to_raster(), path, format)
}
