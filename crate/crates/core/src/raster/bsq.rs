//! Band-sequential binary rasters with a `key=value` sidecar header.
//!
//! The payload `NAME` holds band 0 row-major, then band 1, and so on, all
//! samples little-endian. The header lives next to it in `NAME.hdr`:
//!
//! ```text
//! width=4
//! height=4
//! bands=1
//! dtype=u8
//! byte_order=little
//! ```
//!
//! Optional `band.N=...` lines carry band descriptions; any other dotted key
//! (e.g. `layer.N=...`) is kept verbatim for higher layers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::Raster;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleType {
    U8,
    U16,
    F32,
    F64,
}

impl SampleType {
    pub fn name(self) -> &'static str {
        match self {
            SampleType::U8 => "u8",
            SampleType::U16 => "u16",
            SampleType::F32 => "f32",
            SampleType::F64 => "f64",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "u8" => Some(SampleType::U8),
            "u16" => Some(SampleType::U16),
            "f32" => Some(SampleType::F32),
            "f64" => Some(SampleType::F64),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            SampleType::U8 => 1,
            SampleType::U16 => 2,
            SampleType::F32 => 4,
            SampleType::F64 => 8,
        }
    }

    fn holds(self, v: f64) -> bool {
        match self {
            SampleType::U8 => v.fract() == 0.0 && (0.0..=255.0).contains(&v),
            SampleType::U16 => v.fract() == 0.0 && (0.0..=65535.0).contains(&v),
            SampleType::F32 => v.is_nan() || (v as f32) as f64 == v,
            SampleType::F64 => true,
        }
    }

    /// Smallest type that stores every sample of `raster` without loss.
    pub fn narrowest(raster: &Raster) -> Self {
        let all = |t: SampleType| raster.bands().iter().flatten().all(|&v| t.holds(v));
        [SampleType::U8, SampleType::U16, SampleType::F32]
            .into_iter()
            .find(|&t| all(t))
            .unwrap_or(SampleType::F64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BsqHeader {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub dtype: SampleType,
    /// Keys other than the fixed schema, in file order.
    pub extra: Vec<(String, String)>,
}

pub fn header_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".hdr");
    PathBuf::from(name)
}

pub(crate) fn parse_header(text: &str) -> Result<(BsqHeader, Vec<Option<String>>)> {
    let mut width = None;
    let mut height = None;
    let mut bands = None;
    let mut dtype = None;
    let mut band_meta = Vec::new();
    let mut extra = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let at = offset;
        offset += line.len();
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::format(at, format!("expected key=value, found '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let uint = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::format(at, format!("{key} must be an unsigned integer")))
        };
        match key {
            "width" => width = Some(uint(value)?),
            "height" => height = Some(uint(value)?),
            "bands" => bands = Some(uint(value)?),
            "dtype" => {
                dtype = Some(SampleType::parse(value).ok_or_else(|| {
                    Error::format(at, format!("unsupported dtype '{value}'"))
                })?)
            }
            "byte_order" => {
                if value != "little" {
                    return Err(Error::format(at, format!("unsupported byte_order '{value}'")));
                }
            }
            _ => {
                if let Some(idx) = key.strip_prefix("band.") {
                    let idx = uint(idx)?;
                    if band_meta.len() <= idx {
                        band_meta.resize(idx + 1, None);
                    }
                    band_meta[idx] = Some(value.to_string());
                } else if key.contains('.') {
                    extra.push((key.to_string(), value.to_string()));
                } else {
                    return Err(Error::format(at, format!("unknown header key '{key}'")));
                }
            }
        }
    }
    let missing = |k: &str| Error::format(offset, format!("header missing '{k}'"));
    let header = BsqHeader {
        width: width.ok_or_else(|| missing("width"))?,
        height: height.ok_or_else(|| missing("height"))?,
        bands: bands.ok_or_else(|| missing("bands"))?,
        dtype: dtype.ok_or_else(|| missing("dtype"))?,
        extra,
    };
    if header.width == 0 || header.height == 0 || header.bands == 0 {
        return Err(Error::format(0, "width, height and bands must be >= 1"));
    }
    if band_meta.len() > header.bands {
        return Err(Error::format(0, "band description index exceeds band count"));
    }
    band_meta.resize(header.bands, None);
    Ok((header, band_meta))
}

/// Decode a payload given its parsed header.
pub(crate) fn decode(
    header: &BsqHeader,
    band_meta: Vec<Option<String>>,
    payload: &[u8],
) -> Result<Raster> {
    let plane = header.width * header.height;
    let size = header.dtype.size();
    let expected = plane * header.bands * size;
    if payload.len() < expected {
        return Err(Error::format(
            payload.len(),
            format!(
                "truncated payload: expected {expected} bytes, found {}",
                payload.len()
            ),
        ));
    }
    if payload.len() > expected {
        return Err(Error::format(expected, "payload longer than header declares"));
    }
    let samples = payload.chunks_exact(size).map(|c| match header.dtype {
        SampleType::U8 => f64::from(c[0]),
        SampleType::U16 => f64::from(u16::from_le_bytes([c[0], c[1]])),
        SampleType::F32 => f64::from(f32::from_le_bytes(c.try_into().unwrap())),
        SampleType::F64 => f64::from_le_bytes(c.try_into().unwrap()),
    });
    let all: Vec<f64> = samples.collect();
    let bands = all.chunks_exact(plane).map(<[f64]>::to_vec).collect();
    Raster::new(header.width, header.height, bands)?.with_band_meta(band_meta)
}

pub fn read_bsq(path: impl AsRef<Path>) -> Result<(Raster, BsqHeader)> {
    let path = path.as_ref();
    let hdr_path = header_path(path);
    let text = std::fs::read_to_string(&hdr_path).map_err(|e| Error::io(&hdr_path, e))?;
    let (header, band_meta) = parse_header(&text)?;
    let payload = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let raster = decode(&header, band_meta, &payload)?;
    Ok((raster, header))
}

pub(crate) fn encode(raster: &Raster, dtype: SampleType, extra: &[(String, String)]) -> Result<(String, Vec<u8>)> {
    let mut header = String::new();
    let _ = writeln!(header, "width={}", raster.width());
    let _ = writeln!(header, "height={}", raster.height());
    let _ = writeln!(header, "bands={}", raster.band_count());
    let _ = writeln!(header, "dtype={}", dtype.name());
    let _ = writeln!(header, "byte_order=little");
    for (i, meta) in raster.band_meta().iter().enumerate() {
        if let Some(meta) = meta {
            if meta.contains('\n') {
                return Err(Error::validation("band description contains a newline"));
            }
            let _ = writeln!(header, "band.{i}={meta}");
        }
    }
    for (k, v) in extra {
        let _ = writeln!(header, "{k}={v}");
    }
    let mut payload = Vec::with_capacity(raster.pixel_count() * raster.band_count() * dtype.size());
    for (b, band) in raster.bands().iter().enumerate() {
        for (i, &v) in band.iter().enumerate() {
            if !dtype.holds(v) {
                return Err(Error::Range {
                    format: dtype.name(),
                    band: b,
                    row: i / raster.width(),
                    col: i % raster.width(),
                    value: v,
                });
            }
            match dtype {
                SampleType::U8 => payload.push(v as u8),
                SampleType::U16 => payload.extend((v as u16).to_le_bytes()),
                SampleType::F32 => payload.extend((v as f32).to_le_bytes()),
                SampleType::F64 => payload.extend(v.to_le_bytes()),
            }
        }
    }
    Ok((header, payload))
}

/// Write `raster` to `path` plus its `path.hdr` sidecar.
pub fn write_bsq(
    path: impl AsRef<Path>,
    raster: &Raster,
    dtype: SampleType,
    extra: &[(String, String)],
) -> Result<()> {
    let path = path.as_ref();
    let (header, payload) = encode(raster, dtype, extra)?;
    let hdr_path = header_path(path);
    std::fs::write(path, payload).map_err(|e| Error::io(path, e))?;
    std::fs::write(&hdr_path, header).map_err(|e| Error::io(&hdr_path, e))
}
