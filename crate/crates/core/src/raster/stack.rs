use std::fmt;
use std::path::Path;

use super::bsq::{decode, encode, header_path, parse_header, SampleType};
use super::Raster;
use crate::attributes::AttributeKind;
use crate::error::{Error, Result};

/// How a profile layer was produced from its source band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operator {
    /// The (quantized) source band itself.
    Original,
    /// Min-tree filtering.
    Thickening,
    /// Max-tree filtering.
    Thinning,
    /// Tree-of-shapes filtering.
    SelfDual,
    Alpha,
    Omega,
    /// Plain input feature (raw band, principal component).
    Raw,
}

impl Operator {
    pub fn name(self) -> &'static str {
        match self {
            Operator::Original => "original",
            Operator::Thickening => "thickening",
            Operator::Thinning => "thinning",
            Operator::SelfDual => "selfdual",
            Operator::Alpha => "alpha",
            Operator::Omega => "omega",
            Operator::Raw => "raw",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        [
            Operator::Original,
            Operator::Thickening,
            Operator::Thinning,
            Operator::SelfDual,
            Operator::Alpha,
            Operator::Omega,
            Operator::Raw,
        ]
        .into_iter()
        .find(|op| op.name() == name)
    }
}

/// Local post-processing applied to a profile layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PostFeature {
    Mean { window: usize },
    Std { window: usize },
    Hist { window: usize, bin: usize, bins: usize },
}

impl fmt::Display for PostFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PostFeature::Mean { window } => write!(f, "mean:{window}"),
            PostFeature::Std { window } => write!(f, "std:{window}"),
            PostFeature::Hist { window, bin, bins } => write!(f, "hist:{window}:{bin}:{bins}"),
        }
    }
}

impl PostFeature {
    fn parse(s: &str) -> Option<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| parts.get(i).and_then(|p| p.parse().ok());
        match *parts.first()? {
            "mean" if parts.len() == 2 => Some(PostFeature::Mean { window: num(1)? }),
            "std" if parts.len() == 2 => Some(PostFeature::Std { window: num(1)? }),
            "hist" if parts.len() == 4 => Some(PostFeature::Hist {
                window: num(1)?,
                bin: num(2)?,
                bins: num(3)?,
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerMeta {
    pub source_band: usize,
    pub attribute: Option<AttributeKind>,
    pub threshold: Option<f64>,
    pub operator: Operator,
    pub post: Option<PostFeature>,
}

impl LayerMeta {
    pub fn raw(source_band: usize) -> Self {
        LayerMeta {
            source_band,
            attribute: None,
            threshold: None,
            operator: Operator::Raw,
            post: None,
        }
    }
}

impl fmt::Display for LayerMeta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "band={};operator={}", self.source_band, self.operator.name())?;
        if let Some(a) = self.attribute {
            write!(f, ";attribute={}", a.name())?;
        }
        if let Some(t) = self.threshold {
            write!(f, ";threshold={t}")?;
        }
        if let Some(p) = self.post {
            write!(f, ";post={p}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for LayerMeta {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut meta = LayerMeta::raw(usize::MAX);
        let mut have_op = false;
        for field in s.split(';') {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| format!("malformed layer field '{field}'"))?;
            match k {
                "band" => meta.source_band = v.parse().map_err(|_| format!("bad band '{v}'"))?,
                "operator" => {
                    meta.operator = Operator::parse(v).ok_or_else(|| format!("bad operator '{v}'"))?;
                    have_op = true;
                }
                "attribute" => {
                    meta.attribute =
                        Some(AttributeKind::parse(v).ok_or_else(|| format!("bad attribute '{v}'"))?)
                }
                "threshold" => {
                    meta.threshold = Some(v.parse().map_err(|_| format!("bad threshold '{v}'"))?)
                }
                "post" => meta.post = Some(PostFeature::parse(v).ok_or_else(|| format!("bad post '{v}'"))?),
                _ => return Err(format!("unknown layer field '{k}'")),
            }
        }
        if meta.source_band == usize::MAX || !have_op {
            return Err("layer needs band and operator".into());
        }
        Ok(meta)
    }
}

/// Ordered per-pixel feature layers with provenance for each layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    width: usize,
    height: usize,
    layers: Vec<Vec<f64>>,
    layer_meta: Vec<LayerMeta>,
}

impl FeatureStack {
    pub fn new(
        width: usize,
        height: usize,
        layers: Vec<Vec<f64>>,
        layer_meta: Vec<LayerMeta>,
    ) -> Result<Self> {
        if layers.len() != layer_meta.len() {
            return Err(Error::DimensionMismatch {
                expected: layers.len(),
                found: layer_meta.len(),
            });
        }
        if let Some(bad) = layers.iter().find(|l| l.len() != width * height) {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                found: bad.len(),
            });
        }
        Ok(FeatureStack {
            width,
            height,
            layers,
            layer_meta,
        })
    }

    /// Every band of `raster` as a raw feature layer.
    pub fn from_raster(raster: &Raster) -> Self {
        FeatureStack {
            width: raster.width(),
            height: raster.height(),
            layers: raster.bands().to_vec(),
            layer_meta: (0..raster.band_count()).map(LayerMeta::raw).collect(),
        }
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

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, i: usize) -> &[f64] {
        &self.layers[i]
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.layers
    }

    pub fn layer_meta(&self) -> &[LayerMeta] {
        &self.layer_meta
    }

    /// Feature vector of one pixel (layer order).
    pub fn pixel_features(&self, index: usize) -> Vec<f64> {
        self.layers.iter().map(|l| l[index]).collect()
    }

    /// Concatenate stacks of equal extent, preserving order.
    pub fn concat(stacks: Vec<FeatureStack>) -> Result<Self> {
        let mut iter = stacks.into_iter();
        let mut first = iter
            .next()
            .ok_or_else(|| Error::validation("cannot concatenate zero stacks"))?;
        for s in iter {
            if s.extent() != first.extent() {
                return Err(Error::ExtentMismatch {
                    expected: first.extent(),
                    found: s.extent(),
                });
            }
            first.layers.extend(s.layers);
            first.layer_meta.extend(s.layer_meta);
        }
        Ok(first)
    }

    pub fn to_raster(&self) -> Result<Raster> {
        Raster::new(self.width, self.height, self.layers.clone())
    }
}

/// Persist a stack as BSQ with one `layer.N` header line per layer.
pub fn save_stack(stack: &FeatureStack, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let raster = stack.to_raster()?;
    let extra: Vec<(String, String)> = stack
        .layer_meta
        .iter()
        .enumerate()
        .map(|(i, m)| (format!("layer.{i}"), m.to_string()))
        .collect();
    let (header, payload) = encode(&raster, SampleType::narrowest(&raster), &extra)?;
    std::fs::write(path, payload).map_err(|e| Error::io(path, e))?;
    let hdr = header_path(path);
    std::fs::write(&hdr, header).map_err(|e| Error::io(&hdr, e))
}

pub fn load_stack(path: impl AsRef<Path>) -> Result<FeatureStack> {
    let path = path.as_ref();
    let hdr_path = header_path(path);
    let text = std::fs::read_to_string(&hdr_path).map_err(|e| Error::io(&hdr_path, e))?;
    let (header, band_meta) = parse_header(&text)?;
    let mut layer_meta = vec![None; header.bands];
    for (k, v) in &header.extra {
        let Some(idx) = k.strip_prefix("layer.") else {
            continue;
        };
        let idx: usize = idx
            .parse()
            .ok()
            .filter(|&i| i < header.bands)
            .ok_or_else(|| Error::format(0, format!("bad layer key '{k}'")))?;
        layer_meta[idx] = Some(v.parse::<LayerMeta>().map_err(|e| Error::format(0, e))?);
    }
    let payload = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let raster = decode(&header, band_meta, &payload)?;
    let meta = layer_meta
        .into_iter()
        .enumerate()
        .map(|(i, m)| m.unwrap_or_else(|| LayerMeta::raw(i)))
        .collect();
    FeatureStack::new(raster.width(), raster.height(), raster.into_bands(), meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_meta_text_roundtrip() {
        let m = LayerMeta {
            source_band: 3,
            attribute: Some(AttributeKind::Inertia),
            threshold: Some(0.2),
            operator: Operator::Thinning,
            post: Some(PostFeature::Hist {
                window: 7,
                bin: 2,
                bins: 6,
            }),
        };
        assert_eq!(m.to_string().parse::<LayerMeta>().unwrap(), m);
        assert_eq!(LayerMeta::raw(1).to_string().parse::<LayerMeta>().unwrap(), LayerMeta::raw(1));
    }

    #[test]
    fn depth_matches_meta() {
        assert!(FeatureStack::new(1, 1, vec![vec![0.0]], vec![]).is_err());
    }
}
