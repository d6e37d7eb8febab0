//! Attribute profiles: stacks of an image and its filtered versions over
//! increasing thresholds, plus the local-statistics and local-histogram
//! post-processing applied layer by layer.
//!
//! Layers are ordered band-major, then attribute-major, then within one
//! attribute block:
//!
//! | variant  | block layout                 | depth |
//! |----------|------------------------------|-------|
//! | `minmax` | φ_K … φ_1, X, γ_1 … γ_K      | 2K+1  |
//! | `max`    | X, γ_1 … γ_K                 | K+1   |
//! | `min`    | φ_K … φ_1, X                 | K+1   |
//! | `shapes`, `alpha`, `omega` | X, ψ_1 … ψ_K | K+1 |
//!
//! where φ is thickening (min-tree), γ thinning (max-tree) and ψ the
//! variant's own filter. X is the band as fed to the trees: integer bands in
//! `0..=65535` are used as is, anything else is quantized first.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attributes::{compute_attributes, AttributeKind, NodeAttributes};
use crate::error::{Error, Result};
use crate::filtering::{filter_tree, reconstruct_values, Criterion, DecisionRule, Filterable};
use crate::hierarchy::{
    build_alpha_tree, build_max_tree, build_min_tree, build_omega_tree, build_tree_of_shapes,
    is_tree_ready, quantize, Connectivity, ShapesConfig,
};
use crate::raster::{FeatureStack, LayerMeta, Operator, PostFeature, Raster};

pub const DEFAULT_LEVELS: u32 = 256;
pub const DEFAULT_WINDOW: usize = 7;
pub const DEFAULT_BINS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeVariant {
    /// Thickening and thinning halves around the original.
    #[serde(rename = "minmax")]
    MinMax,
    /// Thinning half only.
    Max,
    /// Thickening half only.
    Min,
    Shapes,
    Alpha,
    Omega,
}

impl TreeVariant {
    pub const ALL: [TreeVariant; 6] = [
        TreeVariant::MinMax,
        TreeVariant::Max,
        TreeVariant::Min,
        TreeVariant::Shapes,
        TreeVariant::Alpha,
        TreeVariant::Omega,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TreeVariant::MinMax => "minmax",
            TreeVariant::Max => "max",
            TreeVariant::Min => "min",
            TreeVariant::Shapes => "shapes",
            TreeVariant::Alpha => "alpha",
            TreeVariant::Omega => "omega",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        TreeVariant::ALL
            .into_iter()
            .find(|v| v.name() == name)
            .ok_or_else(|| Error::validation(format!("unknown tree variant '{name}'")))
    }

    /// Layers contributed by one attribute with `k` thresholds.
    pub fn block_depth(self, k: usize) -> usize {
        match self {
            TreeVariant::MinMax => 2 * k + 1,
            _ => k + 1,
        }
    }

    fn is_partition(self) -> bool {
        matches!(self, TreeVariant::Alpha | TreeVariant::Omega)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeThresholds {
    pub kind: AttributeKind,
    /// Strictly increasing.
    pub thresholds: Vec<f64>,
}

impl AttributeThresholds {
    pub fn new(kind: AttributeKind, thresholds: Vec<f64>) -> Self {
        AttributeThresholds { kind, thresholds }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSpec {
    pub attributes: Vec<AttributeThresholds>,
    pub variant: TreeVariant,
    /// `None` picks per attribute: min for increasing attributes and
    /// subtractive otherwise on component trees, direct on partition trees.
    pub rule: Option<DecisionRule>,
    /// Quantization levels for bands that are not tree-ready.
    pub levels: u32,
    /// Connectivity of max/min trees and of upper shapes.
    pub connectivity: Connectivity,
}

impl ProfileSpec {
    pub fn new(attributes: Vec<AttributeThresholds>, variant: TreeVariant) -> Self {
        ProfileSpec {
            attributes,
            variant,
            rule: None,
            levels: DEFAULT_LEVELS,
            connectivity: Connectivity::Four,
        }
    }

    pub fn with_variant(&self, variant: TreeVariant) -> Self {
        ProfileSpec {
            variant,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.attributes.is_empty() {
            return Err(Error::validation("profile needs at least one attribute"));
        }
        for a in &self.attributes {
            if a.thresholds.is_empty() {
                return Err(Error::validation(format!(
                    "empty threshold list for attribute {}",
                    a.kind.name()
                )));
            }
            if let Some(t) = a.thresholds.iter().find(|t| !t.is_finite()) {
                return Err(Error::validation(format!(
                    "non-finite threshold {t} for attribute {}",
                    a.kind.name()
                )));
            }
            if a.thresholds.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::validation(format!(
                    "thresholds for attribute {} must be strictly increasing",
                    a.kind.name()
                )));
            }
        }
        if !(2..=65536).contains(&self.levels) {
            return Err(Error::validation(format!(
                "quantization levels must be in 2..=65536, got {}",
                self.levels
            )));
        }
        Ok(())
    }

    /// Layers produced per input band.
    pub fn depth_per_band(&self) -> usize {
        self.attributes
            .iter()
            .map(|a| self.variant.block_depth(a.thresholds.len()))
            .sum()
    }

    pub fn depth(&self, bands: usize) -> usize {
        bands * self.depth_per_band()
    }

    pub fn rule_for(&self, kind: AttributeKind) -> DecisionRule {
        match self.rule {
            Some(rule) => rule,
            None if self.variant.is_partition() => DecisionRule::Direct,
            None => DecisionRule::default_for(kind),
        }
    }
}

/// The band as trees see it: unchanged when tree-ready, else quantized.
pub fn tree_input(band: &[f64], levels: u32) -> Result<Vec<f64>> {
    if is_tree_ready(band) {
        Ok(band.to_vec())
    } else {
        quantize(band, levels)
    }
}

/// One tree with its attributes, shared read-only by every threshold.
struct Prepared<T> {
    tree: T,
    attrs: NodeAttributes,
}

impl<T: Filterable> Prepared<T> {
    fn new(tree: T, band: &[f64]) -> Result<Self> {
        let attrs = compute_attributes(&tree, band)?;
        Ok(Prepared { tree, attrs })
    }

    fn filter_all(&self, kind: AttributeKind, thresholds: &[f64], rule: DecisionRule) -> Result<Vec<Vec<f64>>> {
        thresholds
            .par_iter()
            .map(|&t| {
                let decision = filter_tree(&self.tree, &self.attrs, &Criterion::new(kind, t)?, rule)?;
                Ok(reconstruct_values(&self.tree, &decision))
            })
            .collect()
    }
}

type Layers = Vec<(Vec<f64>, LayerMeta)>;

fn meta(band: usize, kind: AttributeKind, threshold: Option<f64>, operator: Operator) -> LayerMeta {
    LayerMeta {
        source_band: band,
        attribute: Some(kind),
        threshold,
        operator,
        post: None,
    }
}

fn band_profile(raster: &Raster, index: usize, spec: &ProfileSpec) -> Result<Layers> {
    let x = tree_input(raster.band(index), spec.levels)?;
    if !is_tree_ready(raster.band(index)) {
        log::info!("band {index}: quantized to {} levels", spec.levels);
    }
    let single = Raster::from_band(raster.width(), raster.height(), x.clone())?;
    let conn = spec.connectivity;
    let variant = spec.variant;

    let needs_max = matches!(variant, TreeVariant::MinMax | TreeVariant::Max);
    let needs_min = matches!(variant, TreeVariant::MinMax | TreeVariant::Min);
    let (max, min) = rayon::join(
        || needs_max.then(|| Prepared::new(build_max_tree(&single, conn)?, &x)).transpose(),
        || needs_min.then(|| Prepared::new(build_min_tree(&single, conn)?, &x)).transpose(),
    );
    let (max, min) = (max?, min?);
    let shapes = match variant {
        TreeVariant::Shapes => {
            let cfg = ShapesConfig {
                upper: conn,
                ..ShapesConfig::default()
            };
            Some(Prepared::new(build_tree_of_shapes(&single, &cfg)?, &x)?)
        }
        _ => None,
    };
    let partition = match variant {
        TreeVariant::Alpha => Some(Prepared::new(build_alpha_tree(&single)?, &x)?),
        TreeVariant::Omega => Some(Prepared::new(build_omega_tree(&single)?, &x)?),
        _ => None,
    };

    let mut layers = Layers::with_capacity(spec.depth_per_band());
    for a in &spec.attributes {
        let (kind, ts) = (a.kind, &a.thresholds[..]);
        let rule = spec.rule_for(kind);
        let original = (x.clone(), meta(index, kind, None, Operator::Original));
        let tagged = |values: Vec<Vec<f64>>, op: Operator| -> Layers {
            values
                .into_iter()
                .zip(ts)
                .map(|(v, &t)| (v, meta(index, kind, Some(t), op)))
                .collect()
        };
        if let Some(min) = &min {
            let mut phi = tagged(min.filter_all(kind, ts, rule)?, Operator::Thickening);
            phi.reverse();
            layers.extend(phi);
        }
        if variant != TreeVariant::Min {
            layers.push(original.clone());
        }
        if let Some(max) = &max {
            layers.extend(tagged(max.filter_all(kind, ts, rule)?, Operator::Thinning));
        }
        if variant == TreeVariant::Min {
            layers.push(original);
        }
        if let Some(s) = &shapes {
            layers.extend(tagged(s.filter_all(kind, ts, rule)?, Operator::SelfDual));
        }
        if let Some(p) = &partition {
            let op = if variant == TreeVariant::Alpha { Operator::Alpha } else { Operator::Omega };
            layers.extend(tagged(p.filter_all(kind, ts, rule)?, op));
        }
    }
    debug_assert_eq!(layers.len(), spec.depth_per_band());
    Ok(layers)
}

/// Profile of every band, stacked band-major.
pub fn build_profile(raster: &Raster, spec: &ProfileSpec) -> Result<FeatureStack> {
    spec.validate()?;
    let per_band: Vec<Layers> = (0..raster.band_count())
        .into_par_iter()
        .map(|b| band_profile(raster, b, spec))
        .collect::<Result<_>>()?;
    let (layers, metas) = per_band.into_iter().flatten().unzip();
    FeatureStack::new(raster.width(), raster.height(), layers, metas)
}

/// Self-dual profile on the tree of shapes.
pub fn build_sdap(raster: &Raster, spec: &ProfileSpec) -> Result<FeatureStack> {
    build_profile(raster, &spec.with_variant(TreeVariant::Shapes))
}

pub fn build_alpha_ap(raster: &Raster, spec: &ProfileSpec) -> Result<FeatureStack> {
    build_profile(raster, &spec.with_variant(TreeVariant::Alpha))
}

pub fn build_omega_ap(raster: &Raster, spec: &ProfileSpec) -> Result<FeatureStack> {
    build_profile(raster, &spec.with_variant(TreeVariant::Omega))
}

/// Layer-wise post-processing of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PostProcess {
    #[default]
    None,
    /// Local mean and standard deviation.
    LocalFeatures { window: usize },
    /// Normalized local histogram.
    Histogram { window: usize, bins: usize },
}

impl PostProcess {
    pub fn apply(self, stack: FeatureStack) -> Result<FeatureStack> {
        match self {
            PostProcess::None => Ok(stack),
            PostProcess::LocalFeatures { window } => local_feature_post(&stack, window),
            PostProcess::Histogram { window, bins } => local_histogram_post(&stack, window, bins),
        }
    }

    /// Depth of the processed stack given the input depth.
    pub fn depth(self, depth: usize) -> usize {
        match self {
            PostProcess::None => depth,
            PostProcess::LocalFeatures { .. } => 2 * depth,
            PostProcess::Histogram { bins, .. } => bins * depth,
        }
    }
}

fn check_window(stack: &FeatureStack, window: usize) -> Result<()> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::validation(format!("window must be odd and at least 3, got {window}")));
    }
    if window > stack.width() || window > stack.height() {
        return Err(Error::validation(format!(
            "window {window} larger than the {}x{} image",
            stack.width(),
            stack.height()
        )));
    }
    Ok(())
}

/// Sum over the `window`-square centered on each pixel, borders replicated.
fn window_sum(values: &[f64], width: usize, height: usize, window: usize) -> Vec<f64> {
    let half = window / 2;
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut rows = vec![0.0; values.len()];
    for r in 0..height {
        let line = &values[r * width..(r + 1) * width];
        for c in 0..width {
            rows[r * width + c] = (0..window)
                .map(|k| line[clamp(c as isize + k as isize - half as isize, width)])
                .sum();
        }
    }
    let mut out = vec![0.0; values.len()];
    for r in 0..height {
        for c in 0..width {
            out[r * width + c] = (0..window)
                .map(|k| rows[clamp(r as isize + k as isize - half as isize, height) * width + c])
                .sum();
        }
    }
    out
}

fn layer_range(layer: &[f64]) -> (f64, f64) {
    layer
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn with_post(meta: &LayerMeta, post: PostFeature) -> LayerMeta {
    LayerMeta {
        post: Some(post),
        ..*meta
    }
}

/// Replace each layer by its local mean and population standard deviation.
pub fn local_feature_post(stack: &FeatureStack, window: usize) -> Result<FeatureStack> {
    check_window(stack, window)?;
    let (w, h) = (stack.width(), stack.height());
    let cells = (window * window) as f64;
    let out: Vec<[(Vec<f64>, LayerMeta); 2]> = stack
        .layers()
        .par_iter()
        .zip(stack.layer_meta())
        .map(|(layer, m)| {
            let (lo, _) = layer_range(layer);
            let shifted: Vec<f64> = layer.iter().map(|v| v - lo).collect();
            let squares: Vec<f64> = shifted.iter().map(|v| v * v).collect();
            let s1 = window_sum(&shifted, w, h, window);
            let s2 = window_sum(&squares, w, h, window);
            let mut mean = Vec::with_capacity(layer.len());
            let mut std = Vec::with_capacity(layer.len());
            for (a, b) in s1.iter().zip(&s2) {
                let mu = a / cells;
                mean.push(mu + lo);
                std.push((b / cells - mu * mu).max(0.0).sqrt());
            }
            [
                (mean, with_post(m, PostFeature::Mean { window })),
                (std, with_post(m, PostFeature::Std { window })),
            ]
        })
        .collect();
    let (layers, metas) = out.into_iter().flatten().unzip();
    FeatureStack::new(w, h, layers, metas)
}

/// Replace each layer by `bins` layers of normalized local histogram counts.
/// Bins split the layer's global range uniformly; a constant layer puts all
/// mass in bin 0.
pub fn local_histogram_post(stack: &FeatureStack, window: usize, bins: usize) -> Result<FeatureStack> {
    check_window(stack, window)?;
    if bins < 2 {
        return Err(Error::validation(format!("histogram needs at least 2 bins, got {bins}")));
    }
    let (w, h) = (stack.width(), stack.height());
    let cells = (window * window) as f64;
    let out: Vec<Vec<(Vec<f64>, LayerMeta)>> = stack
        .layers()
        .par_iter()
        .zip(stack.layer_meta())
        .map(|(layer, m)| {
            let (lo, hi) = layer_range(layer);
            let index: Vec<usize> = layer
                .iter()
                .map(|&v| {
                    if hi > lo {
                        (((v - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1)
                    } else {
                        0
                    }
                })
                .collect();
            (0..bins)
                .map(|bin| {
                    let hits: Vec<f64> = index.iter().map(|&i| f64::from(u8::from(i == bin))).collect();
                    let counts = window_sum(&hits, w, h, window);
                    (
                        counts.into_iter().map(|c| c / cells).collect(),
                        with_post(m, PostFeature::Hist { window, bin, bins }),
                    )
                })
                .collect()
        })
        .collect();
    let (layers, metas) = out.into_iter().flatten().unzip();
    FeatureStack::new(w, h, layers, metas)
}
