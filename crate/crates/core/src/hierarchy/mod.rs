//! Hierarchical image representations: max-tree, min-tree, tree of shapes,
//! alpha-tree and omega-tree.
//!
//! Every tree stores its nodes so that the root has index 0 and each parent
//! index is smaller than its children's. Bottom-up passes are therefore a
//! reverse scan over node indices.

mod component;
mod dump;
mod partition;
mod shapes;
mod union_find;

pub use component::{build_max_tree, build_min_tree, ComponentTree, TreeKind};
pub use dump::dump_tree;
pub use partition::{build_alpha_tree, build_omega_tree, PartitionKind, PartitionTree};
pub use shapes::{build_tree_of_shapes, ShapesConfig};
pub(crate) use union_find::UnionFind;

use crate::error::{Error, Result};
use crate::raster::Raster;

/// Largest gray level accepted by tree construction (16-bit).
pub const MAX_LEVEL: u32 = u16::MAX as u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

impl Connectivity {
    pub fn dual(self) -> Self {
        match self {
            Connectivity::Four => Connectivity::Eight,
            Connectivity::Eight => Connectivity::Four,
        }
    }

    pub fn parse(n: u32) -> Result<Self> {
        match n {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            _ => Err(Error::validation(format!("connectivity must be 4 or 8, got {n}"))),
        }
    }

    pub fn number(self) -> u32 {
        match self {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }

    fn offsets(self) -> &'static [(isize, isize)] {
        const FOUR: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
        const EIGHT: [(isize, isize); 8] = [
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

/// Neighbors of pixel `p` inside a `width` x `height` grid.
#[inline]
pub fn neighbors(
    p: usize,
    width: usize,
    height: usize,
    connectivity: Connectivity,
) -> impl Iterator<Item = usize> {
    let (r, c) = ((p / width) as isize, (p % width) as isize);
    connectivity.offsets().iter().filter_map(move |&(dr, dc)| {
        let (nr, nc) = (r + dr, c + dc);
        (nr >= 0 && nc >= 0 && (nr as usize) < height && (nc as usize) < width)
            .then(|| nr as usize * width + nc as usize)
    })
}

/// A validated integer image ready for tree construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<u32>,
}

impl LevelImage {
    /// Accepts a single-band raster whose samples are finite integers in
    /// `0..=65535`.
    pub fn from_raster(raster: &Raster) -> Result<Self> {
        if raster.band_count() != 1 {
            return Err(Error::validation(format!(
                "tree construction needs a single band, raster has {}",
                raster.band_count()
            )));
        }
        Self::from_band(raster.width(), raster.height(), raster.band(0), 0)
    }

    pub fn from_band(width: usize, height: usize, band: &[f64], band_index: usize) -> Result<Self> {
        let mut values = Vec::with_capacity(band.len());
        for (i, &v) in band.iter().enumerate() {
            let reason = if !v.is_finite() {
                Some("non-finite value")
            } else if v.fract() != 0.0 {
                Some("non-integer value")
            } else if v < 0.0 || v > MAX_LEVEL as f64 {
                Some("value outside 0..=65535")
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(Error::InvalidBand {
                    band: band_index,
                    reason: format!("{reason} {v} at pixel ({}, {})", i / width, i % width),
                });
            }
            values.push(v as u32);
        }
        Ok(LevelImage {
            width,
            height,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_value(&self) -> u32 {
        self.values.iter().copied().max().unwrap_or(0)
    }

    /// `c - X`, used for duality.
    pub fn complement(&self, c: u32) -> LevelImage {
        LevelImage {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| c - v).collect(),
        }
    }
}

/// True if every sample is an integer in the range accepted by trees.
pub fn is_tree_ready(band: &[f64]) -> bool {
    band.iter()
        .all(|&v| v.is_finite() && v.fract() == 0.0 && (0.0..=MAX_LEVEL as f64).contains(&v))
}

/// Min-max scale a real band onto `0..levels`, rounding to nearest.
/// A constant band maps to all zeros.
pub fn quantize(band: &[f64], levels: u32) -> Result<Vec<f64>> {
    if !(2..=MAX_LEVEL + 1).contains(&levels) {
        return Err(Error::validation(format!(
            "quantization levels must be in 2..=65536, got {levels}"
        )));
    }
    if let Some(v) = band.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidBand {
            band: 0,
            reason: format!("non-finite value {v}"),
        });
    }
    let (lo, hi) = band
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return Ok(vec![0.0; band.len()]);
    }
    let scale = (levels - 1) as f64 / (hi - lo);
    Ok(band.iter().map(|&v| ((v - lo) * scale).round()).collect())
}

/// Read-only view shared by every hierarchy kind.
pub trait Hierarchy: Sync {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    /// Parent of each node; the root (index 0) points to itself.
    fn parents(&self) -> &[usize];
    /// Smallest node containing each pixel.
    fn pixel_nodes(&self) -> &[usize];

    /// Gray level (component trees) or merge index (partition trees).
    fn altitude(&self, node: usize) -> f64;

    /// Short name used in dumps and logs.
    fn kind_name(&self) -> &'static str;

    fn node_count(&self) -> usize {
        self.parents().len()
    }

    /// Subtree-inclusive pixel count of every node.
    fn areas(&self) -> Vec<u64> {
        let parents = self.parents();
        let mut area = vec![0u64; parents.len()];
        for &n in self.pixel_nodes() {
            area[n] += 1;
        }
        for n in (1..parents.len()).rev() {
            area[parents[n]] += area[n];
        }
        area
    }

    fn children(&self) -> Vec<Vec<usize>> {
        let parents = self.parents();
        let mut children = vec![Vec::new(); parents.len()];
        for (n, &p) in parents.iter().enumerate().skip(1) {
            children[p].push(n);
        }
        children
    }

    /// Full (subtree-inclusive) pixel set of every node, each sorted.
    fn node_pixel_sets(&self) -> Vec<Vec<usize>> {
        let parents = self.parents();
        let mut sets = vec![Vec::new(); parents.len()];
        for (p, &n) in self.pixel_nodes().iter().enumerate() {
            sets[n].push(p);
        }
        for n in (1..parents.len()).rev() {
            let own = std::mem::take(&mut sets[n]);
            sets[parents[n]].extend_from_slice(&own);
            sets[n] = own;
        }
        for s in &mut sets {
            s.sort_unstable();
        }
        sets
    }
}

/// Check the ordering contract: root 0 and `parent[n] < n` elsewhere.
pub(crate) fn check_topological(parents: &[usize]) -> bool {
    !parents.is_empty()
        && parents[0] == 0
        && parents.iter().enumerate().skip(1).all(|(n, &p)| p < n)
}
