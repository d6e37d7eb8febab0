//! Per-node statistics accumulated bottom-up over a hierarchy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;

/// The four node attributes used for filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    /// Pixel count.
    Area,
    /// Population standard deviation of the gray values.
    StdDev,
    /// Normalized moment of inertia: `sum((r - r̄)² + (c - c̄)²) / area²`.
    Inertia,
    /// Diagonal of the inclusive bounding box.
    BboxDiag,
}

impl AttributeKind {
    pub const ALL: [AttributeKind; 4] = [
        AttributeKind::Area,
        AttributeKind::StdDev,
        AttributeKind::Inertia,
        AttributeKind::BboxDiag,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttributeKind::Area => "area",
            AttributeKind::StdDev => "std_dev",
            AttributeKind::Inertia => "inertia",
            AttributeKind::BboxDiag => "bbox_diag",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "area" => Some(AttributeKind::Area),
            "std_dev" | "std" | "stddev" => Some(AttributeKind::StdDev),
            "inertia" | "moment_of_inertia" => Some(AttributeKind::Inertia),
            "bbox_diag" | "diagonal" => Some(AttributeKind::BboxDiag),
            _ => None,
        }
    }

    /// Increasing attributes never grow from parent to child.
    pub fn is_increasing(self) -> bool {
        matches!(self, AttributeKind::Area | AttributeKind::BboxDiag)
    }
}

impl std::str::FromStr for AttributeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttributeKind::parse(s).ok_or_else(|| Error::validation(format!("unknown attribute '{s}'")))
    }
}

/// Accumulators for every node, each summed over the node's full pixel set.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeAttributes {
    pub area: Vec<u64>,
    /// `(min_row, min_col, max_row, max_col)`, inclusive.
    pub bbox: Vec<(u32, u32, u32, u32)>,
    pub sum_r: Vec<u64>,
    pub sum_c: Vec<u64>,
    pub sum_rr: Vec<u64>,
    pub sum_cc: Vec<u64>,
    pub gray_sum: Vec<f64>,
    pub gray_sum_sq: Vec<f64>,
}

impl NodeAttributes {
    pub fn node_count(&self) -> usize {
        self.area.len()
    }

    pub fn std_dev(&self, node: usize) -> f64 {
        let n = self.area[node] as f64;
        let mean = self.gray_sum[node] / n;
        let var = self.gray_sum_sq[node] / n - mean * mean;
        var.max(0.0).sqrt()
    }

    pub fn inertia(&self, node: usize) -> f64 {
        // n·Σr² − (Σr)² is exact in i128
        let n = self.area[node] as i128;
        let spread = |s: u64, ss: u64| n * ss as i128 - (s as i128) * (s as i128);
        let num = spread(self.sum_r[node], self.sum_rr[node]) + spread(self.sum_c[node], self.sum_cc[node]);
        num as f64 / (n as f64).powi(3)
    }

    pub fn bbox_diagonal(&self, node: usize) -> f64 {
        let (r0, c0, r1, c1) = self.bbox[node];
        let h = (r1 - r0 + 1) as f64;
        let w = (c1 - c0 + 1) as f64;
        h.hypot(w)
    }

    pub fn value(&self, node: usize, kind: AttributeKind) -> f64 {
        match kind {
            AttributeKind::Area => self.area[node] as f64,
            AttributeKind::StdDev => self.std_dev(node),
            AttributeKind::Inertia => self.inertia(node),
            AttributeKind::BboxDiag => self.bbox_diagonal(node),
        }
    }

    pub fn values(&self, kind: AttributeKind) -> Vec<f64> {
        (0..self.node_count()).map(|n| self.value(n, kind)).collect()
    }
}

/// Scalar attribute of one node.
pub fn attribute_value(attrs: &NodeAttributes, node: usize, kind: AttributeKind) -> Result<f64> {
    if node >= attrs.node_count() {
        return Err(Error::validation(format!(
            "node {node} out of range ({} nodes)",
            attrs.node_count()
        )));
    }
    Ok(attrs.value(node, kind))
}

/// Assign each pixel to its smallest node, then fold children into parents.
pub fn compute_attributes<H: Hierarchy + ?Sized>(tree: &H, band: &[f64]) -> Result<NodeAttributes> {
    let (w, h) = (tree.width(), tree.height());
    if band.len() != w * h {
        return Err(Error::DimensionMismatch {
            expected: w * h,
            found: band.len(),
        });
    }
    let count = tree.node_count();
    let mut a = NodeAttributes {
        area: vec![0; count],
        bbox: vec![(u32::MAX, u32::MAX, 0, 0); count],
        sum_r: vec![0; count],
        sum_c: vec![0; count],
        sum_rr: vec![0; count],
        sum_cc: vec![0; count],
        gray_sum: vec![0.0; count],
        gray_sum_sq: vec![0.0; count],
    };
    for (p, &n) in tree.pixel_nodes().iter().enumerate() {
        let (r, c) = ((p / w) as u64, (p % w) as u64);
        a.area[n] += 1;
        let b = &mut a.bbox[n];
        *b = (b.0.min(r as u32), b.1.min(c as u32), b.2.max(r as u32), b.3.max(c as u32));
        a.sum_r[n] += r;
        a.sum_c[n] += c;
        a.sum_rr[n] += r * r;
        a.sum_cc[n] += c * c;
        a.gray_sum[n] += band[p];
        a.gray_sum_sq[n] += band[p] * band[p];
    }
    let parents = tree.parents();
    for n in (1..count).rev() {
        let p = parents[n];
        a.area[p] += a.area[n];
        let (cb, pb) = (a.bbox[n], a.bbox[p]);
        a.bbox[p] = (pb.0.min(cb.0), pb.1.min(cb.1), pb.2.max(cb.2), pb.3.max(cb.3));
        a.sum_r[p] += a.sum_r[n];
        a.sum_c[p] += a.sum_c[n];
        a.sum_rr[p] += a.sum_rr[n];
        a.sum_cc[p] += a.sum_cc[n];
        a.gray_sum[p] += a.gray_sum[n];
        a.gray_sum_sq[p] += a.gray_sum_sq[n];
    }
    Ok(a)
}
