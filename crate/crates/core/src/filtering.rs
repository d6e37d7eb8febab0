//! Attribute filtering of hierarchies under the min, max, direct and
//! subtractive decision rules, and reconstruction of the filtered image.

use serde::{Deserialize, Serialize};

use crate::attributes::{compute_attributes, AttributeKind, NodeAttributes};
use crate::error::{Error, Result};
use crate::hierarchy::{
    build_max_tree, build_min_tree, build_tree_of_shapes, ComponentTree, Connectivity, Hierarchy,
    PartitionTree, ShapesConfig,
};
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    /// Remove a node if it or any ancestor fails.
    Min,
    /// Remove a node only if it and all its descendants fail.
    Max,
    /// Remove exactly the failing nodes.
    Direct,
    /// As direct, and shift surviving descendants by the contrast removed
    /// above them.
    Subtractive,
}

impl DecisionRule {
    pub const ALL: [DecisionRule; 4] = [
        DecisionRule::Min,
        DecisionRule::Max,
        DecisionRule::Direct,
        DecisionRule::Subtractive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DecisionRule::Min => "min",
            DecisionRule::Max => "max",
            DecisionRule::Direct => "direct",
            DecisionRule::Subtractive => "subtractive",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        DecisionRule::ALL
            .into_iter()
            .find(|r| r.name() == name)
            .ok_or_else(|| Error::validation(format!("unknown decision rule '{name}'")))
    }

    /// Min for increasing attributes, subtractive otherwise.
    pub fn default_for(kind: AttributeKind) -> Self {
        if kind.is_increasing() {
            DecisionRule::Min
        } else {
            DecisionRule::Subtractive
        }
    }
}

/// A node passes iff its attribute is `>= threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Criterion {
    pub kind: AttributeKind,
    pub threshold: f64,
}

impl Criterion {
    pub fn new(kind: AttributeKind, threshold: f64) -> Result<Self> {
        if !threshold.is_finite() {
            return Err(Error::validation(format!("threshold must be finite, got {threshold}")));
        }
        Ok(Criterion { kind, threshold })
    }

    pub fn passes(&self, attrs: &NodeAttributes, node: usize) -> bool {
        attrs.value(node, self.kind) >= self.threshold
    }
}

/// Hierarchies that can be filtered and reconstructed.
pub trait Filterable: Hierarchy {
    /// Value a node contributes to the reconstruction.
    fn node_value(&self, node: usize) -> f64;

    fn supports_rule(&self, rule: DecisionRule) -> bool;
}

impl Filterable for ComponentTree {
    fn node_value(&self, node: usize) -> f64 {
        self.level(node) as f64
    }

    fn supports_rule(&self, _: DecisionRule) -> bool {
        true
    }
}

impl Filterable for PartitionTree {
    fn node_value(&self, node: usize) -> f64 {
        self.region_values()[node]
    }

    fn supports_rule(&self, rule: DecisionRule) -> bool {
        rule == DecisionRule::Direct
    }
}

/// Per-node outcome of a filtering pass.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterDecision {
    pub keep: Vec<bool>,
    /// Reconstruction value of each node after the rule is applied.
    pub output: Vec<f64>,
}

pub fn filter_tree<T: Filterable + ?Sized>(
    tree: &T,
    attrs: &NodeAttributes,
    criterion: &Criterion,
    rule: DecisionRule,
) -> Result<FilterDecision> {
    let count = tree.node_count();
    if attrs.node_count() != count {
        return Err(Error::DimensionMismatch {
            expected: count,
            found: attrs.node_count(),
        });
    }
    if !tree.supports_rule(rule) {
        return Err(Error::Unsupported(format!(
            "{} rule on a {} tree",
            rule.name(),
            tree.kind_name()
        )));
    }
    let parents = tree.parents();
    let passes: Vec<bool> = (0..count).map(|n| n == 0 || criterion.passes(attrs, n)).collect();

    let keep = match rule {
        DecisionRule::Min => {
            let mut keep = passes;
            for n in 1..count {
                keep[n] = keep[n] && keep[parents[n]];
            }
            keep
        }
        DecisionRule::Max => {
            let mut keep = passes;
            for n in (1..count).rev() {
                if keep[n] {
                    keep[parents[n]] = true;
                }
            }
            keep
        }
        DecisionRule::Direct | DecisionRule::Subtractive => passes,
    };

    let mut output = vec![0.0; count];
    output[0] = tree.node_value(0);
    for n in 1..count {
        let p = parents[n];
        output[n] = match (keep[n], rule) {
            (false, _) => output[p],
            (true, DecisionRule::Subtractive) => output[p] + tree.node_value(n) - tree.node_value(p),
            (true, _) => tree.node_value(n),
        };
    }
    Ok(FilterDecision { keep, output })
}

/// Paint every pixel with the output value of its smallest node.
pub fn reconstruct<H: Hierarchy + ?Sized>(tree: &H, decision: &FilterDecision) -> Result<Raster> {
    if decision.output.len() != tree.node_count() {
        return Err(Error::DimensionMismatch {
            expected: tree.node_count(),
            found: decision.output.len(),
        });
    }
    let values = reconstruct_values(tree, decision);
    Raster::from_band(tree.width(), tree.height(), values)
}

pub(crate) fn reconstruct_values<H: Hierarchy + ?Sized>(tree: &H, decision: &FilterDecision) -> Vec<f64> {
    tree.pixel_nodes().iter().map(|&n| decision.output[n]).collect()
}

/// Build attributes and run one filter on an existing tree.
pub fn filter_with<T: Filterable + ?Sized>(
    tree: &T,
    band: &[f64],
    criterion: &Criterion,
    rule: DecisionRule,
) -> Result<Raster> {
    let attrs = compute_attributes(tree, band)?;
    let decision = filter_tree(tree, &attrs, criterion, rule)?;
    reconstruct(tree, &decision)
}

/// Max-tree filtering: anti-extensive.
pub fn attribute_thinning(
    band: &Raster,
    kind: AttributeKind,
    threshold: f64,
    rule: DecisionRule,
    connectivity: Connectivity,
) -> Result<Raster> {
    let tree = build_max_tree(band, connectivity)?;
    filter_with(&tree, band.band(0), &Criterion::new(kind, threshold)?, rule)
}

/// Min-tree filtering: extensive.
pub fn attribute_thickening(
    band: &Raster,
    kind: AttributeKind,
    threshold: f64,
    rule: DecisionRule,
    connectivity: Connectivity,
) -> Result<Raster> {
    let tree = build_min_tree(band, connectivity)?;
    filter_with(&tree, band.band(0), &Criterion::new(kind, threshold)?, rule)
}

/// Tree-of-shapes filtering, treating bright and dark structures alike.
pub fn self_dual_filter(
    band: &Raster,
    kind: AttributeKind,
    threshold: f64,
    rule: DecisionRule,
    config: &ShapesConfig,
) -> Result<Raster> {
    let tree = build_tree_of_shapes(band, config)?;
    filter_with(&tree, band.band(0), &Criterion::new(kind, threshold)?, rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{build_alpha_tree, build_max_tree};

    fn x1() -> Raster {
        Raster::from_rows(&[
            vec![0u8, 0, 0, 0],
            vec![0, 2, 2, 0],
            vec![0, 2, 1, 0],
            vec![0, 0, 0, 0],
        ])
        .unwrap()
    }

    fn rows(r: &Raster) -> Vec<Vec<f64>> {
        r.band(0).chunks(r.width()).map(<[f64]>::to_vec).collect()
    }

    #[test]
    fn area_opening_of_x1() {
        let r = x1();
        let tree = build_max_tree(&r, Connectivity::Four).unwrap();
        let attrs = compute_attributes(&tree, r.band(0)).unwrap();
        let c = Criterion::new(AttributeKind::Area, 4.0).unwrap();
        for rule in DecisionRule::ALL {
            let d = filter_tree(&tree, &attrs, &c, rule).unwrap();
            assert_eq!(d.keep, vec![true, true, false], "{rule:?}");
            assert_eq!(
                rows(&reconstruct(&tree, &d).unwrap()),
                vec![
                    vec![0.0, 0.0, 0.0, 0.0],
                    vec![0.0, 1.0, 1.0, 0.0],
                    vec![0.0, 1.0, 1.0, 0.0],
                    vec![0.0, 0.0, 0.0, 0.0]
                ]
            );
        }
    }

    #[test]
    fn area_closing_of_x1() {
        let out = attribute_thickening(&x1(), AttributeKind::Area, 13.0, DecisionRule::Min, Connectivity::Four)
            .unwrap();
        assert_eq!(
            rows(&out),
            vec![
                vec![1.0, 1.0, 1.0, 1.0],
                vec![1.0, 2.0, 2.0, 1.0],
                vec![1.0, 2.0, 1.0, 1.0],
                vec![1.0, 1.0, 1.0, 1.0]
            ]
        );
    }

    #[test]
    fn unit_area_is_identity() {
        let r = x1();
        for rule in DecisionRule::ALL {
            assert_eq!(
                attribute_thinning(&r, AttributeKind::Area, 1.0, rule, Connectivity::Four).unwrap(),
                r
            );
            assert_eq!(
                attribute_thickening(&r, AttributeKind::Area, 1.0, rule, Connectivity::Four).unwrap(),
                r
            );
        }
    }

    #[test]
    fn non_increasing_rules_differ() {
        // chain root -> A (2x2 square, I = 0.125) -> B (L-shape, I = 4/27)
        let r = x1();
        let tree = build_max_tree(&r, Connectivity::Four).unwrap();
        let attrs = compute_attributes(&tree, r.band(0)).unwrap();
        let c = Criterion::new(AttributeKind::Inertia, 0.13).unwrap();
        let keep = |rule| filter_tree(&tree, &attrs, &c, rule).unwrap().keep;
        assert_eq!(keep(DecisionRule::Direct), vec![true, false, true]);
        assert_eq!(keep(DecisionRule::Min), vec![true, false, false]);
        assert_eq!(keep(DecisionRule::Max), vec![true, true, true]);
        assert_eq!(keep(DecisionRule::Subtractive), vec![true, false, true]);

        let out = |rule| {
            let d = filter_tree(&tree, &attrs, &c, rule).unwrap();
            reconstruct(&tree, &d).unwrap().band(0).to_vec()
        };
        // direct: B keeps level 2; subtractive: B drops by A's contrast of 1
        assert_eq!(out(DecisionRule::Direct)[5], 2.0);
        assert_eq!(out(DecisionRule::Direct)[10], 0.0);
        assert_eq!(out(DecisionRule::Subtractive)[5], 1.0);
        assert_eq!(out(DecisionRule::Min)[5], 0.0);
        assert_eq!(out(DecisionRule::Max), r.band(0).to_vec());
    }

    #[test]
    fn partition_tree_rejects_pruning_rules() {
        let r = x1();
        let tree = build_alpha_tree(&r).unwrap();
        let attrs = compute_attributes(&tree, r.band(0)).unwrap();
        let c = Criterion::new(AttributeKind::Area, 2.0).unwrap();
        assert!(matches!(
            filter_tree(&tree, &attrs, &c, DecisionRule::Subtractive),
            Err(Error::Unsupported(_))
        ));
        assert!(filter_tree(&tree, &attrs, &c, DecisionRule::Direct).is_ok());
    }

    #[test]
    fn non_finite_threshold_rejected() {
        assert!(Criterion::new(AttributeKind::Area, f64::NAN).is_err());
    }
}
