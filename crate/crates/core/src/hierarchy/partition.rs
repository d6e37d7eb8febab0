//! Partition hierarchies: alpha-tree (quasi-flat zones) and omega-tree
//! (range-constrained quasi-flat zones).

use super::{check_topological, Connectivity, Hierarchy, LevelImage, UnionFind};
use crate::error::Result;
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PartitionKind {
    Alpha,
    Omega,
}

/// Leaves are flat zones; internal nodes are unions of their children.
/// `region_value` is the mean gray value of the node's region.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTree {
    pub(crate) width: usize,
    pub(crate) height: usize,
    pub(crate) parent: Vec<usize>,
    pub(crate) merge_index: Vec<f64>,
    pub(crate) pixel_node: Vec<usize>,
    pub(crate) region_value: Vec<f64>,
    pub(crate) kind: PartitionKind,
}

impl PartitionTree {
    pub fn kind(&self) -> PartitionKind {
        self.kind
    }

    pub fn merge_indices(&self) -> &[f64] {
        &self.merge_index
    }

    pub fn merge_index(&self, node: usize) -> f64 {
        self.merge_index[node]
    }

    pub fn region_values(&self) -> &[f64] {
        &self.region_value
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.pixel_node.contains(&node)
    }

    /// Pixel sets of the regions valid at `index`: every pixel's largest
    /// ancestor whose merge index is `<= index`.
    pub fn cut(&self, index: f64) -> Vec<usize> {
        // parents precede children, so one forward pass settles every node
        let mut resolved = vec![0usize; self.parent.len()];
        for n in 0..self.parent.len() {
            let p = self.parent[n];
            resolved[n] = if n != 0 && self.merge_index[p] <= index {
                resolved[p]
            } else {
                n
            };
        }
        self.pixel_node.iter().map(|&n| resolved[n]).collect()
    }

    pub fn check_invariants(&self) -> bool {
        if !check_topological(&self.parent) {
            return false;
        }
        let monotone = self
            .parent
            .iter()
            .enumerate()
            .skip(1)
            .all(|(n, &p)| self.merge_index[n] <= self.merge_index[p]);
        let children = self.children();
        let no_single_child = children.iter().all(|c| c.len() != 1);
        // internal nodes own no pixels directly
        let leaves_only = self.pixel_node.iter().all(|&n| children[n].is_empty());
        monotone && no_single_child && leaves_only
    }
}

impl Hierarchy for PartitionTree {
    fn width(&self) -> usize {
        self.width
    }

    fn height(&self) -> usize {
        self.height
    }

    fn parents(&self) -> &[usize] {
        &self.parent
    }

    fn pixel_nodes(&self) -> &[usize] {
        &self.pixel_node
    }

    fn altitude(&self, node: usize) -> f64 {
        self.merge_index[node]
    }

    fn kind_name(&self) -> &'static str {
        match self.kind {
            PartitionKind::Alpha => "alpha",
            PartitionKind::Omega => "omega",
        }
    }
}

/// Union-find over 4-adjacency edges in non-decreasing `|X(p) - X(q)|`.
pub(crate) fn alpha_tree_of(image: &LevelImage) -> PartitionTree {
    let (w, h) = (image.width, image.height);
    let values = &image.values;
    let n = values.len();

    let mut edges: Vec<(u32, u32, u32)> = Vec::with_capacity(2 * n);
    for p in 0..n {
        for q in super::neighbors(p, w, h, Connectivity::Four).filter(|&q| q > p) {
            edges.push((values[p].abs_diff(values[q]), p as u32, q as u32));
        }
    }
    edges.sort_unstable();

    // leaves: flat zones, numbered by their first pixel
    let mut flat = UnionFind::new(n);
    let zero = edges.partition_point(|e| e.0 == 0);
    for &(_, p, q) in &edges[..zero] {
        flat.union(p as usize, q as usize);
    }
    const NONE: usize = usize::MAX;
    let mut leaf_of_root = vec![NONE; n];
    let mut leaf = vec![0usize; n];
    let mut leaf_count = 0;
    for (p, l) in leaf.iter_mut().enumerate() {
        let r = flat.find(p);
        if leaf_of_root[r] == NONE {
            leaf_of_root[r] = leaf_count;
            leaf_count += 1;
        }
        *l = leaf_of_root[r];
    }

    // Nodes are created bottom-up; `top` tracks the current top node of
    // each merged region (path-halving over node ids).
    let capacity = 2 * leaf_count;
    let mut top: Vec<usize> = (0..capacity).collect();
    let mut parent: Vec<usize> = (0..leaf_count).collect();
    let mut merge_index = vec![0.0; leaf_count];
    fn find(top: &mut [usize], mut x: usize) -> usize {
        while top[x] != x {
            top[x] = top[top[x]];
            x = top[x];
        }
        x
    }

    let mut group_uf: Vec<usize> = (0..capacity).collect();
    let mut touched: Vec<usize> = Vec::new();
    let mut start = zero;
    while start < edges.len() {
        let weight = edges[start].0;
        let end = start + edges[start..].partition_point(|e| e.0 == weight);
        let pairs: Vec<(usize, usize)> = edges[start..end]
            .iter()
            .map(|&(_, p, q)| (find(&mut top, leaf[p as usize]), find(&mut top, leaf[q as usize])))
            .filter(|(a, b)| a != b)
            .collect();
        start = end;
        if pairs.is_empty() {
            continue;
        }
        for &(a, b) in &pairs {
            touched.push(a);
            touched.push(b);
            let (ra, rb) = (find(&mut group_uf, a), find(&mut group_uf, b));
            if ra != rb {
                group_uf[ra.max(rb)] = ra.min(rb);
            }
        }
        touched.sort_unstable();
        touched.dedup();
        // one new node per merged group, in order of the group's smallest member
        let mut new_node_of: std::collections::BTreeMap<usize, usize> = Default::default();
        for &m in &touched {
            let g = find(&mut group_uf, m);
            let node = *new_node_of.entry(g).or_insert_with(|| {
                parent.push(parent.len());
                merge_index.push(weight as f64);
                parent.len() - 1
            });
            parent[m] = node;
            top[m] = node;
        }
        for &m in &touched {
            group_uf[m] = m;
        }
        touched.clear();
    }

    // reverse creation order: root first
    let count = parent.len();
    let flip = |i: usize| count - 1 - i;
    let mut new_parent = vec![0usize; count];
    let mut new_merge = vec![0.0; count];
    for old in 0..count {
        new_parent[flip(old)] = flip(parent[old]);
        new_merge[flip(old)] = merge_index[old];
    }
    let pixel_node: Vec<usize> = leaf.iter().map(|&l| flip(l)).collect();

    let mut sum = vec![0.0f64; count];
    let mut area = vec![0usize; count];
    for (p, &node) in pixel_node.iter().enumerate() {
        sum[node] += values[p] as f64;
        area[node] += 1;
    }
    for node in (1..count).rev() {
        let p = new_parent[node];
        sum[p] += sum[node];
        area[p] += area[node];
    }
    let region_value = sum.iter().zip(&area).map(|(s, &a)| s / a as f64).collect();

    PartitionTree {
        width: w,
        height: h,
        parent: new_parent,
        merge_index: new_merge,
        pixel_node,
        region_value,
        kind: PartitionKind::Alpha,
    }
}

/// Derive the omega-tree from the alpha-tree. An alpha node is the omega
/// component for `max(alpha, range) <= omega < max(alpha', range')` of its
/// parent; nodes with an empty interval are merged into their parent.
pub(crate) fn omega_tree_of(image: &LevelImage) -> PartitionTree {
    let alpha = alpha_tree_of(image);
    let count = alpha.parent.len();
    let mut lo = vec![u32::MAX; count];
    let mut hi = vec![0u32; count];
    for (p, &node) in alpha.pixel_node.iter().enumerate() {
        lo[node] = lo[node].min(image.values[p]);
        hi[node] = hi[node].max(image.values[p]);
    }
    for node in (1..count).rev() {
        let p = alpha.parent[node];
        lo[p] = lo[p].min(lo[node]);
        hi[p] = hi[p].max(hi[node]);
    }
    let omega: Vec<f64> = (0..count)
        .map(|n| alpha.merge_index[n].max((hi[n] - lo[n]) as f64))
        .collect();

    const NONE: usize = usize::MAX;
    let mut new_id = vec![NONE; count];
    let mut parent = Vec::new();
    let mut merge_index = Vec::new();
    let mut region_value = Vec::new();
    for n in 0..count {
        let p = alpha.parent[n];
        if n == 0 || omega[n] < omega[p] {
            new_id[n] = parent.len();
            parent.push(if n == 0 { 0 } else { new_id[p] });
            merge_index.push(omega[n]);
            region_value.push(alpha.region_value[n]);
        } else {
            new_id[n] = new_id[p];
        }
    }
    let pixel_node = alpha.pixel_node.iter().map(|&n| new_id[n]).collect();

    PartitionTree {
        width: alpha.width,
        height: alpha.height,
        parent,
        merge_index,
        pixel_node,
        region_value,
        kind: PartitionKind::Omega,
    }
}

/// Alpha-tree with absolute-difference dissimilarity on 4-adjacent pixels.
pub fn build_alpha_tree(band: &Raster) -> Result<PartitionTree> {
    Ok(alpha_tree_of(&LevelImage::from_raster(band)?))
}

pub fn build_omega_tree(band: &Raster) -> Result<PartitionTree> {
    Ok(omega_tree_of(&LevelImage::from_raster(band)?))
}
