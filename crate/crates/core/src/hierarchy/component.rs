use super::{check_topological, neighbors, Connectivity, Hierarchy, LevelImage};
use crate::error::Result;
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TreeKind {
    Max,
    Min,
    Shapes,
}

/// Max-tree, min-tree or tree of shapes: nodes carry a gray level.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentTree {
    pub(crate) width: usize,
    pub(crate) height: usize,
    pub(crate) parent: Vec<usize>,
    pub(crate) level: Vec<i64>,
    pub(crate) pixel_node: Vec<usize>,
    pub(crate) kind: TreeKind,
    pub(crate) connectivity: Connectivity,
}

impl ComponentTree {
    pub fn kind(&self) -> TreeKind {
        self.kind
    }

    /// Connectivity of the level-set components (the upper-set connectivity
    /// for a tree of shapes).
    pub fn connectivity(&self) -> Connectivity {
        self.connectivity
    }

    pub fn levels(&self) -> &[i64] {
        &self.level
    }

    pub fn level(&self, node: usize) -> i64 {
        self.level[node]
    }

    /// Ordering and level-monotonicity invariants.
    pub fn check_invariants(&self) -> bool {
        check_topological(&self.parent)
            && self.pixel_node.len() == self.width * self.height
            && self.parent.iter().enumerate().skip(1).all(|(n, &p)| {
                let (child, parent) = (self.level[n], self.level[p]);
                match self.kind {
                    TreeKind::Max => child > parent,
                    TreeKind::Min => child < parent,
                    TreeKind::Shapes => child != parent,
                }
            })
    }
}

impl Hierarchy for ComponentTree {
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
        self.level[node] as f64
    }

    fn kind_name(&self) -> &'static str {
        match self.kind {
            TreeKind::Max => "max",
            TreeKind::Min => "min",
            TreeKind::Shapes => "shapes",
        }
    }
}

/// Pixels sorted by decreasing value (counting sort, stable by index).
fn sort_decreasing(values: &[u32]) -> Vec<u32> {
    let max = values.iter().copied().max().unwrap_or(0) as usize;
    let mut counts = vec![0usize; max + 2];
    for &v in values {
        counts[max - v as usize + 1] += 1;
    }
    for i in 1..counts.len() {
        counts[i] += counts[i - 1];
    }
    let mut order = vec![0u32; values.len()];
    for (p, &v) in values.iter().enumerate() {
        let slot = &mut counts[max - v as usize];
        order[*slot] = p as u32;
        *slot += 1;
    }
    order
}

fn find_root(zpar: &mut [u32], mut x: usize) -> usize {
    while zpar[x] as usize != x {
        let grand = zpar[zpar[x] as usize];
        zpar[x] = grand;
        x = grand as usize;
    }
    x
}

/// Union-find max-tree over pixels processed from the brightest down.
pub(crate) fn max_tree_of(image: &LevelImage, connectivity: Connectivity) -> ComponentTree {
    let (w, h) = (image.width, image.height);
    let values = &image.values;
    let n = values.len();
    let order = sort_decreasing(values);

    const UNSEEN: u32 = u32::MAX;
    let mut par = vec![UNSEEN; n];
    let mut zpar = vec![UNSEEN; n];
    for &p in &order {
        let p = p as usize;
        par[p] = p as u32;
        zpar[p] = p as u32;
        for q in neighbors(p, w, h, connectivity) {
            if zpar[q] == UNSEEN {
                continue;
            }
            let r = find_root(&mut zpar, q);
            if r != p {
                par[r] = p as u32;
                zpar[r] = p as u32;
            }
        }
    }

    // Canonicalize from the root outwards: every pixel then points at the
    // canonical element of its level component (the last pixel processed).
    for &p in order.iter().rev() {
        let p = p as usize;
        let q = par[p] as usize;
        if values[par[q] as usize] == values[q] {
            par[p] = par[q];
        }
    }

    let root = *order.last().expect("image is non-empty") as usize;
    const NONE: usize = usize::MAX;
    let mut node_of = vec![NONE; n];
    let mut parent = Vec::new();
    let mut level = Vec::new();
    for &p in order.iter().rev() {
        let p = p as usize;
        let q = par[p] as usize;
        if p == root || values[q] != values[p] {
            let id = parent.len();
            node_of[p] = id;
            parent.push(if p == root { 0 } else { node_of[q] });
            level.push(values[p] as i64);
        }
    }
    let pixel_node = (0..n)
        .map(|p| {
            if node_of[p] != NONE {
                node_of[p]
            } else {
                node_of[par[p] as usize]
            }
        })
        .collect();

    ComponentTree {
        width: w,
        height: h,
        parent,
        level,
        pixel_node,
        kind: TreeKind::Max,
        connectivity,
    }
}

/// Min-tree as the max-tree of the complemented image, levels mapped back.
pub(crate) fn min_tree_of(image: &LevelImage, connectivity: Connectivity) -> ComponentTree {
    let top = image.max_value();
    let mut tree = max_tree_of(&image.complement(top), connectivity);
    for l in &mut tree.level {
        *l = top as i64 - *l;
    }
    tree.kind = TreeKind::Min;
    tree
}

/// Components of the upper level sets `{p : X(p) >= h}`.
pub fn build_max_tree(band: &Raster, connectivity: Connectivity) -> Result<ComponentTree> {
    Ok(max_tree_of(&LevelImage::from_raster(band)?, connectivity))
}

/// Components of the lower level sets `{p : X(p) <= h}`.
pub fn build_min_tree(band: &Raster, connectivity: Connectivity) -> Result<ComponentTree> {
    Ok(min_tree_of(&LevelImage::from_raster(band)?, connectivity))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x1() -> Raster {
        Raster::from_rows(&[
            vec![0u8, 0, 0, 0],
            vec![0, 2, 2, 0],
            vec![0, 2, 1, 0],
            vec![0, 0, 0, 0],
        ])
        .unwrap()
    }

    fn areas(tree: &ComponentTree) -> Vec<(i64, usize)> {
        tree.node_pixel_sets()
            .iter()
            .enumerate()
            .map(|(n, s)| (tree.level(n), s.len()))
            .collect()
    }

    #[test]
    fn constant_image_is_one_node() {
        let r = Raster::from_band(4, 4, vec![7.0; 16]).unwrap();
        for tree in [
            build_max_tree(&r, Connectivity::Four).unwrap(),
            build_min_tree(&r, Connectivity::Eight).unwrap(),
        ] {
            assert_eq!(tree.node_count(), 1);
            assert_eq!(tree.level(0), 7);
            assert!(tree.check_invariants());
        }
    }

    #[test]
    fn max_tree_of_x1() {
        let tree = build_max_tree(&x1(), Connectivity::Four).unwrap();
        assert!(tree.check_invariants());
        assert_eq!(areas(&tree), vec![(0, 16), (1, 4), (2, 3)]);
    }

    #[test]
    fn min_tree_of_x1() {
        let tree = build_min_tree(&x1(), Connectivity::Four).unwrap();
        assert!(tree.check_invariants());
        assert_eq!(areas(&tree), vec![(2, 16), (1, 13), (0, 12)]);
    }

    #[test]
    fn line_with_two_peaks() {
        let r = Raster::from_band(4, 1, vec![3.0, 1.0, 3.0, 1.0]).unwrap();
        let tree = build_max_tree(&r, Connectivity::Four).unwrap();
        assert_eq!(tree.node_count(), 3);
        assert_eq!(tree.level(0), 1);
        let sets = tree.node_pixel_sets();
        assert_eq!(sets[0].len(), 4);
        let mut peaks: Vec<_> = sets[1..].to_vec();
        peaks.sort();
        assert_eq!(peaks, vec![vec![0], vec![2]]);
        assert!(tree.parents()[1..].iter().all(|&p| p == 0));
    }

    #[test]
    fn eight_connectivity_joins_diagonals() {
        let r = Raster::from_rows(&[vec![5u8, 0], vec![0, 5]]).unwrap();
        assert_eq!(build_max_tree(&r, Connectivity::Four).unwrap().node_count(), 3);
        assert_eq!(build_max_tree(&r, Connectivity::Eight).unwrap().node_count(), 2);
    }

    #[test]
    fn rejects_real_band() {
        let r = Raster::from_band(2, 1, vec![0.5, 1.0]).unwrap();
        assert!(build_max_tree(&r, Connectivity::Four).is_err());
    }
}
