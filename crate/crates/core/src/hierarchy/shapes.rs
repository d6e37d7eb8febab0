//! Tree of shapes by saturation of level-set components.
//!
//! For every threshold between consecutive gray values the image splits into
//! upper components (`X >= v_i`, upper connectivity) and lower components
//! (`X <= v_{i-1}`, dual connectivity). Their adjacency graph is a tree;
//! rooted at the component holding the exterior pixel, the saturation of a
//! component (the component with its holes filled) is its subtree. A shape
//! is identified by `(smallest pixel index, area)`, which is unique in a
//! family of nested-or-disjoint sets.

use std::collections::HashMap;

use super::component::{ComponentTree, TreeKind};
use super::{neighbors, Connectivity, LevelImage};
use crate::error::{Error, Result};
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ShapesConfig {
    /// Connectivity of upper level-set components; lower components use
    /// the dual.
    pub upper: Connectivity,
    /// Pixel `(row, col)` standing for the outer region.
    pub exterior: (usize, usize),
}

impl Default for ShapesConfig {
    fn default() -> Self {
        ShapesConfig {
            upper: Connectivity::Four,
            exterior: (0, 0),
        }
    }
}

impl ShapesConfig {
    /// Same exterior with the connectivity pair swapped.
    pub fn dual(self) -> Self {
        ShapesConfig {
            upper: self.upper.dual(),
            ..self
        }
    }
}

const NONE: u32 = u32::MAX;

/// Saturation tree of one threshold.
struct ThresholdTree {
    comp: Vec<u32>,
    parent: Vec<u32>,
    area: Vec<u32>,
    min_pixel: Vec<u32>,
    root: u32,
}

fn threshold_tree(
    image: &LevelImage,
    split: u32,
    upper: Connectivity,
    exterior: usize,
) -> ThresholdTree {
    let (w, h) = (image.width, image.height);
    let values = &image.values;
    let n = values.len();
    let lower = upper.dual();

    let mut comp = vec![NONE; n];
    let mut size: Vec<u32> = Vec::new();
    let mut min_pixel: Vec<u32> = Vec::new();
    let mut stack = Vec::new();
    for seed in 0..n {
        if comp[seed] != NONE {
            continue;
        }
        let id = size.len() as u32;
        let is_upper = values[seed] >= split;
        let conn = if is_upper { upper } else { lower };
        comp[seed] = id;
        stack.push(seed);
        let mut count = 0u32;
        while let Some(p) = stack.pop() {
            count += 1;
            for q in neighbors(p, w, h, conn) {
                if comp[q] == NONE && (values[q] >= split) == is_upper {
                    comp[q] = id;
                    stack.push(q);
                }
            }
        }
        size.push(count);
        // seeds are visited in index order, so the seed is the minimum
        min_pixel.push(seed as u32);
    }
    let comps = size.len();

    let mut edges: Vec<(u32, u32)> = Vec::new();
    for p in 0..n {
        let (r, c) = (p / w, p % w);
        let right = (c + 1 < w).then(|| p + 1);
        let down = (r + 1 < h).then(|| p + w);
        for q in right.into_iter().chain(down) {
            let (a, b) = (comp[p], comp[q]);
            if a != b {
                edges.push((a.min(b), a.max(b)));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    debug_assert_eq!(edges.len() + 1, comps, "component adjacency graph is not a tree");

    let mut degree = vec![0u32; comps + 1];
    for &(a, b) in &edges {
        degree[a as usize + 1] += 1;
        degree[b as usize + 1] += 1;
    }
    for i in 1..degree.len() {
        degree[i] += degree[i - 1];
    }
    let mut adjacency = vec![0u32; edges.len() * 2];
    let mut fill = degree.clone();
    for &(a, b) in &edges {
        adjacency[fill[a as usize] as usize] = b;
        fill[a as usize] += 1;
        adjacency[fill[b as usize] as usize] = a;
        fill[b as usize] += 1;
    }

    let root = comp[exterior];
    let mut parent = vec![NONE; comps];
    parent[root as usize] = root;
    let mut order = Vec::with_capacity(comps);
    order.push(root);
    let mut head = 0;
    while head < order.len() {
        let c = order[head] as usize;
        head += 1;
        for &d in &adjacency[degree[c] as usize..degree[c + 1] as usize] {
            if parent[d as usize] == NONE {
                parent[d as usize] = c as u32;
                order.push(d);
            }
        }
    }

    let mut area = size;
    for &c in order.iter().skip(1).rev() {
        let (c, p) = (c as usize, parent[c as usize] as usize);
        area[p] += area[c];
        min_pixel[p] = min_pixel[p].min(min_pixel[c]);
    }

    ThresholdTree {
        comp,
        parent,
        area,
        min_pixel,
        root,
    }
}

pub(crate) fn tree_of_shapes_of(image: &LevelImage, config: &ShapesConfig) -> ComponentTree {
    let n = image.len();
    let (w, h) = (image.width, image.height);
    let exterior = config.exterior.0 * w + config.exterior.1;
    let values = &image.values;

    let mut levels: Vec<u32> = values.clone();
    levels.sort_unstable();
    levels.dedup();

    let whole = (0u32, n as u32);
    let mut ids: HashMap<(u32, u32), usize> = HashMap::new();
    let mut shapes: Vec<(u32, u32)> = vec![whole];
    ids.insert(whole, 0);

    // smallest upper / lower shape containing each pixel at its own level
    let mut upper_shape = vec![0usize; n];
    let mut lower_shape = vec![0usize; n];
    for i in 1..levels.len() {
        let t = threshold_tree(image, levels[i], config.upper, exterior);
        let comp_shape: Vec<usize> = (0..t.area.len())
            .map(|c| {
                let key = (t.min_pixel[c], t.area[c]);
                *ids.entry(key).or_insert_with(|| {
                    shapes.push(key);
                    shapes.len() - 1
                })
            })
            .collect();
        for p in 0..n {
            if values[p] == levels[i] {
                upper_shape[p] = comp_shape[t.comp[p] as usize];
            } else if values[p] == levels[i - 1] {
                lower_shape[p] = comp_shape[t.comp[p] as usize];
            }
        }
    }
    let pixel_shape: Vec<usize> = (0..n)
        .map(|p| {
            let (u, l) = (upper_shape[p], lower_shape[p]);
            if shapes[u].1 <= shapes[l].1 {
                u
            } else {
                l
            }
        })
        .collect();

    // Parent = smallest strictly larger shape through the shape's minimum
    // pixel. Shapes through a pixel at threshold i are the ancestors of the
    // pixel's component in that threshold's tree.
    let mut parent_shape = vec![0usize; shapes.len()];
    for &level in &levels[1..] {
        let t = threshold_tree(image, level, config.upper, exterior);
        for s in 1..shapes.len() {
            let (pixel, area) = shapes[s];
            let mut c = t.comp[pixel as usize];
            loop {
                if t.area[c as usize] > area {
                    let candidate = ids[&(t.min_pixel[c as usize], t.area[c as usize])];
                    let current = parent_shape[s];
                    if current == 0 || shapes[candidate].1 < shapes[current].1 {
                        parent_shape[s] = candidate;
                    }
                    break;
                }
                if c == t.root {
                    break;
                }
                c = t.parent[c as usize];
            }
        }
    }

    // Largest first, so parents precede children.
    let mut order: Vec<usize> = (0..shapes.len()).collect();
    order.sort_by_key(|&s| (std::cmp::Reverse(shapes[s].1), shapes[s].0));
    let mut node_of = vec![0usize; shapes.len()];
    for (node, &s) in order.iter().enumerate() {
        node_of[s] = node;
    }
    let parent: Vec<usize> = order.iter().map(|&s| node_of[parent_shape[s]]).collect();
    let pixel_node: Vec<usize> = pixel_shape.iter().map(|&s| node_of[s]).collect();

    const UNSET: i64 = i64::MIN;
    let mut level = vec![UNSET; shapes.len()];
    for (p, &node) in pixel_node.iter().enumerate() {
        debug_assert!(level[node] == UNSET || level[node] == values[p] as i64);
        level[node] = values[p] as i64;
    }
    debug_assert!(level.iter().all(|&l| l != UNSET), "shape without proper pixels");

    ComponentTree {
        width: w,
        height: h,
        parent,
        level,
        pixel_node,
        kind: TreeKind::Shapes,
        connectivity: config.upper,
    }
}

/// Inclusion tree of the hole-filled components of upper and lower level
/// sets.
pub fn build_tree_of_shapes(band: &Raster, config: &ShapesConfig) -> Result<ComponentTree> {
    let image = LevelImage::from_raster(band)?;
    let (row, col) = config.exterior;
    if row >= image.height || col >= image.width {
        return Err(Error::validation(format!(
            "exterior pixel ({row}, {col}) outside {}x{} image",
            image.width, image.height
        )));
    }
    Ok(tree_of_shapes_of(&image, config))
}
