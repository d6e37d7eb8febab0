//! Brute-force oracles shared by the integration tests. Nothing here calls
//! into the crate's tree code: components are enumerated by flood fill
//! straight from the definitions.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use attrprof::attributes::AttributeKind;
use attrprof::pipeline::{AttributeConfig, PipelineConfig};
use attrprof::raster::{save_labels, save_raster, LabelMap, Raster, RasterFormat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type PixelSet = Vec<usize>;

#[derive(Clone, Debug)]
pub struct Img {
    pub w: usize,
    pub h: usize,
    pub v: Vec<u32>,
}

impl Img {
    pub fn raster(&self) -> Raster {
        Raster::from_band(self.w, self.h, self.v.iter().map(|&x| x as f64).collect()).unwrap()
    }

    pub fn complement(&self, c: u32) -> Img {
        Img {
            w: self.w,
            h: self.h,
            v: self.v.iter().map(|&x| c - x).collect(),
        }
    }

    pub fn levels(&self) -> Vec<u32> {
        let s: BTreeSet<u32> = self.v.iter().copied().collect();
        s.into_iter().collect()
    }
}

/// Every 3x3 image over gray levels {0, 1, 2}.
pub fn exhaustive_3x3() -> impl Iterator<Item = Img> {
    (0..3u32.pow(9)).map(|mut code| {
        let mut v = Vec::with_capacity(9);
        for _ in 0..9 {
            v.push(code % 3);
            code /= 3;
        }
        Img { w: 3, h: 3, v }
    })
}

/// Seeded random images with values in `0..levels`.
pub fn random_images(count: usize, w: usize, h: usize, levels: u32, seed: u64) -> Vec<Img> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| Img {
            w,
            h,
            v: (0..w * h).map(|_| rng.gen_range(0..levels)).collect(),
        })
        .collect()
}

pub fn adjacent(w: usize, h: usize, eight: bool, p: usize) -> Vec<usize> {
    let (r, c) = ((p / w) as i64, (p % w) as i64);
    let mut out = Vec::new();
    for dr in -1i64..=1 {
        for dc in -1i64..=1 {
            if (dr == 0 && dc == 0) || (!eight && dr != 0 && dc != 0) {
                continue;
            }
            let (nr, nc) = (r + dr, c + dc);
            if nr >= 0 && nc >= 0 && nr < h as i64 && nc < w as i64 {
                out.push(nr as usize * w + nc as usize);
            }
        }
    }
    out
}

/// Connected components of the pixels where `inside` holds.
pub fn components(w: usize, h: usize, eight: bool, inside: impl Fn(usize) -> bool) -> Vec<PixelSet> {
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    for s in 0..w * h {
        if seen[s] || !inside(s) {
            continue;
        }
        let mut comp = vec![];
        let mut queue = VecDeque::from([s]);
        seen[s] = true;
        while let Some(p) = queue.pop_front() {
            comp.push(p);
            for q in adjacent(w, h, eight, p) {
                if !seen[q] && inside(q) {
                    seen[q] = true;
                    queue.push_back(q);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Max-tree nodes as (pixel set, level).
pub fn max_tree_nodes(img: &Img, eight: bool) -> BTreeSet<(PixelSet, i64)> {
    let mut out = BTreeSet::new();
    for h in img.levels() {
        for comp in components(img.w, img.h, eight, |p| img.v[p] >= h) {
            let level = comp.iter().map(|&p| img.v[p]).min().unwrap() as i64;
            out.insert((comp, level));
        }
    }
    out
}

pub fn min_tree_nodes(img: &Img, eight: bool) -> BTreeSet<(PixelSet, i64)> {
    let mut out = BTreeSet::new();
    for h in img.levels() {
        for comp in components(img.w, img.h, eight, |p| img.v[p] <= h) {
            let level = comp.iter().map(|&p| img.v[p]).max().unwrap() as i64;
            out.insert((comp, level));
        }
    }
    out
}

/// Fill the holes of a set whose components use `eight`; holes are the
/// complement components (dual connectivity) not holding `exterior`.
pub fn saturate(img: &Img, set: &PixelSet, eight: bool, exterior: usize) -> PixelSet {
    let mut member = vec![false; img.w * img.h];
    for &p in set {
        member[p] = true;
    }
    if member[exterior] {
        return (0..img.w * img.h).collect();
    }
    let outside = components(img.w, img.h, !eight, |p| !member[p]);
    let ext = outside.iter().find(|c| c.binary_search(&exterior).is_ok()).unwrap();
    let mut ext_mask = vec![false; img.w * img.h];
    for &p in ext {
        ext_mask[p] = true;
    }
    (0..img.w * img.h).filter(|&p| !ext_mask[p]).collect()
}

/// All shapes (saturated upper and lower components), upper sets using
/// `upper_eight` connectivity and lower sets the dual.
pub fn shapes(img: &Img, upper_eight: bool, exterior: usize) -> BTreeSet<PixelSet> {
    let mut out = BTreeSet::new();
    for h in img.levels() {
        for comp in components(img.w, img.h, upper_eight, |p| img.v[p] >= h) {
            out.insert(saturate(img, &comp, upper_eight, exterior));
        }
        for comp in components(img.w, img.h, !upper_eight, |p| img.v[p] <= h) {
            out.insert(saturate(img, &comp, !upper_eight, exterior));
        }
    }
    out
}

pub fn edge_weights(img: &Img) -> BTreeSet<u32> {
    let mut ws = BTreeSet::from([0]);
    for p in 0..img.v.len() {
        for q in adjacent(img.w, img.h, false, p) {
            ws.insert(img.v[p].abs_diff(img.v[q]));
        }
    }
    ws
}

/// Alpha-connected components for one alpha.
pub fn alpha_components(img: &Img, alpha: u32) -> Vec<PixelSet> {
    let mut label = vec![usize::MAX; img.v.len()];
    let mut out = Vec::new();
    for s in 0..img.v.len() {
        if label[s] != usize::MAX {
            continue;
        }
        let id = out.len();
        label[s] = id;
        let mut comp = vec![];
        let mut queue = VecDeque::from([s]);
        while let Some(p) = queue.pop_front() {
            comp.push(p);
            for q in adjacent(img.w, img.h, false, p) {
                if label[q] == usize::MAX && img.v[p].abs_diff(img.v[q]) <= alpha {
                    label[q] = id;
                    queue.push_back(q);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

pub fn alpha_sets(img: &Img) -> BTreeSet<PixelSet> {
    edge_weights(img)
        .into_iter()
        .flat_map(|a| alpha_components(img, a))
        .collect()
}

fn range(img: &Img, set: &PixelSet) -> u32 {
    let lo = set.iter().map(|&p| img.v[p]).min().unwrap();
    let hi = set.iter().map(|&p| img.v[p]).max().unwrap();
    hi - lo
}

/// Omega-constrained components for one omega: for each pixel, the largest
/// alpha-component (alpha <= omega) with gray range <= omega.
pub fn omega_partition(img: &Img, omega: u32) -> BTreeSet<PixelSet> {
    let alphas: Vec<u32> = edge_weights(img).into_iter().filter(|&a| a <= omega).collect();
    let per_alpha: Vec<Vec<PixelSet>> = alphas.iter().map(|&a| alpha_components(img, a)).collect();
    let mut out = BTreeSet::new();
    for p in 0..img.v.len() {
        let mut best: Option<&PixelSet> = None;
        for comps in &per_alpha {
            let c = comps.iter().find(|c| c.binary_search(&p).is_ok()).unwrap();
            if range(img, c) <= omega && best.is_none_or(|b| c.len() > b.len()) {
                best = Some(c);
            }
        }
        out.insert(best.unwrap().clone());
    }
    out
}

pub fn omega_sets(img: &Img) -> BTreeSet<PixelSet> {
    let full = range(img, &(0..img.v.len()).collect());
    (0..=full).flat_map(|w| omega_partition(img, w)).collect()
}

/// Area thinning straight from the definition: the highest level at which
/// the pixel's upper-set component still has at least `lambda` pixels.
pub fn area_thinning(img: &Img, lambda: f64, eight: bool) -> Vec<f64> {
    let mut out: Vec<f64> = vec![img.levels()[0] as f64; img.v.len()];
    for h in img.levels() {
        for comp in components(img.w, img.h, eight, |p| img.v[p] >= h) {
            if comp.len() as f64 >= lambda {
                for p in comp {
                    out[p] = out[p].max(h as f64);
                }
            }
        }
    }
    out
}

pub struct SetStats {
    pub area: f64,
    pub std_dev: f64,
    pub inertia: f64,
    pub bbox_diag: f64,
}

/// Attribute values computed directly from an explicit pixel list.
pub fn set_stats(w: usize, values: &[f64], set: &PixelSet) -> SetStats {
    let n = set.len() as f64;
    let rows: Vec<f64> = set.iter().map(|&p| (p / w) as f64).collect();
    let cols: Vec<f64> = set.iter().map(|&p| (p % w) as f64).collect();
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let (rm, cm) = (mean(&rows), mean(&cols));
    let inertia = rows
        .iter()
        .zip(&cols)
        .map(|(r, c)| (r - rm).powi(2) + (c - cm).powi(2))
        .sum::<f64>()
        / (n * n);
    let gray: Vec<f64> = set.iter().map(|&p| values[p]).collect();
    let gm = mean(&gray);
    let std_dev = (gray.iter().map(|g| (g - gm).powi(2)).sum::<f64>() / n).sqrt();
    let span = |xs: &[f64]| {
        xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - xs.iter().cloned().fold(f64::INFINITY, f64::min) + 1.0
    };
    SetStats {
        area: n,
        std_dev,
        inertia,
        bbox_diag: span(&rows).hypot(span(&cols)),
    }
}

/// Node pixel sets of a built tree, keyed for set comparison.
pub fn tree_sets<H: attrprof::hierarchy::Hierarchy>(tree: &H) -> BTreeSet<PixelSet> {
    tree.node_pixel_sets().into_iter().collect()
}

pub fn tree_sets_with_levels(tree: &attrprof::hierarchy::ComponentTree) -> BTreeSet<(PixelSet, i64)> {
    use attrprof::hierarchy::Hierarchy;
    tree.node_pixel_sets()
        .into_iter()
        .enumerate()
        .map(|(n, s)| (s, tree.level(n)))
        .collect()
}

pub fn histogram<T: Ord + Clone>(items: impl IntoIterator<Item = T>) -> BTreeMap<T, usize> {
    let mut m = BTreeMap::new();
    for i in items {
        *m.entry(i).or_insert(0) += 1;
    }
    m
}

/// Synthetic 64x64 scene of four quadrant classes that share one mean gray
/// level: 2x2 and 8x8 checkerboard tiles at high and low contrast, plus
/// small noise. Returns the image and a random half split of all pixels
/// into train and test label maps.
pub fn quadrant_scene(seed: u64) -> (Raster, LabelMap, LabelMap) {
    use LabelMap;
    const N: usize = 64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(N * N);
    let mut classes = Vec::with_capacity(N * N);
    for r in 0..N {
        for c in 0..N {
            let class = 1 + (r >= N / 2) as u32 * 2 + (c >= N / 2) as u32;
            let (tile, contrast) = match class {
                1 => (2, 40),
                2 => (8, 40),
                3 => (2, 15),
                _ => (8, 15),
            };
            let bright = ((r / tile) + (c / tile)) % 2 == 0;
            let base: i32 = if bright { 128 + contrast } else { 128 - contrast };
            values.push((base + rng.gen_range(-3..=3)) as f64);
            classes.push(class);
        }
    }
    let mut train = vec![0; N * N];
    let mut test = vec![0; N * N];
    for (p, &class) in classes.iter().enumerate() {
        if rng.gen_bool(0.5) {
            train[p] = class;
        } else {
            test[p] = class;
        }
    }
    (
        Raster::from_band(N, N, values).unwrap(),
        LabelMap::new(N, N, train).unwrap(),
        LabelMap::new(N, N, test).unwrap(),
    )
}

/// 103-band mixture of four spectral signatures with independent
/// abundances and small noise.
pub fn mixture_cube(width: usize, height: usize, seed: u64) -> Raster {
    const BANDS: usize = 103;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signatures: Vec<Vec<f64>> = (0..4)
        .map(|s| {
            (0..BANDS)
                .map(|b| {
                    let x = b as f64 / BANDS as f64;
                    100.0 + 80.0 * ((s as f64 + 1.0) * 3.0 * x + s as f64).sin() + 20.0 * s as f64 * x
                })
                .collect()
        })
        .collect();
    let n = width * height;
    let abundances: Vec<[f64; 4]> = (0..n)
        .map(|_| std::array::from_fn(|_| rng.gen_range(0.0..1.0)))
        .collect();
    let bands = (0..BANDS)
        .map(|b| {
            abundances
                .iter()
                .map(|a| (0..4).map(|s| a[s] * signatures[s][b]).sum::<f64>() + rng.gen_range(-0.5..0.5))
                .collect()
        })
        .collect();
    Raster::new(width, height, bands).unwrap()
}

/// Write the synthetic scene and a config for it into `dir`.
pub fn scene_config(dir: &Path, seed: u64) -> PipelineConfig {
    let (image, train, test) = quadrant_scene(seed);
    save_raster(&image, dir.join("scene.pgm"), RasterFormat::Pgm).unwrap();
    save_labels(&train, dir.join("train.pgm")).unwrap();
    save_labels(&test, dir.join("test.pgm")).unwrap();
    let mut c = PipelineConfig::default();
    c.input.image = Some(dir.join("scene.pgm"));
    c.input.train_labels = Some(dir.join("train.pgm"));
    c.input.test_labels = Some(dir.join("test.pgm"));
    c.profile.attribute = vec![AttributeConfig {
        kind: AttributeKind::Area,
        thresholds: vec![6.0, 20.0, 50.0, 100.0],
    }];
    c.classifier.seed = 42;
    c.output.dir = dir.join("out");
    c
}
