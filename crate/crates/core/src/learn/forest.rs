use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::FeatureStack;

const MAGIC: &[u8; 4] = b"APRF";
const VERSION: u32 = 1;

/// Row-major sample matrix: `len()` samples of `dim()` features each.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    dim: usize,
    values: Vec<f64>,
}

impl Samples {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 && !values.is_empty() || dim > 0 && !values.len().is_multiple_of(dim) {
            return Err(Error::validation(format!(
                "{} values do not split into rows of {dim}",
                values.len()
            )));
        }
        Ok(Samples { dim, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: r.len(),
            });
        }
        Samples::new(dim, rows.concat())
    }

    /// Feature vectors of the given pixels, in order.
    pub fn from_stack(stack: &FeatureStack, pixels: &[usize]) -> Self {
        let mut values = Vec::with_capacity(pixels.len() * stack.depth());
        for &p in pixels {
            values.extend(stack.layers().iter().map(|l| l[p]));
        }
        Samples {
            dim: stack.depth(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    fn get(&self, i: usize, f: usize) -> f64 {
        self.values[i * self.dim + f]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub tree_count: usize,
    /// Candidate features per split; `None` is `floor(sqrt(D))`.
    pub mtry: Option<usize>,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            tree_count: 100,
            mtry: None,
            max_depth: None,
            min_leaf: 1,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn resolved_mtry(&self, dim: usize) -> usize {
        self.mtry.unwrap_or(((dim as f64).sqrt().floor() as usize).max(1))
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.tree_count == 0 {
            return Err(Error::validation("forest needs at least one tree"));
        }
        if self.min_leaf == 0 {
            return Err(Error::validation("min_leaf must be at least 1"));
        }
        let m = self.resolved_mtry(dim);
        if m == 0 || m > dim {
            return Err(Error::validation(format!("mtry must be in 1..={dim}, got {m}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    /// Class histogram of the training samples reaching the leaf.
    Leaf { counts: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn leaf(&self, x: &[f64]) -> &[u32] {
        let mut n = 0;
        loop {
            match &self.nodes[n] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => n = if x[*feature as usize] <= *threshold { *left } else { *right } as usize,
                Node::Leaf { counts } => return counts,
            }
        }
    }

    /// Class index with the most leaf samples, smallest index on ties.
    fn vote(&self, x: &[f64]) -> usize {
        argmax(self.leaf(x))
    }
}

fn argmax(counts: &[u32]) -> usize {
    (0..counts.len()).fold(0, |best, k| if counts[k] > counts[best] { k } else { best })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    trees: Vec<Tree>,
    /// Labels run `1..=class_count`.
    class_count: u32,
    feature_count: usize,
    /// Out-of-bag misclassification rate; `None` when no sample was ever
    /// out of bag.
    oob_error: Option<f64>,
}

impl ForestModel {
    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    pub fn class_count(&self) -> u32 {
        self.class_count
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn oob_error(&self) -> Option<f64> {
        self.oob_error
    }

    fn classify(&self, x: &[f64], trees: impl Iterator<Item = usize>) -> Option<u32> {
        let mut votes = vec![0u32; self.class_count as usize];
        let mut any = false;
        for t in trees {
            votes[self.trees[t].vote(x)] += 1;
            any = true;
        }
        any.then(|| argmax(&votes) as u32 + 1)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        for v in [VERSION, self.class_count, self.feature_count as u32, self.trees.len() as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.oob_error.unwrap_or(f64::NAN).to_le_bytes());
        for tree in &self.trees {
            out.extend_from_slice(&(tree.nodes.len() as u32).to_le_bytes());
            for node in &tree.nodes {
                match node {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        out.push(1);
                        out.extend_from_slice(&feature.to_le_bytes());
                        out.extend_from_slice(&threshold.to_le_bytes());
                        out.extend_from_slice(&left.to_le_bytes());
                        out.extend_from_slice(&right.to_le_bytes());
                    }
                    Node::Leaf { counts } => {
                        out.push(0);
                        for c in counts {
                            out.extend_from_slice(&c.to_le_bytes());
                        }
                    }
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::format(0, "not a forest model (bad magic)"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::format(4, format!("unsupported forest model version {version}")));
        }
        let class_count = r.u32()?;
        let feature_count = r.u32()? as usize;
        let tree_count = r.u32()? as usize;
        let oob = r.f64()?;
        let mut trees = Vec::with_capacity(tree_count.min(1 << 16));
        for _ in 0..tree_count {
            let count = r.u32()? as usize;
            let start = r.pos;
            let mut nodes = Vec::with_capacity(count.min(1 << 20));
            for _ in 0..count {
                let at = r.pos;
                nodes.push(match r.take(1)?[0] {
                    1 => {
                        let feature = r.u32()?;
                        let threshold = r.f64()?;
                        let (left, right) = (r.u32()?, r.u32()?);
                        if feature as usize >= feature_count || left as usize >= count || right as usize >= count {
                            return Err(Error::format(at, "split node index out of range"));
                        }
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        }
                    }
                    0 => Node::Leaf {
                        counts: (0..class_count).map(|_| r.u32()).collect::<Result<_>>()?,
                    },
                    tag => return Err(Error::format(at, format!("bad node tag {tag}"))),
                });
            }
            if nodes.is_empty() {
                return Err(Error::format(start, "empty tree"));
            }
            trees.push(Tree { nodes });
        }
        if r.pos != bytes.len() {
            return Err(Error::format(r.pos, "trailing bytes after forest model"));
        }
        Ok(ForestModel {
            trees,
            class_count,
            feature_count,
            oob_error: (!oob.is_nan()).then_some(oob),
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format(self.bytes.len(), "truncated forest model"));
        }
        self.pos += n;
        Ok(&self.bytes[self.pos - n..self.pos])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn save_forest(model: &ForestModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_forest(path: impl AsRef<Path>) -> Result<ForestModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    ForestModel::from_bytes(&bytes)
}

struct Grower<'a> {
    x: &'a Samples,
    /// Zero-based class of each sample.
    y: &'a [usize],
    classes: usize,
    mtry: usize,
    params: &'a ForestParams,
}

impl Grower<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<u32> {
        let mut c = vec![0u32; self.classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    /// Best `(feature, threshold)` by weighted Gini over `mtry` randomly
    /// drawn non-constant features.
    fn best_split(&self, idx: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        let d = self.x.dim();
        let min_leaf = self.params.min_leaf;
        let mut order: Vec<usize> = (0..d).collect();
        let mut tried = 0;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(idx.len());
        for i in 0..d {
            if tried == self.mtry {
                break;
            }
            let j = rng.gen_range(i..d);
            order.swap(i, j);
            let f = order[i];
            pairs.clear();
            pairs.extend(idx.iter().map(|&s| (self.x.get(s, f), self.y[s])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            if pairs[0].0 == pairs[pairs.len() - 1].0 {
                continue;
            }
            tried += 1;
            let m = pairs.len();
            let mut left = vec![0u64; self.classes];
            let mut right = vec![0u64; self.classes];
            for &(_, k) in &pairs {
                right[k] += 1;
            }
            let (mut sq_left, mut sq_right) = (0u64, right.iter().map(|c| c * c).sum::<u64>());
            for s in 0..m - 1 {
                let k = pairs[s].1;
                sq_left += 2 * left[k] + 1;
                sq_right -= 2 * right[k] - 1;
                left[k] += 1;
                right[k] -= 1;
                let (nl, nr) = (s + 1, m - s - 1);
                if pairs[s].0 == pairs[s + 1].0 || nl < min_leaf || nr < min_leaf {
                    continue;
                }
                // maximizing this minimizes the weighted child Gini impurity
                let score = sq_left as f64 / nl as f64 + sq_right as f64 / nr as f64;
                if best.is_none_or(|b| score > b.0) {
                    let (a, b) = (pairs[s].0, pairs[s + 1].0);
                    let mid = a + (b - a) / 2.0;
                    let threshold = if mid < b { mid } else { a };
                    best = Some((score, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&self, idx: Vec<usize>, rng: &mut ChaCha8Rng) -> Tree {
        let mut nodes = vec![Node::Leaf { counts: vec![] }];
        let mut work = vec![(0usize, idx, 0usize)];
        while let Some((id, idx, depth)) = work.pop() {
            let counts = self.counts(&idx);
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let capped = self.params.max_depth.is_some_and(|m| depth >= m);
            let split = if pure || capped || idx.len() < 2 * self.params.min_leaf {
                None
            } else {
                self.best_split(&idx, rng)
            };
            let Some((feature, threshold)) = split else {
                nodes[id] = Node::Leaf { counts };
                continue;
            };
            let (l, r): (Vec<usize>, Vec<usize>) =
                idx.into_iter().partition(|&s| self.x.get(s, feature) <= threshold);
            let (left, right) = (nodes.len(), nodes.len() + 1);
            nodes.push(Node::Leaf { counts: vec![] });
            nodes.push(Node::Leaf { counts: vec![] });
            nodes[id] = Node::Split {
                feature: feature as u32,
                threshold,
                left: left as u32,
                right: right as u32,
            };
            work.push((right, r, depth + 1));
            work.push((left, l, depth + 1));
        }
        Tree { nodes }
    }
}

/// Train on samples labeled `1..=C`. Each tree sees a seeded bootstrap
/// sample and uses its own random stream, so the result does not depend on
/// thread scheduling.
pub fn train_forest(samples: &Samples, labels: &[u32], params: &ForestParams) -> Result<ForestModel> {
    let (n, d) = (samples.len(), samples.dim());
    if d == 0 {
        return Err(Error::validation("training samples have no features"));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    if n < 2 {
        return Err(Error::validation(format!("need at least 2 training samples, got {n}")));
    }
    if labels.contains(&0) {
        return Err(Error::validation("training labels must be class ids ≥ 1"));
    }
    if samples.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("training features must be finite"));
    }
    let class_count = *labels.iter().max().unwrap();
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::validation(format!(
            "training set has a single class ({})",
            labels[0]
        )));
    }
    params.validate(d)?;

    let y: Vec<usize> = labels.iter().map(|&l| l as usize - 1).collect();
    let grower = Grower {
        x: samples,
        y: &y,
        classes: class_count as usize,
        mtry: params.resolved_mtry(d),
        params,
    };
    let splittable = (0..d).any(|f| (1..n).any(|i| samples.get(i, f) != samples.get(0, f)));
    if !splittable {
        log::warn!("all training features are identical; every tree predicts the majority class");
    }

    let grown: Vec<(Tree, Vec<bool>)> = (0..params.tree_count)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(t as u64);
            if !splittable {
                let all: Vec<usize> = (0..n).collect();
                return (grower.grow(all, &mut rng), vec![true; n]);
            }
            let boot: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut in_bag = vec![false; n];
            for &i in &boot {
                in_bag[i] = true;
            }
            (grower.grow(boot, &mut rng), in_bag)
        })
        .collect();
    let (trees, bags): (Vec<Tree>, Vec<Vec<bool>>) = grown.into_iter().unzip();

    let mut model = ForestModel {
        trees,
        class_count,
        feature_count: d,
        oob_error: None,
    };
    let oob: Vec<Option<bool>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let out = (0..bags.len()).filter(|&t| !bags[t][i]);
            model.classify(samples.row(i), out).map(|c| c != labels[i])
        })
        .collect();
    let judged: Vec<bool> = oob.into_iter().flatten().collect();
    if !judged.is_empty() {
        let wrong = judged.iter().filter(|&&w| w).count();
        model.oob_error = Some(wrong as f64 / judged.len() as f64);
    }
    log::info!(
        "trained {} trees on {n} samples x {d} features, oob error {:?}",
        model.tree_count(),
        model.oob_error
    );
    Ok(model)
}

/// Majority vote over trees; ties go to the smallest class id.
pub fn predict(model: &ForestModel, samples: &Samples) -> Result<Vec<u32>> {
    if samples.is_empty() {
        return Ok(Vec::new());
    }
    if samples.dim() != model.feature_count {
        return Err(Error::DimensionMismatch {
            expected: model.feature_count,
            found: samples.dim(),
        });
    }
    Ok((0..samples.len())
        .into_par_iter()
        .map(|i| model.classify(samples.row(i), 0..model.trees.len()).unwrap())
        .collect())
}
