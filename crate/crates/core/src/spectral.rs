//! Principal component analysis of multiband rasters.
//!
//! Pixels are samples and bands are variables. The model is the
//! eigendecomposition of the mean-centered population covariance, with
//! components ordered by decreasing variance and each component's
//! largest-magnitude coefficient made positive.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::Raster;

/// Rows accumulated per covariance update.
const BLOCK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// Unit vectors in band space, one per component.
    components: Vec<Vec<f64>>,
    /// Non-increasing.
    explained_variance: Vec<f64>,
    /// Trace of the covariance.
    total_variance: f64,
}

/// How many components [`project`] keeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Keep {
    Count(usize),
    /// Smallest count whose cumulative variance fraction reaches the value.
    Fraction(f64),
}

impl PcaModel {
    pub fn band_count(&self) -> usize {
        self.mean.len()
    }

    /// Number of components retained by the fit.
    pub fn rank(&self) -> usize {
        self.components.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    /// Fraction of total variance carried by the first `k` components.
    /// A zero-variance model reports 1.
    pub fn cumulative_fraction(&self, k: usize) -> f64 {
        if self.total_variance <= 0.0 {
            return 1.0;
        }
        self.explained_variance[..k.min(self.rank())].iter().sum::<f64>() / self.total_variance
    }

    /// Resolve a keep policy to a component count.
    pub fn resolve(&self, keep: Keep) -> Result<usize> {
        match keep {
            Keep::Count(k) if k == 0 || k > self.rank() => Err(Error::validation(format!(
                "cannot keep {k} components from a model of rank {}",
                self.rank()
            ))),
            Keep::Count(k) => Ok(k),
            Keep::Fraction(t) if !(t > 0.0 && t <= 1.0) => Err(Error::validation(format!(
                "variance fraction must be in (0, 1], got {t}"
            ))),
            Keep::Fraction(t) => Ok((1..=self.rank())
                .find(|&k| self.cumulative_fraction(k) >= t)
                .unwrap_or(self.rank())),
        }
    }

    pub fn to_text(&self) -> String {
        let row = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let mut s = String::new();
        writeln!(s, "pca 1").unwrap();
        writeln!(s, "bands {}", self.band_count()).unwrap();
        writeln!(s, "components {}", self.rank()).unwrap();
        writeln!(s, "total_variance {}", self.total_variance).unwrap();
        writeln!(s, "mean {}", row(&self.mean)).unwrap();
        writeln!(s, "variance {}", row(&self.explained_variance)).unwrap();
        for c in &self.components {
            writeln!(s, "component {}", row(c)).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut offset = 0;
        let mut fields: Vec<(usize, &str, Vec<&str>)> = Vec::new();
        for line in text.split_inclusive('\n') {
            let mut words = line.split_whitespace();
            if let Some(key) = words.next() {
                fields.push((offset, key, words.collect()));
            }
            offset += line.len();
        }
        let mut it = fields.into_iter();
        let mut next = |key: &str| -> Result<(usize, Vec<&str>)> {
            match it.next() {
                Some((off, k, rest)) if k == key => Ok((off, rest)),
                Some((off, k, _)) => Err(Error::format(off, format!("expected '{key}', found '{k}'"))),
                None => Err(Error::format(text.len(), format!("truncated model, missing '{key}'"))),
            }
        };
        let nums = |off: usize, words: &[&str]| -> Result<Vec<f64>> {
            words
                .iter()
                .map(|w| w.parse().map_err(|_| Error::format(off, format!("bad number '{w}'"))))
                .collect()
        };
        let scalar = |off: usize, words: &[&str]| -> Result<usize> {
            match words {
                [w] => w.parse().map_err(|_| Error::format(off, format!("bad count '{w}'"))),
                _ => Err(Error::format(off, "expected one value")),
            }
        };
        let (off, version) = next("pca")?;
        if version != ["1"] {
            return Err(Error::format(off, "unsupported model version"));
        }
        let (off, w) = next("bands")?;
        let bands = scalar(off, &w)?;
        let (off, w) = next("components")?;
        let rank = scalar(off, &w)?;
        let (off, w) = next("total_variance")?;
        let total = nums(off, &w)?;
        let (off, w) = next("mean")?;
        let mean = nums(off, &w)?;
        let (voff, w) = next("variance")?;
        let explained_variance = nums(voff, &w)?;
        if total.len() != 1 || mean.len() != bands || explained_variance.len() != rank {
            return Err(Error::format(off, "model field lengths disagree with header"));
        }
        let mut components = Vec::with_capacity(rank);
        for _ in 0..rank {
            let (off, w) = next("component")?;
            let c = nums(off, &w)?;
            if c.len() != bands {
                return Err(Error::format(off, "component length disagrees with band count"));
            }
            components.push(c);
        }
        Ok(PcaModel {
            mean,
            components,
            explained_variance,
            total_variance: total[0],
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PcaModel::from_text(&text)
    }
}

pub fn fit_pca(raster: &Raster) -> Result<PcaModel> {
    let d = raster.band_count();
    if d < 2 {
        return Err(Error::validation(format!("PCA requires ≥ 2 bands, got {d}")));
    }
    let n = raster.pixel_count();
    if let Some((b, _)) = raster
        .bands()
        .iter()
        .enumerate()
        .find(|(_, band)| band.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::InvalidBand {
            band: b,
            reason: "non-finite value".into(),
        });
    }
    let mean: Vec<f64> = raster.bands().iter().map(|b| b.iter().sum::<f64>() / n as f64).collect();

    let mut cov = DMatrix::<f64>::zeros(d, d);
    for start in (0..n).step_by(BLOCK) {
        let rows = BLOCK.min(n - start);
        let block = DMatrix::from_fn(rows, d, |i, j| raster.band(j)[start + i] - mean[j]);
        cov += block.transpose() * &block;
    }
    cov /= n as f64;
    let total_variance = cov.trace();

    let eigen = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]).then(a.cmp(&b)));

    let rank = d.min(n.saturating_sub(1)).max(1);
    if rank < d {
        log::warn!("{n} pixels for {d} bands: degenerate covariance, keeping {rank} components");
    }
    if total_variance <= 0.0 {
        log::warn!("raster has zero variance in every band");
    }
    let mut components = Vec::with_capacity(rank);
    let mut explained_variance = Vec::with_capacity(rank);
    for &i in &order[..rank] {
        let mut c: Vec<f64> = eigen.eigenvectors.column(i).iter().copied().collect();
        let lead = (0..d).fold(0, |best, j| if c[j].abs() > c[best].abs() { j } else { best });
        if c[lead] < 0.0 {
            c.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(c);
        explained_variance.push(eigen.eigenvalues[i].max(0.0));
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
        total_variance,
    })
}

/// Component scores of every pixel.
pub fn project(model: &PcaModel, raster: &Raster, keep: Keep) -> Result<Raster> {
    if raster.band_count() != model.band_count() {
        return Err(Error::DimensionMismatch {
            expected: model.band_count(),
            found: raster.band_count(),
        });
    }
    let k = model.resolve(keep)?;
    let (w, h) = raster.extent();
    let rows: Vec<Vec<Vec<f64>>> = (0..h)
        .into_par_iter()
        .map(|r| {
            let mut out = vec![vec![0.0; w]; k];
            for c in 0..w {
                let p = r * w + c;
                for (row, comp) in out.iter_mut().zip(&model.components[..k]) {
                    row[c] = comp
                        .iter()
                        .zip(&model.mean)
                        .enumerate()
                        .map(|(b, (coef, mu))| coef * (raster.band(b)[p] - mu))
                        .sum();
                }
            }
            out
        })
        .collect();
    let bands: Vec<Vec<f64>> = (0..k)
        .map(|ci| rows.iter().flat_map(|row| row[ci].iter().copied()).collect())
        .collect();
    let meta = (1..=k).map(|i| Some(format!("pc{i}"))).collect();
    Raster::new(w, h, bands)?.with_band_meta(meta)
}

/// Map component scores back to band space.
pub fn inverse_project(model: &PcaModel, scores: &Raster) -> Result<Raster> {
    let k = scores.band_count();
    if k > model.rank() {
        return Err(Error::DimensionMismatch {
            expected: model.rank(),
            found: k,
        });
    }
    let bands = (0..model.band_count())
        .map(|b| {
            (0..scores.pixel_count())
                .map(|p| {
                    model.mean[b]
                        + (0..k)
                            .map(|ci| model.components[ci][b] * scores.band(ci)[p])
                            .sum::<f64>()
                })
                .collect()
        })
        .collect();
    Raster::new(scores.width(), scores.height(), bands)
}
