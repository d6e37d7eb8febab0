use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attributes::AttributeKind;
use crate::error::{Error, Result};
use crate::filtering::DecisionRule;
use crate::hierarchy::Connectivity;
use crate::learn::ForestParams;
use crate::profiles::{AttributeThresholds, PostProcess, ProfileSpec, TreeVariant};
use crate::spectral::Keep;

/// Full pipeline configuration. Every section is optional in the file and
/// falls back to the defaults documented on each field.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub input: InputConfig,
    pub spectral: SpectralConfig,
    pub profile: ProfileConfig,
    pub classifier: ClassifierConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputConfig {
    /// Image to reduce and profile (.pgm, .ppm or .bsq).
    pub image: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralMethod {
    #[default]
    None,
    Pca,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralConfig {
    pub method: SpectralMethod,
    /// Components to keep; exclusive with `variance`.
    pub components: Option<usize>,
    /// Cumulative variance fraction to reach.
    pub variance: Option<f64>,
}

impl SpectralConfig {
    pub fn keep(&self) -> Result<Keep> {
        match (self.components, self.variance) {
            (Some(k), None) => Ok(Keep::Count(k)),
            (None, Some(t)) => Ok(Keep::Fraction(t)),
            (None, None) => Err(Error::validation("pca needs spectral.components or spectral.variance")),
            (Some(_), Some(_)) => Err(Error::validation(
                "spectral.components and spectral.variance are exclusive",
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostKind {
    #[default]
    None,
    /// Local mean and standard deviation.
    Lf,
    /// Local histogram.
    Hist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeConfig {
    pub kind: AttributeKind,
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileConfig {
    pub variant: TreeVariant,
    /// Unset: min for increasing attributes, subtractive otherwise, direct
    /// on alpha and omega trees.
    pub rule: Option<DecisionRule>,
    pub levels: u32,
    pub connectivity: u32,
    pub post: PostKind,
    pub window: usize,
    pub bins: usize,
    pub attribute: Vec<AttributeConfig>,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            variant: TreeVariant::MinMax,
            rule: None,
            levels: crate::profiles::DEFAULT_LEVELS,
            connectivity: 4,
            post: PostKind::None,
            window: crate::profiles::DEFAULT_WINDOW,
            bins: crate::profiles::DEFAULT_BINS,
            attribute: Vec::new(),
        }
    }
}

impl ProfileConfig {
    pub fn spec(&self) -> Result<ProfileSpec> {
        let spec = ProfileSpec {
            attributes: self
                .attribute
                .iter()
                .map(|a| AttributeThresholds::new(a.kind, a.thresholds.clone()))
                .collect(),
            variant: self.variant,
            rule: self.rule,
            levels: self.levels,
            connectivity: Connectivity::parse(self.connectivity)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn post_process(&self) -> PostProcess {
        match self.post {
            PostKind::None => PostProcess::None,
            PostKind::Lf => PostProcess::LocalFeatures { window: self.window },
            PostKind::Hist => PostProcess::Histogram {
                window: self.window,
                bins: self.bins,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub trees: usize,
    /// Unset: floor(sqrt(feature count)).
    pub mtry: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        let p = ForestParams::default();
        ClassifierConfig {
            trees: p.tree_count,
            mtry: p.mtry,
            max_depth: p.max_depth,
            min_leaf: p.min_leaf,
            seed: p.seed,
        }
    }
}

impl ClassifierConfig {
    pub fn params(&self) -> ForestParams {
        ForestParams {
            tree_count: self.trees,
            mtry: self.mtry,
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            seed: self.seed,
        }
    }
}

/// Output locations; file names are relative to `dir`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub reduced: PathBuf,
    pub pca_model: PathBuf,
    pub features: PathBuf,
    pub model: PathBuf,
    pub labels: PathBuf,
    pub map: PathBuf,
    pub metrics: PathBuf,
    pub confusion: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "out".into(),
            reduced: "reduced.bsq".into(),
            pca_model: "pca.txt".into(),
            features: "features.bsq".into(),
            model: "forest.aprf".into(),
            labels: "predicted.pgm".into(),
            map: "map.ppm".into(),
            metrics: "metrics.csv".into(),
            confusion: "confusion.csv".into(),
        }
    }
}

impl OutputConfig {
    pub fn path(&self, name: &Path) -> PathBuf {
        self.dir.join(name)
    }
}

const REYKJAVIK: &str = r#"
[profile]
variant = "minmax"

[[profile.attribute]]
kind = "area"
thresholds = [25, 100, 500, 1000, 5000, 10000, 20000, 50000, 100000, 150000]

[[profile.attribute]]
kind = "inertia"
thresholds = [0.2, 0.3, 0.4, 0.5]

[classifier]
trees = 100
"#;

const PAVIA: &str = r#"
[spectral]
method = "pca"
components = 4

[profile]
variant = "minmax"

[[profile.attribute]]
kind = "area"
thresholds = [770, 1538, 2307, 3076, 3846, 4615, 5384, 6153, 6923, 7692, 8461, 9230, 10000, 10769]

[[profile.attribute]]
kind = "inertia"
thresholds = [0.2, 0.3, 0.4, 0.5]

[classifier]
trees = 100
"#;

pub const PRESETS: [&str; 2] = ["reykjavik", "pavia"];

fn preset_table(name: &str) -> Result<toml::Table> {
    let text = match name {
        "reykjavik" => REYKJAVIK,
        "pavia" => PAVIA,
        _ => {
            return Err(Error::validation(format!(
                "unknown preset '{name}' (known: {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(text.parse().expect("built-in preset parses"))
}

/// Overlay `top` onto `base`, merging tables key by key. Arrays replace.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_table(text: &str, origin: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>().map_err(|e| {
        let offset = e.span().map_or(0, |s| s.start);
        Error::validation(format!("{origin}: byte {offset}: {}", e.message()))
    })
}

impl PipelineConfig {
    pub fn preset(name: &str) -> Result<Self> {
        PipelineConfig::from_table(preset_table(name)?)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        PipelineConfig::deserialize(toml::Value::Table(table))
            .map_err(|e| Error::validation(format!("config: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        PipelineConfig::from_table(parse_table(text, "config")?)
    }

    /// Build from an optional preset overlaid by an optional config file.
    /// Relative paths in the file resolve against the file's directory and
    /// come out absolute.
    pub fn load(preset: Option<&str>, path: Option<&Path>) -> Result<Self> {
        let mut table = match preset {
            Some(name) => preset_table(name)?,
            None => toml::Table::new(),
        };
        let mut base = None;
        if let Some(path) = path {
            if !path.is_file() {
                return Err(Error::validation(format!("config file {} does not exist", path.display())));
            }
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            merge(&mut table, parse_table(&text, &path.display().to_string())?);
            let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            base = Some(std::path::absolute(dir).map_err(|e| Error::io(dir, e))?);
        }
        let mut config = PipelineConfig::from_table(table)?;
        if let Some(base) = base {
            config.rebase(&base);
        }
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.input.image,
            &mut self.input.train_labels,
            &mut self.input.test_labels,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut self.output.dir);
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Check every section that does not depend on input data.
    pub fn validate(&self) -> Result<()> {
        if self.spectral.method == SpectralMethod::Pca {
            self.spectral.keep()?;
        }
        self.profile.spec()?;
        let post = self.profile.post_process();
        if let PostProcess::LocalFeatures { window } | PostProcess::Histogram { window, .. } = post {
            if window < 3 || window % 2 == 0 {
                return Err(Error::validation(format!(
                    "profile.window must be odd and at least 3, got {window}"
                )));
            }
        }
        if let PostProcess::Histogram { bins, .. } = post {
            if bins < 2 {
                return Err(Error::validation(format!("profile.bins must be at least 2, got {bins}")));
            }
        }
        if self.classifier.trees == 0 {
            return Err(Error::validation("classifier.trees must be at least 1"));
        }
        if self.classifier.min_leaf == 0 {
            return Err(Error::validation("classifier.min_leaf must be at least 1"));
        }
        if self.classifier.mtry == Some(0) {
            return Err(Error::validation("classifier.mtry must be at least 1"));
        }
        Ok(())
    }

    /// Feature depth the profile stage produces for `bands` input bands.
    pub fn feature_depth(&self, bands: usize) -> Result<usize> {
        let spec = self.profile.spec()?;
        Ok(self.profile.post_process().depth(spec.depth(bands)))
    }
}

/// A required input path, checked for existence.
pub(crate) fn require(path: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
    let path = path
        .as_ref()
        .ok_or_else(|| Error::validation(format!("{key} is not set")))?;
    if !path.is_file() {
        return Err(Error::validation(format!("{key}: {} does not exist", path.display())));
    }
    Ok(path.clone())
}
