use attrprof::attributes::AttributeKind;
use attrprof::filtering::{filter_with, Criterion, DecisionRule};
use attrprof::hierarchy::{
    build_alpha_tree, build_max_tree, build_min_tree, build_omega_tree, build_tree_of_shapes,
    Connectivity, ShapesConfig,
};
use attrprof::learn::{self, ForestModel, ForestParams, Samples};
use attrprof::pipeline::{cmd_classify, cmd_extract, PipelineConfig};
use attrprof::profiles::{
    self, AttributeThresholds, PostProcess, ProfileSpec, TreeVariant, DEFAULT_BINS, DEFAULT_WINDOW,
};
use attrprof::raster::{FeatureStack, LabelMap, Raster};
use attrprof::spectral::{self, Keep};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

/// Layers, each a list of rows.
type Layers = Vec<Vec<Vec<f64>>>;

fn py_err(e: attrprof::Error) -> PyErr {
    match e {
        attrprof::Error::Io { .. } => PyOSError::new_err(e.to_string()),
        e if e.is_validation() => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn value_err(message: String) -> PyErr {
    PyValueError::new_err(message)
}

fn band_raster(rows: Vec<Vec<f64>>) -> PyResult<Raster> {
    Raster::from_rows(&rows).map_err(py_err)
}

/// Accepts rows (one band) or a list of bands of rows.
fn image_raster(image: &Bound<'_, PyAny>) -> PyResult<Raster> {
    if let Ok(bands) = image.extract::<Vec<Vec<Vec<f64>>>>() {
        let rasters = bands.into_iter().map(band_raster).collect::<PyResult<Vec<_>>>()?;
        let first = rasters.first().ok_or_else(|| value_err("image has no bands".into()))?;
        let (w, h) = first.extent();
        return Raster::new(w, h, rasters.into_iter().flat_map(Raster::into_bands).collect()).map_err(py_err);
    }
    band_raster(image.extract::<Vec<Vec<f64>>>()?)
}

fn rows(values: &[f64], width: usize) -> Vec<Vec<f64>> {
    values.chunks(width).map(<[f64]>::to_vec).collect()
}

fn stack_layers(stack: &FeatureStack) -> Layers {
    stack.layers().iter().map(|l| rows(l, stack.width())).collect()
}

fn attribute(name: &str) -> PyResult<AttributeKind> {
    AttributeKind::parse(name).ok_or_else(|| value_err(format!("unknown attribute {name:?}")))
}

fn connectivity(n: u32) -> PyResult<Connectivity> {
    Connectivity::parse(n).map_err(py_err)
}

/// Filter one band on the chosen tree: "max" (thinning), "min"
/// (thickening), "shapes" (self-dual), "alpha" or "omega".
#[pyfunction]
#[pyo3(signature = (image, attribute_name, threshold, tree = "max", rule = "min", connectivity_n = 4))]
fn filter(
    image: Vec<Vec<f64>>,
    attribute_name: &str,
    threshold: f64,
    tree: &str,
    rule: &str,
    connectivity_n: u32,
) -> PyResult<Vec<Vec<f64>>> {
    let x = band_raster(image)?;
    let criterion = Criterion::new(attribute(attribute_name)?, threshold).map_err(py_err)?;
    let rule = DecisionRule::parse(rule).map_err(py_err)?;
    let conn = connectivity(connectivity_n)?;
    let band = x.band(0);
    let out = match tree {
        "max" => filter_with(&build_max_tree(&x, conn).map_err(py_err)?, band, &criterion, rule),
        "min" => filter_with(&build_min_tree(&x, conn).map_err(py_err)?, band, &criterion, rule),
        "shapes" => {
            let config = ShapesConfig { upper: conn, ..ShapesConfig::default() };
            filter_with(&build_tree_of_shapes(&x, &config).map_err(py_err)?, band, &criterion, rule)
        }
        "alpha" => filter_with(&build_alpha_tree(&x).map_err(py_err)?, band, &criterion, rule),
        "omega" => filter_with(&build_omega_tree(&x).map_err(py_err)?, band, &criterion, rule),
        other => return Err(value_err(format!("unknown tree {other:?}"))),
    }
    .map_err(py_err)?;
    Ok(rows(out.band(0), out.width()))
}

/// Build a profile; returns `(layers, names)` with one rows-list per layer.
#[pyfunction]
#[pyo3(signature = (image, attributes, variant = "minmax", rule = None, connectivity_n = 4, post = "none", window = DEFAULT_WINDOW, bins = DEFAULT_BINS))]
#[allow(clippy::too_many_arguments)]
fn build_profile(
    image: &Bound<'_, PyAny>,
    attributes: Vec<(String, Vec<f64>)>,
    variant: &str,
    rule: Option<&str>,
    connectivity_n: u32,
    post: &str,
    window: usize,
    bins: usize,
) -> PyResult<(Layers, Vec<String>)> {
    let x = image_raster(image)?;
    let attributes = attributes
        .into_iter()
        .map(|(name, t)| Ok(AttributeThresholds::new(attribute(&name)?, t)))
        .collect::<PyResult<Vec<_>>>()?;
    let mut spec = ProfileSpec::new(attributes, TreeVariant::parse(variant).map_err(py_err)?);
    spec.rule = rule.map(DecisionRule::parse).transpose().map_err(py_err)?;
    spec.connectivity = connectivity(connectivity_n)?;
    let post = match post {
        "none" => PostProcess::None,
        "lf" => PostProcess::LocalFeatures { window },
        "hist" => PostProcess::Histogram { window, bins },
        other => return Err(value_err(format!("unknown post-processing {other:?}"))),
    };
    let stack = profiles::build_profile(&x, &spec).and_then(|s| post.apply(s)).map_err(py_err)?;
    let names = stack.layer_meta().iter().map(ToString::to_string).collect();
    Ok((stack_layers(&stack), names))
}

/// Project a multiband image on its principal components; keep
/// `components` or enough to reach `variance`. Returns `(scores, cumulative)`.
#[pyfunction]
#[pyo3(signature = (image, components = None, variance = None))]
fn pca(
    image: &Bound<'_, PyAny>,
    components: Option<usize>,
    variance: Option<f64>,
) -> PyResult<(Layers, Vec<f64>)> {
    let keep = match (components, variance) {
        (Some(k), None) => Keep::Count(k),
        (None, Some(f)) => Keep::Fraction(f),
        _ => return Err(value_err("give exactly one of components or variance".into())),
    };
    let x = image_raster(image)?;
    let model = spectral::fit_pca(&x).map_err(py_err)?;
    let scores = spectral::project(&model, &x, keep).map_err(py_err)?;
    let cumulative = (1..=scores.band_count()).map(|k| model.cumulative_fraction(k)).collect();
    let layers = scores.bands().iter().map(|b| rows(b, x.width())).collect();
    Ok((layers, cumulative))
}

#[pyclass(name = "Forest", module = "pyattrprof")]
struct PyForest {
    model: ForestModel,
}

#[pymethods]
impl PyForest {
    /// Train on feature rows with labels ≥ 1.
    #[staticmethod]
    #[pyo3(signature = (samples, labels, trees = 100, mtry = None, max_depth = None, min_leaf = 1, seed = 0))]
    fn train(
        samples: Vec<Vec<f64>>,
        labels: Vec<u32>,
        trees: usize,
        mtry: Option<usize>,
        max_depth: Option<usize>,
        min_leaf: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let samples = Samples::from_rows(&samples).map_err(py_err)?;
        let params = ForestParams {
            tree_count: trees,
            mtry,
            max_depth,
            min_leaf,
            seed,
        };
        let model = learn::train_forest(&samples, &labels, &params).map_err(py_err)?;
        Ok(PyForest { model })
    }

    fn predict(&self, samples: Vec<Vec<f64>>) -> PyResult<Vec<u32>> {
        let samples = Samples::from_rows(&samples).map_err(py_err)?;
        learn::predict(&self.model, &samples).map_err(py_err)
    }

    #[getter]
    fn tree_count(&self) -> usize {
        self.model.tree_count()
    }

    #[getter]
    fn class_count(&self) -> u32 {
        self.model.class_count()
    }

    #[getter]
    fn oob_error(&self) -> Option<f64> {
        self.model.oob_error()
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.model.to_bytes())
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(PyForest {
            model: ForestModel::from_bytes(data).map_err(py_err)?,
        })
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        learn::save_forest(&self.model, &path).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(PyForest {
            model: learn::load_forest(&path).map_err(py_err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Forest(trees={}, classes={}, features={})",
            self.model.tree_count(),
            self.model.class_count(),
            self.model.feature_count()
        )
    }
}

fn metrics_dict<'py>(py: Python<'py>, m: &learn::Metrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("oa", m.oa())?;
    d.set_item("aa", m.aa())?;
    d.set_item("kappa", m.kappa())?;
    d.set_item("confusion", m.confusion().to_vec())?;
    Ok(d)
}

/// Score predicted labels against truth; truth 0 marks unlabeled pixels.
#[pyfunction]
fn evaluate<'py>(py: Python<'py>, predicted: Vec<u32>, truth: Vec<u32>) -> PyResult<Bound<'py, PyDict>> {
    let n = truth.len();
    let p = LabelMap::new(predicted.len(), 1, predicted).map_err(py_err)?;
    let t = LabelMap::new(n, 1, truth).map_err(py_err)?;
    metrics_dict(py, &learn::evaluate(&p, &t).map_err(py_err)?)
}

/// Run extract then classify from a config file and/or preset.
#[pyfunction]
#[pyo3(signature = (config = None, preset = None, seed = None))]
fn run_pipeline<'py>(
    py: Python<'py>,
    config: Option<std::path::PathBuf>,
    preset: Option<&str>,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut c = PipelineConfig::load(preset, config.as_deref()).map_err(py_err)?;
    if let Some(seed) = seed {
        c.classifier.seed = seed;
    }
    let extract = cmd_extract(&c).map_err(py_err)?;
    let classify = cmd_classify(&c).map_err(py_err)?;
    let d = metrics_dict(py, &classify.metrics)?;
    d.set_item("features", extract.path)?;
    d.set_item("depth", extract.depth)?;
    d.set_item("labels", classify.labels)?;
    d.set_item("map", classify.map)?;
    Ok(d)
}

#[pymodule]
fn pyattrprof(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(filter, m)?)?;
    m.add_function(wrap_pyfunction!(build_profile, m)?)?;
    m.add_function(wrap_pyfunction!(pca, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_class::<PyForest>()?;
    Ok(())
}
