//! Configuration-driven extract → reduce → classify → eval workflow.
//!
//! Every command validates its whole configuration before touching data,
//! writes a provenance log beside each artifact (`<file>.log`, itself a
//! runnable config), and removes what it wrote if a later step fails.
//! `reduce` and `extract` skip work whose inputs and settings hash to the
//! key recorded in an existing log.

mod config;
mod provenance;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub use config::{
    AttributeConfig, ClassifierConfig, InputConfig, OutputConfig, PipelineConfig, PostKind,
    ProfileConfig, SpectralConfig, SpectralMethod, PRESETS,
};
pub use provenance::{file_digest, log_path};

use self::config::require;
use self::provenance::{Outputs, Provenance, StageKey};
use crate::error::{Error, Result};
use crate::learn::{evaluate, predict, save_forest, train_forest, ForestModel, Metrics, Samples};
use crate::profiles::build_profile;
use crate::raster::{
    header_path, load_labels, load_raster, load_stack, save_labels, save_raster, save_stack,
    write_bsq, LabelMap, Raster, RasterFormat, SampleType,
};
use crate::spectral::{fit_pca, project};

/// Class colors of the classification map; class 0 is black and ids past
/// the table wrap around.
pub const PALETTE: [[u8; 3]; 16] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 212],
    [0, 128, 128],
    [220, 190, 255],
    [170, 110, 40],
    [255, 250, 200],
    [128, 0, 0],
    [170, 255, 195],
];

#[derive(Debug, Clone, PartialEq)]
pub struct ReduceReport {
    pub path: PathBuf,
    pub components: usize,
    /// Cumulative variance fraction after each kept component.
    pub cumulative: Vec<f64>,
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractReport {
    pub path: PathBuf,
    pub depth: usize,
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyReport {
    pub labels: PathBuf,
    pub map: PathBuf,
    pub metrics: Metrics,
    pub oob_error: Option<f64>,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn add_input(key: &mut StageKey, role: &str, path: &Path) -> Result<()> {
    key.input(role, path)?;
    if RasterFormat::from_path(path).ok() == Some(RasterFormat::Bsq) {
        key.input(&format!("{role} header"), &header_path(path))?;
    }
    Ok(())
}

fn load_image(path: &Path) -> Result<Raster> {
    stage("load", RasterFormat::from_path(path).and_then(|f| load_raster(path, f)))
}

/// Fit PCA on the input image and write the component scores.
pub fn cmd_reduce(config: &PipelineConfig) -> Result<ReduceReport> {
    config.validate()?;
    if config.spectral.method != SpectralMethod::Pca {
        return Err(Error::validation("reduce needs spectral.method = \"pca\""));
    }
    let keep = config.spectral.keep()?;
    let image = require(&config.input.image, "input.image")?;
    let out = config.output.path(&config.output.reduced);
    let model_path = config.output.path(&config.output.pca_model);

    let mut key = StageKey::new("reduce");
    add_input(&mut key, "image", &image)?;
    key.section("spectral", &config.spectral);
    let mut prov = Provenance::new("reduce", key);
    if prov.cached(&out) && model_path.is_file() {
        let reduced = stage("load", read_reduced(&out))?;
        log::info!("reduce: cache hit for {}", out.display());
        let model = stage("load", crate::spectral::PcaModel::load(&model_path))?;
        return Ok(ReduceReport {
            path: out,
            components: reduced.band_count(),
            cumulative: (1..=reduced.band_count()).map(|k| model.cumulative_fraction(k)).collect(),
            cached: true,
        });
    }

    let raster = load_image(&image)?;
    let model = stage("reduce", fit_pca(&raster))?;
    let scores = stage("reduce", project(&model, &raster, keep))?;
    let k = scores.band_count();
    let cumulative: Vec<f64> = (1..=k).map(|i| model.cumulative_fraction(i)).collect();
    for (i, c) in cumulative.iter().enumerate() {
        log::info!("pc{}: variance {:.6e}, cumulative {c:.6}", i + 1, model.explained_variance()[i]);
        prov.note(format!("pc{} cumulative variance {c}", i + 1));
    }

    create_dir(&config.output.dir)?;
    let mut outputs = Outputs::default();
    outputs.add(&out);
    outputs.add(&header_path(&out));
    outputs.add(&model_path);
    stage("write", write_bsq(&out, &scores, SampleType::F64, &[]))?;
    stage("write", model.save(&model_path))?;
    stage("write", prov.write(&out, config, &mut outputs))?;
    stage("write", prov.write(&model_path, config, &mut outputs))?;
    outputs.commit();
    Ok(ReduceReport {
        path: out,
        components: k,
        cumulative,
        cached: false,
    })
}

fn read_reduced(path: &Path) -> Result<Raster> {
    load_raster(path, RasterFormat::Bsq)
}

/// Build the configured profile (after PCA when enabled) and write it as a
/// feature stack.
pub fn cmd_extract(config: &PipelineConfig) -> Result<ExtractReport> {
    config.validate()?;
    let spec = config.profile.spec()?;
    let post = config.profile.post_process();
    let image = require(&config.input.image, "input.image")?;
    let out = config.output.path(&config.output.features);

    let source = match config.spectral.method {
        SpectralMethod::None => image,
        SpectralMethod::Pca => cmd_reduce(config)?.path,
    };
    let mut key = StageKey::new("extract");
    add_input(&mut key, "source", &source)?;
    key.section("profile", &config.profile);
    let mut prov = Provenance::new("extract", key);
    if prov.cached(&out) {
        log::info!("extract: cache hit for {}", out.display());
        let stack = stage("load", load_stack(&out))?;
        return Ok(ExtractReport {
            path: out,
            depth: stack.depth(),
            cached: true,
        });
    }

    let raster = load_image(&source)?;
    let expected = post.depth(spec.depth(raster.band_count()));
    prov.note(format!("variant {}", spec.variant.name()));
    for a in &spec.attributes {
        prov.note(format!("attribute {} rule {}", a.kind.name(), spec.rule_for(a.kind).name()));
    }
    let quantized: Vec<usize> = (0..raster.band_count())
        .filter(|&b| !crate::hierarchy::is_tree_ready(raster.band(b)))
        .collect();
    if !quantized.is_empty() {
        prov.note(format!("bands {quantized:?} quantized to {} levels", spec.levels));
    }

    let stack = stage("profile", build_profile(&raster, &spec))?;
    let stack = stage("post", post.apply(stack))?;
    debug_assert_eq!(stack.depth(), expected);
    log::info!("extract: {} layers of {}x{}", stack.depth(), stack.width(), stack.height());

    create_dir(&config.output.dir)?;
    let mut outputs = Outputs::default();
    outputs.add(&out);
    outputs.add(&header_path(&out));
    stage("write", save_stack(&stack, &out))?;
    stage("write", prov.write(&out, config, &mut outputs))?;
    outputs.commit();
    Ok(ExtractReport {
        path: out,
        depth: stack.depth(),
        cached: false,
    })
}

/// Color every pixel by its class.
pub fn class_map(labels: &LabelMap) -> Raster {
    let mut bands: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(labels.labels().len())).collect();
    for &l in labels.labels() {
        let rgb = if l == 0 { [0; 3] } else { PALETTE[(l as usize - 1) % PALETTE.len()] };
        for (band, v) in bands.iter_mut().zip(rgb) {
            band.push(v as f64);
        }
    }
    Raster::new(labels.width(), labels.height(), bands).expect("label map extent is valid")
}

/// Train on the training labels, predict every pixel and score against the
/// test labels.
pub fn cmd_classify(config: &PipelineConfig) -> Result<ClassifyReport> {
    config.validate()?;
    let features = config.output.path(&config.output.features);
    if !features.is_file() {
        return Err(Error::validation(format!(
            "feature stack {} does not exist (run extract first)",
            features.display()
        )));
    }
    let train_path = require(&config.input.train_labels, "input.train_labels")?;
    let test_path = require(&config.input.test_labels, "input.test_labels")?;

    let stack = stage("load", load_stack(&features))?;
    let train = stage("load", load_labels(&train_path))?;
    let test = stage("load", load_labels(&test_path))?;
    stage("load", train.check_extent(stack.extent()))?;
    stage("load", test.check_extent(stack.extent()))?;

    let pixels: Vec<usize> = (0..train.labels().len()).filter(|&p| train.labels()[p] != 0).collect();
    let labels: Vec<u32> = pixels.iter().map(|&p| train.labels()[p]).collect();
    let samples = Samples::from_stack(&stack, &pixels);
    let model = stage("train", train_forest(&samples, &labels, &config.classifier.params()))?;

    let all: Vec<usize> = (0..stack.width() * stack.height()).collect();
    let predicted = stage("predict", predict(&model, &Samples::from_stack(&stack, &all)))?;
    let predicted = LabelMap::new(stack.width(), stack.height(), predicted)?;
    let metrics = stage("evaluate", evaluate(&predicted, &test))?;

    let mut key = StageKey::new("classify");
    add_input(&mut key, "features", &features)?;
    add_input(&mut key, "train", &train_path)?;
    add_input(&mut key, "test", &test_path)?;
    key.section("classifier", &config.classifier);
    let mut prov = Provenance::new("classify", key);
    prov.note(format!(
        "forest {} trees, mtry {}, {} training samples",
        model.tree_count(),
        config.classifier.params().resolved_mtry(stack.depth()),
        pixels.len()
    ));
    if let Some(oob) = model.oob_error() {
        prov.note(format!("oob error {oob}"));
    }
    prov.note(format!("oa {} aa {} kappa {}", metrics.oa(), metrics.aa(), metrics.kappa()));

    create_dir(&config.output.dir)?;
    let out = &config.output;
    let (model_path, labels_path, map_path) = (out.path(&out.model), out.path(&out.labels), out.path(&out.map));
    let mut outputs = Outputs::default();
    for p in [&model_path, &labels_path, &map_path] {
        outputs.add(p);
    }
    stage("write", save_forest(&model, &model_path))?;
    stage("write", save_labels(&predicted, &labels_path))?;
    stage("write", save_raster(&class_map(&predicted), &map_path, RasterFormat::Ppm))?;
    let written = write_metrics(config, &metrics, &mut outputs)?;
    for p in [&model_path, &labels_path, &map_path].into_iter().chain(&written) {
        stage("write", prov.write(p, config, &mut outputs))?;
    }
    outputs.commit();
    Ok(ClassifyReport {
        labels: labels_path,
        map: map_path,
        metrics,
        oob_error: model.oob_error(),
    })
}

fn write_metrics(config: &PipelineConfig, metrics: &Metrics, outputs: &mut Outputs) -> Result<Vec<PathBuf>> {
    let out = &config.output;
    let files = [
        (out.path(&out.metrics), metrics.to_csv()),
        (out.path(&out.confusion), metrics.confusion_csv()),
    ];
    for (path, text) in &files {
        outputs.add(path);
        stage("write", std::fs::write(path, text).map_err(|e| Error::io(path, e)))?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

/// Score an existing prediction against the test labels.
pub fn cmd_eval(config: &PipelineConfig) -> Result<Metrics> {
    config.validate()?;
    let predicted_path = config.output.path(&config.output.labels);
    if !predicted_path.is_file() {
        return Err(Error::validation(format!(
            "prediction {} does not exist (run classify first)",
            predicted_path.display()
        )));
    }
    let test_path = require(&config.input.test_labels, "input.test_labels")?;
    let predicted = stage(
        "load",
        RasterFormat::from_path(&predicted_path)
            .and_then(|f| load_raster(&predicted_path, f))
            .and_then(|r| LabelMap::from_raster(&r)),
    )?;
    let test = stage("load", load_labels(&test_path))?;
    let metrics = stage("evaluate", evaluate(&predicted, &test))?;

    create_dir(&config.output.dir)?;
    let mut key = StageKey::new("eval");
    add_input(&mut key, "prediction", &predicted_path)?;
    add_input(&mut key, "test", &test_path)?;
    let prov = Provenance::new("eval", key);
    let mut outputs = Outputs::default();
    let written = write_metrics(config, &metrics, &mut outputs)?;
    for p in &written {
        stage("write", prov.write(p, config, &mut outputs))?;
    }
    outputs.commit();
    Ok(metrics)
}

/// Human-readable summary of a resolved configuration.
pub fn describe_config(config: &PipelineConfig) -> Result<String> {
    config.validate()?;
    let spec = config.profile.spec()?;
    let post = config.profile.post_process();
    let mut s = String::new();
    let show = |p: &Option<PathBuf>| p.as_ref().map_or("-".to_string(), |p| p.display().to_string());
    writeln!(s, "image         {}", show(&config.input.image)).unwrap();
    writeln!(s, "train labels  {}", show(&config.input.train_labels)).unwrap();
    writeln!(s, "test labels   {}", show(&config.input.test_labels)).unwrap();
    let spectral = match config.spectral.method {
        SpectralMethod::None => "none".to_string(),
        SpectralMethod::Pca => format!("pca, keep {:?}", config.spectral.keep()?),
    };
    writeln!(s, "spectral      {spectral}").unwrap();
    writeln!(s, "variant       {}", spec.variant.name()).unwrap();
    for a in &spec.attributes {
        writeln!(
            s,
            "attribute     {} rule={} thresholds={:?}",
            a.kind.name(),
            spec.rule_for(a.kind).name(),
            a.thresholds
        )
        .unwrap();
    }
    writeln!(s, "post          {post:?}").unwrap();
    writeln!(s, "depth/band    {}", post.depth(spec.depth_per_band())).unwrap();
    if let Some(k) = config.spectral.components.filter(|_| config.spectral.method == SpectralMethod::Pca) {
        writeln!(s, "depth         {} ({k} components)", config.feature_depth(k)?).unwrap();
    }
    let c = &config.classifier;
    writeln!(
        s,
        "forest        trees={} mtry={} min_leaf={} seed={}",
        c.trees,
        c.mtry.map_or("sqrt".to_string(), |m| m.to_string()),
        c.min_leaf,
        c.seed
    )
    .unwrap();
    writeln!(s, "output        {}", config.output.dir.display()).unwrap();
    Ok(s)
}

/// Human-readable summary of an artifact: raster, feature stack or forest.
pub fn describe_file(path: &Path) -> Result<String> {
    let mut s = String::new();
    if path.extension().is_some_and(|e| e == "aprf") {
        let model = crate::learn::load_forest(path)?;
        describe_forest(&mut s, path, &model);
        return Ok(s);
    }
    let format = RasterFormat::from_path(path)?;
    if format == RasterFormat::Bsq {
        let stack = load_stack(path)?;
        writeln!(s, "{}: {}x{}, {} layers", path.display(), stack.width(), stack.height(), stack.depth()).unwrap();
        for (i, m) in stack.layer_meta().iter().enumerate() {
            writeln!(s, "  {i:>4} {m}").unwrap();
        }
    } else {
        let r = load_raster(path, format)?;
        writeln!(s, "{}: {}x{}, {} bands", path.display(), r.width(), r.height(), r.band_count()).unwrap();
        for b in 0..r.band_count() {
            let (lo, hi) = r.band(b).iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            writeln!(s, "  band {b}: min {lo} max {hi}").unwrap();
        }
    }
    Ok(s)
}

fn describe_forest(s: &mut String, path: &Path, model: &ForestModel) {
    writeln!(
        s,
        "{}: forest of {} trees, {} classes, {} features, oob error {}",
        path.display(),
        model.tree_count(),
        model.class_count(),
        model.feature_count(),
        model.oob_error().map_or("-".to_string(), |e| format!("{e:.4}"))
    )
    .unwrap();
}
