use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use attrprof::raster::{save_labels, save_raster, save_stack, FeatureStack, LabelMap, Raster, RasterFormat};

const CONFIG: &str = r#"
[input]
image = "scene.pgm"
train_labels = "train.pgm"
test_labels = "test.pgm"

[profile]
variant = "minmax"

[[profile.attribute]]
kind = "area"
thresholds = [3.0, 10.0, 40.0]

[classifier]
trees = 20

[output]
dir = "out"
"#;

/// Left half holds 2x2 bright squares (class 1), right half one 8x8 square
/// per 16x16 block (class 2); both at the same gray level on a dark field.
fn write_scene(dir: &Path) {
    let (w, h) = (32, 16);
    let mut v = vec![50.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let bright = if c < 16 { r % 4 < 2 && c % 4 < 2 } else { (4..12).contains(&r) && (20..28).contains(&c) };
            if bright {
                v[r * w + c] = 200.0;
            }
        }
    }
    save_raster(&Raster::from_band(w, h, v).unwrap(), dir.join("scene.pgm"), RasterFormat::Pgm).unwrap();
    let class = |p: usize| if p % w < 16 { 1 } else { 2 };
    let split = |keep: usize| -> LabelMap {
        let labels = (0..w * h).map(|p| if (p / w + p % w) % 2 == keep { class(p) } else { 0 }).collect();
        LabelMap::new(w, h, labels).unwrap()
    };
    save_labels(&split(0), dir.join("train.pgm")).unwrap();
    save_labels(&split(1), dir.join("test.pgm")).unwrap();
    fs::write(dir.join("config.toml"), CONFIG).unwrap();
}

fn attrprof(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_attrprof"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn full_workflow_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    write_scene(tmp.path());
    let cfg = ["--config", "config.toml"];

    let info = attrprof(tmp.path(), &[&cfg[..], &["info"]].concat());
    assert_eq!(info.status.code(), Some(0), "{}", stderr(&info));
    assert!(stdout(&info).contains("depth/band    7"));

    let extract = attrprof(tmp.path(), &[&cfg[..], &["extract"]].concat());
    assert_eq!(extract.status.code(), Some(0), "{}", stderr(&extract));
    assert!(stdout(&extract).contains("7 layers"));
    let again = attrprof(tmp.path(), &[&cfg[..], &["extract"]].concat());
    assert!(stdout(&again).contains("(cached)"));

    let classify = attrprof(tmp.path(), &[&cfg[..], &["--seed", "3", "--threads", "2", "classify"]].concat());
    assert_eq!(classify.status.code(), Some(0), "{}", stderr(&classify));
    assert!(stdout(&classify).contains("OA"), "{}", stdout(&classify));
    let out = tmp.path().join("out");
    for f in ["forest.aprf", "predicted.pgm", "map.ppm", "metrics.csv", "confusion.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    assert!(fs::read_to_string(out.join("forest.aprf.log")).unwrap().contains("seed = 3"));

    let eval = attrprof(tmp.path(), &[&cfg[..], &["eval"]].concat());
    assert_eq!(eval.status.code(), Some(0), "{}", stderr(&eval));

    let files = attrprof(tmp.path(), &["info", "out/forest.aprf", "out/features.bsq", "scene.pgm"]);
    assert_eq!(files.status.code(), Some(0), "{}", stderr(&files));
    let text = stdout(&files);
    assert!(text.contains("forest of 20 trees"), "{text}");
    assert!(text.contains("7 layers"), "{text}");
    assert!(text.contains("1 bands"), "{text}");
}

#[test]
fn same_seed_gives_identical_maps() {
    let tmp = tempfile::tempdir().unwrap();
    write_scene(tmp.path());
    let run = || {
        let o = attrprof(tmp.path(), &["--config", "config.toml", "extract"]);
        assert_eq!(o.status.code(), Some(0));
        let o = attrprof(tmp.path(), &["--config", "config.toml", "classify"]);
        assert_eq!(o.status.code(), Some(0));
        let bytes = (fs::read(tmp.path().join("out/map.ppm")).unwrap(), fs::read(tmp.path().join("out/forest.aprf")).unwrap());
        fs::remove_dir_all(tmp.path().join("out")).unwrap();
        bytes
    };
    assert_eq!(run(), run());
}

#[test]
fn validation_failures_exit_with_1() {
    let tmp = tempfile::tempdir().unwrap();
    write_scene(tmp.path());
    let cases: [&[&str]; 5] = [
        &["extract"],
        &["--preset", "atlantis", "extract"],
        &["--config", "config.toml", "classify"],
        &["--config", "missing.toml", "extract"],
        &["frobnicate"],
    ];
    for args in cases {
        let o = attrprof(tmp.path(), args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
    }
    let o = attrprof(tmp.path(), &["--config", "config.toml", "classify"]);
    assert!(stderr(&o).contains("run extract first"), "{}", stderr(&o));

    fs::write(tmp.path().join("bad.toml"), "[profile]\nlevels = \"many\"\n").unwrap();
    assert_eq!(attrprof(tmp.path(), &["--config", "bad.toml", "info"]).status.code(), Some(1));
    fs::write(tmp.path().join("broken.toml"), "[profile\n").unwrap();
    assert_eq!(attrprof(tmp.path(), &["--config", "broken.toml", "info"]).status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    write_scene(tmp.path());
    // A truncated stack passes validation but fails to load.
    fs::create_dir(tmp.path().join("out")).unwrap();
    let stack = FeatureStack::from_raster(&Raster::from_band(32, 16, vec![0.0; 512]).unwrap());
    save_stack(&stack, tmp.path().join("out/features.bsq")).unwrap();
    fs::write(tmp.path().join("out/features.bsq"), [0u8; 7]).unwrap();
    let o = attrprof(tmp.path(), &["--config", "config.toml", "classify"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("load: "), "{}", stderr(&o));
}
