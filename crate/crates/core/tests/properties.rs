use attrprof::attributes::AttributeKind;
use attrprof::learn::{predict, train_forest, ForestModel, ForestParams, Metrics, Samples};
use attrprof::profiles::{build_profile, AttributeThresholds, ProfileSpec, TreeVariant};
use attrprof::raster::{load_raster, save_raster, Raster, RasterFormat};
use proptest::prelude::*;

fn image(max_side: usize, levels: u8) -> impl Strategy<Value = Raster> {
    (2..=max_side, 2..=max_side).prop_flat_map(move |(w, h)| {
        prop::collection::vec(0..levels, w * h)
            .prop_map(move |v| Raster::from_band(w, h, v.into_iter().map(f64::from).collect()).unwrap())
    })
}

fn thresholds() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(1u32..40, 1..5).prop_map(|s| s.into_iter().map(f64::from).collect())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn area_profile_layers_are_ordered(x in image(10, 8), t in thresholds()) {
        let spec = ProfileSpec::new(vec![AttributeThresholds::new(AttributeKind::Area, t.clone())], TreeVariant::MinMax);
        let stack = build_profile(&x, &spec).unwrap();
        prop_assert_eq!(stack.depth(), 2 * t.len() + 1);
        prop_assert_eq!(stack.layer(t.len()), x.band(0));
        for i in 1..stack.depth() {
            prop_assert!(stack.layer(i - 1).iter().zip(stack.layer(i)).all(|(a, b)| a >= b), "layer {}", i);
        }
    }

    #[test]
    fn profile_of_constant_image_is_constant(w in 1usize..8, h in 1usize..8, v in 0u8..=255, t in thresholds()) {
        let x = Raster::from_band(w, h, vec![f64::from(v); w * h]).unwrap();
        for variant in TreeVariant::ALL {
            let spec = ProfileSpec::new(vec![AttributeThresholds::new(AttributeKind::Area, t.clone())], variant);
            let stack = build_profile(&x, &spec).unwrap();
            prop_assert!(stack.layers().iter().flatten().all(|&p| p == f64::from(v)), "{:?}", variant);
        }
    }

    #[test]
    fn rasters_roundtrip_through_files(x in image(9, 255)) {
        let tmp = tempfile::tempdir().unwrap();
        for (name, format) in [("a.pgm", RasterFormat::Pgm), ("a.bsq", RasterFormat::Bsq)] {
            let path = tmp.path().join(name);
            save_raster(&x, &path, format).unwrap();
            prop_assert_eq!(&load_raster(&path, format).unwrap(), &x);
        }
    }

    #[test]
    fn forest_bytes_roundtrip(rows in prop::collection::vec((0u8..4, 0u8..4, 1u32..4), 4..40), seed in any::<u64>()) {
        let samples = Samples::from_rows(&rows.iter().map(|r| vec![f64::from(r.0), f64::from(r.1)]).collect::<Vec<_>>()).unwrap();
        let labels: Vec<u32> = rows.iter().map(|r| r.2).collect();
        prop_assume!(labels.iter().any(|&l| l != labels[0]));
        let params = ForestParams { tree_count: 5, seed, ..ForestParams::default() };
        let model = train_forest(&samples, &labels, &params).unwrap();
        let back = ForestModel::from_bytes(&model.to_bytes()).unwrap();
        prop_assert_eq!(predict(&back, &samples).unwrap(), predict(&model, &samples).unwrap());
        prop_assert_eq!(&back, &model);
    }

    #[test]
    fn metric_bounds(cells in prop::collection::vec(0u64..50, 9)) {
        prop_assume!(cells.iter().sum::<u64>() > 0);
        let m = Metrics::from_confusion(cells.chunks(3).map(<[u64]>::to_vec).collect()).unwrap();
        prop_assert!((0.0..=1.0).contains(&m.oa()));
        prop_assert!((0.0..=1.0).contains(&m.aa()));
        prop_assert!(m.kappa() <= m.oa() + 1e-12);
    }
}
