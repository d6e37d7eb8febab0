mod common;

use attrprof::attributes::{compute_attributes, AttributeKind};
use attrprof::filtering::{
    attribute_thickening, attribute_thinning, self_dual_filter, DecisionRule,
};
use attrprof::hierarchy::{
    build_alpha_tree, build_max_tree, build_min_tree, build_omega_tree, build_tree_of_shapes,
    Connectivity, Hierarchy, ShapesConfig,
};
use attrprof::raster::Raster;
use common::*;

const C: u32 = 255;

fn corpus() -> Vec<Img> {
    let mut imgs = random_images(200, 8, 8, 6, 7);
    imgs.extend(random_images(50, 8, 8, 256, 19));
    imgs
}

fn thin(r: &Raster, lambda: f64, rule: DecisionRule) -> Raster {
    attribute_thinning(r, AttributeKind::Area, lambda, rule, Connectivity::Four).unwrap()
}

fn complement(r: &Raster) -> Raster {
    Raster::from_band(r.width(), r.height(), r.band(0).iter().map(|v| C as f64 - v).collect()).unwrap()
}

#[test]
fn area_thinning_matches_component_removal() {
    let imgs = exhaustive_3x3().step_by(7).chain(corpus());
    for img in imgs {
        let r = img.raster();
        for lambda in [1.0, 2.0, 3.0, 5.0, 9.0, 17.0, 64.0, 100.0] {
            for (conn, eight) in [(Connectivity::Four, false), (Connectivity::Eight, true)] {
                let got = attribute_thinning(&r, AttributeKind::Area, lambda, DecisionRule::Min, conn).unwrap();
                assert_eq!(got.band(0), &area_thinning(&img, lambda, eight)[..], "{img:?} {lambda}");
            }
        }
    }
}

#[test]
fn thinning_algebra() {
    let lambdas = [1.0, 2.0, 4.0, 7.0, 12.0, 30.0];
    for img in corpus() {
        let x = img.raster();
        for (i, &l1) in lambdas.iter().enumerate() {
            let g1 = thin(&x, l1, DecisionRule::Min);
            assert!(g1.band(0).iter().zip(x.band(0)).all(|(a, b)| a <= b), "anti-extensive");
            assert_eq!(thin(&g1, l1, DecisionRule::Min).band(0), g1.band(0), "idempotent");
            for rule in [DecisionRule::Max, DecisionRule::Direct, DecisionRule::Subtractive] {
                assert_eq!(thin(&x, l1, rule).band(0), g1.band(0), "rule {rule:?}");
            }
            for &l2 in &lambdas[i..] {
                let g2 = thin(&x, l2, DecisionRule::Min);
                assert!(g2.band(0).iter().zip(g1.band(0)).all(|(a, b)| a <= b), "ordering");
                assert_eq!(thin(&g1, l2, DecisionRule::Min).band(0), g2.band(0), "absorption");
                assert_eq!(thin(&g2, l1, DecisionRule::Min).band(0), g2.band(0), "absorption");
            }
        }
    }
}

#[test]
fn bbox_rules_agree() {
    for img in corpus().iter().take(100) {
        let x = img.raster();
        for lambda in [1.5, 2.5, 4.0, 6.0] {
            let outs: Vec<Raster> = DecisionRule::ALL
                .iter()
                .map(|&rule| attribute_thinning(&x, AttributeKind::BboxDiag, lambda, rule, Connectivity::Four).unwrap())
                .collect();
            assert!(outs.windows(2).all(|w| w[0] == w[1]));
        }
    }
}

#[test]
fn thickening_is_dual_of_thinning() {
    for img in corpus() {
        let x = img.raster();
        for lambda in [2.0, 5.0, 20.0] {
            for rule in DecisionRule::ALL {
                for kind in AttributeKind::ALL {
                    let lam = if kind == AttributeKind::Inertia { lambda / 40.0 } else { lambda };
                    let phi = attribute_thickening(&x, kind, lam, rule, Connectivity::Four).unwrap();
                    let dual = complement(
                        &attribute_thinning(&complement(&x), kind, lam, rule, Connectivity::Four).unwrap(),
                    );
                    assert_eq!(phi, dual, "{kind:?} {rule:?}");
                    if kind.is_increasing() {
                        assert!(phi.band(0).iter().zip(x.band(0)).all(|(a, b)| a >= b), "extensive");
                    }
                }
            }
        }
    }
}

#[test]
fn shapes_filter_is_self_dual_under_swapped_connectivity() {
    let cfg = ShapesConfig::default();
    for img in corpus() {
        let x = img.raster();
        for lambda in [1.0, 3.0, 8.0, 20.0] {
            for rule in DecisionRule::ALL {
                let direct = self_dual_filter(&x, AttributeKind::Area, lambda, rule, &cfg).unwrap();
                let dual = complement(
                    &self_dual_filter(&complement(&x), AttributeKind::Area, lambda, rule, &cfg.dual()).unwrap(),
                );
                assert_eq!(direct, dual);
                if lambda == 1.0 {
                    assert_eq!(direct, x);
                }
            }
        }
    }
}

#[test]
fn tree_of_shapes_of_complement_swaps_connectivity() {
    let cfg = ShapesConfig::default();
    for img in corpus() {
        let a = build_tree_of_shapes(&img.raster(), &cfg).unwrap();
        let b = build_tree_of_shapes(&img.complement(C).raster(), &cfg.dual()).unwrap();
        assert_eq!(tree_sets(&a), tree_sets(&b));
    }
}

#[test]
fn min_tree_is_max_tree_of_complement() {
    for img in corpus() {
        let a = build_min_tree(&img.raster(), Connectivity::Four).unwrap();
        let b = build_max_tree(&img.complement(C).raster(), Connectivity::Four).unwrap();
        let sets_a: Vec<_> = a.node_pixel_sets();
        let sets_b: Vec<_> = b.node_pixel_sets();
        assert_eq!(histogram(sets_a), histogram(sets_b));
    }
}

fn check_attributes<H: Hierarchy>(tree: &H, img: &Img) {
    let band: Vec<f64> = img.v.iter().map(|&v| v as f64).collect();
    let attrs = compute_attributes(tree, &band).unwrap();
    for (n, set) in tree.node_pixel_sets().iter().enumerate() {
        let s = set_stats(img.w, &band, set);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + b.abs());
        assert_eq!(attrs.value(n, AttributeKind::Area), s.area);
        assert!(close(attrs.value(n, AttributeKind::StdDev), s.std_dev), "std {img:?} node {n}");
        assert!(close(attrs.value(n, AttributeKind::Inertia), s.inertia), "inertia {img:?} node {n}");
        assert!(close(attrs.value(n, AttributeKind::BboxDiag), s.bbox_diag));
    }
    for (n, &p) in tree.parents().iter().enumerate().skip(1) {
        assert!(attrs.value(p, AttributeKind::Area) >= attrs.value(n, AttributeKind::Area));
        assert!(attrs.value(p, AttributeKind::BboxDiag) >= attrs.value(n, AttributeKind::BboxDiag));
    }
}

#[test]
fn attributes_match_explicit_pixel_sets() {
    let imgs: Vec<Img> = exhaustive_3x3().step_by(5).chain(corpus()).collect();
    for img in &imgs {
        let r = img.raster();
        check_attributes(&build_max_tree(&r, Connectivity::Four).unwrap(), img);
        check_attributes(&build_min_tree(&r, Connectivity::Eight).unwrap(), img);
        check_attributes(&build_tree_of_shapes(&r, &ShapesConfig::default()).unwrap(), img);
        check_attributes(&build_alpha_tree(&r).unwrap(), img);
        check_attributes(&build_omega_tree(&r).unwrap(), img);
    }
}

#[test]
fn std_dev_and_inertia_are_not_monotone() {
    let mut std_violation = false;
    let mut inertia_violation = false;
    for img in corpus() {
        let tree = build_max_tree(&img.raster(), Connectivity::Four).unwrap();
        let band: Vec<f64> = img.v.iter().map(|&v| v as f64).collect();
        let attrs = compute_attributes(&tree, &band).unwrap();
        for n in 1..tree.node_count() {
            let p = tree.parents()[n];
            std_violation |= attrs.std_dev(n) > attrs.std_dev(p);
            inertia_violation |= attrs.inertia(n) > attrs.inertia(p);
        }
    }
    assert!(std_violation && inertia_violation);
}

#[test]
fn inertia_is_translation_invariant() {
    for img in corpus().iter().take(40) {
        let mut big = Img { w: img.w + 3, h: img.h + 2, v: vec![0; (img.w + 3) * (img.h + 2)] };
        for r in 0..img.h {
            for c in 0..img.w {
                big.v[(r + 2) * big.w + c + 3] = img.v[r * img.w + c] + 1;
            }
        }
        let small = build_max_tree(&img.raster(), Connectivity::Four).unwrap();
        let shifted = build_max_tree(&big.raster(), Connectivity::Four).unwrap();
        let bs: Vec<f64> = img.v.iter().map(|&v| v as f64).collect();
        let bb: Vec<f64> = big.v.iter().map(|&v| v as f64).collect();
        let a = compute_attributes(&small, &bs).unwrap();
        let b = compute_attributes(&shifted, &bb).unwrap();
        // shifted tree has one extra root (the zero frame); the rest line up by level
        let mut ia: Vec<(i64, u64)> = (0..small.node_count())
            .map(|n| (small.level(n) + 1, (a.inertia(n) * 1e9).round() as u64))
            .collect();
        let mut ib: Vec<(i64, u64)> = (1..shifted.node_count())
            .map(|n| (shifted.level(n), (b.inertia(n) * 1e9).round() as u64))
            .collect();
        ia.sort_unstable();
        ib.sort_unstable();
        assert_eq!(ia, ib);
    }
}
