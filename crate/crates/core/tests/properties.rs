use std::f64::consts::{PI, TAU};
use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use symprod::capacities::{gh_capacities, shrink_profile};
use symprod::diskmap::{disk_to_domain, jacobian_determinant};
use symprod::dynamics::ProductFlow;
use symprod::fractal::{box_dimension, dyadic_scales, FractalFunction, GraphSampler};
use symprod::geometry2d::{Interpolation, ProfileSource, RadialProfile};
use symprod::product::{Factor, ProductDomain};

fn profiles() -> &'static [Arc<RadialProfile>] {
    static CELL: OnceLock<Vec<Arc<RadialProfile>>> = OnceLock::new();
    CELL.get_or_init(|| {
        vec![
            Arc::new(RadialProfile::disk(1.0).unwrap()),
            Arc::new(RadialProfile::cosine(PI, 0.5).unwrap()),
            Arc::new(
                RadialProfile::from_polygon(&[[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])
                    .unwrap(),
            ),
            Arc::new(
                RadialProfile::from_polygon(&[[2.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.5]])
                    .unwrap(),
            ),
            Arc::new(RadialProfile::weierstrass_disk(1.0, 0.1, 0.5, 3.0, 20).unwrap()),
            Arc::new(RadialProfile::hunt_disk(1.0, 0.1, 0.5, 3.0, 20, 5).unwrap()),
            Arc::new(RadialProfile::xz_disk(1.0, 0.1, 0.5, 1.5, 2.0, 5).unwrap()),
        ]
    })
}

fn profile() -> impl Strategy<Value = Arc<RadialProfile>> {
    (0..profiles().len()).prop_map(|i| profiles()[i].clone())
}

fn planar_point(max: f64) -> impl Strategy<Value = [f64; 2]> {
    (0.01..max, 0.0..TAU).prop_map(|(r, t)| [r * t.cos(), r * t.sin()])
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn gauge_is_one_homogeneous(w in profile(), z in planar_point(3.0), s in 0.01f64..50.0) {
        let g = w.gauge(z);
        let gs = w.gauge([s * z[0], s * z[1]]);
        prop_assert!((gs - s * g).abs() <= 1e-12 * gs.max(1.0));
    }

    #[test]
    fn sector_area_round_trips(w in profile(), theta in 0.0f64..TAU) {
        let back = w.inverse_sector_area(w.sector_area(theta));
        prop_assert!((back - theta).abs() <= 1e-8);
    }

    #[test]
    fn sector_area_increases(w in profile(), a in 0.0f64..TAU, b in 0.0f64..TAU) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-9);
        prop_assert!(w.sector_area(hi) > w.sector_area(lo));
    }

    #[test]
    fn disk_map_is_one_homogeneous(w in profile(), z in planar_point(1.0), s in 0.05f64..20.0) {
        let a = disk_to_domain(&w, [s * z[0], s * z[1]]);
        let b = disk_to_domain(&w, z);
        prop_assert!(dist(&a, &[s * b[0], s * b[1]]) <= 1e-12 * s.max(1.0));
    }

    #[test]
    fn disk_map_sends_levels_to_levels(w in profile(), z in planar_point(2.0)) {
        let g = w.gauge(disk_to_domain(&w, z));
        let expect = PI * (z[0] * z[0] + z[1] * z[1]) / w.area();
        prop_assert!((g * g - expect).abs() <= 1e-10 * expect.max(1.0));
    }

    #[test]
    fn disk_map_exhausts_nested(w in profile(), d1 in 0.05f64..0.95, gap in 0.001f64..0.05, u in 0.0f64..1.0, t in 0.0..TAU) {
        // a point of δ′·𝔻(a) lands inside δ″·W for δ″ > δ′
        let d2 = (d1 + gap).min(1.0);
        let r = d1 * (w.area() / PI).sqrt() * u.sqrt();
        let img = disk_to_domain(&w, [r * t.cos(), r * t.sin()]);
        prop_assert!(w.gauge(img) < d2);
    }

    #[test]
    fn smooth_disk_map_is_symplectic(z in planar_point(1.0), scale in 0.1f64..2.0) {
        let w = &profiles()[1];
        let rho = scale * (w.area() / PI).sqrt();
        let n = z[0].hypot(z[1]);
        let p = [z[0] / n * rho, z[1] / n * rho];
        let det = jacobian_determinant(|q| disk_to_domain(w, q), p, 1e-5 * rho);
        prop_assert!((det - 1.0).abs() <= 1e-6, "det {det} at {p:?}");
    }

    #[test]
    fn product_gauge_is_associative(
        i in 0usize..7, j in 0usize..7, k in 0usize..7,
        x in prop::collection::vec(-1.5f64..1.5, 6),
        p in prop::sample::select(vec![1.0, 2.0, 3.5]),
    ) {
        let f = |n: usize| Factor::Planar(profiles()[n].clone());
        let left = ProductDomain::new(vec![Factor::Product(Box::new(ProductDomain::new(vec![f(i), f(j)], p).unwrap())), f(k)], p).unwrap();
        let right = ProductDomain::new(vec![f(i), Factor::Product(Box::new(ProductDomain::new(vec![f(j), f(k)], p).unwrap()))], p).unwrap();
        let flat = ProductDomain::new(vec![f(i), f(j), f(k)], p).unwrap();
        let (gl, gr, gf) = (left.gauge(&x).unwrap(), right.gauge(&x).unwrap(), flat.gauge(&x).unwrap());
        prop_assert!((gl - gr).abs() <= 1e-12 * gf.max(1.0));
        prop_assert!((gl - gf).abs() <= 1e-12 * gf.max(1.0));
    }

    #[test]
    fn product_gauge_scales(i in 0usize..7, j in 0usize..7, x in prop::collection::vec(-1.0f64..1.0, 4), s in 0.01f64..30.0) {
        let d = ProductDomain::from_profiles(vec![profiles()[i].clone(), profiles()[j].clone()]).unwrap();
        let xs: Vec<f64> = x.iter().map(|v| s * v).collect();
        let (g, gs) = (d.gauge(&x).unwrap(), d.gauge(&xs).unwrap());
        prop_assert!((gs - s * g).abs() <= 1e-12 * gs.max(1.0));
    }

    #[test]
    fn larger_factors_give_smaller_gauge(x in prop::collection::vec(-1.0f64..1.0, 4), a in 0.5f64..2.0, grow in 1.0f64..3.0) {
        let small = ProductDomain::from_profiles(vec![
            Arc::new(RadialProfile::cosine(a, 0.4).unwrap()),
            Arc::new(RadialProfile::disk(a).unwrap()),
        ]).unwrap();
        let big = ProductDomain::from_profiles(vec![
            Arc::new(RadialProfile::cosine(a * grow, 0.4).unwrap()),
            Arc::new(RadialProfile::disk(a * grow).unwrap()),
        ]).unwrap();
        prop_assert!(small.gauge(&x).unwrap() >= big.gauge(&x).unwrap() - 1e-14);
    }

    #[test]
    fn flow_keeps_gauge(i in 0usize..7, j in 0usize..7, x in prop::collection::vec(-1.0f64..1.0, 4), t in 0.0f64..1.0) {
        let d = ProductDomain::from_profiles(vec![profiles()[i].clone(), profiles()[j].clone()]).unwrap();
        let flow = ProductFlow::new(&d).unwrap();
        let top = flow.areas().into_iter().fold(0.0, f64::max);
        let y = flow.flow_ambient(&x, 10.0 * top * t).unwrap();
        let (g0, g1) = (d.gauge(&x).unwrap(), d.gauge(&y).unwrap());
        prop_assert!((g0 - g1).abs() <= 1e-10 * g0.max(1.0));
    }

    #[test]
    fn flow_group_law(i in 0usize..7, j in 0usize..7, x in prop::collection::vec(-1.0f64..1.0, 4), s in -5.0f64..5.0, t in -5.0f64..5.0) {
        let d = ProductDomain::from_profiles(vec![profiles()[i].clone(), profiles()[j].clone()]).unwrap();
        let flow = ProductFlow::new(&d).unwrap();
        let once = flow.flow_ambient(&x, s + t).unwrap();
        let twice = flow.flow_ambient(&flow.flow_ambient(&x, s).unwrap(), t).unwrap();
        prop_assert!(dist(&once, &twice) <= 1e-8);
    }

    #[test]
    fn flow_commutes_with_scaling(i in 0usize..7, j in 0usize..7, x in prop::collection::vec(-1.0f64..1.0, 4), t in -5.0f64..5.0, s in 0.05f64..10.0) {
        let d = ProductDomain::from_profiles(vec![profiles()[i].clone(), profiles()[j].clone()]).unwrap();
        let flow = ProductFlow::new(&d).unwrap();
        let xs: Vec<f64> = x.iter().map(|v| s * v).collect();
        let a = flow.flow_ambient(&xs, t).unwrap();
        let b: Vec<f64> = flow.flow_ambient(&x, t).unwrap().iter().map(|v| s * v).collect();
        prop_assert!(dist(&a, &b) <= 1e-10 * s.max(1.0));
    }

    #[test]
    fn capacities_grow_with_areas(
        areas in prop::collection::vec(0.1f64..5.0, 1..5),
        which in 0usize..5,
        extra in 0.0f64..3.0,
    ) {
        let k = 8;
        let before = gh_capacities(&areas, k).unwrap();
        let mut bigger = areas.clone();
        let w = which % bigger.len();
        bigger[w] += extra;
        let after = gh_capacities(&bigger, k).unwrap();
        for (b, a) in before.values.iter().zip(&after.values) {
            prop_assert!(a >= b);
        }
        let min = areas.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(before.first(), min);
    }

    #[test]
    fn equal_areas_zoll(a in 0.1f64..5.0, n in 1usize..6) {
        let t = gh_capacities(&vec![a; n], n).unwrap();
        prop_assert_eq!(t.first(), a);
        prop_assert_eq!(t.values[n - 1], a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn shrink_stays_inside_and_hits_area(i in 0usize..7, dir in 0.0f64..TAU, hw in 0.4f64..1.2, q in 0.02f64..0.25) {
        let w = &profiles()[i];
        // remove a fraction of the area the window covers, so the request is
        // always within reach of a dent
        let m = 4096;
        let window: f64 = (0..m)
            .map(|j| {
                let t = dir - hw + 2.0 * hw * (j as f64 + 0.5) / m as f64;
                0.5 * w.radius(t).powi(2) * 2.0 * hw / m as f64
            })
            .sum();
        let target = w.area() - q * window;
        let s = shrink_profile(w, dir, hw, target).unwrap();
        prop_assert!((s.area() - target).abs() <= 1e-8);
        for j in 0..8192 {
            let t = TAU * j as f64 / 8192.0;
            prop_assert!(s.radius(t) <= w.radius(t) + 1e-15);
        }
    }
}

#[test]
fn smooth_area_quadrature_converges() {
    for (n, tol) in [(64usize, 1e-6), (256, 1e-9)] {
        let make = |n: usize| {
            RadialProfile::new(
                ProfileSource::Samples(
                    (0..n)
                        .map(|j| (1.0 + 0.5 * (TAU * j as f64 / n as f64).cos()).sqrt())
                        .collect(),
                ),
                n,
                Interpolation::CubicPeriodic,
            )
            .unwrap()
            .area()
        };
        let (a, b) = (make(n), make(2 * n));
        // R² = 1 + ½cos θ encloses π exactly
        assert!(
            (a - b).abs() <= 50.0 / (n * n) as f64,
            "n = {n}: {a} vs {b}"
        );
        assert!((b - PI).abs() <= tol, "n = {n}: {b}");
    }
}

#[test]
fn weierstrass_truncation_is_stable() {
    let est = |k: usize| {
        let f = FractalFunction::weierstrass(0.5, 3.0, k).unwrap();
        box_dimension(&GraphSampler::new(f, 0.0, 1.0), &dyadic_scales(4, 11), 4, 2).unwrap()
    };
    let (a, b) = (est(30), est(40));
    assert!((a.dimension - b.dimension).abs() <= a.ci_half_width.max(b.ci_half_width));
}

#[test]
fn product_rule_at_coarse_scales() {
    let f = FractalFunction::weierstrass(0.5, 3.0, 30).unwrap();
    let graph = box_dimension(
        &GraphSampler::new(f.clone(), 0.0, 1.0),
        &dyadic_scales(3, 7),
        4,
        5,
    )
    .unwrap();
    let strip = box_dimension(
        &GraphSampler::new(f, 0.0, 1.0).times_interval(0.0, 1.0),
        &dyadic_scales(3, 7),
        4,
        5,
    )
    .unwrap();
    assert!(graph.monotone && strip.monotone);
    assert!((strip.dimension - graph.dimension - 1.0).abs() <= 0.1);
}
