//! `symprod selftest`: the invariant checks bundled into one deterministic report.
//!
//! Sample sizes are smaller than in the full acceptance suite so the whole
//! run takes seconds. Numbers in the report are rounded so that the text is
//! identical for any thread count; no timings are printed.

use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec_file;
use super::{banner, conjugacy_stats, verdict, Outcome};
use crate::capacities::{
    boundary_minimal_experiment, gh_capacities, zoll_check, BoundaryMinimalConfig,
};
use crate::diskmap::{disk_to_domain, jacobian_determinant, sandwich_check, CutoffMapConfig};
use crate::dynamics::{char_flow_2d, OrbitPeriod, ProductFlow};
use crate::fractal::{box_dimension, dyadic_scales, FractalFunction, GraphSampler};
use crate::geometry2d::RadialProfile;
use crate::product::{ellipsoid_volume, ProductDomain};
use crate::Result;

/// The shipped spec files, embedded so the selftest needs no working directory.
pub const SANDWICH_SPEC: &str = include_str!("../../../../specs/sandwich.spec");
pub const BOUNDARY_MINIMAL_SPEC: &str = include_str!("../../../../specs/boundary_minimal.spec");

/// The named planar presets: smooth, polygonal and fractal.
pub fn preset_profiles() -> Result<Vec<(&'static str, Arc<RadialProfile>)>> {
    Ok(vec![
        ("disk", Arc::new(RadialProfile::disk(PI)?)),
        ("cosine", Arc::new(RadialProfile::cosine(PI, 0.5)?)),
        (
            "square",
            Arc::new(RadialProfile::from_polygon(&[
                [1.0, 1.0],
                [-1.0, 1.0],
                [-1.0, -1.0],
                [1.0, -1.0],
            ])?),
        ),
        (
            "polygon",
            Arc::new(RadialProfile::from_polygon(&[
                [2.0, 0.0],
                [0.0, 1.0],
                [-1.0, 0.0],
                [0.0, -1.5],
            ])?),
        ),
        (
            "weierstrass",
            Arc::new(RadialProfile::weierstrass_disk(1.0, 0.1, 0.5, 3.0, 20)?),
        ),
        (
            "hunt",
            Arc::new(RadialProfile::hunt_disk(1.0, 0.1, 0.5, 3.0, 20, 11)?),
        ),
        (
            "xz",
            Arc::new(RadialProfile::xz_disk(1.0, 0.1, 0.5, 1.5, 2.0, 5)?),
        ),
    ])
}

struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, detail)) => Check {
            name,
            passed,
            detail,
        },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

pub fn run(seed: u64) -> Outcome {
    let checks = vec![
        check("disk_map_jacobian", || jacobian(seed)),
        check("boundary_mapping", || boundary_mapping(seed)),
        check("sandwich", || sandwich(seed)),
        check("volume", || volume(seed)),
        check("period_law", || period_law(seed)),
        check("conjugacy", || conjugacy(seed)),
        check("systoles", || systoles(seed)),
        check("capacities", capacities),
        check("boundary_minimal", || boundary_minimal(seed)),
        check("fractal_graph", fractal_graph),
    ];
    let mut out = banner("selftest");
    let _ = writeln!(out, "seed = {seed}");
    for c in &checks {
        let _ = writeln!(out, "{:<18} {:<4}  {}", c.name, verdict(c.passed), c.detail);
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    let _ = writeln!(out, "summary = {passed}/{} passed", checks.len());
    Outcome {
        text: out,
        passed: passed == checks.len(),
    }
}

fn uniform_in_disk(rng: &mut ChaCha8Rng, area: f64) -> [f64; 2] {
    let r = (area / PI).sqrt() * rng.random::<f64>().sqrt();
    let t = rng.random::<f64>() * std::f64::consts::TAU;
    [r * t.cos(), r * t.sin()]
}

fn jacobian(seed: u64) -> Result<(bool, String)> {
    let w = RadialProfile::cosine(PI, 0.5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let z = uniform_in_disk(&mut rng, 0.98 * PI);
        let j = jacobian_determinant(|p| disk_to_domain(&w, p), z, 1e-5);
        worst = worst.max((j - 1.0).abs());
    }
    Ok((
        worst <= 1e-6,
        format!("max |det - 1| = {worst:.1e} over 1000 points"),
    ))
}

fn boundary_mapping(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
    let mut worst = 0.0f64;
    let presets = preset_profiles()?;
    for (_, w) in &presets {
        for _ in 0..1000 {
            let z = uniform_in_disk(&mut rng, w.area());
            let g = w.gauge(disk_to_domain(w, z));
            let expect = PI * (z[0] * z[0] + z[1] * z[1]) / w.area();
            worst = worst.max((g * g - expect).abs());
        }
    }
    Ok((
        worst <= 1e-10,
        format!(
            "max |g^2 - pi|z|^2/a| = {worst:.1e} over {} presets",
            presets.len()
        ),
    ))
}

fn sandwich(seed: u64) -> Result<(bool, String)> {
    let spec = spec_file::parse(SANDWICH_SPEC, "sandwich.spec")
        .map_err(|e| crate::Error::Precondition(e.to_string()))?;
    let profiles = spec.planar_profiles().expect("planar spec");
    let config = CutoffMapConfig::calibrate(&profiles, 0.05, 1000)?;
    let report = sandwich_check(&profiles, &config, 2000, seed)?;
    Ok((
        report.passed(),
        format!(
            "eps 0.05, 2000 samples: outer violations {}, inner violations {}",
            report.outer.violations, report.inner.violations
        ),
    ))
}

fn volume(seed: u64) -> Result<(bool, String)> {
    let domain = ProductDomain::from_profiles(vec![
        Arc::new(RadialProfile::disk(1.0)?),
        Arc::new(RadialProfile::cosine(1.0, 0.5)?),
    ])?;
    let est = domain.mc_volume(200_000, seed)?;
    let exact = ellipsoid_volume(&crate::geometry2d::EllipsoidSpec::new(vec![1.0, 1.0])?);
    let z = (est.estimate - exact) / est.std_error;
    Ok((
        z.abs() <= 3.0,
        format!(
            "estimate {:.4} vs {exact}, {:.2} standard errors",
            est.estimate, z
        ),
    ))
}

fn period_law(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
    let mut worst = 0.0f64;
    let presets = preset_profiles()?;
    for (_, w) in &presets {
        for _ in 0..20 {
            let z = w.boundary_point(rng.random::<f64>() * std::f64::consts::TAU);
            let y = char_flow_2d(w, z, w.area());
            worst = worst.max((y[0] - z[0]).hypot(y[1] - z[1]));
        }
    }
    Ok((worst <= 1e-8, format!("max return distance {worst:.1e}")))
}

fn conjugacy(seed: u64) -> Result<(bool, String)> {
    let spec = spec_file::parse(SANDWICH_SPEC, "sandwich.spec")
        .map_err(|e| crate::Error::Precondition(e.to_string()))?;
    let profiles = spec.planar_profiles().expect("planar spec");
    let stats = conjugacy_stats(&profiles, 200, seed)
        .map_err(|e| crate::Error::Precondition(e.to_string()))?;
    Ok((
        stats.max <= 1e-6,
        format!("max residual {:.1e} over 200 samples", stats.max),
    ))
}

fn systoles(seed: u64) -> Result<(bool, String)> {
    let equal = ProductDomain::from_profiles(vec![
        Arc::new(RadialProfile::weierstrass_disk(1.0, 0.1, 0.5, 3.0, 20)?.rescaled_to_area(1.0)?),
        Arc::new(RadialProfile::cosine(1.0, 0.5)?),
    ])?;
    let report = ProductFlow::new(&equal)?.systole_check(200, seed)?;
    let unequal = ProductDomain::from_profiles(vec![
        Arc::new(RadialProfile::disk(1.0)?),
        Arc::new(RadialProfile::cosine(SQRT_2, 0.5)?),
    ])?;
    let flow = ProductFlow::new(&unequal)?;
    let mut open = 0;
    let points = unequal.boundary_sample(None, 50, seed ^ 3)?;
    for x in &points {
        let p = flow.to_flow_point(x)?;
        if flow.orbit_period(&p, 1e-8, 1000)? == OrbitPeriod::NoneWithinBound {
            open += 1;
        }
    }
    Ok((
        report.passed && open == points.len(),
        format!(
            "equal areas: 200 orbits close (max |period - a| {:.1e}); areas 1, sqrt2: {open}/{} none within bound",
            report.worst_period_deviation,
            points.len()
        ),
    ))
}

fn capacities() -> Result<(bool, String)> {
    let table = gh_capacities(&[1.0, 2.0], 4)?;
    let zoll = zoll_check(&[1.0, 1.0, 1.0])?;
    let passed = table.values == [1.0, 2.0, 2.0, 3.0] && zoll.zoll && zoll.c1 == zoll.cn;
    Ok((
        passed,
        format!(
            "E(1,2): {}; E(1,1,1): c1 = c3 = {}",
            super::join(&table.values),
            zoll.c1
        ),
    ))
}

fn boundary_minimal(seed: u64) -> Result<(bool, String)> {
    let spec = spec_file::parse(BOUNDARY_MINIMAL_SPEC, "boundary_minimal.spec")
        .map_err(|e| crate::Error::Precondition(e.to_string()))?;
    let bm = spec.boundary_minimal.clone().expect("section present");
    let cfg = BoundaryMinimalConfig {
        factors: spec.planar_profiles().expect("planar spec"),
        point: bm.point,
        half_width: bm.half_width,
        target_area: bm.target_area,
        eta: bm.eta,
        samples: 10_000,
        seed,
    };
    let r = boundary_minimal_experiment(&cfg)?;
    let gap_ok = (r.capacity_gap() - 0.1 * r.area).abs() <= 1e-9;
    Ok((
        r.passed() && gap_ok,
        format!(
            "10000 samples: {} violations, capacity gap {:.6}",
            r.violations,
            r.capacity_gap()
        ),
    ))
}

fn fractal_graph() -> Result<(bool, String)> {
    let f = FractalFunction::weierstrass(0.5, 3.0, 30)?;
    let target = f.graph_dimension().expect("weierstrass has a dimension");
    let est = box_dimension(&GraphSampler::new(f, 0.0, 1.0), &dyadic_scales(4, 12), 4, 1)?;
    Ok((
        (est.dimension - target).abs() <= 0.08,
        format!("estimate {:.3} vs {target:.4}", est.dimension),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_specs_parse() {
        assert!(spec_file::parse(SANDWICH_SPEC, "s").is_ok());
        let bm = spec_file::parse(BOUNDARY_MINIMAL_SPEC, "b").unwrap();
        assert!(bm.boundary_minimal.is_some());
    }

    #[test]
    fn presets_have_distinct_names() {
        let p = preset_profiles().unwrap();
        let mut names: Vec<_> = p.iter().map(|(n, _)| *n).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), p.len());
    }
}
