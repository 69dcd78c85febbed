//! Ellipsoid capacities, the Zoll criterion and the boundary-minimality
//! shrinking experiment.
//!
//! Capacities of 2-products are read off their ellipsoid model: the product
//! of planar domains of areas `aᵢ` has the capacities of `E(a₁,…,aₙ)`, whose
//! k-th capacity is the k-th smallest element (with multiplicity) of
//! `{ i·aⱼ : i ≥ 1 }`.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry2d::{polar_angle, RadialProfile};
use crate::product::ProductDomain;
use crate::sampling::par_batches;

/// The first capacities `c₁ ≤ c₂ ≤ ⋯ ≤ c_K` of an ellipsoid.
#[derive(Clone, Debug, PartialEq)]
pub struct CapacityTable {
    pub areas: Vec<f64>,
    pub values: Vec<f64>,
}

impl CapacityTable {
    pub fn first(&self) -> f64 {
        self.values[0]
    }

    /// `c_k`, 1-based.
    pub fn get(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.values.get(i).copied())
    }
}

#[derive(PartialEq)]
struct Entry {
    value: f64,
    factor: usize,
    multiple: u64,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then(self.factor.cmp(&other.factor))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The `k` smallest elements of `{ i·aⱼ }` by an n-way merge of the
/// arithmetic progressions.
pub fn gh_capacities(areas: &[f64], k: usize) -> Result<CapacityTable> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "capacity count must be at least 1".into(),
        ));
    }
    if areas.is_empty() || areas.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "areas must be a nonempty list of positive numbers, got {areas:?}"
        )));
    }
    let mut heap: BinaryHeap<Reverse<Entry>> = areas
        .iter()
        .enumerate()
        .map(|(factor, &a)| {
            Reverse(Entry {
                value: a,
                factor,
                multiple: 1,
            })
        })
        .collect();
    let mut values = Vec::with_capacity(k);
    while values.len() < k {
        let Reverse(e) = heap.pop().expect("the merge never runs dry");
        values.push(e.value);
        let multiple = e.multiple + 1;
        heap.push(Reverse(Entry {
            value: multiple as f64 * areas[e.factor],
            factor: e.factor,
            multiple,
        }));
    }
    Ok(CapacityTable {
        areas: areas.to_vec(),
        values,
    })
}

/// Outcome of the `c₁ = cₙ` test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZollReport {
    pub c1: f64,
    pub cn: f64,
    pub zoll: bool,
}

/// `c₁ = cₙ` for the ellipsoid `E(a₁,…,aₙ)`, compared exactly.
pub fn zoll_check(areas: &[f64]) -> Result<ZollReport> {
    let table = gh_capacities(areas, areas.len())?;
    let c1 = table.values[0];
    let cn = table.values[areas.len() - 1];
    Ok(ZollReport {
        c1,
        cn,
        zoll: c1 == cn,
    })
}

/// [`zoll_check`] on the ellipsoid model of a 2-product.
pub fn zoll_check_domain(domain: &ProductDomain) -> Result<ZollReport> {
    let areas = domain.ellipsoid_model_areas().ok_or_else(|| {
        Error::Precondition("capacities are modelled on ellipsoids only for p = 2".into())
    })?;
    zoll_check(&areas)
}

/// Largest dent amplitude tried; keeps `R′ ≥ 0.01 R > 0`.
pub const MAX_DENT_AMPLITUDE: f64 = 0.99;

/// Removes a raised-cosine dent `R′ = R·(1 − A·b)` centred at `direction`
/// with half-width `half_width`, choosing `A` by bisection so that the area
/// becomes `target`. `R′ = R` outside the window.
pub fn shrink_profile(
    profile: &Arc<RadialProfile>,
    direction: f64,
    half_width: f64,
    target: f64,
) -> Result<RadialProfile> {
    let a = profile.area();
    if !(target > 0.0) || target > a {
        return Err(Error::Precondition(format!(
            "target area must lie in (0, {a}], got {target}"
        )));
    }
    if target == a {
        return Ok((**profile).clone());
    }
    let build = |amp: f64| RadialProfile::dented(profile.clone(), direction, half_width, amp);
    let deepest = build(MAX_DENT_AMPLITUDE)?;
    if deepest.area() > target {
        return Err(Error::Infeasible(format!(
            "a window of half-width {half_width} can remove at most {:.6} of area, {:.6} requested",
            a - deepest.area(),
            a - target
        )));
    }
    let (mut lo, mut hi) = (0.0, MAX_DENT_AMPLITUDE);
    let mut best = deepest;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let p = build(mid)?;
        let err = p.area() - target;
        if err > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        best = p;
        if err.abs() <= 1e-13 * a || hi - lo <= f64::EPSILON {
            break;
        }
    }
    Ok(best)
}

/// Inputs of the boundary-minimality experiment.
#[derive(Clone, Debug)]
pub struct BoundaryMinimalConfig {
    /// Factors of a common area `a`.
    pub factors: Vec<Arc<RadialProfile>>,
    /// Ambient point whose factor angles centre the windows; every block must be nonzero.
    pub point: Vec<f64>,
    /// Angular half-width of every window.
    pub half_width: f64,
    /// Common area `a′ < a` of the shrunken factors.
    pub target_area: f64,
    /// Thickness of the boundary shell in `U`; defaults to the deepest dent.
    pub eta: Option<f64>,
    /// Samples from the interior and from the boundary (each).
    pub samples: usize,
    pub seed: u64,
}

/// Outcome of the boundary-minimality experiment.
#[derive(Clone, Debug)]
pub struct BoundaryMinimalReport {
    pub area: f64,
    pub shrunk_areas: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub eta: f64,
    pub interior_samples: usize,
    pub boundary_samples: usize,
    /// Samples that fell in `U` and were skipped.
    pub in_window: usize,
    pub violations: usize,
    /// Up to ten offending samples.
    pub offenders: Vec<Vec<f64>>,
    pub c1_original: f64,
    pub c1_shrunk: f64,
}

impl BoundaryMinimalReport {
    pub fn capacity_gap(&self) -> f64 {
        self.c1_original - self.c1_shrunk
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && self.capacity_gap() > 0.0
    }
}

/// Shrinks every factor inside a window around the matching block of the
/// configured point, then samples the original product and checks that
/// every sample outside
///
/// ```text
///     U = { x : some θᵢ(x) lies in window i and G(x) > 1 − η }
/// ```
///
/// lies in the shrunken product. Outside every window the gauges agree; inside,
/// `G′ ≤ G/(1 − A)` with `A` the deepest dent, so `η ≥ A` makes the
/// containment hold.
pub fn boundary_minimal_experiment(cfg: &BoundaryMinimalConfig) -> Result<BoundaryMinimalReport> {
    let n = cfg.factors.len();
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one factor".into()));
    }
    if cfg.point.len() != 2 * n {
        return Err(Error::DimensionMismatch {
            expected: 2 * n,
            got: cfg.point.len(),
        });
    }
    let a = cfg.factors[0].area();
    if cfg.factors.iter().any(|w| (w.area() - a).abs() > 1e-10 * a) {
        return Err(Error::Precondition(format!(
            "factors must share one area, got {:?}",
            cfg.factors.iter().map(|w| w.area()).collect::<Vec<_>>()
        )));
    }
    if !(cfg.target_area < a) {
        return Err(Error::Precondition(format!(
            "shrunken area {} must be smaller than {a}",
            cfg.target_area
        )));
    }
    let mut directions = Vec::with_capacity(n);
    for i in 0..n {
        let z = [cfg.point[2 * i], cfg.point[2 * i + 1]];
        if z == [0.0, 0.0] {
            return Err(Error::Precondition(format!(
                "block {} of the point is zero; the experiment needs every block nonzero",
                i + 1
            )));
        }
        directions.push(polar_angle(z));
    }
    if cfg.samples == 0 {
        return Err(Error::InvalidParameter(
            "sample count must be positive".into(),
        ));
    }

    let shrunk: Vec<Arc<RadialProfile>> = cfg
        .factors
        .iter()
        .zip(&directions)
        .map(|(w, &d)| shrink_profile(w, d, cfg.half_width, cfg.target_area).map(Arc::new))
        .collect::<Result<_>>()?;
    // recover each amplitude from the radius at the window centre
    let amplitudes: Vec<f64> = cfg
        .factors
        .iter()
        .zip(&shrunk)
        .zip(&directions)
        .map(|((w, s), &d)| 1.0 - s.radius(d) / w.radius(d))
        .collect();
    let deepest = amplitudes.iter().copied().fold(0.0, f64::max);
    let eta = cfg.eta.unwrap_or(deepest);
    if !(eta >= deepest) || eta >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "η = {eta} must lie in [{deepest:.6}, 1) to cover the dents"
        )));
    }

    let original = ProductDomain::from_profiles(cfg.factors.clone())?;
    let reduced = ProductDomain::from_profiles(shrunk.clone())?;
    let half_width = cfg.half_width;
    let in_window = |x: &[f64]| -> bool {
        if original.gauge_unchecked(x) <= 1.0 - eta {
            return false;
        }
        (0..n).any(|i| {
            let z = [x[2 * i], x[2 * i + 1]];
            if z == [0.0, 0.0] {
                return false;
            }
            let mut d = (polar_angle(z) - directions[i]).rem_euclid(std::f64::consts::TAU);
            if d > PI {
                d -= std::f64::consts::TAU;
            }
            d.abs() < half_width
        })
    };

    let mut tally = Tally::default();
    let check = |x: &[f64], t: &mut Tally| {
        if in_window(x) {
            t.in_window += 1;
        } else if reduced.gauge_unchecked(x) > 1.0 + 1e-12 {
            t.violations += 1;
            if t.offenders.len() < 10 {
                t.offenders.push(x.to_vec());
            }
        }
    };

    let hw = original.half_widths();
    let dim = original.dim();
    let interior = par_batches(cfg.samples, cfg.seed, |rng, _, count| {
        let mut t = Tally::default();
        let mut x = vec![0.0; dim];
        let mut got = 0;
        while got < count {
            for (v, h) in x.iter_mut().zip(&hw) {
                *v = (2.0 * rng.random::<f64>() - 1.0) * h;
            }
            if original.gauge_unchecked(&x) <= 1.0 {
                got += 1;
                check(&x, &mut t);
            }
        }
        t
    });
    for t in interior {
        tally.merge(t);
    }
    let boundary = original.boundary_sample(None, cfg.samples, cfg.seed ^ 0xb0_0d)?;
    for x in &boundary {
        check(x, &mut tally);
    }

    let c1_original = gh_capacities(&original.ellipsoid_model_areas().expect("p = 2"), 1)?.first();
    let shrunk_areas = reduced.ellipsoid_model_areas().expect("p = 2");
    let c1_shrunk = gh_capacities(&shrunk_areas, 1)?.first();
    Ok(BoundaryMinimalReport {
        area: a,
        shrunk_areas,
        amplitudes,
        eta,
        interior_samples: cfg.samples,
        boundary_samples: boundary.len(),
        in_window: tally.in_window,
        violations: tally.violations,
        offenders: tally.offenders,
        c1_original,
        c1_shrunk,
    })
}

#[derive(Default)]
struct Tally {
    in_window: usize,
    violations: usize,
    offenders: Vec<Vec<f64>>,
}

impl Tally {
    fn merge(&mut self, other: Tally) {
        self.in_window += other.in_window;
        self.violations += other.violations;
        let room = 10usize.saturating_sub(self.offenders.len());
        self.offenders
            .extend(other.offenders.into_iter().take(room));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_factor_table_is_multiples() {
        let t = gh_capacities(&[1.0], 5).unwrap();
        assert_eq!(t.values, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn merge_of_one_and_two() {
        let t = gh_capacities(&[1.0, 2.0], 4).unwrap();
        assert_eq!(t.values, vec![1.0, 2.0, 2.0, 3.0]);
        assert_eq!(t.get(3), Some(2.0));
        assert_eq!(t.get(0), None);
    }

    #[test]
    fn zoll_cases() {
        assert!(zoll_check(&[0.7, 0.7, 0.7]).unwrap().zoll);
        let r = zoll_check(&[1.0, 2.0]).unwrap();
        assert!(!r.zoll);
        assert_eq!((r.c1, r.cn), (1.0, 2.0));
        let r = zoll_check(&[1.0, 1.0, 2.0]).unwrap();
        assert_eq!((r.c1, r.cn, r.zoll), (1.0, 2.0, false));
    }

    #[test]
    fn bad_capacity_inputs() {
        assert!(gh_capacities(&[1.0], 0).is_err());
        assert!(gh_capacities(&[], 3).is_err());
        assert!(gh_capacities(&[1.0, -1.0], 3).is_err());
    }

    #[test]
    fn shrink_disk_to_nine_tenths() {
        let d = Arc::new(RadialProfile::disk(PI).unwrap());
        let s = shrink_profile(&d, 0.0, PI / 4.0, 0.9 * PI).unwrap();
        assert!((s.area() - 0.9 * PI).abs() < 1e-8);
        for k in 0..4096 {
            let th = std::f64::consts::TAU * k as f64 / 4096.0;
            assert!(s.radius(th) <= d.radius(th));
            if (th - PI).abs() < PI / 2.0 {
                assert_eq!(s.radius(th), d.radius(th));
            }
        }
    }

    #[test]
    fn shrink_identity_and_infeasible() {
        let d = Arc::new(RadialProfile::disk(PI).unwrap());
        assert_eq!(shrink_profile(&d, 1.0, 0.5, PI).unwrap().area(), PI);
        assert!(matches!(
            shrink_profile(&d, 0.0, 0.01, 0.5 * PI),
            Err(Error::Infeasible(_))
        ));
        assert!(shrink_profile(&d, 0.0, 0.5, 1.1 * PI).is_err());
    }

    #[test]
    fn experiment_rejects_zero_block_and_equal_area() {
        let d = Arc::new(RadialProfile::disk(1.0).unwrap());
        let mut cfg = BoundaryMinimalConfig {
            factors: vec![d.clone(), d],
            point: vec![0.3, 0.0, 0.0, 0.0],
            half_width: 0.8,
            target_area: 0.9,
            eta: None,
            samples: 100,
            seed: 1,
        };
        assert!(matches!(
            boundary_minimal_experiment(&cfg),
            Err(Error::Precondition(_))
        ));
        cfg.point = vec![0.3, 0.0, 0.0, 0.3];
        cfg.target_area = 1.0;
        assert!(matches!(
            boundary_minimal_experiment(&cfg),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn experiment_on_disks_contains() {
        let d = Arc::new(RadialProfile::disk(1.0).unwrap());
        let cfg = BoundaryMinimalConfig {
            factors: vec![d.clone(), d],
            point: vec![0.3, 0.1, -0.2, 0.3],
            half_width: 1.0,
            target_area: 0.9,
            eta: None,
            samples: 5000,
            seed: 3,
        };
        let r = boundary_minimal_experiment(&cfg).unwrap();
        assert_eq!(r.violations, 0, "{:?}", r.offenders);
        assert!(r.in_window > 0);
        assert!((r.capacity_gap() - 0.1).abs() < 1e-8);
    }
}
