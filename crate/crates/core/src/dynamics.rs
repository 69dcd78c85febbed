//! Characteristic flows on star-shaped boundaries and their 2-products.
//!
//! On a planar star-shaped boundary the flow of `H = g²` keeps the gauge
//! level fixed and moves the polar angle so that the swept sector area of the
//! unit domain grows at unit rate:
//!
//! ```text
//!     S(θ(t)) = S(θ(0)) + t,      g(z(t)) = g(z(0)).
//! ```
//!
//! The period is therefore the enclosed area. For a 2-product the defining
//! Hamiltonian is the sum of the factor Hamiltonians, so the flow runs
//! independently, at full speed, in every factor.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use num_integer::Integer;
use num_rational::Rational64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry2d::{polar_angle, wrap_angle, EllipsoidSpec, RadialProfile};
use crate::product::{Factor, ProductDomain};

/// Flow of `H = g²` on `ℝ² ∖ {0}`, time measured in area units. Fixes 0.
pub fn char_flow_2d(profile: &RadialProfile, z: [f64; 2], t: f64) -> [f64; 2] {
    if z == [0.0, 0.0] {
        return z;
    }
    let level = profile.gauge(z);
    let theta = profile.inverse_sector_area(profile.sector_area(polar_angle(z)) + t);
    let r = level * profile.radius(theta);
    [r * theta.cos(), r * theta.sin()]
}

/// Ellipsoid Reeb flow `zᵢ ↦ e^{i2πt/aᵢ} zᵢ`.
pub fn reeb_ellipsoid(spec: &EllipsoidSpec, z: &[f64], t: f64) -> Result<Vec<f64>> {
    let areas = spec.areas();
    if z.len() != 2 * areas.len() {
        return Err(Error::DimensionMismatch {
            expected: 2 * areas.len(),
            got: z.len(),
        });
    }
    let mut out = vec![0.0; z.len()];
    for (i, a) in areas.iter().enumerate() {
        let (s, c) = (TAU * t / a).sin_cos();
        let (x, y) = (z[2 * i], z[2 * i + 1]);
        out[2 * i] = c * x - s * y;
        out[2 * i + 1] = s * x + c * y;
    }
    Ok(out)
}

/// A planar factor of a 2-product, seen by the flow.
#[derive(Clone, Debug)]
enum FlowFactor {
    /// Round disk, flowed by exact rotation.
    Round {
        area: f64,
    },
    Profile(Arc<RadialProfile>),
}

impl FlowFactor {
    fn area(&self) -> f64 {
        match self {
            Self::Round { area } => *area,
            Self::Profile(w) => w.area(),
        }
    }

    fn radius(&self, theta: f64) -> f64 {
        match self {
            Self::Round { area } => (area / PI).sqrt(),
            Self::Profile(w) => w.radius(theta),
        }
    }

    fn gauge(&self, z: [f64; 2]) -> f64 {
        match self {
            Self::Round { area } => (PI * (z[0] * z[0] + z[1] * z[1]) / area).sqrt(),
            Self::Profile(w) => w.gauge(z),
        }
    }

    /// Angle reached from `theta` after time `t`.
    fn advance(&self, theta: f64, t: f64) -> f64 {
        match self {
            Self::Round { area } => wrap_angle(theta + TAU * t / area),
            Self::Profile(w) => wrap_angle(w.inverse_sector_area(w.sector_area(theta) + t)),
        }
    }

    /// Angle reached from the ray `θ = 0` after time `s ∈ [0, a)`.
    fn angle_after(&self, s: f64) -> f64 {
        match self {
            Self::Round { area } => wrap_angle(TAU * s / area),
            Self::Profile(w) => wrap_angle(w.inverse_sector_area(s)),
        }
    }
}

/// A boundary point of a 2-product in per-factor `(angle, level)` form.
///
/// Factor `i` sits at `zᵢ = λᵢ Rᵢ(θᵢ) e^{iθᵢ}`; on the boundary `Σ λᵢ² = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowPoint {
    pub angles: Vec<f64>,
    pub levels: Vec<f64>,
}

impl FlowPoint {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// `Σ λᵢ²`, the squared product gauge.
    pub fn level_norm_sq(&self) -> f64 {
        self.levels.iter().map(|l| l * l).sum()
    }
}

/// The characteristic flow of a 2-product, with ellipsoid blocks and nested
/// 2-products flattened into planar factors.
#[derive(Clone, Debug)]
pub struct ProductFlow {
    factors: Vec<FlowFactor>,
}

impl ProductFlow {
    /// Rejects `p ≠ 2`: the flow only splits for 2-products.
    pub fn new(domain: &ProductDomain) -> Result<Self> {
        let mut factors = Vec::new();
        flatten(domain, &mut factors)?;
        Ok(Self { factors })
    }

    /// Flow of the 2-product of the given planar profiles.
    pub fn from_profiles(profiles: &[Arc<RadialProfile>]) -> Self {
        Self {
            factors: profiles.iter().cloned().map(FlowFactor::Profile).collect(),
        }
    }

    /// Number of planar factors.
    pub fn factor_count(&self) -> usize {
        self.factors.len()
    }

    /// Ambient real dimension.
    pub fn dim(&self) -> usize {
        2 * self.factors.len()
    }

    /// Factor areas, which are also the areas of the matching ellipsoid.
    pub fn areas(&self) -> Vec<f64> {
        self.factors.iter().map(FlowFactor::area).collect()
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            })
        }
    }

    pub fn to_flow_point(&self, x: &[f64]) -> Result<FlowPoint> {
        self.check_dim(x.len())?;
        let (angles, levels) = self
            .factors
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let z = [x[2 * i], x[2 * i + 1]];
                if z == [0.0, 0.0] {
                    (0.0, 0.0)
                } else {
                    (polar_angle(z), f.gauge(z))
                }
            })
            .unzip();
        Ok(FlowPoint { angles, levels })
    }

    pub fn to_ambient(&self, p: &FlowPoint) -> Result<Vec<f64>> {
        self.check_dim(2 * p.len())?;
        let mut out = Vec::with_capacity(self.dim());
        for ((f, &th), &l) in self.factors.iter().zip(&p.angles).zip(&p.levels) {
            let r = l * f.radius(th);
            out.push(r * th.cos());
            out.push(r * th.sin());
        }
        Ok(out)
    }

    /// `Φᵗ` in flow coordinates: every angle advances by its own sector-area
    /// law, levels stay put.
    pub fn flow(&self, p: &FlowPoint, t: f64) -> Result<FlowPoint> {
        self.check_dim(2 * p.len())?;
        let angles = self
            .factors
            .iter()
            .zip(&p.angles)
            .zip(&p.levels)
            .map(|((f, &th), &l)| if l == 0.0 { th } else { f.advance(th, t) })
            .collect();
        Ok(FlowPoint {
            angles,
            levels: p.levels.clone(),
        })
    }

    /// `Φᵗ` on ambient coordinates.
    pub fn flow_ambient(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let p = self.to_flow_point(x)?;
        self.to_ambient(&self.flow(&p, t)?)
    }

    /// The conjugacy `Ψ: ∂E(a₁,…,aₙ) → ∂(W₁ ×₂ ⋯ ×₂ Wₙ)`.
    ///
    /// Writing `zᵢ = rᵢ e^{i2πθᵢ}`, factor `i` is sent to `Φ^{θᵢaᵢ}(bᵢ)` where
    /// `bᵢ = λᵢ Rᵢ(0)` is the point of level `λᵢ = √(π rᵢ²/aᵢ)` on the ray
    /// `θ = 0`. This base-point normalization puts the image on the product
    /// boundary; `Ψ` then agrees with the factor-wise disk map on `∂E`.
    pub fn conjugacy_map(&self, z: &[f64]) -> Result<FlowPoint> {
        self.check_dim(z.len())?;
        let areas = self.areas();
        let mut angles = Vec::with_capacity(areas.len());
        let mut levels = Vec::with_capacity(areas.len());
        for (i, f) in self.factors.iter().enumerate() {
            let zi = [z[2 * i], z[2 * i + 1]];
            let r2 = zi[0] * zi[0] + zi[1] * zi[1];
            levels.push((PI * r2 / areas[i]).sqrt());
            let frac = if r2 == 0.0 {
                0.0
            } else {
                polar_angle(zi) / TAU
            };
            angles.push(f.angle_after(frac * areas[i]));
        }
        let norm: f64 = levels.iter().map(|l| l * l).sum();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::Precondition(format!(
                "point is not on the ellipsoid boundary (Σπ|zᵢ|²/aᵢ = {norm})"
            )));
        }
        Ok(FlowPoint { angles, levels })
    }

    /// `|Ψ(Reebᵗ z) − Φᵗ(Ψ z)|` in ambient coordinates.
    pub fn conjugacy_residual(&self, z: &[f64], t: f64) -> Result<f64> {
        let spec = EllipsoidSpec::new(self.areas())?;
        let lhs = self.to_ambient(&self.conjugacy_map(&reeb_ellipsoid(&spec, z, t)?)?)?;
        let rhs = self.to_ambient(&self.flow(&self.conjugacy_map(z)?, t)?)?;
        Ok(lhs
            .iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    /// Least `t ≤ bound·max aᵢ` closing the orbit: `t/aᵢ` must be an integer
    /// (to within `tolerance` in time units) for every factor with `λᵢ > 0`.
    pub fn orbit_period(&self, p: &FlowPoint, tolerance: f64, bound: u64) -> Result<OrbitPeriod> {
        self.check_dim(2 * p.len())?;
        let active: Vec<f64> = self
            .factors
            .iter()
            .zip(&p.levels)
            .filter(|(_, &l)| l > 0.0)
            .map(|(f, _)| f.area())
            .collect();
        Ok(float_period(&active, tolerance, bound))
    }

    /// Checks that every sampled boundary point closes up at time `a`.
    pub fn systole_check(&self, samples: usize, seed: u64) -> Result<SystoleReport> {
        let areas = self.areas();
        let a = areas[0];
        if areas.iter().any(|x| (x - a).abs() > 1e-10 * a.max(1.0)) {
            return Err(Error::Precondition(format!(
                "foliation by systoles needs equal factor areas, got {areas:?}"
            )));
        }
        let boundary = ProductDomain::from_profiles(
            self.factors
                .iter()
                .map(|f| match f {
                    FlowFactor::Round { area } => RadialProfile::disk(*area).map(Arc::new),
                    FlowFactor::Profile(w) => Ok(w.clone()),
                })
                .collect::<Result<_>>()?,
        )?
        .boundary_sample(None, samples, seed)?;
        let results: Vec<(f64, f64)> = boundary
            .par_iter()
            .map(|x| -> Result<(f64, f64)> {
                let p = self.to_flow_point(x)?;
                let period_dev = match self.orbit_period(&p, 1e-8 * a, 1)? {
                    OrbitPeriod::Closed(t) => (t - a).abs(),
                    OrbitPeriod::NoneWithinBound => f64::INFINITY,
                };
                let back = self.to_ambient(&self.flow(&p, a)?)?;
                let ret = back
                    .iter()
                    .zip(x)
                    .map(|(u, v)| (u - v) * (u - v))
                    .sum::<f64>()
                    .sqrt();
                Ok((period_dev, ret))
            })
            .collect::<Result<_>>()?;
        let worst_period_deviation = results.iter().map(|r| r.0).fold(0.0, f64::max);
        let worst_return_distance = results.iter().map(|r| r.1).fold(0.0, f64::max);
        Ok(SystoleReport {
            area: a,
            samples,
            worst_period_deviation,
            worst_return_distance,
            passed: worst_period_deviation <= 1e-8 && worst_return_distance <= 1e-8,
        })
    }
}

fn flatten(domain: &ProductDomain, out: &mut Vec<FlowFactor>) -> Result<()> {
    if domain.exponent() != 2.0 {
        return Err(Error::Precondition(format!(
            "the characteristic flow splits only for 2-products, got p = {}",
            domain.exponent()
        )));
    }
    for f in domain.factors() {
        match f {
            Factor::Planar(w) => out.push(FlowFactor::Profile(w.clone())),
            Factor::Ellipsoid(e) => {
                out.extend(e.areas().iter().map(|&area| FlowFactor::Round { area }))
            }
            Factor::Product(p) => flatten(p, out)?,
        }
    }
    Ok(())
}

/// `Φᵗ` of the 2-product `domain` applied to a boundary [`FlowPoint`].
pub fn product_flow(domain: &ProductDomain, p: &FlowPoint, t: f64) -> Result<FlowPoint> {
    ProductFlow::new(domain)?.flow(p, t)
}

/// [`ProductFlow::conjugacy_map`] for planar factors.
pub fn conjugacy_map(factors: &[Arc<RadialProfile>], z: &[f64]) -> Result<FlowPoint> {
    ProductFlow::from_profiles(factors).conjugacy_map(z)
}

/// [`ProductFlow::conjugacy_residual`] for planar factors.
pub fn conjugacy_residual(factors: &[Arc<RadialProfile>], z: &[f64], t: f64) -> Result<f64> {
    ProductFlow::from_profiles(factors).conjugacy_residual(z, t)
}

/// [`ProductFlow::orbit_period`] for a 2-product domain.
pub fn orbit_period(
    domain: &ProductDomain,
    p: &FlowPoint,
    tolerance: f64,
    bound: u64,
) -> Result<OrbitPeriod> {
    ProductFlow::new(domain)?.orbit_period(p, tolerance, bound)
}

/// [`ProductFlow::systole_check`] for a 2-product domain.
pub fn is_foliated_by_systoles(
    domain: &ProductDomain,
    samples: usize,
    seed: u64,
) -> Result<SystoleReport> {
    ProductFlow::new(domain)?.systole_check(samples, seed)
}

/// Outcome of a period search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OrbitPeriod {
    Closed(f64),
    NoneWithinBound,
}

impl fmt::Display for OrbitPeriod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Closed(t) => write!(f, "{t}"),
            Self::NoneWithinBound => f.write_str("none within bound"),
        }
    }
}

/// Every common period is a multiple of the largest area, so scan those.
fn float_period(active: &[f64], tolerance: f64, bound: u64) -> OrbitPeriod {
    let Some(top) = active.iter().copied().reduce(f64::max) else {
        // a point with no active factor does not move
        return OrbitPeriod::Closed(0.0);
    };
    for m in 1..=bound.max(1) {
        let t = m as f64 * top;
        let closes = active.iter().all(|&a| {
            let k = (t / a).round();
            k >= 1.0 && (t - k * a).abs() <= tolerance
        });
        if closes {
            return OrbitPeriod::Closed(t);
        }
    }
    OrbitPeriod::NoneWithinBound
}

/// Exact common period of rational areas: `lcm(pᵢ/qᵢ) = lcm(pᵢ)/gcd(qᵢ)`,
/// or `None` when it exceeds `bound · max aᵢ`.
pub fn rational_period(areas: &[Rational64], bound: u64) -> Result<Option<Rational64>> {
    if areas.is_empty() {
        return Ok(Some(Rational64::from_integer(0)));
    }
    if areas.iter().any(|a| *a <= Rational64::from_integer(0)) {
        return Err(Error::InvalidParameter("areas must be positive".into()));
    }
    let overflow = || Error::InvalidParameter("rational period overflows 64 bits".into());
    let mut num = *areas[0].numer();
    let mut den = *areas[0].denom();
    for a in &areas[1..] {
        let g = num.gcd(a.numer());
        num = (num / g).checked_mul(*a.numer()).ok_or_else(overflow)?;
        den = den.gcd(a.denom());
    }
    let period = Rational64::new(num, den);
    let top = areas.iter().max().copied().expect("nonempty");
    // period ≤ bound·top, cross-multiplied in 128 bits
    let lhs = i128::from(*period.numer()) * i128::from(*top.denom());
    let rhs = i128::from(bound) * i128::from(*top.numer()) * i128::from(*period.denom());
    Ok((lhs <= rhs).then_some(period))
}

/// Result of the systole check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystoleReport {
    pub area: f64,
    pub samples: usize,
    /// `max |period − a|` over the samples (infinite if some orbit failed to close).
    pub worst_period_deviation: f64,
    /// `max |Φᵃ(x) − x|`.
    pub worst_return_distance: f64,
    pub passed: bool,
}

/// Integrates `ż = i∇H`, `H = g²`, with classical RK4 and a central-difference
/// gradient. A validation path for the closed-form flow on C¹ profiles.
pub fn hamiltonian_ode_flow(
    profile: &RadialProfile,
    z: [f64; 2],
    t: f64,
    steps: usize,
) -> [f64; 2] {
    let h_fd = 1e-6 * z[0].hypot(z[1]).max(1e-300);
    let field = |p: [f64; 2]| -> [f64; 2] {
        let h = |q: [f64; 2]| {
            let g = profile.gauge(q);
            g * g
        };
        let hx = (h([p[0] + h_fd, p[1]]) - h([p[0] - h_fd, p[1]])) / (2.0 * h_fd);
        let hy = (h([p[0], p[1] + h_fd]) - h([p[0], p[1] - h_fd])) / (2.0 * h_fd);
        // i·(hx + i hy) = −hy + i hx
        [-hy, hx]
    };
    let dt = t / steps as f64;
    let mut p = z;
    for _ in 0..steps {
        let k1 = field(p);
        let k2 = field([p[0] + 0.5 * dt * k1[0], p[1] + 0.5 * dt * k1[1]]);
        let k3 = field([p[0] + 0.5 * dt * k2[0], p[1] + 0.5 * dt * k2[1]]);
        let k4 = field([p[0] + dt * k3[0], p[1] + dt * k3[1]]);
        for d in 0..2 {
            p[d] += dt / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry2d::{Interpolation, ProfileSource, DEFAULT_GRID};

    fn square() -> Arc<RadialProfile> {
        Arc::new(
            RadialProfile::new(
                ProfileSource::Polygon {
                    vertices: vec![[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]],
                },
                DEFAULT_GRID,
                Interpolation::Linear,
            )
            .unwrap(),
        )
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn disk_flow_is_rotation() {
        let w = RadialProfile::disk(2.0).unwrap();
        let z = [0.3, -0.2];
        let t = 0.37;
        let got = char_flow_2d(&w, z, t);
        let (s, c) = (TAU * t / 2.0).sin_cos();
        let want = [c * z[0] - s * z[1], s * z[0] + c * z[1]];
        assert!(dist(&got, &want) < 1e-12);
    }

    #[test]
    fn square_flow_follows_sector_area() {
        let w = square();
        let got = char_flow_2d(&w, [1.0, 0.0], 1.0);
        // starting on the right edge, R = 1/cos θ, so S(θ) = ½ tan θ;
        // S = 1 is reached past the corner at θ = π/4 (S = ½), on the top
        // edge where R = 1/sin θ and S(θ) = ½ + ½(1 − cot θ), so θ = π/2
        let want = [0.0, 1.0];
        assert!(dist(&got, &want) < 1e-12, "{got:?}");
    }

    #[test]
    fn period_is_area_and_origin_fixed() {
        let w = square();
        let b = w.boundary_point(1.1);
        let back = char_flow_2d(&w, b, w.area());
        assert!(dist(&back, &b) < 1e-12);
        assert_eq!(char_flow_2d(&w, [0.0, 0.0], 3.0), [0.0, 0.0]);
    }

    #[test]
    fn reeb_half_turn() {
        let e = EllipsoidSpec::new(vec![2.0, 3.0]).unwrap();
        let z = reeb_ellipsoid(&e, &[0.5, 0.0, 0.1, 0.2], 1.0).unwrap();
        assert!((z[0] + 0.5).abs() < 1e-15 && z[1].abs() < 1e-15);
        let z = reeb_ellipsoid(&e, &[0.5, 0.0, 0.1, 0.2], 3.0).unwrap();
        assert!((z[2] - 0.1).abs() < 1e-15 && (z[3] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn non_quadratic_exponent_rejected() {
        let d = ProductDomain::new(
            vec![Factor::Planar(square()), Factor::Planar(square())],
            3.0,
        )
        .unwrap();
        assert!(matches!(ProductFlow::new(&d), Err(Error::Precondition(_))));
    }

    #[test]
    fn ellipsoid_blocks_flatten_to_rotations() {
        let d = ProductDomain::ellipsoid(vec![1.0, 2.0]).unwrap();
        let f = ProductFlow::new(&d).unwrap();
        assert_eq!(f.areas(), vec![1.0, 2.0]);
        let x = [0.3, 0.1, -0.2, 0.4];
        let got = f.flow_ambient(&x, 0.25).unwrap();
        let want = reeb_ellipsoid(&EllipsoidSpec::new(vec![1.0, 2.0]).unwrap(), &x, 0.25).unwrap();
        assert!(dist(&got, &want) < 1e-14);
    }

    #[test]
    fn conjugacy_is_identity_for_disks() {
        let disks = vec![
            Arc::new(RadialProfile::disk(1.0).unwrap()),
            Arc::new(RadialProfile::disk(2.0).unwrap()),
        ];
        let f = ProductFlow::from_profiles(&disks);
        let l1: f64 = 0.6;
        let z = [
            l1 * (1.0 / PI).sqrt() * 0.3_f64.cos(),
            l1 * (1.0 / PI).sqrt() * 0.3_f64.sin(),
            0.8 * (2.0 / PI).sqrt() * 2.0_f64.cos(),
            0.8 * (2.0 / PI).sqrt() * 2.0_f64.sin(),
        ];
        let img = f.to_ambient(&f.conjugacy_map(&z).unwrap()).unwrap();
        assert!(dist(&img, &z) < 1e-12);
    }

    #[test]
    fn conjugacy_rejects_points_off_the_boundary() {
        let f = ProductFlow::from_profiles(&[square(), square()]);
        assert!(f.conjugacy_map(&[0.1, 0.0, 0.0, 0.1]).is_err());
    }

    #[test]
    fn float_period_cases() {
        assert_eq!(float_period(&[2.0], 1e-12, 10), OrbitPeriod::Closed(2.0));
        assert_eq!(
            float_period(&[1.0, 1.5], 1e-12, 10),
            OrbitPeriod::Closed(3.0)
        );
        assert_eq!(
            float_period(&[1.0, 2f64.sqrt()], 1e-8, 1000),
            OrbitPeriod::NoneWithinBound
        );
    }

    #[test]
    fn rational_period_is_lcm() {
        let r = |n, d| Rational64::new(n, d);
        assert_eq!(
            rational_period(&[r(1, 2), r(1, 3)], 10).unwrap(),
            Some(r(1, 1))
        );
        assert_eq!(
            rational_period(&[r(2, 3), r(3, 4)], 10).unwrap(),
            Some(r(6, 1))
        );
        assert_eq!(rational_period(&[r(1, 1), r(1000, 999)], 10).unwrap(), None);
    }

    #[test]
    fn unequal_areas_rejected_for_systoles() {
        let d = ProductDomain::ellipsoid(vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            is_foliated_by_systoles(&d, 10, 1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn ode_matches_closed_form_on_smooth_profile() {
        let w = RadialProfile::cosine(PI, 0.5).unwrap();
        let z = [
            0.9 * w.radius(0.4) * 0.4_f64.cos(),
            0.9 * w.radius(0.4) * 0.4_f64.sin(),
        ];
        let t = w.area();
        let ode = hamiltonian_ode_flow(&w, z, t, 4000);
        let exact = char_flow_2d(&w, z, t);
        assert!(dist(&ode, &exact) < 1e-4, "{ode:?} vs {exact:?}");
    }
}
