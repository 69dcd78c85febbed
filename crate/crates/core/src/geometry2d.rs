//! Star-shaped planar domains encoded by their boundary radius function.
//!
//! A compact domain `W ⊂ ℝ²` that is star-shaped with respect to the origin,
//! with every ray meeting `∂W` exactly once, is described by `R(θ) > 0`:
//!
//! ```text
//!     W = { r e^{iθ} : 0 ≤ r ≤ R(θ) }
//!     g(z) = |z| / R(arg z)                  (gauge, W = {g ≤ 1})
//!     S(θ) = ∫₀^θ ½ R(u)² du                 (cumulative sector area)
//! ```
//!
//! `S` is the exact antiderivative of `½R²` for the interpolant, so
//! `S'(θ) = ½R(θ)²` holds to rounding. Every area-preserving map and flow in
//! this crate is built on top of `S` and its inverse.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fractal::FractalFunction;

/// Default number of uniform angular samples.
pub const DEFAULT_GRID: usize = 4096;

/// Minimum accepted number of uniform angular samples.
pub const MIN_GRID: usize = 16;

// Gauss-Legendre nodes and weights on [-1, 1].
const GL4_X: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_W: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];
const GL8_X: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL8_W: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Wraps an angle into `[0, 2π)`.
#[inline]
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Polar angle of `z` in `[0, 2π)`, counterclockwise from the positive x-axis.
#[inline]
pub fn polar_angle(z: [f64; 2]) -> f64 {
    wrap_angle(z[1].atan2(z[0]))
}

/// Interpolation of the sampled radius function between grid angles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interpolation {
    Linear,
    CubicPeriodic,
}

impl std::str::FromStr for Interpolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "cubic" | "cubic-periodic" => Ok(Self::CubicPeriodic),
            other => Err(Error::InvalidParameter(format!(
                "unknown interpolation '{other}' (expected linear or cubic-periodic)"
            ))),
        }
    }
}

/// Where the boundary radius comes from.
#[derive(Clone, Debug)]
pub enum ProfileSource {
    /// Raw radii at the uniform angles `2πj/N`; `N` is the sample count.
    Samples(Vec<f64>),
    /// Round disk of the given area.
    Disk { area: f64 },
    /// `R(θ)² = (area/π)(1 + amplitude·cos θ)`, a smooth domain of the given area.
    Cosine { area: f64, amplitude: f64 },
    /// Polygon star-shaped with respect to the origin. Represented exactly.
    Polygon { vertices: Vec<[f64; 2]> },
    /// `R(θ) = r0 (1 + amplitude · f(θ/2π))` for one of the fractal families.
    Fractal {
        r0: f64,
        amplitude: f64,
        function: FractalFunction,
    },
}

/// A maximal angular interval on which `R` is smooth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Piece {
    index: usize,
    pub(crate) lo: f64,
    pub(crate) hi: f64,
}

/// Polygon edge between consecutive vertices, in polar form `R(θ) = d / cos(θ − β)`.
#[derive(Clone, Copy, Debug)]
struct Edge {
    start: f64,
    end: f64,
    dist: f64,
    foot: f64,
}

impl Edge {
    #[inline]
    fn radius(&self, theta: f64) -> f64 {
        self.dist / (theta - self.foot).cos()
    }

    #[inline]
    fn radius_derivative(&self, theta: f64) -> f64 {
        let c = (theta - self.foot).cos();
        self.dist * (theta - self.foot).sin() / (c * c)
    }

    /// Sector area swept from `start` to `theta`.
    #[inline]
    fn partial(&self, theta: f64) -> f64 {
        0.5 * self.dist * self.dist * ((theta - self.foot).tan() - (self.start - self.foot).tan())
    }

    #[inline]
    fn partial_inverse(&self, s: f64) -> f64 {
        self.foot + (2.0 * s / (self.dist * self.dist) + (self.start - self.foot).tan()).atan()
    }
}

/// Raised-cosine bump removed multiplicatively from a base profile.
#[derive(Clone, Debug)]
struct Dent {
    center: f64,
    half_width: f64,
    amplitude: f64,
}

impl Dent {
    /// Multiplier `1 − A·b(θ)` and its derivative.
    fn factor(&self, theta: f64) -> (f64, f64) {
        let mut d = wrap_angle(theta - self.center);
        if d > PI {
            d -= TAU;
        }
        if d.abs() >= self.half_width {
            return (1.0, 0.0);
        }
        let k = PI / self.half_width;
        let bump = 0.5 * (1.0 + (k * d).cos());
        let dbump = -0.5 * k * (k * d).sin();
        (1.0 - self.amplitude * bump, -self.amplitude * dbump)
    }
}

#[derive(Clone, Debug)]
enum Shape {
    Sampled {
        samples: Vec<f64>,
        interp: Interpolation,
        // spline second derivatives (cubic only)
        curvature: Vec<f64>,
    },
    Polygon {
        vertices: Vec<[f64; 2]>,
        edges: Vec<Edge>,
        // sector area at each edge start, length edges + 1
        cum: Vec<f64>,
    },
    Dented {
        base: Arc<RadialProfile>,
        dent: Dent,
    },
}

/// A compact star-shaped planar domain, immutable after construction.
#[derive(Clone, Debug)]
pub struct RadialProfile {
    shape: Shape,
    n: usize,
    // S at uniform grid angles, length n + 1 (unused for polygons)
    cum: Vec<f64>,
    area: f64,
    smooth: bool,
    label: String,
    // (lower, upper) radius bounds
    extremes: (f64, f64),
}

impl RadialProfile {
    /// Builds a profile from a source on a grid of `n` uniform angles.
    ///
    /// Fractal sources always use linear interpolation. Polygon sources are
    /// represented exactly and ignore `interp`; `n` only sets the grid
    /// reported by [`RadialProfile::samples`].
    pub fn new(source: ProfileSource, n: usize, interp: Interpolation) -> Result<Self> {
        match source {
            ProfileSource::Samples(samples) => {
                let label = format!("samples(N={})", samples.len());
                Self::from_samples(samples, interp, false, label)
            }
            ProfileSource::Disk { area } => {
                check_positive("area", area)?;
                check_grid(n)?;
                let r = (area / PI).sqrt();
                let mut disk =
                    Self::from_samples(vec![r; n], interp, true, format!("disk(a={area})"))?;
                disk.pin_area(area);
                Ok(disk)
            }
            ProfileSource::Cosine { area, amplitude } => {
                check_positive("area", area)?;
                check_grid(n)?;
                if !(amplitude.abs() < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "cosine amplitude must lie in (-1, 1), got {amplitude}"
                    )));
                }
                let samples = (0..n)
                    .map(|j| {
                        let th = TAU * j as f64 / n as f64;
                        ((area / PI) * (1.0 + amplitude * th.cos())).sqrt()
                    })
                    .collect();
                Self::from_samples(
                    samples,
                    interp,
                    true,
                    format!("cosine(a={area}, amplitude={amplitude})"),
                )
            }
            ProfileSource::Polygon { vertices } => Self::polygon(&vertices, n),
            ProfileSource::Fractal {
                r0,
                amplitude,
                function,
            } => {
                check_positive("r0", r0)?;
                check_grid(n)?;
                let samples = (0..n)
                    .map(|j| r0 * (1.0 + amplitude * function.eval(j as f64 / n as f64)))
                    .collect();
                let label = format!("{}(r0={r0}, c={amplitude})", function.family_name());
                Self::from_samples(samples, Interpolation::Linear, false, label)
            }
        }
    }

    /// Round disk of area `area` on the default grid.
    pub fn disk(area: f64) -> Result<Self> {
        Self::new(
            ProfileSource::Disk { area },
            DEFAULT_GRID,
            Interpolation::CubicPeriodic,
        )
    }

    /// Smooth profile `R² = (area/π)(1 + amplitude·cos θ)` with cubic interpolation.
    pub fn cosine(area: f64, amplitude: f64) -> Result<Self> {
        Self::new(
            ProfileSource::Cosine { area, amplitude },
            DEFAULT_GRID,
            Interpolation::CubicPeriodic,
        )
    }

    /// Star-shaped polygon, represented exactly.
    pub fn from_polygon(vertices: &[[f64; 2]]) -> Result<Self> {
        Self::polygon(vertices, DEFAULT_GRID)
    }

    /// `R(θ) = r0(1 + c·W(θ/2π))` with the Weierstrass sum `W = Σ aⁿcos(2πbⁿx)`.
    pub fn weierstrass_disk(r0: f64, c: f64, a: f64, b: f64, terms: usize) -> Result<Self> {
        Self::fractal(r0, c, FractalFunction::weierstrass(a, b, terms)?)
    }

    /// Phase-shifted Weierstrass boundary; phases drawn from `seed`.
    pub fn hunt_disk(r0: f64, c: f64, a: f64, b: f64, terms: usize, seed: u64) -> Result<Self> {
        Self::fractal(
            r0,
            c,
            FractalFunction::weierstrass_phase_seeded(a, b, terms, seed)?,
        )
    }

    /// Xiao–Zhou boundary `R = r0(1 + c·f(θ/2π))`.
    pub fn xz_disk(r0: f64, c: f64, a: f64, alpha: f64, beta: f64, terms: usize) -> Result<Self> {
        Self::fractal(r0, c, FractalFunction::xiao_zhou(a, alpha, beta, terms)?)
    }

    fn fractal(r0: f64, amplitude: f64, function: FractalFunction) -> Result<Self> {
        Self::new(
            ProfileSource::Fractal {
                r0,
                amplitude,
                function,
            },
            DEFAULT_GRID,
            Interpolation::Linear,
        )
    }

    fn from_samples(
        samples: Vec<f64>,
        interp: Interpolation,
        smooth: bool,
        label: String,
    ) -> Result<Self> {
        let n = samples.len();
        check_grid(n)?;
        for (j, &r) in samples.iter().enumerate() {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::NonPositiveRadius {
                    angle: TAU * j as f64 / n as f64,
                    value: r,
                });
            }
        }
        let curvature = match interp {
            Interpolation::Linear => Vec::new(),
            Interpolation::CubicPeriodic => periodic_spline_curvature(&samples),
        };
        let mut profile = Self {
            shape: Shape::Sampled {
                samples,
                interp,
                curvature,
            },
            n,
            cum: Vec::new(),
            area: 0.0,
            smooth: smooth && interp == Interpolation::CubicPeriodic,
            label,
            extremes: (0.0, 0.0),
        };
        if interp == Interpolation::CubicPeriodic {
            // cubic overshoot between nodes can dip below zero
            let h = TAU / n as f64;
            for j in 0..n {
                for k in 1..8 {
                    let th = h * (j as f64 + k as f64 / 8.0);
                    let r = profile.radius(th);
                    if !(r > 0.0) {
                        return Err(Error::NonPositiveRadius {
                            angle: th,
                            value: r,
                        });
                    }
                }
            }
        }
        profile.build_table();
        profile.extremes = profile.compute_extremes();
        Ok(profile)
    }

    fn polygon(vertices: &[[f64; 2]], n: usize) -> Result<Self> {
        check_grid(n)?;
        if vertices.len() < 3 {
            return Err(Error::NotStarShaped(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        let mut verts = vertices.to_vec();
        let signed: f64 = (0..verts.len())
            .map(|i| cross(verts[i], verts[(i + 1) % verts.len()]))
            .sum();
        if signed < 0.0 {
            verts.reverse();
        }
        let m = verts.len();
        for (i, v) in verts.iter().enumerate() {
            if v[0] == 0.0 && v[1] == 0.0 {
                return Err(Error::NotStarShaped(format!("vertex {i} is the origin")));
            }
        }
        // rotate so the first vertex has the smallest polar angle
        let first = (0..m)
            .min_by(|&a, &b| polar_angle(verts[a]).total_cmp(&polar_angle(verts[b])))
            .unwrap_or(0);
        verts.rotate_left(first);

        let mut edges = Vec::with_capacity(m + 1);
        let mut start = polar_angle(verts[0]);
        let origin_angle = start;
        for i in 0..m {
            let p = verts[i];
            let q = verts[(i + 1) % m];
            let c = cross(p, q);
            if !(c > 0.0) {
                return Err(Error::NotStarShaped(format!(
                    "edge {i} does not turn counterclockwise around the origin"
                )));
            }
            let mut gap = wrap_angle(polar_angle(q) - polar_angle(p));
            if gap == 0.0 {
                gap = TAU;
            }
            if gap >= PI {
                return Err(Error::NotStarShaped(format!(
                    "edge {i} subtends an angle of at least π"
                )));
            }
            let dx = q[0] - p[0];
            let dy = q[1] - p[1];
            let len = dx.hypot(dy);
            let dist = c / len;
            // outward normal of a counterclockwise edge
            let foot = (-dx).atan2(dy);
            let mut foot_unwrapped = foot;
            while foot_unwrapped < start - PI {
                foot_unwrapped += TAU;
            }
            while foot_unwrapped > start + PI {
                foot_unwrapped -= TAU;
            }
            edges.push(Edge {
                start,
                end: start + gap,
                dist,
                foot: foot_unwrapped,
            });
            start += gap;
        }
        let total_turn = start - origin_angle;
        if (total_turn - TAU).abs() > 1e-9 {
            return Err(Error::NotStarShaped(format!(
                "vertices wind {:.6} turns around the origin",
                total_turn / TAU
            )));
        }
        // the edge list starts at the smallest vertex angle; prepend a piece
        // of the last edge so lookups can start from angle 0
        let last = *edges.last().expect("at least three edges");
        if origin_angle > 0.0 {
            let wrapped = Edge {
                start: last.start - TAU,
                end: origin_angle,
                dist: last.dist,
                foot: last.foot - TAU,
            };
            edges.insert(0, wrapped);
            edges.last_mut().expect("nonempty").end = TAU;
        }
        // pieces now cover [edges[0].start, 2π]; clip the first to start at 0
        let mut cum = Vec::with_capacity(edges.len() + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for (k, e) in edges.iter().enumerate() {
            let lo = if k == 0 {
                0.0_f64.max(e.start)
            } else {
                e.start
            };
            let piece = e.partial(e.end) - e.partial(lo);
            acc += piece;
            cum.push(acc);
        }
        if let Some(e0) = edges.first_mut() {
            if e0.start < 0.0 {
                e0.start = 0.0;
            }
        }
        let area = acc;
        let label = format!("polygon({m} vertices)");
        let mut profile = Self {
            shape: Shape::Polygon {
                vertices: verts,
                edges,
                cum,
            },
            n,
            cum: Vec::new(),
            area,
            smooth: false,
            label,
            extremes: (0.0, 0.0),
        };
        profile.extremes = profile.compute_extremes();
        Ok(profile)
    }

    /// `R′ = R · (1 − amplitude·b(θ))` with a raised-cosine bump `b` of the
    /// given half-width centred at `center`.
    pub(crate) fn dented(
        base: Arc<RadialProfile>,
        center: f64,
        half_width: f64,
        amplitude: f64,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&amplitude) {
            return Err(Error::InvalidParameter(format!(
                "dent amplitude must lie in [0, 1), got {amplitude}"
            )));
        }
        if !(half_width > 0.0 && half_width <= PI) {
            return Err(Error::InvalidParameter(format!(
                "dent half-width must lie in (0, π], got {half_width}"
            )));
        }
        let n = base.n;
        let label = format!("{} dented at θ={center:.4}", base.label);
        let mut profile = Self {
            shape: Shape::Dented {
                base,
                dent: Dent {
                    center: wrap_angle(center),
                    half_width,
                    amplitude,
                },
            },
            n,
            cum: Vec::new(),
            area: 0.0,
            smooth: false,
            label,
            extremes: (0.0, 0.0),
        };
        profile.build_table();
        profile.extremes = profile.compute_extremes();
        Ok(profile)
    }

    /// Same shape uniformly scaled so its area equals `area`.
    pub fn rescaled_to_area(&self, area: f64) -> Result<Self> {
        check_positive("area", area)?;
        let s = (area / self.area).sqrt();
        let mut out = self.scaled(s)?;
        out.pin_area(area);
        Ok(out)
    }

    /// Absorbs the last-bit rounding of a rescale so that `a` is exactly the
    /// requested value.
    fn pin_area(&mut self, area: f64) {
        let f = area / self.area;
        let table = match &mut self.shape {
            Shape::Polygon { cum, .. } => cum,
            _ => &mut self.cum,
        };
        table.iter_mut().for_each(|c| *c *= f);
        self.area = area;
    }

    fn scaled(&self, s: f64) -> Result<Self> {
        let mut out = match &self.shape {
            Shape::Sampled {
                samples, interp, ..
            } => {
                let mut p = Self::from_samples(
                    samples.iter().map(|r| r * s).collect(),
                    *interp,
                    self.smooth,
                    self.label.clone(),
                )?;
                p.smooth = self.smooth;
                p
            }
            Shape::Polygon { .. } => {
                let verts = self.polygon_vertices().expect("polygon shape");
                let mut p = Self::polygon(
                    &verts
                        .iter()
                        .map(|v| [v[0] * s, v[1] * s])
                        .collect::<Vec<_>>(),
                    self.n,
                )?;
                p.label = self.label.clone();
                p
            }
            Shape::Dented { base, dent } => Self::dented(
                Arc::new(base.scaled(s)?),
                dent.center,
                dent.half_width,
                dent.amplitude,
            )?,
        };
        out.label = format!("{} scaled to area {:.6}", self.label, out.area);
        Ok(out)
    }

    fn polygon_vertices(&self) -> Option<Vec<[f64; 2]>> {
        match &self.shape {
            Shape::Polygon { vertices, .. } => Some(vertices.clone()),
            _ => None,
        }
    }

    fn build_table(&mut self) {
        let n = self.n;
        let h = TAU / n as f64;
        let mut cum = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for j in 0..n {
            let a = h * j as f64;
            acc += self.cell_integral(j, a, a + h);
            cum.push(acc);
        }
        self.area = acc;
        self.cum = cum;
    }

    /// `∫ ½R²` over `[lo, hi]` contained in grid cell `j`.
    fn cell_integral(&self, _j: usize, lo: f64, hi: f64) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        match &self.shape {
            // the interpolant is a polynomial of degree ≤ 3 in each cell, so
            // the 4-point rule integrates ½R² exactly
            Shape::Sampled { .. } => {
                let mut s = 0.0;
                for k in 0..4 {
                    let r = self.radius_unchecked(mid + half * GL4_X[k]);
                    s += GL4_W[k] * r * r;
                }
                0.5 * half * s
            }
            _ => {
                let mut s = 0.0;
                for k in 0..8 {
                    let r = self.radius_unchecked(mid + half * GL8_X[k]);
                    s += GL8_W[k] * r * r;
                }
                0.5 * half * s
            }
        }
    }

    /// Radius at an angle already in `[0, 2π]`.
    fn radius_unchecked(&self, theta: f64) -> f64 {
        match &self.shape {
            Shape::Sampled {
                samples,
                interp,
                curvature,
            } => {
                let n = samples.len();
                let h = TAU / n as f64;
                let u = theta / h;
                let j = (u.floor() as usize).min(n - 1);
                let t = u - j as f64;
                let y0 = samples[j];
                let y1 = samples[(j + 1) % n];
                match interp {
                    Interpolation::Linear => y0 + (y1 - y0) * t,
                    Interpolation::CubicPeriodic => {
                        let m0 = curvature[j];
                        let m1 = curvature[(j + 1) % n];
                        let s = 1.0 - t;
                        s * y0
                            + t * y1
                            + h * h / 6.0 * ((s * s * s - s) * m0 + (t * t * t - t) * m1)
                    }
                }
            }
            Shape::Polygon { edges, .. } => edges[polygon_edge(edges, theta)].radius(theta),
            Shape::Dented { base, dent } => base.radius(theta) * dent.factor(theta).0,
        }
    }

    /// Boundary radius `R(θ)`, 2π-periodic.
    #[inline]
    pub fn radius(&self, theta: f64) -> f64 {
        self.radius_unchecked(wrap_angle(theta))
    }

    /// `dR/dθ` of the interpolant (one-sided at kinks).
    pub fn radius_derivative(&self, theta: f64) -> f64 {
        let theta = wrap_angle(theta);
        match &self.shape {
            Shape::Sampled {
                samples,
                interp,
                curvature,
            } => {
                let n = samples.len();
                let h = TAU / n as f64;
                let u = theta / h;
                let j = (u.floor() as usize).min(n - 1);
                let t = u - j as f64;
                let y0 = samples[j];
                let y1 = samples[(j + 1) % n];
                match interp {
                    Interpolation::Linear => (y1 - y0) / h,
                    Interpolation::CubicPeriodic => {
                        let m0 = curvature[j];
                        let m1 = curvature[(j + 1) % n];
                        let s = 1.0 - t;
                        (y1 - y0) / h
                            + h / 6.0 * (-(3.0 * s * s - 1.0) * m0 + (3.0 * t * t - 1.0) * m1)
                    }
                }
            }
            Shape::Polygon { edges, .. } => {
                edges[polygon_edge(edges, theta)].radius_derivative(theta)
            }
            Shape::Dented { base, dent } => {
                let (f, df) = dent.factor(theta);
                base.radius_derivative(theta) * f + base.radius(theta) * df
            }
        }
    }

    /// Total area `a = S(2π)`.
    #[inline]
    pub fn area(&self) -> f64 {
        self.area
    }

    /// Uniform grid size `N`.
    pub fn grid_size(&self) -> usize {
        self.n
    }

    /// Radii at the uniform grid angles `2πj/N`.
    pub fn samples(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Sampled { samples, .. } => samples.clone(),
            _ => (0..self.n)
                .map(|j| self.radius_unchecked(TAU * j as f64 / self.n as f64))
                .collect(),
        }
    }

    /// Interpolation in use; `None` for exact polygons and dented profiles.
    pub fn interpolation(&self) -> Option<Interpolation> {
        match &self.shape {
            Shape::Sampled { interp, .. } => Some(*interp),
            _ => None,
        }
    }

    /// True only for presets known to be C¹ (smooth sources with cubic interpolation).
    pub fn is_smooth(&self) -> bool {
        self.smooth
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Upper bound on `R`, used for bounding boxes.
    #[inline]
    pub fn max_radius(&self) -> f64 {
        self.extremes.1
    }

    /// Lower bound on `R`.
    #[inline]
    pub fn min_radius(&self) -> f64 {
        self.extremes.0
    }

    fn compute_extremes(&self) -> (f64, f64) {
        match &self.shape {
            Shape::Sampled {
                samples, interp, ..
            } => {
                let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = samples.iter().copied().fold(0.0, f64::max);
                match interp {
                    Interpolation::Linear => (lo, hi),
                    Interpolation::CubicPeriodic => {
                        let (flo, fhi) = self.fine_extremes();
                        (flo.min(lo) * (1.0 - 1e-6), fhi.max(hi) * (1.0 + 1e-6))
                    }
                }
            }
            Shape::Polygon { edges, .. } => {
                let hi = edges
                    .iter()
                    .map(|e| e.radius(e.start).max(e.radius(e.end)))
                    .fold(0.0, f64::max);
                let lo = edges
                    .iter()
                    .map(|e| {
                        let foot = e.foot;
                        if foot >= e.start && foot <= e.end {
                            e.dist
                        } else {
                            e.radius(e.start).min(e.radius(e.end))
                        }
                    })
                    .fold(f64::INFINITY, f64::min);
                (lo, hi)
            }
            Shape::Dented { base, dent } => {
                let (flo, _) = self.fine_extremes();
                (
                    flo.min(base.min_radius() * (1.0 - dent.amplitude)) * (1.0 - 1e-9),
                    base.max_radius(),
                )
            }
        }
    }

    fn fine_extremes(&self) -> (f64, f64) {
        let m = 32 * self.n;
        (0..m)
            .map(|k| self.radius_unchecked(TAU * k as f64 / m as f64))
            .fold((f64::INFINITY, 0.0_f64), |(lo, hi), r| {
                (lo.min(r), hi.max(r))
            })
    }

    /// Cumulative sector area `S(θ)`, unwrapped so that `S(θ + 2π) = S(θ) + a`.
    pub fn sector_area(&self, theta: f64) -> f64 {
        let turns = (theta / TAU).floor();
        let mut base = theta - turns * TAU;
        if base >= TAU {
            base = 0.0;
        }
        turns * self.area + self.sector_area_in_turn(base.max(0.0))
    }

    fn sector_area_in_turn(&self, theta: f64) -> f64 {
        match &self.shape {
            Shape::Polygon { edges, cum, .. } => {
                let k = polygon_edge(edges, theta);
                cum[k] + edges[k].partial(theta) - edges[k].partial(edges[k].start)
            }
            _ => {
                let h = TAU / self.n as f64;
                let j = ((theta / h).floor() as usize).min(self.n - 1);
                let lo = h * j as f64;
                self.cum[j] + self.cell_integral(j, lo, theta)
            }
        }
    }

    /// Inverse of [`RadialProfile::sector_area`] for any real `s`.
    ///
    /// Bisection on the bracketing grid cell, refined by Newton steps using
    /// `S' = ½R²`.
    pub fn inverse_sector_area(&self, s: f64) -> f64 {
        let turns = (s / self.area).floor();
        let mut rem = s - turns * self.area;
        if rem >= self.area {
            rem = 0.0;
        }
        let rem = rem.max(0.0);
        turns * TAU + self.inverse_in_turn(rem)
    }

    fn inverse_in_turn(&self, s: f64) -> f64 {
        match &self.shape {
            Shape::Polygon { edges, cum, .. } => {
                let k = cum
                    .partition_point(|&c| c <= s)
                    .saturating_sub(1)
                    .min(edges.len() - 1);
                let e = &edges[k];
                let local = s - cum[k] + e.partial(e.start);
                e.partial_inverse(local).clamp(e.start, e.end)
            }
            _ => {
                let h = TAU / self.n as f64;
                let j = self
                    .cum
                    .partition_point(|&c| c <= s)
                    .saturating_sub(1)
                    .min(self.n - 1);
                let mut lo = h * j as f64;
                let mut hi = lo + h;
                let target = s - self.cum[j];
                let tol = 1e-15 * self.area.max(1.0);
                // initial guess from linear interpolation of the cell
                let cell = self.cum[j + 1] - self.cum[j];
                let mut x = lo + h * (target / cell).clamp(0.0, 1.0);
                for _ in 0..100 {
                    let f = self.cell_integral(j, lo_of(j, h), x) - target;
                    if f.abs() <= tol {
                        break;
                    }
                    if f > 0.0 {
                        hi = x;
                    } else {
                        lo = x;
                    }
                    let r = self.radius_unchecked(x);
                    let step = f / (0.5 * r * r);
                    let next = x - step;
                    x = if next > lo && next < hi {
                        next
                    } else {
                        0.5 * (lo + hi)
                    };
                    if hi - lo <= 4.0 * f64::EPSILON * TAU {
                        break;
                    }
                }
                x
            }
        }
    }

    /// Gauge `g(z) = |z| / R(arg z)`, with `g(0) = 0`.
    #[inline]
    pub fn gauge(&self, z: [f64; 2]) -> f64 {
        let r = z[0].hypot(z[1]);
        if r == 0.0 {
            return 0.0;
        }
        r / self.radius(polar_angle(z))
    }

    #[inline]
    pub fn contains(&self, z: [f64; 2]) -> bool {
        self.gauge(z) <= 1.0
    }

    /// The boundary point `R(θ)e^{iθ}`.
    #[inline]
    pub fn boundary_point(&self, theta: f64) -> [f64; 2] {
        let r = self.radius(theta);
        [r * theta.cos(), r * theta.sin()]
    }

    /// The smooth piece of `R` containing `theta ∈ [0, 2π]`. A node belongs
    /// to the piece on its right when `forward`, else to the one on its left.
    pub(crate) fn piece_at(&self, theta: f64, forward: bool) -> Piece {
        let pick = |count: usize, below: usize, on_node: bool| {
            if on_node && !forward && below > 0 {
                below - 1
            } else {
                below.min(count - 1)
            }
        };
        match &self.shape {
            Shape::Polygon { edges, .. } => {
                let k = polygon_edge(edges, theta);
                let k = pick(edges.len(), k, theta == edges[k].start);
                Piece {
                    index: k,
                    lo: edges[k].start,
                    hi: edges[k].end,
                }
            }
            _ => {
                let h = TAU / self.n as f64;
                let mut j = (theta / h).floor().max(0.0) as usize;
                // nodes are h·j; keep h·j ≤ θ < h·(j+1) despite rounding in θ/h
                if h * (j + 1) as f64 <= theta {
                    j += 1;
                } else if j > 0 && h * j as f64 > theta {
                    j -= 1;
                }
                let j = pick(self.n, j, theta == h * j as f64);
                Piece {
                    index: j,
                    lo: h * j as f64,
                    hi: h * (j + 1) as f64,
                }
            }
        }
    }

    /// `(R, R′, S)` at `x` using the analytic continuation of `piece`, so the
    /// values are smooth in `x` even slightly past the piece ends.
    pub(crate) fn piece_eval(&self, piece: Piece, x: f64) -> (f64, f64, f64) {
        match &self.shape {
            Shape::Sampled { .. } => {
                let j = piece.index;
                let (r, dr) = self.sampled_eval(j, x);
                let half = 0.5 * (x - piece.lo);
                let mid = 0.5 * (x + piece.lo);
                let mut acc = 0.0;
                for k in 0..4 {
                    let (rk, _) = self.sampled_eval(j, mid + half * GL4_X[k]);
                    acc += GL4_W[k] * rk * rk;
                }
                (r, dr, self.cum[j] + 0.5 * half * acc)
            }
            Shape::Polygon { edges, cum, .. } => {
                let e = &edges[piece.index];
                (
                    e.radius(x),
                    e.radius_derivative(x),
                    cum[piece.index] + e.partial(x) - e.partial(e.start),
                )
            }
            Shape::Dented { .. } => (
                self.radius(x),
                self.radius_derivative(x),
                self.sector_area(x),
            ),
        }
    }

    /// Cubic or linear interpolant of cell `j`, evaluated at any `x`.
    fn sampled_eval(&self, j: usize, x: f64) -> (f64, f64) {
        let Shape::Sampled {
            samples,
            interp,
            curvature,
        } = &self.shape
        else {
            unreachable!("sampled shape")
        };
        let n = samples.len();
        let h = TAU / n as f64;
        let t = x / h - j as f64;
        let y0 = samples[j];
        let y1 = samples[(j + 1) % n];
        match interp {
            Interpolation::Linear => (y0 + (y1 - y0) * t, (y1 - y0) / h),
            Interpolation::CubicPeriodic => {
                let m0 = curvature[j];
                let m1 = curvature[(j + 1) % n];
                let s = 1.0 - t;
                (
                    s * y0 + t * y1 + h * h / 6.0 * ((s * s * s - s) * m0 + (t * t * t - t) * m1),
                    (y1 - y0) / h
                        + h / 6.0 * (-(3.0 * s * s - 1.0) * m0 + (3.0 * t * t - 1.0) * m1),
                )
            }
        }
    }
}

#[inline]
fn lo_of(j: usize, h: f64) -> f64 {
    h * j as f64
}

#[inline]
fn cross(p: [f64; 2], q: [f64; 2]) -> f64 {
    p[0] * q[1] - p[1] * q[0]
}

fn polygon_edge(edges: &[Edge], theta: f64) -> usize {
    edges
        .partition_point(|e| e.start <= theta)
        .saturating_sub(1)
        .min(edges.len() - 1)
}

fn check_grid(n: usize) -> Result<()> {
    if n < MIN_GRID {
        Err(Error::GridTooSmall(n))
    } else {
        Ok(())
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

/// Second derivatives of the periodic cubic spline through equally spaced samples.
///
/// Solves `M_{j-1} + 4M_j + M_{j+1} = 6(y_{j+1} − 2y_j + y_{j-1})/h²` with
/// cyclic indices (Sherman–Morrison on the cyclic tridiagonal system).
fn periodic_spline_curvature(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let h = TAU / n as f64;
    let rhs: Vec<f64> = (0..n)
        .map(|j| 6.0 * (y[(j + 1) % n] - 2.0 * y[j] + y[(j + n - 1) % n]) / (h * h))
        .collect();
    // A = T + u vᵀ with corner terms folded into u, v
    let gamma = -4.0;
    let mut diag = vec![4.0; n];
    diag[0] -= gamma;
    diag[n - 1] -= 1.0 / gamma;
    let solve = |d: &[f64], b: &[f64]| -> Vec<f64> {
        let mut c = vec![0.0; n];
        let mut x = vec![0.0; n];
        c[0] = 1.0 / d[0];
        x[0] = b[0] / d[0];
        for i in 1..n {
            let m = d[i] - c[i - 1];
            c[i] = 1.0 / m;
            x[i] = (b[i] - x[i - 1]) / m;
        }
        for i in (0..n - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        x
    };
    let x = solve(&diag, &rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = 1.0;
    let z = solve(&diag, &u);
    let vx = x[0] + x[n - 1] / gamma;
    let vz = z[0] + z[n - 1] / gamma;
    let f = vx / (1.0 + vz);
    x.iter().zip(&z).map(|(a, b)| a - f * b).collect()
}

/// Symplectic ellipsoid `E(a₁,…,aₙ) = { Σ π|zᵢ|²/aᵢ ≤ 1 } ⊂ ℂⁿ`.
#[derive(Clone, Debug, PartialEq)]
pub struct EllipsoidSpec {
    areas: Vec<f64>,
}

impl EllipsoidSpec {
    pub fn new(areas: Vec<f64>) -> Result<Self> {
        if areas.is_empty() {
            return Err(Error::InvalidParameter(
                "ellipsoid needs at least one area".into(),
            ));
        }
        for &a in &areas {
            check_positive("ellipsoid area", a)?;
        }
        Ok(Self { areas })
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    /// Complex dimension `n`.
    pub fn dim(&self) -> usize {
        self.areas.len()
    }

    /// `√(Σ π|zᵢ|²/aᵢ)` for `z` laid out as `(x₁, y₁, …, xₙ, yₙ)`.
    pub fn gauge(&self, z: &[f64]) -> f64 {
        self.areas
            .iter()
            .enumerate()
            .map(|(i, a)| PI * (z[2 * i] * z[2 * i] + z[2 * i + 1] * z[2 * i + 1]) / a)
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos_profile(a: f64) -> RadialProfile {
        RadialProfile::cosine(a, 0.5).unwrap()
    }

    fn square() -> RadialProfile {
        RadialProfile::new(
            ProfileSource::Polygon {
                vertices: vec![[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]],
            },
            DEFAULT_GRID,
            Interpolation::Linear,
        )
        .unwrap()
    }

    #[test]
    fn disk_area_and_radius() {
        let d = RadialProfile::disk(PI).unwrap();
        assert!((d.area() - PI).abs() < 1e-12);
        assert!((d.radius(1.234) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn square_exact() {
        let s = square();
        assert!((s.area() - 4.0).abs() < 1e-13);
        assert!((s.radius(0.0) - 1.0).abs() < 1e-14);
        assert!((s.radius(PI / 4.0) - 2f64.sqrt()).abs() < 1e-14);
        assert!((s.gauge([1.0, 1.0]) - 1.0).abs() < 1e-14);
        assert!((s.sector_area(PI / 4.0) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn square_clockwise_and_rotated_inputs() {
        let cw = RadialProfile::new(
            ProfileSource::Polygon {
                vertices: vec![[1.0, -1.0], [-1.0, -1.0], [-1.0, 1.0], [1.0, 1.0]],
            },
            64,
            Interpolation::Linear,
        )
        .unwrap();
        assert!((cw.area() - 4.0).abs() < 1e-13);
        let diamond = RadialProfile::new(
            ProfileSource::Polygon {
                vertices: vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]],
            },
            64,
            Interpolation::Linear,
        )
        .unwrap();
        assert!((diamond.area() - 2.0).abs() < 1e-13);
        assert!((diamond.radius(0.0) - 1.0).abs() < 1e-14);
        assert!((diamond.radius(PI / 4.0) - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_star_polygon() {
        // origin outside the triangle
        let err = RadialProfile::new(
            ProfileSource::Polygon {
                vertices: vec![[1.0, 1.0], [2.0, 1.0], [1.5, 2.0]],
            },
            64,
            Interpolation::Linear,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotStarShaped(_)));
    }

    #[test]
    fn rejects_non_positive_and_small_grid() {
        let mut s = vec![1.0; 32];
        s[5] = -0.1;
        assert!(matches!(
            RadialProfile::new(ProfileSource::Samples(s), 32, Interpolation::Linear),
            Err(Error::NonPositiveRadius { .. })
        ));
        assert!(matches!(
            RadialProfile::new(ProfileSource::Disk { area: 1.0 }, 8, Interpolation::Linear),
            Err(Error::GridTooSmall(8))
        ));
    }

    #[test]
    fn cubic_overshoot_rejected() {
        // a tall spike between near-zero neighbours overshoots below zero
        let mut s = vec![1e-3; 32];
        s[10] = 5.0;
        let r = RadialProfile::new(ProfileSource::Samples(s), 32, Interpolation::CubicPeriodic);
        assert!(matches!(r, Err(Error::NonPositiveRadius { .. })));
    }

    #[test]
    fn cosine_area_and_half_turn() {
        let a = 2.5;
        let p = cos_profile(a);
        assert!((p.area() - a).abs() < 1e-10);
        assert!((p.sector_area(PI) - a / 2.0).abs() < 1e-10);
    }

    #[test]
    fn cosine_inverse_quarter() {
        // S(φ) = (a/2π)(φ + ½ sin φ), so S(φ) = a/4 ⇔ φ + ½ sin φ = π/2
        let a = PI;
        let p = cos_profile(a);
        let mut x: f64 = 1.0;
        for _ in 0..50 {
            x -= (x + 0.5 * x.sin() - PI / 2.0) / (1.0 + 0.5 * x.cos());
        }
        assert!((p.inverse_sector_area(a / 4.0) - x).abs() < 1e-9);
    }

    #[test]
    fn unwrapping() {
        let p = cos_profile(1.0);
        let th = 0.7;
        assert!((p.sector_area(th + TAU) - p.sector_area(th) - 1.0).abs() < 1e-12);
        assert!((p.sector_area(th - 2.0 * TAU) - p.sector_area(th) + 2.0).abs() < 1e-12);
        assert!((p.inverse_sector_area(p.sector_area(-5.0)) + 5.0).abs() < 1e-10);
        assert_eq!(p.radius(th + TAU), p.radius(th));
    }

    #[test]
    fn cumulative_strictly_increasing() {
        let p = cos_profile(1.0);
        assert!(p.cum.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(p.cum[0], 0.0);
        assert!((p.cum[p.n] - p.area()).abs() < 1e-15);
    }

    #[test]
    fn spline_interpolates_and_is_periodic() {
        let p = cos_profile(PI);
        let s = p.samples();
        for j in [0, 1, 100, 4095] {
            let th = TAU * j as f64 / 4096.0;
            assert!((p.radius(th) - s[j]).abs() < 1e-14);
        }
        let exact = |t: f64| (1.0 + 0.5 * t.cos()).sqrt();
        for k in 0..100 {
            let t = 0.0627 * k as f64;
            assert!((p.radius(t) - exact(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let p = cos_profile(PI);
        for k in 0..20 {
            let t = 0.31 * k as f64 + 0.01;
            let fd = (p.radius(t + 1e-6) - p.radius(t - 1e-6)) / 2e-6;
            assert!((p.radius_derivative(t) - fd).abs() < 1e-7);
        }
        let sq = square();
        let t = 0.3;
        let fd = (sq.radius(t + 1e-6) - sq.radius(t - 1e-6)) / 2e-6;
        assert!((sq.radius_derivative(t) - fd).abs() < 1e-6);
    }

    #[test]
    fn gauge_origin_and_membership() {
        let d = RadialProfile::disk(PI).unwrap();
        assert_eq!(d.gauge([0.0, 0.0]), 0.0);
        assert!((d.gauge([2.0, 0.0]) - 2.0).abs() < 1e-14);
        assert!(d.contains([0.5, 0.5]));
        assert!(!d.contains([1.0, 0.5]));
    }

    #[test]
    fn rescale_hits_target_area() {
        let s = square().rescaled_to_area(1.0).unwrap();
        assert_eq!(s.area(), 1.0);
        assert!((s.sector_area(TAU - 1e-12) - 1.0).abs() < 1e-11);
        let c = cos_profile(3.0).rescaled_to_area(1.0).unwrap();
        assert_eq!(c.area(), 1.0);
        assert!((c.sector_area(PI) - 0.5).abs() < 1e-12);
        assert!(c.is_smooth());
    }

    #[test]
    fn ellipsoid_gauge() {
        let e = EllipsoidSpec::new(vec![PI, 4.0 * PI]).unwrap();
        assert!((e.gauge(&[1.0, 0.0, 0.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!((e.gauge(&[0.0, 0.0, 0.0, 2.0]) - 1.0).abs() < 1e-15);
        assert!(EllipsoidSpec::new(vec![1.0, 0.0]).is_err());
    }
}
