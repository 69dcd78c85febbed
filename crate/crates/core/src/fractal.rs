//! Fractal function families, box counting and log-log dimension fits.
//!
//! The Weierstrass graph `W_{a,b}(x) = Σ aⁿ cos(2πbⁿx)` has box-counting
//! dimension `2 + ln a / ln b`. Boundaries of products with a fractal factor
//! are sampled as graphs in polar coordinates and box-counted in `ℝ^{2n}`.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::FxHashSet;

use crate::error::{Error, Result};
use crate::geometry2d::RadialProfile;

/// The fractal function families used to build rough boundaries.
#[derive(Clone, Debug, PartialEq)]
pub enum FractalFunction {
    /// `Σ_{n=0}^{K} aⁿ cos(2π bⁿ x)` with `0 < a < 1 < b`.
    Weierstrass { a: f64, b: f64, terms: usize },
    /// `Σ_{n=0}^{K} aⁿ cos(2π(bⁿ x + θₙ))`; `phases` holds `θ₀, …, θ_K`.
    WeierstrassPhase { a: f64, b: f64, phases: Vec<f64> },
    /// `Σ_{n=1}^{K} a^{n^α} φ(a^{−n^β} x)` with the unit triangle wave `φ`.
    XiaoZhou {
        a: f64,
        alpha: f64,
        beta: f64,
        terms: usize,
    },
}

impl FractalFunction {
    pub fn weierstrass(a: f64, b: f64, terms: usize) -> Result<Self> {
        check_weierstrass(a, b)?;
        Ok(Self::Weierstrass { a, b, terms })
    }

    /// Phase-shifted variant with `θₙ` drawn i.i.d. uniform on `[0, 1)` from a seeded stream.
    pub fn weierstrass_phase_seeded(a: f64, b: f64, terms: usize, seed: u64) -> Result<Self> {
        check_weierstrass(a, b)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phases = (0..=terms).map(|_| rng.random::<f64>()).collect();
        Ok(Self::WeierstrassPhase { a, b, phases })
    }

    pub fn weierstrass_phase(a: f64, b: f64, phases: Vec<f64>) -> Result<Self> {
        check_weierstrass(a, b)?;
        if phases.is_empty() || phases.iter().any(|t| !(0.0..1.0).contains(t)) {
            return Err(Error::InvalidParameter(
                "phases must be a nonempty list of values in [0, 1)".into(),
            ));
        }
        Ok(Self::WeierstrassPhase { a, b, phases })
    }

    pub fn xiao_zhou(a: f64, alpha: f64, beta: f64, terms: usize) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < a < 1, got a = {a}"
            )));
        }
        if !(1.0 < alpha && alpha < beta) {
            return Err(Error::InvalidParameter(format!(
                "need 1 < alpha < beta, got alpha = {alpha}, beta = {beta}"
            )));
        }
        if terms == 0 {
            return Err(Error::InvalidParameter(
                "xiao-zhou needs at least one term".into(),
            ));
        }
        Ok(Self::XiaoZhou {
            a,
            alpha,
            beta,
            terms,
        })
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Self::Weierstrass { .. } => "weierstrass",
            Self::WeierstrassPhase { .. } => "hunt",
            Self::XiaoZhou { .. } => "xz",
        }
    }

    /// Truncated sum at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Weierstrass { a, b, terms } => {
                let mut amp = 1.0;
                let mut freq = 1.0;
                let mut s = 0.0;
                for _ in 0..=*terms {
                    s += amp * (TAU * (freq * x).rem_euclid(1.0)).cos();
                    amp *= a;
                    freq *= b;
                }
                s
            }
            Self::WeierstrassPhase { a, b, phases } => {
                let mut amp = 1.0;
                let mut freq = 1.0;
                let mut s = 0.0;
                for th in phases {
                    s += amp * (TAU * (freq * x + th).rem_euclid(1.0)).cos();
                    amp *= a;
                    freq *= b;
                }
                s
            }
            Self::XiaoZhou {
                a,
                alpha,
                beta,
                terms,
            } => (1..=*terms)
                .map(|n| {
                    let n = n as f64;
                    a.powf(n.powf(*alpha)) * triangle_wave(a.powf(-n.powf(*beta)) * x)
                })
                .sum(),
        }
    }

    /// Upper bound on `sup |f|`.
    pub fn sup_bound(&self) -> f64 {
        match self {
            Self::Weierstrass { a, terms, .. } => geometric_partial(*a, *terms),
            Self::WeierstrassPhase { a, phases, .. } => geometric_partial(*a, phases.len() - 1),
            Self::XiaoZhou {
                a, alpha, terms, ..
            } => (1..=*terms).map(|n| a.powf((n as f64).powf(*alpha))).sum(),
        }
    }

    /// Bound on `|f − f_∞|` from dropping the tail, for the Weierstrass families.
    pub fn truncation_bound(&self) -> Option<f64> {
        match self {
            Self::Weierstrass { a, terms, .. } => Some(a.powi(*terms as i32 + 1) / (1.0 - a)),
            Self::WeierstrassPhase { a, phases, .. } => {
                Some(a.powi(phases.len() as i32) / (1.0 - a))
            }
            Self::XiaoZhou { .. } => None,
        }
    }

    /// `2 + ln a / ln b` for the Weierstrass families.
    pub fn graph_dimension(&self) -> Option<f64> {
        match self {
            Self::Weierstrass { a, b, .. } | Self::WeierstrassPhase { a, b, .. } => {
                Some(2.0 + a.ln() / b.ln())
            }
            Self::XiaoZhou { .. } => None,
        }
    }
}

fn check_weierstrass(a: f64, b: f64) -> Result<()> {
    if a > 0.0 && a < 1.0 && b > 1.0 && b.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "weierstrass needs 0 < a < 1 < b, got a = {a}, b = {b}"
        )))
    }
}

fn geometric_partial(a: f64, last: usize) -> f64 {
    (1.0 - a.powi(last as i32 + 1)) / (1.0 - a)
}

/// `φ(x) = 2·dist(x, ℤ)`: equals `2x` on `[0, ½]`, even and 1-periodic.
#[inline]
pub fn triangle_wave(x: f64) -> f64 {
    2.0 * (x - x.round()).abs()
}

/// A set in `ℝ^d` that can emit points at any pitch down to a floor.
///
/// Points are streamed in chunks so box counting can run on parallel
/// workers; a chunk's points must not depend on how many workers exist.
pub trait PointSampler: Sync {
    fn dim(&self) -> usize;

    /// Finest spacing the sampler can honour.
    fn min_pitch(&self) -> f64;

    /// Number of independent chunks at the given pitch.
    fn chunks(&self, pitch: f64) -> usize;

    /// Streams the points of `chunk`; consecutive points along each emitted
    /// path are at most `pitch` apart.
    fn for_each_in_chunk(&self, pitch: f64, chunk: usize, f: &mut dyn FnMut(&[f64]));
}

/// Largest ambient dimension supported by the cell packer.
pub const MAX_BOX_DIM: usize = 4;

#[inline]
fn pack_cell(idx: &[i64]) -> u128 {
    let mut key = 0u128;
    for &i in idx {
        key = (key << 32) | (i as i32 as u32 as u128);
    }
    key
}

/// Number of cells of the grid `offset + ε·ℤ^d` met by the sampler's points,
/// sampled at pitch `ε/4`.
pub fn box_count<S: PointSampler + ?Sized>(sampler: &S, eps: f64, offset: &[f64]) -> Result<usize> {
    count_cells(sampler, eps, offset, None)
}

/// An axis-aligned cube that restricts counting to a local piece of a set.
///
/// Only whole grid cells are counted: for box size `ε` and grid offset `o`
/// the counted cells are those with index `k` in
/// `⌈(lo − o)/ε⌉ ≤ k < ⌈(lo − o)/ε⌉ + ⌊side/ε⌋` along every axis. Because the
/// window is a union of grid cells, a patch cut out of a larger set carries
/// no partially-covered border cells and the count scales like the set
/// itself. The sampler must cover the set inside the window completely.
#[derive(Clone, Debug, PartialEq)]
pub struct CountWindow {
    pub lo: Vec<f64>,
    pub side: f64,
}

impl CountWindow {
    pub fn new(lo: Vec<f64>, side: f64) -> Result<Self> {
        if !(side > 0.0) || lo.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "window side must be positive, got {side}"
            )));
        }
        Ok(Self { lo, side })
    }

    /// Cube of the given side centred at `center`.
    pub fn centered(center: &[f64], side: f64) -> Result<Self> {
        Self::new(center.iter().map(|c| c - 0.5 * side).collect(), side)
    }
}

/// [`box_count`] restricted to the grid cells making up `window`.
pub fn box_count_in_window<S: PointSampler + ?Sized>(
    sampler: &S,
    eps: f64,
    offset: &[f64],
    window: &CountWindow,
) -> Result<usize> {
    count_cells(sampler, eps, offset, Some(window))
}

fn count_cells<S: PointSampler + ?Sized>(
    sampler: &S,
    eps: f64,
    offset: &[f64],
    window: Option<&CountWindow>,
) -> Result<usize> {
    let d = sampler.dim();
    if d == 0 || d > MAX_BOX_DIM {
        return Err(Error::InvalidParameter(format!(
            "box counting supports dimensions 1..={MAX_BOX_DIM}, got {d}"
        )));
    }
    if offset.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: offset.len(),
        });
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "box size must be positive, got {eps}"
        )));
    }
    let pitch = eps / 4.0;
    if sampler.min_pitch() > pitch {
        return Err(Error::PitchTooCoarse {
            pitch: sampler.min_pitch(),
            eps,
        });
    }
    // inclusive-exclusive index range per axis
    let mut range = [(i64::MIN, i64::MAX); MAX_BOX_DIM];
    if let Some(w) = window {
        if w.lo.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: w.lo.len(),
            });
        }
        let m = (w.side / eps * (1.0 + 1e-12)).floor() as i64;
        if m < 1 {
            return Err(Error::InvalidParameter(format!(
                "box size {eps} exceeds the counting window {}",
                w.side
            )));
        }
        for k in 0..d {
            let k0 = ((w.lo[k] - offset[k]) / eps * (1.0 - 1e-12)).ceil() as i64;
            range[k] = (k0, k0 + m);
        }
    }
    let chunks = sampler.chunks(pitch);
    let inv = 1.0 / eps;
    let cells = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut set = FxHashSet::default();
            let mut idx = [0i64; MAX_BOX_DIM];
            let mut last = None;
            sampler.for_each_in_chunk(pitch, c, &mut |p: &[f64]| {
                for k in 0..d {
                    idx[k] = ((p[k] - offset[k]) * inv).floor() as i64;
                    if idx[k] < range[k].0 || idx[k] >= range[k].1 {
                        return;
                    }
                }
                let key = pack_cell(&idx[..d]);
                if last != Some(key) {
                    set.insert(key);
                    last = Some(key);
                }
            });
            set
        })
        .reduce(FxHashSet::default, |mut a, b| {
            if a.len() < b.len() {
                return union_into(b, a);
            }
            a.extend(b);
            a
        });
    Ok(cells.len())
}

fn union_into(mut big: FxHashSet<u128>, small: FxHashSet<u128>) -> FxHashSet<u128> {
    big.extend(small);
    big
}

/// Result of a log-log fit of box counts.
#[derive(Clone, Debug)]
pub struct DimensionEstimate {
    /// Box sizes, decreasing.
    pub scales: Vec<f64>,
    /// Counts (averaged over grid offsets).
    pub counts: Vec<f64>,
    /// Fitted slope of `ln N` against `ln(1/ε)`.
    pub dimension: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// 95% half-width from the slope's standard error.
    pub ci_half_width: f64,
    /// Counts never decrease as ε shrinks.
    pub monotone: bool,
}

impl DimensionEstimate {
    /// `(ε_max, ε_min)` of the fitted window.
    pub fn window(&self) -> (f64, f64) {
        (self.scales[0], *self.scales.last().expect("nonempty"))
    }
}

/// Ordinary least squares of `ln N(ε)` against `ln(1/ε)`.
pub fn estimate_dimension(scales: &[f64], counts: &[f64]) -> Result<DimensionEstimate> {
    if scales.len() != counts.len() {
        return Err(Error::DimensionMismatch {
            expected: scales.len(),
            got: counts.len(),
        });
    }
    if scales.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least 3 scales, got {}",
            scales.len()
        )));
    }
    let mut pairs: Vec<(f64, f64)> = scales.iter().copied().zip(counts.iter().copied()).collect();
    if pairs.iter().any(|&(e, c)| !(e > 0.0) || !(c > 0.0)) {
        return Err(Error::DegenerateFit(
            "scales and counts must be positive".into(),
        ));
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let xs: Vec<f64> = pairs.iter().map(|p| -p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit("all scales coincide".into()));
    }
    if syy <= 0.0 {
        return Err(Error::DegenerateFit(
            "counts are constant across scales".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = 1.0 - sse / syy;
    let se = if xs.len() > 2 {
        (sse / (m - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let monotone = pairs.windows(2).all(|w| w[1].1 >= w[0].1);
    Ok(DimensionEstimate {
        scales: pairs.iter().map(|p| p.0).collect(),
        counts: pairs.iter().map(|p| p.1).collect(),
        dimension: slope,
        intercept,
        r_squared,
        ci_half_width: 1.96 * se,
        monotone,
    })
}

/// `2^{-lo}, …, 2^{-hi}`.
pub fn dyadic_scales(lo: u32, hi: u32) -> Vec<f64> {
    (lo..=hi).map(|k| 0.5f64.powi(k as i32)).collect()
}

/// Box counts at every scale averaged over `offsets` grid placements, then fitted.
///
/// The first placement is the unshifted grid; the rest are uniform random
/// shifts in `[0, ε)^d` drawn from `seed`.
pub fn box_dimension<S: PointSampler + ?Sized>(
    sampler: &S,
    scales: &[f64],
    offsets: usize,
    seed: u64,
) -> Result<DimensionEstimate> {
    dithered_fit(sampler, scales, offsets, seed, None)
}

/// [`box_dimension`] with every count restricted to `window`.
pub fn box_dimension_in_window<S: PointSampler + ?Sized>(
    sampler: &S,
    window: &CountWindow,
    scales: &[f64],
    offsets: usize,
    seed: u64,
) -> Result<DimensionEstimate> {
    dithered_fit(sampler, scales, offsets, seed, Some(window))
}

fn dithered_fit<S: PointSampler + ?Sized>(
    sampler: &S,
    scales: &[f64],
    offsets: usize,
    seed: u64,
    window: Option<&CountWindow>,
) -> Result<DimensionEstimate> {
    let offsets = offsets.max(1);
    let d = sampler.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shifts: Vec<Vec<f64>> = (0..offsets)
        .map(|k| {
            (0..d)
                .map(|_| if k == 0 { 0.0 } else { rng.random::<f64>() })
                .collect()
        })
        .collect();
    let mut counts = Vec::with_capacity(scales.len());
    for &eps in scales {
        let mut total = 0.0;
        for s in &shifts {
            let off: Vec<f64> = s.iter().map(|u| u * eps).collect();
            total += count_cells(sampler, eps, &off, window)? as f64;
        }
        counts.push(total / offsets as f64);
    }
    estimate_dimension(scales, &counts)
}

/// Straight segment between two points, a smooth baseline.
#[derive(Clone, Debug)]
pub struct SegmentSampler {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
}

impl PointSampler for SegmentSampler {
    fn dim(&self) -> usize {
        self.start.len()
    }

    fn min_pitch(&self) -> f64 {
        0.0
    }

    fn chunks(&self, _pitch: f64) -> usize {
        1
    }

    fn for_each_in_chunk(&self, pitch: f64, _chunk: usize, f: &mut dyn FnMut(&[f64])) {
        let len = dist(&self.start, &self.end);
        let steps = (len / pitch).ceil().max(1.0) as usize;
        let mut p = vec![0.0; self.start.len()];
        for k in 0..=steps {
            let t = k as f64 / steps as f64;
            for (i, v) in p.iter_mut().enumerate() {
                *v = self.start[i] + t * (self.end[i] - self.start[i]);
            }
            f(&p);
        }
    }
}

/// Boundary of an axis-aligned rectangle `[0, w] × [0, h]`.
#[derive(Clone, Debug)]
pub struct RectangleBoundarySampler {
    pub width: f64,
    pub height: f64,
}

impl PointSampler for RectangleBoundarySampler {
    fn dim(&self) -> usize {
        2
    }

    fn min_pitch(&self) -> f64 {
        0.0
    }

    fn chunks(&self, _pitch: f64) -> usize {
        4
    }

    fn for_each_in_chunk(&self, pitch: f64, chunk: usize, f: &mut dyn FnMut(&[f64])) {
        let (w, h) = (self.width, self.height);
        let corners = [[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]];
        let seg = SegmentSampler {
            start: corners[chunk].to_vec(),
            end: corners[(chunk + 1) % 4].to_vec(),
        };
        seg.for_each_in_chunk(pitch, 0, f);
    }
}

/// Flat unit square `[0,1]²` embedded in `ℝ³`, a smooth surface baseline.
#[derive(Clone, Debug)]
pub struct SquareSurfaceSampler;

impl PointSampler for SquareSurfaceSampler {
    fn dim(&self) -> usize {
        3
    }

    fn min_pitch(&self) -> f64 {
        0.0
    }

    fn chunks(&self, pitch: f64) -> usize {
        (1.0 / pitch).ceil() as usize + 1
    }

    fn for_each_in_chunk(&self, pitch: f64, chunk: usize, f: &mut dyn FnMut(&[f64])) {
        let steps = (1.0 / pitch).ceil() as usize;
        let u = (chunk as f64 / steps as f64).min(1.0);
        for k in 0..=steps {
            let v = k as f64 / steps as f64;
            f(&[u, v, 0.5 * (u + v)]);
        }
    }
}

/// Graph `{(x, f(x)) : x ∈ [x0, x1]}` of a fractal function, optionally times
/// an interval in a third coordinate.
///
/// The graph is approximated by the polyline through samples at spacing
/// `pitch / oversample` in `x`; gaps between consecutive samples are filled
/// so emitted points are at most `pitch` apart.
#[derive(Clone, Debug)]
pub struct GraphSampler {
    pub function: FractalFunction,
    pub x0: f64,
    pub x1: f64,
    pub oversample: usize,
    pub interval: Option<(f64, f64)>,
}

impl GraphSampler {
    pub fn new(function: FractalFunction, x0: f64, x1: f64) -> Self {
        Self {
            function,
            x0,
            x1,
            oversample: 4,
            interval: None,
        }
    }

    /// `graph × [lo, hi]` in `ℝ³`.
    pub fn times_interval(mut self, lo: f64, hi: f64) -> Self {
        self.interval = Some((lo, hi));
        self
    }

    fn x_steps(&self, pitch: f64) -> usize {
        ((self.x1 - self.x0) * self.oversample as f64 / pitch).ceil() as usize
    }
}

const GRAPH_CHUNK: usize = 4096;

impl PointSampler for GraphSampler {
    fn dim(&self) -> usize {
        if self.interval.is_some() {
            3
        } else {
            2
        }
    }

    fn min_pitch(&self) -> f64 {
        0.0
    }

    fn chunks(&self, pitch: f64) -> usize {
        self.x_steps(pitch).div_ceil(GRAPH_CHUNK)
    }

    fn for_each_in_chunk(&self, pitch: f64, chunk: usize, f: &mut dyn FnMut(&[f64])) {
        let steps = self.x_steps(pitch);
        let dx = (self.x1 - self.x0) / steps as f64;
        let k0 = chunk * GRAPH_CHUNK;
        let k1 = ((chunk + 1) * GRAPH_CHUNK).min(steps);
        let mut emit = |x: f64, y: f64| match self.interval {
            None => f(&[x, y]),
            Some((lo, hi)) => {
                let m = ((hi - lo) / pitch).ceil().max(1.0) as usize;
                for j in 0..=m {
                    f(&[x, y, lo + (hi - lo) * j as f64 / m as f64]);
                }
            }
        };
        let mut prev_x = self.x0 + dx * k0 as f64;
        let mut prev_y = self.function.eval(prev_x);
        emit(prev_x, prev_y);
        for k in k0 + 1..=k1 {
            let x = self.x0 + dx * k as f64;
            let y = self.function.eval(x);
            let gap = (x - prev_x).hypot(y - prev_y);
            let fill = (gap / pitch).ceil().max(1.0) as usize;
            for j in 1..=fill {
                let t = j as f64 / fill as f64;
                emit(prev_x + t * (x - prev_x), prev_y + t * (y - prev_y));
            }
            prev_x = x;
            prev_y = y;
        }
    }
}

/// Parameter box for sampling a patch of `∂(W₁ ×₂ E(a₂))` as the graph
/// `r₂ = √((a₂/π)(1 − r₁²/R₁(θ₁)²))` over `(r₁, θ₁, θ₂)`.
#[derive(Clone, Debug)]
pub struct BoundaryPatch {
    pub r1: (f64, f64),
    pub theta1: (f64, f64),
    pub theta2: (f64, f64),
    /// Minimum allowed value of `1 − r₁²/R₁(θ₁)²` on the box.
    pub margin: f64,
}

/// Samples a patch of the boundary of `W₁ ×₂ E(a₂)` in `ℝ⁴`.
///
/// The box keeps `r₁` away from 0 and the radicand above `margin`, so the
/// patch stays away from `z₁ = 0` and `z₂ = 0` where the graph description
/// degenerates.
#[derive(Clone, Debug)]
pub struct BoundaryGraphSampler {
    profile: RadialProfile,
    a2: f64,
    patch: BoundaryPatch,
    // θ₁ nodes: profile grid angles inside the box plus the endpoints
    theta_nodes: Vec<f64>,
    r2_max: f64,
    slope_r1: f64,
    cell_width: f64,
}

impl BoundaryGraphSampler {
    pub fn new(profile: RadialProfile, a2: f64, patch: BoundaryPatch) -> Result<Self> {
        if !(a2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "a2 must be positive, got {a2}"
            )));
        }
        let (r_lo, r_hi) = patch.r1;
        if !(r_lo > 0.0 && r_hi > r_lo) {
            return Err(Error::Precondition(format!(
                "r1 range ({r_lo}, {r_hi}) must be increasing and bounded away from 0"
            )));
        }
        if !(patch.theta1.1 > patch.theta1.0 && patch.theta2.1 > patch.theta2.0) {
            return Err(Error::Precondition(
                "angle ranges must be increasing".into(),
            ));
        }
        if !(patch.margin > 0.0) {
            return Err(Error::Precondition(
                "radicand margin must be positive".into(),
            ));
        }
        let n = profile.grid_size();
        let h = TAU / n as f64;
        let mut theta_nodes = vec![patch.theta1.0];
        let first = (patch.theta1.0 / h).floor() as i64 + 1;
        let mut k = first;
        while (k as f64) * h < patch.theta1.1 {
            theta_nodes.push(k as f64 * h);
            k += 1;
        }
        theta_nodes.push(patch.theta1.1);
        let mut r_min = f64::INFINITY;
        for w in theta_nodes.windows(2) {
            for j in 0..=8 {
                let t = w[0] + (w[1] - w[0]) * j as f64 / 8.0;
                r_min = r_min.min(profile.radius(t));
            }
        }
        let radicand_min = 1.0 - r_hi * r_hi / (r_min * r_min);
        if radicand_min < patch.margin {
            return Err(Error::Precondition(format!(
                "radicand drops to {radicand_min:.4} below margin {} on the box",
                patch.margin
            )));
        }
        let cell_width = theta_nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max);
        let r2_max = ((a2 / PI) * (1.0 - r_lo * r_lo / profile.max_radius().powi(2))).sqrt();
        let r2_min = ((a2 / PI) * radicand_min).sqrt();
        // |∂r₂/∂r₁| = (a₂/π) r₁ / (R² r₂)
        let slope_r1 = (a2 / PI) * r_hi / (r_min * r_min * r2_min);
        Ok(Self {
            profile,
            a2,
            patch,
            theta_nodes,
            r2_max,
            slope_r1,
            cell_width,
        })
    }

    /// Point on the patch for the given parameters.
    pub fn point(&self, r1: f64, theta1: f64, theta2: f64) -> [f64; 4] {
        let big_r = self.profile.radius(theta1);
        let r2 = ((self.a2 / PI) * (1.0 - r1 * r1 / (big_r * big_r)))
            .max(0.0)
            .sqrt();
        [
            r1 * theta1.cos(),
            r1 * theta1.sin(),
            r2 * theta2.cos(),
            r2 * theta2.sin(),
        ]
    }

    fn r1_steps(&self, pitch: f64) -> usize {
        let lip = (1.0 + self.slope_r1 * self.slope_r1).sqrt();
        ((self.patch.r1.1 - self.patch.r1.0) * lip / pitch)
            .ceil()
            .max(1.0) as usize
    }
}

impl PointSampler for BoundaryGraphSampler {
    fn dim(&self) -> usize {
        4
    }

    fn min_pitch(&self) -> f64 {
        0.0
    }

    fn chunks(&self, pitch: f64) -> usize {
        self.r1_steps(pitch) + 1
    }

    fn for_each_in_chunk(&self, pitch: f64, chunk: usize, f: &mut dyn FnMut(&[f64])) {
        let steps = self.r1_steps(pitch);
        let (r_lo, r_hi) = self.patch.r1;
        let r1 = r_lo + (r_hi - r_lo) * chunk as f64 / steps as f64;
        let (t2_lo, t2_hi) = self.patch.theta2;
        let t2_steps = ((t2_hi - t2_lo) * self.r2_max / pitch).ceil().max(1.0) as usize;
        // θ₁ sub-steps within each profile cell keep the smooth part resolved
        let sub = (self.cell_width * r_hi * 4.0 / pitch).ceil().max(1.0) as usize;
        for j in 0..=t2_steps {
            let t2 = t2_lo + (t2_hi - t2_lo) * j as f64 / t2_steps as f64;
            let mut prev = self.point(r1, self.theta_nodes[0], t2);
            f(&prev);
            for w in self.theta_nodes.windows(2) {
                for s in 1..=sub {
                    let t1 = w[0] + (w[1] - w[0]) * s as f64 / sub as f64;
                    let p = self.point(r1, t1, t2);
                    let gap = dist(&prev, &p);
                    let fill = (gap / pitch).ceil().max(1.0) as usize;
                    for q in 1..=fill {
                        let t = q as f64 / fill as f64;
                        let mid = [
                            prev[0] + t * (p[0] - prev[0]),
                            prev[1] + t * (p[1] - prev[1]),
                            prev[2] + t * (p[2] - prev[2]),
                            prev[3] + t * (p[3] - prev[3]),
                        ];
                        f(&mid);
                    }
                    prev = p;
                }
            }
        }
    }
}

/// Local box-counting experiment on `∂(W₁ ×₂ E(a₂)) ⊂ ℝ⁴`.
///
/// Counting happens in a cube of side `side` centred at the boundary point
/// with parameters `(r₁, θ₁, θ₂) = (r1_fraction·R₁(θ₁), theta1, theta2)`;
/// the sampled parameter box is just large enough to cover the cube. Box
/// sizes are `side·2^{−k}` so the cube is always a whole number of cells.
#[derive(Clone, Debug)]
pub struct BoundaryPatchExperiment {
    pub profile: RadialProfile,
    pub a2: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub r1_fraction: f64,
    pub side: f64,
}

impl BoundaryPatchExperiment {
    pub fn new(profile: RadialProfile, a2: f64) -> Self {
        Self {
            profile,
            a2,
            theta1: 0.7,
            theta2: 0.3,
            r1_fraction: 0.6,
            side: 0.02,
        }
    }

    /// The sampler and its counting window.
    pub fn setup(&self) -> Result<(BoundaryGraphSampler, CountWindow)> {
        if !(self.r1_fraction > 0.0 && self.r1_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "r1_fraction must lie in (0, 1), got {}",
                self.r1_fraction
            )));
        }
        if !(self.a2 > 0.0) || !(self.side > 0.0) {
            return Err(Error::InvalidParameter(
                "a2 and side must be positive".into(),
            ));
        }
        let r1 = self.r1_fraction * self.profile.radius(self.theta1);
        let big_r = self.profile.radius(self.theta1);
        let r2 = ((self.a2 / PI) * (1.0 - r1 * r1 / (big_r * big_r))).sqrt();
        let center = [
            r1 * self.theta1.cos(),
            r1 * self.theta1.sin(),
            r2 * self.theta2.cos(),
            r2 * self.theta2.sin(),
        ];
        // the cube reaches 0.5·√2·side from the centre within each plane
        let m = 0.75 * self.side;
        if m >= r1 || m >= 0.8 * r2 {
            return Err(Error::Precondition(format!(
                "counting cube of side {} is too large for the chosen point",
                self.side
            )));
        }
        let patch = BoundaryPatch {
            r1: (r1 - m, r1 + m),
            theta1: (self.theta1 - m / (r1 - m), self.theta1 + m / (r1 - m)),
            theta2: (self.theta2 - m / (0.8 * r2), self.theta2 + m / (0.8 * r2)),
            margin: 0.05,
        };
        let sampler = BoundaryGraphSampler::new(self.profile.clone(), self.a2, patch)?;
        Ok((sampler, CountWindow::centered(&center, self.side)?))
    }

    /// Box sizes `side·2^{−k}` for `k = lo..=hi`.
    pub fn scales(&self, lo: u32, hi: u32) -> Vec<f64> {
        dyadic_scales(lo, hi)
            .into_iter()
            .map(|e| e * self.side)
            .collect()
    }

    pub fn run(&self, lo: u32, hi: u32, offsets: usize, seed: u64) -> Result<DimensionEstimate> {
        let (sampler, window) = self.setup()?;
        box_dimension_in_window(&sampler, &window, &self.scales(lo, hi), offsets, seed)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weierstrass_values() {
        let w0 = FractalFunction::weierstrass(0.5, 3.0, 0).unwrap();
        assert_eq!(w0.eval(0.0), 1.0);
        let w = FractalFunction::weierstrass(0.5, 3.0, 50).unwrap();
        assert!((w.eval(0.0) - 2.0).abs() < 1e-15);
        assert!(w.truncation_bound().unwrap() < 1e-15);
    }

    #[test]
    fn truncation_bound_holds() {
        let long = FractalFunction::weierstrass(0.6, 2.5, 60).unwrap();
        let short = FractalFunction::weierstrass(0.6, 2.5, 10).unwrap();
        let bound = short.truncation_bound().unwrap();
        for k in 0..200 {
            let x = k as f64 / 199.0;
            assert!((long.eval(x) - short.eval(x)).abs() <= bound + 1e-12);
        }
    }

    #[test]
    fn xiao_zhou_zero_and_triangle() {
        let f = FractalFunction::xiao_zhou(0.5, 1.5, 2.0, 6).unwrap();
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(triangle_wave(0.25), 0.5);
        assert_eq!(triangle_wave(-0.25), 0.5);
        assert_eq!(triangle_wave(1.25), 0.5);
        assert_eq!(triangle_wave(0.5), 1.0);
        assert!(FractalFunction::xiao_zhou(0.5, 2.0, 1.5, 6).is_err());
    }

    #[test]
    fn phase_variant_is_seeded() {
        let a = FractalFunction::weierstrass_phase_seeded(0.5, 3.0, 10, 9).unwrap();
        let b = FractalFunction::weierstrass_phase_seeded(0.5, 3.0, 10, 9).unwrap();
        assert_eq!(a, b);
        if let FractalFunction::WeierstrassPhase { phases, .. } = &a {
            assert_eq!(phases.len(), 11);
        }
        let zero = FractalFunction::weierstrass_phase(0.5, 3.0, vec![0.0; 11]).unwrap();
        let plain = FractalFunction::weierstrass(0.5, 3.0, 10).unwrap();
        assert!((zero.eval(0.37) - plain.eval(0.37)).abs() < 1e-15);
    }

    #[test]
    fn unit_segment_count() {
        let seg = SegmentSampler {
            start: vec![0.0, 0.0],
            end: vec![1.0, 0.0],
        };
        for k in [4usize, 10, 33] {
            let eps = 1.0 / k as f64;
            let n = box_count(&seg, eps, &[0.0, 0.0]).unwrap();
            assert!(n == k || n == k + 1, "k={k} n={n}");
        }
    }

    #[test]
    fn square_boundary_count() {
        let sq = RectangleBoundarySampler {
            width: 1.0,
            height: 1.0,
        };
        for k in [8usize, 32, 100] {
            let eps = 1.0 / k as f64;
            let n = box_count(&sq, eps, &[eps * 0.5, eps * 0.5]).unwrap();
            assert!((n as f64 - 4.0 * k as f64).abs() <= 4.0, "k={k} n={n}");
        }
    }

    #[test]
    fn coarse_pitch_rejected() {
        struct Coarse;
        impl PointSampler for Coarse {
            fn dim(&self) -> usize {
                2
            }
            fn min_pitch(&self) -> f64 {
                0.1
            }
            fn chunks(&self, _: f64) -> usize {
                1
            }
            fn for_each_in_chunk(&self, _: f64, _: usize, _: &mut dyn FnMut(&[f64])) {}
        }
        assert!(matches!(
            box_count(&Coarse, 0.2, &[0.0, 0.0]),
            Err(Error::PitchTooCoarse { .. })
        ));
    }

    #[test]
    fn fit_recovers_power_law() {
        let scales = dyadic_scales(1, 8);
        let counts: Vec<f64> = scales.iter().map(|e| 3.0 * e.powf(-1.7)).collect();
        let est = estimate_dimension(&scales, &counts).unwrap();
        assert!((est.dimension - 1.7).abs() < 1e-12);
        assert!((est.r_squared - 1.0).abs() < 1e-12);
        assert!(est.monotone);
    }

    #[test]
    fn constant_counts_flagged() {
        let scales = dyadic_scales(1, 6);
        let counts = vec![5.0; 6];
        assert!(matches!(
            estimate_dimension(&scales, &counts),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn segment_dimension() {
        let seg = SegmentSampler {
            start: vec![0.1, 0.2],
            end: vec![0.9, 0.7],
        };
        let est = box_dimension(&seg, &dyadic_scales(4, 12), 4, 3).unwrap();
        assert!((est.dimension - 1.0).abs() < 0.02, "{}", est.dimension);
    }

    #[test]
    fn smooth_surface_dimension() {
        let est = box_dimension(&SquareSurfaceSampler, &dyadic_scales(3, 8), 4, 3).unwrap();
        assert!((est.dimension - 2.0).abs() < 0.05, "{}", est.dimension);
    }

    #[test]
    fn box_count_is_thread_independent() {
        let g = GraphSampler::new(
            FractalFunction::weierstrass(0.5, 3.0, 20).unwrap(),
            0.0,
            1.0,
        );
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one.install(|| box_count(&g, 1.0 / 512.0, &[0.0, 0.0]).unwrap());
        let b = many.install(|| box_count(&g, 1.0 / 512.0, &[0.0, 0.0]).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn window_counts_whole_cells_only() {
        let seg = SegmentSampler {
            start: vec![0.0, 0.0],
            end: vec![1.0, 0.0],
        };
        let w = CountWindow::new(vec![0.25, -0.25], 0.5).unwrap();
        assert_eq!(
            box_count_in_window(&seg, 1.0 / 16.0, &[0.0; 2], &w).unwrap(),
            8
        );
        // a shifted grid still sees exactly eight whole cells
        assert_eq!(
            box_count_in_window(&seg, 1.0 / 16.0, &[0.01, 0.02], &w).unwrap(),
            8
        );
        assert!(box_count_in_window(&seg, 1.0, &[0.0; 2], &w).is_err());
    }

    #[test]
    fn windowed_flat_patch_has_integer_dimension() {
        let w = CountWindow::centered(&[0.5, 0.5, 0.5], 0.5).unwrap();
        let scales: Vec<f64> = (2..=6).map(|k| 0.5 * 0.5f64.powi(k)).collect();
        let est = box_dimension_in_window(&SquareSurfaceSampler, &w, &scales, 4, 1).unwrap();
        assert!((est.dimension - 2.0).abs() < 0.02, "{}", est.dimension);
    }

    #[test]
    fn boundary_patch_rejects_oversized_cube() {
        let mut exp = BoundaryPatchExperiment::new(RadialProfile::disk(PI).unwrap(), 1.0);
        exp.side = 1.0;
        assert!(exp.setup().is_err());
        exp.side = 0.02;
        let (_, w) = exp.setup().unwrap();
        assert_eq!(w.side, 0.02);
    }
}
