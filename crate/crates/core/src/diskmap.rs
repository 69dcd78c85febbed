//! Area-preserving, 1-homogeneous maps from disks onto star-shaped domains.
//!
//! For a profile `W` of area `a` the circle map `φ` solves
//! `S(φ(θ)) = aθ/2π`, and
//!
//! ```text
//!     ψ(ρe^{iθ}) = ρ √(π/a) R(φ(θ)) e^{iφ(θ)},    ψ(0) = 0
//! ```
//!
//! is the cotangent lift of `φ` in the coordinates `(θ, A = |z|²/2)`, i.e.
//! `(θ, A) ↦ (φ(θ), A / φ'(θ))`. It maps `𝔻(a)` onto `W`, each circle
//! `∂𝔻(A)` onto `√(A/a)·∂W`, and has Jacobian determinant 1 wherever `R`
//! is C¹.
//!
//! The cut-off variant integrates the time-dependent Hamiltonian
//! `ρ(|z|²) f_t(θ) A` whose flow at `ρ ≡ 1` is the lift of the isotopy
//! `φᵗ` defined by `S_t(φᵗ(θ)) = aθ/2π`, `S_t = (1−t)·aθ/2π + t·S`.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry2d::{polar_angle, Piece, RadialProfile};
use crate::product::ProductDomain;
use crate::sampling::par_batches;

/// The degree-one circle map `φ` with `S(φ(θ)) = aθ/2π`.
#[derive(Clone, Debug)]
pub struct MonotoneCircleMap {
    profile: Arc<RadialProfile>,
    table: Vec<f64>,
}

impl MonotoneCircleMap {
    pub fn new(profile: Arc<RadialProfile>) -> Self {
        let n = profile.grid_size();
        let a = profile.area();
        let table = (0..=n)
            .map(|j| profile.inverse_sector_area(a * j as f64 / n as f64))
            .collect();
        Self { profile, table }
    }

    /// `φ(θ)`, unwrapped: `φ(θ + 2π) = φ(θ) + 2π`.
    #[inline]
    pub fn forward(&self, theta: f64) -> f64 {
        circle_map(&self.profile, theta)
    }

    /// `φ⁻¹(x) = 2π S(x) / a`.
    #[inline]
    pub fn inverse(&self, x: f64) -> f64 {
        TAU * self.profile.sector_area(x) / self.profile.area()
    }

    /// `φ'(θ) = a / (π R(φ(θ))²)`.
    pub fn derivative(&self, theta: f64) -> f64 {
        let r = self.profile.radius(self.forward(theta));
        self.profile.area() / (PI * r * r)
    }

    /// `φ` at the uniform grid angles `2πj/N`, `j = 0..=N`.
    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn profile(&self) -> &Arc<RadialProfile> {
        &self.profile
    }
}

/// The angle map of a profile.
pub fn angle_map(profile: Arc<RadialProfile>) -> MonotoneCircleMap {
    MonotoneCircleMap::new(profile)
}

#[inline]
fn circle_map(profile: &RadialProfile, theta: f64) -> f64 {
    profile.inverse_sector_area(profile.area() * theta / TAU)
}

/// `ψ: 𝔻(a) → W`, extended 1-homogeneously to the plane.
pub fn disk_to_domain(profile: &RadialProfile, z: [f64; 2]) -> [f64; 2] {
    let rho = z[0].hypot(z[1]);
    if rho == 0.0 {
        return [0.0, 0.0];
    }
    let phi = circle_map(profile, polar_angle(z));
    let r = rho * (PI / profile.area()).sqrt() * profile.radius(phi);
    [r * phi.cos(), r * phi.sin()]
}

/// `ψ⁻¹: W → 𝔻(a)`.
pub fn domain_to_disk(profile: &RadialProfile, w: [f64; 2]) -> [f64; 2] {
    let g = profile.gauge(w);
    if g == 0.0 {
        return [0.0, 0.0];
    }
    let x = polar_angle(w);
    let theta = TAU * profile.sector_area(x) / profile.area();
    let rho = g * (profile.area() / PI).sqrt();
    [rho * theta.cos(), rho * theta.sin()]
}

/// Factor-wise `ψᵢ`, mapping `E(a₁,…,aₙ)` onto `W₁ ×₂ ⋯ ×₂ Wₙ`.
pub fn product_map(factors: &[Arc<RadialProfile>], z: &[f64]) -> Result<Vec<f64>> {
    apply_factorwise(factors, z, disk_to_domain)
}

/// Factor-wise `ψᵢ⁻¹`.
pub fn product_map_inverse(factors: &[Arc<RadialProfile>], w: &[f64]) -> Result<Vec<f64>> {
    apply_factorwise(factors, w, domain_to_disk)
}

fn apply_factorwise(
    factors: &[Arc<RadialProfile>],
    z: &[f64],
    map: fn(&RadialProfile, [f64; 2]) -> [f64; 2],
) -> Result<Vec<f64>> {
    if z.len() != 2 * factors.len() {
        return Err(Error::DimensionMismatch {
            expected: 2 * factors.len(),
            got: z.len(),
        });
    }
    let mut out = Vec::with_capacity(z.len());
    for (i, f) in factors.iter().enumerate() {
        let w = map(f, [z[2 * i], z[2 * i + 1]]);
        out.extend_from_slice(&w);
    }
    Ok(out)
}

/// Central-difference Jacobian determinant of a planar map.
pub fn jacobian_determinant<F: Fn([f64; 2]) -> [f64; 2]>(map: F, z: [f64; 2], step: f64) -> f64 {
    let px = map([z[0] + step, z[1]]);
    let mx = map([z[0] - step, z[1]]);
    let py = map([z[0], z[1] + step]);
    let my = map([z[0], z[1] - step]);
    let j11 = (px[0] - mx[0]) / (2.0 * step);
    let j21 = (px[1] - mx[1]) / (2.0 * step);
    let j12 = (py[0] - my[0]) / (2.0 * step);
    let j22 = (py[1] - my[1]) / (2.0 * step);
    j11 * j22 - j12 * j21
}

/// Smooth cut-off `ρ(u)` in `u = |z|²`: `≡ 0` for `u ≤ δ/4π`, `≡ 1` for `u ≥ δ/π`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoff {
    delta: f64,
}

impl Cutoff {
    pub fn new(delta: f64) -> Result<Self> {
        if delta > 0.0 && delta.is_finite() {
            Ok(Self { delta })
        } else {
            Err(Error::InvalidParameter(format!(
                "cut-off radius must be positive, got {delta}"
            )))
        }
    }

    /// Cut-off radius in area units.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    fn bounds(&self) -> (f64, f64) {
        let hi = self.delta / PI;
        (0.25 * hi, hi)
    }

    /// `(ρ(u), ρ'(u))`.
    pub fn eval(&self, u: f64) -> (f64, f64) {
        let (lo, hi) = self.bounds();
        if u <= lo {
            return (0.0, 0.0);
        }
        if u >= hi {
            return (1.0, 0.0);
        }
        let w = hi - lo;
        let s = (u - lo) / w;
        let e0 = (-1.0 / s).exp();
        let e1 = (-1.0 / (1.0 - s)).exp();
        // the exponentials underflow before their quotients do: guard 0/0
        let d0 = if e0 > 0.0 { e0 / (s * s) } else { 0.0 };
        let d1 = if e1 > 0.0 {
            -e1 / ((1.0 - s) * (1.0 - s))
        } else {
            0.0
        };
        let den = e0 + e1;
        let rho = e0 / den;
        let drho = (d0 * den - e0 * (d0 + d1)) / (den * den) / w;
        (rho, drho)
    }
}

/// Parameters of the cut-off product map.
#[derive(Clone, Debug, PartialEq)]
pub struct CutoffMapConfig {
    /// Per-factor cut-off radii `δᵢ` (area units).
    pub cutoffs: Vec<Cutoff>,
    /// RK4 steps over `t ∈ [0, 1]`.
    pub steps: usize,
    /// Sandwich target `ε`.
    pub epsilon: f64,
    /// Containment constant `ε′ < √(ε/n)`.
    pub epsilon_prime: f64,
    /// Accepted step-halving error estimate for integrated points.
    pub tolerance: f64,
}

impl CutoffMapConfig {
    /// Picks `δᵢ` so the cut-off flow keeps `𝔻(δᵢ)` inside `ε′Wᵢ`.
    ///
    /// Starts from `δ = 0.9·ε′²·min(a, πR_min²)` and halves until a scan of
    /// the closed disk `𝔻(δ)` confirms the containment.
    pub fn calibrate(factors: &[Arc<RadialProfile>], epsilon: f64, steps: usize) -> Result<Self> {
        check_epsilon(epsilon)?;
        if factors.is_empty() {
            return Err(Error::InvalidParameter("need at least one factor".into()));
        }
        let n = factors.len() as f64;
        let epsilon_prime = 0.9 * (epsilon / n).sqrt();
        let tolerance = 1e-6;
        let mut cutoffs = Vec::with_capacity(factors.len());
        for w in factors {
            let rmin = w.min_radius();
            let mut delta = 0.9 * epsilon_prime.powi(2) * w.area().min(PI * rmin * rmin);
            let mut accepted = None;
            for _ in 0..30 {
                let cut = Cutoff::new(delta)?;
                if scan_small_disk(w, &cut, steps, tolerance)? <= epsilon_prime {
                    accepted = Some(cut);
                    break;
                }
                delta *= 0.5;
            }
            cutoffs.push(accepted.ok_or_else(|| {
                Error::Infeasible("no cut-off radius keeps the small disk inside ε′W".into())
            })?);
        }
        Ok(Self {
            cutoffs,
            steps,
            epsilon,
            epsilon_prime,
            tolerance,
        })
    }

    pub fn validate(&self, factors: &[Arc<RadialProfile>]) -> Result<()> {
        check_epsilon(self.epsilon)?;
        if self.cutoffs.len() != factors.len() {
            return Err(Error::DimensionMismatch {
                expected: factors.len(),
                got: self.cutoffs.len(),
            });
        }
        let bound = (self.epsilon / factors.len() as f64).sqrt();
        if !(self.epsilon_prime > 0.0 && self.epsilon_prime < bound) {
            return Err(Error::Precondition(format!(
                "ε′ = {} must lie in (0, √(ε/n) = {bound})",
                self.epsilon_prime
            )));
        }
        for (c, w) in self.cutoffs.iter().zip(factors) {
            if c.delta >= w.area() * self.epsilon_prime.powi(2) {
                return Err(Error::Precondition(format!(
                    "cut-off radius {} must be below a·ε′² = {}",
                    c.delta,
                    w.area() * self.epsilon_prime.powi(2)
                )));
            }
        }
        if self.steps < 2 {
            return Err(Error::Precondition(
                "need at least 2 integration steps".into(),
            ));
        }
        Ok(())
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "ε must lie in (0, 1), got {epsilon}"
        )))
    }
}

/// Largest gauge of the cut-off image of the closed disk `𝔻(δ)`, scanned on
/// a polar grid over the part where the map is not the identity.
fn scan_small_disk(w: &RadialProfile, cut: &Cutoff, steps: usize, tol: f64) -> Result<f64> {
    let rmax = (cut.delta / PI).sqrt();
    let grid: Vec<(usize, usize)> = (3..=8).flat_map(|i| (0..64).map(move |k| (i, k))).collect();
    let gauges = grid
        .par_iter()
        .map(|&(i, k)| {
            let r = rmax * i as f64 / 8.0;
            let th = TAU * k as f64 / 64.0;
            cutoff_disk_map(w, cut, steps, tol, [r * th.cos(), r * th.sin()])
                .map(|img| w.gauge(img))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(gauges.into_iter().fold(0.0, f64::max))
}

/// The isotopy's generating field `f_t(x)` and `∂ₓf_t(x)` on one smooth
/// piece of `R`, with `x = θ − shift` measured inside the turn.
///
/// `f_t = −D/S_t'` with `D(x) = S(x) − ax/2π` (periodic) and
/// `S_t' = (1−t)a/2π + t R²/2`.
fn isotopy_field(w: &RadialProfile, piece: Piece, shift: f64, t: f64, theta: f64) -> (f64, f64) {
    let a = w.area();
    let x = theta - shift;
    let (r, dr, s) = w.piece_eval(piece, x);
    let d = s - a * x / TAU;
    let dd = 0.5 * r * r - a / TAU;
    let st = (1.0 - t) * a / TAU + 0.5 * t * r * r;
    let dst = t * r * dr;
    let f = -d / st;
    let df = -(dd * st - d * dst) / (st * st);
    (f, df)
}

/// One smooth piece of the right-hand side, in pseudo-time `τ ∈ [0, 1]`.
struct PieceField<'a> {
    w: &'a RadialProfile,
    cut: &'a Cutoff,
    piece: Piece,
    shift: f64,
    backward: bool,
}

impl PieceField<'_> {
    /// `d(θ, A)/dτ` for the cut-off Hamiltonian `ρ(2A) f_t(θ) A`.
    fn eval(&self, tau: f64, state: [f64; 2]) -> [f64; 2] {
        let [theta, area] = state;
        let (rho, drho) = self.cut.eval(2.0 * area);
        if rho == 0.0 && drho == 0.0 {
            return [0.0, 0.0];
        }
        let (t, dir) = if self.backward {
            (1.0 - tau, -1.0)
        } else {
            (tau, 1.0)
        };
        let (f, df) = isotopy_field(self.w, self.piece, self.shift, t, theta);
        let g = rho * area;
        let dg = rho + 2.0 * area * drho;
        [dir * dg * f, -dir * g * df]
    }

    fn rk4(&self, tau: f64, s: [f64; 2], h: f64) -> [f64; 2] {
        let k1 = self.eval(tau, s);
        let k2 = self.eval(tau + 0.5 * h, add(s, k1, 0.5 * h));
        let k3 = self.eval(tau + 0.5 * h, add(s, k2, 0.5 * h));
        let k4 = self.eval(tau + h, add(s, k3, h));
        [
            s[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            s[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    }
}

/// Classical RK4 in `(θ, A)` over `τ ∈ [0, 1]`.
///
/// `R` is only piecewise smooth (grid cells, polygon edges), so a step that
/// would leave the current piece is cut where `θ` reaches the piece end,
/// located by Illinois regula falsi; every stage is then evaluated on one
/// polynomial piece and the scheme keeps its fourth order.
fn rk4_flow(
    w: &RadialProfile,
    cut: &Cutoff,
    steps: usize,
    state: [f64; 2],
    backward: bool,
) -> [f64; 2] {
    let h = 1.0 / steps as f64;
    let mut s = state;
    // piece entered by the last landing, with its turn offset
    let mut entered: Option<(Piece, f64)> = None;
    for k in 0..steps {
        let mut tau = k as f64 * h;
        let end = (k + 1) as f64 * h;
        // each pass either finishes the step or lands on a piece end
        for _ in 0..64 {
            let remaining = end - tau;
            if remaining <= 0.0 {
                break;
            }
            let (piece, shift) = match entered.take() {
                Some(p) => p,
                None => {
                    let shift = TAU * (s[0] / TAU).floor();
                    let probe = PieceField {
                        w,
                        cut,
                        piece: w.piece_at(s[0] - shift, true),
                        shift,
                        backward,
                    };
                    let v = probe.eval(tau, s);
                    if v == [0.0, 0.0] {
                        // frozen region: ρ vanishes and A cannot change
                        return s;
                    }
                    (w.piece_at(s[0] - shift, v[0] >= 0.0), shift)
                }
            };
            let field = PieceField {
                w,
                cut,
                piece,
                shift,
                backward,
            };
            let (lo, hi) = (piece.lo + shift, piece.hi + shift);
            let full = field.rk4(tau, s, remaining);
            if full[0] >= lo && full[0] <= hi {
                s = full;
                break;
            }
            let upward = full[0] > hi;
            let edge = if upward { hi } else { lo };
            let (mut a, mut b) = (0.0, remaining);
            let (mut fa, mut fb) = (s[0] - edge, full[0] - edge);
            if fa == 0.0 || (fa > 0.0) == (fb > 0.0) {
                // left and came back, or already on the edge moving away
                s = full;
                break;
            }
            let mut hit = full;
            let mut hit_at = remaining;
            let mut side = 0;
            for _ in 0..100 {
                let mut m = (a * fb - b * fa) / (fb - fa);
                if !(m > a && m < b) {
                    m = 0.5 * (a + b);
                }
                let y = field.rk4(tau, s, m);
                let fm = y[0] - edge;
                hit = y;
                hit_at = m;
                if fm.abs() <= 4.0 * f64::EPSILON * edge.abs().max(1.0)
                    || b - a <= f64::EPSILON * remaining
                {
                    break;
                }
                if (fm > 0.0) == (fb > 0.0) {
                    b = m;
                    fb = fm;
                    if side == -1 {
                        fa *= 0.5;
                    }
                    side = -1;
                } else {
                    a = m;
                    fa = fm;
                    if side == 1 {
                        fb *= 0.5;
                    }
                    side = 1;
                }
            }
            let (local, next_shift) = match (upward, piece.hi >= TAU, piece.lo <= 0.0) {
                (true, true, _) => (0.0, shift + TAU),
                (true, false, _) => (piece.hi, shift),
                (false, _, true) => (TAU, shift - TAU),
                (false, _, false) => (piece.lo, shift),
            };
            entered = Some((w.piece_at(local, upward), next_shift));
            s = [local + next_shift, hit[1]];
            tau += hit_at;
        }
    }
    s
}

#[inline]
fn add(s: [f64; 2], k: [f64; 2], h: f64) -> [f64; 2] {
    [s[0] + h * k[0], s[1] + h * k[1]]
}

fn to_polar_area(z: [f64; 2]) -> [f64; 2] {
    [polar_angle(z), 0.5 * (z[0] * z[0] + z[1] * z[1])]
}

fn from_polar_area(s: [f64; 2]) -> [f64; 2] {
    let r = (2.0 * s[1].max(0.0)).sqrt();
    [r * s[0].cos(), r * s[0].sin()]
}

/// Time-1 map of the cut-off flow by RK4 with a step-halving error check.
pub fn integrate_cutoff_flow(
    w: &RadialProfile,
    cut: &Cutoff,
    steps: usize,
    tolerance: f64,
    z: [f64; 2],
    backward: bool,
) -> Result<[f64; 2]> {
    if steps < 2 {
        return Err(Error::IntegrationTolerance {
            estimate: f64::INFINITY,
            tolerance,
        });
    }
    let s0 = to_polar_area(z);
    let fine = from_polar_area(rk4_flow(w, cut, steps, s0, backward));
    let coarse = from_polar_area(rk4_flow(w, cut, steps / 2, s0, backward));
    let scale = z[0].hypot(z[1]).max(1e-300);
    // RK4 error of the fine run is about 1/15 of the difference
    let estimate = (fine[0] - coarse[0]).hypot(fine[1] - coarse[1]) / 15.0 / scale;
    if estimate > tolerance {
        return Err(Error::IntegrationTolerance {
            estimate,
            tolerance,
        });
    }
    Ok(fine)
}

/// Whether the whole flow line of `z` stays where `ρ ≡ 1`.
///
/// Along the uncut flow `A(t) = A₀·S_t'(φᵗ)/(a/2π) ≥ A₀·min(1, πR_min²/a)`.
fn stays_uncut(w: &RadialProfile, cut: &Cutoff, z: [f64; 2], rmin: f64) -> bool {
    let u = z[0] * z[0] + z[1] * z[1];
    let shrink = (PI * rmin * rmin / w.area()).min(1.0);
    u * shrink >= cut.bounds().1
}

/// Time-1 map of the cut-off Hamiltonian flow.
///
/// Flow lines that provably never enter the cut-off region are the exact
/// lift, evaluated in closed form; the rest are integrated.
pub fn cutoff_disk_map(
    w: &RadialProfile,
    cut: &Cutoff,
    steps: usize,
    tolerance: f64,
    z: [f64; 2],
) -> Result<[f64; 2]> {
    if stays_uncut(w, cut, z, w.min_radius()) {
        return Ok(disk_to_domain(w, z));
    }
    integrate_cutoff_flow(w, cut, steps, tolerance, z, false)
}

/// Inverse of [`cutoff_disk_map`].
pub fn cutoff_disk_map_inverse(
    w: &RadialProfile,
    cut: &Cutoff,
    steps: usize,
    tolerance: f64,
    v: [f64; 2],
) -> Result<[f64; 2]> {
    let z = domain_to_disk(w, v);
    if stays_uncut(w, cut, z, w.min_radius()) {
        return Ok(z);
    }
    integrate_cutoff_flow(w, cut, steps, tolerance, v, true)
}

/// One direction of the ε-sandwich check.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SandwichSide {
    pub samples: usize,
    pub violations: usize,
    /// Largest gauge seen on this side (compare against the side's bound).
    pub worst_gauge: f64,
    pub integration_failures: usize,
    /// First few offending points.
    pub offenders: Vec<Vec<f64>>,
}

/// Outcome of [`sandwich_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct SandwichReport {
    pub epsilon: f64,
    pub deltas: Vec<f64>,
    /// Points of `E` mapped into `(1+ε)·product`: worst `G(Ψ(z))` vs `1 + ε`.
    pub outer: SandwichSide,
    /// Points of `(1−ε)·product` pulled back into `E`: worst ellipsoid gauge vs 1.
    pub inner: SandwichSide,
}

impl SandwichReport {
    pub fn passed(&self) -> bool {
        self.outer.violations == 0
            && self.inner.violations == 0
            && self.outer.integration_failures == 0
            && self.inner.integration_failures == 0
    }
}

const MAX_OFFENDERS: usize = 8;

/// Checks `(1−ε)P ⊂ Ψ(E) ⊂ (1+ε)P` on `samples` seeded points per side.
pub fn sandwich_check(
    factors: &[Arc<RadialProfile>],
    config: &CutoffMapConfig,
    samples: usize,
    seed: u64,
) -> Result<SandwichReport> {
    config.validate(factors)?;
    let areas: Vec<f64> = factors.iter().map(|w| w.area()).collect();
    let ellipsoid = ProductDomain::ellipsoid(areas.clone())?;
    let product = ProductDomain::from_profiles(factors.to_vec())?;
    let eps = config.epsilon;
    let ell_hw: Vec<f64> = areas.iter().map(|a| (a / PI).sqrt()).collect();
    let prod_hw: Vec<f64> = factors
        .iter()
        .map(|w| (1.0 - eps) * w.max_radius())
        .collect();
    let dim = 2 * factors.len();

    let outer = merge_sides(par_batches(samples, seed, |rng, _, count| {
        let mut side = SandwichSide::default();
        let mut z = vec![0.0; dim];
        for _ in 0..count {
            draw_inside(rng, &ell_hw, &mut z, |x| {
                ellipsoid.gauge_unchecked(x) <= 1.0
            });
            side.samples += 1;
            let mut img = Vec::with_capacity(dim);
            let mut failed = false;
            for (i, w) in factors.iter().enumerate() {
                match cutoff_disk_map(
                    w,
                    &config.cutoffs[i],
                    config.steps,
                    config.tolerance,
                    [z[2 * i], z[2 * i + 1]],
                ) {
                    Ok(p) => img.extend_from_slice(&p),
                    Err(_) => failed = true,
                }
            }
            if failed {
                side.integration_failures += 1;
                push_offender(&mut side, &z);
                continue;
            }
            let g = product.gauge_unchecked(&img);
            side.worst_gauge = side.worst_gauge.max(g);
            if g > 1.0 + eps {
                side.violations += 1;
                push_offender(&mut side, &z);
            }
        }
        side
    }));

    let inner = merge_sides(par_batches(samples, seed ^ 0x5eed_0001, |rng, _, count| {
        let mut side = SandwichSide::default();
        let mut v = vec![0.0; dim];
        for _ in 0..count {
            draw_inside(rng, &prod_hw, &mut v, |x| {
                product.gauge_unchecked(x) <= 1.0 - eps
            });
            side.samples += 1;
            let mut pre = Vec::with_capacity(dim);
            let mut failed = false;
            for (i, w) in factors.iter().enumerate() {
                match cutoff_disk_map_inverse(
                    w,
                    &config.cutoffs[i],
                    config.steps,
                    config.tolerance,
                    [v[2 * i], v[2 * i + 1]],
                ) {
                    Ok(p) => pre.extend_from_slice(&p),
                    Err(_) => failed = true,
                }
            }
            if failed {
                side.integration_failures += 1;
                push_offender(&mut side, &v);
                continue;
            }
            let g = ellipsoid.gauge_unchecked(&pre);
            side.worst_gauge = side.worst_gauge.max(g);
            if g > 1.0 {
                side.violations += 1;
                push_offender(&mut side, &v);
            }
        }
        side
    }));

    Ok(SandwichReport {
        epsilon: eps,
        deltas: config.cutoffs.iter().map(Cutoff::delta).collect(),
        outer,
        inner,
    })
}

fn draw_inside<R: Rng, F: Fn(&[f64]) -> bool>(rng: &mut R, hw: &[f64], x: &mut [f64], inside: F) {
    loop {
        for (i, h) in hw.iter().enumerate() {
            x[2 * i] = (2.0 * rng.random::<f64>() - 1.0) * h;
            x[2 * i + 1] = (2.0 * rng.random::<f64>() - 1.0) * h;
        }
        if inside(x) {
            return;
        }
    }
}

fn push_offender(side: &mut SandwichSide, x: &[f64]) {
    if side.offenders.len() < MAX_OFFENDERS {
        side.offenders.push(x.to_vec());
    }
}

fn merge_sides(parts: Vec<SandwichSide>) -> SandwichSide {
    let mut out = SandwichSide::default();
    for p in parts {
        out.samples += p.samples;
        out.violations += p.violations;
        out.integration_failures += p.integration_failures;
        out.worst_gauge = out.worst_gauge.max(p.worst_gauge);
        for o in p.offenders {
            if out.offenders.len() < MAX_OFFENDERS {
                out.offenders.push(o);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry2d::{Interpolation, ProfileSource, DEFAULT_GRID};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cosine() -> RadialProfile {
        RadialProfile::cosine(PI, 0.5).unwrap()
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

    fn newton(target: f64) -> f64 {
        let mut x = target;
        for _ in 0..60 {
            x -= (x + 0.5 * x.sin() - target) / (1.0 + 0.5 * x.cos());
        }
        x
    }

    #[test]
    fn disk_angle_map_is_identity() {
        let m = angle_map(Arc::new(RadialProfile::disk(2.0).unwrap()));
        for k in 0..50 {
            let th = 0.123 * k as f64;
            assert!((m.forward(th) - th).abs() < 1e-12);
        }
    }

    #[test]
    fn cosine_angle_map_values() {
        let m = angle_map(Arc::new(cosine()));
        assert!((m.forward(PI) - PI).abs() < 1e-10);
        assert!((m.forward(PI / 2.0) - newton(PI / 2.0)).abs() < 1e-9);
        let t = m.table();
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert!((t[t.len() - 1] - TAU).abs() < 1e-9);
        for k in 0..100 {
            let th = 0.0731 * k as f64 - 1.0;
            assert!((m.inverse(m.forward(th)) - th).abs() < 1e-8);
            assert!((m.forward(th + TAU) - m.forward(th) - TAU).abs() < 1e-9);
        }
    }

    #[test]
    fn disk_map_identity_for_disk() {
        let d = RadialProfile::disk(1.3).unwrap();
        let z = [0.3, -0.2];
        let w = disk_to_domain(&d, z);
        assert!((w[0] - z[0]).abs() < 1e-12 && (w[1] - z[1]).abs() < 1e-12);
        let back = domain_to_disk(&d, z);
        assert!((back[0] - z[0]).abs() < 1e-12 && (back[1] - z[1]).abs() < 1e-12);
    }

    #[test]
    fn boundary_point_goes_to_circle() {
        let w = cosine();
        let m = angle_map(Arc::new(w.clone()));
        let th = 1.1;
        let z = domain_to_disk(&w, w.boundary_point(th));
        let psi = m.inverse(th);
        let r = (w.area() / PI).sqrt();
        assert!((z[0] - r * psi.cos()).abs() < 1e-10);
        assert!((z[1] - r * psi.sin()).abs() < 1e-10);
    }

    #[test]
    fn homogeneity_and_origin() {
        let w = square();
        assert_eq!(disk_to_domain(&w, [0.0, 0.0]), [0.0, 0.0]);
        let z = [0.4, 0.7];
        let a = disk_to_domain(&w, z);
        let b = disk_to_domain(&w, [3.0 * z[0], 3.0 * z[1]]);
        assert!((b[0] - 3.0 * a[0]).abs() < 1e-12 && (b[1] - 3.0 * a[1]).abs() < 1e-12);
    }

    #[test]
    fn square_jacobian_is_one_inside_edges() {
        let w = square();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let r: f64 = 0.2 + rng.random::<f64>();
            let th: f64 = rng.random::<f64>() * TAU;
            let z = [r * th.cos(), r * th.sin()];
            let det = jacobian_determinant(|p| disk_to_domain(&w, p), z, 1e-5);
            // the stencil may straddle a corner ray; accept those loosely
            assert!((det - 1.0).abs() < 1e-3, "det = {det}");
        }
    }

    #[test]
    fn product_map_dimension_checked() {
        let f = vec![Arc::new(cosine())];
        assert!(product_map(&f, &[0.0; 3]).is_err());
        let z = [0.1, 0.2];
        let w = product_map(&f, &z).unwrap();
        let back = product_map_inverse(&f, &w).unwrap();
        assert!((back[0] - z[0]).abs() < 1e-12 && (back[1] - z[1]).abs() < 1e-12);
    }

    #[test]
    fn cutoff_profile() {
        let c = Cutoff::new(0.04).unwrap();
        let (lo, hi) = c.bounds();
        assert_eq!(c.eval(0.5 * lo), (0.0, 0.0));
        assert_eq!(c.eval(2.0 * hi), (1.0, 0.0));
        let mut prev = 0.0;
        for k in 1..100 {
            let u = lo + (hi - lo) * k as f64 / 100.0;
            let (r, dr) = c.eval(u);
            assert!(r >= prev);
            prev = r;
            let fd = (c.eval(u + 1e-9).0 - c.eval(u - 1e-9).0) / 2e-9;
            assert!((dr - fd).abs() < 1e-4 * (1.0 + dr.abs()));
        }
        assert!(Cutoff::new(0.0).is_err());
    }

    #[test]
    fn cutoff_finite_next_to_its_ends() {
        let c = Cutoff::new(0.011586765605100333).unwrap();
        let (lo, hi) = c.bounds();
        for u in [lo, hi] {
            let mut x = u;
            for _ in 0..4 {
                x = f64::from_bits(x.to_bits() - 1);
                let (r, dr) = c.eval(x);
                assert!(r.is_finite() && dr.is_finite(), "u = {x:e}");
                let y = f64::from_bits(u.to_bits() + 1);
                let (r, dr) = c.eval(y);
                assert!(r.is_finite() && dr.is_finite(), "u = {y:e}");
            }
        }
    }

    #[test]
    fn frozen_region_is_fixed() {
        let w = cosine();
        let c = Cutoff::new(0.1).unwrap();
        let z = [0.01, 0.02];
        assert!(c.eval(z[0] * z[0] + z[1] * z[1]).0 == 0.0);
        let img = integrate_cutoff_flow(&w, &c, 100, 1e-6, z, false).unwrap();
        assert!((img[0] - z[0]).abs() < 1e-16 && (img[1] - z[1]).abs() < 1e-16);
    }

    #[test]
    fn integrated_flow_matches_closed_form_outside_cutoff() {
        let w = cosine();
        let c = Cutoff::new(0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let r: f64 = 0.5 + 0.5 * rng.random::<f64>();
            let th: f64 = rng.random::<f64>() * TAU;
            let z = [r * th.cos(), r * th.sin()];
            let num = integrate_cutoff_flow(&w, &c, 1000, 1e-6, z, false).unwrap();
            let exact = disk_to_domain(&w, z);
            assert!((num[0] - exact[0]).hypot(num[1] - exact[1]) < 1e-6);
            let back = integrate_cutoff_flow(&w, &c, 1000, 1e-6, exact, true).unwrap();
            assert!((back[0] - z[0]).hypot(back[1] - z[1]) < 1e-6);
        }
    }

    #[test]
    fn disk_profile_cutoff_is_identity() {
        let w = RadialProfile::disk(2.0).unwrap();
        let c = Cutoff::new(0.05).unwrap();
        let z = [0.3, 0.1];
        let img = integrate_cutoff_flow(&w, &c, 50, 1e-9, z, false).unwrap();
        assert!((img[0] - z[0]).abs() < 1e-14 && (img[1] - z[1]).abs() < 1e-14);
    }

    #[test]
    fn too_few_steps_reported() {
        let w = square();
        let c = Cutoff::new(0.2).unwrap();
        let z = [0.35, 0.12];
        let r = integrate_cutoff_flow(&w, &c, 2, 1e-12, z, false);
        assert!(matches!(r, Err(Error::IntegrationTolerance { .. })));
    }

    #[test]
    fn sandwich_rejects_bad_epsilon() {
        let f = vec![Arc::new(cosine())];
        assert!(matches!(
            CutoffMapConfig::calibrate(&f, 0.0, 100),
            Err(Error::Precondition(_))
        ));
        assert!(CutoffMapConfig::calibrate(&f, 1.0, 100).is_err());
    }

    #[test]
    fn sandwich_all_disks() {
        let f: Vec<_> = [1.0, 2.0]
            .iter()
            .map(|&a| Arc::new(RadialProfile::disk(a).unwrap()))
            .collect();
        let cfg = CutoffMapConfig::calibrate(&f, 0.1, 200).unwrap();
        let rep = sandwich_check(&f, &cfg, 5000, 3).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }
}
