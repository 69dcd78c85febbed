//! Symplectic p-products as gauge objects.
//!
//! For factors with 1-homogeneous gauges `gᵢ`, the p-product
//! `⋃_{t ∈ Δ} t₁^{1/p}K₁ × ⋯ × t_k^{1/p}K_k` is the unit sublevel set of
//!
//! ```text
//!     G(x₁, …, x_k) = (Σ gᵢ(xᵢ)^p)^{1/p}
//! ```
//!
//! Ambient points are flat slices `(x₁, y₁, x₂, y₂, …)`, factor blocks in order.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry2d::{EllipsoidSpec, RadialProfile};
use crate::sampling::{batch_rng, par_batches};

/// One factor of a product domain.
#[derive(Clone, Debug)]
pub enum Factor {
    /// Star-shaped planar domain (real dimension 2).
    Planar(Arc<RadialProfile>),
    /// Ellipsoid block `E(a₁,…,a_m)` (real dimension 2m).
    Ellipsoid(EllipsoidSpec),
    /// A nested product, used to check associativity.
    Product(Box<ProductDomain>),
}

impl Factor {
    /// Real dimension.
    pub fn dim(&self) -> usize {
        match self {
            Self::Planar(_) => 2,
            Self::Ellipsoid(e) => 2 * e.dim(),
            Self::Product(p) => p.dim(),
        }
    }

    /// The factor's own 1-homogeneous gauge.
    pub fn gauge(&self, x: &[f64]) -> f64 {
        match self {
            Self::Planar(w) => w.gauge([x[0], x[1]]),
            Self::Ellipsoid(e) => e.gauge(x),
            Self::Product(p) => p.gauge_unchecked(x),
        }
    }

    /// Half-widths of a coordinate box containing the factor.
    pub fn half_widths(&self) -> Vec<f64> {
        match self {
            Self::Planar(w) => vec![w.max_radius(); 2],
            Self::Ellipsoid(e) => e
                .areas()
                .iter()
                .flat_map(|a| {
                    let r = (a / PI).sqrt();
                    [r, r]
                })
                .collect(),
            Self::Product(p) => p.half_widths(),
        }
    }

    fn random_boundary_point<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Self::Planar(w) => {
                let th = rng.random::<f64>() * std::f64::consts::TAU;
                let b = w.boundary_point(th);
                out[0] = b[0];
                out[1] = b[1];
            }
            Self::Ellipsoid(e) => loop {
                for v in out.iter_mut() {
                    *v = StandardNormal.sample(rng);
                }
                let g = e.gauge(out);
                if g > 1e-12 {
                    out.iter_mut().for_each(|v| *v /= g);
                    break;
                }
            },
            Self::Product(p) => {
                let t = dirichlet_uniform(rng, p.factors.len());
                p.fill_boundary_point(&t, rng, out);
            }
        }
    }
}

/// A p-product of planar and ellipsoid factors.
#[derive(Clone, Debug)]
pub struct ProductDomain {
    factors: Vec<Factor>,
    p: f64,
    dim: usize,
}

/// Monte Carlo volume estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolumeEstimate {
    pub estimate: f64,
    /// Binomial standard error.
    pub std_error: f64,
    pub samples: usize,
    pub hits: usize,
    pub box_volume: f64,
}

impl ProductDomain {
    pub fn new(factors: Vec<Factor>, p: f64) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidParameter(
                "a product needs at least one factor".into(),
            ));
        }
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "exponent p must be a finite value >= 1, got {p}"
            )));
        }
        let dim = factors.iter().map(Factor::dim).sum();
        Ok(Self { factors, p, dim })
    }

    /// 2-product of planar profiles.
    pub fn from_profiles(profiles: Vec<Arc<RadialProfile>>) -> Result<Self> {
        Self::new(profiles.into_iter().map(Factor::Planar).collect(), 2.0)
    }

    /// The ellipsoid `E(a₁,…,aₙ)` as a single-block product.
    pub fn ellipsoid(areas: Vec<f64>) -> Result<Self> {
        Self::new(vec![Factor::Ellipsoid(EllipsoidSpec::new(areas)?)], 2.0)
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    /// Real dimension `2n`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Factor blocks of an ambient point.
    pub fn blocks<'a>(
        &'a self,
        x: &'a [f64],
    ) -> impl Iterator<Item = (&'a Factor, &'a [f64])> + 'a {
        let mut offset = 0;
        self.factors.iter().map(move |f| {
            let d = f.dim();
            let block = &x[offset..offset + d];
            offset += d;
            (f, block)
        })
    }

    /// `G(x) = (Σ gᵢ(xᵢ)^p)^{1/p}`.
    pub fn gauge(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self.gauge_unchecked(x))
    }

    pub(crate) fn gauge_unchecked(&self, x: &[f64]) -> f64 {
        if self.p == 2.0 {
            self.blocks(x)
                .map(|(f, b)| {
                    let g = f.gauge(b);
                    g * g
                })
                .sum::<f64>()
                .sqrt()
        } else {
            self.blocks(x)
                .map(|(f, b)| f.gauge(b).powf(self.p))
                .sum::<f64>()
                .powf(1.0 / self.p)
        }
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        Ok(self.gauge(x)? <= 1.0)
    }

    pub fn half_widths(&self) -> Vec<f64> {
        self.factors.iter().flat_map(Factor::half_widths).collect()
    }

    /// Areas of the ellipsoid that the 2-product is symplectomorphic to, in
    /// interior: planar factor areas and ellipsoid block areas in order.
    /// `None` unless `p = 2` at every level.
    pub fn ellipsoid_model_areas(&self) -> Option<Vec<f64>> {
        if self.p != 2.0 {
            return None;
        }
        let mut out = Vec::new();
        for f in &self.factors {
            match f {
                Factor::Planar(w) => out.push(w.area()),
                Factor::Ellipsoid(e) => out.extend_from_slice(e.areas()),
                Factor::Product(p) => out.extend(p.ellipsoid_model_areas()?),
            }
        }
        Some(out)
    }

    /// Rejection-sampling volume estimate from the bounding box.
    pub fn mc_volume(&self, samples: usize, seed: u64) -> Result<VolumeEstimate> {
        if samples < 1000 {
            return Err(Error::Precondition(format!(
                "Monte Carlo volume needs at least 1000 samples, got {samples}"
            )));
        }
        let hw = self.half_widths();
        let box_volume: f64 = hw.iter().map(|h| 2.0 * h).product();
        let hits: usize = par_batches(samples, seed, |rng, _, count| {
            let mut x = vec![0.0; self.dim];
            let mut hits = 0usize;
            for _ in 0..count {
                for (v, h) in x.iter_mut().zip(&hw) {
                    *v = (2.0 * rng.random::<f64>() - 1.0) * h;
                }
                if self.gauge_unchecked(&x) <= 1.0 {
                    hits += 1;
                }
            }
            hits
        })
        .into_iter()
        .sum();
        let frac = hits as f64 / samples as f64;
        Ok(VolumeEstimate {
            estimate: box_volume * frac,
            std_error: box_volume * (frac * (1.0 - frac) / samples as f64).sqrt(),
            samples,
            hits,
            box_volume,
        })
    }

    /// Points of `∂D` of the form `(t₁^{1/p}w₁, …, t_k^{1/p}w_k)` with `wᵢ ∈ ∂Kᵢ`.
    ///
    /// With `weights = None`, `t` is drawn uniformly from the simplex for each point.
    pub fn boundary_sample(
        &self,
        weights: Option<&[f64]>,
        count: usize,
        seed: u64,
    ) -> Result<Vec<Vec<f64>>> {
        if let Some(t) = weights {
            if t.len() != self.factors.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.factors.len(),
                    got: t.len(),
                });
            }
            let sum: f64 = t.iter().sum();
            if t.iter().any(|&v| v < 0.0) || (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Precondition(format!(
                    "weights must be nonnegative and sum to 1 (sum = {sum})"
                )));
            }
        }
        let mut rng = batch_rng(seed, 0);
        Ok((0..count)
            .map(|_| {
                let t = match weights {
                    Some(t) => t.to_vec(),
                    None => dirichlet_uniform(&mut rng, self.factors.len()),
                };
                let mut x = vec![0.0; self.dim];
                self.fill_boundary_point(&t, &mut rng, &mut x);
                x
            })
            .collect())
    }

    fn fill_boundary_point<R: Rng + ?Sized>(&self, t: &[f64], rng: &mut R, out: &mut [f64]) {
        let mut offset = 0;
        for (f, &ti) in self.factors.iter().zip(t) {
            let d = f.dim();
            let block = &mut out[offset..offset + d];
            f.random_boundary_point(rng, block);
            let s = ti.powf(1.0 / self.p);
            block.iter_mut().for_each(|v| *v *= s);
            offset += d;
        }
    }
}

/// Uniform point of the standard simplex with `k` vertices.
pub fn dirichlet_uniform<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Exact volume `a₁⋯aₙ / n!` of `E(a₁,…,aₙ)`.
pub fn ellipsoid_volume(spec: &EllipsoidSpec) -> f64 {
    let mut v = 1.0;
    for (k, a) in spec.areas().iter().enumerate() {
        v *= a / (k + 1) as f64;
    }
    v
}
