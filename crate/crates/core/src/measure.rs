//! Seeded Monte Carlo volumes and surface integrals.
//!
//! Samples are drawn in fixed-size blocks; block `b` always uses stream `b`
//! of the budget seed and partial results are combined in block order, so
//! estimates are bit-identical for any number of worker threads.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Aabb;
use crate::region::Region;
use crate::rng::{self, StreamRng};
use crate::surface::Hypersurface;

pub const BLOCK: usize = 4096;
pub const DEFAULT_VOLUME_SAMPLES: usize = 1 << 18;
pub const DEFAULT_LINES: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleBudget {
    pub seed: u64,
    pub count: usize,
    #[serde(default)]
    pub stratified: bool,
}

impl SampleBudget {
    pub fn new(seed: u64, count: usize) -> Self {
        assert!(count >= 1, "sample count must be positive");
        SampleBudget {
            seed,
            count,
            stratified: false,
        }
    }

    pub fn stratified(mut self) -> Self {
        self.stratified = true;
        self
    }

    pub fn with_count(mut self, count: usize) -> Self {
        assert!(count >= 1, "sample count must be positive");
        self.count = count;
        self
    }

    /// Same count, independent seed.
    pub fn child(&self, tag: u64) -> Self {
        SampleBudget {
            seed: rng::derive(self.seed, tag),
            ..*self
        }
    }
}

impl Default for SampleBudget {
    fn default() -> Self {
        SampleBudget::new(0, DEFAULT_VOLUME_SAMPLES)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub value: f64,
    pub std_error: f64,
    pub count: usize,
}

/// Running first and second moments.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    pub n: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(mut self, o: Moments) -> Moments {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
        self
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let m = self.mean();
        let var = (self.sum_sq / self.n as f64 - m * m).max(0.0);
        (var / (self.n - 1) as f64).sqrt()
    }

    /// Estimate of `scale * E[x]`.
    pub fn estimate(&self, scale: f64) -> VolumeEstimate {
        VolumeEstimate {
            value: scale * self.mean(),
            std_error: scale.abs() * self.std_error(),
            count: self.n,
        }
    }
}

/// Run `f(rng, first_index, len)` on consecutive blocks of the sample range
/// and return the per-block results in block order.
pub fn run_blocks<T, F>(budget: &SampleBudget, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut StreamRng, usize, usize) -> T + Sync,
{
    let blocks = budget.count.div_ceil(BLOCK);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(budget.seed, b as u64);
            let start = b * BLOCK;
            let len = BLOCK.min(budget.count - start);
            f(&mut r, start, len)
        })
        .collect()
}

/// Block-parallel sum of moments of a per-sample statistic.
pub fn sample_moments<F>(budget: &SampleBudget, f: F) -> Moments
where
    F: Fn(&mut StreamRng, usize) -> f64 + Sync,
{
    run_blocks(budget, |r, start, len| {
        let mut m = Moments::default();
        for i in start..start + len {
            m.push(f(r, i));
        }
        m
    })
    .into_iter()
    .fold(Moments::default(), Moments::merge)
}

/// Uniform point in the box; the first coordinate is stratified by the
/// global sample index when requested.
pub fn sample_box(
    r: &mut StreamRng,
    b: &Aabb,
    index: usize,
    budget: &SampleBudget,
    out: &mut [f64],
) {
    for i in 0..out.len() {
        let s: f64 = if i == 0 && budget.stratified {
            (index as f64 + r.random::<f64>()) / budget.count as f64
        } else {
            r.random()
        };
        out[i] = b.lo[i] + s * (b.hi[i] - b.lo[i]);
    }
}

/// Monte Carlo volume of `{x in bounds : region(x)}`.
pub fn estimate_volume<F>(region: F, bounds: &Aabb, budget: &SampleBudget) -> VolumeEstimate
where
    F: Fn(&[f64]) -> bool + Sync,
{
    let n = bounds.dim();
    let m = sample_moments(budget, |r, i| {
        let mut x = vec![0.0; n];
        sample_box(r, bounds, i, budget, &mut x);
        if region(&x) {
            1.0
        } else {
            0.0
        }
    });
    m.estimate(bounds.volume())
}

/// Estimate of `vol{P > 0} - vol{P < 0}` within the region, with its error.
pub fn signed_measure_split_estimate(
    p: &dyn Hypersurface,
    region: &dyn Region,
    budget: &SampleBudget,
) -> VolumeEstimate {
    let b = region.bounds();
    let n = b.dim();
    let m = sample_moments(budget, |r, i| {
        let mut x = vec![0.0; n];
        sample_box(r, &b, i, budget, &mut x);
        if !region.contains(&x) {
            return 0.0;
        }
        let v = p.eval(&x);
        if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        }
    });
    m.estimate(b.volume())
}

/// `vol{x in U : P(x) > 0} - vol{x in U : P(x) < 0}`.
pub fn signed_measure_split(
    p: &dyn Hypersurface,
    region: &dyn Region,
    budget: &SampleBudget,
) -> f64 {
    signed_measure_split_estimate(p, region, budget).value
}

/// Volume of a region, exact when known, else estimated.
pub fn region_volume(region: &dyn Region, budget: &SampleBudget) -> VolumeEstimate {
    if let Some(v) = region.volume() {
        return VolumeEstimate {
            value: v,
            std_error: 0.0,
            count: 0,
        };
    }
    estimate_volume(|x| region.contains(x), &region.bounds(), budget)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceScheme {
    /// Random lines: Crofton's formula with crossings found by root
    /// isolation.
    Crofton,
    /// Thin slab `|P| < delta |grad P|` weighted by `1 / (2 delta)`.
    Slab,
}

/// `E |u . N|` for `u` uniform on the sphere: `2 omega_{n-1} / (n omega_n)`.
pub fn crofton_constant(n: usize) -> f64 {
    2.0 * crate::unit_ball_volume(n - 1) / (n as f64 * crate::unit_ball_volume(n))
}

const SINGULAR_GRAD: f64 = 1e-10;

fn unit_normal(z: &dyn Hypersurface, x: &[f64]) -> Result<Vec<f64>> {
    let g = z.gradient(x);
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < SINGULAR_GRAD {
        return Err(Error::SingularSurface { grad_norm: norm });
    }
    Ok(g.into_iter().map(|v| v / norm).collect())
}

/// Orthonormal basis of `u^perp` (the trailing columns of the Householder
/// reflection sending `e_k` to `u`).
pub fn orthogonal_basis(u: &[f64]) -> Vec<Vec<f64>> {
    let n = u.len();
    let k = (0..n)
        .max_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs()))
        .expect("non-empty vector");
    let mut w = u.to_vec();
    let s = if u[k] >= 0.0 { 1.0 } else { -1.0 };
    w[k] += s;
    let ww: f64 = w.iter().map(|x| x * x).sum();
    (0..n)
        .filter(|&j| j != k)
        .map(|j| {
            (0..n)
                .map(|i| f64::from(u8::from(i == j)) - 2.0 * w[i] * w[j] / ww)
                .collect()
        })
        .collect()
}

/// The projection window of a region onto `u^perp`: per basis vector the
/// interval of `x . b` over the region.
pub fn shadow_window(region: &dyn Region, basis: &[Vec<f64>]) -> Vec<(f64, f64)> {
    basis
        .iter()
        .map(|b| {
            let neg: Vec<f64> = b.iter().map(|x| -x).collect();
            (-region.support(&neg), region.support(b))
        })
        .collect()
}

/// `integral over Z ∩ U of f(x, N(x))`.
pub fn surface_integral<F>(
    z: &dyn Hypersurface,
    region: &dyn Region,
    f: F,
    scheme: SurfaceScheme,
    budget: &SampleBudget,
) -> Result<VolumeEstimate>
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    match scheme {
        SurfaceScheme::Crofton => crofton_integral(z, region, f, budget),
        SurfaceScheme::Slab => slab_integral(z, region, f, budget),
    }
}

fn crofton_integral<F>(
    z: &dyn Hypersurface,
    region: &dyn Region,
    f: F,
    budget: &SampleBudget,
) -> Result<VolumeEstimate>
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    let n = region.dim();
    // A window large enough for every direction: the bounding ball.
    let b = region.bounds();
    let c = b.center();
    let radius = 0.5 * b.diameter();
    let area = (2.0 * radius).powi(n as i32 - 1);
    let blocks = run_blocks(budget, |r, _, len| -> Result<Moments> {
        let mut m = Moments::default();
        for _ in 0..len {
            let u = rng::unit_vector(r, n);
            let basis = orthogonal_basis(&u);
            let mut p = c.clone();
            for bv in &basis {
                let s: f64 = r.random_range(-radius..radius);
                p.iter_mut().zip(bv).for_each(|(x, b)| *x += s * b);
            }
            let mut total = 0.0;
            for (t0, t1) in region.chords(&p, &u) {
                let Ok(ts) = z.crossings(&p, &u, t0, t1) else {
                    continue;
                };
                for t in ts {
                    let x: Vec<f64> = p.iter().zip(&u).map(|(a, b)| a + t * b).collect();
                    let normal = unit_normal(z, &x)?;
                    total += f(&x, &normal);
                }
            }
            m.push(total);
        }
        Ok(m)
    });
    let mut m = Moments::default();
    for blk in blocks {
        m = m.merge(blk?);
    }
    Ok(m.estimate(area / crofton_constant(n)))
}

fn slab_integral<F>(
    z: &dyn Hypersurface,
    region: &dyn Region,
    f: F,
    budget: &SampleBudget,
) -> Result<VolumeEstimate>
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    let b = region.bounds();
    let n = b.dim();
    let delta = 1e-3 * b.diameter();
    let blocks = run_blocks(budget, |r, start, len| -> Result<Moments> {
        let mut m = Moments::default();
        let mut x = vec![0.0; n];
        for i in start..start + len {
            sample_box(r, &b, i, budget, &mut x);
            if !region.contains(&x) {
                m.push(0.0);
                continue;
            }
            let v = z.eval(&x);
            let g = z.gradient(&x);
            let gn = g.iter().map(|a| a * a).sum::<f64>().sqrt();
            // |P| < delta |grad P| is a slab of half-width ~delta about Z.
            if v.abs() >= delta * gn {
                m.push(0.0);
                continue;
            }
            if gn < SINGULAR_GRAD {
                return Err(Error::SingularSurface { grad_norm: gn });
            }
            let normal: Vec<f64> = g.iter().map(|a| a / gn).collect();
            m.push(f(&x, &normal) / (2.0 * delta));
        }
        Ok(m)
    });
    let mut m = Moments::default();
    for blk in blocks {
        m = m.merge(blk?);
    }
    Ok(m.estimate(b.volume()))
}
