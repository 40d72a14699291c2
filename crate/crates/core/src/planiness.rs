//! Box fields for unions of long tubes: a ball cover, a hypersurface of high
//! visibility on every ball, and per-point convex boxes read off the
//! visibility bodies of that surface.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dirvol::{cylinder_bound, directed_volume_fiber};
use crate::error::{Error, Result};
use crate::geom::{dot, sphere_directions, Aabb, Ball, ConvexBodySample, Tube};
use crate::measure::{estimate_volume, SampleBudget, VolumeEstimate};
use crate::region::Shape;
use crate::rng::{self, StreamRng};
use crate::surface::{FactoredPoly, Hypersurface, Surface};
use crate::unit_ball_volume;
use crate::visibility::{
    body_from_values, find_high_visibility_surface, section_area, visibility_with, SearchOptions,
    Validation, VisTarget,
};

pub const COVER_RADIUS: f64 = 0.1;
/// Radius of the ball each visibility target is measured on: every point
/// within `3 * COVER_RADIUS` of a cover centre sees it inside `B(x, 1)`.
pub const TARGET_RADIUS: f64 = 0.7;
pub const BOX_DIRECTIONS: usize = 512;
/// Support-function slack in the containment test.
pub const CONTAINMENT_SLACK: f64 = 1.02;

/// Point sampled uniformly from a bounded tube.
fn sample_tube(t: &Tube, r: &mut StreamRng) -> Vec<f64> {
    let b = t.bounds();
    let mut x = vec![0.0; t.dim()];
    loop {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = r.random_range(b.lo[i]..b.hi[i]);
        }
        if t.contains(&x) {
            return x;
        }
    }
}

fn require_bounded(tubes: &[Tube]) -> Result<usize> {
    let n = tubes.first().map_or(0, |t| t.dim());
    for t in tubes {
        if t.length.is_none() {
            return Err(Error::InvalidArgument(
                "box fields need bounded tubes".into(),
            ));
        }
        if t.dim() != n {
            return Err(Error::InvalidArgument("tubes differ in dimension".into()));
        }
    }
    Ok(n)
}

fn union_bounds(tubes: &[Tube]) -> Aabb {
    tubes
        .iter()
        .map(Tube::bounds)
        .reduce(|a, b| a.union(&b))
        .expect("non-empty")
}

/// Monte Carlo volume of a union of bounded tubes.
pub fn union_volume(tubes: &[Tube], budget: &SampleBudget) -> Result<VolumeEstimate> {
    require_bounded(tubes)?;
    if tubes.is_empty() {
        return Ok(VolumeEstimate {
            value: 0.0,
            std_error: 0.0,
            count: 0,
        });
    }
    let b = union_bounds(tubes);
    Ok(estimate_volume(
        |x| tubes.iter().any(|t| t.contains(x)),
        &b,
        budget,
    ))
}

/// Greedy maximal packing of radius-1/10 balls centred in the union: grid
/// points at spacing `0.1 / sqrt(n)` are visited in order and kept when at
/// distance at least 0.2 from every kept centre.
pub fn ball_cover(tubes: &[Tube]) -> Result<Vec<Ball>> {
    let n = require_bounded(tubes)?;
    if tubes.is_empty() {
        return Ok(Vec::new());
    }
    let b = union_bounds(tubes);
    let h = COVER_RADIUS / (n as f64).sqrt();
    let sep = 2.0 * COVER_RADIUS;
    let shape: Vec<usize> = (0..n)
        .map(|i| ((b.hi[i] - b.lo[i]) / h).ceil() as usize + 1)
        .collect();
    let cell = |x: &[f64]| -> Vec<i64> { x.iter().map(|v| (v / sep).floor() as i64).collect() };
    let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    let mut centers: Vec<Vec<f64>> = Vec::new();
    let total: usize = shape.iter().product();
    let mut x = vec![0.0; n];
    for mut idx in 0..total {
        for i in 0..n {
            x[i] = b.lo[i] + h * (idx % shape[i]) as f64;
            idx /= shape[i];
        }
        if !tubes.iter().any(|t| t.contains(&x)) {
            continue;
        }
        let c = cell(&x);
        let mut near = false;
        let mut offset = vec![-1i64; n];
        'scan: loop {
            let key: Vec<i64> = c.iter().zip(&offset).map(|(a, o)| a + o).collect();
            if let Some(list) = buckets.get(&key) {
                for &k in list {
                    let d2: f64 = centers[k]
                        .iter()
                        .zip(&x)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    if d2 < sep * sep {
                        near = true;
                        break 'scan;
                    }
                }
            }
            let mut i = 0;
            loop {
                if i == n {
                    break 'scan;
                }
                offset[i] += 1;
                if offset[i] <= 1 {
                    break;
                }
                offset[i] = -1;
                i += 1;
            }
        }
        if !near {
            buckets.entry(c).or_default().push(centers.len());
            centers.push(x.clone());
        }
    }
    Ok(centers
        .into_iter()
        .map(|c| Ball::new(c, COVER_RADIUS))
        .collect())
}

/// Fraction of sampled union points inside some `3 B_i`.
pub fn cover_fraction(tubes: &[Tube], cover: &[Ball], budget: &SampleBudget) -> f64 {
    if tubes.is_empty() {
        return 1.0;
    }
    let b = union_bounds(tubes);
    let r3 = 3.0 * COVER_RADIUS;
    let mut r = rng::stream(budget.seed, 0xc0);
    let mut hit = 0usize;
    let mut seen = 0usize;
    let mut x = vec![0.0; b.dim()];
    while seen < budget.count {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = r.random_range(b.lo[i]..b.hi[i]);
        }
        if !tubes.iter().any(|t| t.contains(&x)) {
            continue;
        }
        seen += 1;
        if cover.iter().any(|c| {
            c.center
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                <= r3 * r3
        }) {
            hit += 1;
        }
    }
    hit as f64 / seen as f64
}

/// A few radius-1 tubes of length `l` close to `e_1`, all through a common
/// neighbourhood so that they overlap heavily.
pub fn tube_bundle(n: usize, l: f64, count: usize, spread: f64, seed: u64) -> Result<Vec<Tube>> {
    let mut r = rng::stream(rng::derive(seed, 0xb0d1e), 0);
    let centre = l / 2.0 + 1.0;
    (0..count)
        .map(|_| {
            let g = rng::gaussian(&mut r, n);
            let mut dir: Vec<f64> = g.iter().map(|x| spread * x).collect();
            dir[0] = 1.0;
            let p: Vec<f64> = (0..n).map(|_| centre + r.random_range(-0.5..0.5)).collect();
            Tube::new(0, p, dir, 1.0, Some(l))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoxKind {
    /// Side-`L` cubes centred at each point.
    Cube,
    /// `L` times the visibility body of `Z ∩ B(x, 1)`.
    Visibility { surface: Surface },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxField {
    pub n: usize,
    pub l: f64,
    pub vol_x: f64,
    pub kind: BoxKind,
    pub degree: usize,
    pub targets: usize,
    pub target_m: f64,
    /// Smallest `vis / M` over the cover in the search.
    pub min_ratio: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxOptions {
    /// Degree cap per unit of `L`.
    pub degree_per_length: f64,
    pub search: SearchOptions,
}

impl Default for BoxOptions {
    fn default() -> Self {
        BoxOptions {
            degree_per_length: 8.0,
            search: SearchOptions {
                // The search tables are exact for hyperplanes.
                validate: Validation::None,
                ..SearchOptions::default()
            },
        }
    }
}

/// Build the box field of a union of bounded tubes at scale `l`.
pub fn build_box_field(
    tubes: &[Tube],
    l: f64,
    opts: &BoxOptions,
    budget: &SampleBudget,
) -> Result<BoxField> {
    let n = require_bounded(tubes)?;
    if tubes.is_empty() {
        return Err(Error::InvalidArgument("no tubes".into()));
    }
    if !(l > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "box fields need L > 1, got {l}"
        )));
    }
    let vol_x = union_volume(tubes, &budget.child(0x701))?.value;
    let ln = l.powi(n as i32);
    let trivial = BoxField {
        n,
        l,
        vol_x,
        kind: BoxKind::Cube,
        degree: 0,
        targets: 0,
        target_m: 0.0,
        min_ratio: f64::INFINITY,
        seed: budget.seed,
    };
    if vol_x > ln / 2.0 {
        return Ok(trivial);
    }
    let m = ln / vol_x;
    let targets: Vec<VisTarget> = ball_cover(tubes)?
        .into_iter()
        .map(|b| VisTarget {
            region: Shape::ball(b.center, TARGET_RADIUS),
            m,
        })
        .collect();
    let d_cap = (opts.degree_per_length * l).ceil() as usize;
    let out = find_high_visibility_surface(&targets, d_cap, &opts.search, &budget.child(0x702))?;
    let min_ratio = out.min_ratio();
    let out = out.into_result()?;
    Ok(BoxField {
        kind: BoxKind::Visibility {
            surface: out.surface,
        },
        degree: out.degree,
        targets: targets.len(),
        target_m: m,
        min_ratio,
        ..trivial
    })
}

impl BoxField {
    /// The body `K(x)` with `B(x) = x + L K(x)`.
    pub fn body(&self, x: &[f64]) -> Result<ConvexBodySample> {
        let dirs = sphere_directions(self.n, BOX_DIRECTIONS, rng::derive(self.seed, 0xb0c5));
        match &self.kind {
            BoxKind::Cube => {
                let radial = dirs
                    .iter()
                    .map(|u| 0.5 / u.iter().fold(0.0_f64, |a, x| a.max(x.abs())))
                    .collect();
                Ok(ConvexBodySample::new(dirs, radial))
            }
            BoxKind::Visibility { surface } => {
                let ball = Shape::ball(x.to_vec(), 1.0);
                let half = &dirs[..BOX_DIRECTIONS / 2];
                let planes = match surface {
                    Surface::Factored { n, factors } => {
                        FactoredPoly::new(*n, factors.clone())?.as_hyperplanes()
                    }
                    Surface::Poly { .. } => None,
                };
                if let Some(planes) = planes {
                    let areas: Vec<(&[f64], f64)> = planes
                        .iter()
                        .map(|(nv, off)| (nv.as_slice(), section_area(nv, *off, &ball, 0)))
                        .filter(|(_, a)| *a > 0.0)
                        .collect();
                    let values: Vec<f64> = half
                        .iter()
                        .map(|u| areas.iter().map(|(nv, a)| a * dot(u, nv).abs()).sum())
                        .collect();
                    Ok(body_from_values(dirs, &values))
                } else {
                    let z = surface.build()?;
                    let budget =
                        SampleBudget::new(rng::derive(self.seed, 0xb0c6), 1024).stratified();
                    Ok(visibility_with(z.as_ref(), &ball, BOX_DIRECTIONS, &budget)?.body)
                }
            }
        }
    }

    /// `vol(B(x))`.
    pub fn box_volume(&self, x: &[f64]) -> Result<f64> {
        Ok(self.l.powi(self.n as i32) * self.body(x)?.volume())
    }

    /// Smallest `sigma` with `T - x` inside `sigma L K(x)` on the sampled
    /// support directions, with the containment slack.
    pub fn sigma_min(&self, tube: &Tube, x: &[f64]) -> Result<f64> {
        let k = self.body(x)?;
        let scale = CONTAINMENT_SLACK * self.l;
        Ok(k.directions
            .iter()
            .map(|w| (tube.support(w) - dot(w, x)) / (scale * k.support(w)))
            .fold(0.0_f64, f64::max))
    }

    /// `sigma_min` at `samples` uniform points of the tube.
    pub fn sigma_samples(&self, tube: &Tube, budget: &SampleBudget) -> Result<Vec<f64>> {
        (0..budget.count)
            .into_par_iter()
            .map(|i| {
                let mut r = rng::stream(budget.seed, i as u64);
                let x = sample_tube(tube, &mut r);
                self.sigma_min(tube, &x)
            })
            .collect()
    }
}

/// Fraction of sampled `x` in the tube with `T ⊆ sigma B(x)`.
pub fn containment_probability(
    tube: &Tube,
    field: &BoxField,
    sigma: f64,
    budget: &SampleBudget,
) -> Result<f64> {
    if !(sigma > 1.0) {
        return Err(Error::InvalidArgument("sigma must exceed 1".into()));
    }
    let s = field.sigma_samples(tube, budget)?;
    Ok(fraction_within(&s, sigma))
}

fn fraction_within(samples: &[f64], sigma: f64) -> f64 {
    samples.iter().filter(|&&s| s <= sigma).count() as f64 / samples.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaSweep {
    pub sigmas: Vec<f64>,
    pub fractions: Vec<f64>,
    /// Smallest `sigma` reaching 9/10 containment (the 0.9 quantile of
    /// `sigma_min`).
    pub sigma_star: f64,
    /// Least-squares slope of `ln(failure)` against `ln(sigma)` over the
    /// sigmas with non-zero failure; `None` with fewer than two such points.
    pub exponent: Option<f64>,
}

/// Containment fractions pooled over all tubes at each `sigma`.
pub fn sigma_sweep(
    tubes: &[Tube],
    field: &BoxField,
    sigmas: &[f64],
    budget: &SampleBudget,
) -> Result<SigmaSweep> {
    if sigmas.iter().any(|s| !(*s > 1.0)) {
        return Err(Error::InvalidArgument("sigma must exceed 1".into()));
    }
    let mut all = Vec::new();
    for (i, t) in tubes.iter().enumerate() {
        all.extend(field.sigma_samples(t, &budget.child(i as u64))?);
    }
    let fractions: Vec<f64> = sigmas.iter().map(|&s| fraction_within(&all, s)).collect();
    let exponent = failure_exponent(sigmas, &fractions);
    Ok(SigmaSweep {
        sigmas: sigmas.to_vec(),
        fractions,
        sigma_star: quantile_90(&all),
        exponent,
    })
}

fn quantile_90(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = ((0.9 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[q]
}

fn failure_exponent(sigmas: &[f64], fractions: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = sigmas
        .iter()
        .zip(fractions)
        .filter(|(_, f)| **f < 1.0)
        .map(|(s, f)| (s.ln(), (1.0 - f).ln()))
        .collect();
    (pts.len() >= 2).then(|| {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubeAverage {
    pub average: f64,
    pub std_error: f64,
    /// `omega_n cyl(n, 3r, d) / (omega_{n-1} r^{n-1} L)`.
    pub comparison: f64,
}

/// Average over `x` in the tube of the directed volume of `Z ∩ B(x, 1)`
/// along the core; `budget.count` points, `lines` fibres each.
pub fn tube_box_average(
    tube: &Tube,
    z: &dyn Hypersurface,
    lines: usize,
    budget: &SampleBudget,
) -> Result<TubeAverage> {
    let l = tube
        .length
        .ok_or_else(|| Error::InvalidArgument("tube must be bounded".into()))?;
    let n = tube.dim();
    let vals: Vec<f64> = (0..budget.count)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(budget.seed, i as u64);
            let x = sample_tube(tube, &mut r);
            let ball = Ball::new(x, 1.0);
            let b = SampleBudget::new(rng::derive(budget.seed, 0x71_0000 + i as u64), lines)
                .stratified();
            directed_volume_fiber(z, &ball, &tube.direction, &b).value
        })
        .collect();
    let k = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / k;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0).max(1.0);
    let r = tube.radius;
    let comparison = unit_ball_volume(n) * cylinder_bound(n, 3.0 * r, z.degree())
        / (unit_ball_volume(n - 1) * r.powi(n as i32 - 1) * l);
    Ok(TubeAverage {
        average: mean,
        std_error: (var / k).sqrt(),
        comparison,
    })
}
