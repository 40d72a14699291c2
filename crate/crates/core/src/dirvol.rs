//! Directed volumes `V_Z(v)`: the integral of `|v . N|` over `Z`, which
//! equals the area of the shadow of `Z` on `v^perp` counted with
//! multiplicity.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{dot, norm, Ball};
use crate::measure::{
    orthogonal_basis, run_blocks, shadow_window, surface_integral, Moments, SampleBudget,
    SurfaceScheme, VolumeEstimate,
};
use crate::region::Region;
use crate::surface::Hypersurface;
use crate::unit_ball_volume;

/// Fraction of line-contained fibres above which they are charged the
/// degree instead of being ignored.
const LINE_CONTAINED_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiberEstimate {
    pub value: f64,
    pub std_error: f64,
    pub fibers: usize,
    pub line_contained: usize,
}

/// Unit direction of `v` with a sign convention independent of the sign
/// of `v`, and `|v|`.
pub fn canonical_direction(v: &[f64]) -> (Vec<f64>, f64) {
    let len = norm(v);
    let mut u: Vec<f64> = v.iter().map(|x| x / len).collect();
    if let Some(first) = u.iter().find(|x| **x != 0.0) {
        if *first < 0.0 {
            u.iter_mut().for_each(|x| *x = -*x);
        }
    }
    (u, len)
}

/// Directed volume by fibres: sample lines parallel to `v` through the
/// shadow of the region and count distinct crossings inside it.
pub fn directed_volume_fiber(
    z: &dyn Hypersurface,
    region: &dyn Region,
    v: &[f64],
    budget: &SampleBudget,
) -> FiberEstimate {
    let (u, len) = canonical_direction(v);
    if len == 0.0 {
        return FiberEstimate {
            value: 0.0,
            std_error: 0.0,
            fibers: 0,
            line_contained: 0,
        };
    }
    let basis = orthogonal_basis(&u);
    let window = shadow_window(region, &basis);
    let area: f64 = window.iter().map(|(a, b)| (b - a).max(0.0)).product();
    if area == 0.0 {
        return FiberEstimate {
            value: 0.0,
            std_error: 0.0,
            fibers: budget.count,
            line_contained: 0,
        };
    }
    let n = u.len();
    let parts = run_blocks(budget, |r, start, count| {
        let mut m = Moments::default();
        let mut lc = 0usize;
        let mut p = vec![0.0; n];
        for i in start..start + count {
            p.iter_mut().for_each(|x| *x = 0.0);
            for (k, (b, (lo, hi))) in basis.iter().zip(&window).enumerate() {
                let s: f64 = if k == 0 && budget.stratified {
                    lo + (hi - lo) * (i as f64 + r.random::<f64>()) / budget.count as f64
                } else {
                    lo + (hi - lo) * r.random::<f64>()
                };
                p.iter_mut().zip(b).for_each(|(x, bi)| *x += s * bi);
            }
            let mut hits = 0usize;
            let mut contained = false;
            for (t0, t1) in region.chords(&p, &u) {
                match z.crossing_count(&p, &u, t0, t1) {
                    Ok(c) => hits += c,
                    Err(_) => contained = true,
                }
            }
            if contained {
                lc += 1;
            } else {
                m.push(hits as f64);
            }
        }
        (m, lc)
    });
    let (mut m, lc) = parts
        .into_iter()
        .fold((Moments::default(), 0), |(a, l), (b, k)| {
            (a.merge(b), l + k)
        });
    if lc as f64 > LINE_CONTAINED_FRACTION * budget.count as f64 {
        let d = z.degree() as f64;
        m.n += lc;
        m.sum += lc as f64 * d;
        m.sum_sq += lc as f64 * d * d;
    } else {
        m.n += lc;
    }
    let est = m.estimate(area * len);
    FiberEstimate {
        value: est.value,
        std_error: est.std_error,
        fibers: budget.count,
        line_contained: lc,
    }
}

/// Directed volume from the surface integral of `|v . N|`.
pub fn directed_volume_surface(
    z: &dyn Hypersurface,
    region: &dyn Region,
    v: &[f64],
    budget: &SampleBudget,
) -> Result<VolumeEstimate> {
    surface_integral(
        z,
        region,
        |_, normal| dot(v, normal).abs(),
        SurfaceScheme::Crofton,
        budget,
    )
}

/// `omega_{n-1} r^{n-1} d`.
pub fn cylinder_bound(n: usize, r: f64, d: usize) -> f64 {
    unit_ball_volume(n - 1) * r.powi(n as i32 - 1) * d as f64
}

/// Exact `V_{H ∩ B}(u)` for the hyperplane `{normal . x = offset}` and a
/// ball: `|u . N|` times the area of the cross-section.
pub fn hyperplane_ball_directed_volume(normal: &[f64], offset: f64, ball: &Ball, u: &[f64]) -> f64 {
    let nn = norm(normal);
    let dist = (dot(normal, &ball.center) - offset).abs() / nn;
    if dist >= ball.radius {
        return 0.0;
    }
    let n = normal.len();
    let section = unit_ball_volume(n - 1)
        * (ball.radius * ball.radius - dist * dist)
            .sqrt()
            .powi(n as i32 - 1);
    section * dot(u, normal).abs() / nn
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxisSumReport {
    pub volume: f64,
    pub volume_error: f64,
    pub axis_sum: f64,
    pub axis_sum_error: f64,
    /// `volume <= 2 axis_sum + 3 combined error`.
    pub holds: bool,
}

/// Compare `Vol(Z ∩ U)` with `2 sum_j V(v_j)` for directions close to the
/// coordinate axes.
pub fn axis_sum_lower_bound_check(
    z: &dyn Hypersurface,
    region: &dyn Region,
    vs: &[Vec<f64>],
    budget: &SampleBudget,
) -> Result<AxisSumReport> {
    let n = region.dim();
    if vs.len() != n {
        return Err(Error::InvalidArgument(format!("need {n} directions")));
    }
    let limit = 1.0 / (100.0 * n as f64);
    for (j, v) in vs.iter().enumerate() {
        let gap = v
            .iter()
            .enumerate()
            .map(|(i, x)| (x - f64::from(u8::from(i == j))).powi(2))
            .sum::<f64>()
            .sqrt();
        if gap >= limit {
            return Err(Error::HypothesisViolated(format!(
                "|e_{} - v_{}| = {gap:.4} is not below {limit:.4}",
                j + 1,
                j + 1
            )));
        }
    }
    let vol = surface_integral(z, region, |_, _| 1.0, SurfaceScheme::Crofton, budget)?;
    let mut sum = 0.0;
    let mut var = 0.0;
    for (j, v) in vs.iter().enumerate() {
        let f = directed_volume_fiber(z, region, v, &budget.child(j as u64 + 1));
        sum += f.value;
        var += f.std_error.powi(2);
    }
    let err = (vol.std_error.powi(2) + 4.0 * var).sqrt();
    Ok(AxisSumReport {
        volume: vol.value,
        volume_error: vol.std_error,
        axis_sum: sum,
        axis_sum_error: var.sqrt(),
        holds: vol.value <= 2.0 * sum + 3.0 * err,
    })
}
