//! Visibility of a hypersurface piece: the inverse volume of the body
//! `{v : |v| <= 1, V(v) <= 1}` built from directed volumes.
//!
//! Bodies are sampled radially. By homogeneity of `V`, the radial value in
//! direction `u` is `min(1, 1 / V(u))`, and `V(-u) = V(u)`, so only half of
//! an antipodal direction set is measured.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dirvol::directed_volume_fiber;
use crate::error::{Error, Result};
use crate::geom::{
    dot, john_inner_ellipsoid, sphere_directions, Aabb, ConvexBodySample, Ellipsoid,
};
use crate::measure::{orthogonal_basis, SampleBudget};
use crate::poly::{basis_len, MultiPoly};
use crate::region::{Region, Shape};
use crate::rng::{self, StreamRng};
use crate::surface::{FactoredPoly, Hypersurface, Surface};
use crate::unit_ball_volume;

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_PERTURBATIONS: usize = 16;

/// Number of body directions (both signs) used by default.
pub fn default_directions(n: usize) -> usize {
    if n <= 3 {
        512
    } else {
        4096
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VisibilityReport {
    pub body: ConvexBodySample,
    pub vis: f64,
    pub john: Ellipsoid,
}

impl VisibilityReport {
    pub fn from_body(body: ConvexBodySample) -> Result<Self> {
        let vis = 1.0 / body.volume();
        let john = john_inner_ellipsoid(&body)?;
        Ok(VisibilityReport { body, vis, john })
    }
}

/// Stream for direction `i` of a body: shared by every surface measured
/// under the same budget, so comparisons use common random numbers.
pub(crate) fn direction_budget(budget: &SampleBudget, i: usize) -> SampleBudget {
    SampleBudget {
        seed: rng::derive(budget.seed, 0xd1ec_0000 + i as u64),
        ..*budget
    }
}

/// Radial sample of `{v : |v| <= 1, V(v) <= 1}` given `V` on unit vectors.
pub fn body_from_directed<F>(n: usize, directions: usize, seed: u64, v: F) -> ConvexBodySample
where
    F: Fn(usize, &[f64]) -> f64 + Sync,
{
    let dirs = sphere_directions(n, directions, seed);
    let half = directions / 2;
    let rho: Vec<f64> = (0..half)
        .into_par_iter()
        .map(|i| radial_value(v(i, &dirs[i])))
        .collect();
    let radial = rho.iter().chain(&rho).copied().collect();
    ConvexBodySample::new(dirs, radial)
}

/// Body from directed volumes on the first half of an antipodal direction
/// set.
pub fn body_from_values(dirs: Vec<Vec<f64>>, half_values: &[f64]) -> ConvexBodySample {
    assert_eq!(dirs.len(), 2 * half_values.len());
    let rho: Vec<f64> = half_values.iter().map(|v| radial_value(*v)).collect();
    let radial = rho.iter().chain(&rho).copied().collect();
    ConvexBodySample::new(dirs, radial)
}

fn radial_value(v: f64) -> f64 {
    if v <= 1.0 {
        1.0
    } else {
        1.0 / v
    }
}

/// Visibility of `Z ∩ U` with the default direction count; `budget.count`
/// is the number of fibres per direction.
pub fn visibility(
    z: &dyn Hypersurface,
    region: &dyn Region,
    budget: &SampleBudget,
) -> Result<VisibilityReport> {
    visibility_with(z, region, default_directions(region.dim()), budget)
}

pub fn visibility_with(
    z: &dyn Hypersurface,
    region: &dyn Region,
    directions: usize,
    budget: &SampleBudget,
) -> Result<VisibilityReport> {
    let body = body_from_directed(region.dim(), directions, budget.seed, |i, u| {
        directed_volume_fiber(z, region, u, &direction_budget(budget, i)).value
    });
    VisibilityReport::from_body(body)
}

/// Averaging radius and ensemble size on the coefficient sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifiedQuery {
    pub epsilon: f64,
    pub k: usize,
}

impl Default for MollifiedQuery {
    fn default() -> Self {
        MollifiedQuery {
            epsilon: DEFAULT_EPSILON,
            k: DEFAULT_PERTURBATIONS,
        }
    }
}

impl MollifiedQuery {
    pub fn new(epsilon: f64, k: usize) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(
                "mollification radius must be positive".into(),
            ));
        }
        if k < 8 {
            return Err(Error::InvalidArgument(
                "mollification needs at least 8 perturbations".into(),
            ));
        }
        Ok(MollifiedQuery { epsilon, k })
    }
}

/// The `k` perturbed surfaces; perturbation `j` draws from its own stream.
pub fn perturbation_ensemble(
    surface: &Surface,
    m: &MollifiedQuery,
    seed: u64,
) -> Result<Vec<Box<dyn Hypersurface>>> {
    (0..m.k)
        .map(|j| {
            let mut r = rng::stream(rng::derive(seed, 0x3011_1f1e), j as u64);
            surface.perturbed(m.epsilon, &mut r).build()
        })
        .collect()
}

/// Mean of the fibre directed volume over the perturbation ensemble.
pub fn mollified_directed_volume(
    surface: &Surface,
    region: &dyn Region,
    v: &[f64],
    m: &MollifiedQuery,
    budget: &SampleBudget,
) -> Result<f64> {
    let ensemble = perturbation_ensemble(surface, m, budget.seed)?;
    Ok(ensemble_mean(&ensemble, region, v, budget))
}

pub(crate) fn ensemble_mean(
    ensemble: &[Box<dyn Hypersurface>],
    region: &dyn Region,
    v: &[f64],
    budget: &SampleBudget,
) -> f64 {
    ensemble
        .iter()
        .enumerate()
        .map(|(j, z)| directed_volume_fiber(z.as_ref(), region, v, &budget.child(j as u64)).value)
        .sum::<f64>()
        / ensemble.len() as f64
}

/// Visibility built from mollified directed volumes.
pub fn mollified_visibility(
    surface: &Surface,
    region: &dyn Region,
    m: &MollifiedQuery,
    directions: usize,
    budget: &SampleBudget,
) -> Result<VisibilityReport> {
    let ensemble = perturbation_ensemble(surface, m, budget.seed)?;
    let body = body_from_directed(region.dim(), directions, budget.seed, |i, u| {
        ensemble_mean(&ensemble, region, u, &direction_budget(budget, i))
    });
    VisibilityReport::from_body(body)
}

/// A region with its required visibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisTarget {
    pub region: Shape,
    pub m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// Greedy union of hyperplanes scored by exact per-plane tables.
    Arrangement,
    /// Evolution strategy over dense coefficients at degree `d_cap`.
    Sphere,
}

/// How the winning surface is re-measured for the reported table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Validation {
    None,
    Fiber,
    Mollified(MollifiedQuery),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub mode: SearchMode,
    /// Body directions (both signs).
    pub directions: usize,
    /// Candidate hyperplanes per greedy step, or offspring per generation.
    pub candidates: usize,
    /// Required `vis / M` in the search before validation.
    pub margin: f64,
    pub generations: usize,
    pub validate: Validation,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            mode: SearchMode::Arrangement,
            directions: 256,
            candidates: 48,
            margin: 1.05,
            generations: 30,
            validate: Validation::Fiber,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetRow {
    pub target: f64,
    pub achieved: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub surface: Surface,
    pub degree: usize,
    pub table: Vec<TargetRow>,
    /// `(degree, min ratio)` at each doubling checkpoint passed.
    pub sweep: Vec<(usize, f64)>,
    pub success: bool,
}

impl SearchOutcome {
    pub fn min_ratio(&self) -> f64 {
        self.table
            .iter()
            .map(|r| r.ratio)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn into_result(self) -> Result<SearchOutcome> {
        if self.success {
            Ok(self)
        } else {
            Err(Error::BudgetExhausted {
                best_ratio: self.min_ratio(),
            })
        }
    }
}

/// Search for a surface of degree at most `d_cap` with `Vis[Z ∩ U_k] >= M_k`
/// for every target. Always returns the best surface found with its table;
/// use [`SearchOutcome::into_result`] to turn failure into an error.
pub fn find_high_visibility_surface(
    targets: &[VisTarget],
    d_cap: usize,
    opts: &SearchOptions,
    budget: &SampleBudget,
) -> Result<SearchOutcome> {
    let Some(first) = targets.first() else {
        return Err(Error::InvalidArgument("no visibility targets".into()));
    };
    let n = first.region.dim();
    for t in targets {
        t.region.validate()?;
        if t.region.dim() != n {
            return Err(Error::InvalidArgument("targets differ in dimension".into()));
        }
        if !(t.m >= 0.0) {
            return Err(Error::InvalidArgument(
                "visibility targets must be non-negative".into(),
            ));
        }
    }
    if d_cap == 0 {
        return Err(Error::InvalidArgument("degree cap must be positive".into()));
    }
    if opts.directions < 4 || opts.directions % 2 != 0 {
        return Err(Error::InvalidArgument(
            "direction count must be even and at least 4".into(),
        ));
    }
    let (surface, mut table, sweep) = match opts.mode {
        SearchMode::Arrangement => arrangement_search(targets, d_cap, opts, budget.seed)?,
        SearchMode::Sphere => sphere_search(targets, d_cap, opts, budget)?,
    };
    let z = surface.build()?;
    // Re-measure on the direction set the search used.
    let shared = SampleBudget {
        seed: direction_seed(budget.seed),
        ..*budget
    }
    .stratified();
    for (t, row) in targets.iter().zip(table.iter_mut()) {
        let b = shared;
        let achieved = match opts.validate {
            Validation::None => continue,
            Validation::Fiber => visibility_with(z.as_ref(), &t.region, opts.directions, &b)?.vis,
            Validation::Mollified(m) => {
                mollified_visibility(&surface, &t.region, &m, opts.directions, &b)?.vis
            }
        };
        *row = row_for(t.m, achieved);
    }
    let success = table.iter().all(|r| r.ratio >= 1.0);
    Ok(SearchOutcome {
        degree: surface.degree(),
        surface,
        table,
        sweep,
        success,
    })
}

fn direction_seed(seed: u64) -> u64 {
    rng::derive(seed, 0xa77a)
}

fn row_for(target: f64, achieved: f64) -> TargetRow {
    TargetRow {
        target,
        achieved,
        ratio: if target > 0.0 {
            achieved / target
        } else {
            f64::INFINITY
        },
    }
}

fn sweep_start(targets: &[VisTarget], n: usize) -> usize {
    let total: f64 = targets.iter().map(|t| t.m).sum();
    (total.powf(1.0 / n as f64).ceil() as usize).max(1)
}

/// `(n-1)`-volume of the section of a region by `{normal . x = offset}`
/// (`normal` a unit vector).
pub fn section_area(normal: &[f64], offset: f64, region: &Shape, seed: u64) -> f64 {
    let neg: Vec<f64> = normal.iter().map(|x| -x).collect();
    if offset >= region.support(normal) || offset <= -region.support(&neg) {
        return 0.0;
    }
    let n = normal.len();
    match region {
        Shape::Ball { center, radius } => {
            let dist = dot(normal, center) - offset;
            unit_ball_volume(n - 1)
                * (radius * radius - dist * dist)
                    .max(0.0)
                    .sqrt()
                    .powi(n as i32 - 1)
        }
        Shape::Box { lo, hi } if n == 2 => {
            let p: Vec<f64> = normal.iter().map(|x| x * offset).collect();
            let t = [-normal[1], normal[0]];
            Aabb::new(lo.clone(), hi.clone())
                .clip_line(&p, &t)
                .map_or(0.0, |(a, b)| b - a)
        }
        Shape::Box { lo, hi } if n == 3 => box_section_area_3d(normal, offset, lo, hi),
        _ => {
            let plane =
                FactoredPoly::hyperplanes(n, &[(normal.to_vec(), offset)]).expect("unit normal");
            directed_volume_fiber(
                &plane,
                region,
                normal,
                &SampleBudget::new(seed, 1 << 14).stratified(),
            )
            .value
        }
    }
}

/// Area of the polygon cut from a 3-box by a plane.
fn box_section_area_3d(normal: &[f64], offset: f64, lo: &[f64], hi: &[f64]) -> f64 {
    let mut pts: Vec<[f64; 3]> = Vec::new();
    for axis in 0..3 {
        let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
        for ca in [lo[a], hi[a]] {
            for cb in [lo[b], hi[b]] {
                if normal[axis].abs() < 1e-15 {
                    continue;
                }
                let t = (offset - normal[a] * ca - normal[b] * cb) / normal[axis];
                if t >= lo[axis] && t <= hi[axis] {
                    let mut p = [0.0; 3];
                    p[axis] = t;
                    p[a] = ca;
                    p[b] = cb;
                    pts.push(p);
                }
            }
        }
    }
    if pts.len() < 3 {
        return 0.0;
    }
    let c: Vec<f64> = (0..3)
        .map(|i| pts.iter().map(|p| p[i]).sum::<f64>() / pts.len() as f64)
        .collect();
    let basis = orthogonal_basis(normal);
    let mut flat: Vec<(f64, f64)> = pts
        .iter()
        .map(|p| {
            let d: Vec<f64> = (0..3).map(|i| p[i] - c[i]).collect();
            (dot(&d, &basis[0]), dot(&d, &basis[1]))
        })
        .collect();
    flat.sort_by(|a, b| a.1.atan2(a.0).total_cmp(&b.1.atan2(b.0)));
    let m = flat.len();
    (0..m)
        .map(|i| {
            let (p, q) = (flat[i], flat[(i + 1) % m]);
            p.0 * q.1 - p.1 * q.0
        })
        .sum::<f64>()
        .abs()
        / 2.0
}

fn random_point(region: &Shape, r: &mut StreamRng) -> Vec<f64> {
    let b = region.bounds();
    let mut x = vec![0.0; b.dim()];
    for _ in 0..10_000 {
        for i in 0..x.len() {
            x[i] = r.random_range(b.lo[i]..b.hi[i]);
        }
        if region.contains(&x) {
            return x;
        }
    }
    b.center()
}

/// Per-target directed volumes on half of an antipodal direction set.
struct Tables {
    dirs: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    n: usize,
}

impl Tables {
    fn vis_of(&self, v: &[f64]) -> f64 {
        let mean = v
            .iter()
            .map(|x| radial_value(*x).powi(self.n as i32))
            .sum::<f64>()
            / v.len() as f64;
        1.0 / (unit_ball_volume(self.n) * mean)
    }

    fn vis_with(&self, k: usize, normal: &[f64], area: f64) -> f64 {
        let v: Vec<f64> = self.v[k]
            .iter()
            .zip(&self.dirs)
            .map(|(x, u)| x + area * dot(u, normal).abs())
            .collect();
        self.vis_of(&v)
    }

    fn add(&mut self, k: usize, normal: &[f64], area: f64) {
        for (x, u) in self.v[k].iter_mut().zip(&self.dirs) {
            *x += area * dot(u, normal).abs();
        }
    }

    /// The direction of largest radial value, where a new plane helps most.
    fn longest_direction(&self, k: usize) -> &[f64] {
        let j = (0..self.v[k].len())
            .min_by(|&a, &b| self.v[k][a].total_cmp(&self.v[k][b]))
            .expect("directions");
        &self.dirs[j]
    }
}

fn clipped_log(ratio: f64, margin: f64) -> f64 {
    (ratio / margin).min(1.0).ln()
}

type SearchParts = (Surface, Vec<TargetRow>, Vec<(usize, f64)>);

fn arrangement_search(
    targets: &[VisTarget],
    d_cap: usize,
    opts: &SearchOptions,
    seed: u64,
) -> Result<SearchParts> {
    let n = targets[0].region.dim();
    let all = sphere_directions(n, opts.directions, direction_seed(seed));
    let half = all[..opts.directions / 2].to_vec();
    let mut tables = Tables {
        v: vec![vec![0.0; half.len()]; targets.len()],
        dirs: half,
        n,
    };
    let ratio = |vis: f64, m: f64| if m > 0.0 { vis / m } else { f64::INFINITY };
    let mut ratios: Vec<f64> = targets
        .iter()
        .map(|t| ratio(tables.vis_of(&tables.v[0]), t.m))
        .collect();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut sweep = Vec::new();
    let mut checkpoint = sweep_start(targets, n);
    let min_of = |r: &[f64]| r.iter().copied().fold(f64::INFINITY, f64::min);

    while planes.len() < d_cap && ratios.iter().any(|&r| r < opts.margin) {
        let step = planes.len();
        let mut r = rng::stream(rng::derive(seed, 0x9a1d), step as u64);
        let worst = (0..targets.len())
            .min_by(|&a, &b| ratios[a].total_cmp(&ratios[b]))
            .expect("targets");
        let deficient: Vec<usize> = (0..targets.len())
            .filter(|&k| ratios[k] < opts.margin && k != worst)
            .collect();
        let candidates: Vec<(Vec<f64>, f64)> = (0..opts.candidates)
            .map(|c| {
                let p = random_point(&targets[worst].region, &mut r);
                let normal = match c % 3 {
                    0 => rng::unit_vector(&mut r, n),
                    1 => {
                        // Aim at the longest radius of the worst body.
                        let u = tables.longest_direction(worst);
                        let jitter = rng::unit_vector(&mut r, n);
                        let w: Vec<f64> =
                            u.iter().zip(&jitter).map(|(a, b)| a + 0.15 * b).collect();
                        let len = dot(&w, &w).sqrt();
                        w.into_iter().map(|x| x / len).collect()
                    }
                    _ => {
                        // Through a second deficient target as well.
                        let other = if deficient.is_empty() {
                            worst
                        } else {
                            deficient[r.random_range(0..deficient.len())]
                        };
                        let q = random_point(&targets[other].region, &mut r);
                        let dir: Vec<f64> = q.iter().zip(&p).map(|(a, b)| a - b).collect();
                        let mut w = rng::unit_vector(&mut r, n);
                        let dd = dot(&dir, &dir);
                        if dd > 1e-18 {
                            let s = dot(&w, &dir) / dd;
                            w.iter_mut().zip(&dir).for_each(|(x, d)| *x -= s * d);
                        }
                        let len = dot(&w, &w).sqrt().max(1e-300);
                        w.into_iter().map(|x| x / len).collect()
                    }
                };
                let offset = dot(&normal, &p);
                (normal, offset)
            })
            .collect();
        let scored: Vec<(f64, Vec<f64>)> = candidates
            .par_iter()
            .enumerate()
            .map(|(c, (normal, offset))| {
                let areas: Vec<f64> = targets
                    .iter()
                    .enumerate()
                    .map(|(k, t)| {
                        section_area(
                            normal,
                            *offset,
                            &t.region,
                            rng::derive(seed, (step * 1000 + c) as u64 ^ k as u64),
                        )
                    })
                    .collect();
                let score: f64 = targets
                    .iter()
                    .enumerate()
                    .map(|(k, t)| {
                        let rk = if areas[k] > 0.0 {
                            ratio(tables.vis_with(k, normal, areas[k]), t.m)
                        } else {
                            ratios[k]
                        };
                        clipped_log(rk, opts.margin)
                    })
                    .sum();
                (score, areas)
            })
            .collect();
        let best = (0..scored.len())
            .max_by(|&a, &b| scored[a].0.total_cmp(&scored[b].0).then(b.cmp(&a)))
            .expect("candidates");
        let (normal, offset) = candidates[best].clone();
        for (k, &area) in scored[best].1.iter().enumerate() {
            if area > 0.0 {
                tables.add(k, &normal, area);
                ratios[k] = ratio(tables.vis_of(&tables.v[k]), targets[k].m);
            }
        }
        planes.push((normal, offset));
        if planes.len() == checkpoint {
            sweep.push((checkpoint, min_of(&ratios)));
            checkpoint *= 2;
        }
    }
    if sweep.last().is_none_or(|s| s.0 != planes.len()) {
        sweep.push((planes.len(), min_of(&ratios)));
    }
    let table = targets
        .iter()
        .enumerate()
        .map(|(k, t)| row_for(t.m, tables.vis_of(&tables.v[k])))
        .collect();
    let surface = if planes.is_empty() {
        Surface::poly(MultiPoly::constant(n, 1.0))
    } else {
        Surface::factored(&FactoredPoly::hyperplanes(n, &planes)?)
    };
    Ok((surface, table, sweep))
}

/// `(1, lambda)` evolution strategy on the unit coefficient sphere at
/// degree `d`, scored with fibre visibilities under common random numbers.
fn sphere_search(
    targets: &[VisTarget],
    d: usize,
    opts: &SearchOptions,
    budget: &SampleBudget,
) -> Result<SearchParts> {
    let n = targets[0].region.dim();
    let m = basis_len(n, d);
    let score = |coeffs: &[f64]| -> Result<(f64, Vec<f64>)> {
        let p = MultiPoly::new(n, d, coeffs.to_vec())?;
        let vis: Vec<f64> = targets
            .iter()
            .enumerate()
            .map(|(k, t)| {
                Ok(visibility_with(&p, &t.region, opts.directions, &budget.child(k as u64))?.vis)
            })
            .collect::<Result<_>>()?;
        let min = targets
            .iter()
            .zip(&vis)
            .map(|(t, v)| if t.m > 0.0 { v / t.m } else { f64::INFINITY })
            .fold(f64::INFINITY, f64::min);
        Ok((min, vis))
    };
    let mut r = rng::stream(rng::derive(budget.seed, 0x5b4e), 0);
    let mut parent = rng::unit_vector(&mut r, m);
    let mut parent_score = score(&parent)?;
    let mut best = (parent.clone(), parent_score.clone());
    let mut sigma = 0.3;
    let mut sweep = Vec::new();
    for _ in 0..opts.generations {
        if best.1 .0 >= opts.margin {
            break;
        }
        let kids: Vec<Vec<f64>> = (0..opts.candidates.max(2))
            .map(|_| {
                let g = rng::gaussian(&mut r, m);
                let mut c: Vec<f64> = parent.iter().zip(&g).map(|(a, b)| a + sigma * b).collect();
                let len = dot(&c, &c).sqrt();
                c.iter_mut().for_each(|x| *x /= len);
                c
            })
            .collect();
        let scores: Vec<(f64, Vec<f64>)> = kids.iter().map(|c| score(c)).collect::<Result<_>>()?;
        let j = (0..kids.len())
            .max_by(|&a, &b| scores[a].0.total_cmp(&scores[b].0).then(b.cmp(&a)))
            .expect("offspring");
        sigma *= if scores[j].0 > parent_score.0 {
            1.5
        } else {
            0.7
        };
        parent = kids[j].clone();
        parent_score = scores[j].clone();
        if parent_score.0 > best.1 .0 {
            best = (parent.clone(), parent_score.clone());
        }
    }
    sweep.push((d, best.1 .0));
    let table = targets
        .iter()
        .zip(&best.1 .1)
        .map(|(t, v)| row_for(t.m, *v))
        .collect();
    Ok((Surface::poly(MultiPoly::new(n, d, best.0)?), table, sweep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirvol::{cylinder_bound, directed_volume_fiber};
    use crate::geom::{Ball, Tube};
    use std::f64::consts::PI;

    fn lines_scene(n1: usize, n2: usize) -> FactoredPoly {
        // n1 vertical and n2 horizontal unit segments inside [-1/2, 1/2]^2.
        let mut planes = Vec::new();
        for i in 0..n1 {
            planes.push((vec![1.0, 0.0], -0.5 + (i as f64 + 0.5) / n1 as f64));
        }
        for j in 0..n2 {
            planes.push((vec![0.0, 1.0], -0.5 + (j as f64 + 0.5) / n2 as f64));
        }
        FactoredPoly::hyperplanes(2, &planes).unwrap()
    }

    /// Area of the unit disk inside the strip `|v . N| <= h`.
    fn disk_strip_area(h: f64) -> f64 {
        if h >= 1.0 {
            PI
        } else {
            2.0 * (h * (1.0 - h * h).sqrt() + h.asin())
        }
    }

    #[test]
    fn unit_segment_and_empty_surface() {
        let b = SampleBudget::new(1, 1024);
        let disk = Ball::new(vec![0.0, 0.0], 1.0);
        let seg = MultiPoly::linear(&[0.0, 1.0], 0.0);
        let rep = visibility(&seg, &disk, &b).unwrap();
        // V(u) = 2 |u_2|: the body is the disk cut to |v_2| <= 1/2.
        let want = 1.0 / disk_strip_area(0.5);
        assert!((rep.vis - want).abs() < 0.03 * want, "{} {want}", rep.vis);
        assert!(rep.vis > 0.2 && rep.vis < 5.0);

        let empty =
            MultiPoly::from_terms(2, 2, &[(&[0, 0], 1.0), (&[2, 0], 1.0), (&[0, 2], 1.0)]).unwrap();
        let rep = visibility(&empty, &disk, &b).unwrap();
        assert_eq!(rep.vis, 1.0 / PI);
        let e3 = MultiPoly::constant(3, 1.0);
        let rep = visibility(&e3, &Aabb::cube(3, 0.0, 1.0), &b).unwrap();
        assert!((rep.vis - 1.0 / unit_ball_volume(3)).abs() < 1e-12);
    }

    #[test]
    fn union_of_segments_matches_cross_polytope() {
        let region = Aabb::cube(2, -0.5, 0.5);
        for (n1, n2) in [(2, 3), (4, 4)] {
            let z = lines_scene(n1, n2);
            let rep = visibility(&z, &region, &SampleBudget::new(2, 512)).unwrap();
            // V(v) = n1 |v_1| + n2 |v_2|, body = cross polytope of area 2 / (n1 n2).
            let want = (n1 * n2) as f64 / 2.0;
            assert!((rep.vis / want - 1.0).abs() < 0.05, "{} {want}", rep.vis);
            let boxed = (n1 * n2) as f64 / 4.0;
            assert!(rep.vis / boxed <= 4.0 && boxed / rep.vis <= 4.0);
        }
    }

    #[test]
    fn john_sandwich_on_visibility_body() {
        let z = lines_scene(3, 2);
        let rep = visibility(
            &z,
            &Aabb::cube(2, -0.5, 0.5),
            &SampleBudget::new(3, 4096).stratified(),
        )
        .unwrap();
        let sqrt_n = 2f64.sqrt();
        for (u, rho) in rep.body.directions.iter().zip(&rep.body.radial) {
            let re = rep.john.radial(u);
            assert!(*rho <= sqrt_n * re * 1.01);
            assert!(re <= rho * 1.01);
        }
        assert!(rep.vis >= 1.0 / PI);
    }

    #[test]
    fn enlarging_region_increases_visibility() {
        let mut r = rng::stream(4, 0);
        for _ in 0..3 {
            let coeffs: Vec<f64> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
            let p = MultiPoly::new(2, 2, coeffs).unwrap();
            let b = SampleBudget::new(r.random(), 1024);
            let small = visibility_with(&p, &Aabb::cube(2, -0.5, 0.5), 128, &b)
                .unwrap()
                .vis;
            let big = visibility_with(&p, &Aabb::cube(2, -1.0, 1.0), 128, &b)
                .unwrap()
                .vis;
            assert!(big >= small * 0.97, "{small} {big}");
        }
    }

    #[test]
    fn mollified_examples() {
        let unit = Aabb::cube(2, 0.0, 1.0);
        let line = Surface::poly(MultiPoly::linear(&[0.0, 1.0], -0.5));
        let b = SampleBudget::new(5, 4096);
        let m = MollifiedQuery::default();
        let v = mollified_directed_volume(&line, &unit, &[0.0, 1.0], &m, &b).unwrap();
        assert!((v - 1.0).abs() < 0.03, "{v}");
        // Tilted hyperplane, epsilon -> 0.
        let tilted = MultiPoly::linear(&[0.3, 1.0], -0.6);
        let dir = [0.6, 0.8];
        let plain = directed_volume_fiber(&tilted, &unit, &dir, &b).value;
        let tiny = MollifiedQuery::new(1e-4, 8).unwrap();
        let moll =
            mollified_directed_volume(&Surface::poly(tilted), &unit, &dir, &tiny, &b).unwrap();
        assert!((moll / plain - 1.0).abs() < 0.03, "{moll} {plain}");
        assert!(MollifiedQuery::new(0.0, 16).is_err());
        assert!(MollifiedQuery::new(1e-3, 4).is_err());
    }

    #[test]
    fn mollified_cylinder_clause() {
        let mut r = rng::stream(6, 0);
        let m = MollifiedQuery::new(1e-3, 8).unwrap();
        for case in 0..20 {
            let n = 2 + case % 2;
            let d = 1 + case % 3;
            let len = basis_len(n, d);
            let coeffs: Vec<f64> = (0..len).map(|_| r.random_range(-1.0..1.0)).collect();
            let p = MultiPoly::new(n, d, coeffs).unwrap();
            let mut dir = vec![0.0; n];
            dir[case % n] = 1.0;
            let tube = Tube::new(0, vec![0.0; n], dir.clone(), 0.5, Some(6.0)).unwrap();
            let b = SampleBudget::new(case as u64, 1024);
            let v = mollified_directed_volume(&Surface::poly(p), &tube, &dir, &m, &b).unwrap();
            assert!(v <= cylinder_bound(n, 0.5, d) * 1.05, "case {case}: {v}");
        }
    }

    #[test]
    fn mollified_map_is_continuous() {
        let unit = Aabb::cube(2, -1.0, 1.0);
        let m = MollifiedQuery::new(1e-2, 8).unwrap();
        let mut r = rng::stream(7, 0);
        for _ in 0..10 {
            let coeffs: Vec<f64> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
            let p = MultiPoly::new(2, 2, coeffs).unwrap().normalized();
            let q = crate::surface::perturb(&p, 1e-4, &mut r);
            let v = rng::unit_vector(&mut r, 2);
            let b = SampleBudget::new(r.random(), 4096);
            let a = mollified_directed_volume(&Surface::poly(p), &unit, &v, &m, &b).unwrap();
            let c = mollified_directed_volume(&Surface::poly(q), &unit, &v, &m, &b).unwrap();
            assert!((a - c).abs() <= 0.02 * a.max(0.05), "{a} {c}");
        }
    }

    #[test]
    fn section_areas() {
        let sq = Shape::parse("box:0,0:1,1").unwrap();
        let s = 0.5f64.sqrt();
        assert!((section_area(&[s, -s], 0.0, &sq, 0) - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(section_area(&[1.0, 0.0], 2.0, &sq, 0), 0.0);
        let cube = Shape::Box {
            lo: vec![0.0; 3],
            hi: vec![1.0; 3],
        };
        // Plane x + y + z = 3/2 cuts a regular hexagon of side 1/sqrt(2).
        let t = 1.0 / 3f64.sqrt();
        let hex = 3.0 * 3f64.sqrt() / 2.0 * 0.5;
        assert!((section_area(&[t, t, t], 1.5 * t, &cube, 0) - hex).abs() < 1e-9);
        assert!((section_area(&[0.0, 0.0, 1.0], 0.3, &cube, 0) - 1.0).abs() < 1e-12);
        let ball = Shape::ball(vec![0.0, 0.0, 0.0], 2.0);
        assert!((section_area(&[1.0, 0.0, 0.0], 1.0, &ball, 0) - 3.0 * PI).abs() < 1e-12);
        let tube = Shape::Tube {
            tube: Tube::new(0, vec![0.0, 0.0], vec![1.0, 0.0], 1.0, Some(4.0)).unwrap(),
        };
        assert!((section_area(&[1.0, 0.0], 0.0, &tube, 1) - 2.0).abs() < 0.02);
    }

    #[test]
    fn single_cube_needs_more_than_one_plane() {
        let targets = vec![VisTarget {
            region: Shape::parse("box:0,0:1,1").unwrap(),
            m: 1.0,
        }];
        let opts = SearchOptions {
            validate: Validation::None,
            ..SearchOptions::default()
        };
        let b = SampleBudget::new(8, 1024);
        let one = find_high_visibility_surface(&targets, 1, &opts, &b).unwrap();
        assert!(!one.success);
        // No line beats the diagonal: vis <= 1 / area(disk ∩ strip of half-width 1/sqrt 2).
        let bound = 1.0 / disk_strip_area(0.5f64.sqrt());
        assert!(
            one.min_ratio() <= bound * 1.02 && one.min_ratio() > 0.6 * bound,
            "{}",
            one.min_ratio()
        );
        assert!(matches!(
            one.clone().into_result(),
            Err(Error::BudgetExhausted { .. })
        ));
        let opts = SearchOptions {
            validate: Validation::Fiber,
            ..opts
        };
        let many = find_high_visibility_surface(&targets, 8, &opts, &b).unwrap();
        assert!(many.success, "{:?}", many.table);
        assert!(many.degree >= 3);
    }

    #[test]
    fn demanding_cube_matches_grid_construction() {
        for k in [2usize, 4] {
            let m = (k * k) as f64;
            let targets = vec![VisTarget {
                region: Shape::parse("box:0,0:1,1").unwrap(),
                m,
            }];
            let opts = SearchOptions {
                validate: Validation::None,
                ..SearchOptions::default()
            };
            let out =
                find_high_visibility_surface(&targets, 4 * k, &opts, &SampleBudget::new(9, 512))
                    .unwrap();
            // k horizontal and k vertical unit segments give vis = k^2 / 2.
            assert!(out.min_ratio() >= 0.25, "{k}: {:?}", out.table);
        }
    }

    #[test]
    fn four_cubes_degree_sweep() {
        let targets: Vec<VisTarget> = [(0, 0), (1, 0), (0, 1), (1, 1)]
            .iter()
            .map(|&(x, y)| VisTarget {
                region: Shape::Box {
                    lo: vec![x as f64, y as f64],
                    hi: vec![x as f64 + 1.0, y as f64 + 1.0],
                },
                m: 1.0,
            })
            .collect();
        let opts = SearchOptions::default();
        let out = find_high_visibility_surface(&targets, 32, &opts, &SampleBudget::new(10, 1024))
            .unwrap();
        assert!(out.success, "{:?} {:?}", out.table, out.sweep);
        assert_eq!(out.sweep[0].0, 2);
    }

    #[test]
    fn sphere_mode_runs_deterministically() {
        let targets = vec![VisTarget {
            region: Shape::parse("box:0,0:1,1").unwrap(),
            m: 0.5,
        }];
        let opts = SearchOptions {
            mode: SearchMode::Sphere,
            directions: 32,
            candidates: 4,
            generations: 4,
            validate: Validation::None,
            ..SearchOptions::default()
        };
        let b = SampleBudget::new(11, 256);
        let a = find_high_visibility_surface(&targets, 2, &opts, &b).unwrap();
        let c = find_high_visibility_surface(&targets, 2, &opts, &b).unwrap();
        assert_eq!(a.table, c.table);
        assert!(a.min_ratio() > 0.0);
    }
}
