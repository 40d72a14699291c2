//! Tube scenes on the unit lattice: multiplicity tables, the multilinear
//! functional, volumes of the joint intersection, the staged argument that
//! bounds it, and the visibility-versus-directed-volume comparison.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dirvol::{cylinder_bound, directed_volume_fiber};
use crate::error::{Error, Result};
use crate::geom::{
    cross_polytope_volume, cubes_hit_by_tube, min_determinant, sphere_directions, Aabb,
    CubeLattice, Tube,
};
use crate::hamsandwich::{solve_bisection, BisectionProblem, DEFAULT_TOLERANCE};
use crate::measure::{estimate_volume, SampleBudget, VolumeEstimate};
use crate::poly::stone_tukey_degree;
use crate::region::Shape;
use crate::rng;
use crate::surface::{FactoredPoly, Hypersurface, Surface};
use crate::visibility::{
    body_from_values, direction_budget, ensemble_mean, perturbation_ensemble, MollifiedQuery,
    VisibilityReport,
};

/// `n` families of tubes clipped to the scene cube `[0, side]^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeScene {
    pub n: usize,
    pub side: f64,
    pub seed: u64,
    pub families: Vec<Vec<Tube>>,
}

impl TubeScene {
    /// Validates the families and clips every tube to the scene; tubes that
    /// miss the scene are dropped.
    pub fn new(n: usize, side: f64, seed: u64, families: Vec<Vec<Tube>>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument("scenes need n >= 2".into()));
        }
        if !(side > 0.0) {
            return Err(Error::InvalidArgument("scene side must be positive".into()));
        }
        if families.len() != n {
            return Err(Error::InvalidArgument(format!(
                "expected {n} tube families, got {}",
                families.len()
            )));
        }
        let scene = Aabb::cube(n, 0.0, side);
        let mut clipped = Vec::with_capacity(n);
        for (j, family) in families.into_iter().enumerate() {
            let mut out = Vec::with_capacity(family.len());
            for mut t in family {
                t.validate()?;
                if t.dim() != n {
                    return Err(Error::InvalidArgument(format!(
                        "tube in family {j} has wrong dimension"
                    )));
                }
                t.family = j;
                if let Some(c) = t.clipped(&scene) {
                    out.push(c);
                }
            }
            clipped.push(out);
        }
        Ok(TubeScene {
            n,
            side,
            seed,
            families: clipped,
        })
    }

    pub fn lattice(&self) -> CubeLattice {
        CubeLattice::scene(self.n, self.side)
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::cube(self.n, 0.0, self.side)
    }

    /// Tube counts `A(j)`.
    pub fn counts(&self) -> Vec<usize> {
        self.families.iter().map(|f| f.len()).collect()
    }

    pub fn directions(&self) -> Vec<Vec<Vec<f64>>> {
        self.families
            .iter()
            .map(|f| f.iter().map(|t| t.direction.clone()).collect())
            .collect()
    }

    /// Whether `x` lies in every family's union of tubes.
    pub fn in_intersection(&self, x: &[f64]) -> bool {
        self.families
            .iter()
            .all(|f| f.iter().any(|t| t.contains(x)))
    }

    pub fn total_tubes(&self) -> usize {
        self.families.iter().map(|f| f.len()).sum()
    }
}

/// Scene recipes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// Family `j` runs along `e_j`, with cores on an `m^{n-1}` grid of the
    /// other coordinates at `margin + radius + spacing * i`.
    AxisGrid {
        m: usize,
        radius: f64,
        spacing: f64,
        margin: f64,
    },
    /// Random tubes near the axes; rejected until the transversality is at
    /// least `theta_min`.
    RandomTransverse {
        side: f64,
        radius: f64,
        a_min: usize,
        a_max: usize,
        tilt: f64,
        theta_min: f64,
    },
    /// Few tubes whose families have transversality close to `theta`.
    Transversality {
        theta: f64,
        side: f64,
        tubes: usize,
        radius: f64,
    },
}

impl Generator {
    pub fn build(&self, n: usize, seed: u64) -> Result<TubeScene> {
        match *self {
            Generator::AxisGrid {
                m,
                radius,
                spacing,
                margin,
            } => axis_grid(n, m, radius, spacing, margin, seed),
            Generator::RandomTransverse {
                side,
                radius,
                a_min,
                a_max,
                tilt,
                theta_min,
            } => random_transverse(n, seed, side, radius, a_min, a_max, tilt, theta_min),
            Generator::Transversality {
                theta,
                side,
                tubes,
                radius,
            } => transversality_scene(n, theta, side, tubes, radius, seed),
        }
    }
}

fn axis_grid(
    n: usize,
    m: usize,
    radius: f64,
    spacing: f64,
    margin: f64,
    seed: u64,
) -> Result<TubeScene> {
    if m == 0 {
        return Err(Error::InvalidArgument(
            "grid needs at least one tube per row".into(),
        ));
    }
    let side = 2.0 * margin + 2.0 * radius + spacing * (m - 1) as f64;
    let count = m.pow(n as u32 - 1);
    let mut families = Vec::with_capacity(n);
    for j in 0..n {
        let mut dir = vec![0.0; n];
        dir[j] = 1.0;
        let mut family = Vec::with_capacity(count);
        for idx in 0..count {
            let mut rest = idx;
            let mut p = vec![0.0; n];
            for (i, x) in p.iter_mut().enumerate() {
                if i == j {
                    *x = 0.5 * side;
                } else {
                    *x = margin + radius + spacing * (rest % m) as f64;
                    rest /= m;
                }
            }
            family.push(Tube::new(j, p, dir.clone(), radius, None)?);
        }
        families.push(family);
    }
    TubeScene::new(n, side, seed, families)
}

/// Adjacent, disjoint unit-radius strips: `vol(I) = (2A)^2` in the plane.
pub fn joint_grid(n: usize, m: usize) -> Result<TubeScene> {
    axis_grid(n, m, 1.0, 2.0, 1.0, 0)
}

/// Thin tubes through cube centres: each tube meets one line of cubes, so
/// the functional equals its lattice bound exactly.
pub fn lattice_grid(n: usize, m: usize) -> Result<TubeScene> {
    axis_grid(n, m, 0.25, 1.0, 0.25, 0)
}

/// Strips filling `[0, m]^2` exactly, one cube wide.
pub fn trace_grid(n: usize, m: usize) -> Result<TubeScene> {
    if m == 1 {
        // A single radius-1 tube per axis; `I` is the 2 x 2 block of cubes.
        return axis_grid(n, 1, 1.0, 2.0, 0.0, 0);
    }
    axis_grid(n, m, 0.5, 1.0, 0.0, 0)
}

#[allow(clippy::too_many_arguments)]
fn random_transverse(
    n: usize,
    seed: u64,
    side: f64,
    radius: f64,
    a_min: usize,
    a_max: usize,
    tilt: f64,
    theta_min: f64,
) -> Result<TubeScene> {
    if a_min == 0 || a_min > a_max {
        return Err(Error::InvalidArgument("need 1 <= a_min <= a_max".into()));
    }
    for attempt in 0..1000u64 {
        let mut r = rng::stream(rng::derive(seed, 0x7a2d), attempt);
        let mut families = Vec::with_capacity(n);
        for j in 0..n {
            let a = r.random_range(a_min..=a_max);
            let mut family = Vec::with_capacity(a);
            for _ in 0..a {
                let g = rng::gaussian(&mut r, n);
                let mut dir: Vec<f64> = g.iter().map(|x| tilt * x).collect();
                dir[j] += 1.0;
                let p: Vec<f64> = (0..n).map(|_| r.random_range(0.0..side)).collect();
                family.push(Tube::new(j, p, dir, radius, None)?);
            }
            families.push(family);
        }
        let scene = TubeScene::new(n, side, seed, families)?;
        if scene.families.iter().any(|f| f.is_empty()) {
            continue;
        }
        if min_determinant(&scene.directions(), seed)?.theta >= theta_min {
            return Ok(scene);
        }
    }
    Err(Error::InvalidArgument(format!(
        "no scene with transversality >= {theta_min} after 1000 attempts"
    )))
}

/// Seeded random transverse scene with the default recipe.
pub fn random_transverse_scene(n: usize, seed: u64) -> Result<TubeScene> {
    let side = if n == 2 { 16.0 } else { 8.0 };
    random_transverse(n, seed, side, 0.25, 4, 64, 0.15, 0.2)
}

/// Base directions `e_1, ..., e_{n-1}` and a last direction leaning towards
/// `e_1` with `|det| = theta`.
fn transversality_frame(n: usize, theta: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|j| {
            let mut v = vec![0.0; n];
            if j + 1 < n {
                v[j] = 1.0;
            } else {
                v[0] = (1.0 - theta * theta).max(0.0).sqrt();
                v[j] = theta;
            }
            v
        })
        .collect()
}

fn transversality_scene(
    n: usize,
    theta: f64,
    side: f64,
    tubes: usize,
    radius: f64,
    seed: u64,
) -> Result<TubeScene> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidArgument("theta must lie in (0, 1]".into()));
    }
    let frame = transversality_frame(n, theta);
    let mut r = rng::stream(rng::derive(seed, 0x61_0000), 0);
    let mut families = Vec::with_capacity(n);
    for (j, base) in frame.iter().enumerate() {
        let mut family = Vec::with_capacity(tubes);
        for _ in 0..tubes {
            let g = rng::gaussian(&mut r, n);
            let dir: Vec<f64> = base
                .iter()
                .zip(&g)
                .map(|(b, x)| b + 0.02 * theta * x)
                .collect();
            // Cores through the middle third so every pair of families meets.
            let p: Vec<f64> = (0..n)
                .map(|_| r.random_range(side / 3.0..2.0 * side / 3.0))
                .collect();
            family.push(Tube::new(j, p, dir, radius, None)?);
        }
        families.push(family);
    }
    TubeScene::new(n, side, seed, families)
}

/// Per-cube tube counts `M_j(Q_k)` and their product `F(Q_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeTable {
    pub lattice: CubeLattice,
    /// `m[j][k]`.
    pub m: Vec<Vec<u32>>,
    pub f: Vec<f64>,
}

impl CubeTable {
    /// Indices of cubes with `F > 0`.
    pub fn active(&self) -> Vec<usize> {
        (0..self.f.len()).filter(|&k| self.f[k] > 0.0).collect()
    }
}

/// Lattice cube indices met by each tube, per family.
pub fn tube_incidences(scene: &TubeScene) -> Vec<Vec<Vec<usize>>> {
    let lattice = scene.lattice();
    scene
        .families
        .iter()
        .map(|family| {
            family
                .par_iter()
                .map(|t| {
                    cubes_hit_by_tube(t, &lattice)
                        .iter()
                        .filter_map(|c| lattice.index(c))
                        .collect()
                })
                .collect()
        })
        .collect()
}

pub fn multiplicity_table(scene: &TubeScene) -> CubeTable {
    let lattice = scene.lattice();
    let mut m = vec![vec![0u32; lattice.len()]; scene.n];
    for (j, family) in tube_incidences(scene).into_iter().enumerate() {
        for cubes in family {
            for k in cubes {
                m[j][k] += 1;
            }
        }
    }
    let f = (0..lattice.len())
        .map(|k| m.iter().map(|row| f64::from(row[k])).product())
        .collect();
    CubeTable { lattice, m, f }
}

/// `sum_k F(Q_k)^{1/(n-1)}`.
pub fn kakeya_lhs(table: &CubeTable, n: usize) -> f64 {
    assert!(n >= 2);
    let p = 1.0 / (n as f64 - 1.0);
    table
        .f
        .iter()
        .filter(|f| **f > 0.0)
        .map(|f| f.powf(p))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KakeyaRatio {
    pub counts: Vec<usize>,
    pub lhs: f64,
    pub theta: f64,
    pub theta_exhaustive: bool,
    pub rhs_core: f64,
    pub ratio: f64,
}

/// The functional against `theta^{-1/(n-1)} prod_j A(j)^{1/(n-1)}`.
pub fn kakeya_ratio(scene: &TubeScene) -> Result<KakeyaRatio> {
    let n = scene.n;
    let md = min_determinant(&scene.directions(), scene.seed)?;
    if md.theta <= 1e-12 {
        return Err(Error::DegenerateTransversality);
    }
    let lhs = kakeya_lhs(&multiplicity_table(scene), n);
    let p = 1.0 / (n as f64 - 1.0);
    let counts = scene.counts();
    let rhs_core = md.theta.powf(-p) * counts.iter().map(|&a| (a as f64).powf(p)).product::<f64>();
    Ok(KakeyaRatio {
        counts,
        lhs,
        theta: md.theta,
        theta_exhaustive: md.exhaustive,
        rhs_core,
        ratio: lhs / rhs_core,
    })
}

/// Require every tube of family `j` to be within `1/(100 n)` of `±e_j`.
fn check_near_axes(scene: &TubeScene) -> Result<()> {
    let limit = 1.0 / (100.0 * scene.n as f64);
    for (j, family) in scene.families.iter().enumerate() {
        for (a, t) in family.iter().enumerate() {
            let gap = |s: f64| {
                t.direction
                    .iter()
                    .enumerate()
                    .map(|(i, x)| (x - s * f64::from(u8::from(i == j))).powi(2))
                    .sum::<f64>()
                    .sqrt()
            };
            let g = gap(1.0).min(gap(-1.0));
            if g >= limit {
                return Err(Error::HypothesisViolated(format!(
                    "tube {a} of family {j} is {g:.4} from its axis (limit {limit:.4})"
                )));
            }
        }
    }
    Ok(())
}

/// Monte Carlo volume of `I`, the set covered by every family.
pub fn joint_volume(scene: &TubeScene, budget: &SampleBudget) -> Result<VolumeEstimate> {
    check_near_axes(scene)?;
    if scene.families.iter().any(|f| f.is_empty()) {
        return Ok(VolumeEstimate {
            value: 0.0,
            std_error: 0.0,
            count: 0,
        });
    }
    let reach = scene
        .families
        .iter()
        .flatten()
        .map(|t| t.radius)
        .fold(0.0_f64, f64::max);
    let bounds = scene.bounds().expanded(reach);
    Ok(estimate_volume(
        |x| scene.in_intersection(x),
        &bounds,
        budget,
    ))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceOptions {
    /// Degree used when the bisection degree would exceed it.
    pub max_degree: Option<usize>,
    pub mollify: MollifiedQuery,
    /// Fibres per directed-volume estimate.
    pub lines: usize,
    /// Grid points per axis when testing cubes against `I`.
    pub grid: usize,
    pub restarts: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            max_degree: None,
            mollify: MollifiedQuery::default(),
            lines: 2048,
            grid: 6,
            restarts: crate::hamsandwich::DEFAULT_RESTARTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub cube: Vec<i64>,
    pub family: usize,
    pub tube: usize,
    /// Mollified directed volume along the chosen tube.
    pub vbar: f64,
    /// Sum over families of the best mollified directed volume.
    pub axis_sum: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceReport {
    pub cubes: Vec<Vec<i64>>,
    pub v: usize,
    pub a: usize,
    pub degree: usize,
    /// `d / V^{1/n}`.
    pub degree_ratio: f64,
    pub max_defect: f64,
    pub surface: Surface,
    pub assignments: Vec<Assignment>,
    pub popular: (usize, usize),
    pub popular_count: usize,
    pub required: usize,
    pub enlarged_radius: f64,
    pub enlarged_volume: f64,
    pub enlarged_error: f64,
    pub min_vk: f64,
    pub sum_vk: f64,
    pub cylinder: f64,
    pub chain_holds: bool,
    /// `V / A`.
    pub lhs: f64,
    /// `V^{1/n}`.
    pub rhs: f64,
    pub c_measured: f64,
    pub holds: bool,
}

/// Run the five stages of the volume bound on a scene; failures carry the
/// stage name (`cubes`, `bisect`, `assign`, `pigeonhole`, `enlarge`).
pub fn volume_trace(
    scene: &TubeScene,
    opts: &TraceOptions,
    budget: &SampleBudget,
) -> Result<TraceReport> {
    let n = scene.n;
    check_near_axes(scene).map_err(|e| e.at_stage("hypotheses"))?;
    let lattice = scene.lattice();
    let incidences = tube_incidences(scene);

    // Stage 1: cubes meeting I.
    let g = opts.grid.max(1);
    let cube_ids: Vec<usize> = (0..lattice.len())
        .into_par_iter()
        .filter(|&k| {
            let corner = lattice.corner(k);
            let mut x = vec![0.0; n];
            (0..g.pow(n as u32)).any(|mut idx| {
                for (i, xi) in x.iter_mut().enumerate() {
                    *xi = corner[i] as f64 + ((idx % g) as f64 + 0.5) / g as f64;
                    idx /= g;
                }
                scene.in_intersection(&x)
            })
        })
        .collect();
    if cube_ids.is_empty() {
        return Err(
            Error::HypothesisViolated("the families have no common point".into()).at_stage("cubes"),
        );
    }
    let cubes: Vec<Vec<i64>> = cube_ids.iter().map(|&k| lattice.corner(k)).collect();
    let v = cubes.len();
    let a = scene.counts().into_iter().max().unwrap_or(0);

    // Stage 2: bisect every cube.
    let st = stone_tukey_degree(n, v);
    let degree = opts.max_degree.map_or(st, |cap| st.min(cap));
    let sets: Vec<Shape> = cubes
        .iter()
        .map(|c| Shape::Box {
            lo: c.iter().map(|&x| x as f64).collect(),
            hi: c.iter().map(|&x| x as f64 + 1.0).collect(),
        })
        .collect();
    let problem = BisectionProblem::new(sets, degree, DEFAULT_TOLERANCE)
        .map_err(|e| e.at_stage("bisect"))?
        .with_restarts(opts.restarts);
    let bis = solve_bisection(&problem, &budget.child(0xb1)).map_err(|e| e.at_stage("bisect"))?;
    let surface = Surface::poly(bis.poly.clone());
    let z = bis.poly.clone();

    // Stage 3: per cube, the tube direction with the largest mollified
    // directed volume.
    let ensemble = perturbation_ensemble(&surface, &opts.mollify, budget.seed)
        .map_err(|e| e.at_stage("assign"))?;
    let lines = SampleBudget::new(rng::derive(budget.seed, 0xa551), opts.lines.max(1)).stratified();
    let assignments: Vec<Assignment> = cube_ids
        .iter()
        .zip(&cubes)
        .map(|(&k, corner)| {
            let region = Aabb::new(
                corner.iter().map(|&x| x as f64).collect(),
                corner.iter().map(|&x| x as f64 + 1.0).collect(),
            );
            let mut best: Option<(usize, usize, f64)> = None;
            let mut axis_sum = 0.0;
            for (j, family) in scene.families.iter().enumerate() {
                let mut family_best = 0.0_f64;
                for (ai, t) in family.iter().enumerate() {
                    if !incidences[j][ai].contains(&k) {
                        continue;
                    }
                    let vbar = ensemble_mean(&ensemble, &region, &t.direction, &lines);
                    family_best = family_best.max(vbar);
                    if best.is_none_or(|b| vbar > b.2) {
                        best = Some((j, ai, vbar));
                    }
                }
                axis_sum += family_best;
            }
            let (family, tube, vbar) = best.ok_or_else(|| {
                Error::HypothesisViolated(format!("no tube through cube {corner:?}"))
                    .at_stage("assign")
            })?;
            Ok(Assignment {
                cube: corner.clone(),
                family,
                tube,
                vbar,
                axis_sum,
            })
        })
        .collect::<Result<_>>()?;

    // Stage 4: the most popular tube.
    let mut tally: Vec<Vec<usize>> = scene.families.iter().map(|f| vec![0; f.len()]).collect();
    for asg in &assignments {
        tally[asg.family][asg.tube] += 1;
    }
    let mut popular = (0, 0);
    let mut popular_count = 0;
    for (j, row) in tally.iter().enumerate() {
        for (ai, &c) in row.iter().enumerate() {
            if c > popular_count {
                popular = (j, ai);
                popular_count = c;
            }
        }
    }
    let required = v.div_ceil(scene.total_tubes());
    if popular_count < required {
        return Err(Error::HypothesisViolated(format!(
            "most popular tube carries {popular_count} cubes, fewer than {required}"
        ))
        .at_stage("pigeonhole"));
    }

    // Stage 5: directed volume in the enlarged tube.
    let tube = &scene.families[popular.0][popular.1];
    let grow = (n as f64).sqrt();
    let enlarged_radius = tube.radius + grow;
    let enlarged = tube
        .with_radius(enlarged_radius)
        .with_length(tube.length.unwrap_or(scene.side) + 2.0 * grow);
    let dir = &tube.direction;
    let big = directed_volume_fiber(&z, &enlarged, dir, &lines.child(1));
    let mut vks = Vec::new();
    let mut var = 0.0;
    for asg in assignments.iter().filter(|x| (x.family, x.tube) == popular) {
        let region = Aabb::new(
            asg.cube.iter().map(|&x| x as f64).collect(),
            asg.cube.iter().map(|&x| x as f64 + 1.0).collect(),
        );
        let est = directed_volume_fiber(&z, &region, dir, &lines.child(2));
        vks.push(est.value);
        var += est.std_error * est.std_error;
    }
    let min_vk = vks.iter().copied().fold(f64::INFINITY, f64::min);
    let sum_vk: f64 = vks.iter().sum();
    if !(min_vk > 0.0) {
        return Err(Error::PrerequisiteViolated(
            "the surface has no directed volume in an assigned cube".into(),
        )
        .at_stage("enlarge"));
    }
    let cylinder = cylinder_bound(n, enlarged_radius, degree);
    let slack = 3.0 * (var + big.std_error * big.std_error).sqrt();
    let chain_holds = popular_count as f64 * min_vk <= sum_vk + 1e-12
        && sum_vk <= big.value + slack
        && big.value <= cylinder + 3.0 * big.std_error;
    let rhs = (v as f64).powf(1.0 / n as f64);
    let lhs = v as f64 / a as f64;
    let c_measured = n as f64 * big.value / (min_vk * rhs);
    Ok(TraceReport {
        cubes,
        v,
        a,
        degree,
        degree_ratio: degree as f64 / rhs,
        max_defect: bis.max_defect(),
        surface,
        assignments,
        popular,
        popular_count,
        required,
        enlarged_radius,
        enlarged_volume: big.value,
        enlarged_error: big.std_error,
        min_vk,
        sum_vk,
        cylinder,
        chain_holds,
        lhs,
        rhs,
        c_measured,
        holds: lhs <= c_measured * rhs,
    })
}

/// `2n ceil(S)` hyperplanes `x_i = k + 1/4` and `x_i = k + 3/4`; every unit
/// cube gets two parallel unit sections per axis, so `V(v) >= 2|v|_1`.
pub fn axis_augmentation(n: usize, side: f64) -> Vec<(Vec<f64>, f64)> {
    let cells = side.ceil() as usize;
    let mut out = Vec::with_capacity(2 * n * cells);
    for i in 0..n {
        let mut normal = vec![0.0; n];
        normal[i] = 1.0;
        for k in 0..cells {
            for off in [0.25, 0.75] {
                out.push((normal.clone(), k as f64 + off));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityCheckOptions {
    pub mollify: MollifiedQuery,
    /// Body directions (both signs).
    pub directions: usize,
    pub augment: bool,
    /// Smallest admissible mollified directed volume of a unit vector.
    pub floor: f64,
}

impl Default for VisibilityCheckOptions {
    fn default() -> Self {
        VisibilityCheckOptions {
            mollify: MollifiedQuery::new(1e-3, 8).expect("valid"),
            directions: 128,
            augment: true,
            floor: 0.98,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityCheckRow {
    pub cube: Vec<i64>,
    /// Chosen tube index per family.
    pub chosen: Vec<usize>,
    pub vbar: Vec<f64>,
    pub vis: f64,
    /// `theta^{-1} prod_j vbar_j`.
    pub bound: f64,
    pub ratio: f64,
    /// Volume of `hull(±v_j / vbar_j)`.
    pub hull_volume: f64,
    pub det: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityCheckReport {
    pub theta: f64,
    pub degree: usize,
    pub rows: Vec<VisibilityCheckRow>,
    pub max_ratio: f64,
}

/// Compare the mollified visibility of `Z ∩ Q_k` with the product of the
/// smallest mollified directed volumes along the tubes through `Q_k`, on
/// every cube met by all families.
pub fn visibility_check(
    scene: &TubeScene,
    z: &FactoredPoly,
    opts: &VisibilityCheckOptions,
    budget: &SampleBudget,
) -> Result<VisibilityCheckReport> {
    let n = scene.n;
    let md = min_determinant(&scene.directions(), scene.seed)?;
    if md.theta <= 1e-12 {
        return Err(Error::DegenerateTransversality);
    }
    let mut z = z.clone();
    if opts.augment {
        for (normal, offset) in axis_augmentation(n, scene.side) {
            z.push(crate::poly::MultiPoly::linear(&normal, -offset))?;
        }
    }
    let surface = Surface::factored(&z);
    let ensemble = perturbation_ensemble(&surface, &opts.mollify, budget.seed)?;
    let table = multiplicity_table(scene);
    let incidences = tube_incidences(scene);
    let dirs = sphere_directions(n, opts.directions, rng::derive(budget.seed, 0x61d1));
    let half = opts.directions / 2;

    let rows: Vec<VisibilityCheckRow> = table
        .active()
        .into_iter()
        .map(|k| {
            let corner = table.lattice.corner(k);
            let region = Aabb::new(
                corner.iter().map(|&x| x as f64).collect(),
                corner.iter().map(|&x| x as f64 + 1.0).collect(),
            );
            let profile: Vec<f64> = (0..half)
                .into_par_iter()
                .map(|i| ensemble_mean(&ensemble, &region, &dirs[i], &direction_budget(budget, i)))
                .collect();
            let low = profile.iter().copied().fold(f64::INFINITY, f64::min);
            if low < opts.floor {
                return Err(Error::PrerequisiteViolated(format!(
                    "mollified directed volume {low:.3} below {} on cube {corner:?}",
                    opts.floor
                )));
            }
            let report = VisibilityReport::from_body(body_from_values(dirs.clone(), &profile))?;
            let mut chosen = Vec::with_capacity(n);
            let mut vbar = Vec::with_capacity(n);
            for (j, family) in scene.families.iter().enumerate() {
                let mut best: Option<(usize, f64)> = None;
                for (a, t) in family.iter().enumerate() {
                    if !incidences[j][a].contains(&k) {
                        continue;
                    }
                    let val = ensemble_mean(&ensemble, &region, &t.direction, &budget.child(0x61));
                    if best.is_none_or(|b| val < b.1) {
                        best = Some((a, val));
                    }
                }
                let (a, val) = best.expect("active cube meets every family");
                chosen.push(a);
                vbar.push(val);
            }
            let scaled: Vec<Vec<f64>> = chosen
                .iter()
                .enumerate()
                .map(|(j, &a)| {
                    scene.families[j][a]
                        .direction
                        .iter()
                        .map(|x| x / vbar[j])
                        .collect()
                })
                .collect();
            let rows_ref: Vec<&[f64]> = chosen
                .iter()
                .enumerate()
                .map(|(j, &a)| scene.families[j][a].direction.as_slice())
                .collect();
            let det = crate::geom::det(&rows_ref).abs();
            let bound = vbar.iter().product::<f64>() / md.theta;
            Ok(VisibilityCheckRow {
                cube: corner,
                chosen,
                vbar,
                vis: report.vis,
                bound,
                ratio: report.vis / bound,
                hull_volume: cross_polytope_volume(&scaled),
                det,
            })
        })
        .collect::<Result<_>>()?;
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0_f64, f64::max);
    Ok(VisibilityCheckReport {
        theta: md.theta,
        degree: z.degree(),
        rows,
        max_ratio,
    })
}

/// `n! / 2^n`: the ratio bound that follows from `K ⊇ hull(±v_j / vbar_j)`.
pub fn visibility_ratio_bound(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product::<f64>() / 2f64.powi(n as i32)
}

/// Unit coordinate hyperplanes through the centre of the cube with the
/// given corner.
pub fn coordinate_hyperplanes(corner: &[i64]) -> Result<FactoredPoly> {
    let n = corner.len();
    let planes: Vec<(Vec<f64>, f64)> = (0..n)
        .map(|i| {
            let mut normal = vec![0.0; n];
            normal[i] = 1.0;
            (normal, corner[i] as f64 + 0.5)
        })
        .collect();
    FactoredPoly::hyperplanes(n, &planes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn axis_tube(j: usize, n: usize, p: Vec<f64>, r: f64) -> Tube {
        let mut d = vec![0.0; n];
        d[j] = 1.0;
        Tube::new(j, p, d, r, None).unwrap()
    }

    #[test]
    fn thin_grid_has_unit_multiplicities() {
        let scene = lattice_grid(2, 3).unwrap();
        let table = multiplicity_table(&scene);
        assert_eq!(table.active().len(), 9);
        assert!(table.f.iter().all(|&f| f == 1.0));
        let r = kakeya_ratio(&scene).unwrap();
        assert_eq!(r.lhs, 9.0);
        assert!((r.ratio - 1.0).abs() < 1e-12);
        assert!(r.theta_exhaustive);
    }

    #[test]
    fn functional_in_three_dimensions() {
        let scene = lattice_grid(3, 2).unwrap();
        let r = kakeya_ratio(&scene).unwrap();
        assert_eq!(r.counts, vec![4, 4, 4]);
        assert!((r.lhs - 8.0).abs() < 1e-12);
        assert!((r.rhs_core - 8.0).abs() < 1e-12);
    }

    #[test]
    fn stacked_tubes_multiply() {
        // Two parallel tubes through the same cubes in family 0.
        let families = vec![
            vec![
                axis_tube(0, 2, vec![1.0, 0.5], 0.25),
                axis_tube(0, 2, vec![1.0, 0.6], 0.25),
            ],
            vec![axis_tube(1, 2, vec![0.5, 1.0], 0.25)],
        ];
        let scene = TubeScene::new(2, 2.0, 0, families).unwrap();
        let table = multiplicity_table(&scene);
        let k = table.lattice.index(&[0, 0]).unwrap();
        assert_eq!(table.m[0][k], 2);
        assert_eq!(table.m[1][k], 1);
        assert_eq!(table.f[k], 2.0);
        assert_eq!(kakeya_lhs(&table, 2), 2.0);
    }

    #[test]
    fn parallel_families_are_degenerate() {
        let families = vec![
            vec![axis_tube(0, 2, vec![1.0, 1.0], 0.25)],
            vec![axis_tube(0, 2, vec![1.0, 1.5], 0.25)],
        ];
        let scene = TubeScene::new(2, 2.0, 0, families).unwrap();
        assert!(matches!(
            kakeya_ratio(&scene),
            Err(Error::DegenerateTransversality)
        ));
    }

    #[test]
    fn grid_intersection_volume() {
        let budget = SampleBudget::new(3, 200_000);
        for a in [1usize, 2] {
            let scene = joint_grid(2, a).unwrap();
            let v = joint_volume(&scene, &budget).unwrap();
            let exact = 4.0 * (a * a) as f64;
            assert!((v.value - exact).abs() < 0.03 * exact, "A={a}: {}", v.value);
        }
    }

    #[test]
    fn empty_family_has_empty_intersection() {
        let families = vec![vec![axis_tube(0, 2, vec![1.0, 1.0], 0.5)], vec![]];
        let scene = TubeScene::new(2, 2.0, 0, families).unwrap();
        let v = joint_volume(&scene, &SampleBudget::new(1, 1000)).unwrap();
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn tilted_tubes_violate_the_hypothesis() {
        let t = Tube::new(0, vec![1.0, 1.0], vec![1.0, 0.1], 0.5, None).unwrap();
        let families = vec![vec![t], vec![axis_tube(1, 2, vec![1.0, 1.0], 0.5)]];
        let scene = TubeScene::new(2, 2.0, 0, families).unwrap();
        assert!(matches!(
            joint_volume(&scene, &SampleBudget::new(1, 1000)),
            Err(Error::HypothesisViolated(_))
        ));
    }

    #[test]
    fn random_scenes_respect_transversality() {
        for seed in 0..3 {
            let scene = random_transverse_scene(2, seed).unwrap();
            let r = kakeya_ratio(&scene).unwrap();
            assert!(r.theta >= 0.2);
            assert!(r.ratio <= 16.0, "seed {seed}: ratio {}", r.ratio);
        }
    }

    #[test]
    fn generator_roundtrip() {
        let g = Generator::AxisGrid {
            m: 2,
            radius: 0.25,
            spacing: 1.0,
            margin: 0.25,
        };
        let json = serde_json::to_string(&g).unwrap();
        assert!(json.contains("\"kind\":\"axis_grid\""));
        let back: Generator = serde_json::from_str(&json).unwrap();
        assert_eq!(back.build(2, 0).unwrap(), lattice_grid(2, 2).unwrap());
    }

    #[test]
    fn trace_on_small_grids() {
        let budget = SampleBudget::new(11, 1 << 15);
        for (a, v) in [(1usize, 4usize), (3, 9)] {
            let scene = trace_grid(2, a).unwrap();
            let t = volume_trace(&scene, &TraceOptions::default(), &budget).unwrap();
            assert_eq!(t.v, v, "A={a}");
            assert!(t.degree_ratio <= 2.0);
            assert!(t.popular_count >= t.required);
            assert!(t.chain_holds, "A={a}: {t:?}");
            assert!(t.holds);
        }
    }

    #[test]
    fn trace_fails_at_bisect_when_degree_is_capped() {
        let scene = trace_grid(2, 3).unwrap();
        let opts = TraceOptions {
            max_degree: Some(1),
            ..TraceOptions::default()
        };
        let err = volume_trace(&scene, &opts, &SampleBudget::new(1, 4096)).unwrap_err();
        match err {
            Error::Stage { stage, source } => {
                assert_eq!(stage, "bisect");
                assert!(matches!(*source, Error::Infeasible { .. }));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn augmentation_counts() {
        let planes = axis_augmentation(2, 3.0);
        assert_eq!(planes.len(), 12);
        assert!(planes.iter().any(|(nv, o)| nv[1] == 1.0 && *o == 2.75));
    }

    #[test]
    fn visibility_against_directed_volumes() {
        let opts = VisibilityCheckOptions::default();
        let budget = SampleBudget::new(5, 512).stratified();
        for theta in [1.0, 0.3] {
            let scene = Generator::Transversality {
                theta,
                side: 3.0,
                tubes: 2,
                radius: 0.5,
            }
            .build(2, 4)
            .unwrap();
            let z = coordinate_hyperplanes(&[1, 1]).unwrap();
            let report = visibility_check(&scene, &z, &opts, &budget).unwrap();
            assert!(!report.rows.is_empty());
            assert!(
                report.max_ratio <= visibility_ratio_bound(2) * 1.1,
                "theta {theta}: {}",
                report.max_ratio
            );
            for row in &report.rows {
                // Independent parallelogram area for hull(±v_j / vbar_j).
                let a = &scene.families[0][row.chosen[0]].direction;
                let b = &scene.families[1][row.chosen[1]].direction;
                let area = 2.0 * (a[0] * b[1] - a[1] * b[0]).abs() / (row.vbar[0] * row.vbar[1]);
                assert!((row.hull_volume - area).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_hyperplane_without_augmentation_is_rejected() {
        let scene = lattice_grid(2, 3).unwrap();
        let z = FactoredPoly::hyperplanes(2, &[(vec![1.0, 0.0], 1.5)]).unwrap();
        let opts = VisibilityCheckOptions {
            augment: false,
            ..VisibilityCheckOptions::default()
        };
        let err = visibility_check(&scene, &z, &opts, &SampleBudget::new(1, 256)).unwrap_err();
        assert!(matches!(err, Error::PrerequisiteViolated(_)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn multiplicities_match_incidences(seed in 0u64..1000) {
            let scene = Generator::RandomTransverse {
                side: 6.0, radius: 0.3, a_min: 1, a_max: 6, tilt: 0.2, theta_min: 0.1,
            }.build(2, seed).unwrap();
            let table = multiplicity_table(&scene);
            let inc = tube_incidences(&scene);
            for j in 0..2 {
                let total: u32 = table.m[j].iter().sum();
                let expect: usize = inc[j].iter().map(|c| c.len()).sum();
                prop_assert_eq!(total as usize, expect);
            }
            for k in 0..table.f.len() {
                prop_assert_eq!(table.f[k], f64::from(table.m[0][k] * table.m[1][k]));
            }
        }
    }
}
