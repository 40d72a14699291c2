//! Simultaneous bisection of finitely many sets by one polynomial zero set.
//!
//! The search runs on the unit sphere of coefficient vectors in a frame
//! where all sets fit in `[-1, 1]^n`. The hard sign defects are replaced by
//! `tanh(P / beta)` averages, and `beta` is annealed towards zero while a
//! Levenberg-Marquardt step in the tangent space of the sphere drives the
//! smoothed defects to zero.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Aabb;
use crate::measure::{estimate_volume, region_volume, signed_measure_split_estimate, SampleBudget};
use crate::poly::{basis_len, monomial_basis, MultiIndex, MultiPoly};
use crate::region::{Region, Shape};
use crate::rng;
use crate::surface::Hypersurface;

pub const DEFAULT_TOLERANCE: f64 = 0.01;
pub const DEFAULT_RESTARTS: usize = 16;
/// Restarts are launched in chunks of this size; the lowest-index success
/// in the first chunk that has one is returned.
const RESTART_CHUNK: usize = 4;
const MIN_SET_SAMPLES: usize = 1024;
const MAX_SET_SAMPLES: usize = 1 << 16;
const BETAS: [f64; 6] = [0.3, 0.1, 0.03, 0.01, 0.003, 0.001];
const LM_ITERS: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionProblem {
    pub sets: Vec<Shape>,
    pub degree: usize,
    pub tolerance: f64,
    pub restarts: usize,
}

impl BisectionProblem {
    /// Validates dimensions and feasibility and rejects sets of negligible
    /// volume.
    pub fn new(sets: Vec<Shape>, degree: usize, tolerance: f64) -> Result<Self> {
        let Some(first) = sets.first() else {
            return Err(Error::InvalidArgument("no sets to bisect".into()));
        };
        let n = first.dim();
        for s in &sets {
            s.validate()?;
            if s.dim() != n {
                return Err(Error::InvalidArgument("sets differ in dimension".into()));
            }
        }
        if !(tolerance > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        let capacity = basis_len(n, degree) - 1;
        if sets.len() > capacity {
            return Err(Error::Infeasible {
                sets: sets.len(),
                capacity,
                degree,
            });
        }
        let frame = frame_of(&sets);
        for (index, s) in sets.iter().enumerate() {
            let volume = region_volume(s, &SampleBudget::new(index as u64, 1 << 14)).value;
            if volume <= 1e-9 * frame.volume() {
                return Err(Error::DegenerateSet { index, volume });
            }
        }
        Ok(BisectionProblem {
            sets,
            degree,
            tolerance,
            restarts: DEFAULT_RESTARTS,
        })
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts.max(1);
        self
    }

    pub fn dim(&self) -> usize {
        self.sets[0].dim()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionResult {
    /// Unit-norm coefficients in the original coordinates.
    pub poly: MultiPoly,
    /// `F_i(P) / vol(U_i)` on the solver's samples.
    pub defects: Vec<f64>,
    pub iterations: usize,
    pub restart: usize,
    pub success: bool,
}

impl BisectionResult {
    pub fn max_defect(&self) -> f64 {
        self.defects.iter().fold(0.0_f64, |m, d| m.max(d.abs()))
    }
}

/// Find `P` of the problem degree whose zero set bisects every set to within
/// the tolerance.
pub fn solve_bisection(
    problem: &BisectionProblem,
    budget: &SampleBudget,
) -> Result<BisectionResult> {
    let best = bisection_search(problem, budget)?;
    if best.success {
        Ok(best)
    } else {
        Err(Error::Stalled {
            restarts: problem.restarts,
            max_defect: best.max_defect(),
        })
    }
}

/// Like [`solve_bisection`] but returns the best candidate even when no
/// restart met the tolerance.
pub fn bisection_search(
    problem: &BisectionProblem,
    budget: &SampleBudget,
) -> Result<BisectionResult> {
    let n = problem.dim();
    let d = problem.degree;
    let frame = frame_of(&problem.sets);
    let center = frame.center();
    let half: Vec<f64> = frame
        .lo
        .iter()
        .zip(&frame.hi)
        .map(|(a, b)| (b - a) / 2.0)
        .collect();
    let basis = monomial_basis(n, d);
    let per_set = (budget.count / problem.sets.len()).clamp(MIN_SET_SAMPLES, MAX_SET_SAMPLES);
    let features: Vec<Features> = problem
        .sets
        .par_iter()
        .enumerate()
        .map(|(i, s)| Features::sample(s, i, &basis, &center, &half, per_set, budget.seed))
        .collect::<Result<_>>()?;

    let mut best: Option<Candidate> = None;
    for chunk_start in (0..problem.restarts).step_by(RESTART_CHUNK) {
        let chunk_end = (chunk_start + RESTART_CHUNK).min(problem.restarts);
        let found: Vec<Candidate> = (chunk_start..chunk_end)
            .into_par_iter()
            .map(|k| run_restart(&features, basis.len(), problem.tolerance, budget.seed, k))
            .collect();
        for c in found {
            let better = match &best {
                None => true,
                Some(b) => {
                    (c.success && !b.success)
                        || (c.success == b.success && c.max_defect < b.max_defect)
                }
            };
            // Among successes the lowest restart index wins.
            if better && !best.as_ref().is_some_and(|b| b.success) {
                best = Some(c);
            }
        }
        if best.as_ref().is_some_and(|b| b.success) {
            break;
        }
    }
    let best = best.expect("at least one restart");

    let inv: Vec<f64> = half.iter().map(|h| 1.0 / h).collect();
    let shift: Vec<f64> = center.iter().zip(&half).map(|(c, h)| -c / h).collect();
    let local = MultiPoly::new(n, d, best.coeffs.clone())?;
    let poly = local.compose_diagonal_affine(&inv, &shift).normalized();
    Ok(BisectionResult {
        poly,
        defects: best.defects,
        iterations: best.iterations,
        restart: best.restart,
        success: best.success,
    })
}

/// Whether the zero set of `p` splits `u` into halves up to `tau * vol(U)`.
pub fn bisects(p: &dyn Hypersurface, u: &dyn Region, tau: f64, budget: &SampleBudget) -> bool {
    let split = signed_measure_split_estimate(p, u, budget).value;
    let vol = region_volume(u, &budget.child(0x701)).value;
    split.abs() <= tau * vol
}

/// Independent estimates of `F_i(P) / vol(U_i)`; set `i` uses
/// `budget.child(i)`, so `defects(-P) = -defects(P)` exactly.
pub fn defects(p: &dyn Hypersurface, sets: &[Shape], budget: &SampleBudget) -> Vec<f64> {
    sets.iter()
        .enumerate()
        .map(|(i, s)| {
            let b = budget.child(i as u64);
            let vol = match s.volume() {
                Some(v) => v,
                None => estimate_volume(|x| s.contains(x), &s.bounds(), &b.child(1)).value,
            };
            signed_measure_split_estimate(p, s, &b).value / vol
        })
        .collect()
}

fn frame_of(sets: &[Shape]) -> Aabb {
    sets.iter()
        .map(|s| s.bounds())
        .reduce(|a, b| a.union(&b))
        .expect("non-empty")
}

/// Monomial values at uniform samples of one set, in frame coordinates.
struct Features {
    m: usize,
    rows: Vec<f64>,
}

impl Features {
    fn sample(
        set: &Shape,
        index: usize,
        basis: &[MultiIndex],
        center: &[f64],
        half: &[f64],
        count: usize,
        seed: u64,
    ) -> Result<Features> {
        let n = center.len();
        let d = basis.last().map_or(0, |m| m.degree());
        let bounds = set.bounds();
        let mut r = rng::stream(rng::derive(seed, 0xb15e_c7), index as u64);
        let mut rows = Vec::with_capacity(count * basis.len());
        let mut x = vec![0.0; n];
        let mut pow = vec![vec![1.0; d + 1]; n];
        let mut accepted = 0;
        let mut tries = 0usize;
        while accepted < count {
            tries += 1;
            if tries > 1000 * count {
                return Err(Error::DegenerateSet {
                    index,
                    volume: bounds.volume() * accepted as f64 / tries as f64,
                });
            }
            for i in 0..n {
                x[i] =
                    bounds.lo[i] + rand::Rng::random::<f64>(&mut r) * (bounds.hi[i] - bounds.lo[i]);
            }
            if !set.contains(&x) {
                continue;
            }
            accepted += 1;
            for i in 0..n {
                let y = (x[i] - center[i]) / half[i];
                for e in 1..=d {
                    pow[i][e] = pow[i][e - 1] * y;
                }
            }
            for mono in basis {
                rows.push(
                    mono.exponents()
                        .iter()
                        .enumerate()
                        .map(|(i, &e)| pow[i][e as usize])
                        .product(),
                );
            }
        }
        Ok(Features {
            m: basis.len(),
            rows,
        })
    }

    fn len(&self) -> usize {
        self.rows.len() / self.m
    }

    fn row(&self, k: usize) -> &[f64] {
        &self.rows[k * self.m..(k + 1) * self.m]
    }

    fn hard_defect(&self, c: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..self.len() {
            let v: f64 = self.row(k).iter().zip(c).map(|(a, b)| a * b).sum();
            s += if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            };
        }
        s / self.len() as f64
    }

    /// Smoothed defect over the first `used` samples and its gradient.
    fn smooth(&self, c: &[f64], beta: f64, used: usize, grad: &mut [f64]) -> f64 {
        let used = used.min(self.len());
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut s = 0.0;
        for k in 0..used {
            let row = self.row(k);
            let v: f64 = row.iter().zip(c).map(|(a, b)| a * b).sum();
            let t = (v / beta).tanh();
            s += t;
            let w = (1.0 - t * t) / beta;
            grad.iter_mut().zip(row).for_each(|(g, a)| *g += w * a);
        }
        let inv = 1.0 / used as f64;
        grad.iter_mut().for_each(|g| *g *= inv);
        s * inv
    }
}

struct Candidate {
    coeffs: Vec<f64>,
    defects: Vec<f64>,
    max_defect: f64,
    iterations: usize,
    restart: usize,
    success: bool,
}

fn unit(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

fn run_restart(sets: &[Features], m: usize, tau: f64, seed: u64, restart: usize) -> Candidate {
    let mut r = rng::stream(rng::derive(seed, 0x5747_7a27), restart as u64);
    let mut c = rng::unit_vector(&mut r, m);
    let nsets = sets.len();
    let mut iterations = 0;
    let hard = |c: &[f64]| -> Vec<f64> { sets.iter().map(|f| f.hard_defect(c)).collect() };
    let worst = |d: &[f64]| d.iter().fold(0.0_f64, |a, b| a.max(b.abs()));

    let mut res = vec![0.0; nsets];
    let mut jac = vec![vec![0.0; m]; nsets];
    for (stage, &beta) in BETAS.iter().enumerate() {
        let used = 4096usize << stage;
        let eval = |c: &[f64], res: &mut [f64], jac: &mut [Vec<f64>]| -> f64 {
            let mut obj = 0.0;
            for (i, f) in sets.iter().enumerate() {
                res[i] = f.smooth(c, beta, used, &mut jac[i]);
                obj += res[i] * res[i];
            }
            obj
        };
        let mut obj = eval(&c, &mut res, &mut jac);
        let mut mu = 1e-3;
        for _ in 0..LM_ITERS {
            iterations += 1;
            // Project the Jacobian onto the tangent space at c.
            let jt: Vec<Vec<f64>> = jac
                .iter()
                .map(|g| {
                    let gc: f64 = g.iter().zip(&c).map(|(a, b)| a * b).sum();
                    g.iter().zip(&c).map(|(a, b)| a - gc * b).collect()
                })
                .collect();
            let gram = nalgebra::DMatrix::from_fn(nsets, nsets, |i, j| {
                jt[i].iter().zip(&jt[j]).map(|(a, b)| a * b).sum::<f64>()
            });
            let scale = (0..nsets)
                .map(|i| gram[(i, i)])
                .fold(0.0_f64, f64::max)
                .max(1e-300);
            let rhs = nalgebra::DVector::from_column_slice(&res);
            let mut accepted = false;
            for _ in 0..8 {
                let a = &gram + nalgebra::DMatrix::identity(nsets, nsets) * (mu * scale);
                let Some(z) = a.cholesky().map(|ch| ch.solve(&rhs)) else {
                    mu *= 10.0;
                    continue;
                };
                let mut step: Vec<f64> = (0..m)
                    .map(|k| -(0..nsets).map(|i| jt[i][k] * z[i]).sum::<f64>())
                    .collect();
                let len = step.iter().map(|x| x * x).sum::<f64>().sqrt();
                if len > 0.5 {
                    step.iter_mut().for_each(|x| *x *= 0.5 / len);
                }
                let mut trial: Vec<f64> = c.iter().zip(&step).map(|(a, b)| a + b).collect();
                unit(&mut trial);
                let mut tres = vec![0.0; nsets];
                let mut tjac = vec![vec![0.0; m]; nsets];
                let tobj = eval(&trial, &mut tres, &mut tjac);
                if tobj < obj {
                    c = trial;
                    obj = tobj;
                    res = tres;
                    jac = tjac;
                    mu = (mu / 3.0).max(1e-12);
                    accepted = true;
                    break;
                }
                mu *= 4.0;
            }
            if !accepted || obj.sqrt() < 0.05 * tau * (1.0 + stage as f64).recip() {
                break;
            }
        }
        if beta <= 0.01 {
            let d = hard(&c);
            if worst(&d) <= tau * 0.5 {
                break;
            }
        }
    }
    let defects = hard(&c);
    let max_defect = worst(&defects);
    Candidate {
        coeffs: c,
        defects,
        max_defect,
        iterations,
        restart,
        success: max_defect <= tau,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Ball;
    use crate::rng;
    use rand::Rng;

    fn disk(x: f64, y: f64, r: f64) -> Shape {
        Shape::ball(vec![x, y], r)
    }

    fn budget() -> SampleBudget {
        SampleBudget::new(7, 1 << 16)
    }

    #[test]
    fn two_disks_give_line_through_centres() {
        let p =
            BisectionProblem::new(vec![disk(0.0, 0.0, 1.0), disk(4.0, 1.0, 1.0)], 1, 0.01).unwrap();
        let res = solve_bisection(&p, &budget()).unwrap();
        assert!(res.max_defect() <= 0.01);
        // The bisecting line passes (nearly) through both centres.
        for c in [[0.0, 0.0], [4.0, 1.0]] {
            let g = res.poly.gradient(&c);
            let dist = res.poly.eval(&c).abs() / g.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(dist < 0.05, "{dist}");
        }
    }

    #[test]
    fn square_is_bisected_through_centre() {
        let sq = Shape::parse("box:0,0:1,1").unwrap();
        let p = BisectionProblem::new(vec![sq.clone()], 1, 0.01).unwrap();
        let res = solve_bisection(&p, &budget()).unwrap();
        let g = res.poly.gradient(&[0.5, 0.5]);
        let dist = res.poly.eval(&[0.5, 0.5]).abs() / g.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(dist < 0.03, "{dist}");
        assert!(bisects(
            &res.poly,
            &sq,
            0.02,
            &SampleBudget::new(99, 1 << 18)
        ));
    }

    #[test]
    fn five_disks_at_degree_two() {
        let sets = vec![
            disk(0.0, 0.0, 1.0),
            disk(3.0, 0.5, 0.8),
            disk(1.0, 4.0, 1.2),
            disk(5.0, 3.5, 0.7),
            disk(-2.5, 3.0, 1.0),
        ];
        let p = BisectionProblem::new(sets.clone(), 2, 0.01).unwrap();
        let res = solve_bisection(&p, &SampleBudget::new(3, 1 << 18)).unwrap();
        assert!(res.defects.iter().all(|d| d.abs() <= 0.01));
        // Independent samples agree up to Monte Carlo noise.
        let check = defects(&res.poly, &sets, &SampleBudget::new(1234, 1 << 17));
        assert!(check.iter().all(|d| d.abs() <= 0.025), "{check:?}");
    }

    #[test]
    fn infeasible_and_degenerate_inputs() {
        let sets: Vec<Shape> = (0..6).map(|i| disk(3.0 * i as f64, 0.0, 1.0)).collect();
        assert!(matches!(
            BisectionProblem::new(sets, 2, 0.01),
            Err(Error::Infeasible {
                sets: 6,
                capacity: 5,
                degree: 2
            })
        ));
        let sets = vec![
            disk(0.0, 0.0, 1.0),
            Shape::Union {
                parts: vec![Shape::parse("box:5,5:5.000000001,5.000000001").unwrap()],
            },
        ];
        assert!(matches!(
            BisectionProblem::new(sets, 1, 0.01),
            Err(Error::DegenerateSet { index: 1, .. })
        ));
    }

    #[test]
    fn bisects_examples() {
        let b = SampleBudget::new(5, 1 << 18);
        let ball = Ball::new(vec![0.0, 0.0], 1.0);
        assert!(bisects(
            &MultiPoly::linear(&[1.0, 0.0], 0.0),
            &ball,
            0.01,
            &b
        ));
        assert!(!bisects(
            &MultiPoly::linear(&[1.0, 0.0], -10.0),
            &ball,
            0.01,
            &b
        ));
        let circle =
            MultiPoly::from_terms(2, 2, &[(&[2, 0], 1.0), (&[0, 2], 1.0), (&[0, 0], -0.5)])
                .unwrap();
        assert!(bisects(&circle, &ball, 0.01, &b));
        // Scale invariance of the zero set.
        assert!(bisects(&circle.scaled(-3.5), &ball, 0.01, &b));
    }

    #[test]
    fn defects_are_antipodal() {
        let sets = vec![disk(0.0, 0.0, 1.0), disk(2.0, 1.0, 0.5)];
        let mut r = rng::stream(11, 0);
        for _ in 0..5 {
            let coeffs: Vec<f64> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
            let p = MultiPoly::new(2, 2, coeffs).unwrap();
            let b = SampleBudget::new(r.random(), 1 << 12);
            let plus = defects(&p, &sets, &b);
            let minus = defects(&-&p, &sets, &b);
            for (a, m) in plus.iter().zip(&minus) {
                assert_eq!(*a, -*m);
            }
        }
    }

    /// Disjoint disks with centres in `[0, 10]^2` and radii in `[0.5, 2]`.
    pub(crate) fn random_disks(seed: u64, count: usize) -> Vec<Shape> {
        let mut r = rng::stream(seed, 0xd15c);
        let mut out: Vec<(f64, f64, f64)> = Vec::new();
        while out.len() < count {
            let c = (
                r.random_range(0.0..10.0),
                r.random_range(0.0..10.0),
                r.random_range(0.5..2.0),
            );
            if out
                .iter()
                .all(|o| ((o.0 - c.0).powi(2) + (o.1 - c.1).powi(2)).sqrt() > o.2 + c.2)
            {
                out.push(c);
            }
        }
        out.into_iter().map(|(x, y, rad)| disk(x, y, rad)).collect()
    }

    #[test]
    fn succeeds_at_the_stone_tukey_bound() {
        let mut ok = 0;
        for seed in 0..20 {
            let p = BisectionProblem::new(random_disks(seed, 5), 2, 0.01).unwrap();
            if solve_bisection(&p, &SampleBudget::new(seed, 1 << 18)).is_ok() {
                ok += 1;
            }
        }
        assert!(ok >= 19, "{ok}/20");
    }

    #[test]
    fn deterministic_result() {
        let sets = vec![
            disk(0.0, 0.0, 1.0),
            disk(3.0, 0.0, 1.0),
            disk(0.0, 3.0, 0.5),
        ];
        let p = BisectionProblem::new(sets, 2, 0.01).unwrap();
        let a = solve_bisection(&p, &budget()).unwrap();
        let b = solve_bisection(&p, &budget()).unwrap();
        assert_eq!(a, b);
    }
}
