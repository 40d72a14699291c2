use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{dot, lattice::det, Ellipsoid};
use crate::error::{Error, Result};
use crate::rng;

/// Antipodally symmetric direction set: `k / 2` seeded uniform directions
/// followed by their negatives, so direction `i + k/2` is `-direction i`.
pub fn sphere_directions(n: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(k >= 2 && k % 2 == 0, "direction count must be even");
    let mut r = rng::stream(seed, 0x5eed_d1e5);
    let half: Vec<Vec<f64>> = (0..k / 2).map(|_| rng::unit_vector(&mut r, n)).collect();
    let neg: Vec<Vec<f64>> = half
        .iter()
        .map(|u| u.iter().map(|x| -x).collect())
        .collect();
    half.into_iter().chain(neg).collect()
}

/// Star-shaped body given by radial values on unit directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexBodySample {
    pub directions: Vec<Vec<f64>>,
    pub radial: Vec<f64>,
}

impl ConvexBodySample {
    pub fn new(directions: Vec<Vec<f64>>, radial: Vec<f64>) -> Self {
        assert_eq!(directions.len(), radial.len());
        ConvexBodySample { directions, radial }
    }

    pub fn dim(&self) -> usize {
        self.directions.first().map_or(0, |d| d.len())
    }

    /// Volume from the radial integral, assuming uniformly spread
    /// directions: `omega_n * mean(rho^n)`.
    pub fn volume(&self) -> f64 {
        let n = self.dim();
        let mean =
            self.radial.iter().map(|r| r.powi(n as i32)).sum::<f64>() / self.radial.len() as f64;
        crate::unit_ball_volume(n) * mean
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.directions
            .iter()
            .zip(&self.radial)
            .map(|(u, r)| u.iter().map(|x| x * r).collect())
            .collect()
    }

    /// Support function of the hull of the sample points.
    pub fn support(&self, w: &[f64]) -> f64 {
        self.directions
            .iter()
            .zip(&self.radial)
            .map(|(u, r)| r * dot(u, w))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, s: f64) -> ConvexBodySample {
        ConvexBodySample {
            directions: self.directions.clone(),
            radial: self.radial.iter().map(|r| r * s).collect(),
        }
    }
}

const JOHN_TOL: f64 = 1e-4;
const JOHN_MAX_ITERS: usize = 200_000;

/// Inner John ellipsoid of the (symmetrised) hull of the sample points.
///
/// The support function sampled on the body directions describes the polar
/// body; the minimum-volume enclosing ellipsoid of the polar boundary
/// points (symmetric Khachiyan iteration with away steps) is polar to the
/// inscribed ellipsoid.
pub fn john_inner_ellipsoid(body: &ConvexBodySample) -> Result<Ellipsoid> {
    let n = body.dim();
    let k = body.directions.len();
    if n == 0 || k < n * (n + 3) / 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least {} directions, got {k}",
            n * (n + 3) / 2
        )));
    }
    let scale = body.radial.iter().fold(0.0_f64, |m, r| m.max(*r));
    if !(scale > 0.0) {
        return Err(Error::DegenerateBody);
    }
    // Lower-dimensional hull: the second moment of the points is singular.
    let mut moment = DMatrix::<f64>::zeros(n, n);
    for (u, r) in body.directions.iter().zip(&body.radial) {
        let p = DVector::from_iterator(n, u.iter().map(|x| x * r / scale));
        moment.ger(1.0, &p, &p, 1.0);
    }
    let eig = moment.symmetric_eigenvalues();
    if eig.min() <= 1e-9 * eig.max() {
        return Err(Error::DegenerateBody);
    }
    let hull_support = |w: &[f64]| {
        // Symmetric hull: h(w) = max(h(w), h(-w)).
        body.directions
            .iter()
            .zip(&body.radial)
            .map(|(u, r)| r * dot(u, w).abs())
            .fold(0.0_f64, f64::max)
    };
    let mut ys: Vec<DVector<f64>> = Vec::with_capacity(k);
    for w in &body.directions {
        let h = hull_support(w);
        if h <= 1e-9 * scale {
            return Err(Error::DegenerateBody);
        }
        ys.push(DVector::from_iterator(n, w.iter().map(|x| x / h)));
    }
    let mut weights = vec![1.0 / k as f64; k];
    let mut e = polar_mvee(&ys, &mut weights)?;
    // The polar iteration gives the inscribed ellipsoid of the polytope cut
    // out by the sampled supports, which pokes out of the sample hull near
    // its vertices. Add the ellipsoid normal at each offending direction as
    // a new supporting halfspace and re-solve.
    let overshoot = |e: &Ellipsoid| -> Vec<(usize, f64)> {
        body.directions
            .iter()
            .zip(&body.radial)
            .map(|(u, r)| e.radial(u) / r)
            .enumerate()
            .filter(|(_, ratio)| *ratio > 1.0 + JOHN_CUT_TOL)
            .collect()
    };
    let points: Vec<Vec<f64>> = body
        .points()
        .into_iter()
        .flat_map(|p| [p.iter().map(|c| -c).collect(), p])
        .collect();
    for _ in 0..JOHN_CUT_ROUNDS {
        let mut bad = overshoot(&e);
        if bad.is_empty() {
            break;
        }
        bad.sort_by(|a, b| b.1.total_cmp(&a.1));
        for &(i, _) in bad.iter().take(JOHN_CUTS_PER_ROUND) {
            let x: Vec<f64> = body.directions[i]
                .iter()
                .map(|c| c * e.radial(&body.directions[i]))
                .collect();
            let Some(w) = separating_direction(&x, &points) else {
                continue;
            };
            let h = hull_support(&w);
            ys.push(DVector::from_iterator(n, w.iter().map(|x| x / h)));
            weights.push(0.0);
        }
        e = polar_mvee(&ys, &mut weights)?;
    }
    // Whatever overshoot remains is split evenly between the two sides.
    let s = body
        .directions
        .iter()
        .zip(&body.radial)
        .map(|(u, r)| r / e.radial(u))
        .fold(1.0_f64, f64::min);
    Ok(if s < 1.0 { e.scaled(s.sqrt()) } else { e })
}

/// Unit normal of a hyperplane separating `x` from `hull(points)`, taken
/// from the nearest hull point (Wolfe's min-norm-point iteration).
fn separating_direction(x: &[f64], points: &[Vec<f64>]) -> Option<Vec<f64>> {
    let a: Vec<DVector<f64>> = points
        .iter()
        .map(|p| DVector::from_iterator(x.len(), p.iter().zip(x).map(|(pi, xi)| pi - xi)))
        .collect();
    let scale = a.iter().map(|v| v.norm_squared()).fold(0.0_f64, f64::max);
    let first =
        (0..a.len()).min_by(|&i, &j| a[i].norm_squared().total_cmp(&a[j].norm_squared()))?;
    let mut active = vec![first];
    let mut lambda = vec![1.0];
    let mut z = a[first].clone();
    for _ in 0..1000 {
        let j = (0..a.len()).min_by(|&i, &k| z.dot(&a[i]).total_cmp(&z.dot(&a[k])))?;
        if z.norm_squared() - z.dot(&a[j]) <= 1e-12 * scale || active.contains(&j) {
            break;
        }
        active.push(j);
        lambda.push(0.0);
        loop {
            // Affine minimiser over the active set.
            let m = active.len();
            let mut sys = DMatrix::<f64>::zeros(m + 1, m + 1);
            let mut rhs = DVector::<f64>::zeros(m + 1);
            for r in 0..m {
                for c in 0..m {
                    sys[(r, c)] = a[active[r]].dot(&a[active[c]]);
                }
                sys[(r, m)] = 1.0;
                sys[(m, r)] = 1.0;
            }
            rhs[m] = 1.0;
            let mu = sys.lu().solve(&rhs)?;
            if (0..m).all(|i| mu[i] > 1e-14) {
                lambda = (0..m).map(|i| mu[i]).collect();
                break;
            }
            let theta = (0..m)
                .filter(|&i| mu[i] <= 1e-14)
                .map(|i| lambda[i] / (lambda[i] - mu[i]))
                .fold(1.0_f64, f64::min);
            for i in 0..m {
                lambda[i] += theta * (mu[i] - lambda[i]);
            }
            let keep: Vec<usize> = (0..m).filter(|&i| lambda[i] > 1e-14).collect();
            active = keep.iter().map(|&i| active[i]).collect();
            lambda = keep.iter().map(|&i| lambda[i]).collect();
        }
        z = active
            .iter()
            .zip(&lambda)
            .fold(DVector::zeros(x.len()), |acc, (&i, &l)| acc + &a[i] * l);
    }
    let len = z.norm();
    (len > 0.0).then(|| z.iter().map(|c| -c / len).collect())
}

const JOHN_CUT_TOL: f64 = 1e-3;
const JOHN_CUT_ROUNDS: usize = 20;
const JOHN_CUTS_PER_ROUND: usize = 16;

/// Symmetric minimum-volume enclosing ellipsoid of the polar points `ys`,
/// warm-started from `weights`; returns its polar `{x : x^T (n M) x <= 1}`.
fn polar_mvee(ys: &[DVector<f64>], weights: &mut [f64]) -> Result<Ellipsoid> {
    let n = ys[0].len();
    let nf = n as f64;
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let mut iters = 0;
    loop {
        let mut m = DMatrix::<f64>::zeros(n, n);
        for (y, &wt) in ys.iter().zip(weights.iter()) {
            if wt > 0.0 {
                m.ger(wt, y, y, 1.0);
            }
        }
        let Some(chol) = m.clone().cholesky() else {
            return Err(Error::DegenerateBody);
        };
        let minv = chol.inverse();
        let kappa: Vec<f64> = ys
            .iter()
            .map(|y| (y.transpose() * &minv * y)[(0, 0)])
            .collect();
        let (jmax, kmax) =
            kappa.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |b, (i, &v)| if v > b.1 { (i, v) } else { b },
            );
        iters += 1;
        if kmax <= nf * (1.0 + JOHN_TOL) || iters >= JOHN_MAX_ITERS {
            return Ellipsoid::new(m * nf).map_err(|_| Error::DegenerateBody);
        }
        let (jmin, kmin) = kappa
            .iter()
            .zip(weights.iter())
            .enumerate()
            .filter(|(_, (_, &w))| w > 0.0)
            .fold(
                (0, f64::INFINITY),
                |b, (i, (&v, _))| if v < b.1 { (i, v) } else { b },
            );
        if kmax - nf >= nf - kmin {
            let alpha = (kmax - nf) / (nf * (kmax - 1.0));
            weights.iter_mut().for_each(|w| *w *= 1.0 - alpha);
            weights[jmax] += alpha;
        } else {
            let wj = weights[jmin];
            let beta = ((nf - kmin) / (nf * (kmin - 1.0))).min(wj / (1.0 - wj));
            weights.iter_mut().for_each(|w| *w *= 1.0 + beta);
            weights[jmin] -= beta;
            if weights[jmin] < 1e-15 {
                weights[jmin] = 0.0;
            }
        }
    }
}

/// Volume of the cross-polytope `hull(±v_1, ..., ±v_n)`: `2^n |det| / n!`.
pub fn cross_polytope_volume(vectors: &[Vec<f64>]) -> f64 {
    let n = vectors.len();
    let rows: Vec<&[f64]> = vectors.iter().map(|v| v.as_slice()).collect();
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    2f64.powi(n as i32) * det(&rows).abs() / fact
}
