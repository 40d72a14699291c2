//! Zero sets of polynomials, either dense or as products of factors.
//!
//! High-degree surfaces used by the Kakeya pipelines are products of many
//! low-degree factors (typically hyperplanes). Expanding such a product in
//! the monomial basis destroys all numerical conditioning, so
//! [`FactoredPoly`] keeps the factors and intersects lines with each one.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{LineContained, MultiPoly, LINE_CONTAINED_TOL};
use crate::rng;

/// A hypersurface `Z = {P = 0}` that can be intersected with lines.
pub trait Hypersurface: Send + Sync {
    fn dim(&self) -> usize;

    fn degree(&self) -> usize;

    fn eval(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// Distinct parameters `t` in `(a, b]` with `p + t u` on the surface.
    fn crossings(&self, p: &[f64], u: &[f64], a: f64, b: f64) -> Result<Vec<f64>, LineContained>;

    fn crossing_count(&self, p: &[f64], u: &[f64], a: f64, b: f64) -> Result<usize, LineContained> {
        self.crossings(p, u, a, b).map(|r| r.len())
    }
}

fn axpy(p: &[f64], t: f64, u: &[f64]) -> Vec<f64> {
    p.iter().zip(u).map(|(a, b)| a + t * b).collect()
}

impl Hypersurface for MultiPoly {
    fn dim(&self) -> usize {
        MultiPoly::dim(self)
    }

    fn degree(&self) -> usize {
        MultiPoly::degree(self)
    }

    fn eval(&self, x: &[f64]) -> f64 {
        MultiPoly::eval(self, x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        MultiPoly::gradient(self, x)
    }

    fn crossings(&self, p: &[f64], u: &[f64], a: f64, b: f64) -> Result<Vec<f64>, LineContained> {
        // Restrict about the chord midpoint so that the univariate
        // coefficients stay well scaled.
        let m = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let q = self.restrict_to_line(&axpy(p, m, u), u);
        Ok(q.real_roots(-h, h)?.into_iter().map(|s| m + s).collect())
    }

    fn crossing_count(&self, p: &[f64], u: &[f64], a: f64, b: f64) -> Result<usize, LineContained> {
        let m = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.restrict_to_line(&axpy(p, m, u), u)
            .count_distinct_roots(-h, h)
    }
}

/// Product of polynomial factors; the zero set is the union of the
/// factors' zero sets.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredPoly {
    n: usize,
    factors: Vec<MultiPoly>,
    /// `(a, b)` for degree-one factors `a . x + b`.
    linear: Vec<Option<(Vec<f64>, f64)>>,
}

/// Crossings closer than this (relative to the chord) are merged.
const MERGE_TOL: f64 = 1e-9;

impl FactoredPoly {
    pub fn new(n: usize, factors: Vec<MultiPoly>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if let Some(f) = factors.iter().find(|f| f.dim() != n) {
            return Err(Error::InvalidArgument(format!(
                "factor has dimension {}, expected {n}",
                f.dim()
            )));
        }
        let linear = factors
            .iter()
            .map(|f| (f.degree() == 1).then(|| (f.coeffs()[1..].to_vec(), f.coeffs()[0])))
            .collect();
        Ok(FactoredPoly { n, factors, linear })
    }

    /// Union of hyperplanes `{normal . x = offset}`.
    pub fn hyperplanes(n: usize, planes: &[(Vec<f64>, f64)]) -> Result<Self> {
        let factors = planes
            .iter()
            .map(|(normal, offset)| {
                if normal.len() != n {
                    return Err(Error::InvalidArgument("normal has wrong dimension".into()));
                }
                let norm = normal.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(Error::InvalidArgument("zero normal".into()));
                }
                Ok(MultiPoly::linear(normal, -offset).normalized())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, factors)
    }

    pub fn factors(&self) -> &[MultiPoly] {
        &self.factors
    }

    pub fn push(&mut self, factor: MultiPoly) -> Result<()> {
        if factor.dim() != self.n {
            return Err(Error::InvalidArgument("factor dimension mismatch".into()));
        }
        self.linear.push(
            (factor.degree() == 1).then(|| (factor.coeffs()[1..].to_vec(), factor.coeffs()[0])),
        );
        self.factors.push(factor);
        Ok(())
    }

    /// `(unit normal, offset)` of every degree-one factor, `None` if some
    /// factor is not linear.
    pub fn as_hyperplanes(&self) -> Option<Vec<(Vec<f64>, f64)>> {
        self.linear
            .iter()
            .map(|l| {
                let (a, b) = l.as_ref()?;
                let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                (norm > 0.0).then(|| (a.iter().map(|x| x / norm).collect(), -b / norm))
            })
            .collect()
    }

    /// Expand into a single dense polynomial. Only sensible at low degree.
    pub fn to_multipoly(&self) -> Result<MultiPoly> {
        let mut acc = MultiPoly::constant(self.n, 1.0);
        for f in &self.factors {
            acc = acc.mul(f)?;
        }
        Ok(acc)
    }

    fn factor_crossings(
        &self,
        i: usize,
        p: &[f64],
        u: &[f64],
        a: f64,
        b: f64,
    ) -> Result<Vec<f64>, LineContained> {
        match &self.linear[i] {
            Some((normal, offset)) => {
                let base: f64 = normal.iter().zip(p).map(|(x, y)| x * y).sum::<f64>() + offset;
                let slope: f64 = normal.iter().zip(u).map(|(x, y)| x * y).sum();
                let scale = normal.iter().fold(offset.abs(), |m, x| m.max(x.abs()));
                if slope.abs() <= LINE_CONTAINED_TOL * scale {
                    if base.abs() <= LINE_CONTAINED_TOL * scale {
                        return Err(LineContained);
                    }
                    return Ok(Vec::new());
                }
                let t = -base / slope;
                Ok(if t > a && t <= b { vec![t] } else { Vec::new() })
            }
            None => self.factors[i].crossings(p, u, a, b),
        }
    }
}

impl Hypersurface for FactoredPoly {
    fn dim(&self) -> usize {
        self.n
    }

    fn degree(&self) -> usize {
        self.factors.iter().map(|f| f.degree()).sum()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.factors.iter().map(|f| f.eval(x)).product()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let values: Vec<f64> = self.factors.iter().map(|f| f.eval(x)).collect();
        let mut grad = vec![0.0; self.n];
        for (i, f) in self.factors.iter().enumerate() {
            let others: f64 = values
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, v)| v)
                .product();
            if others == 0.0 {
                continue;
            }
            for (g, df) in grad.iter_mut().zip(f.gradient(x)) {
                *g += others * df;
            }
        }
        grad
    }

    fn crossings(&self, p: &[f64], u: &[f64], a: f64, b: f64) -> Result<Vec<f64>, LineContained> {
        let mut all = Vec::new();
        for i in 0..self.factors.len() {
            all.extend(self.factor_crossings(i, p, u, a, b)?);
        }
        all.sort_by(f64::total_cmp);
        let tol = MERGE_TOL * (b - a).max(1.0);
        all.dedup_by(|x, y| (*x - *y).abs() <= tol);
        Ok(all)
    }
}

/// A surface as stored in files and passed between modules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Surface {
    Poly { poly: MultiPoly },
    Factored { n: usize, factors: Vec<MultiPoly> },
}

impl Surface {
    pub fn poly(p: MultiPoly) -> Self {
        Surface::Poly { poly: p }
    }

    pub fn factored(f: &FactoredPoly) -> Self {
        Surface::Factored {
            n: f.n,
            factors: f.factors.clone(),
        }
    }

    /// Concrete hypersurface ready for line intersection.
    pub fn build(&self) -> Result<Box<dyn Hypersurface>> {
        Ok(match self {
            Surface::Poly { poly } => Box::new(poly.clone()),
            Surface::Factored { n, factors } => Box::new(FactoredPoly::new(*n, factors.clone())?),
        })
    }

    /// A random neighbour on the coefficient sphere at geodesic-like
    /// distance `epsilon`: `normalize(P + epsilon xi)` with `xi` a unit
    /// tangent vector at the normalised `P`. Factored surfaces perturb each
    /// factor independently.
    pub fn perturbed<R: Rng + ?Sized>(&self, epsilon: f64, rng: &mut R) -> Surface {
        match self {
            Surface::Poly { poly } => Surface::Poly {
                poly: perturb(poly, epsilon, rng),
            },
            Surface::Factored { n, factors } => Surface::Factored {
                n: *n,
                factors: factors.iter().map(|f| perturb(f, epsilon, rng)).collect(),
            },
        }
    }

    pub fn degree(&self) -> usize {
        match self {
            Surface::Poly { poly } => poly.degree(),
            Surface::Factored { factors, .. } => factors.iter().map(|f| f.degree()).sum(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Surface::Poly { poly } => poly.dim(),
            Surface::Factored { n, .. } => *n,
        }
    }
}

pub fn perturb<R: Rng + ?Sized>(p: &MultiPoly, epsilon: f64, rng: &mut R) -> MultiPoly {
    let base = p.normalized();
    let c = base.coeffs();
    let mut xi = rng::gaussian(rng, c.len());
    let along: f64 = xi.iter().zip(c).map(|(a, b)| a * b).sum();
    xi.iter_mut().zip(c).for_each(|(x, b)| *x -= along * b);
    let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return base;
    }
    let moved: Vec<f64> = c
        .iter()
        .zip(&xi)
        .map(|(a, x)| a + epsilon * x / norm)
        .collect();
    base.with_coeffs(moved).expect("same shape").normalized()
}
