//! Tubes, lattice cubes, ellipsoids and sampled convex bodies.

mod body;
mod ellipsoid;
mod lattice;
mod tube;

pub use body::{cross_polytope_volume, john_inner_ellipsoid, sphere_directions, ConvexBodySample};
pub use ellipsoid::{ellipsoid_distance, Ellipsoid};
pub(crate) use lattice::det;
pub use lattice::{
    cubes_hit_by_tube, min_determinant, segment_box_distance_sq, Cube, CubeLattice, MinDeterminant,
};
pub use tube::Tube;

use serde::{Deserialize, Serialize};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Aabb {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        Aabb { lo, hi }
    }

    pub fn cube(n: usize, lo: f64, hi: f64) -> Self {
        Aabb::new(vec![lo; n], vec![hi; n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a).max(0.0))
            .product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    pub fn expanded(&self, r: f64) -> Aabb {
        Aabb::new(
            self.lo.iter().map(|x| x - r).collect(),
            self.hi.iter().map(|x| x + r).collect(),
        )
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb::new(
            self.lo
                .iter()
                .zip(&other.lo)
                .map(|(a, b)| a.min(*b))
                .collect(),
            self.hi
                .iter()
                .zip(&other.hi)
                .map(|(a, b)| a.max(*b))
                .collect(),
        )
    }

    /// Parameter interval of `p + t u` inside the box (slab method).
    pub fn clip_line(&self, p: &[f64], u: &[f64]) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for i in 0..p.len() {
            if u[i] == 0.0 {
                if p[i] < self.lo[i] || p[i] > self.hi[i] {
                    return None;
                }
                continue;
            }
            let a = (self.lo[i] - p[i]) / u[i];
            let b = (self.hi[i] - p[i]) / u[i];
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            t0 = t0.max(a);
            t1 = t1.min(b);
        }
        (t0 < t1).then_some((t0, t1))
    }

    pub fn support(&self, w: &[f64]) -> f64 {
        w.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(wi, (a, b))| (wi * a).max(wi * b))
            .sum()
    }
}

/// Closed Euclidean ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        assert!(radius > 0.0, "ball radius must be positive");
        Ball { center, radius }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let d2: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        d2 <= self.radius * self.radius
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::new(
            self.center.iter().map(|c| c - self.radius).collect(),
            self.center.iter().map(|c| c + self.radius).collect(),
        )
    }

    pub fn volume(&self) -> f64 {
        crate::unit_ball_volume(self.center.len()) * self.radius.powi(self.center.len() as i32)
    }

    pub fn clip_line(&self, p: &[f64], u: &[f64]) -> Option<(f64, f64)> {
        let w: Vec<f64> = p.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let a = dot(u, u);
        let b = dot(&w, u);
        let c = dot(&w, &w) - self.radius * self.radius;
        let disc = b * b - a * c;
        if disc <= 0.0 {
            return None;
        }
        let s = disc.sqrt();
        Some(((-b - s) / a, (-b + s) / a))
    }

    pub fn support(&self, w: &[f64]) -> f64 {
        dot(&self.center, w) + self.radius * norm(w)
    }
}
