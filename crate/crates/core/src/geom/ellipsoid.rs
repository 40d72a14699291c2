use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Origin-centred ellipsoid `{v : v^T Q v <= 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    q: DMatrix<f64>,
}

impl Ellipsoid {
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        if !q.is_square() || q.nrows() == 0 {
            return Err(Error::InvalidArgument(
                "quadratic form must be square".into(),
            ));
        }
        let asym = (&q - q.transpose()).abs().max();
        if asym > 1e-10 * q.abs().max().max(1.0) {
            return Err(Error::InvalidArgument(
                "quadratic form is not symmetric".into(),
            ));
        }
        let q = 0.5 * (&q + q.transpose());
        if q.clone().cholesky().is_none() {
            return Err(Error::InvalidArgument(
                "quadratic form is not positive definite".into(),
            ));
        }
        Ok(Ellipsoid { q })
    }

    pub fn unit_ball(n: usize) -> Self {
        Ellipsoid {
            q: DMatrix::identity(n, n),
        }
    }

    /// Coordinate ellipsoid with the given semi-axes.
    pub fn axes(semi_axes: &[f64]) -> Result<Self> {
        let n = semi_axes.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                semi_axes[i].powi(-2)
            } else {
                0.0
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn quad_form(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        self.form(v) <= 1.0
    }

    pub fn form(&self, v: &[f64]) -> f64 {
        let v = DVector::from_column_slice(v);
        (v.transpose() * &self.q * &v)[(0, 0)]
    }

    /// Distance from the centre to the boundary along unit `u`.
    pub fn radial(&self, u: &[f64]) -> f64 {
        1.0 / self.form(u).sqrt()
    }

    /// Support function `max_{v in E} v . w = sqrt(w^T Q^{-1} w)`.
    pub fn support(&self, w: &[f64]) -> f64 {
        let inv = self
            .q
            .clone()
            .cholesky()
            .expect("positive definite")
            .inverse();
        let w = DVector::from_column_slice(w);
        (w.transpose() * inv * &w)[(0, 0)].sqrt()
    }

    /// `D * E`.
    pub fn scaled(&self, d: f64) -> Ellipsoid {
        Ellipsoid {
            q: &self.q / (d * d),
        }
    }

    /// Image `M E` under an invertible linear map.
    pub fn transformed(&self, m: &DMatrix<f64>) -> Result<Ellipsoid> {
        let inv = m
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("singular transformation".into()))?;
        Self::new(inv.transpose() * &self.q * inv)
    }

    pub fn volume(&self) -> f64 {
        crate::unit_ball_volume(self.dim()) / self.q.determinant().sqrt()
    }

    /// Row-major upper triangle of `Q`.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                out.push(self.q[(i, j)]);
            }
        }
        out
    }

    pub fn from_upper_triangle(values: &[f64]) -> Result<Self> {
        let len = values.len();
        let n = ((((8 * len + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
        if n * (n + 1) / 2 != len {
            return Err(Error::InvalidArgument("not an upper triangle".into()));
        }
        let mut q = DMatrix::zeros(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                q[(i, j)] = values[k];
                q[(j, i)] = values[k];
                k += 1;
            }
        }
        Self::new(q)
    }
}

impl Serialize for Ellipsoid {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.upper_triangle().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Ellipsoid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        Ellipsoid::from_upper_triangle(&v).map_err(serde::de::Error::custom)
    }
}

/// Least `log D` with `E1 / D ⊆ E2 ⊆ D E1`.
pub fn ellipsoid_distance(e1: &Ellipsoid, e2: &Ellipsoid) -> f64 {
    assert_eq!(e1.dim(), e2.dim(), "dimension mismatch");
    let l = e2.q.clone().cholesky().expect("positive definite").l();
    let linv = l.try_inverse().expect("triangular factor is invertible");
    let m = &linv * &e1.q * linv.transpose();
    let m = 0.5 * (&m + m.transpose());
    m.symmetric_eigenvalues()
        .iter()
        .map(|&lam| lam.ln().abs() / 2.0)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn random_ellipsoid(seed: u64, n: usize) -> Ellipsoid {
        let mut r = rng::stream(seed, 0);
        let a = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
        Ellipsoid::new(a.transpose() * &a + DMatrix::identity(n, n) * 0.1).unwrap()
    }

    #[test]
    fn distance_examples() {
        let e = random_ellipsoid(1, 3);
        assert!(ellipsoid_distance(&e, &e) < 1e-12);
        assert!((ellipsoid_distance(&e, &e.scaled(2.0)) - 2f64.ln()).abs() < 1e-12);
        let b = Ellipsoid::unit_ball(2);
        let f = Ellipsoid::axes(&[4.0, 0.25]).unwrap();
        assert!((ellipsoid_distance(&b, &f) - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn distance_is_a_metric() {
        let es: Vec<Ellipsoid> = (0..10).map(|s| random_ellipsoid(s, 3)).collect();
        for a in &es {
            for b in &es {
                assert_eq!(
                    ellipsoid_distance(a, b).to_bits(),
                    ellipsoid_distance(a, b).to_bits()
                );
                assert!((ellipsoid_distance(a, b) - ellipsoid_distance(b, a)).abs() < 1e-9);
                for c in &es {
                    assert!(
                        ellipsoid_distance(a, c)
                            <= ellipsoid_distance(a, b) + ellipsoid_distance(b, c) + 1e-9
                    );
                }
            }
        }
    }

    #[test]
    fn distance_is_linearly_invariant() {
        let mut r = rng::stream(5, 1);
        for s in 0..10 {
            let e1 = random_ellipsoid(100 + s, 3);
            let e2 = random_ellipsoid(200 + s, 3);
            let m =
                DMatrix::from_fn(3, 3, |_, _| r.random_range(-1.0..1.0)) + DMatrix::identity(3, 3);
            let d0 = ellipsoid_distance(&e1, &e2);
            let d1 = ellipsoid_distance(&e1.transformed(&m).unwrap(), &e2.transformed(&m).unwrap());
            assert!((d0 - d1).abs() < 1e-8, "{d0} vs {d1}");
        }
    }

    #[test]
    fn upper_triangle_round_trip() {
        let e = random_ellipsoid(3, 3);
        let s = serde_json::to_string(&e).unwrap();
        let back: Ellipsoid = serde_json::from_str(&s).unwrap();
        assert!(ellipsoid_distance(&e, &back) < 1e-12);
        assert!(
            (Ellipsoid::axes(&[2.0, 3.0]).unwrap().volume() - 6.0 * std::f64::consts::PI).abs()
                < 1e-12
        );
    }
}
