use serde::{Deserialize, Serialize};

use super::{dot, norm, Aabb};
use crate::error::{Error, Result};

/// Solid cylinder of radius `radius` around the core line
/// `core_point + t direction`, `|t| <= length / 2` when clipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tube {
    #[serde(rename = "j")]
    pub family: usize,
    pub core_point: Vec<f64>,
    pub direction: Vec<f64>,
    pub radius: f64,
    /// `None` for an unbounded tube.
    pub length: Option<f64>,
}

impl Tube {
    /// Validating constructor; the direction is normalised.
    pub fn new(
        family: usize,
        core_point: Vec<f64>,
        direction: Vec<f64>,
        radius: f64,
        length: Option<f64>,
    ) -> Result<Self> {
        if core_point.len() != direction.len() || core_point.is_empty() {
            return Err(Error::InvalidArgument(
                "tube point/direction dimension mismatch".into(),
            ));
        }
        let len = norm(&direction);
        if !(len > 0.0 && len.is_finite()) {
            return Err(Error::InvalidArgument(
                "tube direction must be non-zero".into(),
            ));
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(
                "tube radius must be positive".into(),
            ));
        }
        if let Some(l) = length {
            if !(l > 0.0) {
                return Err(Error::InvalidArgument(
                    "tube length must be positive".into(),
                ));
            }
        }
        Ok(Tube {
            family,
            core_point,
            direction: direction.iter().map(|x| x / len).collect(),
            radius,
            length,
        })
    }

    /// Re-check invariants of a deserialized tube.
    pub fn validate(&self) -> Result<()> {
        if (norm(&self.direction) - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "tube in family {} has non-unit direction",
                self.family
            )));
        }
        Tube::new(
            self.family,
            self.core_point.clone(),
            self.direction.clone(),
            self.radius,
            self.length,
        )
        .map(|_| ())
        .map_err(|e| Error::Validation(e.to_string()))
    }

    pub fn dim(&self) -> usize {
        self.core_point.len()
    }

    /// Core segment end points; panics for an unbounded tube.
    pub fn endpoints(&self) -> (Vec<f64>, Vec<f64>) {
        let h = 0.5 * self.length.expect("tube must be clipped");
        let a = self
            .core_point
            .iter()
            .zip(&self.direction)
            .map(|(p, u)| p - h * u)
            .collect();
        let b = self
            .core_point
            .iter()
            .zip(&self.direction)
            .map(|(p, u)| p + h * u)
            .collect();
        (a, b)
    }

    /// `(axial, radial)` coordinates of `x` relative to the core.
    pub fn local(&self, x: &[f64]) -> (f64, f64) {
        let w: Vec<f64> = x.iter().zip(&self.core_point).map(|(a, b)| a - b).collect();
        let t = dot(&w, &self.direction);
        let r2 = (dot(&w, &w) - t * t).max(0.0);
        (t, r2.sqrt())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let (t, r) = self.local(x);
        r <= self.radius && self.length.is_none_or(|l| t.abs() <= 0.5 * l)
    }

    /// Restrict to the part whose core runs through `scene` expanded by the
    /// radius; `None` if the tube misses it. Works for bounded tubes too.
    pub fn clipped(&self, scene: &Aabb) -> Option<Tube> {
        let grown = scene.expanded(self.radius);
        let (mut t0, mut t1) = grown.clip_line(&self.core_point, &self.direction)?;
        if let Some(l) = self.length {
            t0 = t0.max(-0.5 * l);
            t1 = t1.min(0.5 * l);
            if t0 >= t1 {
                return None;
            }
        }
        let mid = 0.5 * (t0 + t1);
        Some(Tube {
            family: self.family,
            core_point: self
                .core_point
                .iter()
                .zip(&self.direction)
                .map(|(p, u)| p + mid * u)
                .collect(),
            direction: self.direction.clone(),
            radius: self.radius,
            length: Some(t1 - t0),
        })
    }

    pub fn with_radius(&self, radius: f64) -> Tube {
        Tube {
            radius,
            ..self.clone()
        }
    }

    pub fn with_length(&self, length: f64) -> Tube {
        Tube {
            length: Some(length),
            ..self.clone()
        }
    }

    pub fn volume(&self) -> f64 {
        crate::unit_ball_volume(self.dim() - 1)
            * self.radius.powi(self.dim() as i32 - 1)
            * self.length.unwrap_or(f64::INFINITY)
    }

    pub fn bounds(&self) -> Aabb {
        let (a, b) = self.endpoints();
        let n = self.dim();
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for i in 0..n {
            // The cap disk extends radius * sqrt(1 - u_i^2) along axis i.
            let ext = self.radius * (1.0 - self.direction[i].powi(2)).max(0.0).sqrt();
            lo[i] = a[i].min(b[i]) - ext;
            hi[i] = a[i].max(b[i]) + ext;
        }
        Aabb::new(lo, hi)
    }

    pub fn support(&self, w: &[f64]) -> f64 {
        let (a, b) = self.endpoints();
        let along = dot(w, &self.direction);
        let perp = (dot(w, w) - along * along).max(0.0).sqrt();
        dot(&a, w).max(dot(&b, w)) + self.radius * perp
    }

    pub fn clip_line(&self, p: &[f64], u: &[f64]) -> Option<(f64, f64)> {
        let w: Vec<f64> = p.iter().zip(&self.core_point).map(|(a, b)| a - b).collect();
        let wa = dot(&w, &self.direction);
        let ua = dot(u, &self.direction);
        // Radial quadratic |w_perp + t u_perp|^2 <= r^2.
        let wp: Vec<f64> = w
            .iter()
            .zip(&self.direction)
            .map(|(x, d)| x - wa * d)
            .collect();
        let up: Vec<f64> = u
            .iter()
            .zip(&self.direction)
            .map(|(x, d)| x - ua * d)
            .collect();
        let a = dot(&up, &up);
        let b = dot(&wp, &up);
        let c = dot(&wp, &wp) - self.radius * self.radius;
        let (mut t0, mut t1) = if a <= 1e-300 {
            if c > 0.0 {
                return None;
            }
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            let disc = b * b - a * c;
            if disc <= 0.0 {
                return None;
            }
            let s = disc.sqrt();
            ((-b - s) / a, (-b + s) / a)
        };
        if let Some(l) = self.length {
            let h = 0.5 * l;
            if ua == 0.0 {
                if wa.abs() > h {
                    return None;
                }
            } else {
                let s0 = (-h - wa) / ua;
                let s1 = (h - wa) / ua;
                t0 = t0.max(s0.min(s1));
                t1 = t1.min(s0.max(s1));
            }
        }
        (t0 < t1 && t0.is_finite() && t1.is_finite()).then_some((t0, t1))
    }
}
