//! Bounded regions that can be sampled and intersected with lines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Ball, Tube};

pub trait Region: Send + Sync {
    fn dim(&self) -> usize;

    fn contains(&self, x: &[f64]) -> bool;

    fn bounds(&self) -> Aabb;

    /// `max_{x in region} x . w`.
    fn support(&self, w: &[f64]) -> f64;

    /// Sorted, disjoint parameter intervals of `p + t u` inside the region.
    fn chords(&self, p: &[f64], u: &[f64]) -> Vec<(f64, f64)>;

    /// Exact volume when known in closed form.
    fn volume(&self) -> Option<f64> {
        None
    }
}

impl Region for Aabb {
    fn dim(&self) -> usize {
        Aabb::dim(self)
    }

    fn contains(&self, x: &[f64]) -> bool {
        Aabb::contains(self, x)
    }

    fn bounds(&self) -> Aabb {
        self.clone()
    }

    fn support(&self, w: &[f64]) -> f64 {
        Aabb::support(self, w)
    }

    fn chords(&self, p: &[f64], u: &[f64]) -> Vec<(f64, f64)> {
        self.clip_line(p, u).into_iter().collect()
    }

    fn volume(&self) -> Option<f64> {
        Some(Aabb::volume(self))
    }
}

impl Region for Ball {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn contains(&self, x: &[f64]) -> bool {
        Ball::contains(self, x)
    }

    fn bounds(&self) -> Aabb {
        Ball::bounds(self)
    }

    fn support(&self, w: &[f64]) -> f64 {
        Ball::support(self, w)
    }

    fn chords(&self, p: &[f64], u: &[f64]) -> Vec<(f64, f64)> {
        self.clip_line(p, u).into_iter().collect()
    }

    fn volume(&self) -> Option<f64> {
        Some(Ball::volume(self))
    }
}

impl Region for Tube {
    fn dim(&self) -> usize {
        Tube::dim(self)
    }

    fn contains(&self, x: &[f64]) -> bool {
        Tube::contains(self, x)
    }

    fn bounds(&self) -> Aabb {
        Tube::bounds(self)
    }

    fn support(&self, w: &[f64]) -> f64 {
        Tube::support(self, w)
    }

    fn chords(&self, p: &[f64], u: &[f64]) -> Vec<(f64, f64)> {
        self.clip_line(p, u).into_iter().collect()
    }

    fn volume(&self) -> Option<f64> {
        Some(Tube::volume(self))
    }
}

/// Merge overlapping intervals in place.
pub fn merge_intervals(mut iv: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Serializable region description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Tube { tube: Tube },
    Union { parts: Vec<Shape> },
}

impl Shape {
    pub fn from_aabb(b: &Aabb) -> Shape {
        Shape::Box {
            lo: b.lo.clone(),
            hi: b.hi.clone(),
        }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Shape {
        Shape::Ball { center, radius }
    }

    /// Parse `box:x0,y0:x1,y1`, `ball:x,y:r` or
    /// `tube:px,py:ux,uy:radius:length`.
    pub fn parse(spec: &str) -> Result<Shape> {
        let bad = |m: &str| Error::Parse {
            location: format!("region `{spec}`"),
            message: m.to_string(),
        };
        let nums = |s: &str| -> Result<Vec<f64>> {
            s.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| bad(&format!("bad number `{x}`")))
                })
                .collect()
        };
        let parts: Vec<&str> = spec.split(':').collect();
        let shape = match parts.as_slice() {
            ["box", lo, hi] => Shape::Box {
                lo: nums(lo)?,
                hi: nums(hi)?,
            },
            ["ball", c, r] => Shape::Ball {
                center: nums(c)?,
                radius: r.trim().parse().map_err(|_| bad("bad radius"))?,
            },
            ["tube", p, u, r, l] => {
                let r: f64 = r.trim().parse().map_err(|_| bad("bad radius"))?;
                let l: f64 = l.trim().parse().map_err(|_| bad("bad length"))?;
                Shape::Tube {
                    tube: Tube::new(0, nums(p)?, nums(u)?, r, Some(l))
                        .map_err(|e| bad(&e.to_string()))?,
                }
            }
            _ => return Err(bad("expected box:LO:HI, ball:C:R or tube:P:U:R:L")),
        };
        shape.validate().map_err(|e| bad(&e.to_string()))?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Shape::Box { lo, hi } => {
                if lo.len() != hi.len() || lo.is_empty() {
                    return Err(Error::Validation("box corners differ in dimension".into()));
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return Err(Error::Validation("box must have lo < hi".into()));
                }
            }
            Shape::Ball { center, radius } => {
                if center.is_empty() || !(*radius > 0.0) {
                    return Err(Error::Validation(
                        "ball needs a centre and positive radius".into(),
                    ));
                }
            }
            Shape::Tube { tube } => {
                tube.validate()?;
                if tube.length.is_none() {
                    return Err(Error::Validation(
                        "region tubes must have finite length".into(),
                    ));
                }
            }
            Shape::Union { parts } => {
                let Some(first) = parts.first() else {
                    return Err(Error::Validation("empty union".into()));
                };
                for p in parts {
                    p.validate()?;
                    if p.dim() != first.dim() {
                        return Err(Error::Validation("union parts differ in dimension".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

impl Region for Shape {
    fn dim(&self) -> usize {
        match self {
            Shape::Box { lo, .. } => lo.len(),
            Shape::Ball { center, .. } => center.len(),
            Shape::Tube { tube } => tube.dim(),
            Shape::Union { parts } => parts.first().map_or(0, |p| p.dim()),
        }
    }

    fn contains(&self, x: &[f64]) -> bool {
        match self {
            Shape::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| v >= a && v <= b),
            Shape::Ball { center, radius } => {
                x.iter()
                    .zip(center)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    <= radius * radius
            }
            Shape::Tube { tube } => tube.contains(x),
            Shape::Union { parts } => parts.iter().any(|p| p.contains(x)),
        }
    }

    fn bounds(&self) -> Aabb {
        match self {
            Shape::Box { lo, hi } => Aabb::new(lo.clone(), hi.clone()),
            Shape::Ball { center, radius } => Ball::new(center.clone(), *radius).bounds(),
            Shape::Tube { tube } => tube.bounds(),
            Shape::Union { parts } => parts
                .iter()
                .map(|p| p.bounds())
                .reduce(|a, b| a.union(&b))
                .expect("non-empty union"),
        }
    }

    fn support(&self, w: &[f64]) -> f64 {
        match self {
            Shape::Box { lo, hi } => Aabb::new(lo.clone(), hi.clone()).support(w),
            Shape::Ball { center, radius } => {
                center.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()
                    + radius * w.iter().map(|x| x * x).sum::<f64>().sqrt()
            }
            Shape::Tube { tube } => tube.support(w),
            Shape::Union { parts } => parts
                .iter()
                .map(|p| p.support(w))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    fn chords(&self, p: &[f64], u: &[f64]) -> Vec<(f64, f64)> {
        match self {
            Shape::Box { lo, hi } => Aabb::new(lo.clone(), hi.clone())
                .clip_line(p, u)
                .into_iter()
                .collect(),
            Shape::Ball { center, radius } => Ball::new(center.clone(), *radius)
                .clip_line(p, u)
                .into_iter()
                .collect(),
            Shape::Tube { tube } => tube.clip_line(p, u).into_iter().collect(),
            Shape::Union { parts } => {
                merge_intervals(parts.iter().flat_map(|s| s.chords(p, u)).collect())
            }
        }
    }

    fn volume(&self) -> Option<f64> {
        match self {
            Shape::Box { lo, hi } => Some(lo.iter().zip(hi).map(|(a, b)| b - a).product()),
            Shape::Ball { center, radius } => {
                Some(crate::unit_ball_volume(center.len()) * radius.powi(center.len() as i32))
            }
            Shape::Tube { tube } => Some(tube.volume()),
            Shape::Union { .. } => None,
        }
    }
}
