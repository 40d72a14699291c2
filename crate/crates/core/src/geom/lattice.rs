use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Aabb, Tube};
use crate::error::{Error, Result};
use crate::rng;

/// A cube with integer minimum corner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub min_corner: Vec<i64>,
    pub side: f64,
}

impl Cube {
    pub fn unit(min_corner: Vec<i64>) -> Self {
        Cube {
            min_corner,
            side: 1.0,
        }
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::new(
            self.min_corner.iter().map(|&c| c as f64).collect(),
            self.min_corner
                .iter()
                .map(|&c| c as f64 + self.side)
                .collect(),
        )
    }
}

/// The unit lattice cubes tiling `[origin, origin + shape)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeLattice {
    pub origin: Vec<i64>,
    pub shape: Vec<usize>,
}

impl CubeLattice {
    /// Unit cubes meeting the scene cube `[0, side]^n`.
    pub fn scene(n: usize, side: f64) -> Self {
        CubeLattice {
            origin: vec![0; n],
            shape: vec![side.ceil().max(1.0) as usize; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of a cube (first coordinate fastest), if inside.
    pub fn index(&self, corner: &[i64]) -> Option<usize> {
        let mut idx = 0;
        let mut stride = 1;
        for i in 0..self.dim() {
            let k = corner[i] - self.origin[i];
            if k < 0 || k as usize >= self.shape[i] {
                return None;
            }
            idx += k as usize * stride;
            stride *= self.shape[i];
        }
        Some(idx)
    }

    pub fn corner(&self, mut index: usize) -> Vec<i64> {
        let mut out = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            out.push(self.origin[i] + (index % self.shape[i]) as i64);
            index /= self.shape[i];
        }
        out
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::new(
            self.origin.iter().map(|&o| o as f64).collect(),
            self.origin
                .iter()
                .zip(&self.shape)
                .map(|(&o, &s)| (o + s as i64) as f64)
                .collect(),
        )
    }
}

/// Squared distance from the segment `[a, b]` to the box `[lo, hi]`.
///
/// The squared distance along the segment is a convex piecewise quadratic
/// in the parameter; each piece is minimised in closed form.
pub fn segment_box_distance_sq(a: &[f64], b: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let n = a.len();
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let mut breaks = vec![0.0, 1.0];
    for i in 0..n {
        if d[i] != 0.0 {
            for bound in [lo[i], hi[i]] {
                let t = (bound - a[i]) / d[i];
                if t > 0.0 && t < 1.0 {
                    breaks.push(t);
                }
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    let dist_at = |t: f64| -> f64 {
        (0..n)
            .map(|i| {
                let x = a[i] + t * d[i];
                if x < lo[i] {
                    (lo[i] - x).powi(2)
                } else if x > hi[i] {
                    (x - hi[i]).powi(2)
                } else {
                    0.0
                }
            })
            .sum()
    };
    let mut best = dist_at(0.0).min(dist_at(1.0));
    for w in breaks.windows(2) {
        let (s0, s1) = (w[0], w[1]);
        if s1 <= s0 {
            continue;
        }
        let mid = 0.5 * (s0 + s1);
        let (mut qa, mut qb) = (0.0, 0.0);
        for i in 0..n {
            let x = a[i] + mid * d[i];
            let c = if x < lo[i] {
                a[i] - lo[i]
            } else if x > hi[i] {
                a[i] - hi[i]
            } else {
                continue;
            };
            qa += d[i] * d[i];
            qb += 2.0 * c * d[i];
        }
        let t = if qa > 0.0 {
            (-qb / (2.0 * qa)).clamp(s0, s1)
        } else {
            s0
        };
        best = best.min(dist_at(t)).min(dist_at(s0)).min(dist_at(s1));
    }
    best
}

/// Corners of the lattice cubes whose closed body meets the closed tube,
/// i.e. whose distance to the core segment is at most the radius.
/// Unbounded tubes are clipped to the lattice first.
pub fn cubes_hit_by_tube(tube: &Tube, lattice: &CubeLattice) -> Vec<Vec<i64>> {
    let scene = lattice.bounds();
    let Some(t) = tube.clipped(&scene) else {
        return Vec::new();
    };
    let (a, b) = t.endpoints();
    let n = lattice.dim();
    let reach = t.radius + 1e-9;
    let tb = t.bounds();
    let mut lo_idx = vec![0i64; n];
    let mut hi_idx = vec![0i64; n];
    for i in 0..n {
        let lo = (tb.lo[i] - 1e-9).floor() as i64 - 1;
        let hi = (tb.hi[i] + 1e-9).floor() as i64;
        lo_idx[i] = lo.max(lattice.origin[i]);
        hi_idx[i] = hi.min(lattice.origin[i] + lattice.shape[i] as i64 - 1);
        if lo_idx[i] > hi_idx[i] {
            return Vec::new();
        }
    }
    let half_diag = 0.5 * (n as f64).sqrt();
    let mut out = Vec::new();
    let mut corner = lo_idx.clone();
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    let mut center = vec![0.0; n];
    loop {
        for i in 0..n {
            lo[i] = corner[i] as f64;
            hi[i] = lo[i] + 1.0;
            center[i] = lo[i] + 0.5;
        }
        // Cheap rejection: the cube lies within half a diagonal of its centre.
        let (_, radial) = t.local(&center);
        if radial <= reach + half_diag && segment_box_distance_sq(&a, &b, &lo, &hi) <= reach * reach
        {
            out.push(corner.clone());
        }
        let mut i = 0;
        loop {
            if i == n {
                return out;
            }
            corner[i] += 1;
            if corner[i] <= hi_idx[i] {
                break;
            }
            corner[i] = lo_idx[i];
            i += 1;
        }
    }
}

/// Result of [`min_determinant`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinDeterminant {
    pub theta: f64,
    /// `false` when the minimum was estimated by random sampling.
    pub exhaustive: bool,
    pub tuples: u64,
}

const EXHAUSTIVE_LIMIT: u64 = 1_000_000;

pub(crate) fn det(rows: &[&[f64]]) -> f64 {
    match rows.len() {
        1 => rows[0][0],
        2 => rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0],
        3 => {
            let (a, b, c) = (rows[0], rows[1], rows[2]);
            a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
                + a[2] * (b[0] * c[1] - b[1] * c[0])
        }
        n => nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j]).determinant(),
    }
}

/// Minimum `|det(v_1, ..., v_n)|` over one vector from each family.
pub fn min_determinant(families: &[Vec<Vec<f64>>], seed: u64) -> Result<MinDeterminant> {
    if let Some(j) = families.iter().position(|f| f.is_empty()) {
        return Err(Error::EmptyFamily(j));
    }
    let n = families.len();
    let total = families
        .iter()
        .try_fold(1u64, |acc, f| acc.checked_mul(f.len() as u64));
    let mut rows: Vec<&[f64]> = families.iter().map(|f| f[0].as_slice()).collect();
    match total {
        Some(total) if total <= EXHAUSTIVE_LIMIT => {
            let mut idx = vec![0usize; n];
            let mut theta = f64::INFINITY;
            loop {
                for j in 0..n {
                    rows[j] = &families[j][idx[j]];
                }
                theta = theta.min(det(&rows).abs());
                let mut j = 0;
                loop {
                    if j == n {
                        return Ok(MinDeterminant {
                            theta,
                            exhaustive: true,
                            tuples: total,
                        });
                    }
                    idx[j] += 1;
                    if idx[j] < families[j].len() {
                        break;
                    }
                    idx[j] = 0;
                    j += 1;
                }
            }
        }
        _ => {
            let mut r = rng::stream(seed, 0);
            let mut theta = f64::INFINITY;
            for _ in 0..EXHAUSTIVE_LIMIT {
                for j in 0..n {
                    rows[j] = &families[j][r.random_range(0..families[j].len())];
                }
                theta = theta.min(det(&rows).abs());
            }
            Ok(MinDeterminant {
                theta,
                exhaustive: false,
                tuples: EXHAUSTIVE_LIMIT,
            })
        }
    }
}
