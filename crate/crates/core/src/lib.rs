//! Numerical experiments with polynomial bisection, directed volumes of
//! algebraic hypersurfaces and multilinear tube incidences.
//!
//! The crate is organised bottom-up:
//!
//! * [`poly`]: multivariate polynomials over the graded-lex monomial basis,
//!   restriction to lines and Sturm root counting.
//! * [`surface`]: the [`Hypersurface`] abstraction shared by dense and
//!   factored polynomials.
//! * [`geom`]: tubes, lattice cubes, ellipsoids, sampled convex bodies.
//! * [`region`]: bounded regions that know their chords along a line.
//! * [`measure`]: seeded, block-partitioned Monte Carlo volume and surface
//!   integrals.
//! * [`hamsandwich`]: simultaneous bisection by a degree-`d` hypersurface.
//! * [`dirvol`]: directed volumes, the cylinder estimate and the axis-sum
//!   bound.
//! * [`visibility`]: visibility bodies, mollification and the
//!   high-visibility search.
//! * [`kakeya`]: tube scenes, multiplicity tables, the volume and ratio
//!   experiments and the staged proof trace.
//! * [`planiness`]: the box construction for unions of tubes.
//! * [`cli`]: scene files, reports and the subcommand runner behind the
//!   `mlk` binary.

pub mod cli;
pub mod dirvol;
pub mod error;
pub mod geom;
pub mod hamsandwich;
pub mod kakeya;
pub mod measure;
pub mod planiness;
pub mod poly;
pub mod region;
pub mod rng;
pub mod surface;
pub mod visibility;

pub use error::{Error, Result};
pub use measure::{SampleBudget, VolumeEstimate};
pub use poly::{MultiIndex, MultiPoly, UniPoly};
pub use surface::{FactoredPoly, Hypersurface};

/// Volume of the unit ball in `R^k`.
pub fn unit_ball_volume(k: usize) -> f64 {
    match k {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(k - 2) * 2.0 * std::f64::consts::PI / k as f64,
    }
}

/// `(n-1)`-dimensional area of the unit sphere in `R^n`.
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}
