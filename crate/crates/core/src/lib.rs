//! Dynamics and geometry of Sierpinski-carpet Julia sets of rational maps.
//!
//! The crate is organized around one pipeline:
//!
//! * [`sphere`] / [`poly`] / [`ratmap`] — arithmetic on the Riemann sphere:
//!   the chordal metric, polynomials with a simultaneous-iteration root
//!   finder, rational maps evaluable in two charts, and Moebius
//!   transformations (orientation-reversing allowed).
//! * [`orbits`] — critical orbits, postcritical sets, cycle classification
//!   and the PCF / subhyperbolic / hyperbolic verdicts.
//! * [`raster`] — basin rasterization of the sphere, Julia boundary pixels,
//!   Fatou component labeling and peripheral-curve tracing.
//! * [`geometry`] — numerical estimators for quasicircle constants, relative
//!   separation, locations-and-scales, porosity and quasisymmetric
//!   distortion.
//! * [`elevator`] — the conformal elevator: normalization, blow-up iterate
//!   selection and empirical distortion constants.
//! * [`boettcher`] — Boettcher coordinates at superattracting fixed points,
//!   Fatou component basepoints and the circle rotation solver.
//! * [`rigidity`] — Moebius symmetry detection for carpet Julia sets and the
//!   dynamical functional-equation search.
//!
//! All operations are pure functions over immutable inputs; sample loops and
//! per-pixel work are parallelized with rayon, and every randomized
//! estimator is deterministic given its seed.

pub mod boettcher;
pub mod elevator;
pub mod geometry;
pub mod orbits;
pub mod poly;
pub mod raster;
pub mod ratmap;
pub mod rigidity;
pub mod spatial;
pub mod sphere;

pub use poly::Polynomial;
pub use ratmap::RationalMap;
pub use sphere::{chordal_distance, MoebiusMap, SpherePoint};
