//! Conformal boundary-differences solver for Laplace problems on polygonal,
//! possibly partitioned and inhomogeneous, two-dimensional domains.
//!
//! The pipeline is:
//!
//! 1. [`geometry`] — polygons, boundary conditions, subdomain partitioning.
//! 2. [`scmap`] — numerical Schwarz-Christoffel maps from the unit disk.
//! 3. [`discretize`] — node/probe placement on Neumann boundaries and
//!    material interfaces, with disk images and stencil wiring.
//! 4. [`solver`] — the SOR fixed-point loop driving boundary traces,
//!    Schwarz-formula probe evaluation and finite-difference residuals.
//! 5. [`post`] — potentials, gradients, capacitance and field export from a
//!    converged [`solver::Solution`].
//!
//! [`oracle`] holds an independent dense finite-difference reference solver
//! used to validate the conformal path; it shares no numerics with it.

pub mod disk;
pub mod discretize;
pub mod error;
pub mod geometry;
pub mod oracle;
pub mod post;
pub mod quad;
pub mod scmap;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{microstrip_fixture, BoundaryKind, Polygon, ProblemSpec, Subdomain};
pub use scmap::DiskMap;

/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 8.854_187_812_8e-12;

pub(crate) type C64 = num_complex::Complex64;
