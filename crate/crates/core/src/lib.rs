//! Ellipsoidal density-equalizing maps (EDEM) and ellipsoidal density-equalizing
//! quasi-conformal maps (EDEQ) for genus-0 closed triangle meshes.
//!
//! The crate is organised bottom-up:
//!
//! * [`mesh`], [`io`], [`ellipsoid`]: closed-mesh representation, file formats and
//!   the ellipsoidal target domain.
//! * [`sparse`], [`fem`]: SPD solves and the finite-element operators used by the
//!   density diffusion.
//! * [`qc`]: Beltrami coefficients, the Linear Beltrami Solver and the fold-over
//!   correction on spheres and ellipsoids.
//! * [`conformal`]: the initial ellipsoidal conformal parameterization.
//! * [`edem`], [`edeq`]: the two density-equalizing iterations.
//! * [`metrics`], [`remesh`]: distortion measures and the remeshing application.
//!
//! Data-parallel loops go through [`par`], which falls back to plain iterators when
//! the `parallel` feature is disabled.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conformal;
pub mod edem;
pub mod edeq;
pub mod ellipsoid;
pub mod error;
pub mod fem;
pub mod io;
pub mod mesh;
pub mod metrics;
pub mod models;
pub mod par;
pub mod qc;
pub mod remesh;
pub mod sparse;

pub use ellipsoid::EllipsoidRadii;
pub use error::{Error, Result};
pub use mesh::TriMesh;

/// Points and vectors in model space.
pub type Vec3 = nalgebra::Vector3<f64>;
/// Planar points are stored as complex numbers.
pub type Complex = num_complex::Complex64;
