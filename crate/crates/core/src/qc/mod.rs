//! Quasi-conformal machinery: Beltrami coefficients, the Linear Beltrami Solver,
//! composition, and fold-over correction on spheres and ellipsoids.

mod beltrami;
mod compose;
mod lbs;
mod overlap;

pub use beltrami::{
    beltrami_of_planar_map, beltrami_of_surface_map, face_derivatives, flatten_triangle, planar_face_beltrami,
    BeltramiField,
};
pub use compose::compose_beltrami;
pub use lbs::{lbs_dirichlet, lbs_reconstruct, lbs_weighted, MU_LIMIT};
pub use overlap::{
    count_flipped_faces, count_inverted_faces, flipped_faces, overlap_correction_ellipsoid, overlap_correction_sphere, MAX_CORRECTION_ROUNDS,
};
