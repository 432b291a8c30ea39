//! Uniform remeshing through a parameterization: regular sampling of the
//! ellipsoid, transfer back to the surface, and quality measures.

mod generate;
mod pullback;
mod quality;

pub use generate::{icosphere_level, scaled_icosphere, uniform_ellipsoid_mesh, MIN_TARGET_VERTICES, SMOOTHING_ITERATIONS};
pub use pullback::{pull_back, SphereIndex, LOCATION_TOLERANCE};
pub use quality::{face_regularity, remesh_quality, RemeshReport};

use crate::conformal::ParamMap;
use crate::error::Result;
use crate::mesh::TriMesh;

/// Samples the map's ellipsoid with `target` vertices and pulls the samples back
/// onto the source surface.
pub fn remesh(param: &ParamMap, target: usize) -> Result<(TriMesh, RemeshReport)> {
    let samples = uniform_ellipsoid_mesh(&param.radii, target)?;
    let mesh = pull_back(param, &samples)?;
    let report = remesh_quality(&mesh);
    Ok((mesh, report))
}
