//! Initial conformal parameterization onto an ellipsoid.

mod fecm;
mod mobius;
mod rescale;
mod spherical;
pub mod stereo;


pub use fecm::{fecm, fecm_with_options, pole_pair, FecmOptions};
pub use mobius::{balance_on_sphere, mobius_normalize};
pub use rescale::{rescale_distribution, rescale_distribution_weighted};
pub use spherical::spherical_conformal_map;
pub use stereo::{inverse_ellipsoidal_stereographic, inverse_stereographic, stereographic, stereographic_all, Pole};

use crate::ellipsoid::max_level_residual;
use crate::error::Result;
use crate::mesh::TriMesh;
use crate::metrics::DistortionReport;
use crate::qc::count_inverted_faces;
use crate::{EllipsoidRadii, Vec3};

/// A map `f` from a mesh onto an ellipsoid, stored as per-vertex images.
#[derive(Debug, Clone)]
pub struct ParamMap {
    pub source: TriMesh,
    pub positions: Vec<Vec3>,
    pub radii: EllipsoidRadii,
}

impl ParamMap {
    /// Number of folded faces.
    pub fn overlaps(&self) -> usize {
        count_inverted_faces(self.source.faces(), &self.positions)
    }

    /// Largest `|x²/a² + y²/b² + z²/c² − 1|` over the images.
    pub fn level_residual(&self) -> f64 {
        max_level_residual(&self.positions, &self.radii)
    }

    pub fn report(&self, rho_vertex: Option<&[f64]>) -> Result<DistortionReport> {
        DistortionReport::new(&self.source, &self.positions, rho_vertex)
    }

    /// The image as a mesh with the source connectivity.
    pub fn image_mesh(&self) -> TriMesh {
        TriMesh::assemble(self.positions.clone(), self.source.faces().to_vec())
    }
}
