//! Distortion measures of a parameterization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{face_areas, TriMesh};
use crate::qc::{beltrami_of_surface_map, count_inverted_faces};
use crate::Vec3;

/// Per-face `log((A'_T / ΣA') / (A_T / ΣA))`.
pub fn area_distortion(mesh: &TriMesh, positions: &[Vec3]) -> Result<Vec<f64>> {
    if positions.len() != mesh.num_vertices() {
        return Err(Error::ConnectivityMismatch(format!(
            "{} positions for {} vertices",
            positions.len(),
            mesh.num_vertices()
        )));
    }
    let src = mesh.face_areas();
    let dst = face_areas(mesh.faces(), positions);
    if let Some(face) = dst.iter().position(|a| !(*a > 0.0)) {
        return Err(Error::DegenerateFace { face, area: dst[face] });
    }
    let (s_total, d_total): (f64, f64) = (src.iter().sum(), dst.iter().sum());
    Ok(src.iter().zip(&dst).map(|(s, d)| ((d / d_total) / (s / s_total)).ln()).collect())
}

/// `Var(ρ / mean(ρ))` with the population (1/n) normalization.
pub fn density_variance(rho: &[f64]) -> f64 {
    let n = rho.len() as f64;
    let mean = rho.iter().sum::<f64>() / n;
    rho.iter().map(|r| (r / mean - 1.0).powi(2)).sum::<f64>() / n
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean and population standard deviation of `|v|`.
pub fn abs_stats(v: &[f64]) -> (f64, f64) {
    let abs: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let m = mean(&abs);
    let sd = (abs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / abs.len() as f64).sqrt();
    (m, sd)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub mean_abs_d_area: f64,
    pub sd_abs_d_area: f64,
    pub mean_abs_mu: f64,
    pub sd_abs_mu: f64,
    /// `Var(ρ̃)` of the vertex density, when one is supplied.
    pub density_variance: Option<f64>,
    pub overlaps: usize,
    #[serde(skip)]
    pub d_area: Vec<f64>,
    #[serde(skip)]
    pub mu_abs: Vec<f64>,
}

impl DistortionReport {
    pub fn new(mesh: &TriMesh, positions: &[Vec3], rho_vertex: Option<&[f64]>) -> Result<Self> {
        let d_area = area_distortion(mesh, positions)?;
        let mu_abs: Vec<f64> =
            beltrami_of_surface_map(mesh.faces(), mesh.vertices(), positions)?.iter().map(|m| m.norm()).collect();
        let (mean_abs_d_area, sd_abs_d_area) = abs_stats(&d_area);
        let (mean_abs_mu, sd_abs_mu) = abs_stats(&mu_abs);
        Ok(Self {
            mean_abs_d_area,
            sd_abs_d_area,
            mean_abs_mu,
            sd_abs_mu,
            density_variance: rho_vertex.map(density_variance),
            overlaps: count_inverted_faces(mesh.faces(), positions),
            d_area,
            mu_abs,
        })
    }

    /// Per-face CSV with columns `face,d_area,mu_abs`.
    pub fn face_csv(&self) -> String {
        let mut s = String::from("face,d_area,mu_abs\n");
        for (i, (d, m)) in self.d_area.iter().zip(&self.mu_abs).enumerate() {
            s.push_str(&format!("{i},{d:?},{m:?}\n"));
        }
        s
    }
}

/// Mean per-face `|μ|` of a surface map.
pub fn mean_abs_mu(mesh: &TriMesh, positions: &[Vec3]) -> Result<f64> {
    let mu = beltrami_of_surface_map(mesh.faces(), mesh.vertices(), positions)?;
    Ok(mu.iter().map(|m| m.norm()).sum::<f64>() / mu.len() as f64)
}
