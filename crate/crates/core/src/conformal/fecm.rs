//! Ellipsoidal conformal parameterization.
//!
//! The mesh is mapped conformally to the sphere, moved to the plane by
//! stereographic projection with a chosen pair of poles at `0` and `∞`, rescaled
//! radially, and lifted to the ellipsoid by the inverse ellipsoidal stereographic
//! projection `E = h⁻¹ ∘ S⁻¹`. Since `E` is not conformal, a planar
//! quasi-conformal correction `g` is solved for so that `E ∘ g` is as conformal as
//! possible: by the composition formula this needs `μ_g = −μ_E τ_g` with
//! `τ_g = conj(g_z) / g_z`, which is iterated a few times from `g = id`.

use nalgebra::{Rotation3, SymmetricEigen};

use crate::error::{Error, Result};
use crate::mesh::{face_areas, TriMesh};
use crate::metrics::mean_abs_mu;
use crate::qc::{count_inverted_faces, face_derivatives, flatten_triangle, lbs_weighted, planar_face_beltrami};
use crate::{Complex, EllipsoidRadii, Vec3};

use super::mobius::{infinity, is_infinite, mobius_normalize};
use super::rescale::rescale_distribution;
use super::spherical::spherical_conformal_map;
use super::stereo::{inverse_stereographic, stereographic, Pole};
use super::ParamMap;

/// Cap on the modulus of the correction's Beltrami coefficient.
const COMPENSATION_MU_CAP: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FecmOptions {
    /// Apply the radial rescaling step.
    pub rescale: bool,
    /// Number of quasi-conformal correction solves; 0 disables the correction.
    pub compensation_iterations: usize,
}

impl Default for FecmOptions {
    fn default() -> Self {
        Self { rescale: true, compensation_iterations: 3 }
    }
}

/// Vertices with the smallest and largest coordinate along the first principal
/// axis of the vertex cloud; they are sent to `0` and `∞`.
pub fn pole_pair(mesh: &TriMesh) -> (usize, usize) {
    let v = mesh.vertices();
    let mean = v.iter().sum::<Vec3>() / v.len() as f64;
    let cov = v.iter().fold(nalgebra::Matrix3::zeros(), |acc, p| {
        let d = p - mean;
        acc + d * d.transpose()
    });
    let eig = SymmetricEigen::new(cov);
    let k = eig.eigenvalues.imax();
    let axis: Vec3 = eig.eigenvectors.column(k).into();
    let proj: Vec<f64> = v.iter().map(|p| axis.dot(&(p - mean))).collect();
    let (mut lo, mut hi) = (0, 0);
    for i in 1..proj.len() {
        if proj[i] < proj[lo] {
            lo = i;
        }
        if proj[i] > proj[hi] {
            hi = i;
        }
    }
    (lo, hi)
}

fn rotation_to_north(p: &Vec3) -> Rotation3<f64> {
    Rotation3::rotation_between(p, &Vec3::z())
        .unwrap_or_else(|| Rotation3::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI))
}

/// `E(w) = h⁻¹(S⁻¹(conj w))`; the plane chart is conjugated so faces stay
/// counterclockwise.
fn lift(w: Complex, radii: &EllipsoidRadii) -> Vec3 {
    let w = if is_infinite(w) { w } else { w.conj() };
    radii.from_sphere(&inverse_stereographic(w, Pole::North))
}

pub fn fecm(mesh: &TriMesh, radii: &EllipsoidRadii) -> Result<ParamMap> {
    fecm_with_options(mesh, radii, &FecmOptions::default())
}

pub fn fecm_with_options(mesh: &TriMesh, radii: &EllipsoidRadii, options: &FecmOptions) -> Result<ParamMap> {
    let sphere = spherical_conformal_map(mesh)?;
    let (p0, pinf) = pole_pair(mesh);
    let rot = rotation_to_north(&sphere.positions[pinf]);
    let chart: Vec<Complex> = sphere
        .positions
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if i == pinf {
                return Ok(infinity());
            }
            stereographic(&(rot * p), Pole::North).map(|w| w.conj()).ok_or(Error::Pole(i))
        })
        .collect::<Result<_>>()?;
    let conformal = mobius_normalize(&chart, p0, pinf)?;
    let start = if options.rescale { rescale_distribution(&conformal, mesh) } else { conformal.clone() };

    // Planar problem without the vertex at infinity.
    let n = mesh.num_vertices();
    let local: Vec<usize> = (0..n).map(|i| if i < pinf { i } else { i.wrapping_sub(1) }).collect();
    let domain: Vec<usize> = (0..mesh.num_faces()).filter(|&t| !mesh.faces()[t].contains(&pinf)).collect();
    let faces: Vec<[usize; 3]> = domain.iter().map(|&t| mesh.faces()[t].map(|v| local[v])).collect();
    let source: Vec<Complex> = (0..n).filter(|&i| i != pinf).map(|i| conformal[i]).collect();
    let sphere_areas = face_areas(mesh.faces(), &sphere.positions);
    let weights: Vec<f64> = domain.iter().map(|&t| sphere_areas[t]).collect();
    let anchor = (0..n)
        .filter(|&i| i != p0 && i != pinf)
        .min_by(|&a, &b| (start[a].norm() - 1.0).abs().total_cmp(&(start[b].norm() - 1.0).abs()))
        .ok_or_else(|| Error::InvalidInput("mesh too small for a conformal parameterization".into()))?;
    let lift_all = |g: &[Complex]| -> Vec<Vec3> {
        (0..n).map(|i| if i == pinf { lift(infinity(), radii) } else { lift(g[local[i]], radii) }).collect()
    };
    let score = |g: &[Complex]| -> Result<Option<(f64, Vec<Vec3>)>> {
        let q = lift_all(g);
        if count_inverted_faces(mesh.faces(), &q) > 0 {
            return Ok(None);
        }
        Ok(Some((mean_abs_mu(mesh, &q)?, q)))
    };
    let mut g: Vec<Complex> = (0..n).filter(|&i| i != pinf).map(|i| start[i]).collect();
    let mut best = score(&g)?
        .ok_or_else(|| Error::Convergence("ellipsoidal parameterization folds".into()))?;
    for k in 0..options.compensation_iterations {
        let q = &best.1;
        // Current coefficient of g and the one that would make E ∘ g conformal.
        let (current, full): (Vec<Complex>, Vec<Complex>) = crate::par::map_range(faces.len(), |t| {
            let f = faces[t];
            let gt = f.map(|v| g[v]);
            let mu_e = match flatten_triangle(mesh.faces()[domain[t]].map(|v| q[v])) {
                Some(flat) => planar_face_beltrami(t, gt, flat).unwrap_or_default(),
                None => Complex::new(0.0, 0.0),
            };
            match face_derivatives(f.map(|v| source[v]), gt) {
                Some((fz, fzbar)) if fz.norm() > 0.0 => (fzbar / fz, -mu_e * fz.conj() / fz),
                _ => (Complex::new(0.0, 0.0), Complex::new(0.0, 0.0)),
            }
        })
        .into_iter()
        .unzip();
        let mut pins: Vec<(usize, Complex)> = vec![(local[p0], g[local[p0]]), (local[anchor], g[local[anchor]])];
        pins.extend(mesh.vertex_neighbors().get(pinf).iter().map(|&v| (local[v], g[local[v]])));
        pins.sort_by_key(|p| p.0);
        pins.dedup_by_key(|p| p.0);

        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda >= 1.0 / 64.0 {
            let target: Vec<Complex> = current
                .iter()
                .zip(&full)
                .map(|(c, f)| {
                    let m = c + (f - c) * lambda;
                    if m.norm() > COMPENSATION_MU_CAP {
                        m * (COMPENSATION_MU_CAP / m.norm())
                    } else {
                        m
                    }
                })
                .collect();
            if let Ok(trial) = lbs_weighted(&faces, &source, &target, &pins, &weights) {
                if let Some((mu, q)) = score(&trial)? {
                    if mu < best.0 {
                        log::debug!("fecm correction {}: lambda {lambda}, mean |mu| {:.4} -> {mu:.4}", k + 1, best.0);
                        best = (mu, q);
                        g = trial;
                        accepted = true;
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let (_, positions) = best;
    let positions = positions.iter().map(|p| radii.project(p).unwrap_or(*p)).collect();
    Ok(ParamMap { source: mesh.clone(), positions, radii: *radii })
}
