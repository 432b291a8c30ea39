//! Ellipsoidal density-equalizing maps.
//!
//! Starting from a conformal parameterization, vertices are advected along
//! `v = −∇ρ/ρ` on the ellipsoid while the density diffuses. Every step is followed
//! by fold-over correction against the initial map and by re-coupling the density
//! to the deformed face areas.

use std::fmt::Write as _;

use crate::conformal::{fecm, ParamMap};
use crate::ellipsoid::{project_to_ellipsoid, vertex_normals_ellipsoid};
use crate::error::{Error, Result};
use crate::fem::{cotangent_laplacian, density_gradient, diffusion_step, lumped_mass, DensityField};
use crate::mesh::{FaceToVertexMatrix, TriMesh};
use crate::qc::{count_flipped_faces, overlap_correction_ellipsoid};
use crate::{par, EllipsoidRadii, Vec3};

/// How per-face populations are assigned.
#[derive(Debug, Clone, PartialEq)]
pub enum Population {
    /// Face areas of the source mesh, which makes the result area-preserving.
    Area,
    /// One unit per face.
    Uniform,
    /// Explicit per-face values.
    Values(Vec<f64>),
}

impl Population {
    pub fn resolve(&self, mesh: &TriMesh) -> Vec<f64> {
        match self {
            Population::Area => mesh.face_areas(),
            Population::Uniform => vec![1.0; mesh.num_faces()],
            Population::Values(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdemConfig {
    pub dt: f64,
    pub epsilon: f64,
    pub n_max: usize,
    pub radii: EllipsoidRadii,
    pub population: Population,
    /// Log progress every this many iterations; 0 disables it.
    pub log_every: usize,
}

impl Default for EdemConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            epsilon: 1e-3,
            n_max: 300,
            radii: EllipsoidRadii::unit(),
            population: Population::Area,
            log_every: 0,
        }
    }
}

/// One row of the iteration trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub sd_over_mean: f64,
    pub flips_pre: usize,
    pub flips_post: usize,
    pub max_disp: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdemTrace {
    pub records: Vec<TraceRecord>,
    /// True when the run stopped on the tolerance rather than the iteration cap or a stall.
    pub converged: bool,
    pub stalled: bool,
}

impl EdemTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,sd_over_mean,flips_pre,flips_post,max_disp\n");
        for r in &self.records {
            let _ = writeln!(s, "{},{:?},{},{},{:?}", r.iteration, r.sd_over_mean, r.flips_pre, r.flips_post, r.max_disp);
        }
        s
    }
}

/// Positions on the ellipsoid together with the density they carry.
#[derive(Debug, Clone, PartialEq)]
pub struct EdemState {
    pub positions: Vec<Vec3>,
    pub density: DensityField,
}

#[derive(Debug)]
pub struct EdemResult {
    pub map: ParamMap,
    pub trace: EdemTrace,
    pub density: DensityField,
    /// Positions of the conformal initialization.
    pub initial: Vec<Vec3>,
}

/// `sd(ρ)/mean(ρ)` with the population standard deviation.
pub fn sd_over_mean(rho: &[f64]) -> f64 {
    let n = rho.len() as f64;
    let mean = par::sum(rho.len(), |i| rho[i]) / n;
    let var = par::sum(rho.len(), |i| (rho[i] - mean).powi(2)) / n;
    var.sqrt() / mean
}

/// `v = −∇ρ_V / ρ_V` per vertex, given the face gradients of the density.
pub fn velocity_field(mesh: &TriMesh, positions: &[Vec3], rho_vertex: &[f64], grad_rho_face: &[Vec3]) -> Result<Vec<Vec3>> {
    if let Some((i, &r)) = rho_vertex.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
        return Err(Error::NonpositiveDensity { index: i, value: r });
    }
    let m = FaceToVertexMatrix::new(mesh, positions)?;
    let grad = m.apply_vec3(grad_rho_face);
    Ok(grad.iter().zip(rho_vertex).map(|(g, r)| -g / *r).collect())
}

/// Removes the normal component of each velocity.
pub fn project_velocity(velocity: &[Vec3], normals: &[Vec3]) -> Vec<Vec3> {
    velocity.iter().zip(normals).map(|(v, n)| v - n * v.dot(n)).collect()
}

/// One iteration: diffuse, advect, re-project, correct fold-overs, re-couple.
pub fn edem_step(
    mesh: &TriMesh,
    state: &EdemState,
    initial: &[Vec3],
    radii: &EllipsoidRadii,
    dt: f64,
) -> Result<(EdemState, TraceRecord)> {
    let r = &state.positions;
    let l = cotangent_laplacian(mesh, r)?;
    let a = lumped_mass(mesh, r);
    let rho = diffusion_step(&state.density.rho_vertex, &l, &a, dt)?;
    let grad = density_gradient(mesh, r, &rho)?;
    let v = velocity_field(mesh, r, &rho, &grad)?;
    let v = project_velocity(&v, &vertex_normals_ellipsoid(r, radii)?);

    let moved: Vec<Vec3> = r.iter().zip(&v).map(|(p, v)| p + v * dt).collect();
    let moved = project_to_ellipsoid(&moved, radii)?;
    let max_disp = moved.iter().zip(r).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
    if max_disp > radii.bounding_radius() {
        return Err(Error::StepDiverged { displacement: max_disp, bound: radii.bounding_radius() });
    }
    let flips_pre = count_flipped_faces(initial, &moved, mesh);
    let positions = overlap_correction_ellipsoid(mesh, initial, &moved, radii)?;
    let flips_post = count_flipped_faces(initial, &positions, mesh);
    let density = state.density.recouple(mesh, &positions)?;
    let record = TraceRecord {
        iteration: 0,
        sd_over_mean: sd_over_mean(&density.rho_vertex),
        flips_pre,
        flips_post,
        max_disp,
    };
    Ok((EdemState { positions, density }, record))
}

/// Halvings of the time step tried when fold-over correction fails.
pub const MAX_STEP_HALVINGS: usize = 4;

/// [`edem_step`], retried with a halved time step while fold-over correction fails.
pub(crate) fn step_with_retry(
    mesh: &TriMesh,
    state: &EdemState,
    initial: &[Vec3],
    radii: &EllipsoidRadii,
    dt: f64,
) -> Result<(EdemState, TraceRecord)> {
    let mut h = dt;
    for _ in 0..MAX_STEP_HALVINGS {
        match edem_step(mesh, state, initial, radii, h) {
            Err(Error::CorrectionFailed { flips }) => {
                log::warn!("fold-over correction left {flips} flipped faces; retrying with time step {}", h / 2.0);
                h /= 2.0;
            }
            other => return other,
        }
    }
    edem_step(mesh, state, initial, radii, h)
}

/// Iterations without a new best `sd/mean` after which a run is declared stalled.
pub const STALL_WINDOW: usize = 10;

/// Conformal initialization followed by [`run_edem_from`].
pub fn run_edem(mesh: &TriMesh, config: &EdemConfig) -> Result<EdemResult> {
    let init = fecm(mesh, &config.radii)?;
    run_edem_from(mesh, &init.positions, config)
}

/// Runs the iteration from the given initial positions on `config.radii`.
pub fn run_edem_from(mesh: &TriMesh, initial: &[Vec3], config: &EdemConfig) -> Result<EdemResult> {
    if !(config.dt > 0.0) || !(config.epsilon > 0.0) {
        return Err(Error::InvalidInput("dt and epsilon must be positive".into()));
    }
    let radii = config.radii;
    let initial = project_to_ellipsoid(initial, &radii)?;
    let density = DensityField::new(mesh, &initial, config.population.resolve(mesh))?;
    let mut state = EdemState { positions: initial.clone(), density };
    let first = sd_over_mean(&state.density.rho_vertex);
    let mut trace = EdemTrace {
        records: vec![TraceRecord { iteration: 0, sd_over_mean: first, flips_pre: 0, flips_post: 0, max_disp: 0.0 }],
        ..Default::default()
    };
    let mut best = (first, 0, state.clone());

    for n in 1..=config.n_max {
        if best.0 < config.epsilon {
            break;
        }
        let (next, mut record) = step_with_retry(mesh, &state, &initial, &radii, config.dt)?;
        record.iteration = n;
        trace.records.push(record);
        if config.log_every > 0 && n % config.log_every == 0 {
            log::info!("edem iteration {n}: sd/mean {:.3e}, flips {} -> {}", record.sd_over_mean, record.flips_pre, record.flips_post);
        }
        state = next;
        if record.sd_over_mean < best.0 {
            best = (record.sd_over_mean, n, state.clone());
        } else if n - best.1 >= STALL_WINDOW {
            log::warn!("edem stalled at iteration {n}; returning iteration {} (sd/mean {:.3e})", best.1, best.0);
            trace.stalled = true;
            break;
        }
    }
    trace.converged = best.0 < config.epsilon;
    if !trace.converged && !trace.stalled {
        log::warn!("edem reached {} iterations with sd/mean {:.3e}", config.n_max, best.0);
    }
    let state = best.2;
    let map = ParamMap { source: mesh.clone(), positions: state.positions, radii };
    Ok(EdemResult { map, trace, density: state.density, initial })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::spherical_conformal_map;
    use crate::models;

    #[test]
    fn uniform_density_has_zero_velocity() {
        let m = models::geodesic_sphere(6);
        let rho = vec![2.5; m.num_vertices()];
        let g = density_gradient(&m, m.vertices(), &rho).unwrap();
        let v = velocity_field(&m, m.vertices(), &rho, &g).unwrap();
        assert!(v.iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn velocity_is_scale_invariant() {
        let m = models::geodesic_sphere(6);
        let rho: Vec<f64> = m.vertices().iter().map(|p| 1.0 + 0.5 * p.z).collect();
        let rho2: Vec<f64> = rho.iter().map(|r| 2.0 * r).collect();
        let v1 = velocity_field(&m, m.vertices(), &rho, &density_gradient(&m, m.vertices(), &rho).unwrap()).unwrap();
        let v2 = velocity_field(&m, m.vertices(), &rho2, &density_gradient(&m, m.vertices(), &rho2).unwrap()).unwrap();
        for (a, b) in v1.iter().zip(&v2) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn velocity_points_down_the_gradient() {
        let m = models::geodesic_sphere(8);
        let p = m.vertices();
        let rho: Vec<f64> = p.iter().map(|p| 1.0 + 0.5 * p.z).collect();
        let v = velocity_field(&m, p, &rho, &density_gradient(&m, p, &rho).unwrap()).unwrap();
        let normals: Vec<Vec3> = p.iter().map(|q| q.normalize()).collect();
        let v = project_velocity(&v, &normals);
        for (q, v) in p.iter().zip(&v) {
            // The tangential part of −e_z is −e_z + z·n; it vanishes at the poles.
            let expected = -Vec3::z() + q.normalize() * q.normalize().z;
            if expected.norm() > 0.1 {
                assert!(v.dot(&expected) > 0.0);
            }
        }
    }

    #[test]
    fn rejects_nonpositive_density() {
        let m = models::geodesic_sphere(2);
        let mut rho = vec![1.0; m.num_vertices()];
        rho[3] = 0.0;
        let g = density_gradient(&m, m.vertices(), &rho).unwrap();
        assert!(matches!(velocity_field(&m, m.vertices(), &rho, &g), Err(Error::NonpositiveDensity { index: 3, .. })));
    }

    #[test]
    fn projection_cases() {
        let n = vec![Vec3::z(), Vec3::z(), Vec3::new(1.0, 2.0, 2.0) / 3.0];
        let v = vec![Vec3::new(0.0, 0.0, 3.0), Vec3::new(1.0, -2.0, 0.0), Vec3::new(0.3, -1.0, 4.0)];
        let p = project_velocity(&v, &n);
        assert!(p[0].norm() < 1e-15);
        assert_eq!(p[1], v[1]);
        assert!(p[2].dot(&n[2]).abs() < 1e-12);
        assert!(p[2].norm() <= v[2].norm());
    }

    #[test]
    fn uniform_density_is_a_fixed_point() {
        let radii = EllipsoidRadii::new(1.0, 2.0, 4.0).unwrap();
        let m = models::geodesic_sphere(6);
        let p = project_to_ellipsoid(&m.vertices().iter().map(|q| radii.from_sphere(q)).collect::<Vec<_>>(), &radii).unwrap();
        let density = DensityField::new(&m, &p, crate::mesh::face_areas(m.faces(), &p)).unwrap();
        let state = EdemState { positions: p.clone(), density };
        let (next, rec) = edem_step(&m, &state, &p, &radii, 0.1).unwrap();
        assert!(rec.max_disp < 1e-12);
        assert_eq!(rec.flips_post, 0);
        for (a, b) in next.positions.iter().zip(&p) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn dense_region_grows() {
        let radii = EllipsoidRadii::new(1.0, 2.0, 4.0).unwrap();
        let m = models::geodesic_sphere(12);
        let p: Vec<Vec3> = m.vertices().iter().map(|q| radii.from_sphere(q)).collect();
        let mesh = m.with_vertices(p.clone()).unwrap();
        let pop = models::two_region_population(&mesh, 3.0);
        let dense: Vec<bool> = pop.iter().zip(mesh.face_areas()).map(|(p, a)| p / a > 2.0).collect();
        let state = EdemState { density: DensityField::new(&mesh, &p, pop).unwrap(), positions: p.clone() };
        let (next, rec) = edem_step(&mesh, &state, &p, &radii, 0.1).unwrap();
        assert_eq!(rec.flips_post, 0);
        let mean_dense = |q: &[Vec3]| {
            let a = crate::mesh::face_areas(mesh.faces(), q);
            let (s, k) = a.iter().zip(&dense).filter(|(_, d)| **d).fold((0.0, 0), |(s, k), (a, _)| (s + a, k + 1));
            s / k as f64
        };
        assert!(mean_dense(&next.positions) > mean_dense(&p));
    }

    #[test]
    fn population_matching_initial_areas_converges_immediately() {
        let m = models::bumpy_ellipsoid(8);
        let init = spherical_conformal_map(&m).unwrap();
        let config = EdemConfig {
            population: Population::Values(crate::mesh::face_areas(m.faces(), &init.positions)),
            ..Default::default()
        };
        let out = run_edem_from(&m, &init.positions, &config).unwrap();
        assert!(out.trace.records.len() <= 3);
        assert!(out.trace.converged);
        for (a, b) in out.map.positions.iter().zip(&init.positions) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn area_population_equalizes() {
        let m = models::bumpy_ellipsoid(10);
        let radii = EllipsoidRadii::new(1.0, 1.0, 1.2).unwrap();
        let config = EdemConfig { radii, ..Default::default() };
        let out = run_edem(&m, &config).unwrap();
        assert_eq!(out.map.overlaps(), 0);
        assert!(out.map.level_residual() < 1e-9);
        let before = crate::metrics::abs_stats(&crate::metrics::area_distortion(&m, &out.initial).unwrap()).0;
        let after = crate::metrics::abs_stats(&crate::metrics::area_distortion(&m, &out.map.positions).unwrap()).0;
        assert!(after < 0.2 * before, "{before} -> {after}");
        let last = out.trace.records.last().unwrap();
        assert!(last.flips_post == 0);
    }

    #[test]
    fn population_scale_gives_identical_trajectory() {
        let m = models::bumpy_ellipsoid(6);
        let init = spherical_conformal_map(&m).unwrap();
        let pop = m.face_areas();
        let cfg = |k: f64| EdemConfig {
            population: Population::Values(pop.iter().map(|p| p * k).collect()),
            n_max: 5,
            ..Default::default()
        };
        let a = run_edem_from(&m, &init.positions, &cfg(1.0)).unwrap();
        let b = run_edem_from(&m, &init.positions, &cfg(7.0)).unwrap();
        for (p, q) in a.map.positions.iter().zip(&b.map.positions) {
            assert!((p - q).norm() < 1e-10);
        }
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let t = EdemTrace {
            records: vec![TraceRecord { iteration: 0, sd_over_mean: 0.5, flips_pre: 1, flips_post: 0, max_disp: 0.25 }],
            ..Default::default()
        };
        let csv = t.to_csv();
        assert_eq!(csv.lines().next().unwrap(), "iteration,sd_over_mean,flips_pre,flips_post,max_disp");
        assert_eq!(csv.lines().nth(1).unwrap(), "0,0.5,1,0,0.25");
    }
}
