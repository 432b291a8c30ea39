//! Ellipsoidal density-equalizing quasi-conformal maps.
//!
//! The iteration minimizes `E = E_edem + α E_bc` jointly over the map and the two
//! free semi-axes `b`, `c`. Map updates are density-equalizing steps; every `K`
//! iterations the radii move to the best of nine neighbouring candidates.

use std::fmt::Write as _;

use crate::conformal::{fecm, ParamMap};
use crate::edem::{edem_step, step_with_retry, EdemState, Population, TraceRecord};
use crate::error::{Error, Result};
use crate::fem::{density_gradient, DensityField};
use crate::mesh::{face_areas, TriMesh};
use crate::qc::{beltrami_of_surface_map, count_flipped_faces};
use crate::{par, EllipsoidRadii, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct EdeqConfig {
    pub dt: f64,
    pub db: f64,
    pub dc: f64,
    /// Descent iterations per fixed radii.
    pub k: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub n_max: usize,
    pub radii: EllipsoidRadii,
    pub population: Population,
    pub log_every: usize,
}

impl Default for EdeqConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            db: 0.1,
            dc: 0.1,
            k: 5,
            alpha: 1.0,
            epsilon: 1e-5,
            n_max: 300,
            radii: EllipsoidRadii::unit(),
            population: Population::Area,
            log_every: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    pub iteration: usize,
    pub e_edem: f64,
    pub e_bc: f64,
    pub e: f64,
    pub radii: EllipsoidRadii,
    pub flips: usize,
}

/// One call of [`shape_update`] inside a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeUpdateRecord {
    pub iteration: usize,
    pub m: usize,
    pub db: f64,
    pub dc: f64,
    pub energy_before: f64,
    pub energy_after: f64,
    pub radii: EllipsoidRadii,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyReport {
    pub history: Vec<EnergyRecord>,
    pub shape_updates: Vec<ShapeUpdateRecord>,
    pub converged: bool,
}

impl EnergyReport {
    pub fn last(&self) -> Option<&EnergyRecord> {
        self.history.last()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,E_edem,E_bc,E,a,b,c,flips\n");
        for r in &self.history {
            let _ = writeln!(
                s,
                "{},{:?},{:?},{:?},{:?},{:?},{:?},{}",
                r.iteration, r.e_edem, r.e_bc, r.e, r.radii.a, r.radii.b, r.radii.c, r.flips
            );
        }
        s
    }
}

/// `Σ Area(T) ‖∇ρ(T) / ρ_F(T)‖²` on the current geometry, with `∇ρ` the gradient
/// of the interpolated vertex density.
pub fn energy_edem(mesh: &TriMesh, positions: &[Vec3], density: &DensityField) -> Result<f64> {
    if let Some((i, &r)) = density.rho_face.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
        return Err(Error::NonpositiveDensity { index: i, value: r });
    }
    let grad = density_gradient(mesh, positions, &density.rho_vertex)?;
    let areas = face_areas(mesh.faces(), positions);
    Ok(par::sum(mesh.num_faces(), |t| areas[t] * (grad[t] / density.rho_face[t]).norm_squared()))
}

/// `Σ Area(T⁰) |μ_T|²`, with `μ` the Beltrami coefficient of the map from the
/// source surface to `positions` and the weights taken from the initial map.
pub fn energy_bc(initial: &ParamMap, positions: &[Vec3]) -> Result<f64> {
    let faces = initial.source.faces();
    let mu = beltrami_of_surface_map(faces, initial.source.vertices(), positions)?;
    let areas = face_areas(faces, &initial.positions);
    Ok(par::sum(faces.len(), |t| areas[t] * mu[t].norm_sqr()))
}

/// One descent step of `E_edem`; the same update as [`edem_step`].
pub fn e1_descent_step(
    mesh: &TriMesh,
    state: &EdemState,
    reference: &[Vec3],
    radii: &EllipsoidRadii,
    dt: f64,
) -> Result<(EdemState, TraceRecord)> {
    edem_step(mesh, state, reference, radii, dt)
}

/// Carries positions from one ellipsoid to another by `h_to⁻¹ ∘ h_from`.
pub fn rescale_positions(positions: &[Vec3], from: &EllipsoidRadii, to: &EllipsoidRadii) -> Vec<Vec3> {
    positions.iter().map(|p| to.from_sphere(&from.to_sphere(p))).collect()
}

/// Candidate offsets `(k_b, k_c)` in tie-break order.
pub const CANDIDATE_ORDER: [(i32, i32); 9] = [(0, 0), (-1, 0), (0, -1), (0, 1), (1, 0), (-1, -1), (-1, 1), (1, -1), (1, 1)];

/// Energies closer than this count as equal.
pub const ENERGY_TIE: f64 = 1e-12;

pub struct ShapeUpdate {
    pub radii: EllipsoidRadii,
    pub state: EdemState,
    /// `E` at the input radii.
    pub energy_before: f64,
    pub energy_after: f64,
}

/// `E_edem + α E_bc` of a state.
pub fn total_energy(mesh: &TriMesh, initial: &ParamMap, state: &EdemState, alpha: f64) -> Result<(f64, f64, f64)> {
    let e_edem = energy_edem(mesh, &state.positions, &state.density)?;
    let e_bc = if alpha > 0.0 { energy_bc(initial, &state.positions)? } else { 0.0 };
    Ok((e_edem, e_bc, e_edem + alpha * e_bc))
}

/// Picks the lowest-energy radii among `(a, b + k_b db, c + k_c dc)`. `a` never changes.
pub fn shape_update(
    mesh: &TriMesh,
    initial: &ParamMap,
    state: &EdemState,
    radii: &EllipsoidRadii,
    db: f64,
    dc: f64,
    alpha: f64,
) -> Result<ShapeUpdate> {
    let candidates: Vec<EllipsoidRadii> = CANDIDATE_ORDER
        .iter()
        .filter_map(|&(kb, kc)| EllipsoidRadii::new(radii.a, radii.b + kb as f64 * db, radii.c + kc as f64 * dc).ok())
        .collect();
    let evaluated = par::try_map_range(candidates.len(), |i| -> Result<(f64, EdemState)> {
        let positions = rescale_positions(&state.positions, radii, &candidates[i]);
        let density = state.density.recouple(mesh, &positions)?;
        let s = EdemState { positions, density };
        Ok((total_energy(mesh, initial, &s, alpha)?.2, s))
    })?;
    let energy_before = evaluated[0].0;
    let mut best = 0;
    for (i, (e, _)) in evaluated.iter().enumerate().skip(1) {
        if *e < evaluated[best].0 - ENERGY_TIE {
            best = i;
        }
    }
    let (energy_after, state) = evaluated.into_iter().nth(best).expect("candidate exists");
    Ok(ShapeUpdate { radii: candidates[best], state, energy_before, energy_after })
}

#[derive(Debug)]
pub struct EdeqResult {
    pub map: ParamMap,
    pub report: EnergyReport,
    pub density: DensityField,
    /// The conformal initialization on the starting radii.
    pub initial: ParamMap,
}

/// Conformal initialization on `config.radii` followed by [`run_edeq_from`].
pub fn run_edeq(mesh: &TriMesh, config: &EdeqConfig) -> Result<EdeqResult> {
    let init = fecm(mesh, &config.radii)?;
    run_edeq_from(mesh, init, config)
}

pub fn run_edeq_from(mesh: &TriMesh, initial: ParamMap, config: &EdeqConfig) -> Result<EdeqResult> {
    if !(config.alpha >= 0.0) {
        return Err(Error::InvalidInput("alpha must be nonnegative".into()));
    }
    if !(config.dt > 0.0) || !(config.epsilon > 0.0) || !(config.db >= 0.0) || !(config.dc >= 0.0) || config.k == 0 {
        return Err(Error::InvalidInput("dt, epsilon and K must be positive and the radius steps nonnegative".into()));
    }
    let mut radii = initial.radii;
    let density = DensityField::new(mesh, &initial.positions, config.population.resolve(mesh))?;
    let mut state = EdemState { positions: initial.positions.clone(), density };
    let mut report = EnergyReport::default();
    let record = |n: usize, s: &EdemState, r: EllipsoidRadii| -> Result<EnergyRecord> {
        let (e_edem, e_bc, e) = total_energy(mesh, &initial, s, config.alpha)?;
        let flips = count_flipped_faces(&initial.positions, &s.positions, mesh);
        Ok(EnergyRecord { iteration: n, e_edem, e_bc, e, radii: r, flips })
    };
    report.history.push(record(0, &state, radii)?);

    for n in 1..=config.n_max {
        let reference = rescale_positions(&initial.positions, &initial.radii, &radii);
        state = step_with_retry(mesh, &state, &reference, &radii, config.dt)?.0;
        if n % config.k == 0 {
            let m = n / config.k;
            let scale = 0.9f64.powi(m as i32);
            let (db, dc) = (scale * config.db, scale * config.dc);
            let update = shape_update(mesh, &initial, &state, &radii, db, dc, config.alpha)?;
            report.shape_updates.push(ShapeUpdateRecord {
                iteration: n,
                m,
                db,
                dc,
                energy_before: update.energy_before,
                energy_after: update.energy_after,
                radii: update.radii,
            });
            radii = update.radii;
            state = update.state;
        }
        let rec = record(n, &state, radii)?;
        let prev = report.history.last().expect("history is never empty").e;
        report.history.push(rec);
        if config.log_every > 0 && n % config.log_every == 0 {
            log::info!("edeq iteration {n}: E {:.6e} (edem {:.3e}, bc {:.3e}), radii {radii}", rec.e, rec.e_edem, rec.e_bc);
        }
        if prev == 0.0 || ((rec.e - prev) / prev).abs() < config.epsilon {
            report.converged = true;
            break;
        }
    }
    if !report.converged {
        log::warn!("edeq reached {} iterations without meeting the energy tolerance", config.n_max);
    }
    let map = ParamMap { source: mesh.clone(), positions: state.positions, radii };
    Ok(EdeqResult { map, report, density: state.density, initial })
}
