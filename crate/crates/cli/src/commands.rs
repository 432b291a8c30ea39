use std::fs;
use std::path::Path;

use edeq_core::conformal::{fecm, ParamMap};
use edeq_core::edem::{run_edem_from, EdemConfig};
use edeq_core::edeq::{run_edeq_from, EdeqConfig};
use edeq_core::io::{load_mesh, write_obj};
use edeq_core::metrics::DistortionReport;
use edeq_core::remesh::{remesh, MIN_TARGET_VERTICES};
use edeq_core::{EllipsoidRadii, Error, Result, TriMesh};
use serde::Serialize;

use crate::config::{Command, Method, RunConfig};

#[derive(Serialize)]
struct Energy {
    e_edem: f64,
    e_bc: f64,
    e: f64,
    shape_updates: usize,
}

#[derive(Serialize)]
struct RunReport<'a> {
    radii: EllipsoidRadii,
    iterations: usize,
    converged: bool,
    #[serde(flatten)]
    distortion: &'a DistortionReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    energy: Option<Energy>,
}

#[derive(Serialize)]
struct RemeshSummary {
    method: Method,
    target_vertices: usize,
    radii: EllipsoidRadii,
    delta_size: f64,
    delta_shape: f64,
    vertex_count: usize,
    location_failures: usize,
}

/// Executes a materialized configuration. The configuration itself is written
/// first so that even a failed run leaves it behind.
pub fn execute(config: &RunConfig) -> Result<()> {
    fs::create_dir_all(&config.output)?;
    fs::write(config.output.join("config.json"), config.to_json())?;
    match config.command {
        Command::Edem => edem(config),
        Command::Edeq => edeq(config),
        Command::Remesh => remesh_cmd(config),
        Command::Metrics => metrics(config),
    }
}

fn edem_config(config: &RunConfig, mesh: &TriMesh) -> Result<EdemConfig> {
    Ok(EdemConfig {
        dt: config.dt,
        epsilon: config.epsilon,
        n_max: config.n_max,
        radii: config.radii()?,
        population: config.population(mesh.num_faces())?,
        log_every: config.log_every,
    })
}

fn edeq_config(config: &RunConfig, mesh: &TriMesh) -> Result<EdeqConfig> {
    Ok(EdeqConfig {
        dt: config.dt,
        db: config.db,
        dc: config.dc,
        k: config.k,
        alpha: config.alpha,
        epsilon: config.epsilon,
        n_max: config.n_max,
        radii: config.radii()?,
        population: config.population(mesh.num_faces())?,
        log_every: config.log_every,
    })
}

/// Conformal initialization, saved as `init.obj` before the main iteration starts.
fn initialize(config: &RunConfig, mesh: &TriMesh, radii: &EllipsoidRadii) -> Result<ParamMap> {
    let init = fecm(mesh, radii)?;
    log::info!("conformal initialization: {} overlaps", init.overlaps());
    write_obj(&config.output.join("init.obj"), &init.positions, mesh.faces())?;
    Ok(init)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn write_run(config: &RunConfig, map: &ParamMap, report: &RunReport) -> Result<()> {
    let out = &config.output;
    write_obj(&out.join("param.obj"), &map.positions, map.source.faces())?;
    write_json(&out.join("report.json"), report)?;
    if config.face_csv {
        fs::write(out.join("faces.csv"), report.distortion.face_csv())?;
    }
    log::info!(
        "mean |d_area| {:.4e}, mean |mu| {:.4e}, overlaps {}",
        report.distortion.mean_abs_d_area,
        report.distortion.mean_abs_mu,
        report.distortion.overlaps
    );
    Ok(())
}

fn edem(config: &RunConfig) -> Result<()> {
    let mesh = load_mesh(&config.input, None)?;
    let ec = edem_config(config, &mesh)?;
    let init = initialize(config, &mesh, &ec.radii)?;
    let res = run_edem_from(&mesh, &init.positions, &ec)?;
    fs::write(config.output.join("trace.csv"), res.trace.to_csv())?;
    let distortion = res.map.report(Some(&res.density.rho_vertex))?;
    let report = RunReport {
        radii: res.map.radii,
        iterations: res.trace.records.last().map_or(0, |r| r.iteration),
        converged: res.trace.converged,
        distortion: &distortion,
        energy: None,
    };
    write_run(config, &res.map, &report)
}

fn edeq(config: &RunConfig) -> Result<()> {
    let mesh = load_mesh(&config.input, None)?;
    let ec = edeq_config(config, &mesh)?;
    let init = initialize(config, &mesh, &ec.radii)?;
    let res = run_edeq_from(&mesh, init, &ec)?;
    fs::write(config.output.join("energy.csv"), res.report.to_csv())?;
    let distortion = res.map.report(Some(&res.density.rho_vertex))?;
    let last = res.report.last();
    let report = RunReport {
        radii: res.map.radii,
        iterations: last.map_or(0, |r| r.iteration),
        converged: res.report.converged,
        distortion: &distortion,
        energy: last.map(|r| Energy {
            e_edem: r.e_edem,
            e_bc: r.e_bc,
            e: r.e,
            shape_updates: res.report.shape_updates.len(),
        }),
    };
    write_run(config, &res.map, &report)
}

fn remesh_cmd(config: &RunConfig) -> Result<()> {
    if config.target_vertices < MIN_TARGET_VERTICES {
        return Err(Error::TargetTooSmall(config.target_vertices));
    }
    let mesh = load_mesh(&config.input, None)?;
    let param = match config.method {
        Method::Fecm => fecm(&mesh, &config.radii()?)?,
        Method::Edem => {
            let ec = edem_config(config, &mesh)?;
            let init = initialize(config, &mesh, &ec.radii)?;
            run_edem_from(&mesh, &init.positions, &ec)?.map
        }
        Method::Edeq => {
            let ec = edeq_config(config, &mesh)?;
            let init = initialize(config, &mesh, &ec.radii)?;
            run_edeq_from(&mesh, init, &ec)?.map
        }
    };
    write_obj(&config.output.join("param.obj"), &param.positions, mesh.faces())?;
    let (remeshed, quality) = remesh(&param, config.target_vertices)?;
    write_obj(&config.output.join("remesh.obj"), remeshed.vertices(), remeshed.faces())?;
    let summary = RemeshSummary {
        method: config.method,
        target_vertices: config.target_vertices,
        radii: param.radii,
        delta_size: quality.delta_size,
        delta_shape: quality.delta_shape,
        vertex_count: quality.vertex_count,
        location_failures: 0,
    };
    write_json(&config.output.join("remesh.json"), &summary)?;
    log::info!(
        "remeshed to {} vertices: delta_size {:.4}, delta_shape {:.4}",
        summary.vertex_count,
        summary.delta_size,
        summary.delta_shape
    );
    Ok(())
}

fn metrics(config: &RunConfig) -> Result<()> {
    let source = load_mesh(&config.input, None)?;
    let param_path = config.param.as_ref().expect("materialized metrics config has a param mesh");
    let param = load_mesh(param_path, None)?;
    if !source.same_connectivity(&param) {
        return Err(Error::ConnectivityMismatch(format!(
            "{} and {} do not share vertex count and face list",
            config.input.display(),
            param_path.display()
        )));
    }
    let report = DistortionReport::new(&source, param.vertices(), None)?;
    write_json(&config.output.join("report.json"), &report)?;
    fs::write(config.output.join("faces.csv"), report.face_csv())?;
    Ok(())
}
