//! Run configuration: built-in defaults, then an optional JSON file, then flags.

use std::path::{Path, PathBuf};

use edeq_core::edem::Population;
use edeq_core::io::read_population_csv;
use edeq_core::{EllipsoidRadii, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Edem,
    Edeq,
    Remesh,
    Metrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fecm,
    Edem,
    Edeq,
}

/// Every setting of a run, fully materialized. Written as `config.json` beside
/// the outputs so the run can be repeated with `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// Source mesh.
    pub input: PathBuf,
    /// Parameterization mesh (metrics only).
    pub param: Option<PathBuf>,
    pub output: PathBuf,
    /// `area`, `uniform` or `csv:<path>`.
    pub population: String,
    pub radii: [f64; 3],
    pub dt: f64,
    pub epsilon: f64,
    pub n_max: usize,
    pub alpha: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub db: f64,
    pub dc: f64,
    pub method: Method,
    pub target_vertices: usize,
    pub seed: u64,
    pub log_every: usize,
    /// Also write the per-face distortion CSV for edem and edeq runs.
    pub face_csv: bool,
}

/// A configuration layer; unset fields fall through to the layer below.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartialConfig {
    pub command: Option<Command>,
    pub input: Option<PathBuf>,
    pub param: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub population: Option<String>,
    pub radii: Option<[f64; 3]>,
    pub dt: Option<f64>,
    pub epsilon: Option<f64>,
    pub n_max: Option<usize>,
    pub alpha: Option<f64>,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub db: Option<f64>,
    pub dc: Option<f64>,
    pub method: Option<Method>,
    pub target_vertices: Option<usize>,
    pub seed: Option<u64>,
    pub log_every: Option<usize>,
    pub face_csv: Option<bool>,
}

macro_rules! overlay {
    ($lo:expr, $hi:expr, $($f:ident),*) => {
        PartialConfig { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl PartialConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("config {}: {e}", path.display())))
    }

    /// `other` wins wherever it is set.
    pub fn overlay(self, other: PartialConfig) -> Self {
        overlay!(
            self, other, command, input, param, output, population, radii, dt, epsilon, n_max, alpha, k, db, dc,
            method, target_vertices, seed, log_every, face_csv
        )
    }

    /// Fills every unset field with the default for `command`.
    pub fn materialize(self, command: Command) -> Result<RunConfig> {
        if let Some(c) = self.command {
            if c != command {
                return Err(Error::InvalidInput(format!("config is for {c:?}, not {command:?}").to_lowercase()));
            }
        }
        let input = self.input.ok_or_else(|| Error::InvalidInput("no input mesh given".into()))?;
        if command == Command::Metrics && self.param.is_none() {
            return Err(Error::InvalidInput("no parameterization mesh given".into()));
        }
        let method = self.method.unwrap_or(Method::Edeq);
        let epsilon = match (command, method) {
            (Command::Edem, _) | (Command::Remesh, Method::Edem) => 1e-3,
            _ => 1e-5,
        };
        let config = RunConfig {
            command,
            input,
            param: self.param,
            output: self.output.unwrap_or_else(|| PathBuf::from("out")),
            population: self.population.unwrap_or_else(|| "area".into()),
            radii: self.radii.unwrap_or([1.0, 1.0, 1.0]),
            dt: self.dt.unwrap_or(0.1),
            epsilon: self.epsilon.unwrap_or(epsilon),
            n_max: self.n_max.unwrap_or(300),
            alpha: self.alpha.unwrap_or(1.0),
            k: self.k.unwrap_or(5),
            db: self.db.unwrap_or(0.1),
            dc: self.dc.unwrap_or(0.1),
            method,
            target_vertices: self.target_vertices.unwrap_or(8500),
            seed: self.seed.unwrap_or(0),
            log_every: self.log_every.unwrap_or(10),
            face_csv: self.face_csv.unwrap_or(false),
        };
        config.validate()?;
        Ok(config)
    }
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidInput(m.into()));
        if !(self.alpha >= 0.0) {
            return fail("alpha must be nonnegative");
        }
        if !(self.dt > 0.0) || !(self.epsilon > 0.0) {
            return fail("dt and epsilon must be positive");
        }
        if self.k == 0 {
            return fail("K must be positive");
        }
        if !(self.db >= 0.0) || !(self.dc >= 0.0) {
            return fail("db and dc must be nonnegative");
        }
        self.radii()?;
        parse_population(&self.population)?;
        Ok(())
    }

    pub fn radii(&self) -> Result<EllipsoidRadii> {
        let [a, b, c] = self.radii;
        EllipsoidRadii::new(a, b, c)
    }

    /// Resolves the population spec against a mesh with `num_faces` faces.
    pub fn population(&self, num_faces: usize) -> Result<Population> {
        Ok(match parse_population(&self.population)? {
            PopulationSpec::Area => Population::Area,
            PopulationSpec::Uniform => Population::Uniform,
            PopulationSpec::Csv(path) => Population::Values(read_population_csv(&path, num_faces)?),
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

enum PopulationSpec {
    Area,
    Uniform,
    Csv(PathBuf),
}

fn parse_population(spec: &str) -> Result<PopulationSpec> {
    match spec {
        "area" => Ok(PopulationSpec::Area),
        "uniform" => Ok(PopulationSpec::Uniform),
        _ => match spec.strip_prefix("csv:") {
            Some(p) if !p.is_empty() => Ok(PopulationSpec::Csv(PathBuf::from(p))),
            _ => Err(Error::InvalidInput(format!("unknown population {spec:?}; use area, uniform or csv:<path>"))),
        },
    }
}

/// `a,b,c` or `sphere`.
pub fn parse_radii(s: &str) -> std::result::Result<[f64; 3], String> {
    if s == "sphere" {
        return Ok([1.0, 1.0, 1.0]);
    }
    let parts: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad radius {t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match parts[..] {
        [a, b, c] => Ok([a, b, c]),
        _ => Err(format!("expected three radii a,b,c, got {}", parts.len())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_input() -> PartialConfig {
        PartialConfig { input: Some("m.obj".into()), ..Default::default() }
    }

    #[test]
    fn flags_win_over_file() {
        let file = PartialConfig { dt: Some(0.2), alpha: Some(3.0), ..with_input() };
        let flags = PartialConfig { dt: Some(0.05), ..Default::default() };
        let c = file.overlay(flags).materialize(Command::Edeq).unwrap();
        assert_eq!(c.dt, 0.05);
        assert_eq!(c.alpha, 3.0);
    }

    #[test]
    fn epsilon_default_depends_on_command() {
        assert_eq!(with_input().materialize(Command::Edem).unwrap().epsilon, 1e-3);
        assert_eq!(with_input().materialize(Command::Edeq).unwrap().epsilon, 1e-5);
        let remesh = PartialConfig { method: Some(Method::Edem), ..with_input() };
        assert_eq!(remesh.materialize(Command::Remesh).unwrap().epsilon, 1e-3);
    }

    #[test]
    fn canonical_json_round_trips() {
        let c = with_input().materialize(Command::Edeq).unwrap();
        let back: PartialConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back.materialize(Command::Edeq).unwrap(), c);
        assert!(c.to_json().contains("\"K\": 5"));
    }

    #[test]
    fn command_mismatch_is_rejected() {
        let p = PartialConfig { command: Some(Command::Edem), ..with_input() };
        assert!(p.materialize(Command::Edeq).is_err());
    }

    #[test]
    fn radii_parsing() {
        assert_eq!(parse_radii("sphere").unwrap(), [1.0, 1.0, 1.0]);
        assert_eq!(parse_radii("1, 2,4").unwrap(), [1.0, 2.0, 4.0]);
        assert!(parse_radii("1,2").is_err());
        assert!(parse_radii("1,x,2").is_err());
    }

    #[test]
    fn bad_population_and_radii_are_validation_errors() {
        let p = PartialConfig { population: Some("volume".into()), ..with_input() };
        assert!(p.materialize(Command::Edem).is_err());
        let p = PartialConfig { radii: Some([1.0, -1.0, 1.0]), ..with_input() };
        assert!(p.materialize(Command::Edem).is_err());
        let p = PartialConfig { alpha: Some(-1.0), ..with_input() };
        assert!(p.materialize(Command::Edeq).unwrap_err().to_string().contains("alpha must be nonnegative"));
    }
}
