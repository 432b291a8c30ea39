//! OBJ / OFF mesh files and per-face population CSV.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Off,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("obj") => Ok(Self::Obj),
            Some("off") => Ok(Self::Off),
            other => Err(Error::InvalidInput(format!(
                "cannot infer mesh format from extension {other:?}"
            ))),
        }
    }
}

/// Reads and validates a mesh. The format is inferred from the extension when
/// `format` is `None`.
pub fn load_mesh(path: &Path, format: Option<MeshFormat>) -> Result<TriMesh> {
    let format = match format {
        Some(f) => f,
        None => MeshFormat::from_path(path)?,
    };
    let text = fs::read_to_string(path)?;
    let (v, f) = match format {
        MeshFormat::Obj => parse_obj(&text)?,
        MeshFormat::Off => parse_off(&text)?,
    };
    TriMesh::new(v, f)
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_f64(tok: Option<&str>, line: usize) -> Result<f64> {
    let tok = tok.ok_or_else(|| parse_err(line, "missing coordinate"))?;
    let x: f64 = tok.parse().map_err(|_| parse_err(line, format!("bad number {tok:?}")))?;
    if !x.is_finite() {
        return Err(parse_err(line, "non-finite coordinate"));
    }
    Ok(x)
}

/// Parses `v` and `f` records; other records are ignored. Face indices may carry
/// `/vt/vn` suffixes and may be negative (relative).
pub fn parse_obj(text: &str) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = no + 1;
        let mut toks = raw.split_whitespace();
        match toks.next() {
            Some("v") => {
                let x = parse_f64(toks.next(), line)?;
                let y = parse_f64(toks.next(), line)?;
                let z = parse_f64(toks.next(), line)?;
                vertices.push(Vec3::new(x, y, z));
            }
            Some("f") => {
                let idx: Vec<usize> = toks
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let i: i64 = head
                            .parse()
                            .map_err(|_| parse_err(line, format!("bad face index {t:?}")))?;
                        let n = vertices.len() as i64;
                        let resolved = if i > 0 { i - 1 } else { n + i };
                        if i == 0 || resolved < 0 {
                            return Err(parse_err(line, format!("face index {i} out of range")));
                        }
                        Ok(resolved as usize)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() != 3 {
                    return Err(parse_err(line, format!("only triangles are supported, got {} vertices", idx.len())));
                }
                faces.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    if let Some(bad) = faces.iter().flatten().find(|&&i| i >= vertices.len()) {
        return Err(parse_err(0, format!("face index {} out of range", bad + 1)));
    }
    Ok((vertices, faces))
}

pub fn parse_off(text: &str) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let mut counts_line = None;
    if let Some(rest) = header.strip_prefix("OFF") {
        if !rest.trim().is_empty() {
            counts_line = Some((hl, rest.trim()));
        }
    } else {
        return Err(parse_err(hl, "missing OFF header"));
    }
    let (cl, counts) = match counts_line {
        Some(c) => c,
        None => lines.next().ok_or_else(|| parse_err(hl, "missing element counts"))?,
    };
    let nums: Vec<usize> = counts
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(cl, format!("bad count {t:?}"))))
        .collect::<Result<_>>()?;
    if nums.len() < 2 {
        return Err(parse_err(cl, "expected vertex and face counts"));
    }
    let (nv, nf) = (nums[0], nums[1]);
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, l) = lines.next().ok_or_else(|| parse_err(0, "unexpected end of file in vertices"))?;
        let mut t = l.split_whitespace();
        let x = parse_f64(t.next(), line)?;
        let y = parse_f64(t.next(), line)?;
        let z = parse_f64(t.next(), line)?;
        vertices.push(Vec3::new(x, y, z));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (line, l) = lines.next().ok_or_else(|| parse_err(0, "unexpected end of file in faces"))?;
        let vals: Vec<usize> = l
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err(line, format!("bad index {t:?}"))))
            .collect::<Result<_>>()?;
        if vals.first() != Some(&3) || vals.len() < 4 {
            return Err(parse_err(line, "only triangles are supported"));
        }
        if vals[1..4].iter().any(|&i| i >= nv) {
            return Err(parse_err(line, "face index out of range"));
        }
        faces.push([vals[1], vals[2], vals[3]]);
    }
    Ok((vertices, faces))
}

/// Writes OBJ with 1-based indices and full round-trip float precision.
pub fn write_obj(path: &Path, vertices: &[Vec3], faces: &[[usize; 3]]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for v in vertices {
        writeln!(w, "v {:?} {:?} {:?}", v.x, v.y, v.z)?;
    }
    for f in faces {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    w.flush()?;
    Ok(())
}

/// One positive value per line; row `i` is face `i`. Blank lines are skipped.
pub fn read_population_csv(path: &Path, num_faces: usize) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::with_capacity(num_faces);
    for (no, raw) in text.lines().enumerate() {
        let tok = raw.split(',').next().unwrap_or("").trim();
        if tok.is_empty() {
            continue;
        }
        let x: f64 = tok.parse().map_err(|_| parse_err(no + 1, format!("bad population {tok:?}")))?;
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::InvalidInput(format!(
                "population must be positive (line {}: {tok})",
                no + 1
            )));
        }
        values.push(x);
    }
    if values.len() != num_faces {
        return Err(Error::InvalidInput(format!(
            "population has {} entries but the mesh has {num_faces} faces",
            values.len()
        )));
    }
    Ok(values)
}
