use crate::error::{Error, Result};
use crate::{Complex, EllipsoidRadii, Vec3};

/// Projection centre of a stereographic chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pole {
    /// `(x, y, z) ↦ (x, y) / (1 − z)`, defined away from `(0, 0, 1)`.
    North,
    /// `(x, y, z) ↦ (x, y) / (1 + z)`, defined away from `(0, 0, −1)`.
    South,
}

impl Pole {
    pub fn point(self) -> Vec3 {
        match self {
            Pole::North => Vec3::z(),
            Pole::South => -Vec3::z(),
        }
    }
}

/// Distance below which a point counts as the projection pole.
const POLE_EPS: f64 = 1e-12;

pub fn stereographic(p: &Vec3, pole: Pole) -> Option<Complex> {
    if (p - pole.point()).norm() < POLE_EPS {
        return None;
    }
    let d = match pole {
        Pole::North => 1.0 - p.z,
        Pole::South => 1.0 + p.z,
    };
    Some(Complex::new(p.x / d, p.y / d))
}

pub fn stereographic_all(points: &[Vec3], pole: Pole) -> Result<Vec<Complex>> {
    points.iter().enumerate().map(|(i, p)| stereographic(p, pole).ok_or(Error::Pole(i))).collect()
}

/// Inverse of [`stereographic`]; an infinite `w` maps to the pole.
pub fn inverse_stereographic(w: Complex, pole: Pole) -> Vec3 {
    if !w.re.is_finite() || !w.im.is_finite() {
        return pole.point();
    }
    let r2 = w.norm_sqr();
    let (xy, z) = if r2 <= 1.0 {
        (w * (2.0 / (1.0 + r2)), (r2 - 1.0) / (r2 + 1.0))
    } else {
        let inv = 1.0 / r2;
        (w * (2.0 * inv / (1.0 + inv)), (1.0 - inv) / (1.0 + inv))
    };
    match pole {
        Pole::North => Vec3::new(xy.re, xy.im, z),
        Pole::South => Vec3::new(xy.re, xy.im, -z),
    }
}

/// Unit-sphere inverse stereographic image (north-pole convention) scaled by `h⁻¹`.
pub fn inverse_ellipsoidal_stereographic(points: &[Complex], radii: &EllipsoidRadii) -> Vec<Vec3> {
    points.iter().map(|&w| radii.from_sphere(&inverse_stereographic(w, Pole::North))).collect()
}
