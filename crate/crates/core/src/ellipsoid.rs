//! The target domain `x²/a² + y²/b² + z²/c² = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::Vec3;

/// Positive semi-axes `(a, b, c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidRadii {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl EllipsoidRadii {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        for (name, r) in [("a", a), ("b", b), ("c", c)] {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::InvalidInput(format!("radius {name} must be positive, got {r}")));
            }
        }
        Ok(Self { a, b, c })
    }

    pub const fn unit() -> Self {
        Self { a: 1.0, b: 1.0, c: 1.0 }
    }

    pub fn as_vec(&self) -> Vec3 {
        Vec3::new(self.a, self.b, self.c)
    }

    /// `x²/a² + y²/b² + z²/c²`.
    pub fn level(&self, p: &Vec3) -> f64 {
        (p.x / self.a).powi(2) + (p.y / self.b).powi(2) + (p.z / self.c).powi(2)
    }

    /// Outward unit normal at (or near) `p`.
    pub fn normal(&self, p: &Vec3) -> Option<Vec3> {
        let g = Vec3::new(p.x / (self.a * self.a), p.y / (self.b * self.b), p.z / (self.c * self.c));
        let n = g.norm();
        (n > 0.0).then(|| g / n)
    }

    /// Radial projection onto the surface.
    pub fn project(&self, p: &Vec3) -> Option<Vec3> {
        let s = self.level(p).sqrt();
        (s > 0.0 && s.is_finite()).then(|| p / s)
    }

    /// `h(x, y, z) = (x/a, y/b, z/c)`, carrying the ellipsoid onto the unit sphere.
    pub fn to_sphere(&self, p: &Vec3) -> Vec3 {
        Vec3::new(p.x / self.a, p.y / self.b, p.z / self.c)
    }

    /// Inverse of [`Self::to_sphere`].
    pub fn from_sphere(&self, p: &Vec3) -> Vec3 {
        Vec3::new(p.x * self.a, p.y * self.b, p.z * self.c)
    }

    pub fn bounding_radius(&self) -> f64 {
        self.a.max(self.b).max(self.c)
    }
}

impl std::fmt::Display for EllipsoidRadii {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.a, self.b, self.c)
    }
}

pub fn vertex_normals_ellipsoid(positions: &[Vec3], radii: &EllipsoidRadii) -> Result<Vec<Vec3>> {
    par::try_map_range(positions.len(), |i| radii.normal(&positions[i]).ok_or(Error::ZeroVector(i)))
}

pub fn project_to_ellipsoid(positions: &[Vec3], radii: &EllipsoidRadii) -> Result<Vec<Vec3>> {
    par::try_map_range(positions.len(), |i| radii.project(&positions[i]).ok_or(Error::ZeroVector(i)))
}

/// Largest ellipsoid-equation residual `|level(p) - 1|`.
pub fn max_level_residual(positions: &[Vec3], radii: &EllipsoidRadii) -> f64 {
    positions.iter().map(|p| (radii.level(p) - 1.0).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn radii_must_be_positive() {
        assert!(EllipsoidRadii::new(1.0, 0.0, 1.0).is_err());
        assert!(EllipsoidRadii::new(1.0, 1.0, f64::NAN).is_err());
        assert!(EllipsoidRadii::new(1.0, 2.0, 4.0).is_ok());
    }

    #[test]
    fn normals_at_axis_points() {
        let r = EllipsoidRadii::new(1.0, 2.0, 4.0).unwrap();
        let n = vertex_normals_ellipsoid(&[Vec3::new(0.0, 0.0, 4.0), Vec3::new(1.0, 0.0, 0.0)], &r).unwrap();
        assert!(close(n[0], Vec3::z(), 1e-15));
        assert!(close(n[1], Vec3::x(), 1e-15));
    }

    #[test]
    fn sphere_normal_is_radial() {
        let p = Vec3::new(1.0, -2.0, 0.5).normalize();
        let n = vertex_normals_ellipsoid(&[p], &EllipsoidRadii::unit()).unwrap();
        assert!(close(n[0], p, 1e-15));
    }

    #[test]
    fn normal_of_origin_is_an_error() {
        let e = vertex_normals_ellipsoid(&[Vec3::x(), Vec3::zeros()], &EllipsoidRadii::unit());
        assert!(matches!(e, Err(Error::ZeroVector(1))));
    }

    #[test]
    fn projection_examples() {
        let unit = EllipsoidRadii::unit();
        let r = EllipsoidRadii::new(1.0, 2.0, 4.0).unwrap();
        assert_eq!(project_to_ellipsoid(&[Vec3::new(2.0, 0.0, 0.0)], &unit).unwrap()[0], Vec3::x());
        assert!(close(project_to_ellipsoid(&[Vec3::new(0.0, 4.0, 0.0)], &r).unwrap()[0], Vec3::new(0.0, 2.0, 0.0), 1e-15));
        let on = Vec3::new(0.0, 2.0, 0.0);
        assert!(close(project_to_ellipsoid(&[on], &r).unwrap()[0], on, 1e-15));
    }

    #[test]
    fn h_round_trip() {
        let r = EllipsoidRadii::new(1.0, 2.0, 4.0).unwrap();
        let p = Vec3::new(0.3, -1.1, 2.5);
        assert!(close(r.from_sphere(&r.to_sphere(&p)), p, 1e-15));
    }
}
