use crate::error::{Error, Result};
use crate::par;
use crate::{Complex, Vec3};

/// One complex Beltrami coefficient per face.
pub type BeltramiField = Vec<Complex>;

/// `f_z` below this fraction of `|f_z| + |f_z̄|` is treated as zero.
const CONFORMAL_FACTOR_EPS: f64 = 1e-14;

/// `(f_z, f_z̄)` of the affine map sending triangle `s` to triangle `t`, or `None`
/// when `s` is degenerate.
pub fn face_derivatives(s: [Complex; 3], t: [Complex; 3]) -> Option<(Complex, Complex)> {
    let (dz1, dz2) = (s[1] - s[0], s[2] - s[0]);
    let (df1, df2) = (t[1] - t[0], t[2] - t[0]);
    let d = dz1 * dz2.conj() - dz2 * dz1.conj();
    let scale = dz1.norm_sqr().max(dz2.norm_sqr());
    if !(d.norm() > 1e-14 * scale) {
        return None;
    }
    let fz = (df1 * dz2.conj() - df2 * dz1.conj()) / d;
    let fzbar = (dz1 * df2 - dz2 * df1) / d;
    Some((fz, fzbar))
}

/// μ of one planar triangle pair; `face` only labels errors.
pub fn planar_face_beltrami(face: usize, s: [Complex; 3], t: [Complex; 3]) -> Result<Complex> {
    let (fz, fzbar) = face_derivatives(s, t).ok_or(Error::DegenerateFace { face, area: 0.0 })?;
    if !(fz.norm() > CONFORMAL_FACTOR_EPS * (fz.norm() + fzbar.norm())) {
        return Err(Error::ConformalFactorZero(face));
    }
    Ok(fzbar / fz)
}

pub fn beltrami_of_planar_map(faces: &[[usize; 3]], source: &[Complex], target: &[Complex]) -> Result<BeltramiField> {
    par::try_map_range(faces.len(), |i| {
        let f = faces[i];
        planar_face_beltrami(i, f.map(|v| source[v]), f.map(|v| target[v]))
    })
}

/// Rigid placement of a 3D triangle in the plane: first vertex at 0, first edge on
/// the positive real axis, third vertex in the upper half plane.
pub fn flatten_triangle(p: [Vec3; 3]) -> Option<[Complex; 3]> {
    let e1 = p[1] - p[0];
    let e2 = p[2] - p[0];
    let l1 = e1.norm();
    let h = e1.cross(&e2).norm() / l1;
    if !(l1 > 0.0) || !(h > 0.0) {
        return None;
    }
    Some([Complex::new(0.0, 0.0), Complex::new(l1, 0.0), Complex::new(e2.dot(&e1) / l1, h)])
}

/// μ per face of a surface-to-surface map, each triangle pair flattened rigidly.
pub fn beltrami_of_surface_map(faces: &[[usize; 3]], source: &[Vec3], target: &[Vec3]) -> Result<BeltramiField> {
    par::try_map_range(faces.len(), |i| {
        let f = faces[i];
        let s = flatten_triangle(f.map(|v| source[v])).ok_or(Error::DegenerateFace { face: i, area: 0.0 })?;
        let t = flatten_triangle(f.map(|v| target[v])).ok_or(Error::DegenerateFace { face: i, area: 0.0 })?;
        planar_face_beltrami(i, s, t)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use nalgebra::{Rotation3, Unit};

    use crate::models::square_grid as grid;

    #[test]
    fn identity_is_conformal() {
        let (v, f) = grid(4);
        let mu = beltrami_of_planar_map(&f, &v, &v).unwrap();
        assert!(mu.iter().all(|m| m.norm() == 0.0));
    }

    #[test]
    fn horizontal_stretch() {
        let (v, f) = grid(4);
        let t: Vec<Complex> = v.iter().map(|z| Complex::new(2.0 * z.re, z.im)).collect();
        for m in beltrami_of_planar_map(&f, &v, &t).unwrap() {
            assert!((m - Complex::new(1.0 / 3.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn shear() {
        let (v, f) = grid(3);
        let t: Vec<Complex> = v.iter().map(|z| Complex::new(z.re + 0.1 * z.im, z.im)).collect();
        let expected = Complex::new(0.0, 0.1) / Complex::new(2.0, -0.1);
        for m in beltrami_of_planar_map(&f, &v, &t).unwrap() {
            assert!((m - expected).norm() < 1e-14);
            assert!((m.norm() - 0.049938).abs() < 1e-6);
        }
    }

    #[test]
    fn collapsed_image_has_zero_conformal_factor() {
        let s = [Complex::new(0.0, 0.0), Complex::new(1.0, 0.0), Complex::new(0.0, 1.0)];
        // Orientation-reversing reflection: f = z̄.
        let t = s.map(|z| z.conj());
        assert!(matches!(planar_face_beltrami(7, s, t), Err(Error::ConformalFactorZero(7))));
    }

    #[test]
    fn surface_map_rigid_invariance() {
        let m = models::bumpy_ellipsoid(4);
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::new(0.3, -1.0, 2.0)), 1.1);
        let moved: Vec<Vec3> = m.vertices().iter().map(|p| rot * p + Vec3::new(3.0, -1.0, 0.5)).collect();
        let id = beltrami_of_surface_map(m.faces(), m.vertices(), m.vertices()).unwrap();
        let rigid = beltrami_of_surface_map(m.faces(), m.vertices(), &moved).unwrap();
        assert!(id.iter().all(|z| z.norm() < 1e-12));
        assert!(rigid.iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn surface_face_stretched_along_first_edge() {
        let p = [Vec3::new(0.2, 0.1, 0.3), Vec3::new(1.0, 0.5, 0.0), Vec3::new(0.1, 1.2, 0.7)];
        let e = (p[1] - p[0]).normalize();
        let stretch = |q: Vec3| p[0] + (q - p[0]) + e * e.dot(&(q - p[0]));
        let q = p.map(stretch);
        let mu = beltrami_of_surface_map(&[[0, 1, 2]], &p, &q).unwrap();
        assert!((mu[0].norm() - 1.0 / 3.0).abs() < 1e-12);
    }
}
