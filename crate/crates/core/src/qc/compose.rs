use crate::error::{Error, Result};
use crate::par;
use crate::Complex;

use super::beltrami::{face_derivatives, BeltramiField};

/// μ of `g ∘ f` per face, given μ_f, the planar map `f` (source → target) and μ_g
/// sampled on the image faces:
/// `(μ_f + μ_g τ) / (1 + conj(μ_f) μ_g τ)` with `τ = conj(f_z) / f_z`.
pub fn compose_beltrami(
    mu_f: &[Complex],
    faces: &[[usize; 3]],
    source: &[Complex],
    target: &[Complex],
    mu_g: &[Complex],
) -> Result<BeltramiField> {
    par::try_map_range(faces.len(), |i| {
        let f = faces[i];
        let (fz, _) = face_derivatives(f.map(|v| source[v]), f.map(|v| target[v]))
            .ok_or(Error::DegenerateFace { face: i, area: 0.0 })?;
        if !(fz.norm() > 0.0) {
            return Err(Error::ConformalFactorZero(i));
        }
        let tau = fz.conj() / fz;
        let den = Complex::new(1.0, 0.0) + mu_f[i].conj() * mu_g[i] * tau;
        if den.norm() < 1e-14 {
            return Err(Error::DenominatorNearZero(i));
        }
        Ok((mu_f[i] + mu_g[i] * tau) / den)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qc::beltrami_of_planar_map;

    use crate::models::square_grid as grid;

    fn warp(z: Complex) -> Complex {
        z + Complex::new(0.15 * (3.0 * z.im).sin(), 0.1 * (2.0 * z.re).cos())
    }

    fn swirl(z: Complex) -> Complex {
        z * Complex::from_polar(1.0, 0.4 * z.norm_sqr()) + 0.2 * z.conj() * 0.3
    }

    #[test]
    fn conformal_outer_map_keeps_mu_f() {
        let (v, f) = grid(6);
        let t: Vec<Complex> = v.iter().map(|&z| warp(z)).collect();
        let mu_f = beltrami_of_planar_map(&f, &v, &t).unwrap();
        let zero = vec![Complex::new(0.0, 0.0); f.len()];
        assert_eq!(compose_beltrami(&mu_f, &f, &v, &t, &zero).unwrap(), mu_f);
    }

    #[test]
    fn identity_inner_map_gives_mu_g() {
        let (v, f) = grid(6);
        let mu_g: Vec<Complex> = (0..f.len()).map(|i| Complex::new(0.3, -0.1 * (i % 4) as f64)).collect();
        let zero = vec![Complex::new(0.0, 0.0); f.len()];
        let out = compose_beltrami(&zero, &f, &v, &v, &mu_g).unwrap();
        for (a, b) in out.iter().zip(&mu_g) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn matches_numerical_composition() {
        let (v, f) = grid(96);
        let fv: Vec<Complex> = v.iter().map(|&z| warp(z)).collect();
        let gfv: Vec<Complex> = fv.iter().map(|&z| swirl(z)).collect();
        let mu_f = beltrami_of_planar_map(&f, &v, &fv).unwrap();
        let mu_g = beltrami_of_planar_map(&f, &fv, &gfv).unwrap();
        let composed = compose_beltrami(&mu_f, &f, &v, &fv, &mu_g).unwrap();
        let direct = beltrami_of_planar_map(&f, &v, &gfv).unwrap();
        let err = composed.iter().zip(&direct).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 0.05, "{err}");
    }
}
