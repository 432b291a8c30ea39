use crate::error::{Error, Result};
use crate::{Complex, Vec3};

pub(crate) fn infinity() -> Complex {
    Complex::new(f64::INFINITY, 0.0)
}

pub(crate) fn is_infinite(z: Complex) -> bool {
    !z.re.is_finite() || !z.im.is_finite()
}

/// `z ↦ (z − z₀) / (z − z_∞)` with `z₀ = points[p0]`, `z_∞ = points[pinf]`; when
/// `z_∞` is already infinite this is the translation `z − z₀`.
pub fn mobius_normalize(points: &[Complex], p0: usize, pinf: usize) -> Result<Vec<Complex>> {
    let (z0, zinf) = (points[p0], points[pinf]);
    if p0 == pinf || z0 == zinf || is_infinite(z0) {
        return Err(Error::CoincidentPoles);
    }
    Ok(points
        .iter()
        .map(|&z| {
            if is_infinite(zinf) {
                z - z0
            } else if is_infinite(z) {
                Complex::new(1.0, 0.0)
            } else if z == zinf {
                infinity()
            } else {
                (z - z0) / (z - zinf)
            }
        })
        .collect())
}

/// Sphere automorphism sending the interior point `c` to the origin.
fn mobius_ball(x: &Vec3, c: &Vec3) -> Vec3 {
    let d = x - c;
    let d2 = d.norm_squared();
    (d * (1.0 - c.norm_squared()) - c * d2) / d2
}

/// Composes unit-sphere positions with Möbius transformations until the weighted
/// centroid is at the origin (to `1e-12`, at most 200 rounds).
pub fn balance_on_sphere(points: &mut [Vec3], weights: &[f64]) {
    let total: f64 = weights.iter().sum();
    let centroid =
        |p: &[Vec3]| p.iter().zip(weights).fold(Vec3::zeros(), |acc, (q, w)| acc + q * *w) / total;
    let mut c = centroid(points);
    for _ in 0..200 {
        if c.norm() < 1e-12 {
            break;
        }
        let mut step = 1.0;
        loop {
            let moved: Vec<Vec3> = points.iter().map(|p| mobius_ball(p, &(c * step)).normalize()).collect();
            let next = centroid(&moved);
            if next.norm() < c.norm() || step < 1e-3 {
                points.copy_from_slice(&moved);
                c = next;
                break;
            }
            step *= 0.5;
        }
    }
}
