use crate::fem::lumped_mass;
use crate::mesh::TriMesh;
use crate::Complex;

use super::mobius::is_infinite;

/// Percentile levels and the moduli they are sent to. For uniformly distributed
/// points on the sphere, the stereographic modulus `sqrt(p / (1 − p))` has
/// percentile `p`, which gives `1/2, 1, 2` at 20 %, 50 % and 80 %.
const KNOTS: [(f64, f64); 3] = [(0.2, 0.5), (0.5, 1.0), (0.8, 2.0)];

/// Weighted percentile `p` of `values` (sorted by value, cumulative weight).
fn weighted_percentile(values: &[(f64, f64)], p: f64) -> f64 {
    let total: f64 = values.iter().map(|v| v.1).sum();
    let mut acc = 0.0;
    for &(x, w) in values {
        acc += w;
        if acc >= p * total {
            return x;
        }
    }
    values.last().map(|v| v.0).unwrap_or(0.0)
}

/// Radial rescaling `z ↦ z · s(|z|)`, piecewise linear in log-modulus, that moves
/// the weighted 20th/50th/80th modulus percentiles to `1/2, 1, 2`. Zero and
/// infinite points are fixed.
pub fn rescale_distribution_weighted(points: &[Complex], weights: &[f64]) -> Vec<Complex> {
    let mut logs: Vec<(f64, f64)> = points
        .iter()
        .zip(weights)
        .filter(|(z, _)| !is_infinite(**z) && z.norm() > 0.0)
        .map(|(z, &w)| (z.norm().ln(), w))
        .collect();
    if logs.is_empty() {
        return points.to_vec();
    }
    logs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let xs: Vec<f64> = KNOTS.iter().map(|k| weighted_percentile(&logs, k.0)).collect();
    let ys: Vec<f64> = KNOTS.iter().map(|k| k.1.ln()).collect();
    let g: Box<dyn Fn(f64) -> f64> = if xs[0] < xs[1] && xs[1] < xs[2] {
        let s0 = (ys[1] - ys[0]) / (xs[1] - xs[0]);
        let s1 = (ys[2] - ys[1]) / (xs[2] - xs[1]);
        Box::new(move |t: f64| if t < xs[1] { ys[1] + s0 * (t - xs[1]) } else { ys[1] + s1 * (t - xs[1]) })
    } else {
        let m = xs[1];
        Box::new(move |t: f64| t - m)
    };
    points
        .iter()
        .map(|&z| {
            if is_infinite(z) || z.norm() == 0.0 {
                z
            } else {
                let t = z.norm().ln();
                z * (g(t) - t).exp()
            }
        })
        .collect()
}

/// [`rescale_distribution_weighted`] with the mesh's vertex areas as weights.
pub fn rescale_distribution(points: &[Complex], mesh: &TriMesh) -> Vec<Complex> {
    rescale_distribution_weighted(points, &lumped_mass(mesh, mesh.vertices()).0)
}
