//! Coarse collocation solve of the single-layer equation on the unit
//! sphere for an axisymmetric incident field, used to cross-check the
//! series.
//!
//! The density depends on the polar angle only. Nodes are Gauss–Legendre
//! in `μ = cos θ` and equispaced in azimuth, collocation points are the
//! nodes at zero azimuth. The weak singularity is removed by writing
//! `e^{ikρ}/(4πρ) = (e^{ikρ} − 1)/(4πρ) + 1/(4πρ)` and using
//! `∫_{S²} dA_y / (4π|x − y|) = 1` for `x` on the sphere.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "gauss_legendre needs at least two nodes");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for m in 1..n {
                let p2 = ((2 * m + 1) as f64 * x * p1 - m as f64 * p0) / (m + 1) as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[derive(Clone, Debug)]
pub struct AxisymSolution {
    pub k: f64,
    pub mu: Vec<f64>,
    pub weights: Vec<f64>,
    pub n_phi: usize,
    /// Physical surface density at each `μ` node.
    pub density: Vec<Complex64>,
}

/// Solve `∫ Φ_k(x, y) σ(y) dA_y = −e^{ikz}` on the unit sphere.
pub fn axisym_sphere_solve(k: f64, n_mu: usize, n_phi: usize) -> Result<AxisymSolution> {
    if n_mu < 4 || n_phi < 8 {
        return Err(Error::Argument(format!("grid too coarse: {n_mu} x {n_phi}")));
    }
    let (mu, weights) = gauss_legendre(n_mu);
    let dphi = TAU / n_phi as f64;
    let inv4pi = 1.0 / (4.0 * PI);
    let ik = Complex64::new(0.0, k);
    let mut a = DMatrix::<Complex64>::zeros(n_mu, n_mu);
    for i in 0..n_mu {
        let xi = [(1.0 - mu[i] * mu[i]).sqrt(), 0.0, mu[i]];
        let mut static_sum = 0.0;
        for j in 0..n_mu {
            let sj = (1.0 - mu[j] * mu[j]).sqrt();
            let w = weights[j] * dphi;
            let mut smooth = Complex64::new(0.0, 0.0);
            let mut singular = 0.0;
            for l in 0..n_phi {
                let phi = dphi * l as f64;
                let y = [sj * phi.cos(), sj * phi.sin(), mu[j]];
                let rho = ((xi[0] - y[0]).powi(2) + (xi[1] - y[1]).powi(2) + (xi[2] - y[2]).powi(2)).sqrt();
                if rho == 0.0 {
                    smooth += ik * inv4pi;
                } else {
                    smooth += ((ik * rho).exp() - 1.0) * (inv4pi / rho);
                    singular += inv4pi / rho;
                }
            }
            a[(i, j)] = w * (smooth + singular);
            static_sum += w * singular;
        }
        a[(i, i)] += 1.0 - static_sum;
    }
    let b = DVector::from_fn(n_mu, |i, _| -Complex64::from_polar(1.0, k * mu[i]));
    let x = a
        .lu()
        .solve(&b)
        .ok_or(Error::Singular { condition: f64::INFINITY })?;
    Ok(AxisymSolution {
        k,
        mu,
        weights,
        n_phi,
        density: x.iter().copied().collect(),
    })
}

impl AxisymSolution {
    /// `u_∞(d) = (1/4π) ∫ e^{−ik d·y} σ(y) dA_y`.
    pub fn far_field(&self, d: [f64; 3]) -> Complex64 {
        let dphi = TAU / self.n_phi as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &mu) in self.mu.iter().enumerate() {
            let sj = (1.0 - mu * mu).sqrt();
            let mut ring = Complex64::new(0.0, 0.0);
            for l in 0..self.n_phi {
                let phi = dphi * l as f64;
                let dot = d[0] * sj * phi.cos() + d[1] * sj * phi.sin() + d[2] * mu;
                ring += Complex64::from_polar(1.0, -self.k * dot);
            }
            acc += self.weights[j] * dphi * ring * self.density[j];
        }
        acc / (4.0 * PI)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bie::{lat_lon_directions, relative_l2};
    use crate::oracles::sphere::SphereSeries;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let m14: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((m14 - 2.0 / 15.0).abs() < 1e-14);
    }

    fn compare(k: f64) -> f64 {
        let sol = axisym_sphere_solve(k, 48, 96).unwrap();
        let series = SphereSeries::new(k).unwrap();
        let dirs: Vec<[f64; 3]> = lat_lon_directions(24, 4).into_iter().map(|(_, _, d)| d).collect();
        let a: Vec<Complex64> = dirs.iter().map(|&d| sol.far_field(d)).collect();
        relative_l2(&a, &series.far_field_at(&dirs)).unwrap()
    }

    #[test]
    fn collocation_matches_series_at_two_pi() {
        let e = compare(TAU);
        assert!(e < 0.02, "{e}");
    }

    #[test]
    fn collocation_matches_series_off_resonance() {
        let e = compare(2.5);
        assert!(e < 0.02, "{e}");
    }
}
