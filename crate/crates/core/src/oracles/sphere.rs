//! Separation-of-variables solution for a plane wave `e^{ikz}` scattered by
//! the sound-soft unit sphere.
//!
//! Expanding `e^{ikz} = Σ iⁿ (2n+1) jₙ(kr) Pₙ(cos θ)` and imposing
//! `u^s = −u^i` on `r = 1` gives
//! `u^s = −Σ iⁿ (2n+1) (jₙ(k)/hₙ(k)) hₙ(kr) Pₙ(cos θ)`, and with
//! `hₙ(x) ~ (−i)ⁿ⁺¹ eⁱˣ/x` the far field
//! `u_∞(θ) = (i/k) Σ (2n+1) (jₙ(k)/hₙ(k)) Pₙ(cos θ)`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative size below which a series term counts as negligible.
pub const TERM_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_TERMS: usize = 200;

/// Spherical Bessel functions `j_0..=j_n` at `x > 0` by downward recurrence,
/// normalized against whichever of `j_0`, `j_1` is larger in magnitude.
pub fn spherical_j(n: usize, x: f64) -> Vec<f64> {
    assert!(x > 0.0, "spherical_j needs x > 0");
    let start = n + 20 + x.ceil() as usize;
    let mut vals = vec![0.0; start + 2];
    vals[start] = 1e-300;
    for m in (1..=start).rev() {
        vals[m - 1] = (2 * m + 1) as f64 / x * vals[m] - vals[m + 1];
        if vals[m - 1].abs() > 1e250 {
            for v in vals.iter_mut().skip(m - 1) {
                *v *= 1e-250;
            }
        }
    }
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    let j1 = s / (x * x) - c / x;
    let scale = if j0.abs() >= j1.abs() { j0 / vals[0] } else { j1 / vals[1] };
    vals.truncate(n + 1);
    vals.iter_mut().for_each(|v| *v *= scale);
    vals
}

/// Spherical Neumann functions `y_0..=y_n` by upward recurrence.
pub fn spherical_y(n: usize, x: f64) -> Vec<f64> {
    assert!(x > 0.0, "spherical_y needs x > 0");
    let (s, c) = x.sin_cos();
    let mut vals = Vec::with_capacity(n + 1);
    vals.push(-c / x);
    if n >= 1 {
        vals.push(-c / (x * x) - s / x);
    }
    for m in 1..n {
        let next = (2 * m + 1) as f64 / x * vals[m] - vals[m - 1];
        vals.push(next);
    }
    vals
}

/// Spherical Hankel functions of the first kind, `h_n = j_n + i y_n`.
pub fn spherical_h(n: usize, x: f64) -> Vec<Complex64> {
    spherical_j(n, x)
        .into_iter()
        .zip(spherical_y(n, x))
        .map(|(j, y)| Complex64::new(j, y))
        .collect()
}

/// Legendre polynomials `P_0..=P_n` at `mu`.
pub fn legendre(n: usize, mu: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(n + 1);
    p.push(1.0);
    if n >= 1 {
        p.push(mu);
    }
    for m in 1..n {
        let next = ((2 * m + 1) as f64 * mu * p[m] - m as f64 * p[m - 1]) / (m + 1) as f64;
        p.push(next);
    }
    p
}

#[derive(Clone, Debug)]
pub struct SphereSeries {
    k: f64,
    /// `(2n+1) j_n(k) / h_n(k)`.
    coeffs: Vec<Complex64>,
}

impl SphereSeries {
    pub fn new(k: f64) -> Result<Self> {
        Self::with_max_terms(k, DEFAULT_MAX_TERMS)
    }

    /// Truncate once two consecutive terms past `n = k` fall below
    /// [`TERM_TOL`] relative to the largest; error if that does not happen
    /// within `max_terms`.
    pub fn with_max_terms(k: f64, max_terms: usize) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Argument(format!("wavenumber must be positive, got {k}")));
        }
        let all = Self::coefficients(k, max_terms);
        let largest = all.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mut small_run = 0;
        for (n, c) in all.iter().enumerate() {
            if n as f64 > k && c.norm() <= TERM_TOL * largest {
                small_run += 1;
                if small_run == 2 {
                    return Ok(Self {
                        k,
                        coeffs: all[..=n].to_vec(),
                    });
                }
            } else {
                small_run = 0;
            }
        }
        Err(Error::Series(format!(
            "terms for k = {k} are still above {TERM_TOL:e} after {max_terms} terms"
        )))
    }

    /// Exactly `n_terms` terms, no convergence check.
    pub fn with_terms(k: f64, n_terms: usize) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) || n_terms == 0 {
            return Err(Error::Argument(format!("bad series request k = {k}, terms = {n_terms}")));
        }
        Ok(Self {
            k,
            coeffs: Self::coefficients(k, n_terms),
        })
    }

    fn coefficients(k: f64, n_terms: usize) -> Vec<Complex64> {
        let j = spherical_j(n_terms - 1, k);
        let h = spherical_h(n_terms - 1, k);
        j.iter()
            .zip(&h)
            .enumerate()
            .map(|(n, (&jn, &hn))| {
                let c = (2 * n + 1) as f64 * jn / hn;
                if c.is_finite() {
                    c
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect()
    }

    pub fn wavenumber(&self) -> f64 {
        self.k
    }

    pub fn n_terms(&self) -> usize {
        self.coeffs.len()
    }

    /// Far field in the direction with polar angle `acos(mu)`.
    pub fn far_field(&self, mu: f64) -> Complex64 {
        let p = legendre(self.coeffs.len() - 1, mu);
        let sum: Complex64 = self.coeffs.iter().zip(&p).map(|(c, &pn)| c * pn).sum();
        Complex64::new(0.0, 1.0 / self.k) * sum
    }

    /// Far field at unit directions; depends only on their `z` component.
    pub fn far_field_at(&self, directions: &[[f64; 3]]) -> Vec<Complex64> {
        directions.iter().map(|d| self.far_field(d[2])).collect()
    }

    /// Scattered field at a point with `|x| ≥ 1`.
    pub fn scattered(&self, x: [f64; 3]) -> Complex64 {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let n = self.coeffs.len() - 1;
        let h = spherical_h(n, self.k * r);
        let p = legendre(n, x[2] / r);
        let mut sum = Complex64::new(0.0, 0.0);
        let mut i_pow = Complex64::new(1.0, 0.0);
        for m in 0..=n {
            sum += i_pow * self.coeffs[m] * h[m] * p[m];
            i_pow *= Complex64::new(0.0, 1.0);
        }
        -sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use rand::Rng;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn bessel_closed_forms() {
        for &x in &[0.3, 1.0, TAU, 12.0] {
            let j = spherical_j(3, x);
            let y = spherical_y(3, x);
            let (s, c) = f64::sin_cos(x);
            let j2 = (3.0 / (x * x) - 1.0) * s / x - 3.0 * c / (x * x);
            let y2 = -(3.0 / (x * x) - 1.0) * c / x - 3.0 * s / (x * x);
            assert!((j[2] - j2).abs() < 1e-13, "x={x}");
            assert!((y[2] - y2).abs() < 1e-12 * y2.abs().max(1.0), "x={x}");
            // Wronskian j_n y_{n-1} - j_{n-1} y_n = 1/x²
            for n in 1..=3 {
                let w = j[n] * y[n - 1] - j[n - 1] * y[n];
                assert!((w - 1.0 / (x * x)).abs() < 1e-12 / (x * x), "x={x} n={n}");
            }
        }
    }

    #[test]
    fn legendre_values() {
        let p = legendre(3, 0.5);
        assert_eq!(p[0], 1.0);
        assert_eq!(p[1], 0.5);
        assert!((p[2] + 0.125).abs() < 1e-15);
        assert!((p[3] + 0.4375).abs() < 1e-15);
    }

    #[test]
    fn near_field_cancels_incident_wave_on_the_sphere() {
        let s = SphereSeries::new(TAU).unwrap();
        let mut rng = stream(3, Purpose::Test, 0, 0);
        for _ in 0..100 {
            let mu: f64 = rng.gen_range(-1.0..1.0);
            let phi: f64 = rng.gen_range(0.0..TAU);
            let st = (1.0 - mu * mu).sqrt();
            let x = [st * phi.cos(), st * phi.sin(), mu];
            let total = s.scattered(x) + Complex64::from_polar(1.0, TAU * mu);
            assert!(total.norm() < 1e-6, "{}", total.norm());
        }
    }

    #[test]
    fn small_wavenumber_limit_is_minus_one() {
        let s = SphereSeries::new(1e-3).unwrap();
        for &mu in &[-1.0, 0.0, 0.3, 1.0] {
            assert!((s.far_field(mu) + 1.0).norm() < 1e-2);
        }
    }

    #[test]
    fn truncation_is_stable() {
        let s = SphereSeries::new(TAU).unwrap();
        let longer = SphereSeries::with_terms(TAU, s.n_terms() + 5).unwrap();
        for i in 0..=20 {
            let mu = (PI * i as f64 / 20.0).cos();
            assert!((s.far_field(mu) - longer.far_field(mu)).norm() < 1e-10);
        }
    }

    #[test]
    fn far_field_is_axisymmetric() {
        let s = SphereSeries::new(TAU).unwrap();
        let theta: f64 = 1.1;
        let base = s.far_field_at(&[[theta.sin(), 0.0, theta.cos()]])[0];
        for j in 1..16 {
            let phi = TAU * j as f64 / 16.0;
            let d = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
            assert!((s.far_field_at(&[d])[0] - base).norm() < 1e-12);
        }
    }

    #[test]
    fn huge_wavenumber_does_not_converge() {
        assert!(matches!(SphereSeries::with_max_terms(500.0, 50), Err(Error::Series(_))));
        assert!(SphereSeries::new(0.0).is_err());
    }
}
