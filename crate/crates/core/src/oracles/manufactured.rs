//! Finite-difference checks of the manufactured boundary data.

use crate::bie::problem::{ProblemKind, ProblemSpec};

/// Five-point Laplacian.
pub fn fd_laplacian(f: impl Fn(f64, f64) -> f64, x: f64, y: f64, h: f64) -> f64 {
    (f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h) - 4.0 * f(x, y)) / (h * h)
}

/// Thirteen-point bi-Laplacian.
pub fn fd_bilaplacian(f: impl Fn(f64, f64) -> f64, x: f64, y: f64, h: f64) -> f64 {
    let c = f(x, y);
    let axis = f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h);
    let diag = f(x + h, y + h) + f(x + h, y - h) + f(x - h, y + h) + f(x - h, y - h);
    let far = f(x + 2.0 * h, y) + f(x - 2.0 * h, y) + f(x, y + 2.0 * h) + f(x, y - 2.0 * h);
    (20.0 * c - 8.0 * axis + 2.0 * diag + far) / h.powi(4)
}

pub const LAPLACIAN_STEP: f64 = 1e-4;
pub const LAPLACIAN_TOL: f64 = 1e-5;
/// With `h = 1e-2` the stencil's truncation error is `O(h²)` times sixth
/// derivatives of order ten on the probe box, and rounding contributes about
/// `ε·|u|/h⁴ ≈ 1e-8`.
pub const BILAPLACIAN_STEP: f64 = 1e-2;
pub const BILAPLACIAN_TOL: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq)]
pub struct ManufacturedReport {
    pub kind: ProblemKind,
    pub probes: usize,
    /// Largest `|Δu|` (Laplace) or `|Δ²u|` (bi-harmonic) over the probes.
    pub max_residual: f64,
    pub tolerance: f64,
}

impl ManufacturedReport {
    pub fn passed(&self) -> bool {
        self.max_residual < self.tolerance
    }
}

/// Probe the analytic solution of a 2D spec on a grid over `[-1.5, 1.5]²`.
pub fn check_manufactured(spec: &ProblemSpec) -> Option<ManufacturedReport> {
    let f = |x: f64, y: f64| spec.exact_solution(&[x, y]);
    f(0.0, 0.0)?;
    let u = |x: f64, y: f64| f(x, y).unwrap_or(0.0);
    let n = 7;
    let mut max_residual: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = -1.5 + 3.0 * i as f64 / (n - 1) as f64;
            let y = -1.5 + 3.0 * j as f64 / (n - 1) as f64;
            let r = match spec.kind {
                ProblemKind::Laplace2d => fd_laplacian(u, x, y, LAPLACIAN_STEP),
                _ => fd_bilaplacian(u, x, y, BILAPLACIAN_STEP),
            };
            max_residual = max_residual.max(r.abs());
        }
    }
    let tolerance = match spec.kind {
        ProblemKind::Laplace2d => LAPLACIAN_TOL,
        _ => BILAPLACIAN_TOL,
    };
    Some(ManufacturedReport {
        kind: spec.kind,
        probes: n * n,
        max_residual,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_a_positive_control() {
        let q = |x: f64, y: f64| x * x + y * y;
        assert!((fd_laplacian(q, 0.3, 0.7, 1e-3) - 4.0).abs() < 1e-6);
        let quartic = |x: f64, y: f64| (x * x + y * y).powi(2);
        assert!((fd_bilaplacian(quartic, 0.3, -0.2, 1e-2) - 64.0).abs() < 1e-6);
    }

    #[test]
    fn harmonic_probe_point() {
        let u = |x: f64, y: f64| x.exp() * y.sin();
        assert!(fd_laplacian(u, 0.3, 0.7, LAPLACIAN_STEP).abs() < LAPLACIAN_TOL);
    }

    #[test]
    fn manufactured_solutions_pass() {
        let lap = check_manufactured(&ProblemSpec::laplace()).unwrap();
        assert!(lap.passed(), "{lap:?}");
        let bih = check_manufactured(&ProblemSpec::biharmonic()).unwrap();
        assert!(bih.passed(), "{bih:?}");
        assert!(check_manufactured(&ProblemSpec::helmholtz(1.0).unwrap()).is_none());
    }
}
