use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundarySample, CurveFamily, ParamCurve2D, TwinHemispheres};
use crate::kernels::TruncationRule;
use crate::rng::Stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Laplace2d,
    Biharmonic2d,
    Helmholtz3d,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Laplace2d => "laplace2d",
            ProblemKind::Biharmonic2d => "biharmonic2d",
            ProblemKind::Helmholtz3d => "helmholtz3d",
        }
    }

    /// Output channels of the potential network.
    pub fn outputs(self) -> usize {
        match self {
            ProblemKind::Laplace2d => 1,
            ProblemKind::Biharmonic2d | ProblemKind::Helmholtz3d => 2,
        }
    }

    pub fn space_dim(self) -> usize {
        match self {
            ProblemKind::Helmholtz3d => 3,
            _ => 2,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Boundary {
    Curve(ParamCurve2D),
    Hemispheres(TwinHemispheres),
}

impl Boundary {
    pub fn sample(&self, t: f64, m: usize, rng: &mut Stream) -> Result<BoundarySample> {
        match self {
            Boundary::Curve(c) => c.sample(t, m, rng),
            Boundary::Hemispheres(h) => h.sample(t, m, rng),
        }
    }

    pub fn check_t(&self, t: f64) -> Result<()> {
        match self {
            Boundary::Curve(c) => c.check_t(t),
            Boundary::Hemispheres(h) => h.check_t(t),
        }
    }

    pub fn t_range(&self) -> (f64, f64) {
        match self {
            Boundary::Curve(c) => c.t_range(),
            Boundary::Hemispheres(h) => h.t_range(),
        }
    }
}

/// Boundary data at an observation point: the Dirichlet value and, for the
/// bi-harmonic problem, the normal derivative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryValue {
    pub dirichlet: Complex64,
    pub neumann: f64,
}

/// Which PDE, on which boundary family, with which boundary data.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub boundary: Boundary,
    pub wavenumber: f64,
    pub t_range: (f64, f64),
    pub truncation: TruncationRule,
    /// Multiplies all boundary data.
    pub data_scale: f64,
}

impl ProblemSpec {
    /// Interior/exterior Laplace with `u₀ = eˣ sin y` on the Laplace star.
    pub fn laplace() -> Self {
        Self::laplace_on(CurveFamily::LaplaceStar).expect("built-in family is valid")
    }

    pub fn laplace_on(family: CurveFamily) -> Result<Self> {
        let curve = ParamCurve2D::new(family)?;
        let t_range = match family {
            CurveFamily::UnitCircle => (0.0, 0.0),
            _ => curve.t_range(),
        };
        Ok(Self {
            kind: ProblemKind::Laplace2d,
            boundary: Boundary::Curve(curve),
            wavenumber: 0.0,
            t_range,
            truncation: TruncationRule::default(),
            data_scale: 1.0,
        })
    }

    /// Bi-harmonic with `u₀ = (x² + y²) eˣ sin y` and its normal derivative.
    pub fn biharmonic() -> Self {
        let curve = ParamCurve2D::new(CurveFamily::BiharmonicStar).expect("built-in family is valid");
        Self {
            kind: ProblemKind::Biharmonic2d,
            t_range: curve.t_range(),
            boundary: Boundary::Curve(curve),
            wavenumber: 0.0,
            truncation: TruncationRule::default(),
            data_scale: 1.0,
        }
    }

    /// Sound-soft scattering of `e^{ikz}` by the twin hemispheres.
    pub fn helmholtz(k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Argument(format!("wavenumber must be positive, got {k}")));
        }
        let h = TwinHemispheres::default();
        Ok(Self {
            kind: ProblemKind::Helmholtz3d,
            t_range: h.t_range(),
            boundary: Boundary::Hemispheres(h),
            wavenumber: k,
            truncation: TruncationRule::default(),
            data_scale: 1.0,
        })
    }

    pub fn with_t_range(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::Argument(format!("empty t-range [{lo}, {hi}]")));
        }
        self.boundary.check_t(lo)?;
        self.boundary.check_t(hi)?;
        self.t_range = (lo, hi);
        Ok(self)
    }

    pub fn with_truncation(mut self, rule: TruncationRule) -> Self {
        self.truncation = rule;
        self
    }

    pub fn with_data_scale(mut self, c: f64) -> Self {
        self.data_scale = c;
        self
    }

    pub fn curve(&self) -> Option<&ParamCurve2D> {
        match &self.boundary {
            Boundary::Curve(c) => Some(c),
            Boundary::Hemispheres(_) => None,
        }
    }

    /// Incident plane wave `e^{ikz}`.
    pub fn incident(&self, y: &[f64]) -> Complex64 {
        Complex64::from_polar(1.0, self.wavenumber * y[2])
    }

    /// Analytic solution where one is known (the manufactured 2D data).
    pub fn exact_solution(&self, y: &[f64]) -> Option<f64> {
        match self.kind {
            ProblemKind::Laplace2d => Some(self.data_scale * y[0].exp() * y[1].sin()),
            ProblemKind::Biharmonic2d => {
                let rho = y[0] * y[0] + y[1] * y[1];
                Some(self.data_scale * rho * y[0].exp() * y[1].sin())
            }
            ProblemKind::Helmholtz3d => None,
        }
    }

    /// Boundary data at `y ∈ Γ_t` with outward normal `n`.
    pub fn boundary_value(&self, y: &[f64], n: &[f64]) -> BoundaryValue {
        let c = self.data_scale;
        match self.kind {
            ProblemKind::Laplace2d => BoundaryValue {
                dirichlet: Complex64::new(c * y[0].exp() * y[1].sin(), 0.0),
                neumann: 0.0,
            },
            ProblemKind::Biharmonic2d => {
                let (x, yy) = (y[0], y[1]);
                let e = x.exp();
                let (s, co) = yy.sin_cos();
                let rho = x * x + yy * yy;
                let g = e * s;
                let gx = 2.0 * x * g + rho * g;
                let gy = 2.0 * yy * g + rho * e * co;
                BoundaryValue {
                    dirichlet: Complex64::new(c * rho * g, 0.0),
                    neumann: c * (gx * n[0] + gy * n[1]),
                }
            }
            ProblemKind::Helmholtz3d => BoundaryValue {
                dirichlet: -c * self.incident(y),
                neumann: 0.0,
            },
        }
    }
}

/// `Σ|pred − truth|² / Σ|truth|²`.
pub fn relative_l2(pred: &[Complex64], truth: &[Complex64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Argument(format!(
            "length mismatch: {} predictions, {} truth values",
            pred.len(),
            truth.len()
        )));
    }
    let den: f64 = truth.iter().map(|z| z.norm_sqr()).sum();
    if den == 0.0 {
        return Err(Error::Division("relative error against an all-zero truth"));
    }
    let num: f64 = pred.iter().zip(truth).map(|(p, q)| (p - q).norm_sqr()).sum();
    Ok(num / den)
}

/// Real-valued convenience wrapper around [`relative_l2`].
pub fn relative_l2_real(pred: &[f64], truth: &[f64]) -> Result<f64> {
    let p: Vec<Complex64> = pred.iter().map(|&x| x.into()).collect();
    let q: Vec<Complex64> = truth.iter().map(|&x| x.into()).collect();
    relative_l2(&p, &q)
}

pub(crate) const INV_4PI: f64 = 1.0 / (4.0 * PI);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_values() {
        let truth = [1.0, -2.0, 0.5];
        assert_eq!(relative_l2_real(&truth, &truth).unwrap(), 0.0);
        assert_eq!(relative_l2_real(&[0.0; 3], &truth).unwrap(), 1.0);
        let pred: Vec<f64> = truth.iter().map(|x| 1.1 * x).collect();
        assert!((relative_l2_real(&pred, &truth).unwrap() - 0.01).abs() < 1e-14);
        assert!(matches!(
            relative_l2_real(&[1.0], &[0.0]),
            Err(Error::Division(_))
        ));
    }

    #[test]
    fn biharmonic_neumann_data_matches_finite_differences() {
        let spec = ProblemSpec::biharmonic();
        let y = [0.4, -0.7];
        let n = [0.6, 0.8];
        let h = 1e-6;
        let f = |p: [f64; 2]| spec.boundary_value(&p, &n).dirichlet.re;
        let fd = (f([y[0] + h * n[0], y[1] + h * n[1]]) - f([y[0] - h * n[0], y[1] - h * n[1]])) / (2.0 * h);
        let exact = spec.boundary_value(&y, &n).neumann;
        assert!((fd - exact).abs() < 1e-8, "{fd} vs {exact}");
    }

    #[test]
    fn helmholtz_data_cancels_incident_wave() {
        let spec = ProblemSpec::helmholtz(2.0 * PI).unwrap();
        let y = [0.1, 0.2, 0.7];
        let v = spec.boundary_value(&y, &[0.0, 0.0, 1.0]);
        assert!((v.dirichlet + spec.incident(&y)).norm() < 1e-15);
        assert!(ProblemSpec::helmholtz(0.0).is_err());
    }

    #[test]
    fn empty_t_range_is_rejected() {
        assert!(ProblemSpec::laplace().with_t_range(1.5, 1.2).is_err());
        assert!(ProblemSpec::laplace().with_t_range(1.15, 1.15).is_ok());
        assert!(ProblemSpec::laplace().with_t_range(0.5, 1.2).is_err());
    }
}
