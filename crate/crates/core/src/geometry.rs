//! Parametrized boundary families and Monte-Carlo boundary samples.
//!
//! Curves are star-shaped polar graphs `r(α; t)` whose radius is a short
//! trigonometric sum, so points, tangents and the arclength Jacobian are all
//! available in closed form. Surfaces are the open twin-hemisphere pair used
//! for the scattering problem.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::Stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Trig {
    Sin,
    Cos,
}

/// One term `c · trig(n α)` of the radius expansion; `scaled_by_t` multiplies
/// the coefficient by the geometry parameter.
#[derive(Clone, Copy, Debug)]
struct Term {
    coeff: f64,
    scaled_by_t: bool,
    trig: Trig,
    harmonic: f64,
}

impl Term {
    const fn new(trig: Trig, harmonic: f64, scaled_by_t: bool) -> Self {
        Self {
            coeff: 1.0,
            scaled_by_t,
            trig,
            harmonic,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveFamily {
    /// `r = 1 + 0.2 (sin 3α + t sin 4α + sin 6α + cos 2α + cos 5α)`, `t ∈ [1, 2]`.
    LaplaceStar,
    /// `r = 1 + 0.1 (sin α + t cos 2α + sin 3α + cos 4α)`, `t ∈ [1, 2]`.
    BiharmonicStar,
    /// `r ≡ 1`; ignores `t`. Used as a test family with known answers.
    UnitCircle,
}

impl CurveFamily {
    pub fn name(self) -> &'static str {
        match self {
            CurveFamily::LaplaceStar => "laplace-star",
            CurveFamily::BiharmonicStar => "biharmonic-star",
            CurveFamily::UnitCircle => "unit-circle",
        }
    }
}

/// A closed star-shaped curve `α ↦ r(α; t) (cos α, sin α)`.
#[derive(Clone, Debug)]
pub struct ParamCurve2D {
    family: CurveFamily,
    amplitude: f64,
    terms: Vec<Term>,
    t_range: (f64, f64),
}

/// Point, outward unit normal and arclength Jacobian `|dx/dα|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub point: [f64; 2],
    pub normal: [f64; 2],
    pub jacobian: f64,
}

const POSITIVITY_PROBES: usize = 10_000;

impl ParamCurve2D {
    pub fn new(family: CurveFamily) -> Result<Self> {
        use Trig::*;
        let (amplitude, terms, t_range) = match family {
            CurveFamily::LaplaceStar => (
                0.2,
                vec![
                    Term::new(Sin, 3.0, false),
                    Term::new(Sin, 4.0, true),
                    Term::new(Sin, 6.0, false),
                    Term::new(Cos, 2.0, false),
                    Term::new(Cos, 5.0, false),
                ],
                (1.0, 2.0),
            ),
            CurveFamily::BiharmonicStar => (
                0.1,
                vec![
                    Term::new(Sin, 1.0, false),
                    Term::new(Cos, 2.0, true),
                    Term::new(Sin, 3.0, false),
                    Term::new(Cos, 4.0, false),
                ],
                (1.0, 2.0),
            ),
            CurveFamily::UnitCircle => (0.0, Vec::new(), (f64::NEG_INFINITY, f64::INFINITY)),
        };
        let curve = Self {
            family,
            amplitude,
            terms,
            t_range,
        };
        curve.check_positive()?;
        Ok(curve)
    }

    pub fn family(&self) -> CurveFamily {
        self.family
    }

    pub fn t_range(&self) -> (f64, f64) {
        self.t_range
    }

    /// The radius is affine in `t`, so positivity on both ends of the
    /// admissible range implies positivity everywhere in between.
    fn check_positive(&self) -> Result<()> {
        let ends: Vec<f64> = if self.t_range.0.is_finite() {
            vec![self.t_range.0, self.t_range.1]
        } else {
            vec![0.0]
        };
        for t in ends {
            for i in 0..POSITIVITY_PROBES {
                let alpha = TAU * i as f64 / POSITIVITY_PROBES as f64;
                let (r, _) = self.radius(alpha, t);
                if !(r > 0.0) {
                    return Err(Error::Geometry(format!(
                        "{} radius {r} is not positive at alpha = {alpha}, t = {t}",
                        self.family.name()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn check_t(&self, t: f64) -> Result<()> {
        let (lo, hi) = self.t_range;
        if t.is_finite() && t >= lo && t <= hi {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "t",
                value: t,
                lo,
                hi,
            })
        }
    }

    /// `(r, dr/dα)`.
    pub fn radius(&self, alpha: f64, t: f64) -> (f64, f64) {
        let mut sum = 0.0;
        let mut dsum = 0.0;
        for term in &self.terms {
            let c = if term.scaled_by_t { term.coeff * t } else { term.coeff };
            let (s, co) = (term.harmonic * alpha).sin_cos();
            match term.trig {
                Trig::Sin => {
                    sum += c * s;
                    dsum += c * term.harmonic * co;
                }
                Trig::Cos => {
                    sum += c * co;
                    dsum -= c * term.harmonic * s;
                }
            }
        }
        (1.0 + self.amplitude * sum, self.amplitude * dsum)
    }

    pub fn curve_point(&self, alpha: f64, t: f64) -> Result<CurvePoint> {
        self.check_t(t)?;
        let (r, dr) = self.radius(alpha, t);
        if !(r > 0.0) {
            return Err(Error::Geometry(format!("radius {r} at alpha = {alpha}")));
        }
        Ok(self.point_unchecked(alpha, r, dr))
    }

    fn point_unchecked(&self, alpha: f64, r: f64, dr: f64) -> CurvePoint {
        let (s, c) = alpha.sin_cos();
        let dx = dr * c - r * s;
        let dy = dr * s + r * c;
        let jacobian = r.hypot(dr);
        CurvePoint {
            point: [r * c, r * s],
            normal: [dy / jacobian, -dx / jacobian],
            jacobian,
        }
    }

    /// Is `p` strictly inside the curve at parameter `t`?
    pub fn contains(&self, p: [f64; 2], t: f64) -> bool {
        let rho = p[0].hypot(p[1]);
        let alpha = p[1].atan2(p[0]).rem_euclid(TAU);
        rho < self.radius(alpha, t).0
    }

    /// `m` i.i.d. uniform parameter draws mapped onto the curve.
    pub fn sample(&self, t: f64, m: usize, rng: &mut Stream) -> Result<BoundarySample> {
        let alphas: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() * TAU).collect();
        self.sample_at(t, &alphas)
    }

    /// Boundary sample at explicit parameter values (used by the quadrature
    /// oracles, which need equispaced nodes).
    pub fn sample_at(&self, t: f64, alphas: &[f64]) -> Result<BoundarySample> {
        if alphas.is_empty() {
            return Err(Error::Argument("boundary sample needs at least one point".into()));
        }
        self.check_t(t)?;
        let mut out = BoundarySample::with_capacity(2, 1, alphas.len(), TAU);
        for &alpha in alphas {
            let cp = self.curve_point(alpha, t)?;
            out.push(&cp.point, &cp.normal, cp.jacobian, &[alpha]);
        }
        Ok(out)
    }
}

/// Two open unit hemispheres centred at `(0, 0, ±t)`: the upper one keeps
/// polar angles `θ ∈ [0, π/2]`, the lower one `θ ∈ [π/2, π]`. At `t = 0`
/// they close up into the unit sphere.
#[derive(Clone, Debug)]
pub struct TwinHemispheres {
    t_range: (f64, f64),
}

impl Default for TwinHemispheres {
    fn default() -> Self {
        Self { t_range: (0.0, 0.5) }
    }
}

/// Parameter-domain measure of the hemisphere pair: two `(π/2) × 2π` rectangles.
pub const HEMISPHERE_DOMAIN_MEASURE: f64 = PI * PI * 2.0;

impl TwinHemispheres {
    pub fn t_range(&self) -> (f64, f64) {
        self.t_range
    }

    pub fn check_t(&self, t: f64) -> Result<()> {
        let (lo, hi) = self.t_range;
        if t.is_finite() && t >= lo && t <= hi {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "t",
                value: t,
                lo,
                hi,
            })
        }
    }

    pub fn sample(&self, t: f64, m: usize, rng: &mut Stream) -> Result<BoundarySample> {
        if m == 0 || !m.is_multiple_of(2) {
            return Err(Error::Argument(format!(
                "hemisphere sample size must be even and positive, got {m}"
            )));
        }
        self.check_t(t)?;
        let mut out = BoundarySample::with_capacity(3, 2, m, HEMISPHERE_DOMAIN_MEASURE);
        for k in 0..m {
            let upper = k < m / 2;
            let theta = if upper {
                rng.gen::<f64>() * FRAC_PI_2
            } else {
                FRAC_PI_2 + rng.gen::<f64>() * FRAC_PI_2
            };
            let phi = rng.gen::<f64>() * TAU;
            let (point, normal, jac) = hemisphere_point(t, theta, phi);
            out.push(&point, &normal, jac, &[theta, phi]);
        }
        Ok(out)
    }

    /// Is `p` inside either closed ball piece (i.e. inside the obstacle)?
    pub fn contains(&self, p: [f64; 3], t: f64) -> bool {
        let up = p[2] >= t && (p[0].powi(2) + p[1].powi(2) + (p[2] - t).powi(2)) < 1.0;
        let down = p[2] <= -t && (p[0].powi(2) + p[1].powi(2) + (p[2] + t).powi(2)) < 1.0;
        up || down
    }
}

/// Surface point on the hemisphere pair for polar angle `θ` (upper piece when
/// `θ ≤ π/2`) and azimuth `φ`; returns `(point, normal, sin θ)`.
pub fn hemisphere_point(t: f64, theta: f64, phi: f64) -> ([f64; 3], [f64; 3], f64) {
    let center = if theta <= FRAC_PI_2 { t } else { -t };
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let normal = [st * cp, st * sp, ct];
    (
        [normal[0], normal[1], normal[2] + center],
        normal,
        st,
    )
}

/// Quadrature point cloud on a boundary. Coordinates are stored flat,
/// `dim` values per point.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySample {
    pub dim: usize,
    pub param_dim: usize,
    pub points: Vec<f64>,
    pub normals: Vec<f64>,
    pub jacobians: Vec<f64>,
    pub params: Vec<f64>,
    pub domain_measure: f64,
}

impl BoundarySample {
    pub fn with_capacity(dim: usize, param_dim: usize, m: usize, domain_measure: f64) -> Self {
        Self {
            dim,
            param_dim,
            points: Vec::with_capacity(m * dim),
            normals: Vec::with_capacity(m * dim),
            jacobians: Vec::with_capacity(m),
            params: Vec::with_capacity(m * param_dim),
            domain_measure,
        }
    }

    pub fn push(&mut self, point: &[f64], normal: &[f64], jacobian: f64, params: &[f64]) {
        debug_assert_eq!(point.len(), self.dim);
        self.points.extend_from_slice(point);
        self.normals.extend_from_slice(normal);
        self.jacobians.push(jacobian);
        self.params.extend_from_slice(params);
    }

    pub fn len(&self) -> usize {
        self.jacobians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jacobians.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    pub fn normal(&self, k: usize) -> &[f64] {
        &self.normals[k * self.dim..(k + 1) * self.dim]
    }

    /// Weight that turns a sum over the sample into an integral estimate
    /// over the parameter domain.
    pub fn weight(&self) -> f64 {
        self.domain_measure / self.len() as f64
    }

    /// Monte-Carlo estimate of the boundary length (2D) or area (3D).
    pub fn measure_estimate(&self) -> f64 {
        self.weight() * self.jacobians.iter().sum::<f64>()
    }
}

/// Reference arclength of a curve by the periodic trapezoid rule.
pub fn trapezoid_length(curve: &ParamCurve2D, t: f64, nodes: usize) -> f64 {
    let h = TAU / nodes as f64;
    (0..nodes)
        .map(|i| {
            let (r, dr) = curve.radius(h * i as f64, t);
            r.hypot(dr)
        })
        .sum::<f64>()
        * h
}
