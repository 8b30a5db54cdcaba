//! Field reconstruction from a boundary potential.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::autodiff::{matmul, Matrix};
use crate::bie::loss::kernel_blocks;
use crate::bie::problem::{Boundary, ProblemKind, ProblemSpec, INV_4PI};
use crate::error::{Error, Result};
use crate::geometry::{BoundarySample, ParamCurve2D, TwinHemispheres};
use crate::operator_net::Potential;
use crate::rng::{stream, Purpose};

/// Default exclusion distance from the boundary for field grids.
pub const DEFAULT_DELTA: f64 = 0.01;

const TARGET_CHUNK: usize = 256;

/// Candidate evaluation points and a keep-mask. Points inside an obstacle
/// (or outside the domain of interest) or within `delta` of the boundary are
/// masked out.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldGrid {
    pub dim: usize,
    pub points: Vec<f64>,
    pub keep: Vec<bool>,
}

impl FieldGrid {
    /// `n × n` grid over the bounding box of `Γ_t`, keeping interior points at
    /// least `delta` away from the curve.
    pub fn interior(curve: &ParamCurve2D, t: f64, n: usize, delta: f64) -> Result<Self> {
        curve.check_t(t)?;
        let polyline = dense_polyline(curve, t, 4096);
        let rmax = polyline.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
        let mut points = Vec::with_capacity(2 * n * n);
        let mut keep = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let x = -rmax + 2.0 * rmax * (j as f64 + 0.5) / n as f64;
                let y = -rmax + 2.0 * rmax * (i as f64 + 0.5) / n as f64;
                points.extend_from_slice(&[x, y]);
                let inside = curve.contains([x, y], t)
                    && polyline
                        .iter()
                        .all(|p| (p[0] - x).hypot(p[1] - y) >= delta);
                keep.push(inside);
            }
        }
        Ok(Self { dim: 2, points, keep })
    }

    /// Polar test grid strictly inside a disc of radius `r_max`.
    pub fn polar(n_r: usize, n_theta: usize, r_max: f64) -> Self {
        let mut points = Vec::with_capacity(2 * n_r * n_theta);
        for i in 0..n_r {
            let r = r_max * (i as f64 + 1.0) / n_r as f64;
            for j in 0..n_theta {
                let a = TAU * j as f64 / n_theta as f64;
                points.extend_from_slice(&[r * a.cos(), r * a.sin()]);
            }
        }
        let keep = vec![true; n_r * n_theta];
        Self { dim: 2, points, keep }
    }

    /// `n × n` grid on the plane `y = 0`, `(x, z) ∈ [-h, h]²`, outside the
    /// obstacle and at least `delta` from its surface.
    pub fn slice_y0(
        obstacle: &TwinHemispheres,
        t: f64,
        n: usize,
        half_width: f64,
        delta: f64,
    ) -> Result<Self> {
        obstacle.check_t(t)?;
        let mut points = Vec::with_capacity(3 * n * n);
        let mut keep = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let x = -half_width + 2.0 * half_width * (j as f64 + 0.5) / n as f64;
                let z = -half_width + 2.0 * half_width * (i as f64 + 0.5) / n as f64;
                let p = [x, 0.0, z];
                points.extend_from_slice(&p);
                keep.push(!obstacle.contains(p, t) && hemisphere_distance(p, t) >= delta);
            }
        }
        Ok(Self { dim: 3, points, keep })
    }

    pub fn from_points(dim: usize, points: Vec<f64>) -> Self {
        let n = points.len() / dim;
        Self {
            dim,
            points,
            keep: vec![true; n],
        }
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    pub fn kept_count(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    /// Flat coordinates of the unmasked points.
    pub fn kept_points(&self) -> Vec<f64> {
        self.keep
            .iter()
            .enumerate()
            .filter(|(_, &k)| k)
            .flat_map(|(i, _)| self.points[i * self.dim..(i + 1) * self.dim].iter().copied())
            .collect()
    }
}

fn dense_polyline(curve: &ParamCurve2D, t: f64, n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|i| {
            let a = TAU * i as f64 / n as f64;
            let (r, _) = curve.radius(a, t);
            [r * a.cos(), r * a.sin()]
        })
        .collect()
}

/// Distance from `p` to the open hemisphere pair.
pub fn hemisphere_distance(p: [f64; 3], t: f64) -> f64 {
    let piece = |c: f64, upper: bool| {
        let rel = [p[0], p[1], p[2] - c];
        let rho = rel[0].hypot(rel[1]);
        let on_side = if upper { rel[2] >= 0.0 } else { rel[2] <= 0.0 };
        if on_side {
            (rho.hypot(rel[2]) - 1.0).abs()
        } else {
            // nearest point is on the rim circle
            (rho - 1.0).hypot(rel[2])
        }
    };
    piece(t, true).min(piece(-t, false))
}

/// Quadrature sample used for every evaluation at `t`.
pub fn evaluation_sample(spec: &ProblemSpec, t: f64, m_eval: usize, seed: u64) -> Result<BoundarySample> {
    spec.boundary
        .sample(t, m_eval, &mut stream(seed, Purpose::Evaluation, 0, 0))
}

/// Representation `u(y; t)` at the given points (flat, `dim` per point).
pub fn eval_field(
    potential: &dyn Potential,
    spec: &ProblemSpec,
    t: f64,
    targets: &[f64],
    m_eval: usize,
    seed: u64,
) -> Result<Vec<Complex64>> {
    let sample = evaluation_sample(spec, t, m_eval, seed)?;
    eval_field_on(potential, spec, t, &sample, targets)
}

/// Same as [`eval_field`] on an explicit quadrature sample.
pub fn eval_field_on(
    potential: &dyn Potential,
    spec: &ProblemSpec,
    t: f64,
    sample: &BoundarySample,
    targets: &[f64],
) -> Result<Vec<Complex64>> {
    let dim = sample.dim;
    if !targets.len().is_multiple_of(dim) {
        return Err(Error::Argument("target coordinates are not a whole number of points".into()));
    }
    let v = potential.evaluate(t, sample);
    let mut out = Vec::with_capacity(targets.len() / dim);
    for chunk in targets.chunks(TARGET_CHUNK * dim) {
        let blocks = kernel_blocks(spec, sample, chunk, None);
        match spec.kind {
            ProblemKind::Laplace2d => {
                let u = matmul(&blocks[0], &v);
                out.extend(u.data.iter().map(|&x| Complex64::new(x, 0.0)));
            }
            ProblemKind::Helmholtz3d => {
                let a = matmul(&blocks[0], &v);
                let b = matmul(&blocks[1], &v);
                for i in 0..a.rows {
                    out.push(Complex64::new(
                        a.get(i, 0) - b.get(i, 1),
                        a.get(i, 1) + b.get(i, 0),
                    ));
                }
            }
            ProblemKind::Biharmonic2d => {
                let a = matmul(&blocks[0], &v);
                let b = matmul(&blocks[1], &v);
                for i in 0..a.rows {
                    out.push(Complex64::new(-(a.get(i, 1) + b.get(i, 0)), 0.0));
                }
            }
        }
    }
    Ok(out)
}

/// Directions on a latitude–longitude grid of the unit sphere, with polar
/// angles at cell midpoints: `(θ, φ, unit vector)`.
pub fn lat_lon_directions(n_theta: usize, n_phi: usize) -> Vec<(f64, f64, [f64; 3])> {
    let mut out = Vec::with_capacity(n_theta * n_phi);
    for i in 0..n_theta {
        let theta = PI * (i as f64 + 0.5) / n_theta as f64;
        for j in 0..n_phi {
            let phi = TAU * j as f64 / n_phi as f64;
            let (st, ct) = theta.sin_cos();
            out.push((theta, phi, [st * phi.cos(), st * phi.sin(), ct]));
        }
    }
    out
}

/// Far-field pattern `u_∞(d; t) = (1/4π) ∫ e^{-ik d·x} v(x; t) dτ`.
pub fn far_field(
    potential: &dyn Potential,
    spec: &ProblemSpec,
    t: f64,
    directions: &[[f64; 3]],
    m_eval: usize,
    seed: u64,
) -> Result<Vec<Complex64>> {
    if spec.kind != ProblemKind::Helmholtz3d {
        return Err(Error::Argument("far field is defined for the Helmholtz problem only".into()));
    }
    let sample = evaluation_sample(spec, t, m_eval, seed)?;
    Ok(far_field_on(potential, spec, t, &sample, directions))
}

pub fn far_field_on(
    potential: &dyn Potential,
    spec: &ProblemSpec,
    t: f64,
    sample: &BoundarySample,
    directions: &[[f64; 3]],
) -> Vec<Complex64> {
    let v = potential.evaluate(t, sample);
    let w = sample.weight() * INV_4PI;
    let k = spec.wavenumber;
    directions
        .iter()
        .map(|d| {
            let mut acc = Complex64::new(0.0, 0.0);
            for kk in 0..sample.len() {
                let x = sample.point(kk);
                let phase = -k * (d[0] * x[0] + d[1] * x[1] + d[2] * x[2]);
                let density = Complex64::new(v.get(kk, 0), v.get(kk, 1));
                acc += Complex64::from_polar(1.0, phase) * density;
            }
            acc * w
        })
        .collect()
}

/// Incident plus scattered field at the unmasked grid points.
pub fn total_field(
    potential: &dyn Potential,
    spec: &ProblemSpec,
    t: f64,
    grid: &FieldGrid,
    m_eval: usize,
    seed: u64,
) -> Result<Vec<Complex64>> {
    if spec.kind != ProblemKind::Helmholtz3d {
        return Err(Error::Argument("total field is defined for the Helmholtz problem only".into()));
    }
    let pts = grid.kept_points();
    let scattered = eval_field(potential, spec, t, &pts, m_eval, seed)?;
    Ok(pts
        .chunks(3)
        .zip(scattered)
        .map(|(y, us)| spec.incident(y) + us)
        .collect())
}

/// The obstacle of a Helmholtz spec, if any.
pub fn obstacle(spec: &ProblemSpec) -> Option<&TwinHemispheres> {
    match &spec.boundary {
        Boundary::Hemispheres(h) => Some(h),
        Boundary::Curve(_) => None,
    }
}

/// Potential values as a matrix for a sample; exposed for diagnostics.
pub fn potential_values(potential: &dyn Potential, t: f64, sample: &BoundarySample) -> Matrix {
    potential.evaluate(t, sample)
}
