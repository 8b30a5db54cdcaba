//! Dense Nyström solver for the 2D single-layer equations.
//!
//! Nodes are equispaced in the curve parameter, `α_i = i h` with
//! `h = 2π/N`. The unknown at each node is the Jacobian-weighted density
//! `φ_i = σ(x_i) J_i`, the same quantity the network learns, so the
//! off-diagonal weights are plain `h`. Log-singular diagonal entries come
//! from integrating the kernel over a straight panel of length `h J_i`.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::autodiff::Matrix;
use crate::bie::problem::{ProblemKind, ProblemSpec};
use crate::bie::field::eval_field_on;
use crate::error::{Error, Result};
use crate::geometry::BoundarySample;
use crate::kernels;
use crate::operator_net::Potential;

const MIN_NODES: usize = 64;
const RESIDUAL_TOL: f64 = 1e-10;

/// Solved Nyström system.
#[derive(Clone, Debug)]
pub struct NystromSolution {
    pub kind: ProblemKind,
    pub t: f64,
    pub nodes: BoundarySample,
    /// `N × outputs`, channel order as in the network (`v`, then `w` for
    /// the bi-harmonic pair).
    pub density: Matrix,
    /// `‖Aφ − b‖ / ‖b‖`.
    pub residual: f64,
}

/// Solve the single-layer equation on `Γ_t` with `N` nodes.
pub fn nystrom_solve(spec: &ProblemSpec, t: f64, n: usize) -> Result<NystromSolution> {
    if n < MIN_NODES {
        return Err(Error::Argument(format!("Nyström solve needs at least {MIN_NODES} nodes, got {n}")));
    }
    let curve = spec
        .curve()
        .ok_or_else(|| Error::Argument("Nyström solver handles 2D problems only".into()))?;
    let h = TAU / n as f64;
    let alphas: Vec<f64> = (0..n).map(|i| h * i as f64).collect();
    let nodes = curve.sample_at(t, &alphas)?;
    let (a, b) = match spec.kind {
        ProblemKind::Laplace2d => laplace_system(spec, &nodes, h),
        ProblemKind::Biharmonic2d => biharmonic_system(spec, &nodes, h),
        ProblemKind::Helmholtz3d => unreachable!("curve boundaries are 2D"),
    };
    let x = solve(&a, &b)?;
    let residual = (&a * &x - &b).norm() / b.norm();
    if !(residual < RESIDUAL_TOL) {
        return Err(Error::Singular {
            condition: condition_estimate(&a),
        });
    }
    let outputs = spec.kind.outputs();
    let density = match spec.kind {
        ProblemKind::Laplace2d => Matrix::from_vec(n, 1, x.iter().copied().collect()),
        _ => {
            // unknowns are stacked [v; w]
            let mut data = Vec::with_capacity(n * outputs);
            for i in 0..n {
                data.push(x[i]);
                data.push(x[n + i]);
            }
            Matrix::from_vec(n, outputs, data)
        }
    };
    Ok(NystromSolution {
        kind: spec.kind,
        t,
        nodes,
        density,
        residual,
    })
}

fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    a.clone().lu().solve(b).ok_or_else(|| Error::Singular {
        condition: condition_estimate(a),
    })
}

/// Ratio of extreme singular values.
pub fn condition_estimate(a: &DMatrix<f64>) -> f64 {
    let s = a.clone().singular_values();
    let max = s.max();
    let min = s.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn laplace_system(spec: &ProblemSpec, nodes: &BoundarySample, h: f64) -> (DMatrix<f64>, DVector<f64>) {
    let n = nodes.len();
    let rule = spec.truncation;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let y = nodes.point(i);
            (0..n)
                .map(|j| {
                    if i == j {
                        let l = h * nodes.jacobians[i];
                        h / TAU * (1.0 - (l / 2.0).ln())
                    } else {
                        h * kernels::laplace2d_re(nodes.point(j), y, &rule)
                    }
                })
                .collect()
        })
        .collect();
    let a = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let b = DVector::from_fn(n, |i, _| spec.boundary_value(nodes.point(i), nodes.normal(i)).dirichlet.re);
    (a, b)
}

/// Unknowns `[v; w]`; rows are the Dirichlet condition at every node, then
/// the normal-derivative condition.
fn biharmonic_system(spec: &ProblemSpec, nodes: &BoundarySample, h: f64) -> (DMatrix<f64>, DVector<f64>) {
    let n = nodes.len();
    let rule = spec.truncation;
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    let blocks: Vec<[Vec<f64>; 4]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let y = nodes.point(i);
            let ny = nodes.normal(i);
            let mut g = vec![0.0; n];
            let mut gnx = vec![0.0; n];
            let mut gny = vec![0.0; n];
            let mut gnxy = vec![0.0; n];
            for j in 0..n {
                if i == j {
                    let l = h * nodes.jacobians[i];
                    gnxy[j] = -h / (8.0 * PI) * (2.0 * (l / 2.0).ln() - 1.0);
                    continue;
                }
                let x = nodes.point(j);
                let nx = nodes.normal(j);
                g[j] = h * kernels::biharmonic2d_re(x, y, &rule);
                gnx[j] = h * kernels::biharmonic2d_dn_x_re(x, y, nx, &rule);
                gny[j] = h * kernels::biharmonic2d_dn_y_re(x, y, ny, &rule);
                gnxy[j] = h * kernels::biharmonic2d_dn_xy_re(x, y, nx, ny, &rule);
            }
            [g, gnx, gny, gnxy]
        })
        .collect();
    for (i, [g, gnx, gny, gnxy]) in blocks.iter().enumerate() {
        for j in 0..n {
            // u = -Σ (w u* + v ∂u*/∂n_x)
            a[(i, j)] = -gnx[j];
            a[(i, n + j)] = -g[j];
            // ∂u/∂n = -Σ (w ∂u*/∂n_y + v ∂²u*/∂n_x∂n_y)
            a[(n + i, j)] = -gnxy[j];
            a[(n + i, n + j)] = -gny[j];
        }
    }
    let b = DVector::from_fn(2 * n, |r, _| {
        let i = r % n;
        let bv = spec.boundary_value(nodes.point(i), nodes.normal(i));
        if r < n {
            bv.dirichlet.re
        } else {
            bv.neumann
        }
    });
    (a, b)
}

impl NystromSolution {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Field at the given points by the trapezoid rule on the nodes.
    pub fn field(&self, spec: &ProblemSpec, targets: &[f64]) -> Result<Vec<f64>> {
        let lookup = LookupPotential::new(self);
        let u = eval_field_on(&lookup, spec, self.t, &self.nodes, targets)?;
        Ok(u.into_iter().map(|z| z.re).collect())
    }
}

/// Trigonometric interpolant of a nodal density, usable anywhere a network
/// potential is expected. Points are located on the curve by their
/// parameter value.
#[derive(Clone, Debug)]
pub struct LookupPotential {
    t: f64,
    /// Per channel: cosine and sine coefficients `a_k`, `b_k`, `k = 0..=N/2`.
    coeffs: Vec<(Vec<f64>, Vec<f64>)>,
    scale: f64,
}

impl LookupPotential {
    pub fn new(sol: &NystromSolution) -> Self {
        let n = sol.len();
        let half = n / 2;
        let alphas = &sol.nodes.params;
        let coeffs = (0..sol.density.cols)
            .map(|c| {
                let mut a = vec![0.0; half + 1];
                let mut b = vec![0.0; half + 1];
                for k in 0..=half {
                    let mut sa = 0.0;
                    let mut sb = 0.0;
                    for (j, &alpha) in alphas.iter().enumerate() {
                        let (s, co) = (k as f64 * alpha).sin_cos();
                        let v = sol.density.get(j, c);
                        sa += v * co;
                        sb += v * s;
                    }
                    let w = if k == 0 || (n.is_multiple_of(2) && k == half) { 1.0 } else { 2.0 };
                    a[k] = w * sa / n as f64;
                    b[k] = w * sb / n as f64;
                }
                (a, b)
            })
            .collect();
        Self {
            t: sol.t,
            coeffs,
            scale: 1.0,
        }
    }

    /// The same density multiplied by `c`.
    pub fn scaled(mut self, c: f64) -> Self {
        self.scale *= c;
        self
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn value(&self, channel: usize, alpha: f64) -> f64 {
        let (a, b) = &self.coeffs[channel];
        let mut s = 0.0;
        for k in 0..a.len() {
            let (sn, cs) = (k as f64 * alpha).sin_cos();
            s += a[k] * cs + b[k] * sn;
        }
        self.scale * s
    }
}

impl Potential for LookupPotential {
    fn outputs(&self) -> usize {
        self.coeffs.len()
    }

    fn evaluate(&self, _t: f64, sample: &BoundarySample) -> Matrix {
        let outputs = self.outputs();
        let data: Vec<f64> = (0..sample.len())
            .into_par_iter()
            .flat_map_iter(|k| {
                let alpha = sample.params[k * sample.param_dim];
                (0..outputs).map(move |c| self.value(c, alpha))
            })
            .collect();
        Matrix::from_vec(sample.len(), outputs, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bie::{relative_l2_real, FieldGrid};
    use crate::geometry::CurveFamily;

    fn polar_error(spec: &ProblemSpec, n: usize) -> f64 {
        let sol = nystrom_solve(spec, 0.0, n).unwrap();
        let grid = FieldGrid::polar(12, 48, 0.9);
        let pts = grid.kept_points();
        let u = sol.field(spec, &pts).unwrap();
        let truth: Vec<f64> = pts.chunks(2).map(|p| spec.exact_solution(p).unwrap()).collect();
        relative_l2_real(&u, &truth).unwrap()
    }

    #[test]
    fn unit_circle_refinement_is_monotone() {
        let spec = ProblemSpec::laplace_on(CurveFamily::UnitCircle).unwrap();
        let errs: Vec<f64> = [128, 256, 512].iter().map(|&n| polar_error(&spec, n)).collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        assert!(errs[2] < 5e-3, "{errs:?}");
    }

    #[test]
    fn constant_data_reproduces_constant_field() {
        let spec = ProblemSpec::laplace().with_t_range(1.15, 1.15).unwrap();
        let curve = spec.curve().unwrap();
        let h = TAU / 256.0;
        let alphas: Vec<f64> = (0..256).map(|i| h * i as f64).collect();
        let nodes = curve.sample_at(1.15, &alphas).unwrap();
        let (a, _) = laplace_system(&spec, &nodes, h);
        let b = DVector::from_element(256, 1.0);
        let x = solve(&a, &b).unwrap();
        let density = Matrix::from_vec(256, 1, x.iter().copied().collect());
        let sol = NystromSolution {
            kind: spec.kind,
            t: 1.15,
            nodes,
            density,
            residual: 0.0,
        };
        let pts = [0.1, 0.2, -0.3, 0.1, 0.0, -0.5];
        for u in sol.field(&spec, &pts).unwrap() {
            assert!((u - 1.0).abs() < 1e-2, "{u}");
        }
    }

    #[test]
    fn too_few_nodes_is_an_argument_error() {
        let spec = ProblemSpec::laplace_on(CurveFamily::UnitCircle).unwrap();
        assert!(matches!(nystrom_solve(&spec, 0.0, 3), Err(Error::Argument(_))));
    }

    #[test]
    fn lookup_interpolates_nodes_exactly() {
        let spec = ProblemSpec::laplace();
        let sol = nystrom_solve(&spec, 1.15, 128).unwrap();
        let lookup = LookupPotential::new(&sol);
        let v = lookup.evaluate(1.15, &sol.nodes);
        for i in 0..sol.len() {
            assert!((v.get(i, 0) - sol.density.get(i, 0)).abs() < 1e-9);
        }
    }

    #[test]
    fn biharmonic_refinement_is_monotone() {
        let spec = ProblemSpec::biharmonic();
        let curve = spec.curve().unwrap();
        let grid = FieldGrid::interior(curve, 1.35, 30, 0.05).unwrap();
        let pts = grid.kept_points();
        let truth: Vec<f64> = pts.chunks(2).map(|p| spec.exact_solution(p).unwrap()).collect();
        let errs: Vec<f64> = [128, 256, 512]
            .iter()
            .map(|&n| {
                let sol = nystrom_solve(&spec, 1.35, n).unwrap();
                relative_l2_real(&sol.field(&spec, &pts).unwrap(), &truth).unwrap()
            })
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        assert!(errs[2] < 1e-3, "{errs:?}");
    }
}
