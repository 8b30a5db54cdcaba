//! Monte-Carlo boundary-integral loss.
//!
//! For every sampled geometry `t_j` the single-layer representation is
//! evaluated at the observation points by the Monte-Carlo rule
//! `(|D|/M) Σ_k v(x_k; t_j) u*(x_k, y_i)`, where `|D|` is the measure of the
//! parameter domain, and compared against the boundary data. The kernel
//! matrices are constants of the batch; only `v` carries gradients.

use std::sync::Arc;

use rayon::prelude::*;

use crate::autodiff::{Matrix, Tape, Var};
use crate::bie::batch::{GeometryBatch, TrainBatch};
use crate::bie::problem::{ProblemKind, ProblemSpec};
use crate::error::{Error, Result};
use crate::geometry::BoundarySample;
use crate::kernels;
use crate::operator_net::{OperatorModel, Potential};

/// Kernel matrices (targets × sources), already multiplied by the
/// quadrature weight `|D|/M`.
///
/// * Laplace: `[u*]`
/// * Helmholtz: `[Re u*, Im u*]`
/// * bi-harmonic: `[u*, ∂u*/∂n_x]`, plus `[∂u*/∂n_y, ∂²u*/∂n_x∂n_y]` when
///   target normals are given.
pub fn kernel_blocks(
    spec: &ProblemSpec,
    sources: &BoundarySample,
    targets: &[f64],
    target_normals: Option<&[f64]>,
) -> Vec<Matrix> {
    let dim = sources.dim;
    let m = sources.len();
    let n = targets.len() / dim;
    let w = sources.weight();
    let rule = spec.truncation;
    let k = spec.wavenumber;
    let count = match (spec.kind, target_normals) {
        (ProblemKind::Laplace2d, _) => 1,
        (ProblemKind::Helmholtz3d, _) => 2,
        (ProblemKind::Biharmonic2d, None) => 2,
        (ProblemKind::Biharmonic2d, Some(_)) => 4,
    };
    let mut blocks: Vec<Matrix> = (0..count).map(|_| Matrix::zeros(n, m)).collect();
    if spec.kind == ProblemKind::Helmholtz3d {
        let (re, im) = blocks.split_at_mut(1);
        let coord = |c: usize| -> Vec<f64> { sources.points.iter().skip(c).step_by(3).copied().collect() };
        let (sx, sy, sz) = (coord(0), coord(1), coord(2));
        re[0].data
            .par_chunks_mut(m)
            .zip(im[0].data.par_chunks_mut(m))
            .enumerate()
            .for_each(|(i, (row_re, row_im))| {
                let y = &targets[3 * i..3 * i + 3];
                let it = sx.iter().zip(&sy).zip(&sz).zip(row_re.iter_mut().zip(row_im.iter_mut()));
                for (((x0, x1), x2), (out_re, out_im)) in it {
                    let (d0, d1, d2) = (x0 - y[0], x1 - y[1], x2 - y[2]);
                    let g = kernels::helmholtz3d_at((d0 * d0 + d1 * d1 + d2 * d2).sqrt(), k, &rule);
                    *out_re = w * g.re;
                    *out_im = w * g.im;
                }
            });
        return blocks;
    }
    let mut rows: Vec<Vec<&mut [f64]>> = (0..n).map(|_| Vec::with_capacity(count)).collect();
    for b in blocks.iter_mut() {
        for (i, chunk) in b.data.chunks_mut(m).enumerate() {
            rows[i].push(chunk);
        }
    }
    rows.par_iter_mut().enumerate().for_each(|(i, row)| {
        let y = &targets[i * dim..(i + 1) * dim];
        let ny = target_normals.map(|nn| &nn[i * dim..(i + 1) * dim]);
        for kk in 0..m {
            let x = sources.point(kk);
            match spec.kind {
                ProblemKind::Laplace2d => row[0][kk] = w * kernels::laplace2d_re(x, y, &rule),
                ProblemKind::Helmholtz3d => {
                    let g = kernels::helmholtz3d(x, y, k, &rule);
                    row[0][kk] = w * g.re;
                    row[1][kk] = w * g.im;
                }
                ProblemKind::Biharmonic2d => {
                    let nx = sources.normal(kk);
                    row[0][kk] = w * kernels::biharmonic2d_re(x, y, &rule);
                    row[1][kk] = w * kernels::biharmonic2d_dn_x_re(x, y, nx, &rule);
                    if let Some(ny) = ny {
                        row[2][kk] = w * kernels::biharmonic2d_dn_y_re(x, y, ny, &rule);
                        row[3][kk] = w * kernels::biharmonic2d_dn_xy_re(x, y, nx, ny, &rule);
                    }
                }
            }
        }
    });
    blocks
}

/// Kernel blocks for every geometry of a batch, regrouped by kind so each
/// entry can feed one block-diagonal product.
pub struct BatchKernels {
    pub blocks: Vec<Arc<Vec<Matrix>>>,
}

impl BatchKernels {
    pub fn assemble(spec: &ProblemSpec, batch: &TrainBatch) -> Self {
        let per_geom: Vec<Vec<Matrix>> = batch
            .geometries
            .iter()
            .map(|g| geometry_kernels(spec, g))
            .collect();
        let kinds = per_geom.first().map_or(0, Vec::len);
        let mut grouped: Vec<Vec<Matrix>> = (0..kinds).map(|_| Vec::new()).collect();
        for g in per_geom {
            for (slot, m) in grouped.iter_mut().zip(g) {
                slot.push(m);
            }
        }
        Self {
            blocks: grouped.into_iter().map(Arc::new).collect(),
        }
    }
}

fn geometry_kernels(spec: &ProblemSpec, g: &GeometryBatch) -> Vec<Matrix> {
    let normals = (spec.kind == ProblemKind::Biharmonic2d).then_some(g.observation.normals.as_slice());
    kernel_blocks(spec, &g.integration, &g.observation.points, normals)
}

fn column(tape: &mut Tape, data: Vec<f64>) -> Var {
    tape.constant(Matrix::column(data))
}

/// Record the loss for potential values `v` (`Σ M_j × outputs`, grouped by
/// geometry in batch order).
pub fn record_loss(
    tape: &mut Tape,
    spec: &ProblemSpec,
    batch: &TrainBatch,
    kernels: &BatchKernels,
    v: Var,
) -> Var {
    let count = batch.observation_count() as f64;
    let re: Vec<f64> = batch.geometries.iter().flat_map(|g| g.dirichlet.iter().map(|z| z.re)).collect();
    let sq = match spec.kind {
        ProblemKind::Laplace2d => {
            let u = tape.block_matmul(kernels.blocks[0].clone(), v);
            let target = column(tape, re);
            let r = tape.sub(u, target);
            let s = tape.square(r);
            tape.sum(s)
        }
        ProblemKind::Helmholtz3d => {
            // (Kr + i Ki)(vr + i vi)
            let a = tape.block_matmul(kernels.blocks[0].clone(), v);
            let b = tape.block_matmul(kernels.blocks[1].clone(), v);
            let (a_r, a_i) = (tape.slice_cols(a, 0, 1), tape.slice_cols(a, 1, 1));
            let (b_r, b_i) = (tape.slice_cols(b, 0, 1), tape.slice_cols(b, 1, 1));
            let ur = tape.sub(a_r, b_i);
            let ui = tape.add(a_i, b_r);
            let im: Vec<f64> = batch.geometries.iter().flat_map(|g| g.dirichlet.iter().map(|z| z.im)).collect();
            let tr = column(tape, re);
            let ti = column(tape, im);
            let rr = tape.sub(ur, tr);
            let ri = tape.sub(ui, ti);
            let sr = tape.square(rr);
            let si = tape.square(ri);
            let s = tape.add(sr, si);
            tape.sum(s)
        }
        ProblemKind::Biharmonic2d => {
            // channel 0: v, channel 1: w = ∂v/∂n;
            // u = -Σ (w u* + v ∂u*/∂n_x),  ∂u/∂n_y = -Σ (w ∂u*/∂n_y + v ∂²u*/∂n_x∂n_y)
            let residual = |tape: &mut Tape, k_w: usize, k_v: usize, target: Vec<f64>| {
                let a = tape.block_matmul(kernels.blocks[k_w].clone(), v);
                let b = tape.block_matmul(kernels.blocks[k_v].clone(), v);
                let aw = tape.slice_cols(a, 1, 1);
                let bv = tape.slice_cols(b, 0, 1);
                let u = tape.add(aw, bv);
                let u = tape.scale(u, -1.0);
                let t = column(tape, target);
                let r = tape.sub(u, t);
                let s = tape.square(r);
                tape.sum(s)
            };
            let dir = residual(tape, 0, 1, re);
            let neu_target: Vec<f64> = batch.geometries.iter().flat_map(|g| g.neumann.iter().copied()).collect();
            let neu = residual(tape, 2, 3, neu_target);
            tape.add(dir, neu)
        }
    };
    tape.scale(sq, 1.0 / count)
}

fn stacked_points(batch: &TrainBatch) -> (Matrix, Arc<Vec<usize>>) {
    let dim = batch.geometries[0].integration.dim;
    let counts: Vec<usize> = batch.geometries.iter().map(|g| g.integration.len()).collect();
    let mut data = Vec::with_capacity(counts.iter().sum::<usize>() * dim);
    for g in &batch.geometries {
        data.extend_from_slice(&g.integration.points);
    }
    let rows = data.len() / dim;
    (Matrix::from_vec(rows, dim, data), Arc::new(counts))
}

fn check_finite(loss: f64, batch: &TrainBatch) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::Training {
            step: batch.step,
            seed: batch.seed,
            message: format!("loss evaluated to {loss}"),
        })
    }
}

/// Loss of an arbitrary potential on a batch (no gradients).
pub fn mc_loss(potential: &dyn Potential, spec: &ProblemSpec, batch: &TrainBatch) -> Result<f64> {
    let kernels = BatchKernels::assemble(spec, batch);
    mc_loss_with(potential, spec, batch, &kernels)
}

pub fn mc_loss_with(
    potential: &dyn Potential,
    spec: &ProblemSpec,
    batch: &TrainBatch,
    kernels: &BatchKernels,
) -> Result<f64> {
    let outputs = potential.outputs();
    let mut data = Vec::new();
    for g in &batch.geometries {
        data.extend(potential.evaluate(g.t, &g.integration).data);
    }
    let rows = data.len() / outputs;
    let mut tape = Tape::new();
    let v = tape.constant(Matrix::from_vec(rows, outputs, data));
    let loss = record_loss(&mut tape, spec, batch, kernels, v);
    check_finite(tape.value(loss).data[0], batch)
}

/// Loss and its gradient with respect to every model parameter (in
/// `model.params()` order). A frozen Fourier matrix gets a zero gradient.
pub fn loss_and_gradient(
    model: &OperatorModel,
    spec: &ProblemSpec,
    batch: &TrainBatch,
    kernels: &BatchKernels,
) -> Result<(f64, Vec<Matrix>)> {
    loss_and_gradient_on(Tape::new(), model, spec, batch, kernels)
}

#[doc(hidden)]
pub fn loss_and_gradient_on(
    mut tape: Tape,
    model: &OperatorModel,
    spec: &ProblemSpec,
    batch: &TrainBatch,
    kernels: &BatchKernels,
) -> Result<(f64, Vec<Matrix>)> {
    let vars = model.bind(&mut tape, true);
    let (points, counts) = stacked_points(batch);
    let v = model.forward(&mut tape, &vars, &batch.ts(), points, counts);
    let loss_var = record_loss(&mut tape, spec, batch, kernels, v);
    let loss = check_finite(tape.value(loss_var).data[0], batch)?;
    let mut grads = tape.backward(loss_var)?;
    let out = vars
        .iter()
        .zip(model.params())
        .map(|(&var, p)| {
            grads
                .take(var)
                .unwrap_or_else(|| Matrix::zeros(p.value.rows, p.value.cols))
        })
        .collect();
    Ok((loss, out))
}

/// Loss of the model on a batch without recording gradients.
pub fn model_loss(model: &OperatorModel, spec: &ProblemSpec, batch: &TrainBatch, kernels: &BatchKernels) -> Result<f64> {
    let mut tape = Tape::new();
    let vars = model.bind(&mut tape, false);
    let (points, counts) = stacked_points(batch);
    let v = model.forward(&mut tape, &vars, &batch.ts(), points, counts);
    let loss = record_loss(&mut tape, spec, batch, kernels, v);
    check_finite(tape.value(loss).data[0], batch)
}
