//! Matrix-valued reverse-mode tape.
//!
//! Nodes are appended in evaluation order, which is already a topological
//! order, so `backward` is a single reverse sweep. Each node keeps the
//! forward values its adjoint needs.

use std::sync::Arc;

use rayon::prelude::*;

use crate::autodiff::optim::{gelu, gelu_derivative};
use crate::error::{Error, Result};

/// Right-hand sides up to this many columns take the streaming path in
/// block products.
const NARROW: usize = 4;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length mismatch");
        Self { rows, cols, data }
    }

    pub fn column(data: Vec<f64>) -> Self {
        let rows = data.len();
        Self::from_vec(rows, 1, data)
    }

    pub fn scalar(x: f64) -> Self {
        Self::from_vec(1, 1, vec![x])
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec(self.rows, self.cols, self.data.iter().map(|&x| f(x)).collect())
    }

    fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// `c = alpha · op(a) · op(b) + beta · c` with optional transposes, through
/// `matrixmultiply`'s stride interface.
#[allow(clippy::too_many_arguments)]
fn gemm(
    alpha: f64,
    a: &Matrix,
    trans_a: bool,
    b: &Matrix,
    trans_b: bool,
    beta: f64,
    c: &mut Matrix,
) {
    let (m, k) = if trans_a { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let (kb, n) = if trans_b { (b.cols, b.rows) } else { (b.rows, b.cols) };
    assert_eq!(k, kb, "inner dimensions differ");
    assert_eq!((c.rows, c.cols), (m, n), "output shape mismatch");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if trans_a { (1, a.cols as isize) } else { (a.cols as isize, 1) };
    let (rsb, csb) = if trans_b { (1, b.cols as isize) } else { (b.cols as isize, 1) };
    // SAFETY: the shapes and strides above describe exactly the buffers of
    // `a`, `b` and `c`, and `c` does not alias the inputs.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut c = Matrix::zeros(a.rows, b.cols);
    gemm(1.0, a, false, b, false, 0.0, &mut c);
    c
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Square(Var),
    Gelu(Var),
    Cos(Var),
    Sin(Var),
    Clamp(Var, f64, f64),
    ConcatCols(Var, Var),
    SliceCols(Var, usize),
    RepeatRows(Var, Arc<Vec<usize>>),
    RowSum(Var),
    Sum(Var),
    BlockMatMul(Arc<Vec<Matrix>>, Var),
}

struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Deliberate adjoint faults for exercising the gradient checker.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Fault {
    #[default]
    None,
    /// Scale the GeLU adjoint by the given factor.
    GeluAdjoint(f64),
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    fault: Fault,
}

/// Adjoints of every node that depends on a parameter.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads[v.0].as_ref()
    }

    pub fn take(&mut self, v: Var) -> Option<Matrix> {
        self.grads[v.0].take()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    #[doc(hidden)]
    pub fn with_fault(fault: Fault) -> Self {
        Self {
            nodes: Vec::new(),
            fault,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A differentiable input.
    pub fn param(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Leaf, true)
    }

    /// A constant input; no adjoint is accumulated for it.
    pub fn constant(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = matmul(self.value(a), self.value(b));
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::MatMul(a, b), rg)
    }

    fn zip(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "elementwise shape mismatch");
        let data = va.data.iter().zip(&vb.data).map(|(&x, &y)| f(x, y)).collect();
        let out = Matrix::from_vec(va.rows, va.cols, data);
        let rg = self.rg(a) || self.rg(b);
        self.push(out, op, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    /// `a + 1·row`, broadcasting a `1 × c` row over every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (va, vr) = (self.value(a), self.value(row));
        assert_eq!((vr.rows, vr.cols), (1, va.cols), "bias shape mismatch");
        let mut out = va.clone();
        for chunk in out.data.chunks_exact_mut(va.cols) {
            for (o, b) in chunk.iter_mut().zip(&vr.data) {
                *o += b;
            }
        }
        let rg = self.rg(a) || self.rg(row);
        self.push(out, Op::AddRow(a, row), rg)
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let out = self.value(a).map(f);
        let rg = self.rg(a);
        self.push(out, op, rg)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        self.unary(a, Op::Scale(a, s), |x| s * x)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, Op::Square(a), |x| x * x)
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Gelu(a), gelu)
    }

    pub fn cos(&mut self, a: Var) -> Var {
        self.unary(a, Op::Cos(a), f64::cos)
    }

    pub fn sin(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sin(a), f64::sin)
    }

    /// Elementwise clamp to `[lo, hi]`; the adjoint is zero where the clamp
    /// is active.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.unary(a, Op::Clamp(a, lo, hi), |x| x.clamp(lo, hi))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.rows, vb.rows, "concat row mismatch");
        let cols = va.cols + vb.cols;
        let mut data = Vec::with_capacity(va.rows * cols);
        for r in 0..va.rows {
            data.extend_from_slice(va.row(r));
            data.extend_from_slice(vb.row(r));
        }
        let out = Matrix::from_vec(va.rows, cols, data);
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::ConcatCols(a, b), rg)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let va = self.value(a);
        assert!(start + len <= va.cols, "column slice out of range");
        let mut data = Vec::with_capacity(va.rows * len);
        for r in 0..va.rows {
            data.extend_from_slice(&va.row(r)[start..start + len]);
        }
        let out = Matrix::from_vec(va.rows, len, data);
        let rg = self.rg(a);
        self.push(out, Op::SliceCols(a, start), rg)
    }

    /// Row `g` of `a` repeated `counts[g]` times, in order.
    pub fn repeat_rows(&mut self, a: Var, counts: Arc<Vec<usize>>) -> Var {
        let va = self.value(a);
        assert_eq!(va.rows, counts.len(), "one count per row");
        let total: usize = counts.iter().sum();
        let mut data = Vec::with_capacity(total * va.cols);
        for (g, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                data.extend_from_slice(va.row(g));
            }
        }
        let out = Matrix::from_vec(total, va.cols, data);
        let rg = self.rg(a);
        self.push(out, Op::RepeatRows(a, counts), rg)
    }

    pub fn row_sum(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let data = (0..va.rows).map(|r| va.row(r).iter().sum()).collect();
        let out = Matrix::column(data);
        let rg = self.rg(a);
        self.push(out, Op::RowSum(a), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).data.iter().sum();
        let rg = self.rg(a);
        self.push(Matrix::scalar(total), Op::Sum(a), rg)
    }

    /// `blockdiag(K_0, K_1, …) · a`: the rows of `a` are split into
    /// consecutive groups of `K_j.cols` rows and each group is multiplied by
    /// its constant block.
    pub fn block_matmul(&mut self, blocks: Arc<Vec<Matrix>>, a: Var) -> Var {
        let va = self.value(a);
        let in_rows: usize = blocks.iter().map(|b| b.cols).sum();
        assert_eq!(in_rows, va.rows, "block columns must cover the input rows");
        let out_rows: usize = blocks.iter().map(|b| b.rows).sum();
        let mut out = Matrix::zeros(out_rows, va.cols);
        let (mut r_in, mut r_out) = (0, 0);
        let c = va.cols;
        for b in blocks.iter() {
            let inp = &va.data[r_in * c..(r_in + b.cols) * c];
            let o = &mut out.data[r_out * c..(r_out + b.rows) * c];
            if c <= NARROW {
                o.par_chunks_mut(c).zip(b.data.par_chunks(b.cols)).for_each(|(o_row, k_row)| {
                    for (kv, x) in k_row.iter().zip(inp.chunks_exact(c)) {
                        for (oc, xc) in o_row.iter_mut().zip(x) {
                            *oc += kv * xc;
                        }
                    }
                });
            } else {
                let inp = sub_rows(va, r_in, b.cols);
                let mut prod = Matrix::zeros(b.rows, c);
                gemm(1.0, b, false, &inp, false, 0.0, &mut prod);
                o.copy_from_slice(&prod.data);
            }
            r_in += b.cols;
            r_out += b.rows;
        }
        let rg = self.rg(a);
        self.push(out, Op::BlockMatMul(blocks, a), rg)
    }

    /// Adjoints of the scalar `root` with respect to every node on the tape.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let shape = self.value(root).shape();
        if shape != (1, 1) {
            return Err(Error::Argument(format!(
                "backward needs a scalar root, got a {}x{} matrix",
                shape.0, shape.1
            )));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Matrix::scalar(1.0));
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let mut acc = |v: Var, d: Matrix| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&d),
                slot @ None => *slot = Some(d),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if self.rg(*a) {
                    let mut da = Matrix::zeros(va.rows, va.cols);
                    gemm(1.0, g, false, vb, true, 0.0, &mut da);
                    acc(*a, da);
                }
                if self.rg(*b) {
                    let mut db = Matrix::zeros(vb.rows, vb.cols);
                    gemm(1.0, va, true, g, false, 0.0, &mut db);
                    acc(*b, db);
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                acc(*a, elementwise(g, vb, |x, y| x * y));
                acc(*b, elementwise(g, va, |x, y| x * y));
            }
            Op::AddRow(a, row) => {
                acc(*a, g.clone());
                let mut dr = Matrix::zeros(1, g.cols);
                for chunk in g.data.chunks_exact(g.cols) {
                    for (d, x) in dr.data.iter_mut().zip(chunk) {
                        *d += x;
                    }
                }
                acc(*row, dr);
            }
            Op::Scale(a, s) => acc(*a, g.map(|x| s * x)),
            Op::Square(a) => acc(*a, elementwise(g, self.value(*a), |x, y| 2.0 * x * y)),
            Op::Gelu(a) => {
                let factor = match self.fault {
                    Fault::GeluAdjoint(f) => f,
                    Fault::None => 1.0,
                };
                acc(
                    *a,
                    elementwise(g, self.value(*a), |x, z| factor * x * gelu_derivative(z)),
                )
            }
            Op::Cos(a) => acc(*a, elementwise(g, self.value(*a), |x, z| -x * z.sin())),
            Op::Sin(a) => acc(*a, elementwise(g, self.value(*a), |x, z| x * z.cos())),
            Op::Clamp(a, lo, hi) => acc(
                *a,
                elementwise(g, self.value(*a), |x, z| if z > *lo && z < *hi { x } else { 0.0 }),
            ),
            Op::ConcatCols(a, b) => {
                let ca = self.value(*a).cols;
                let cb = self.value(*b).cols;
                let mut da = Vec::with_capacity(g.rows * ca);
                let mut db = Vec::with_capacity(g.rows * cb);
                for r in 0..g.rows {
                    let row = g.row(r);
                    da.extend_from_slice(&row[..ca]);
                    db.extend_from_slice(&row[ca..]);
                }
                acc(*a, Matrix::from_vec(g.rows, ca, da));
                acc(*b, Matrix::from_vec(g.rows, cb, db));
            }
            Op::SliceCols(a, start) => {
                let va = self.value(*a);
                let mut da = Matrix::zeros(va.rows, va.cols);
                for r in 0..g.rows {
                    da.data[r * va.cols + start..r * va.cols + start + g.cols]
                        .copy_from_slice(g.row(r));
                }
                acc(*a, da);
            }
            Op::RepeatRows(a, counts) => {
                let cols = g.cols;
                let mut da = Matrix::zeros(counts.len(), cols);
                let mut r = 0;
                for (grp, &c) in counts.iter().enumerate() {
                    let dst = &mut da.data[grp * cols..(grp + 1) * cols];
                    for _ in 0..c {
                        for (d, x) in dst.iter_mut().zip(g.row(r)) {
                            *d += x;
                        }
                        r += 1;
                    }
                }
                acc(*a, da);
            }
            Op::RowSum(a) => {
                let va = self.value(*a);
                let mut da = Matrix::zeros(va.rows, va.cols);
                for r in 0..va.rows {
                    da.data[r * va.cols..(r + 1) * va.cols].fill(g.data[r]);
                }
                acc(*a, da);
            }
            Op::Sum(a) => {
                let va = self.value(*a);
                acc(*a, Matrix::from_vec(va.rows, va.cols, vec![g.data[0]; va.data.len()]));
            }
            Op::BlockMatMul(blocks, a) => {
                let va = self.value(*a);
                let mut da = Matrix::zeros(va.rows, va.cols);
                let (mut r_in, mut r_out) = (0, 0);
                let c = va.cols;
                for b in blocks.iter() {
                    let d = &mut da.data[r_in * c..(r_in + b.cols) * c];
                    if c <= NARROW {
                        for (k_row, go) in b.data.chunks_exact(b.cols).zip(g.data[r_out * c..].chunks_exact(c)) {
                            for (kv, dk) in k_row.iter().zip(d.chunks_exact_mut(c)) {
                                for (x, gc) in dk.iter_mut().zip(go) {
                                    *x += kv * gc;
                                }
                            }
                        }
                    } else {
                        let go = sub_rows(g, r_out, b.rows);
                        let mut prod = Matrix::zeros(b.cols, c);
                        gemm(1.0, b, true, &go, false, 0.0, &mut prod);
                        d.copy_from_slice(&prod.data);
                    }
                    r_in += b.cols;
                    r_out += b.rows;
                }
                acc(*a, da);
            }
        }
    }
}

fn elementwise(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    let data = a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect();
    Matrix::from_vec(a.rows, a.cols, data)
}

fn sub_rows(m: &Matrix, start: usize, count: usize) -> Matrix {
    Matrix::from_vec(
        count,
        m.cols,
        m.data[start * m.cols..(start + count) * m.cols].to_vec(),
    )
}
