//! Dense `f64` tensors and a reverse-mode computation record.
//!
//! [`Tensor`] is a plain row-major array. Differentiable math happens on a
//! [`Tape`]: parameters and constants are lifted onto it as [`Var`] handles,
//! every operation appends a node, and [`Tape::backward`] walks the nodes in
//! reverse to produce gradients for the registered parameters.
//!
//! Model and solver code is written once against [`TensorLike`], which both
//! `Tensor` (untracked, fast path for rollouts) and `Var` (tracked) implement.
//! The forward kernels are shared, so both paths produce identical values.
//!
//! A tape lives for exactly one loss evaluation and is never shared across
//! threads.

use std::cell::RefCell;

use crate::error::{Error, Result};

/// Row-major dense array of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::ShapeMismatch {
                op: "Tensor::new",
                lhs: shape,
                rhs: vec![data.len()],
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Tensor::new(vec![rows, cols], data)
    }

    /// Stacks equal-length rows into a `[rows, cols]` matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::ShapeMismatch {
                    op: "Tensor::from_rows",
                    lhs: vec![cols],
                    rhs: vec![r.len()],
                });
            }
            data.extend_from_slice(r);
        }
        Tensor::matrix(rows.len(), cols, data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1 && self.shape.len() <= 1
    }

    /// The single value of a scalar tensor.
    pub fn item(&self) -> Result<f64> {
        if self.is_scalar() {
            Ok(self.data[0])
        } else {
            Err(Error::NotScalar(self.shape.clone()))
        }
    }

    /// Row `i` of a 2-D tensor.
    pub fn row(&self, i: usize) -> &[f64] {
        let cols = self.shape[1];
        &self.data[i * cols..(i + 1) * cols]
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                lhs: self.shape,
                rhs: shape,
            });
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

// ---------------------------------------------------------------------------
// Kernels shared by the plain and the tracked path.
// ---------------------------------------------------------------------------

/// Strided read-only matrix view for the GEMM wrapper.
#[derive(Clone, Copy)]
struct MatRef<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    rs: isize,
    cs: isize,
}

impl<'a> MatRef<'a> {
    fn new(data: &'a [f64], rows: usize, cols: usize) -> Self {
        MatRef {
            data,
            rows,
            cols,
            rs: cols as isize,
            cs: 1,
        }
    }

    fn t(self) -> Self {
        MatRef {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[(i as isize * self.rs + j as isize * self.cs) as usize]
    }
}

// Below this many multiply-adds the packing overhead of the blocked kernel
// dominates.
const SMALL_GEMM: usize = 1 << 15;

/// `c ← alpha·a·b + beta·c`, with `c` row-major `[a.rows, b.cols]`.
fn gemm(alpha: f64, a: MatRef<'_>, b: MatRef<'_>, beta: f64, c: &mut [f64]) {
    let (m, k, n) = (a.rows, a.cols, b.cols);
    assert_eq!(k, b.rows);
    assert_eq!(c.len(), m * n);
    assert!(a.data.len() >= m * k && b.data.len() >= k * n);
    if m * k * n < SMALL_GEMM {
        for i in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for p in 0..k {
                    acc += a.at(i, p) * b.at(p, j);
                }
                let out = &mut c[i * n + j];
                *out = if beta == 0.0 {
                    alpha * acc
                } else {
                    beta * *out + alpha * acc
                };
            }
        }
        return;
    }
    // SAFETY: the asserts above guarantee every strided access of both
    // operands stays inside their slices, and `c` is exactly m×n row-major.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            a.rs,
            a.cs,
            b.data.as_ptr(),
            b.rs,
            b.cs,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn mismatch(op: &'static str, a: &[usize], b: &[usize]) -> Error {
    Error::ShapeMismatch {
        op,
        lhs: a.to_vec(),
        rhs: b.to_vec(),
    }
}

/// `a·b` for `[m,k]·[k,n]` or `[m,k]·[k]`.
fn matmul_kernel(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = match a.shape[..] {
        [m, k] => (m, k),
        _ => return Err(mismatch("matmul", &a.shape, &b.shape)),
    };
    let (n, out_shape) = match b.shape[..] {
        [kb, n] if kb == k => (n, vec![m, n]),
        [kb] if kb == k => (1, vec![m]),
        _ => return Err(mismatch("matmul", &a.shape, &b.shape)),
    };
    let mut out = vec![0.0; m * n];
    gemm(
        1.0,
        MatRef::new(&a.data, m, k),
        MatRef::new(&b.data, k, n),
        0.0,
        &mut out,
    );
    Ok(Tensor {
        shape: out_shape,
        data: out,
    })
}

/// `a·bᵀ` for `[m,k]·[n,k]ᵀ`.
fn matmul_nt_kernel(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k, n) = match (&a.shape[..], &b.shape[..]) {
        (&[m, k], &[n, kb]) if k == kb => (m, k, n),
        _ => return Err(mismatch("matmul_nt", &a.shape, &b.shape)),
    };
    let mut out = vec![0.0; m * n];
    gemm(
        1.0,
        MatRef::new(&a.data, m, k),
        MatRef::new(&b.data, n, k).t(),
        0.0,
        &mut out,
    );
    Ok(Tensor {
        shape: vec![m, n],
        data: out,
    })
}

fn zip_kernel(
    op: &'static str,
    a: &Tensor,
    b: &Tensor,
    f: impl Fn(f64, f64) -> f64,
) -> Result<Tensor> {
    if a.shape != b.shape {
        return Err(mismatch(op, &a.shape, &b.shape));
    }
    Ok(Tensor {
        shape: a.shape.clone(),
        data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
    })
}

fn add_bias_kernel(a: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let cols = match (&a.shape[..], &bias.shape[..]) {
        (&[_, c], &[cb]) if c == cb => c,
        _ => return Err(mismatch("add_bias", &a.shape, &bias.shape)),
    };
    let mut data = a.data.clone();
    for row in data.chunks_exact_mut(cols.max(1)) {
        for (v, b) in row.iter_mut().zip(&bias.data) {
            *v += b;
        }
    }
    Ok(Tensor {
        shape: a.shape.clone(),
        data,
    })
}

fn map_kernel(a: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor {
        shape: a.shape.clone(),
        data: a.data.iter().map(|&x| f(x)).collect(),
    }
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

fn lincomb_kernel(base: &Tensor, terms: &[(f64, &Tensor)]) -> Result<Tensor> {
    let mut data = base.data.clone();
    for (c, t) in terms {
        if t.shape != base.shape {
            return Err(mismatch("lincomb", &base.shape, &t.shape));
        }
        for (v, x) in data.iter_mut().zip(&t.data) {
            *v += c * x;
        }
    }
    Ok(Tensor {
        shape: base.shape.clone(),
        data,
    })
}

fn sum_kernel(a: &Tensor) -> Tensor {
    Tensor::scalar(a.data.iter().sum())
}

fn mean_kernel(a: &Tensor) -> Tensor {
    Tensor::scalar(a.data.iter().sum::<f64>() / a.data.len() as f64)
}

// ---------------------------------------------------------------------------
// Common interface for plain and tracked values.
// ---------------------------------------------------------------------------

/// Operations available on both [`Tensor`] and [`Var`].
pub trait TensorLike: Sized + Clone {
    fn shape(&self) -> Vec<usize>;
    /// Runs `f` over the underlying values without copying them.
    fn with_data<R>(&self, f: impl FnOnce(&[f64]) -> R) -> R;
    /// Lifts a constant into the same domain as `self` (onto the same tape).
    fn lift(&self, value: Tensor) -> Self;

    fn matmul(&self, rhs: &Self) -> Result<Self>;
    /// `self · rhsᵀ`.
    fn matmul_nt(&self, rhs: &Self) -> Result<Self>;
    fn add(&self, rhs: &Self) -> Result<Self>;
    /// Adds a length-`c` vector to every row of an `[r, c]` matrix.
    fn add_bias(&self, bias: &Self) -> Result<Self>;
    fn sub(&self, rhs: &Self) -> Result<Self>;
    fn scale(&self, s: f64) -> Self;
    fn hadamard(&self, rhs: &Self) -> Result<Self>;
    fn tanh(&self) -> Self;
    fn relu(&self) -> Self;
    fn square(&self) -> Self;
    fn sum(&self) -> Self;
    fn mean(&self) -> Self;
    /// `self + Σ cᵢ·tᵢ`.
    fn lincomb(&self, terms: &[(f64, &Self)]) -> Result<Self>;

    /// Batched affine map `x·Wᵀ + b` for `x: [r, in]`, `W: [out, in]`.
    fn affine(&self, weight: &Self, bias: &Self) -> Result<Self> {
        self.matmul_nt(weight)?.add_bias(bias)
    }
}

impl TensorLike for Tensor {
    fn shape(&self) -> Vec<usize> {
        self.shape.clone()
    }
    fn with_data<R>(&self, f: impl FnOnce(&[f64]) -> R) -> R {
        f(&self.data)
    }
    fn lift(&self, value: Tensor) -> Self {
        value
    }
    fn matmul(&self, rhs: &Self) -> Result<Self> {
        matmul_kernel(self, rhs)
    }
    fn matmul_nt(&self, rhs: &Self) -> Result<Self> {
        matmul_nt_kernel(self, rhs)
    }
    fn add(&self, rhs: &Self) -> Result<Self> {
        zip_kernel("add", self, rhs, |a, b| a + b)
    }
    fn add_bias(&self, bias: &Self) -> Result<Self> {
        add_bias_kernel(self, bias)
    }
    fn sub(&self, rhs: &Self) -> Result<Self> {
        zip_kernel("sub", self, rhs, |a, b| a - b)
    }
    fn scale(&self, s: f64) -> Self {
        map_kernel(self, |x| s * x)
    }
    fn hadamard(&self, rhs: &Self) -> Result<Self> {
        zip_kernel("hadamard", self, rhs, |a, b| a * b)
    }
    fn tanh(&self) -> Self {
        map_kernel(self, f64::tanh)
    }
    fn relu(&self) -> Self {
        map_kernel(self, relu)
    }
    fn square(&self) -> Self {
        map_kernel(self, |x| x * x)
    }
    fn sum(&self) -> Self {
        sum_kernel(self)
    }
    fn mean(&self) -> Self {
        mean_kernel(self)
    }
    fn lincomb(&self, terms: &[(f64, &Self)]) -> Result<Self> {
        lincomb_kernel(self, terms)
    }
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    MatMulNt(usize, usize),
    Add(usize, usize),
    AddBias(usize, usize),
    Sub(usize, usize),
    Scale(usize, f64),
    Hadamard(usize, usize),
    Tanh(usize),
    Relu(usize),
    Square(usize),
    Sum(usize),
    Mean(usize),
    LinComb(usize, Vec<(f64, usize)>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Append-only computation record for a single loss evaluation.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    params: RefCell<Vec<(String, usize)>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var({}, {:?})", self.idx, self.value())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self,
            idx: nodes.len() - 1,
        }
    }

    /// A value that takes part in the forward math but receives no gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    /// A named leaf whose gradient is reported by [`Tape::backward`].
    pub fn param(&self, name: &str, value: Tensor) -> Var<'_> {
        let var = self.push(value, Op::Leaf, true);
        let mut params = self.params.borrow_mut();
        debug_assert!(
            params.iter().all(|(n, _)| n != name),
            "duplicate parameter `{name}`"
        );
        params.push((name.to_string(), var.idx));
        var
    }

    /// Registers every entry of `params` in order.
    pub fn params(&self, params: &ParamSet) -> Vec<Var<'_>> {
        params
            .iter()
            .map(|(name, t)| self.param(name, t.clone()))
            .collect()
    }

    fn unary(&self, a: Var<'_>, op: impl FnOnce(usize) -> Op, f: impl FnOnce(&Tensor) -> Tensor) -> Var<'_> {
        let (value, rg) = {
            let nodes = self.nodes.borrow();
            let n = &nodes[a.idx];
            (f(&n.value), n.requires_grad)
        };
        self.push(value, op(a.idx), rg)
    }

    fn binary(
        &self,
        a: Var<'_>,
        b: Var<'_>,
        op: impl FnOnce(usize, usize) -> Op,
        f: impl FnOnce(&Tensor, &Tensor) -> Result<Tensor>,
    ) -> Result<Var<'_>> {
        let (value, rg) = {
            let nodes = self.nodes.borrow();
            let (na, nb) = (&nodes[a.idx], &nodes[b.idx]);
            (f(&na.value, &nb.value)?, na.requires_grad || nb.requires_grad)
        };
        Ok(self.push(value, op(a.idx, b.idx), rg))
    }

    /// Reverse sweep from a scalar `loss`. Every registered parameter gets an
    /// entry, zero when the loss does not depend on it.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        assert!(
            std::ptr::eq(loss.tape, self),
            "loss belongs to a different tape"
        );
        let nodes = self.nodes.borrow();
        let loss_node = &nodes[loss.idx];
        if !loss_node.value.is_scalar() {
            return Err(Error::NotScalar(loss_node.value.shape.clone()));
        }

        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.idx + 1];
        grads[loss.idx] = Some(vec![1.0]);
        let params = self.params.borrow();
        let mut param_grads: Vec<Option<Vec<f64>>> = vec![None; params.len()];

        for i in (0..=loss.idx).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &nodes[i];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Leaf => {
                    if let Some(p) = params.iter().position(|&(_, idx)| idx == i) {
                        param_grads[p] = Some(g);
                    }
                }
                Op::MatMul(a, b) => {
                    let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
                    let (m, k) = (va.shape[0], va.shape[1]);
                    let n = vb.data.len() / k;
                    let gm = MatRef::new(&g, m, n);
                    if nodes[*a].requires_grad {
                        let buf = slot(&mut grads, *a, m * k);
                        gemm(1.0, gm, MatRef::new(&vb.data, k, n).t(), 1.0, buf);
                    }
                    if nodes[*b].requires_grad {
                        let buf = slot(&mut grads, *b, k * n);
                        gemm(1.0, MatRef::new(&va.data, m, k).t(), gm, 1.0, buf);
                    }
                }
                Op::MatMulNt(a, b) => {
                    let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
                    let (m, k) = (va.shape[0], va.shape[1]);
                    let n = vb.shape[0];
                    let gm = MatRef::new(&g, m, n);
                    if nodes[*a].requires_grad {
                        let buf = slot(&mut grads, *a, m * k);
                        gemm(1.0, gm, MatRef::new(&vb.data, n, k), 1.0, buf);
                    }
                    if nodes[*b].requires_grad {
                        let buf = slot(&mut grads, *b, n * k);
                        gemm(1.0, gm.t(), MatRef::new(&va.data, m, k), 1.0, buf);
                    }
                }
                Op::Add(a, b) => {
                    accumulate(&nodes, &mut grads, *a, &g, |x, _| x);
                    accumulate(&nodes, &mut grads, *b, &g, |x, _| x);
                }
                Op::Sub(a, b) => {
                    accumulate(&nodes, &mut grads, *a, &g, |x, _| x);
                    accumulate(&nodes, &mut grads, *b, &g, |x, _| -x);
                }
                Op::AddBias(a, b) => {
                    accumulate(&nodes, &mut grads, *a, &g, |x, _| x);
                    if nodes[*b].requires_grad {
                        let cols = nodes[*b].value.data.len();
                        let buf = slot(&mut grads, *b, cols);
                        for row in g.chunks_exact(cols.max(1)) {
                            for (acc, x) in buf.iter_mut().zip(row) {
                                *acc += x;
                            }
                        }
                    }
                }
                Op::Scale(a, s) => accumulate(&nodes, &mut grads, *a, &g, |x, _| s * x),
                Op::Hadamard(a, b) => {
                    let (a, b) = (*a, *b);
                    if nodes[a].requires_grad {
                        let other = &nodes[b].value.data;
                        let buf = slot(&mut grads, a, g.len());
                        for ((acc, x), o) in buf.iter_mut().zip(&g).zip(other) {
                            *acc += x * o;
                        }
                    }
                    if nodes[b].requires_grad {
                        let other = &nodes[a].value.data;
                        let buf = slot(&mut grads, b, g.len());
                        for ((acc, x), o) in buf.iter_mut().zip(&g).zip(other) {
                            *acc += x * o;
                        }
                    }
                }
                Op::Tanh(a) => {
                    let out = &node.value.data;
                    if nodes[*a].requires_grad {
                        let buf = slot(&mut grads, *a, g.len());
                        for ((acc, x), y) in buf.iter_mut().zip(&g).zip(out) {
                            *acc += x * (1.0 - y * y);
                        }
                    }
                }
                // The subgradient at exactly zero is taken as zero.
                Op::Relu(a) => accumulate(&nodes, &mut grads, *a, &g, |x, input| {
                    if input > 0.0 {
                        x
                    } else {
                        0.0
                    }
                }),
                Op::Square(a) => accumulate(&nodes, &mut grads, *a, &g, |x, input| 2.0 * input * x),
                Op::Sum(a) | Op::Mean(a) => {
                    if nodes[*a].requires_grad {
                        let n = nodes[*a].value.data.len();
                        let d = if matches!(node.op, Op::Mean(_)) {
                            g[0] / n as f64
                        } else {
                            g[0]
                        };
                        for acc in slot(&mut grads, *a, n) {
                            *acc += d;
                        }
                    }
                }
                Op::LinComb(base, terms) => {
                    accumulate(&nodes, &mut grads, *base, &g, |x, _| x);
                    for &(c, t) in terms {
                        accumulate(&nodes, &mut grads, t, &g, |x, _| c * x);
                    }
                }
            }
        }

        let mut names = Vec::with_capacity(params.len());
        let mut values = Vec::with_capacity(params.len());
        for ((name, idx), g) in params.iter().zip(param_grads) {
            let shape = nodes[*idx].value.shape.clone();
            let data = g.unwrap_or_else(|| vec![0.0; nodes[*idx].value.data.len()]);
            names.push(name.clone());
            values.push(Tensor { shape, data });
        }
        Ok(Gradients(ParamSet { names, values }))
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], idx: usize, len: usize) -> &mut [f64] {
    grads[idx].get_or_insert_with(|| vec![0.0; len])
}

/// `grad[idx] += f(g, input_value)` elementwise.
fn accumulate(
    nodes: &[Node],
    grads: &mut [Option<Vec<f64>>],
    idx: usize,
    g: &[f64],
    f: impl Fn(f64, f64) -> f64,
) {
    let node = &nodes[idx];
    if !node.requires_grad {
        return;
    }
    let buf = slot(grads, idx, g.len());
    for ((acc, &x), &input) in buf.iter_mut().zip(g).zip(&node.value.data) {
        *acc += f(x, input);
    }
}

impl<'t> Var<'t> {
    /// Copy of the node's current value.
    pub fn value(&self) -> Tensor {
        self.tape.nodes.borrow()[self.idx].value.clone()
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn backward(&self) -> Result<Gradients> {
        self.tape.backward(*self)
    }

    fn same_tape(&self, other: &Var<'_>) {
        assert!(
            std::ptr::eq(self.tape, other.tape),
            "operands recorded on different tapes"
        );
    }
}

impl<'t> TensorLike for Var<'t> {
    fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.idx].value.shape.clone()
    }
    fn with_data<R>(&self, f: impl FnOnce(&[f64]) -> R) -> R {
        f(&self.tape.nodes.borrow()[self.idx].value.data)
    }
    fn lift(&self, value: Tensor) -> Self {
        self.tape.constant(value)
    }
    fn matmul(&self, rhs: &Self) -> Result<Self> {
        self.same_tape(rhs);
        self.tape.binary(*self, *rhs, Op::MatMul, matmul_kernel)
    }
    fn matmul_nt(&self, rhs: &Self) -> Result<Self> {
        self.same_tape(rhs);
        self.tape.binary(*self, *rhs, Op::MatMulNt, matmul_nt_kernel)
    }
    fn add(&self, rhs: &Self) -> Result<Self> {
        self.same_tape(rhs);
        self.tape
            .binary(*self, *rhs, Op::Add, |a, b| zip_kernel("add", a, b, |x, y| x + y))
    }
    fn add_bias(&self, bias: &Self) -> Result<Self> {
        self.same_tape(bias);
        self.tape.binary(*self, *bias, Op::AddBias, add_bias_kernel)
    }
    fn sub(&self, rhs: &Self) -> Result<Self> {
        self.same_tape(rhs);
        self.tape
            .binary(*self, *rhs, Op::Sub, |a, b| zip_kernel("sub", a, b, |x, y| x - y))
    }
    fn scale(&self, s: f64) -> Self {
        self.tape
            .unary(*self, |a| Op::Scale(a, s), |a| map_kernel(a, |x| s * x))
    }
    fn hadamard(&self, rhs: &Self) -> Result<Self> {
        self.same_tape(rhs);
        self.tape.binary(*self, *rhs, Op::Hadamard, |a, b| {
            zip_kernel("hadamard", a, b, |x, y| x * y)
        })
    }
    fn tanh(&self) -> Self {
        self.tape.unary(*self, Op::Tanh, |a| map_kernel(a, f64::tanh))
    }
    fn relu(&self) -> Self {
        self.tape.unary(*self, Op::Relu, |a| map_kernel(a, relu))
    }
    fn square(&self) -> Self {
        self.tape.unary(*self, Op::Square, |a| map_kernel(a, |x| x * x))
    }
    fn sum(&self) -> Self {
        self.tape.unary(*self, Op::Sum, sum_kernel)
    }
    fn mean(&self) -> Self {
        self.tape.unary(*self, Op::Mean, mean_kernel)
    }
    fn lincomb(&self, terms: &[(f64, &Self)]) -> Result<Self> {
        let (value, rg) = {
            let nodes = self.tape.nodes.borrow();
            let base = &nodes[self.idx];
            let refs: Vec<(f64, &Tensor)> = terms
                .iter()
                .map(|(c, v)| {
                    self.same_tape(v);
                    (*c, &nodes[v.idx].value)
                })
                .collect();
            let rg = base.requires_grad || terms.iter().any(|(_, v)| nodes[v.idx].requires_grad);
            (lincomb_kernel(&base.value, &refs)?, rg)
        };
        let op = Op::LinComb(self.idx, terms.iter().map(|(c, v)| (*c, v.idx)).collect());
        Ok(self.tape.push(value, op, rg))
    }
}

// ---------------------------------------------------------------------------
// Parameters and gradients
// ---------------------------------------------------------------------------

/// Ordered, uniquely named collection of tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: Tensor) -> Result<()> {
        let name = name.into();
        if self.names.contains(&name) {
            return Err(Error::InvalidArgument(format!(
                "duplicate parameter `{name}`"
            )));
        }
        self.names.push(name);
        self.values.push(value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.values[i])
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Tensor] {
        &mut self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total number of scalar entries.
    pub fn numel(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }
}

/// dLoss/dp for every parameter registered on the tape, in registration order.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients(ParamSet);

impl Gradients {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.0.get(name)
    }

    pub fn as_params(&self) -> &ParamSet {
        &self.0
    }

    pub fn into_params(self) -> ParamSet {
        self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.0.iter()
    }
}

/// Compares tape gradients against central differences. Returns the largest
/// `|analytic − numeric| / max(|analytic|, |numeric|, 1e-12)` over every
/// scalar parameter entry (0 when there are none).
pub fn finite_diff_check<F>(loss_fn: F, params: &ParamSet, epsilon: f64) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    let analytic = {
        let tape = Tape::new();
        let vars = tape.params(params);
        let loss = loss_fn(&tape, &vars)?;
        tape.backward(loss)?
    };
    let eval = |p: &ParamSet| -> Result<f64> {
        let tape = Tape::new();
        let vars = tape.params(p);
        loss_fn(&tape, &vars)?.value().item()
    };

    let mut worst = 0.0_f64;
    let mut probe = params.clone();
    for (pi, name) in params.names().iter().enumerate() {
        let grad = analytic.get(name).expect("registered parameter");
        for e in 0..params.values()[pi].len() {
            let orig = params.values()[pi].data()[e];
            probe.values_mut()[pi].data_mut()[e] = orig + epsilon;
            let up = eval(&probe)?;
            probe.values_mut()[pi].data_mut()[e] = orig - epsilon;
            let down = eval(&probe)?;
            probe.values_mut()[pi].data_mut()[e] = orig;
            if !up.is_finite() || !down.is_finite() {
                return Err(Error::NonFiniteProbe(format!("{name}[{e}]")));
            }
            let numeric = (up - down) / (2.0 * epsilon);
            let a = grad.data()[e];
            let denom = a.abs().max(numeric.abs()).max(1e-12);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn hadamard_tanh_identity() {
        let a = Tensor::vector(vec![1.0, 2.0]);
        let b = Tensor::vector(vec![3.0, 4.0]);
        assert_eq!(a.hadamard(&b).unwrap().data(), &[3.0, 8.0]);
        assert_eq!(Tensor::vector(vec![0.0]).tanh().data(), &[0.0]);
        let eye = t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]);
        let x = Tensor::vector(vec![5.0, 7.0]);
        let y = eye.matmul(&x).unwrap();
        assert_eq!(y.shape(), &[2]);
        assert_eq!(y.data(), &[5.0, 7.0]);
    }

    #[test]
    fn shape_errors_name_the_op() {
        let a = Tensor::vector(vec![1.0, 2.0]);
        let b = Tensor::vector(vec![1.0, 2.0, 3.0]);
        let err = a.hadamard(&b).unwrap_err().to_string();
        assert!(err.contains("hadamard") && err.contains("[2]") && err.contains("[3]"), "{err}");
        let m = t(&[2, 3], &[0.0; 6]);
        let err = m.matmul(&a).unwrap_err().to_string();
        assert!(err.contains("matmul"), "{err}");
        assert!(Tensor::new(vec![2, 2], vec![1.0]).is_err());
    }

    #[test]
    fn large_gemm_matches_naive() {
        // Large enough to go through the blocked kernel.
        let (m, k, n) = (40, 37, 45);
        let a: Vec<f64> = (0..m * k).map(|i| ((i * 7 % 13) as f64 - 6.0) / 5.0).collect();
        let b: Vec<f64> = (0..n * k).map(|i| ((i * 5 % 11) as f64 - 5.0) / 3.0).collect();
        let ta = t(&[m, k], &a);
        let tb = t(&[n, k], &b);
        let c = ta.matmul_nt(&tb).unwrap();
        for i in 0..m {
            for j in 0..n {
                let want: f64 = (0..k).map(|p| a[i * k + p] * b[j * k + p]).sum();
                assert!((c.data()[i * n + j] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn square_gradient() {
        let tape = Tape::new();
        let w = tape.param("w", Tensor::vector(vec![3.0]));
        let loss = w.hadamard(&w).unwrap().sum();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get("w").unwrap().data(), &[6.0]);
    }

    #[test]
    fn least_squares_gradient_matches_closed_form() {
        // loss = mean((W x − y)²) with W 2×2; dL/dW = (2/2)·r xᵀ where r = Wx − y.
        let w = t(&[2, 2], &[1.0, 2.0, -0.5, 0.25]);
        let x = Tensor::vector(vec![0.5, -1.5]);
        let y = Tensor::vector(vec![1.0, 2.0]);
        let tape = Tape::new();
        let wv = tape.param("W", w.clone());
        let pred = wv.matmul(&tape.constant(x.clone())).unwrap();
        let loss = pred.sub(&tape.constant(y.clone())).unwrap().square().mean();
        let g = tape.backward(loss).unwrap();

        // r = [0.5 − 3 − 1, −0.25 − 0.375 − 2] = [−3.5, −2.625]
        let r = [-3.5, -2.625];
        let expect = [r[0] * 0.5, r[0] * -1.5, r[1] * 0.5, r[1] * -1.5];
        for (got, want) in g.get("W").unwrap().data().iter().zip(expect) {
            assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        }
    }

    #[test]
    fn untouched_params_get_zero_gradients() {
        let tape = Tape::new();
        let a = tape.param("a", Tensor::vector(vec![1.0, 2.0]));
        let _b = tape.param("b", Tensor::vector(vec![4.0, 5.0, 6.0]));
        let g = tape.backward(a.sum()).unwrap();
        assert_eq!(g.get("a").unwrap().data(), &[1.0, 1.0]);
        assert_eq!(g.get("b").unwrap().data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn non_scalar_backward_is_an_error() {
        let tape = Tape::new();
        let a = tape.param("a", Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(tape.backward(a), Err(Error::NotScalar(_))));
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let tape = Tape::new();
        let a = tape.param("a", Tensor::vector(vec![-1.0, 0.0, 2.0]));
        let g = tape.backward(a.relu().sum()).unwrap();
        assert_eq!(g.get("a").unwrap().data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn constants_receive_no_gradient_entry() {
        let tape = Tape::new();
        let c = tape.constant(Tensor::vector(vec![2.0]));
        let p = tape.param("p", Tensor::vector(vec![3.0]));
        let loss = c.hadamard(&p).unwrap().sum();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.as_params().len(), 1);
        assert_eq!(g.get("p").unwrap().data(), &[2.0]);
    }

    #[test]
    fn finite_diff_on_quadratic() {
        let mut ps = ParamSet::new();
        ps.push("a", Tensor::vector(vec![0.3, -1.2, 2.5])).unwrap();
        let err = finite_diff_check(
            |_, v| Ok(v[0].square().scale(1.5).sum()),
            &ps,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn finite_diff_with_no_params_is_zero() {
        let ps = ParamSet::new();
        let err = finite_diff_check(|tape, _| Ok(tape.constant(Tensor::scalar(1.0))), &ps, 1e-5).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn finite_diff_reports_non_finite_probe() {
        let mut ps = ParamSet::new();
        ps.push("w", Tensor::vector(vec![1.0])).unwrap();
        // sqrt-like blowup is not available; divide via huge scale to overflow.
        let err = finite_diff_check(
            |_, v| Ok(v[0].scale(1e308).square().sum()),
            &ps,
            1e-5,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFiniteProbe(ref n) if n == "w[0]"));
    }

    #[test]
    fn duplicate_param_names_rejected() {
        let mut ps = ParamSet::new();
        ps.push("w", Tensor::scalar(1.0)).unwrap();
        assert!(ps.push("w", Tensor::scalar(2.0)).is_err());
    }

    #[test]
    fn lincomb_and_bias_gradients() {
        let mut ps = ParamSet::new();
        ps.push("x", t(&[3, 2], &[0.1, -0.2, 0.3, 0.7, -1.1, 0.4])).unwrap();
        ps.push("w", t(&[2, 2], &[0.5, -0.3, 0.8, 1.2])).unwrap();
        ps.push("b", Tensor::vector(vec![0.2, -0.1])).unwrap();
        let err = finite_diff_check(
            |_, v| {
                let h = v[0].affine(&v[1], &v[2])?.tanh();
                let k = h.hadamard(&v[0])?;
                let s = v[0].lincomb(&[(0.5, &k), (-0.25, &h)])?;
                Ok(s.square().mean())
            },
            &ps,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }
}
