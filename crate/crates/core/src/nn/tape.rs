//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every operation appends a node holding its forward value. `Tape::backward`
//! walks the nodes in reverse and accumulates adjoints; parameter leaves are
//! remembered so their gradients can be gathered into a [`GradStore`].

use std::cell::RefCell;
use std::rc::Rc;

use super::params::{GradStore, ParamId, ParamStore};
use super::tensor::{gemm, gemm_strided, softmax_in_place, MatRef, Tensor};
use crate::error::{arg_err, Result};

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddRow(usize, usize),
    MulRow(usize, usize),
    Scale(usize, f64),
    Relu(usize),
    Gelu(usize),
    Sigmoid(usize),
    Abs(usize),
    Log(usize),
    Clamp(usize, f64, f64),
    SoftmaxRows(usize),
    LayerNorm { x: usize, rstd: Vec<f64> },
    Attention { q: usize, k: usize, v: usize, heads: usize, probs: Vec<f64> },
    Sum(usize),
    RowSum(usize),
    Reshape(usize),
}

struct Node {
    value: Rc<Tensor>,
    op: Op,
    needs_grad: bool,
    param: Option<ParamId>,
}

/// Recording of one forward computation.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.value().shape())
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

    fn push(&self, value: Tensor, op: Op, needs_grad: bool, param: Option<ParamId>) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            op,
            needs_grad,
            param,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn needs(&self, id: usize) -> bool {
        self.nodes.borrow()[id].needs_grad
    }

    fn value_of(&self, id: usize) -> Rc<Tensor> {
        self.nodes.borrow()[id].value.clone()
    }

    /// A value that does not receive gradients.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false, None)
    }

    /// A free input that receives gradients (not tied to a parameter store).
    pub fn input(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true, None)
    }

    /// Leaf bound to a trainable parameter.
    pub fn param(&self, store: &ParamStore, id: ParamId) -> Var<'_> {
        self.push(store.get(id).clone(), Op::Leaf, true, Some(id))
    }

    /// Runs the reverse sweep from a scalar output.
    pub fn backward(&self, output: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        if nodes[output.id].value.len() != 1 {
            return arg_err("backward requires a scalar output");
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; nodes.len()];
        grads[output.id] = Some(Tensor::from_parts(
            nodes[output.id].value.shape().to_vec(),
            vec![1.0],
        ));
        for id in (0..=output.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if !node.needs_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                grads[id] = Some(g);
                continue;
            }
            let mut send = |target: usize, t: Tensor| {
                if !nodes[target].needs_grad {
                    return;
                }
                match &mut grads[target] {
                    Some(acc) => acc.add_assign(&t),
                    slot @ None => *slot = Some(t),
                }
            };
            let val = |i: usize| -> &Tensor { &nodes[i].value };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    let (av, bv) = (val(*a), val(*b));
                    let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                    if nodes[*a].needs_grad {
                        let mut da = vec![0.0; m * k];
                        gemm(
                            m,
                            n,
                            k,
                            MatRef::plain(g.data(), n),
                            MatRef::transposed(bv.data(), n),
                            &mut da,
                            0.0,
                        );
                        send(*a, Tensor::from_parts(av.shape().to_vec(), da));
                    }
                    if nodes[*b].needs_grad {
                        let mut db = vec![0.0; k * n];
                        gemm(
                            k,
                            m,
                            n,
                            MatRef::transposed(av.data(), k),
                            MatRef::plain(g.data(), n),
                            &mut db,
                            0.0,
                        );
                        send(*b, Tensor::from_parts(bv.shape().to_vec(), db));
                    }
                }
                Op::Add(a, b) => {
                    send(*a, g.clone());
                    send(*b, g);
                }
                Op::Sub(a, b) => {
                    send(*b, g.map(|v| -v));
                    send(*a, g);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (val(*a), val(*b));
                    send(*a, zip(&g, bv, |x, y| x * y));
                    send(*b, zip(&g, av, |x, y| x * y));
                }
                Op::AddRow(a, b) => {
                    send(*b, col_sums(&g, val(*b).shape()));
                    send(*a, g);
                }
                Op::MulRow(a, r) => {
                    let (av, rv) = (val(*a), val(*r));
                    let c = rv.len();
                    let mut da = g.clone();
                    for (i, v) in da.data_mut().iter_mut().enumerate() {
                        *v *= rv.data()[i % c];
                    }
                    let prod = zip(&g, av, |x, y| x * y);
                    send(*r, col_sums(&prod, rv.shape()));
                    send(*a, da);
                }
                Op::Scale(a, s) => send(*a, g.map(|v| v * s)),
                Op::Relu(a) => send(*a, zip(&g, val(*a), |x, y| if y > 0.0 { x } else { 0.0 })),
                Op::Gelu(a) => send(*a, zip(&g, val(*a), |x, y| x * gelu_grad(y))),
                Op::Sigmoid(a) => send(*a, zip(&g, &node.value, |x, s| x * s * (1.0 - s))),
                Op::Abs(a) => send(*a, zip(&g, val(*a), |x, y| x * sign(y))),
                Op::Log(a) => send(*a, zip(&g, val(*a), |x, y| x / y)),
                Op::Clamp(a, lo, hi) => send(
                    *a,
                    zip(&g, val(*a), |x, y| if y >= *lo && y <= *hi { x } else { 0.0 }),
                ),
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let c = y.cols();
                    let mut dx = vec![0.0; y.len()];
                    for r in 0..y.rows() {
                        let yr = &y.data()[r * c..(r + 1) * c];
                        let gr = &g.data()[r * c..(r + 1) * c];
                        let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for j in 0..c {
                            dx[r * c + j] = yr[j] * (gr[j] - dot);
                        }
                    }
                    send(*a, Tensor::from_parts(y.shape().to_vec(), dx));
                }
                Op::LayerNorm { x, rstd } => {
                    let y = &node.value;
                    let c = y.cols();
                    let mut dx = vec![0.0; y.len()];
                    for r in 0..y.rows() {
                        let yr = &y.data()[r * c..(r + 1) * c];
                        let gr = &g.data()[r * c..(r + 1) * c];
                        let mean_g = gr.iter().sum::<f64>() / c as f64;
                        let mean_gy = yr.iter().zip(gr).map(|(p, q)| p * q).sum::<f64>() / c as f64;
                        for j in 0..c {
                            dx[r * c + j] = rstd[r] * (gr[j] - mean_g - yr[j] * mean_gy);
                        }
                    }
                    send(*x, Tensor::from_parts(y.shape().to_vec(), dx));
                }
                Op::Attention {
                    q,
                    k,
                    v,
                    heads,
                    probs,
                } => {
                    let (dq, dk, dv) =
                        attention_backward(val(*q), val(*k), val(*v), *heads, probs, &g);
                    send(*q, dq);
                    send(*k, dk);
                    send(*v, dv);
                }
                Op::Sum(a) => {
                    let av = val(*a);
                    send(*a, Tensor::filled(av.shape(), g.data()[0]));
                }
                Op::RowSum(a) => {
                    let av = val(*a);
                    let c = av.cols();
                    let data = (0..av.len()).map(|i| g.data()[i / c]).collect();
                    send(*a, Tensor::from_parts(av.shape().to_vec(), data));
                }
                Op::Reshape(a) => {
                    let shape = val(*a).shape().to_vec();
                    send(*a, Tensor::from_parts(shape, g.into_data()));
                }
            }
        }
        let params = nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.param.map(|p| (i, p)))
            .collect();
        Ok(Gradients { grads, params })
    }
}

/// Adjoints produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<(usize, ParamId)>,
}

impl Gradients {
    /// Gradient with respect to a leaf; `None` if it did not influence the output.
    pub fn wrt(&self, var: Var<'_>) -> Option<&Tensor> {
        self.grads.get(var.id).and_then(|g| g.as_ref())
    }

    /// Adds every parameter leaf's gradient into `store`.
    pub fn accumulate(&self, store: &mut GradStore) {
        for &(node, pid) in &self.params {
            if let Some(g) = &self.grads[node] {
                store.add(pid, g);
            }
        }
    }
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_parts(a.shape().to_vec(), data)
}

fn col_sums(g: &Tensor, shape: &[usize]) -> Tensor {
    let c: usize = shape.iter().product();
    let mut out = vec![0.0; c];
    for (i, v) in g.data().iter().enumerate() {
        out[i % c] += v;
    }
    Tensor::from_parts(shape.to_vec(), out)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let inner = GELU_C * (x + 0.044715 * x * x * x);
    let t = inner.tanh();
    let dinner = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner
}

/// Scaled dot-product attention split over `heads` column groups.
/// Returns the output and the softmax probabilities (`heads × nq × nk`).
pub(crate) fn attention_forward(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    heads: usize,
) -> (Tensor, Vec<f64>) {
    let (nq, nk, d) = (q.rows(), k.rows(), q.cols());
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut probs = vec![0.0; heads * nq * nk];
    let mut out = vec![0.0; nq * d];
    for h in 0..heads {
        let p = &mut probs[h * nq * nk..(h + 1) * nq * nk];
        gemm(
            nq,
            dh,
            nk,
            MatRef::plain(&q.data()[h * dh..], d),
            MatRef::transposed(&k.data()[h * dh..], d),
            p,
            0.0,
        );
        for row in p.chunks_mut(nk) {
            for s in row.iter_mut() {
                *s *= scale;
            }
            softmax_in_place(row);
        }
        gemm_strided(
            nq,
            nk,
            dh,
            MatRef::plain(p, nk),
            MatRef::plain(&v.data()[h * dh..], d),
            &mut out[h * dh..],
            d as isize,
            0.0,
        );
    }
    (Tensor::from_parts(vec![nq, d], out), probs)
}

fn attention_backward(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    heads: usize,
    probs: &[f64],
    g: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let (nq, nk, d) = (q.rows(), k.rows(), q.cols());
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut dq = vec![0.0; nq * d];
    let mut dk = vec![0.0; nk * d];
    let mut dv = vec![0.0; nk * d];
    let mut ds = vec![0.0; nq * nk];
    for h in 0..heads {
        let p = &probs[h * nq * nk..(h + 1) * nq * nk];
        // dV_h = P^T dO_h
        gemm_strided(
            nk,
            nq,
            dh,
            MatRef::transposed(p, nk),
            MatRef::plain(&g.data()[h * dh..], d),
            &mut dv[h * dh..],
            d as isize,
            0.0,
        );
        // dP = dO_h V_h^T
        gemm(
            nq,
            dh,
            nk,
            MatRef::plain(&g.data()[h * dh..], d),
            MatRef::transposed(&v.data()[h * dh..], d),
            &mut ds,
            0.0,
        );
        for (dsr, pr) in ds.chunks_mut(nk).zip(p.chunks(nk)) {
            let dot: f64 = dsr.iter().zip(pr).map(|(a, b)| a * b).sum();
            for (x, &pv) in dsr.iter_mut().zip(pr) {
                *x = pv * (*x - dot) * scale;
            }
        }
        gemm_strided(
            nq,
            nk,
            dh,
            MatRef::plain(&ds, nk),
            MatRef::plain(&k.data()[h * dh..], d),
            &mut dq[h * dh..],
            d as isize,
            0.0,
        );
        gemm_strided(
            nk,
            nq,
            dh,
            MatRef::transposed(&ds, nk),
            MatRef::plain(&q.data()[h * dh..], d),
            &mut dk[h * dh..],
            d as isize,
            0.0,
        );
    }
    (
        Tensor::from_parts(vec![nq, d], dq),
        Tensor::from_parts(vec![nk, d], dk),
        Tensor::from_parts(vec![nk, d], dv),
    )
}

impl<'t> Var<'t> {
    pub fn value(&self) -> Rc<Tensor> {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    /// The scalar held by a one-element value.
    pub fn item(&self) -> f64 {
        self.value().data()[0]
    }

    fn unary(self, op: Op, value: Tensor) -> Var<'t> {
        let needs = self.tape.needs(self.id);
        self.tape.push(value, op, needs, None)
    }

    fn binary(self, other: Var<'t>, op: Op, value: Tensor) -> Var<'t> {
        let needs = self.tape.needs(self.id) || self.tape.needs(other.id);
        self.tape.push(value, op, needs, None)
    }

    fn same_shape(&self, other: &Var<'t>, what: &str) -> Result<(Rc<Tensor>, Rc<Tensor>)> {
        let (a, b) = (self.value(), other.value());
        if a.shape() != b.shape() {
            return arg_err(format!("{what}: shape {:?} vs {:?}", a.shape(), b.shape()));
        }
        Ok((a, b))
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        let out = self.value().matmul(&other.value())?;
        Ok(self.binary(other, Op::MatMul(self.id, other.id), out))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = self.same_shape(&other, "add")?;
        let out = zip(&a, &b, |x, y| x + y);
        Ok(self.binary(other, Op::Add(self.id, other.id), out))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = self.same_shape(&other, "sub")?;
        let out = zip(&a, &b, |x, y| x - y);
        Ok(self.binary(other, Op::Sub(self.id, other.id), out))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = self.same_shape(&other, "mul")?;
        let out = zip(&a, &b, |x, y| x * y);
        Ok(self.binary(other, Op::Mul(self.id, other.id), out))
    }

    fn row_broadcast(self, row: Var<'t>, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (a, r) = (self.value(), row.value());
        if a.shape().len() != 2 || r.len() != a.cols() {
            return arg_err(format!(
                "row broadcast: {:?} with {:?}",
                a.shape(),
                r.shape()
            ));
        }
        let c = a.cols();
        let data = a
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| f(v, r.data()[i % c]))
            .collect();
        Ok(Tensor::from_parts(a.shape().to_vec(), data))
    }

    /// `self[n×d] + row[d]` broadcast over rows.
    pub fn add_row(self, row: Var<'t>) -> Result<Var<'t>> {
        let out = self.row_broadcast(row, |x, y| x + y)?;
        Ok(self.binary(row, Op::AddRow(self.id, row.id), out))
    }

    /// `self[n×d] ⊙ row[d]` broadcast over rows.
    pub fn mul_row(self, row: Var<'t>) -> Result<Var<'t>> {
        let out = self.row_broadcast(row, |x, y| x * y)?;
        Ok(self.binary(row, Op::MulRow(self.id, row.id), out))
    }

    pub fn scale(self, s: f64) -> Var<'t> {
        let out = self.value().map(|v| v * s);
        self.unary(Op::Scale(self.id, s), out)
    }

    pub fn relu(self) -> Var<'t> {
        let out = self.value().map(|v| v.max(0.0));
        self.unary(Op::Relu(self.id), out)
    }

    pub fn gelu(self) -> Var<'t> {
        let out = self.value().map(gelu);
        self.unary(Op::Gelu(self.id), out)
    }

    pub fn sigmoid(self) -> Var<'t> {
        let out = self.value().map(|v| 1.0 / (1.0 + (-v).exp()));
        self.unary(Op::Sigmoid(self.id), out)
    }

    pub fn abs(self) -> Var<'t> {
        let out = self.value().map(f64::abs);
        self.unary(Op::Abs(self.id), out)
    }

    pub fn ln(self) -> Var<'t> {
        let out = self.value().map(f64::ln);
        self.unary(Op::Log(self.id), out)
    }

    pub fn clamp(self, lo: f64, hi: f64) -> Var<'t> {
        let out = self.value().map(|v| v.clamp(lo, hi));
        self.unary(Op::Clamp(self.id, lo, hi), out)
    }

    /// Softmax over the trailing axis.
    pub fn softmax_rows(self) -> Var<'t> {
        let mut out = (*self.value()).clone();
        let c = out.cols();
        for row in out.data_mut().chunks_mut(c) {
            softmax_in_place(row);
        }
        self.unary(Op::SoftmaxRows(self.id), out)
    }

    /// Per-row standardization (no affine part).
    pub fn layer_norm(self, eps: f64) -> Var<'t> {
        let x = self.value();
        let c = x.cols();
        let mut out = vec![0.0; x.len()];
        let mut rstd = Vec::with_capacity(x.rows());
        for (r, row) in x.data().chunks(c).enumerate() {
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let s = 1.0 / (var + eps).sqrt();
            for j in 0..c {
                out[r * c + j] = (row[j] - mean) * s;
            }
            rstd.push(s);
        }
        let out = Tensor::from_parts(x.shape().to_vec(), out);
        self.unary(Op::LayerNorm { x: self.id, rstd }, out)
    }

    /// Multi-head scaled dot-product attention with `self` as queries.
    pub fn attend(self, keys: Var<'t>, values: Var<'t>, heads: usize) -> Result<Var<'t>> {
        let (q, k, v) = (self.value(), keys.value(), values.value());
        let d = q.cols();
        if q.shape().len() != 2 || k.shape().len() != 2 || v.shape().len() != 2 {
            return arg_err("attention operands must be matrices");
        }
        if heads == 0 || d % heads != 0 {
            return arg_err(format!("width {d} not divisible by {heads} heads"));
        }
        if k.cols() != d || v.cols() != d || k.rows() != v.rows() {
            return arg_err(format!(
                "attention shapes q{:?} k{:?} v{:?}",
                q.shape(),
                k.shape(),
                v.shape()
            ));
        }
        let (out, probs) = attention_forward(&q, &k, &v, heads);
        let needs = [self.id, keys.id, values.id]
            .iter()
            .any(|&i| self.tape.needs(i));
        Ok(self.tape.push(
            out,
            Op::Attention {
                q: self.id,
                k: keys.id,
                v: values.id,
                heads,
                probs,
            },
            needs,
            None,
        ))
    }

    pub fn sum(self) -> Var<'t> {
        let out = Tensor::scalar(self.value().sum());
        self.unary(Op::Sum(self.id), out)
    }

    pub fn mean(self) -> Var<'t> {
        let n = self.value().len() as f64;
        self.sum().scale(1.0 / n)
    }

    /// Sum over the trailing axis: `[n×d] → [n]`.
    pub fn row_sum(self) -> Var<'t> {
        let x = self.value();
        let c = x.cols();
        let data = x.data().chunks(c).map(|r| r.iter().sum()).collect();
        let out = Tensor::from_parts(vec![x.rows()], data);
        self.unary(Op::RowSum(self.id), out)
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Var<'t>> {
        let out = (*self.value()).clone().reshape(shape)?;
        Ok(self.unary(Op::Reshape(self.id), out))
    }
}
