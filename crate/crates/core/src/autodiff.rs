//! Reverse-mode differentiation over a linear tape.
//!
//! Every operation appends a node holding its value, so node order is a
//! topological order of the computation and the record is acyclic by
//! construction. `backward` walks the tape once in reverse.

use crate::error::{Error, Result};
use crate::tensor::{concat_channels, kernels, Element, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// How elementwise division treats divisors smaller than the floor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DivMode {
    /// Reject any `|b| < floor`.
    Strict,
    /// Clamp the divisor magnitude up to the floor, keeping its sign.
    Clamp,
}

/// Default minimum divisor magnitude for elementwise division.
pub const DIV_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EltwiseKind {
    Add,
    Mul,
    Div,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Conv2d { x: Var, weight: Var, bias: Var },
    Relu(Var),
    Add(Var, Var),
    Mul(Var, Var),
    Div { a: Var, b: Var, floor: f64 },
    Concat(Var, Var),
    SliceChannels { x: Var, start: usize },
    PixelShuffle { x: Var, r: usize },
    Sum(Var),
    Mse { pred: Var, target: Var },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op,
    requires_grad: bool,
    grad: Option<Tensor<T>>,
}

/// Records a forward computation for later differentiation.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    check_finite: bool,
}

impl<T: Element> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Element> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            check_finite: false,
        }
    }

    /// Checked mode: every recorded value is scanned for NaN/Inf.
    pub fn with_finite_checks(mut self, enabled: bool) -> Self {
        self.check_finite = enabled;
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op, requires_grad: bool, name: &'static str) -> Result<Var> {
        if self.check_finite {
            value.check_finite(name)?;
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// A differentiable input (parameter or variable under test).
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, true)
    }

    /// A non-differentiable input.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn take_value(self, v: Var) -> Tensor<T> {
        let mut nodes = self.nodes;
        nodes.swap_remove(v.0).value
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn conv2d(&mut self, x: Var, weight: Var, bias: Var) -> Result<Var> {
        let out = kernels::conv2d_forward(self.value(x), self.value(weight), self.value(bias))?;
        let rg = self.rg(&[x, weight, bias]);
        self.push(out, Op::Conv2d { x, weight, bias }, rg, "conv2d")
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(|v| if v > T::zero() { v } else { T::zero() });
        let rg = self.rg(&[x]);
        self.push(out, Op::Relu(x), rg, "relu")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), "add", |x, y| x + y)?;
        let rg = self.rg(&[a, b]);
        self.push(out, Op::Add(a, b), rg, "add")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), "mul", |x, y| x * y)?;
        let rg = self.rg(&[a, b]);
        self.push(out, Op::Mul(a, b), rg, "mul")
    }

    pub fn div(&mut self, a: Var, b: Var, floor: f64, mode: DivMode) -> Result<Var> {
        let fl = T::from_f64(floor);
        if mode == DivMode::Strict {
            if let Some(index) = self.value(b).data().iter().position(|v| v.abs() < fl) {
                return Err(Error::DivisorBelowFloor { index, floor });
            }
        }
        let out = self
            .value(a)
            .zip_map(self.value(b), "div", |x, y| x / clamp_divisor(y, fl))?;
        let rg = self.rg(&[a, b]);
        self.push(out, Op::Div { a, b, floor }, rg, "div")
    }

    pub fn eltwise(&mut self, kind: EltwiseKind, a: Var, b: Var) -> Result<Var> {
        match kind {
            EltwiseKind::Add => self.add(a, b),
            EltwiseKind::Mul => self.mul(a, b),
            EltwiseKind::Div => self.div(a, b, DIV_FLOOR, DivMode::Clamp),
        }
    }

    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = concat_channels(self.value(a), self.value(b))?;
        let rg = self.rg(&[a, b]);
        self.push(out, Op::Concat(a, b), rg, "concat")
    }

    pub fn slice_channels(&mut self, x: Var, start: usize, count: usize) -> Result<Var> {
        let out = self.value(x).slice_channels(start, count)?;
        let rg = self.rg(&[x]);
        self.push(out, Op::SliceChannels { x, start }, rg, "slice_channels")
    }

    pub fn pixel_shuffle(&mut self, x: Var, r: usize) -> Result<Var> {
        let out = kernels::pixel_shuffle(self.value(x), r)?;
        let rg = self.rg(&[x]);
        self.push(out, Op::PixelShuffle { x, r }, rg, "pixel_shuffle")
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let out = Tensor::scalar(self.value(x).sum());
        let rg = self.rg(&[x]);
        self.push(out, Op::Sum(x), rg, "sum")
    }

    /// Mean squared error over all elements; differentiable w.r.t. `pred`.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        let (p, t) = (self.value(pred), self.value(target));
        if p.shape() != t.shape() {
            return Err(Error::shape("mse_loss", p.shape(), t.shape()));
        }
        let total = p
            .data()
            .iter()
            .zip(t.data())
            .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
        let out = Tensor::scalar(total / T::from_f64(p.len() as f64));
        let rg = self.rg(&[pred]);
        self.push(out, Op::Mse { pred, target }, rg, "mse_loss")
    }

    /// Populates gradients of every requires-grad node reachable from `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let shape = self.value(loss).shape().to_vec();
        if self.value(loss).len() != 1 {
            return Err(Error::NonScalarLoss(shape));
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        self.nodes[loss.0].grad = Some(Tensor::ones(&shape));
        for i in (0..=loss.0).rev() {
            let Some(g) = self.nodes[i].grad.take() else {
                continue;
            };
            let contributions = self.input_grads(i, &g)?;
            self.nodes[i].grad = Some(g);
            for (v, cg) in contributions {
                let node = &mut self.nodes[v.0];
                if !node.requires_grad {
                    continue;
                }
                match node.grad.as_mut() {
                    Some(acc) => acc.add_assign(&cg)?,
                    None => node.grad = Some(cg),
                }
            }
        }
        Ok(())
    }

    /// Clears all stored gradients.
    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    fn input_grads(&self, i: usize, g: &Tensor<T>) -> Result<Vec<(Var, Tensor<T>)>> {
        let val = |v: Var| &self.nodes[v.0].value;
        let wants = |v: Var| self.nodes[v.0].requires_grad;
        Ok(match self.nodes[i].op {
            Op::Leaf => Vec::new(),
            Op::Conv2d { x, weight, bias } => {
                let (dx, dw, db) =
                    kernels::conv2d_backward(val(x), val(weight), val(bias), g, wants(x))?;
                let mut out = vec![(weight, dw), (bias, db)];
                if let Some(dx) = dx {
                    out.push((x, dx));
                }
                out
            }
            Op::Relu(x) => {
                let dx = val(x).zip_map(g, "relu backward", |v, gv| {
                    if v > T::zero() {
                        gv
                    } else {
                        T::zero()
                    }
                })?;
                vec![(x, dx)]
            }
            Op::Add(a, b) => vec![(a, g.clone()), (b, g.clone())],
            Op::Mul(a, b) => {
                let mut out = Vec::with_capacity(2);
                if wants(a) {
                    out.push((a, g.zip_map(val(b), "mul backward", |gv, bv| gv * bv)?));
                }
                if wants(b) {
                    out.push((b, g.zip_map(val(a), "mul backward", |gv, av| gv * av)?));
                }
                out
            }
            Op::Div { a, b, floor } => {
                let fl = T::from_f64(floor);
                let mut out = Vec::with_capacity(2);
                if wants(a) {
                    let da = g.zip_map(val(b), "div backward", |gv, bv| gv / clamp_divisor(bv, fl))?;
                    out.push((a, da));
                }
                if wants(b) {
                    let av = val(a).data();
                    let bv = val(b).data();
                    let db = Tensor::from_fn(g.shape(), |k| {
                        if bv[k].abs() < fl {
                            T::zero()
                        } else {
                            -g.data()[k] * av[k] / (bv[k] * bv[k])
                        }
                    });
                    out.push((b, db));
                }
                out
            }
            Op::Concat(a, b) => {
                let ca = val(a).shape()[1];
                let cb = val(b).shape()[1];
                vec![(a, g.slice_channels(0, ca)?), (b, g.slice_channels(ca, cb)?)]
            }
            Op::SliceChannels { x, start } => {
                let (n, c, h, w) = val(x).dims4()?;
                let count = g.shape()[1];
                let plane = h * w;
                let mut dx = Tensor::zeros(&[n, c, h, w]);
                for b in 0..n {
                    let src = &g.data()[b * count * plane..(b + 1) * count * plane];
                    dx.data_mut()[(b * c + start) * plane..][..count * plane].copy_from_slice(src);
                }
                vec![(x, dx)]
            }
            Op::PixelShuffle { x, r } => vec![(x, kernels::pixel_unshuffle(g, r)?)],
            Op::Sum(x) => vec![(x, Tensor::full(val(x).shape(), g.data()[0]))],
            Op::Mse { pred, target } => {
                let scale = g.data()[0] * T::from_f64(2.0 / val(pred).len() as f64);
                let d = val(pred).zip_map(val(target), "mse backward", |p, t| (p - t) * scale)?;
                vec![(pred, d)]
            }
        })
    }
}

#[inline]
fn clamp_divisor<T: Element>(v: T, floor: T) -> T {
    if v.abs() >= floor {
        v
    } else if v < T::zero() {
        -floor
    } else {
        floor
    }
}
