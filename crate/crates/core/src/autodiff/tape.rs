use std::cell::RefCell;
use std::ops::{Add, Mul, Neg, Sub};

use super::scalar::{sigmoid_f64, softplus_f64};
use super::{AutodiffError, Scalar};

#[derive(Debug, Clone, Copy)]
enum Node {
    Leaf,
    Unary { a: u32, da: f64 },
    Binary { a: u32, da: f64, b: u32, db: f64 },
    /// Unit-weight sum of `sum_args[start..start + len]`.
    Sum { start: u32, len: u32 },
}

#[derive(Debug, Default)]
struct Inner {
    nodes: Vec<Node>,
    sum_args: Vec<u32>,
}

/// Reverse-mode tape over scalars.
///
/// A tape is single-owner (it is not `Sync`); use one tape per worker and
/// reduce the resulting gradients.
#[derive(Debug, Default)]
pub struct Tape {
    inner: RefCell<Inner>,
}

/// A scalar that is either a tape node or a free constant.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    idx: u32,
    val: f64,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.tape {
            Some(_) => write!(f, "Var#{}({})", self.idx, self.val),
            None => write!(f, "Const({})", self.val),
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, node: Node) -> u32 {
        let mut inner = self.inner.borrow_mut();
        let i = inner.nodes.len();
        inner.nodes.push(node);
        u32::try_from(i).expect("tape exceeds u32 nodes")
    }

    /// A new independent variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        Var {
            tape: Some(self),
            idx: self.push(Node::Leaf),
            val: value,
        }
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    /// Sum of many terms recorded as a single node.
    pub fn sum<'t>(&'t self, xs: &[Var<'t>]) -> Var<'t> {
        let mut val = 0.0;
        let mut args = Vec::with_capacity(xs.len());
        for x in xs {
            val += x.val;
            if x.tape.is_some() {
                args.push(x.idx);
            }
        }
        if args.is_empty() {
            return Var::constant(val);
        }
        let mut inner = self.inner.borrow_mut();
        let start = u32::try_from(inner.sum_args.len()).expect("tape too large");
        let len = args.len() as u32;
        inner.sum_args.extend_from_slice(&args);
        let i = inner.nodes.len() as u32;
        inner.nodes.push(Node::Sum { start, len });
        Var {
            tape: Some(self),
            idx: i,
            val,
        }
    }

    /// Backward sweep from `output`; returns the adjoint of every node.
    pub fn gradient(&self, output: Var<'_>) -> Gradient {
        let inner = self.inner.borrow();
        let mut adj = vec![0.0; inner.nodes.len()];
        if output.tape.is_none() {
            return Gradient { adj };
        }
        adj[output.idx as usize] = 1.0;
        for i in (0..=output.idx as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            match inner.nodes[i] {
                Node::Leaf => {}
                Node::Unary { a: p, da } => adj[p as usize] += a * da,
                Node::Binary { a: p, da, b: q, db } => {
                    adj[p as usize] += a * da;
                    adj[q as usize] += a * db;
                }
                Node::Sum { start, len } => {
                    for &p in &inner.sum_args[start as usize..(start + len) as usize] {
                        adj[p as usize] += a;
                    }
                }
            }
        }
        Gradient { adj }
    }
}

/// Adjoints produced by [`Tape::gradient`].
#[derive(Debug, Clone)]
pub struct Gradient {
    adj: Vec<f64>,
}

impl Gradient {
    /// `∂output/∂x`; zero for constants and for nodes the output does not
    /// depend on.
    pub fn wrt(&self, x: Var<'_>) -> f64 {
        match x.tape {
            Some(_) => self.adj.get(x.idx as usize).copied().unwrap_or(0.0),
            None => 0.0,
        }
    }
}

impl<'t> Var<'t> {
    pub fn constant(val: f64) -> Self {
        Self {
            tape: None,
            idx: 0,
            val,
        }
    }

    pub fn val(&self) -> f64 {
        self.val
    }

    pub fn is_constant(&self) -> bool {
        self.tape.is_none()
    }

    fn unary(self, val: f64, da: f64) -> Self {
        match self.tape {
            None => Self::constant(val),
            Some(t) => Var {
                tape: Some(t),
                idx: t.push(Node::Unary { a: self.idx, da }),
                val,
            },
        }
    }

    fn binary(self, o: Self, val: f64, da: f64, db: f64) -> Self {
        match (self.tape, o.tape) {
            (None, None) => Self::constant(val),
            (Some(_), None) => self.unary(val, da),
            (None, Some(_)) => o.unary(val, db),
            (Some(t), Some(_)) => Var {
                tape: Some(t),
                idx: t.push(Node::Binary {
                    a: self.idx,
                    da,
                    b: o.idx,
                    db,
                }),
                val,
            },
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let val = self.val + o.val;
        match (self.tape, o.tape) {
            (None, None) => Self::constant(val),
            // shifting by a constant leaves every adjoint unchanged
            (Some(_), None) => Var { val, ..self },
            (None, Some(_)) => Var { val, ..o },
            _ => self.binary(o, val, 1.0, 1.0),
        }
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let val = self.val - o.val;
        match (self.tape, o.tape) {
            (None, None) => Self::constant(val),
            (Some(_), None) => Var { val, ..self },
            _ => self.binary(o, val, 1.0, -1.0),
        }
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.binary(o, self.val * o.val, o.val, self.val)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(-self.val, -1.0)
    }
}

impl<'t> Scalar for Var<'t> {
    fn from_f64(x: f64) -> Self {
        Var::constant(x)
    }

    fn value(self) -> f64 {
        self.val
    }

    fn tanh(self) -> Self {
        let t = self.val.tanh();
        self.unary(t, 1.0 - t * t)
    }

    fn sigmoid(self) -> Self {
        let s = sigmoid_f64(self.val);
        self.unary(s, s * (1.0 - s))
    }

    fn softplus(self) -> Self {
        self.unary(softplus_f64(self.val), sigmoid_f64(self.val))
    }

    fn sin(self) -> Self {
        self.unary(self.val.sin(), self.val.cos())
    }

    fn cos(self) -> Self {
        self.unary(self.val.cos(), -self.val.sin())
    }

    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        self.unary(s, 0.5 / s)
    }

    fn scale(self, c: f64) -> Self {
        self.unary(self.val * c, c)
    }

    fn add_const(self, c: f64) -> Self {
        Var {
            val: self.val + c,
            ..self
        }
    }

    fn sum(xs: &[Self]) -> Self {
        match xs.iter().find_map(|x| x.tape) {
            Some(t) => t.sum(xs),
            None => Var::constant(xs.iter().map(|x| x.val).sum()),
        }
    }
}

/// Gradient of a scalar program with respect to a flat parameter vector.
///
/// `program` receives the tape and one leaf per parameter and returns the
/// loss. Fails with [`AutodiffError::NonFiniteLoss`] if the loss is NaN/Inf.
pub fn param_grad<F>(params: &[f64], program: F) -> Result<(f64, Vec<f64>), AutodiffError>
where
    F: for<'t> FnOnce(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    let tape = Tape::new();
    let leaves = tape.vars(params);
    let loss = program(&tape, &leaves);
    if !loss.val.is_finite() {
        return Err(AutodiffError::NonFiniteLoss(loss.val));
    }
    let g = tape.gradient(loss);
    Ok((loss.val, leaves.iter().map(|&p| g.wrt(p)).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Jet2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic() {
        let (l, g) = param_grad(&[3.0], |_, p| p[0] * p[0]).unwrap();
        assert_eq!(l, 9.0);
        assert_eq!(g, vec![6.0]);
    }

    #[test]
    fn dead_parameters_get_zero() {
        let (_, g) = param_grad(&[1.0, 2.0, 3.0], |_, p| p[0].tanh() * p[2]).unwrap();
        assert_eq!(g[1], 0.0);
        assert!(g[0] != 0.0 && g[2] != 0.0);
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let r = param_grad(&[-1.0], |_, p| p[0].sqrt());
        assert!(matches!(r, Err(AutodiffError::NonFiniteLoss(_))));
    }

    #[test]
    fn sum_node_and_constants() {
        let tape = Tape::new();
        let x = tape.var(2.0);
        let y = tape.var(5.0);
        let c = Var::constant(7.0);
        let s = tape.sum(&[x, y, c, x]);
        assert_eq!(s.val(), 16.0);
        let out = s * y + c;
        let g = tape.gradient(out);
        assert_eq!(g.wrt(x), 2.0 * 5.0);
        assert_eq!(g.wrt(y), 16.0 + 5.0);
        assert_eq!(g.wrt(c), 0.0);
    }

    // The parameter gradient of every jet component must come from the same
    // tape: compare against central differences of a tiny jet program.
    #[test]
    fn nested_jet_components_differentiate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let theta: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = [0.3, -0.2, 0.6];
        fn program<S: Scalar>(th: &[S], x: [f64; 3]) -> Jet2<S> {
            let vars = [0, 1, 2].map(|i| Jet2::<S>::variable(i, S::from_f64(x[i])));
            let lin = |a: S, b: S, c: S| {
                vars[0].mul_scalar(a) + vars[1].mul_scalar(b) + vars[2].mul_scalar(c)
            };
            (lin(th[0], th[1], th[2]).tanh() * lin(th[3], th[4], th[5]).softplus()).sin()
        }
        for comp in 0..10 {
            let (_, g) = param_grad(&theta, |_, p| {
                let j = program(p, x);
                let arr = [
                    j.value, j.grad[0], j.grad[1], j.grad[2], j.hess[0], j.hess[1], j.hess[2],
                    j.hess[3], j.hess[4], j.hess[5],
                ];
                arr[comp]
            })
            .unwrap();
            let eps = 1e-6;
            for k in 0..theta.len() {
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[k] += eps;
                tm[k] -= eps;
                let fp = program(&tp, x).to_array()[comp];
                let fm = program(&tm, x).to_array()[comp];
                let fd = (fp - fm) / (2.0 * eps);
                assert!(
                    (g[k] - fd).abs() < 1e-7 * (1.0 + fd.abs()),
                    "component {comp}, param {k}: {} vs {fd}",
                    g[k]
                );
            }
        }
    }
}
