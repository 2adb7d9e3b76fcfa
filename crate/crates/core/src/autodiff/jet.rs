use std::ops::{Add, Mul, Neg, Sub};

use super::Scalar;

/// Number of differentiated inputs: `u`, `v`, `t`.
pub const N_INPUTS: usize = 3;

/// Upper-triangle index pairs in storage order: uu, uv, ut, vv, vt, tt.
pub const HESS_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

const HESS_INDEX: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];

/// Storage slot of the Hessian entry `(i, j)`.
#[inline]
pub fn hess_index(i: usize, j: usize) -> usize {
    HESS_INDEX[i][j]
}

/// Second-order jet: value, gradient and (symmetric) Hessian of a scalar with
/// respect to the network inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2<S = f64> {
    pub value: S,
    pub grad: [S; 3],
    /// Upper triangle, ordered as [`HESS_PAIRS`].
    pub hess: [S; 6],
}

impl<S: Scalar> Jet2<S> {
    pub fn constant(value: S) -> Self {
        let z = S::zero();
        Self {
            value,
            grad: [z; 3],
            hess: [z; 6],
        }
    }

    /// The input coordinate `index` itself, evaluated at `value`.
    pub fn variable(index: usize, value: S) -> Self {
        let mut j = Self::constant(value);
        j.grad[index] = S::from_f64(1.0);
        j
    }

    #[inline]
    pub fn hess_at(&self, i: usize, j: usize) -> S {
        self.hess[hess_index(i, j)]
    }

    /// Apply `y = f(x)` given `f(x0)`, `f'(x0)`, `f''(x0)`.
    pub fn chain(&self, f0: S, f1: S, f2: S) -> Self {
        let g = self.grad;
        let mut out = Self::constant(f0);
        for i in 0..3 {
            out.grad[i] = f1 * g[i];
        }
        for (k, &(i, j)) in HESS_PAIRS.iter().enumerate() {
            out.hess[k] = f1 * self.hess[k] + f2 * g[i] * g[j];
        }
        out
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            value: self.value.scale(c),
            grad: self.grad.map(|x| x.scale(c)),
            hess: self.hess.map(|x| x.scale(c)),
        }
    }

    /// Multiply every coefficient by a scalar that does not depend on the
    /// inputs.
    pub fn mul_scalar(&self, c: S) -> Self {
        Self {
            value: self.value * c,
            grad: self.grad.map(|x| x * c),
            hess: self.hess.map(|x| x * c),
        }
    }

    pub fn add_const(&self, c: f64) -> Self {
        Self {
            value: self.value.add_const(c),
            ..*self
        }
    }

    pub fn tanh(&self) -> Self {
        let t = self.value.tanh();
        let d1 = S::from_f64(1.0) - t * t;
        let d2 = (t * d1).scale(-2.0);
        self.chain(t, d1, d2)
    }

    pub fn softplus(&self) -> Self {
        let s = self.value.sigmoid();
        let d2 = s * (S::from_f64(1.0) - s);
        self.chain(self.value.softplus(), s, d2)
    }

    pub fn sin(&self) -> Self {
        let s = self.value.sin();
        let c = self.value.cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let s = self.value.sin();
        let c = self.value.cos();
        self.chain(c, -s, -c)
    }

    /// Plain-`f64` view of the jet.
    pub fn values(&self) -> Jet2<f64> {
        Jet2 {
            value: self.value.value(),
            grad: self.grad.map(|x| x.value()),
            hess: self.hess.map(|x| x.value()),
        }
    }
}

impl Jet2<f64> {
    /// Lift an `f64` jet into another scalar type (constants, no tape nodes).
    pub fn lift<S: Scalar>(&self) -> Jet2<S> {
        Jet2 {
            value: S::from_f64(self.value),
            grad: self.grad.map(S::from_f64),
            hess: self.hess.map(S::from_f64),
        }
    }

    /// Flatten to `[value, grad.., hess..]`.
    pub fn to_array(&self) -> [f64; 10] {
        let mut a = [0.0; 10];
        a[0] = self.value;
        a[1..4].copy_from_slice(&self.grad);
        a[4..10].copy_from_slice(&self.hess);
        a
    }

    pub fn from_array(a: &[f64; 10]) -> Self {
        Self {
            value: a[0],
            grad: [a[1], a[2], a[3]],
            hess: [a[4], a[5], a[6], a[7], a[8], a[9]],
        }
    }
}

impl<S: Scalar> Add for Jet2<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            value: self.value + o.value,
            grad: std::array::from_fn(|i| self.grad[i] + o.grad[i]),
            hess: std::array::from_fn(|i| self.hess[i] + o.hess[i]),
        }
    }
}

impl<S: Scalar> Sub for Jet2<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            value: self.value - o.value,
            grad: std::array::from_fn(|i| self.grad[i] - o.grad[i]),
            hess: std::array::from_fn(|i| self.hess[i] - o.hess[i]),
        }
    }
}

impl<S: Scalar> Neg for Jet2<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            value: -self.value,
            grad: self.grad.map(|x| -x),
            hess: self.hess.map(|x| -x),
        }
    }
}

impl<S: Scalar> Mul for Jet2<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (a, b) = (self, o);
        let mut out = Self::constant(a.value * b.value);
        for i in 0..3 {
            out.grad[i] = a.grad[i] * b.value + a.value * b.grad[i];
        }
        for (k, &(i, j)) in HESS_PAIRS.iter().enumerate() {
            out.hess[k] = a.hess[k] * b.value
                + a.grad[i] * b.grad[j]
                + a.grad[j] * b.grad[i]
                + a.value * b.hess[k];
        }
        out
    }
}
