//! Differentiation substrate.
//!
//! Two layers cooperate:
//!
//! * [`Jet2`] carries a scalar together with its gradient and Hessian with
//!   respect to the three network inputs `(u, v, t)`. Elementary operations
//!   propagate the second-order Taylor coefficients exactly.
//! * [`Tape`] is a reverse-mode Wengert list over scalars. Anything generic in
//!   [`Scalar`] (including `Jet2<Var>`) can be recorded on it, and a single
//!   backward sweep yields adjoints for every leaf.
//!
//! Training composes them forward-over-reverse: the network pushes jets
//! forward, the loss is assembled on a tape from jet components, and the tape
//! adjoints seed the network's layer-level backward pass.

mod jet;
mod scalar;
mod tape;

pub use jet::{hess_index, Jet2, HESS_PAIRS, N_INPUTS};
pub use scalar::Scalar;
pub(crate) use scalar::{sigmoid_f64, softplus_f64};
pub use tape::{param_grad, Gradient, Tape, Var};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AutodiffError {
    #[error("loss is not finite ({0})")]
    NonFiniteLoss(f64),
}
