//! Dense f64 tensors, a reverse-mode tape and a central-difference checker.

mod gradcheck;
pub(crate) mod kernels;
mod tape;
mod tensor;

pub use gradcheck::{compare_gradients, finite_difference_check, GradCheckReport};
pub use tape::{Gradients, Tape, Var};
pub use tensor::{concat, elementwise, ElementwiseOp, Tensor};

/// `m · v` for a matrix `[r, c]` and a vector `[c]`.
pub fn matvec(m: &Tensor, v: &Tensor) -> crate::Result<Tensor> {
    m.matvec(v)
}

/// `u vᵀ`, shape `[len(u), len(v)]`.
pub fn outer(u: &Tensor, v: &Tensor) -> crate::Result<Tensor> {
    u.outer(v)
}

/// Numerically stable softmax of a vector.
pub fn softmax(x: &Tensor) -> Tensor {
    x.softmax()
}
