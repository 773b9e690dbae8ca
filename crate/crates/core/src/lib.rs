//! Matrix-mimetic tensor algebra under the ⋆_M product, the t-SVDM, and
//! Riemannian optimization of the transform `M` over the orthogonal group.

// `!(x >= 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod optim;
pub mod tensor;
pub mod transforms;
pub mod tsvdm;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use tensor::{Dims, Tensor3, Transform, TransformKind, Tube};
