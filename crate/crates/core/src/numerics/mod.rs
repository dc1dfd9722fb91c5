//! Dense/sparse linear algebra, losses with closed-form gradients, Adam, and
//! Gumbel-top-k selection. Everything is `f64`.

mod adam;
mod dense;
mod loss;
mod sampling;
mod sparse;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use dense::DenseMatrix;
pub use loss::{accuracy, sigmoid, softmax_xent};
pub use sampling::{gumbel, gumbel_from_uniform, gumbel_top_k, top_k, UNIFORM_FLOOR};
pub use sparse::{spmm, spmm_transpose, SparseMatrix};
