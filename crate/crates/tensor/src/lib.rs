//! Reverse-mode automatic differentiation over small NCHW tensors.
//!
//! The engine is deliberately narrow: every tensor is four-dimensional, the
//! tape is a flat vector, and operations that the rendering pipeline needs
//! beyond the built-in set are recorded with [`Graph::custom`] together with
//! a hand-written backward pass.
//!
//! ```
//! use hytex_tensor::{Graph, Tensor};
//!
//! let g = Graph::<f64>::new();
//! let x = g.leaf(Tensor::scalar(3.0));
//! let y = (x * x).add_scalar(1.0);
//! let grads = g.backward(y);
//! assert_eq!(grads.get(x).unwrap().item(), 6.0);
//! ```

pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod ops;
pub mod optim;
pub mod params;
pub mod real;
pub mod tensor;

pub use error::{Result, TensorError};
pub use gradcheck::{check_gradients, GradCheckReport};
pub use graph::{BackwardFn, Gradients, Graph, Var};
pub use ops::conv::Conv2dSpec;
pub use optim::{Adam, AdamConfig, MomentState};
pub use params::{kaiming_uniform, Bound, ParamId, ParamStore};
pub use real::Real;
pub use tensor::{Shape, Tensor};
