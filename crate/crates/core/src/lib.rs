//! Gradient-based learning assembled from parametric lenses.
//!
//! Every moving part of a supervised learner (the reverse derivative of a
//! model, its loss, the learning rate and the optimiser) is a [`Lens`], and
//! one update step is nothing but their composite run forward and then
//! backward. The same machinery works over the reals and over Z2, where it
//! learns boolean circuits.

pub mod arch;
pub mod autodiff;
pub mod check;
pub mod error;
pub mod fault;
pub mod learner;
pub mod lens;
pub mod loss;
pub mod optim;
pub mod para;
pub mod rig;
pub mod tensor;

pub use autodiff::{differentiate, differentiate_with, evaluate, Expr};
pub use error::{Error, Result};
pub use lens::{ComposeMode, EvalReport, Lens, Port};
pub use para::{ParaLens, ParaMorph};
pub use rig::{Rig, RigValue};
pub use tensor::{Shape, Tensor};
