//! Dense tensors, reverse-mode gradients, the sequence encoder, and AdamW.

pub mod encoder;
mod gradcheck;
pub mod ops;
mod optim;
mod params;
mod tape;
mod tensor;

pub use encoder::{EncoderInput, EncoderOutput, EncoderShape, EncoderVars};
pub use gradcheck::{gradient_check, GradCheckReport, FD_STEP};
pub use ops::{cross_entropy, linear, mean_pool, relu, softmax};
pub use optim::AdamW;
pub use params::{ParamStore, Parameter};
pub use tape::{Gradients, ParamGrads, Tape, Var};
pub use tensor::Tensor;
