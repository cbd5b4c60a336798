//! Attention-based bidirectional LSTM for implicit discourse relation sense
//! classification, trained with hand-written backpropagation and Adam.
//!
//! Argument pairs are read as one joint sequence wrapped in argument markers,
//! embedded, run through a bidirectional LSTM whose directions are summed, and
//! reduced by attention before a softmax over the sense inventory.

pub mod corpus;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod optimizer;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod synth;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use rng::Rng;
pub use tensor::{Matrix, Real};
