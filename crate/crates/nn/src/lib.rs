//! Reverse-mode tensors, the multi-expert routing policy and its training
//! loops.

pub mod checkpoint;
pub mod decode;
pub mod error;
pub mod gradcheck;
pub mod model;
pub mod optim;
pub mod tape;
pub mod tensor;
pub mod train;

pub use decode::{DecoderState, RolloutMode, RolloutOutput};
pub use error::{NnError, Result};
pub use model::{gate, DecoderKind, ModelConfig, PolicyModel};
pub use optim::Adam;
pub use tape::{concat_cols, concat_rows, Grads, Tape, Var};
pub use tensor::{ParamId, ParamStore, Tensor};
pub use train::{Arm, Regime, TrainSpec, Trainer};
