//! The two attention decoders over bound triplet encodings.

mod cell;
mod params;
mod search;
mod unroll;

pub use cell::{attend, lstm_step, LstmWeights, StepTrace};
pub use params::{Arch, Dims, ModelParams, ModelSpec, Param, Pooling};
pub use search::{decode_beam, decode_greedy, Hypothesis};
pub use unroll::{
    scene_encodings, stdbu_init, stdbu_step, tdbu_init, tdbu_step, DecoderState, StepOutput, TapeState,
    TapeStep, Unroll,
};
