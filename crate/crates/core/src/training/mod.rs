//! Teacher-forced training of either decoder.

mod fit;
mod loss;
mod optim;

pub use fit::{corpus_loss, train, Checkpoint, TrainConfig, TrainOutcome, CHECKPOINT_VERSION};
pub use loss::{
    check_model_gradients, check_model_gradients_against, loss_on, GroupError, sequence_loss, sequence_loss_and_grads,
    ParamGrads,
};
pub use optim::{adam_slice, adam_update, clip_gradients, global_norm, AdamConfig, Moments};
