//! The function family shared by both players: a small sigmoid-headed
//! convnet trained with masked binary cross-entropy and RMSProp.

mod checkpoint;
pub mod gradcheck;
mod network;
mod optim;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, ARCH_DESCRIPTOR};
pub use gradcheck::{compare_gradients, grad_check, Differentiable, LinearProbe};
pub use network::{
    backward, bce_loss, bce_with_logit, Activations, Gradients, NetworkParams, TensorSpec,
    FC_HIDDEN, TENSOR_COUNT,
};
pub use optim::{rmsprop_step, OptHyper, OptState};

use crate::scene::Patch;

/// One supervised output: the network sees `patch` and only output
/// `target_index` is scored against `target_value`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub patch: Patch,
    pub target_index: usize,
    pub target_value: f64,
}

/// Output counts the architecture is instantiated with: grasp angles, shake
/// actions and snatch actions.
pub const VALID_OUTPUTS: [usize; 3] = [18, 15, 36];
