//! Dense layers with per-neuron kinds and same-layer control wiring.

mod checkpoint;
mod gradcheck;
mod layer;
mod loss;
mod model;
mod spec;

pub use checkpoint::{Checkpoint, LayerRecord, CHECKPOINT_FORMAT};
pub use gradcheck::{
    grad_check, grad_check_with, relative_error, GradCheckOptions, GradCheckReport, ParamRef,
    Tensor, REL_ERROR_FLOOR,
};
pub use layer::{ControlGrad, Layer, LayerGrads, LayerTrace};
pub use loss::{argmax_rows, softmax_cross_entropy, softmax_cross_entropy_batch};
pub use model::{ForwardTrace, Gradients, Network};
pub use spec::{param_count, LayerSpec, NetworkSpec, NeuronKind};
