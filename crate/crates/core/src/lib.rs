//! Conditional-activation neurons and heterogeneous multilayer perceptrons.
//!
//! A conditional activation picks its response function at evaluation time
//! from the sign of a control signal. In a heterogeneous network each
//! synchrony or max neuron reads its control from the pre-activation of a
//! randomly chosen peer in the same layer, and the backward pass routes a
//! surrogate gradient back to that peer.
//!
//! - [`activations`]: response functions, selectors, synchrony/max rules
//! - [`network`]: layers, forward/backward, loss, gradient checking, checkpoints
//! - [`optim`]: the Adam optimizer
//! - [`data`]: MNIST IDX parsing, batching, a synthetic coincidence task
//! - [`harness`]: experiment configs, training runs, reports and CSV output

pub mod activations;
pub mod data;
pub mod error;
pub mod harness;
pub mod network;
pub mod optim;
mod real;
pub mod rng;

pub use activations::{
    max_backward, max_forward, sync_backward, sync_forward, ActivationGradient,
    ConditionalActivation, ResponseFunction,
};
pub use data::{Dataset, Split};
pub use error::{Error, Result};
pub use harness::{ExperimentConfig, TrainReport};
pub use network::{
    param_count, ControlGrad, ForwardTrace, Gradients, Layer, LayerSpec, Network, NetworkSpec,
    NeuronKind,
};
pub use optim::{Adam, AdamConfig};
pub use real::Real;
