//! JSON checkpoints of trained networks.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::layer::Layer;
use super::model::Network;
use super::spec::LayerSpec;
use crate::error::{Error, Result};
use crate::real::Real;

pub const CHECKPOINT_FORMAT: &str = "condact-checkpoint/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub seed: Option<u64>,
    pub classes: usize,
    pub layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub spec: LayerSpec,
    /// Row-major `n_out x n_in`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Checkpoint {
    pub fn from_network<T: Real>(net: &Network<T>, seed: Option<u64>) -> Self {
        let layers = net
            .layers()
            .iter()
            .map(|l| LayerRecord {
                spec: l.spec().clone(),
                weights: l.weights.iter().map(|v| v.to_f64_lossy()).collect(),
                biases: l.biases.iter().map(|v| v.to_f64_lossy()).collect(),
            })
            .collect();
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            seed,
            classes: net.classes(),
            layers,
        }
    }

    pub fn to_network<T: Real>(&self) -> Result<Network<T>> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::CheckpointFormat(self.format.clone()));
        }
        let layers = self
            .layers
            .iter()
            .map(|r| {
                let shape = (r.spec.n_out(), r.spec.n_in());
                let w =
                    Array2::from_shape_vec(shape, r.weights.iter().map(|&v| T::of(v)).collect())
                        .map_err(|e| Error::InvalidSpec(format!("checkpoint weights: {e}")))?;
                let b = Array1::from_iter(r.biases.iter().map(|&v| T::of(v)));
                Layer::new(r.spec.clone(), w, b)
            })
            .collect::<Result<Vec<_>>>()?;
        let net = Network::new(layers)?;
        if net.classes() != self.classes {
            return Err(Error::InvalidSpec(format!(
                "checkpoint declares {} classes, layers produce {}",
                self.classes,
                net.classes()
            )));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
