use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{self, Split, MNIST_CLASSES};
use crate::error::{Error, Result};
use crate::network::{param_count, Network, NetworkSpec};
use crate::optim::AdamConfig;

/// Zero-based index of the hidden layer that becomes conditional in a
/// heterogeneous network (the second hidden layer).
pub const CONDITIONAL_HIDDEN_LAYER: usize = 1;

pub const DEFAULT_EPOCHS: usize = 300;
pub const SMOKE_EPOCHS: usize = 30;
pub const DEFAULT_BATCH_SIZE: usize = 100;

/// The five structures of the reference comparison, as `(layers, neurons)`.
pub const REFERENCE_STRUCTURES: [(usize, usize); 5] =
    [(4, 400), (4, 200), (4, 100), (3, 200), (3, 100)];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DatasetSource {
    /// The four IDX files under `data_dir` or `$MNIST_DIR`.
    #[default]
    Mnist,
    SyntheticSync {
        train: usize,
        test: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Weight layers including the output layer: 3 means two hidden layers.
    pub layers: usize,
    /// Width of every hidden layer.
    pub neurons: usize,
    pub heterogeneous: bool,
    pub seeds: Vec<u64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub dataset: DatasetSource,
    pub data_dir: Option<PathBuf>,
    /// Directory for CSV curves.
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            layers: 3,
            neurons: 100,
            heterogeneous: false,
            seeds: vec![0, 1, 2, 3, 4],
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            adam: AdamConfig::default(),
            dataset: DatasetSource::Mnist,
            data_dir: None,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.layers < 2 {
            return fail(format!(
                "{} layers leaves no hidden layer; need at least 2",
                self.layers
            ));
        }
        if self.neurons == 0 {
            return fail("hidden layers need at least one neuron".into());
        }
        if self.heterogeneous {
            if self.layers < 3 {
                return fail("a heterogeneous network needs at least two hidden layers".into());
            }
            if !self.neurons.is_multiple_of(2) {
                return fail(format!(
                    "{} neurons cannot be split evenly into synchrony and max units",
                    self.neurons
                ));
            }
        }
        if self.seeds.is_empty() {
            return fail("no seeds given".into());
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return fail("epochs and batch size must be positive".into());
        }
        self.adam.validate()
    }

    pub fn hidden_layers(&self) -> usize {
        self.layers - 1
    }

    /// Unwired topology for the given input and class dimensions.
    pub fn network_spec(&self, input_dim: usize, classes: usize) -> Result<NetworkSpec> {
        self.validate()?;
        let hidden = vec![self.neurons; self.hidden_layers()];
        NetworkSpec::mlp(
            input_dim,
            &hidden,
            classes,
            self.heterogeneous.then_some(CONDITIONAL_HIDDEN_LAYER),
        )
    }

    /// Parameter count of this structure on MNIST-shaped data.
    pub fn mnist_param_count(&self) -> Result<usize> {
        Ok(param_count(&self.network_spec(
            data::IMAGE_SIDE * data::IMAGE_SIDE,
            MNIST_CLASSES,
        )?))
    }

    pub fn structure_label(&self) -> String {
        format!("{}-layer {} neurons", self.layers, self.neurons)
    }

    pub fn load_data(&self) -> Result<Split> {
        match &self.dataset {
            DatasetSource::Mnist => {
                let dir = data::resolve_mnist_dir(self.data_dir.as_deref()).ok_or_else(|| {
                    Error::Config(format!(
                        "no MNIST directory: set data_dir or {}",
                        data::MNIST_DIR_ENV
                    ))
                })?;
                data::load_mnist(&dir)
            }
            &DatasetSource::SyntheticSync { train, test, seed } => Ok(Split {
                train: data::synthetic_sync_dataset(train, seed),
                test: data::synthetic_sync_dataset(test, seed.wrapping_add(1)),
            }),
        }
    }
}

/// Network for `cfg`: ReLU hidden layers, the second hidden
/// layer split between synchrony and max neurons when heterogeneous, and an
/// identity logit layer. Wiring and weights are drawn from `seed`.
pub fn build_network(
    cfg: &ExperimentConfig,
    input_dim: usize,
    classes: usize,
    seed: u64,
) -> Result<Network<f32>> {
    let spec = cfg.network_spec(input_dim, classes)?.wire_controls(seed)?;
    Network::init(&spec, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NeuronKind;

    fn cfg(layers: usize, neurons: usize, heterogeneous: bool) -> ExperimentConfig {
        ExperimentConfig {
            layers,
            neurons,
            heterogeneous,
            ..Default::default()
        }
    }

    #[test]
    fn build_network_param_counts() {
        let count =
            |c: &ExperimentConfig| param_count(&build_network(c, 784, 10, 0).unwrap().spec());
        assert_eq!(count(&cfg(4, 200, false)), 239_410);
        assert_eq!(count(&cfg(4, 200, true)), 239_610);
        assert_eq!(count(&cfg(3, 100, true)), 89_710);
    }

    #[test]
    fn heterogeneous_layout() {
        let net = build_network(&cfg(4, 10, true), 784, 10, 3).unwrap();
        let kinds: Vec<_> = net
            .layers()
            .iter()
            .map(|l| l.spec().kinds().to_vec())
            .collect();
        assert!(kinds[0].iter().all(|k| *k == NeuronKind::RELU));
        assert_eq!(
            kinds[1].iter().filter(|k| **k == NeuronKind::Sync).count(),
            5
        );
        assert_eq!(
            kinds[1].iter().filter(|k| **k == NeuronKind::Max).count(),
            5
        );
        assert!(kinds[2].iter().all(|k| *k == NeuronKind::RELU));
        assert!(kinds[3].iter().all(|k| *k == NeuronKind::IDENTITY));
    }

    #[test]
    fn invalid_configs() {
        assert!(cfg(1, 10, false).validate().is_err());
        assert!(cfg(2, 10, true).validate().is_err());
        assert!(cfg(3, 11, true).validate().is_err());
        assert!(cfg(3, 0, false).validate().is_err());
        assert!(ExperimentConfig {
            seeds: vec![],
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(ExperimentConfig {
            batch_size: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(cfg(2, 11, false).validate().is_ok());
    }

    #[test]
    fn json_round_trip_with_defaults() {
        let c: ExperimentConfig = serde_json::from_str(
            r#"{"layers": 4, "neurons": 200, "heterogeneous": true,
                "dataset": {"kind": "synthetic_sync", "train": 100, "test": 50, "seed": 1}}"#,
        )
        .unwrap();
        assert_eq!(c.batch_size, 100);
        assert_eq!(c.adam, AdamConfig::default());
        assert_eq!(c.seeds.len(), 5);
        let back: ExperimentConfig =
            serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"layerz": 3}"#).is_err());
    }
}
