use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::activations::ResponseFunction;
use crate::error::{Error, Result};
use crate::rng::{self, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeuronKind {
    Plain(ResponseFunction),
    /// Synchrony detector controlled by a peer's pre-activation.
    Sync,
    /// Max unit controlled by a peer's pre-activation.
    Max,
}

impl NeuronKind {
    pub const RELU: NeuronKind = NeuronKind::Plain(ResponseFunction::Relu);
    pub const IDENTITY: NeuronKind = NeuronKind::Plain(ResponseFunction::Identity);

    pub fn is_conditional(&self) -> bool {
        matches!(self, NeuronKind::Sync | NeuronKind::Max)
    }

    /// Whether the response has a kink (or jump) at `m = 0`.
    pub fn has_kink(&self) -> bool {
        match self {
            NeuronKind::Sync | NeuronKind::Max => true,
            NeuronKind::Plain(f) => !matches!(
                f,
                ResponseFunction::Identity | ResponseFunction::Sigmoid | ResponseFunction::Zero
            ),
        }
    }
}

/// Shape, neuron kinds and control wiring of one dense layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    n_in: usize,
    kinds: Vec<NeuronKind>,
    /// `wiring[j]` is the same-layer neuron whose pre-activation drives the
    /// control of neuron `j`.
    wiring: Vec<Option<usize>>,
}

impl LayerSpec {
    /// A layer with the given kinds and no wiring yet. Conditional neurons
    /// must be wired with [`LayerSpec::wire_controls`] or
    /// [`LayerSpec::with_wiring`] before the layer can be built.
    pub fn new(n_in: usize, kinds: Vec<NeuronKind>) -> Result<Self> {
        if n_in == 0 || kinds.is_empty() {
            return Err(Error::InvalidSpec(format!(
                "layer dimensions must be positive, got {n_in} -> {}",
                kinds.len()
            )));
        }
        for k in &kinds {
            if let NeuronKind::Plain(f) = k {
                f.validate()?;
            }
        }
        let wiring = vec![None; kinds.len()];
        Ok(LayerSpec {
            n_in,
            kinds,
            wiring,
        })
    }

    pub fn uniform(n_in: usize, n_out: usize, kind: NeuronKind) -> Result<Self> {
        Self::new(n_in, vec![kind; n_out])
    }

    /// Conditional layer with synchrony neurons at even indices and max
    /// neurons at odd indices.
    pub fn interleaved_conditional(n_in: usize, n_out: usize) -> Result<Self> {
        let kinds = (0..n_out)
            .map(|j| {
                if j % 2 == 0 {
                    NeuronKind::Sync
                } else {
                    NeuronKind::Max
                }
            })
            .collect();
        Self::new(n_in, kinds)
    }

    pub fn with_wiring(mut self, wiring: Vec<Option<usize>>) -> Result<Self> {
        if wiring.len() != self.kinds.len() {
            return Err(Error::DimensionMismatch {
                context: "layer wiring",
                expected: self.kinds.len(),
                actual: wiring.len(),
            });
        }
        self.wiring = wiring;
        self.validate()?;
        Ok(self)
    }

    /// Assigns every conditional neuron a peer drawn uniformly from the other
    /// neurons of the layer.
    pub fn wire_controls(&self, seed: u64) -> Result<Self> {
        self.wire_controls_with(&mut rng::stream(seed, Domain::Wiring, 0))
    }

    pub fn wire_controls_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Self> {
        let n = self.n_out();
        let mut wiring = vec![None; n];
        for (j, kind) in self.kinds.iter().enumerate() {
            if !kind.is_conditional() {
                continue;
            }
            if n < 2 {
                return Err(Error::NoPeer {
                    neuron: j,
                    layer_size: n,
                });
            }
            let r = rng.random_range(0..n - 1);
            wiring[j] = Some(if r >= j { r + 1 } else { r });
        }
        let mut spec = self.clone();
        spec.wiring = wiring;
        Ok(spec)
    }

    /// Checks the full layer invariants, including complete wiring.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_out();
        for (j, (kind, peer)) in self.kinds.iter().zip(&self.wiring).enumerate() {
            match (kind.is_conditional(), peer) {
                (true, None) => {
                    return Err(Error::InvalidSpec(format!(
                        "conditional neuron {j} has no control wiring"
                    )))
                }
                (false, Some(_)) => {
                    return Err(Error::InvalidSpec(format!(
                        "plain neuron {j} must not have control wiring"
                    )))
                }
                (true, Some(p)) if *p >= n || *p == j => {
                    return Err(Error::InvalidSpec(format!(
                        "neuron {j} wired to invalid peer {p} in a layer of {n}"
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn is_wired(&self) -> bool {
        self.validate().is_ok()
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.kinds.len()
    }

    pub fn kinds(&self) -> &[NeuronKind] {
        &self.kinds
    }

    pub fn wiring(&self) -> &[Option<usize>] {
        &self.wiring
    }

    pub fn conditional_count(&self) -> usize {
        self.kinds.iter().filter(|k| k.is_conditional()).count()
    }

    /// Weights, biases and stored control indices.
    pub fn param_count(&self) -> usize {
        self.n_in * self.n_out() + self.n_out() + self.conditional_count()
    }
}

/// Ordered dense layers ending in the classifier layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    layers: Vec<LayerSpec>,
    classes: usize,
}

impl NetworkSpec {
    pub fn new(layers: Vec<LayerSpec>, classes: usize) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::InvalidSpec("network has no layers".into()));
        };
        if last.n_out() != classes {
            return Err(Error::InvalidSpec(format!(
                "final layer width {} differs from class count {classes}",
                last.n_out()
            )));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].n_out() != pair[1].n_in() {
                return Err(Error::InvalidSpec(format!(
                    "layer {i} emits {} values but layer {} expects {}",
                    pair[0].n_out(),
                    i + 1,
                    pair[1].n_in()
                )));
            }
        }
        Ok(NetworkSpec { layers, classes })
    }

    /// Plain MLP: ReLU hidden layers of the given widths, identity logits.
    /// When `conditional_layer` is `Some(i)`, hidden layer `i` (zero-based)
    /// is split evenly between synchrony and max neurons instead.
    pub fn mlp(
        input_dim: usize,
        hidden: &[usize],
        classes: usize,
        conditional_layer: Option<usize>,
    ) -> Result<Self> {
        if let Some(i) = conditional_layer {
            if i >= hidden.len() {
                return Err(Error::InvalidSpec(format!(
                    "conditional layer {i} out of range for {} hidden layers",
                    hidden.len()
                )));
            }
        }
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut n_in = input_dim;
        for (i, &width) in hidden.iter().enumerate() {
            let layer = if conditional_layer == Some(i) {
                LayerSpec::interleaved_conditional(n_in, width)?
            } else {
                LayerSpec::uniform(n_in, width, NeuronKind::RELU)?
            };
            layers.push(layer);
            n_in = width;
        }
        layers.push(LayerSpec::uniform(n_in, classes, NeuronKind::IDENTITY)?);
        Self::new(layers, classes)
    }

    /// Wires the control inputs of every layer from one seeded stream.
    pub fn wire_controls(&self, seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, Domain::Wiring, 0);
        let layers = self
            .layers
            .iter()
            .map(|l| l.wire_controls_with(&mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(NetworkSpec {
            layers,
            classes: self.classes,
        })
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.layers.clone(), self.classes)?;
        self.layers.iter().try_for_each(LayerSpec::validate)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn is_heterogeneous(&self) -> bool {
        self.layers.iter().any(|l| l.conditional_count() > 0)
    }
}

/// Storage needed for a network: `n1 * n2` weights between consecutive
/// widths, one bias per non-input neuron, and one control index per
/// conditional neuron.
pub fn param_count(spec: &NetworkSpec) -> usize {
    spec.layers.iter().map(LayerSpec::param_count).sum()
}
