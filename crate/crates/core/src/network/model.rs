use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use super::layer::{ControlGrad, Layer, LayerGrads, LayerTrace};
use super::spec::NetworkSpec;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::{self, Domain};

/// A stack of dense layers. The last layer emits raw logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    layers: Vec<Layer<T>>,
    classes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace<T> {
    pub layers: Vec<LayerTrace<T>>,
}

/// Parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<LayerGrads<T>>,
}

impl<T: Real> Gradients<T> {
    /// Flat views in the same order as [`Network::param_slices_mut`].
    pub fn slices(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|g| {
                [
                    g.weights.as_slice().expect("standard layout"),
                    g.biases.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }
}

impl<T> ForwardTrace<T> {
    pub fn logits(&self) -> &Array2<T> {
        &self.layers.last().expect("non-empty trace").output
    }
}

impl<T: Real> Network<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Result<Self> {
        let specs = layers.iter().map(|l| l.spec().clone()).collect();
        let classes = layers.last().map_or(0, Layer::n_out);
        NetworkSpec::new(specs, classes)?;
        Ok(Network { layers, classes })
    }

    /// He-initialized network from a fully wired spec.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng::stream(seed, Domain::Init, 0);
        let layers = spec
            .layers()
            .iter()
            .map(|s| Layer::he_normal(s.clone(), &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn zeros(spec: &NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layers()
            .iter()
            .map(|s| Layer::zeros(s.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn spec(&self) -> NetworkSpec {
        let specs = self.layers.iter().map(|l| l.spec().clone()).collect();
        NetworkSpec::new(specs, self.classes).expect("network invariants hold")
    }

    pub fn forward(&self, x: ArrayView2<'_, T>) -> Result<(Array2<T>, ForwardTrace<T>)> {
        let mut traces: Vec<LayerTrace<T>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let trace = match traces.last() {
                None => layer.forward(x)?,
                Some(prev) => layer.forward(prev.output.view())?,
            };
            traces.push(trace);
        }
        let trace = ForwardTrace { layers: traces };
        Ok((trace.logits().clone(), trace))
    }

    pub fn forward_one(&self, x: ArrayView1<'_, T>) -> Result<(Array2<T>, ForwardTrace<T>)> {
        self.forward(x.insert_axis(Axis(0)))
    }

    /// Logits only; no trace is kept between layers.
    pub fn logits(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        let mut out = self.layers[0].forward(x)?.output;
        for layer in &self.layers[1..] {
            out = layer.forward(out.view())?.output;
        }
        Ok(out)
    }

    pub fn backward(
        &self,
        trace: &ForwardTrace<T>,
        dlogits: ArrayView2<'_, T>,
        mode: ControlGrad,
    ) -> Result<Gradients<T>> {
        if trace.layers.len() != self.layers.len() {
            return Err(Error::DimensionMismatch {
                context: "trace layers",
                expected: self.layers.len(),
                actual: trace.layers.len(),
            });
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = dlogits.to_owned();
        for (i, (layer, t)) in self.layers.iter().zip(&trace.layers).enumerate().rev() {
            let mut g = layer.backward(t, upstream.view(), mode, i > 0)?;
            if let Some(dx) = g.input.take() {
                upstream = dx;
            }
            grads.push(g);
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    /// Weights then biases of each layer, in layer order.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weights.as_slice_mut().expect("standard layout"),
                    l.biases.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn param_lens(&self) -> Vec<usize> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.len(), l.biases.len()])
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Layer::is_finite)
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            layers: self.layers.iter().map(Layer::cast).collect(),
            classes: self.classes,
        }
    }
}
