use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::spec::{LayerSpec, NeuronKind};
use crate::activations::{max_backward, max_forward, sync_backward, sync_forward};
use crate::error::{Error, Result};
use crate::real::Real;

/// How the backward pass treats control inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControlGrad {
    /// Route the surrogate `dy/dL` onto the peer's pre-activation. This is
    /// the gradient used for training.
    #[default]
    Surrogate,
    /// The analytic derivative of the piecewise forward pass: outputs are
    /// locally constant in `L`, so nothing flows through controls.
    Blocked,
}

/// Dense layer `m = W x + b` followed by per-neuron responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    /// `n_out x n_in`
    pub weights: Array2<T>,
    pub biases: Array1<T>,
    spec: LayerSpec,
}

/// Cached values of one layer for a batch (one row per sample).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace<T> {
    pub input: Array2<T>,
    pub pre: Array2<T>,
    /// Control value seen by each neuron; zero for plain neurons.
    pub control: Array2<T>,
    pub output: Array2<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads<T> {
    pub weights: Array2<T>,
    pub biases: Array1<T>,
    /// Gradient with respect to the pre-activations, after control routing.
    pub pre: Array2<T>,
    /// Gradient with respect to the layer input; omitted for the first layer.
    pub input: Option<Array2<T>>,
}

impl<T: Real> Layer<T> {
    pub fn new(spec: LayerSpec, weights: Array2<T>, biases: Array1<T>) -> Result<Self> {
        spec.validate()?;
        if weights.dim() != (spec.n_out(), spec.n_in()) {
            return Err(Error::InvalidSpec(format!(
                "weight matrix is {:?}, layer needs {}x{}",
                weights.dim(),
                spec.n_out(),
                spec.n_in()
            )));
        }
        if biases.len() != spec.n_out() {
            return Err(Error::DimensionMismatch {
                context: "bias vector",
                expected: spec.n_out(),
                actual: biases.len(),
            });
        }
        // Parameter slices are handed to the optimizer as contiguous memory.
        let weights = weights.as_standard_layout().into_owned();
        Ok(Layer {
            weights,
            biases,
            spec,
        })
    }

    pub fn zeros(spec: LayerSpec) -> Result<Self> {
        let (o, i) = (spec.n_out(), spec.n_in());
        Self::new(spec, Array2::zeros((o, i)), Array1::zeros(o))
    }

    /// Zero-mean Gaussian weights with standard deviation `sqrt(2 / n_in)`,
    /// zero biases.
    pub fn he_normal<R: Rng + ?Sized>(spec: LayerSpec, rng: &mut R) -> Result<Self> {
        let (o, i) = (spec.n_out(), spec.n_in());
        let normal = Normal::new(0.0, (2.0 / i as f64).sqrt()).expect("positive std");
        let weights = Array2::from_shape_simple_fn((o, i), || T::of(normal.sample(rng)));
        Self::new(spec, weights, Array1::zeros(o))
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn n_in(&self) -> usize {
        self.spec.n_in()
    }

    pub fn n_out(&self) -> usize {
        self.spec.n_out()
    }

    /// Two-phase forward: all pre-activations first, then controls are read
    /// from the finished pre-activations, then responses.
    pub fn forward(&self, x: ArrayView2<'_, T>) -> Result<LayerTrace<T>> {
        if x.ncols() != self.n_in() {
            return Err(Error::DimensionMismatch {
                context: "layer input",
                expected: self.n_in(),
                actual: x.ncols(),
            });
        }
        let mut pre = x.dot(&self.weights.t());
        pre += &self.biases;
        if !pre.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "pre-activation",
            });
        }

        let kinds = self.spec.kinds();
        let wiring = self.spec.wiring();
        let mut control = Array2::zeros(pre.raw_dim());
        let mut output = Array2::zeros(pre.raw_dim());
        Zip::from(pre.rows())
            .and(control.rows_mut())
            .and(output.rows_mut())
            .for_each(|m, mut l, mut y| {
                for (j, kind) in kinds.iter().enumerate() {
                    if let Some(p) = wiring[j] {
                        l[j] = m[p];
                    }
                    y[j] = match *kind {
                        NeuronKind::Plain(f) => f.eval(m[j]),
                        NeuronKind::Sync => sync_forward(m[j], l[j]),
                        NeuronKind::Max => max_forward(m[j], l[j]),
                    };
                }
            });

        Ok(LayerTrace {
            input: x.to_owned(),
            pre,
            control,
            output,
        })
    }

    /// Single-sample forward.
    pub fn forward_one(&self, x: ArrayView1<'_, T>) -> Result<LayerTrace<T>> {
        self.forward(x.insert_axis(Axis(0)))
    }

    /// Gradient of the pre-activations given the gradient of the outputs.
    /// Each neuron adds `dy * dy/dm` to its own slot and, through its control
    /// wire, `dy * dy/dL` to its peer's slot.
    pub fn pre_activation_grad(
        &self,
        trace: &LayerTrace<T>,
        dy: ArrayView2<'_, T>,
        mode: ControlGrad,
    ) -> Result<Array2<T>> {
        self.check_trace(trace, dy)?;
        let kinds = self.spec.kinds();
        let wiring = self.spec.wiring();
        let mut dm = Array2::zeros(trace.pre.raw_dim());
        Zip::from(dm.rows_mut())
            .and(trace.pre.rows())
            .and(trace.control.rows())
            .and(dy.rows())
            .for_each(|mut dm, m, l, dy| {
                for (j, kind) in kinds.iter().enumerate() {
                    let (dy_dm, dy_dl) = match *kind {
                        NeuronKind::Plain(f) => (f.derivative(m[j]), T::zero()),
                        NeuronKind::Sync => {
                            let g = sync_backward(m[j], l[j]);
                            (g.dy_dm, g.dy_dl)
                        }
                        NeuronKind::Max => {
                            let g = max_backward(m[j], l[j]);
                            (g.dy_dm, g.dy_dl)
                        }
                    };
                    dm[j] += dy[j] * dy_dm;
                    if let (Some(p), ControlGrad::Surrogate) = (wiring[j], mode) {
                        dm[p] += dy[j] * dy_dl;
                    }
                }
            });
        Ok(dm)
    }

    pub fn backward(
        &self,
        trace: &LayerTrace<T>,
        dy: ArrayView2<'_, T>,
        mode: ControlGrad,
        need_input_grad: bool,
    ) -> Result<LayerGrads<T>> {
        let pre = self.pre_activation_grad(trace, dy, mode)?;
        let mut weights = pre.t().dot(&trace.input);
        if !weights.is_standard_layout() {
            weights = weights.as_standard_layout().into_owned();
        }
        let biases = pre.sum_axis(Axis(0));
        let input = need_input_grad.then(|| pre.dot(&self.weights));
        Ok(LayerGrads {
            weights,
            biases,
            pre,
            input,
        })
    }

    fn check_trace(&self, trace: &LayerTrace<T>, dy: ArrayView2<'_, T>) -> Result<()> {
        let rows = trace.pre.nrows();
        let checks = [
            ("trace input width", self.n_in(), trace.input.ncols()),
            (
                "trace pre-activation width",
                self.n_out(),
                trace.pre.ncols(),
            ),
            ("trace control width", self.n_out(), trace.control.ncols()),
            ("upstream gradient width", self.n_out(), dy.ncols()),
            ("trace input rows", rows, trace.input.nrows()),
            ("trace control rows", rows, trace.control.nrows()),
            ("upstream gradient rows", rows, dy.nrows()),
        ];
        for (context, expected, actual) in checks {
            if expected != actual {
                return Err(Error::DimensionMismatch {
                    context,
                    expected,
                    actual,
                });
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .all(|v| v.is_finite())
    }

    pub fn cast<U: Real>(&self) -> Layer<U> {
        Layer {
            weights: self.weights.mapv(|v| U::of(v.to_f64_lossy())),
            biases: self.biases.mapv(|v| U::of(v.to_f64_lossy())),
            spec: self.spec.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::ResponseFunction;
    use ndarray::{array, Array};
    use proptest::prelude::*;

    fn two_neuron_sync_layer() -> Layer<f64> {
        // neuron 0: plain ReLU, neuron 1: sync controlled by neuron 0
        let spec = LayerSpec::new(1, vec![NeuronKind::RELU, NeuronKind::Sync])
            .unwrap()
            .with_wiring(vec![None, Some(0)])
            .unwrap();
        Layer::new(spec, array![[1.0], [1.0]], array![-2.0, 4.0]).unwrap()
    }

    #[test]
    fn zero_layer_outputs_zero() {
        let spec = LayerSpec::new(
            3,
            vec![
                NeuronKind::RELU,
                NeuronKind::Sync,
                NeuronKind::Max,
                NeuronKind::Sync,
            ],
        )
        .unwrap()
        .wire_controls(9)
        .unwrap();
        let layer = Layer::<f64>::zeros(spec).unwrap();
        let t = layer.forward_one(array![0.3, -5.0, 2.0].view()).unwrap();
        assert!(t.pre.iter().all(|&v| v == 0.0));
        assert!(t.output.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_relu_identity() {
        let spec = LayerSpec::uniform(1, 1, NeuronKind::RELU).unwrap();
        let layer = Layer::new(spec, array![[1.0]], array![0.0]).unwrap();
        let t = layer.forward_one(array![3.0].view()).unwrap();
        assert_eq!(t.output, array![[3.0]]);
    }

    #[test]
    fn sync_neuron_silenced_by_negative_peer() {
        let layer = two_neuron_sync_layer();
        let t = layer.forward_one(array![1.0].view()).unwrap();
        // m0 = -1, m1 = 5, L1 = m0
        assert_eq!(t.pre, array![[-1.0, 5.0]]);
        assert_eq!(t.control, array![[0.0, -1.0]]);
        assert_eq!(t.output, array![[0.0, 0.0]]);
    }

    #[test]
    fn silenced_sync_routes_gradient_to_peer() {
        let layer = two_neuron_sync_layer();
        let t = layer.forward_one(array![1.0].view()).unwrap();
        let g = 0.75;
        let dm = layer
            .pre_activation_grad(&t, array![[0.0, g]].view(), ControlGrad::Surrogate)
            .unwrap();
        assert_eq!(dm, array![[g, 0.0]]);
        let blocked = layer
            .pre_activation_grad(&t, array![[0.0, g]].view(), ControlGrad::Blocked)
            .unwrap();
        assert_eq!(blocked, array![[0.0, 0.0]]);
    }

    #[test]
    fn relu_layer_backward_is_textbook() {
        let spec = LayerSpec::uniform(2, 3, NeuronKind::RELU).unwrap();
        let w = array![[1.0, 0.5], [-0.2, 0.3], [0.7, 0.7]];
        let b = array![0.1, 1.0, 0.2];
        let layer = Layer::new(spec, w.clone(), b).unwrap();
        let x = array![[0.4, 0.9]];
        let t = layer.forward(x.view()).unwrap();
        assert!(t.pre.iter().all(|&m| m > 0.0));
        let dy = array![[0.3, -1.2, 2.0]];
        let g = layer
            .backward(&t, dy.view(), ControlGrad::Surrogate, true)
            .unwrap();
        assert_eq!(g.pre, dy);
        assert_eq!(g.biases, array![0.3, -1.2, 2.0]);
        assert_eq!(g.weights, dy.t().dot(&x));
        assert_eq!(g.input.unwrap(), dy.dot(&w));
    }

    #[test]
    fn shared_peer_accumulates_control_gradients() {
        // neurons 1 and 2 are sync neurons wired to neuron 0
        let spec = LayerSpec::new(
            1,
            vec![NeuronKind::RELU, NeuronKind::Sync, NeuronKind::Sync],
        )
        .unwrap()
        .with_wiring(vec![None, Some(0), Some(0)])
        .unwrap();
        let layer = Layer::new(spec, array![[1.0], [1.0], [2.0]], array![-1.0, 3.0, 1.0]).unwrap();
        let t = layer.forward_one(array![0.5].view()).unwrap();
        // m = [-0.5, 3.5, 2.0], both sync neurons in (L<0, m>0)
        let (g0, g1, g2) = (0.25, 0.5, -1.5);
        let dm = layer
            .pre_activation_grad(&t, array![[g0, g1, g2]].view(), ControlGrad::Surrogate)
            .unwrap();
        // neuron 0 has m < 0, so its own term is 0
        assert_eq!(dm, array![[g1 + g2, 0.0, 0.0]]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let layer = two_neuron_sync_layer();
        assert!(matches!(
            layer.forward(array![[1.0, 2.0]].view()),
            Err(Error::DimensionMismatch { .. })
        ));
        let t = layer.forward_one(array![1.0].view()).unwrap();
        assert!(layer
            .pre_activation_grad(&t, array![[1.0, 2.0, 3.0]].view(), ControlGrad::Surrogate)
            .is_err());
    }

    #[test]
    fn overflow_is_reported_as_non_finite() {
        let spec = LayerSpec::uniform(1, 1, NeuronKind::RELU).unwrap();
        let layer = Layer::new(spec, array![[f32::MAX]], array![0.0f32]).unwrap();
        assert!(matches!(
            layer.forward_one(array![10.0f32].view()),
            Err(Error::NonFinite { .. })
        ));
    }

    fn mixed_layer(n_in: usize, n_out: usize, seed: u64) -> Layer<f64> {
        let mut rng = crate::rng::stream(seed, crate::rng::Domain::Init, 0);
        let kinds = (0..n_out)
            .map(|j| match j % 3 {
                0 => NeuronKind::Sync,
                1 => NeuronKind::Max,
                _ => NeuronKind::Plain(ResponseFunction::Relu),
            })
            .collect();
        let spec = LayerSpec::new(n_in, kinds)
            .unwrap()
            .wire_controls(seed)
            .unwrap();
        Layer::he_normal(spec, &mut rng).unwrap()
    }

    proptest! {
        #[test]
        fn trace_satisfies_wiring_and_rules(seed in 0u64..1000, xs in proptest::collection::vec(-2.0f64..2.0, 5)) {
            let layer = mixed_layer(5, 7, seed);
            let t = layer.forward_one(Array::from(xs).view()).unwrap();
            for j in 0..7 {
                let m = t.pre[[0, j]];
                let l = t.control[[0, j]];
                match layer.spec().wiring()[j] {
                    Some(p) => prop_assert_eq!(l, t.pre[[0, p]]),
                    None => prop_assert_eq!(l, 0.0),
                }
                let y = match layer.spec().kinds()[j] {
                    NeuronKind::Sync => sync_forward(m, l),
                    NeuronKind::Max => max_forward(m, l),
                    NeuronKind::Plain(f) => f.eval(m),
                };
                prop_assert_eq!(t.output[[0, j]], y);
            }
        }

        #[test]
        fn rewiring_never_changes_plain_outputs(seed in 0u64..1000, other in 0u64..1000) {
            let layer = mixed_layer(4, 9, seed);
            let rewired_spec = layer.spec().wire_controls(other).unwrap();
            let rewired = Layer::new(rewired_spec, layer.weights.clone(), layer.biases.clone()).unwrap();
            let x = array![[0.3, -1.0, 0.8, 0.1]];
            let a = layer.forward(x.view()).unwrap();
            let b = rewired.forward(x.view()).unwrap();
            prop_assert_eq!(&a.pre, &b.pre);
            for (j, kind) in layer.spec().kinds().iter().enumerate() {
                if !kind.is_conditional() {
                    prop_assert_eq!(a.output[[0, j]], b.output[[0, j]]);
                }
            }
        }

        #[test]
        fn routed_gradient_mass_is_conserved(seed in 0u64..1000, dys in proptest::collection::vec(-3.0f64..3.0, 9)) {
            let layer = mixed_layer(3, 9, seed);
            let t = layer.forward(array![[0.5, -0.7, 1.1]].view()).unwrap();
            let dy = Array::from(dys.clone()).insert_axis(Axis(0));
            let dm = layer.pre_activation_grad(&t, dy.view(), ControlGrad::Surrogate).unwrap();
            let mut own = 0.0;
            let mut routed = 0.0;
            for (j, kind) in layer.spec().kinds().iter().enumerate() {
                let (m, l) = (t.pre[[0, j]], t.control[[0, j]]);
                let (gm, gl) = match *kind {
                    NeuronKind::Sync => { let g = sync_backward(m, l); (g.dy_dm, g.dy_dl) }
                    NeuronKind::Max => { let g = max_backward(m, l); (g.dy_dm, g.dy_dl) }
                    NeuronKind::Plain(f) => (f.derivative(m), 0.0),
                };
                own += dys[j] * gm;
                routed += dys[j] * gl;
            }
            prop_assert!((dm.sum() - (own + routed)).abs() < 1e-12);
            let blocked = layer.pre_activation_grad(&t, dy.view(), ControlGrad::Blocked).unwrap();
            prop_assert!((blocked.sum() - own).abs() < 1e-12);
        }
    }
}
