//! Central-difference gradient checking.
//!
//! Loss values for the perturbed networks come from a separate scalar
//! forward pass written with plain loops, so the check does not share code
//! with the batched forward/backward it verifies.
//!
//! The surrogate control gradient is not the derivative of the forward pass
//! (outputs are flat in `L` within a branch). To check it by finite
//! differences, the scalar forward adds a straight-through term
//! `L - L0` to every neuron whose control changed its output at the
//! unperturbed point `L0`. That term is zero at the base point and has unit
//! slope in `L`, which is exactly the surrogate rule.

use ndarray::{Array1, Axis};
use rand::seq::index;

use super::layer::ControlGrad;
use super::loss::softmax_cross_entropy_batch;
use super::model::Network;
use super::spec::NeuronKind;
use crate::activations::{max_forward, sync_forward};
use crate::error::{Error, Result};
use crate::rng::{self, Domain};

/// Gradients smaller than this are compared in absolute terms.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tensor {
    Weight,
    Bias,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamRef {
    pub layer: usize,
    pub tensor: Tensor,
    pub index: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    pub mode: ControlGrad,
    /// Check a random subset of at most this many entries per tensor.
    pub max_per_tensor: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            epsilon: 1e-5,
            mode: ControlGrad::Surrogate,
            max_per_tensor: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: Option<ParamRef>,
    pub checked: usize,
    /// Parameters whose perturbation moved some `m` or `L` across a branch
    /// boundary.
    pub skipped: usize,
}

impl GradCheckReport {
    pub fn skipped_fraction(&self) -> f64 {
        let total = self.checked + self.skipped;
        if total == 0 {
            0.0
        } else {
            self.skipped as f64 / total as f64
        }
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Checks every parameter against the surrogate gradient used in training.
pub fn grad_check(
    net: &Network<f64>,
    x: &[f64],
    label: usize,
    epsilon: f64,
) -> Result<GradCheckReport> {
    grad_check_with(
        net,
        x,
        label,
        &GradCheckOptions {
            epsilon,
            ..Default::default()
        },
    )
}

pub fn grad_check_with(
    net: &Network<f64>,
    x: &[f64],
    label: usize,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    if !(1e-6..=1e-4).contains(&opts.epsilon) {
        return Err(Error::InvalidArgument(format!(
            "epsilon {} outside [1e-6, 1e-4]",
            opts.epsilon
        )));
    }
    if x.len() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "gradient check input",
            expected: net.input_dim(),
            actual: x.len(),
        });
    }

    let xs = Array1::from(x.to_vec()).insert_axis(Axis(0));
    let (logits, trace) = net.forward(xs.view())?;
    let (_, dlogits) = softmax_cross_entropy_batch(logits.view(), &[label])?;
    let grads = net.backward(&trace, dlogits.view(), opts.mode)?;

    let base = scalar_forward(net, x, label, None);
    let anchors = match opts.mode {
        ControlGrad::Surrogate => Some(base.anchors.clone()),
        ControlGrad::Blocked => None,
    };

    let mut probe = net.clone();
    let mut rng = rng::stream(opts.seed, Domain::GradCheck, 0);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        skipped: 0,
    };

    for (li, g) in grads.layers.iter().enumerate() {
        for tensor in [Tensor::Weight, Tensor::Bias] {
            let analytic = match tensor {
                Tensor::Weight => g.weights.as_slice().expect("standard layout"),
                Tensor::Bias => g.biases.as_slice().expect("standard layout"),
            };
            let picks: Vec<usize> = match opts.max_per_tensor {
                Some(k) if k < analytic.len() => {
                    let mut v = index::sample(&mut rng, analytic.len(), k).into_vec();
                    v.sort_unstable();
                    v
                }
                _ => (0..analytic.len()).collect(),
            };
            for idx in picks {
                let original = param(&probe, li, tensor, idx);
                set_param(&mut probe, li, tensor, idx, original + opts.epsilon);
                let plus = scalar_forward(&probe, x, label, anchors.as_deref());
                set_param(&mut probe, li, tensor, idx, original - opts.epsilon);
                let minus = scalar_forward(&probe, x, label, anchors.as_deref());
                set_param(&mut probe, li, tensor, idx, original);

                if plus.pattern != base.pattern || minus.pattern != base.pattern {
                    report.skipped += 1;
                    continue;
                }
                let numeric = (plus.loss - minus.loss) / (2.0 * opts.epsilon);
                let err = relative_error(analytic[idx], numeric);
                report.checked += 1;
                if err > report.max_rel_error || report.worst.is_none() {
                    report.max_rel_error = err.max(report.max_rel_error);
                    report.worst = Some(ParamRef {
                        layer: li,
                        tensor,
                        index: idx,
                    });
                }
            }
        }
    }
    Ok(report)
}

fn param(net: &Network<f64>, layer: usize, tensor: Tensor, idx: usize) -> f64 {
    let l = &net.layers()[layer];
    match tensor {
        Tensor::Weight => l.weights.as_slice().expect("standard layout")[idx],
        Tensor::Bias => l.biases[idx],
    }
}

fn set_param(net: &mut Network<f64>, layer: usize, tensor: Tensor, idx: usize, v: f64) {
    let l = &mut net.layers_mut()[layer];
    match tensor {
        Tensor::Weight => l.weights.as_slice_mut().expect("standard layout")[idx] = v,
        Tensor::Bias => l.biases[idx] = v,
    }
}

struct ScalarPass {
    loss: f64,
    /// Sign class of every kinked pre-activation and every control.
    pattern: Vec<i8>,
    /// Per layer: neurons whose control changed the output, with their `L`.
    anchors: Vec<Vec<(usize, f64)>>,
}

fn scalar_forward(
    net: &Network<f64>,
    x: &[f64],
    label: usize,
    anchors: Option<&[Vec<(usize, f64)>]>,
) -> ScalarPass {
    let sign = |v: f64| -> i8 {
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };
    let mut pattern = Vec::new();
    let mut found = Vec::with_capacity(net.layers().len());
    let mut input = x.to_vec();
    for (li, layer) in net.layers().iter().enumerate() {
        let n = layer.n_out();
        let mut m = vec![0.0; n];
        for (j, mj) in m.iter_mut().enumerate() {
            let mut acc = layer.biases[j];
            for (i, xi) in input.iter().enumerate() {
                acc += layer.weights[[j, i]] * xi;
            }
            *mj = acc;
        }
        let kinds = layer.spec().kinds();
        let wiring = layer.spec().wiring();
        let mut y = vec![0.0; n];
        let mut layer_anchors = Vec::new();
        for j in 0..n {
            let l = wiring[j].map_or(0.0, |p| m[p]);
            if kinds[j].has_kink() {
                pattern.push(sign(m[j]));
            }
            if kinds[j].is_conditional() {
                pattern.push(i8::from(l > 0.0));
            }
            y[j] = match kinds[j] {
                NeuronKind::Plain(f) => f.eval(m[j]),
                NeuronKind::Sync => {
                    if l <= 0.0 && m[j] > 0.0 {
                        layer_anchors.push((j, l));
                    }
                    sync_forward(m[j], l)
                }
                NeuronKind::Max => {
                    if l > 0.0 && m[j] < 0.0 {
                        layer_anchors.push((j, l));
                    }
                    max_forward(m[j], l)
                }
            };
        }
        if let Some(anchors) = anchors {
            for &(j, l0) in &anchors[li] {
                let l = wiring[j].map_or(0.0, |p| m[p]);
                y[j] += l - l0;
            }
        }
        found.push(layer_anchors);
        input = y;
    }

    let max = input.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = input.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    ScalarPass {
        loss: lse - input[label],
        pattern,
        anchors: found,
    }
}
