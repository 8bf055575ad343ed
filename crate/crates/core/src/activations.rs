//! Scalar response functions and conditional activations.
//!
//! A conditional activation owns an ordered set of response functions and a
//! selector that maps the sign pattern of its control channels to one of
//! them. A channel is *active* when its value is strictly positive; zero and
//! negative values are inactive.
//!
//! The two single-channel activations used in heterogeneous networks have
//! dedicated forward/backward rules:
//!
//! | rule        | `L > 0`   | `L <= 0`  |
//! |-------------|-----------|-----------|
//! | synchrony   | `relu(m)` | `0`       |
//! | max         | `abs(m)`  | `relu(m)` |
//!
//! Their backward pass returns a surrogate `dy/dL` equal to 1 exactly where
//! the control changed the output relative to a plain ReLU, and 0 elsewhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Slope used for the leaky branch of [`ConditionalActivation::four_way`].
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

/// One selectable response branch `y = f(m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "fn")]
pub enum ResponseFunction {
    Zero,
    Relu,
    LeakyRelu {
        slope: f64,
    },
    Sigmoid,
    BinaryStep,
    Abs,
    /// Pass-through; used for the logit layer that feeds the softmax loss.
    Identity,
}

impl ResponseFunction {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ResponseFunction::LeakyRelu { slope } if !(slope > 0.0 && slope < 1.0) => Err(
                Error::InvalidActivation(format!("leaky ReLU slope {slope} outside (0, 1)")),
            ),
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval<T: Real>(&self, m: T) -> T {
        let zero = T::zero();
        match *self {
            ResponseFunction::Zero => zero,
            ResponseFunction::Relu => relu(m),
            ResponseFunction::LeakyRelu { slope } => {
                if m > zero {
                    m
                } else {
                    T::of(slope) * m
                }
            }
            ResponseFunction::Sigmoid => sigmoid(m),
            ResponseFunction::BinaryStep => {
                if m > zero {
                    T::one()
                } else {
                    zero
                }
            }
            ResponseFunction::Abs => m.abs(),
            ResponseFunction::Identity => m,
        }
    }

    /// `dy/dm`. Kinks take the value of the left-hand (non-positive) side,
    /// so ReLU'(0) = 0 and Abs'(0) = 0. The step function is flat everywhere.
    #[inline]
    pub fn derivative<T: Real>(&self, m: T) -> T {
        let zero = T::zero();
        let one = T::one();
        match *self {
            ResponseFunction::Zero | ResponseFunction::BinaryStep => zero,
            ResponseFunction::Relu => {
                if m > zero {
                    one
                } else {
                    zero
                }
            }
            ResponseFunction::LeakyRelu { slope } => {
                if m > zero {
                    one
                } else {
                    T::of(slope)
                }
            }
            ResponseFunction::Sigmoid => {
                let s = sigmoid(m);
                s * (one - s)
            }
            ResponseFunction::Abs => {
                if m > zero {
                    one
                } else if m < zero {
                    -one
                } else {
                    zero
                }
            }
            ResponseFunction::Identity => one,
        }
    }
}

/// Free-function form of [`ResponseFunction::eval`].
#[inline]
pub fn eval_response<T: Real>(f: ResponseFunction, m: T) -> T {
    f.eval(m)
}

#[inline]
pub fn relu<T: Real>(m: T) -> T {
    if m > T::zero() {
        m
    } else {
        T::zero()
    }
}

#[inline]
pub fn sigmoid<T: Real>(m: T) -> T {
    let one = T::one();
    if m >= T::zero() {
        one / (one + (-m).exp())
    } else {
        let e = m.exp();
        e / (one + e)
    }
}

/// Sign classification of a control channel.
#[inline]
pub fn is_active<T: Real>(l: T) -> bool {
    l > T::zero()
}

/// Backward parameters of a conditional activation at one `(m, L)` point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationGradient<T> {
    pub dy_dm: T,
    pub dy_dl: T,
}

impl<T: Real> ActivationGradient<T> {
    #[inline]
    fn new(dy_dm: i8, dy_dl: i8) -> Self {
        ActivationGradient {
            dy_dm: T::of(dy_dm as f64),
            dy_dl: T::of(dy_dl as f64),
        }
    }
}

/// Coincidence detector: fires with `relu(m)` only while the control is active.
#[inline]
pub fn sync_forward<T: Real>(m: T, l: T) -> T {
    if is_active(l) {
        relu(m)
    } else {
        T::zero()
    }
}

#[inline]
pub fn sync_backward<T: Real>(m: T, l: T) -> ActivationGradient<T> {
    let fires = m > T::zero();
    match (is_active(l), fires) {
        (true, true) => ActivationGradient::new(1, 0),
        // Control silenced a neuron that ReLU would have fired.
        (false, true) => ActivationGradient::new(0, 1),
        (_, false) => ActivationGradient::new(0, 0),
    }
}

/// Max unit: `relu(m)` while the control is inactive, `|m|` while it is active.
#[inline]
pub fn max_forward<T: Real>(m: T, l: T) -> T {
    if is_active(l) {
        m.abs()
    } else {
        relu(m)
    }
}

#[inline]
pub fn max_backward<T: Real>(m: T, l: T) -> ActivationGradient<T> {
    let zero = T::zero();
    match (is_active(l), m > zero, m < zero) {
        (_, true, _) => ActivationGradient::new(1, 0),
        // Control flipped a silent neuron to |m|.
        (true, false, true) => ActivationGradient::new(-1, 1),
        _ => ActivationGradient::new(0, 0),
    }
}

/// A set of response functions selected by the sign pattern of `channels`
/// control inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalActivation {
    responses: Vec<ResponseFunction>,
    channels: usize,
    /// `table[mask]` is the selected response, where bit `j` of `mask` is set
    /// iff channel `j` is active.
    table: Vec<usize>,
}

impl ConditionalActivation {
    /// Largest supported channel count; the selector table has `2^channels` rows.
    pub const MAX_CHANNELS: usize = 16;

    pub fn new(
        responses: Vec<ResponseFunction>,
        channels: usize,
        table: Vec<usize>,
    ) -> Result<Self> {
        if responses.is_empty() {
            return Err(Error::InvalidActivation("no response functions".into()));
        }
        for r in &responses {
            r.validate()?;
        }
        if channels > Self::MAX_CHANNELS {
            return Err(Error::InvalidActivation(format!(
                "{channels} control channels exceeds the limit of {}",
                Self::MAX_CHANNELS
            )));
        }
        if table.len() != 1 << channels {
            return Err(Error::InvalidActivation(format!(
                "selector table has {} entries, {} channels need {}",
                table.len(),
                channels,
                1usize << channels
            )));
        }
        if let Some(&bad) = table.iter().find(|&&i| i >= responses.len()) {
            return Err(Error::InvalidActivation(format!(
                "selector target {bad} out of range for {} responses",
                responses.len()
            )));
        }
        Ok(ConditionalActivation {
            responses,
            channels,
            table,
        })
    }

    /// Two channels over ReLU, leaky ReLU, binary step and sigmoid:
    /// both active selects ReLU, only the first selects leaky ReLU, only the
    /// second selects the step, neither selects the sigmoid.
    pub fn four_way() -> Self {
        Self::new(
            vec![
                ResponseFunction::Relu,
                ResponseFunction::LeakyRelu {
                    slope: DEFAULT_LEAKY_SLOPE,
                },
                ResponseFunction::BinaryStep,
                ResponseFunction::Sigmoid,
            ],
            2,
            // masks: 0b00, 0b01 (first only), 0b10 (second only), 0b11
            vec![3, 1, 2, 0],
        )
        .expect("four-way selector is well formed")
    }

    /// `[0, relu]` selected by one channel.
    pub fn sync() -> Self {
        Self::new(
            vec![ResponseFunction::Zero, ResponseFunction::Relu],
            1,
            vec![0, 1],
        )
        .expect("sync selector is well formed")
    }

    /// `[relu, abs]` selected by one channel.
    pub fn max() -> Self {
        Self::new(
            vec![ResponseFunction::Relu, ResponseFunction::Abs],
            1,
            vec![0, 1],
        )
        .expect("max selector is well formed")
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn responses(&self) -> &[ResponseFunction] {
        &self.responses
    }

    /// Zero-based index of the response selected by `controls`.
    pub fn select_branch<T: Real>(&self, controls: &[T]) -> Result<usize> {
        if controls.len() != self.channels {
            return Err(Error::DimensionMismatch {
                context: "control channels",
                expected: self.channels,
                actual: controls.len(),
            });
        }
        let mask = controls.iter().enumerate().fold(0usize, |acc, (j, &l)| {
            acc | (usize::from(is_active(l)) << j)
        });
        Ok(self.table[mask])
    }

    pub fn response_for<T: Real>(&self, controls: &[T]) -> Result<ResponseFunction> {
        Ok(self.responses[self.select_branch(controls)?])
    }

    pub fn eval<T: Real>(&self, m: T, controls: &[T]) -> Result<T> {
        Ok(self.response_for(controls)?.eval(m))
    }

    /// `dy/dm` of the selected branch. The generic selector carries no
    /// control gradient; only the synchrony and max rules define one.
    pub fn derivative<T: Real>(&self, m: T, controls: &[T]) -> Result<T> {
        Ok(self.response_for(controls)?.derivative(m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const GRID: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

    #[test]
    fn response_examples() {
        assert_eq!(eval_response(ResponseFunction::Relu, 2.5), 2.5);
        assert_eq!(eval_response(ResponseFunction::Relu, -1.0), 0.0);
        assert_eq!(eval_response(ResponseFunction::Abs, -2.0), 2.0);
        assert_eq!(eval_response(ResponseFunction::Sigmoid, 0.0), 0.5);
        assert_eq!(eval_response(ResponseFunction::Zero, 7.0), 0.0);
        assert_eq!(eval_response(ResponseFunction::BinaryStep, 0.0), 0.0);
        assert_eq!(eval_response(ResponseFunction::BinaryStep, 1e-9), 1.0);
        let leaky = ResponseFunction::LeakyRelu { slope: 0.01 };
        assert_eq!(leaky.eval(-2.0), -0.02);
        assert_eq!(leaky.eval(3.0f32), 3.0);
    }

    #[test]
    fn leaky_slope_must_be_in_unit_interval() {
        for slope in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(ResponseFunction::LeakyRelu { slope }.validate().is_err());
        }
        assert!(ResponseFunction::LeakyRelu { slope: 0.2 }
            .validate()
            .is_ok());
    }

    #[test]
    fn sigmoid_is_stable_for_large_inputs() {
        assert!(sigmoid(-800.0f64) >= 0.0);
        assert!(sigmoid(-800.0f64).is_finite());
        assert_eq!(sigmoid(800.0f64), 1.0);
        for m in [-30.0f64, -3.0, 0.3, 30.0] {
            let s = sigmoid(m);
            assert!(s > 0.0 && s < 1.0);
        }
    }

    #[test]
    fn four_way_selector_examples() {
        let ca = ConditionalActivation::four_way();
        let pick = |l: [f64; 2]| ca.responses()[ca.select_branch(&l).unwrap()];
        assert_eq!(pick([1.0, 1.0]), ResponseFunction::Relu);
        assert_eq!(
            pick([1.0, -1.0]),
            ResponseFunction::LeakyRelu { slope: 0.01 }
        );
        assert_eq!(pick([-1.0, 1.0]), ResponseFunction::BinaryStep);
        assert_eq!(pick([-1.0, -1.0]), ResponseFunction::Sigmoid);
        // zero counts as inactive
        assert_eq!(pick([0.0, 0.0]), ResponseFunction::Sigmoid);
    }

    #[test]
    fn select_branch_rejects_wrong_arity() {
        let ca = ConditionalActivation::four_way();
        let err = ca.select_branch(&[1.0f64]).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                expected: 2,
                actual: 1,
                ..
            }
        ));
    }

    #[test]
    fn malformed_selectors_are_rejected() {
        assert!(ConditionalActivation::new(vec![], 0, vec![0]).is_err());
        assert!(ConditionalActivation::new(vec![ResponseFunction::Relu], 1, vec![0]).is_err());
        assert!(ConditionalActivation::new(vec![ResponseFunction::Relu], 1, vec![0, 1]).is_err());
        assert!(ConditionalActivation::new(
            vec![ResponseFunction::LeakyRelu { slope: 2.0 }],
            0,
            vec![0]
        )
        .is_err());
    }

    #[test]
    fn sync_and_max_selectors_agree_with_dedicated_rules() {
        let sync = ConditionalActivation::sync();
        let max = ConditionalActivation::max();
        for &m in &GRID {
            for &l in &GRID {
                assert_eq!(sync.eval(m, &[l]).unwrap(), sync_forward(m, l));
                assert_eq!(max.eval(m, &[l]).unwrap(), max_forward(m, l));
                assert_eq!(sync.derivative(m, &[l]).unwrap(), sync_backward(m, l).dy_dm);
                assert_eq!(max.derivative(m, &[l]).unwrap(), max_backward(m, l).dy_dm);
            }
        }
    }

    #[test]
    fn sync_examples() {
        assert_eq!(sync_forward(1.5, 0.7), 1.5);
        assert_eq!(sync_forward(1.5, -0.7), 0.0);
        assert_eq!(sync_forward(-2.0, 0.7), 0.0);

        let g = |m: f64, l: f64| {
            let g = sync_backward(m, l);
            (g.dy_dm, g.dy_dl)
        };
        assert_eq!(g(2.0, 1.0), (1.0, 0.0));
        assert_eq!(g(2.0, -1.0), (0.0, 1.0));
        assert_eq!(g(-2.0, -1.0), (0.0, 0.0));
        assert_eq!(g(-2.0, 1.0), (0.0, 0.0));
    }

    #[test]
    fn max_examples() {
        assert_eq!(max_forward(3.0, -1.0), 3.0);
        assert_eq!(max_forward(-2.0, 1.0), 2.0);
        assert_eq!(max_forward(-2.0, -1.0), 0.0);

        let g = |m: f64, l: f64| {
            let g = max_backward(m, l);
            (g.dy_dm, g.dy_dl)
        };
        assert_eq!(g(-2.0, 1.0), (-1.0, 1.0));
        assert_eq!(g(2.0, -1.0), (1.0, 0.0));
        assert_eq!(g(-2.0, -1.0), (0.0, 0.0));
        assert_eq!(g(2.0, 1.0), (1.0, 0.0));
    }

    #[test]
    fn boundaries_fall_in_zero_output_branch() {
        // L = 0 is inactive, m = 0 produces zero output and zero gradients.
        assert_eq!(sync_forward(1.0, 0.0), 0.0);
        assert_eq!(max_forward(-1.0, 0.0), 0.0);
        for l in [-1.0, 0.0, 1.0] {
            assert_eq!(sync_forward(0.0, l), 0.0);
            assert_eq!(max_forward(0.0, l), 0.0);
            let s = sync_backward(0.0, l);
            let x = max_backward(0.0, l);
            assert_eq!((s.dy_dm, s.dy_dl), (0.0, 0.0));
            assert_eq!((x.dy_dm, x.dy_dl), (0.0, 0.0));
        }
    }

    #[test]
    fn logic_equivalence_on_sign_grid() {
        for &m in &GRID {
            for &l in &GRID {
                assert_eq!(sync_forward(m, l) > 0.0, m > 0.0 && l > 0.0, "sync {m} {l}");
                assert_eq!(
                    max_forward(m, l) > 0.0,
                    m > 0.0 || (l > 0.0 && m != 0.0),
                    "max {m} {l}"
                );
            }
        }
    }

    #[test]
    fn dy_dm_matches_central_difference_off_boundaries() {
        let h = 1e-6f64;
        let delta = 1e-3;
        let points = [-1.7, -0.4, -delta * 2.0, delta * 2.0, 0.3, 2.2];
        for &m in &points {
            for &l in &points {
                let fd_sync = (sync_forward(m + h, l) - sync_forward(m - h, l)) / (2.0 * h);
                let fd_max = (max_forward(m + h, l) - max_forward(m - h, l)) / (2.0 * h);
                assert!((fd_sync - sync_backward(m, l).dy_dm).abs() < 1e-6);
                assert!((fd_max - max_backward(m, l).dy_dm).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn response_derivatives_match_central_difference() {
        let h = 1e-6;
        let fs = [
            ResponseFunction::Relu,
            ResponseFunction::LeakyRelu { slope: 0.01 },
            ResponseFunction::Sigmoid,
            ResponseFunction::Abs,
            ResponseFunction::Identity,
            ResponseFunction::Zero,
            ResponseFunction::BinaryStep,
        ];
        for f in fs {
            for m in [-2.0f64, -0.3, 0.4, 1.9] {
                let fd = (f.eval(m + h) - f.eval(m - h)) / (2.0 * h);
                assert!((fd - f.derivative(m)).abs() < 1e-6, "{f:?} at {m}");
            }
        }
    }

    proptest! {
        #[test]
        fn sync_is_relu_gated_by_control(m in -10.0f64..10.0, l in -10.0f64..10.0) {
            let gate = if l > 0.0 { 1.0 } else { 0.0 };
            prop_assert_eq!(sync_forward(m, l), relu(m) * gate);
        }

        #[test]
        fn max_is_relu_or_abs(m in -10.0f64..10.0, l in -10.0f64..10.0) {
            let expected = if l <= 0.0 { relu(m) } else { m.abs() };
            prop_assert_eq!(max_forward(m, l), expected);
        }

        #[test]
        fn selection_ignores_positive_scaling(
            l in proptest::array::uniform2(-5.0f64..5.0),
            c in proptest::array::uniform2(1e-3f64..100.0),
        ) {
            let ca = ConditionalActivation::four_way();
            let scaled = [l[0] * c[0], l[1] * c[1]];
            prop_assert_eq!(ca.select_branch(&l).unwrap(), ca.select_branch(&scaled).unwrap());
        }

        #[test]
        fn response_ranges(m in -30.0f64..30.0) {
            prop_assert!(ResponseFunction::Relu.eval(m) >= 0.0);
            let s = ResponseFunction::Sigmoid.eval(m);
            prop_assert!(s > 0.0 && s < 1.0);
            let b = ResponseFunction::BinaryStep.eval(m);
            prop_assert!(b == 0.0 || b == 1.0);
            prop_assert_eq!(ResponseFunction::Abs.eval(m), m.abs());
        }
    }
}
