//! Activation potentials, the hardware ReLU with its gradient gate, and the
//! digital softmax output stage.

use crate::config::{OutputActivation, SimConfig};
use crate::error::{Error, Result};
use crate::multiplier::current_sum;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeuronState {
    pub h: f64,
    pub a: f64,
    /// Copy of `h` held on the φ_OUT capacitor for the backward phase.
    pub sampled_h: f64,
    /// Comparator output `h > 0`.
    pub relu_gate: bool,
}

impl NeuronState {
    pub fn relu(h: f64) -> Self {
        Self {
            h,
            a: relu(h),
            sampled_h: h,
            relu_gate: h > 0.0,
        }
    }

    /// Output-layer neuron; `a` is filled in by the output stage.
    pub fn output(h: f64) -> Self {
        Self {
            h,
            a: h,
            sampled_h: h,
            relu_gate: h > 0.0,
        }
    }
}

/// `h = Σ products` through the unity-calibrated buffer.
pub fn activation_potential(products: &[f64]) -> Result<f64> {
    if products.is_empty() {
        return Err(Error::Empty("bank"));
    }
    current_sum(products)
}

pub fn relu(h: f64) -> f64 {
    if h > 0.0 {
        h
    } else {
        0.0
    }
}

/// MUX A2: passes the back-summed gradient only when the neuron conducted.
pub fn local_gradient_gate(h: f64, backsum: f64) -> f64 {
    if h > 0.0 {
        backsum
    } else {
        0.0
    }
}

/// Settings of the digital output stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftmaxStage {
    /// Logit scale applied after the ADC.
    pub gain: f64,
    /// ADC/DAC resolution; 0 disables quantization.
    pub bits: u32,
    /// ADC input range ±V.
    pub range: f64,
}

impl Default for SoftmaxStage {
    fn default() -> Self {
        Self {
            gain: 1.0,
            bits: 0,
            range: 4.0,
        }
    }
}

impl SoftmaxStage {
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            gain: cfg.softmax_gain,
            bits: cfg.softmax_bits,
            range: cfg.softmax_range,
        }
    }

    fn quantize(&self, v: f64, lo: f64, hi: f64) -> f64 {
        if self.bits == 0 {
            return v;
        }
        let levels = ((1u64 << self.bits.min(52)) - 1) as f64;
        let step = (hi - lo) / levels;
        lo + ((v.clamp(lo, hi) - lo) / step).round() * step
    }

    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = h
            .iter()
            .map(|&v| self.gain * self.quantize(v, -self.range, self.range))
            .collect();
        softmax_digital(&logits)
            .into_iter()
            .map(|y| self.quantize(y, 0.0, 1.0))
            .collect()
    }
}

/// Max-subtracted softmax. An empty input gives an empty output.
pub fn softmax_digital(h: &[f64]) -> Vec<f64> {
    let max = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = h.iter().map(|&v| (v - max).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// `δ_l = (t_l − y_l)·φ′_l`, with φ′ = 1 for a linear output and the diagonal
/// `y(1 − y)` for softmax.
pub fn output_local_gradient(t: &[f64], y: &[f64], act: OutputActivation) -> Result<Vec<f64>> {
    if t.len() != y.len() {
        return Err(Error::Dimension {
            what: "target length",
            expected: y.len(),
            found: t.len(),
        });
    }
    Ok(t.iter()
        .zip(y)
        .map(|(&t, &y)| match act {
            OutputActivation::Linear => t - y,
            OutputActivation::Softmax => (t - y) * y * (1.0 - y),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn potential_examples() {
        assert!((activation_potential(&[0.1, 0.2]).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(activation_potential(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!(activation_potential(&[]).is_err());
    }

    #[test]
    fn relu_examples() {
        assert_eq!(relu(0.4), 0.4);
        assert_eq!(relu(-0.4), 0.0);
        assert_eq!(relu(0.0), 0.0);
        let n = NeuronState::relu(0.0);
        assert!(!n.relu_gate);
        assert_eq!(n.sampled_h, 0.0);
    }

    #[test]
    fn gate_examples() {
        assert_eq!(local_gradient_gate(-0.2, 0.5), 0.0);
        assert_eq!(local_gradient_gate(0.2, 0.5), 0.5);
        assert_eq!(local_gradient_gate(0.0, 0.5), 0.0);
    }

    #[test]
    fn softmax_examples() {
        for y in softmax_digital(&[0.0, 0.0, 0.0]) {
            assert!((y - 1.0 / 3.0).abs() < 1e-15);
        }
        for y in softmax_digital(&[712.0, 712.0, 712.0]) {
            assert!((y - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(softmax_digital(&[-3.2]), vec![1.0]);
    }

    #[test]
    fn output_gradient_examples() {
        let d = output_local_gradient(&[0.3, 0.7], &[0.3, 0.7], OutputActivation::Softmax).unwrap();
        assert_eq!(d, vec![0.0, 0.0]);
        let d = output_local_gradient(&[1.0, 0.0], &[0.6, 0.4], OutputActivation::Linear).unwrap();
        assert!((d[0] - 0.4).abs() < 1e-15 && (d[1] + 0.4).abs() < 1e-15);
        let d = output_local_gradient(&[1.0, 0.0], &[0.6, 0.4], OutputActivation::Softmax).unwrap();
        assert!((d[0] - 0.4 * 0.24).abs() < 1e-15 && (d[1] + 0.4 * 0.24).abs() < 1e-15);
        assert!(output_local_gradient(&[1.0], &[0.6, 0.4], OutputActivation::Linear).is_err());
    }

    /// The diagonal term equals the finite-difference derivative of the loss with
    /// respect to h_l when only y_l's own dependence on h_l is kept.
    #[test]
    fn softmax_diagonal_matches_finite_difference() {
        let h = [0.3, -0.2, 0.9];
        let t = [0.0, 1.0, 0.0];
        let y = softmax_digital(&h);
        let d = output_local_gradient(&t, &y, OutputActivation::Softmax).unwrap();
        let eps = 1e-6;
        for l in 0..3 {
            let partial = |dh: f64| {
                let mut hp = h;
                hp[l] += dh;
                let yl = softmax_digital(&hp)[l];
                0.5 * (t[l] - yl).powi(2)
            };
            let fd = (partial(eps) - partial(-eps)) / (2.0 * eps);
            assert!((-fd - d[l]).abs() < 1e-8, "l={l}: {} vs {}", -fd, d[l]);
        }
    }

    #[test]
    fn quantized_stage_stays_normalized_per_level() {
        let st = SoftmaxStage {
            gain: 1.0,
            bits: 8,
            range: 4.0,
        };
        let y = st.apply(&[0.1, 0.5, -0.3]);
        for v in &y {
            let k = v * 255.0;
            assert!((k - k.round()).abs() < 1e-9);
        }
        let exact = softmax_digital(&[0.1, 0.5, -0.3]);
        for (a, b) in y.iter().zip(exact) {
            assert!((a - b).abs() < 0.02);
        }
    }

    proptest! {
        #[test]
        fn relu_idempotent(h in -10.0f64..10.0) {
            prop_assert_eq!(relu(relu(h)), relu(h));
        }

        #[test]
        fn gate_consistent(h in -1.0f64..1.0, s in -1.0f64..1.0) {
            let on = if relu(h) > 0.0 { 1.0 } else { 0.0 };
            prop_assert_eq!(local_gradient_gate(h, s), s * on);
        }

        #[test]
        fn softmax_normalized_and_shift_invariant(
            h in proptest::collection::vec(-20.0f64..20.0, 1..8),
            c in -50.0f64..50.0,
        ) {
            let y = softmax_digital(&h);
            prop_assert!(y.iter().all(|&v| v > 0.0));
            prop_assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = h.iter().map(|v| v + c).collect();
            for (a, b) in y.iter().zip(softmax_digital(&shifted)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
