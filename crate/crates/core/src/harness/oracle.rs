//! Plain floating-point MLP used as the reference for the analog datapath.
//!
//! Weights use the simulator's `[layer][neuron][input]` layout with the bias
//! weight (if any) in the last input slot. Loss is `E = ½·Σ (t − y)²`.

use crate::config::OutputActivation;
use crate::error::{Error, Result};

pub type Weights = Vec<Vec<Vec<f64>>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientRule {
    /// True gradient of E, full softmax Jacobian included.
    Exact,
    /// Output local gradient `(t − y)·y(1 − y)` as the hardware forms it.
    Diagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleMlp {
    pub layers: Vec<usize>,
    pub bias: bool,
    pub output: OutputActivation,
    pub softmax_gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Input vector of every layer, bias entry included.
    pub inputs: Vec<Vec<f64>>,
    /// Pre-activations of every layer.
    pub h: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl OracleMlp {
    pub fn check(&self, w: &Weights) -> Result<()> {
        if w.len() + 1 != self.layers.len() {
            return Err(Error::Dimension {
                what: "oracle weight layers",
                expected: self.layers.len().saturating_sub(1),
                found: w.len(),
            });
        }
        for (k, m) in w.iter().enumerate() {
            let cols = self.layers[k] + self.bias as usize;
            if m.len() != self.layers[k + 1] || m.iter().any(|r| r.len() != cols) {
                return Err(Error::Dimension {
                    what: "oracle weight matrix",
                    expected: self.layers[k + 1] * cols,
                    found: m.iter().map(Vec::len).sum(),
                });
            }
        }
        Ok(())
    }

    pub fn forward(&self, w: &Weights, x: &[f64]) -> Result<Trace> {
        self.check(w)?;
        if x.len() != self.layers[0] {
            return Err(Error::Dimension {
                what: "oracle input",
                expected: self.layers[0],
                found: x.len(),
            });
        }
        let mut inputs = Vec::new();
        let mut hs = Vec::new();
        let mut a = x.to_vec();
        for (k, m) in w.iter().enumerate() {
            if self.bias {
                a.push(1.0);
            }
            let h: Vec<f64> = m.iter().map(|row| row.iter().zip(&a).map(|(w, a)| w * a).sum()).collect();
            let last = k + 1 == w.len();
            let next = if !last {
                h.iter().map(|&v| v.max(0.0)).collect()
            } else {
                match self.output {
                    OutputActivation::Linear => h.clone(),
                    OutputActivation::Softmax => {
                        let z: Vec<f64> = h.iter().map(|v| v * self.softmax_gain).collect();
                        let m = z.iter().cloned().fold(f64::MIN, f64::max);
                        let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
                        let s: f64 = e.iter().sum();
                        e.iter().map(|v| v / s).collect()
                    }
                }
            };
            inputs.push(a);
            hs.push(h);
            a = next;
        }
        Ok(Trace { inputs, h: hs, y: a })
    }

    pub fn loss(&self, w: &Weights, x: &[f64], t: &[f64]) -> Result<f64> {
        let y = self.forward(w, x)?.y;
        Ok(0.5 * y.iter().zip(t).map(|(y, t)| (t - y) * (t - y)).sum::<f64>())
    }

    /// Returns `(y, ∂E/∂w)` under the given rule for the output layer.
    pub fn gradients(&self, w: &Weights, x: &[f64], t: &[f64], rule: GradientRule) -> Result<(Vec<f64>, Weights)> {
        let tr = self.forward(w, x)?;
        if t.len() != tr.y.len() {
            return Err(Error::Dimension {
                what: "oracle target",
                expected: tr.y.len(),
                found: t.len(),
            });
        }
        let y = &tr.y;
        let n = y.len();
        // g[l] = ∂E/∂h_l at the output layer
        let mut g: Vec<f64> = match (self.output, rule) {
            (OutputActivation::Linear, _) => (0..n).map(|l| -(t[l] - y[l])).collect(),
            (OutputActivation::Softmax, GradientRule::Diagonal) => {
                (0..n).map(|l| -(t[l] - y[l]) * y[l] * (1.0 - y[l])).collect()
            }
            (OutputActivation::Softmax, GradientRule::Exact) => (0..n)
                .map(|l| {
                    let mut s = 0.0;
                    for m in 0..n {
                        let jac = y[m] * (if m == l { 1.0 } else { 0.0 } - y[l]);
                        s += -(t[m] - y[m]) * jac;
                    }
                    s * self.softmax_gain
                })
                .collect(),
        };
        let mut grads: Weights = w.iter().map(|m| m.iter().map(|r| vec![0.0; r.len()]).collect()).collect();
        for k in (0..w.len()).rev() {
            for (i, gi) in g.iter().enumerate() {
                for (j, aj) in tr.inputs[k].iter().enumerate() {
                    grads[k][i][j] = gi * aj;
                }
            }
            if k > 0 {
                let n_prev = self.layers[k];
                g = (0..n_prev)
                    .map(|j| {
                        if tr.h[k - 1][j] <= 0.0 {
                            0.0
                        } else {
                            (0..g.len()).map(|i| g[i] * w[k][i][j]).sum()
                        }
                    })
                    .collect();
            }
        }
        Ok((tr.y, grads))
    }

    /// One SGD step `w ← clip(w − η·∂E/∂w)`; `clip = None` disables clipping.
    pub fn sgd_step(
        &self,
        w: &mut Weights,
        x: &[f64],
        t: &[f64],
        eta: f64,
        rule: GradientRule,
        clip: Option<f64>,
    ) -> Result<Vec<f64>> {
        let (y, g) = self.gradients(w, x, t, rule)?;
        for (wl, gl) in w.iter_mut().zip(&g) {
            for (wr, gr) in wl.iter_mut().zip(gl) {
                for (wv, gv) in wr.iter_mut().zip(gr) {
                    let v = *wv - eta * gv;
                    *wv = match clip {
                        Some(c) => v.clamp(-c, c),
                        None => v,
                    };
                }
            }
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(mlp: &OracleMlp, rng: &mut ChaCha8Rng) -> Weights {
        (0..mlp.layers.len() - 1)
            .map(|k| {
                (0..mlp.layers[k + 1])
                    .map(|_| (0..mlp.layers[k] + mlp.bias as usize).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect()
            })
            .collect()
    }

    fn fd_check(output: OutputActivation) {
        let mlp = OracleMlp {
            layers: vec![3, 4, 3],
            bias: true,
            output,
            softmax_gain: 2.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let w = random(&mlp, &mut rng);
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
            let t = vec![1.0, 0.0, 0.0];
            let (_, g) = mlp.gradients(&w, &x, &t, GradientRule::Exact).unwrap();
            let h = 1e-5;
            for k in 0..w.len() {
                for i in 0..w[k].len() {
                    for j in 0..w[k][i].len() {
                        let mut wp = w.clone();
                        wp[k][i][j] += h;
                        let mut wm = w.clone();
                        wm[k][i][j] -= h;
                        let fd = (mlp.loss(&wp, &x, &t).unwrap() - mlp.loss(&wm, &x, &t).unwrap()) / (2.0 * h);
                        let an = g[k][i][j];
                        let tol = 1e-6 * an.abs().max(fd.abs()).max(1e-3);
                        assert!((fd - an).abs() <= tol, "w[{k}][{i}][{j}]: fd {fd} vs {an}");
                    }
                }
            }
        }
    }

    #[test]
    fn linear_gradient_matches_finite_difference() {
        fd_check(OutputActivation::Linear);
    }

    #[test]
    fn softmax_gradient_matches_finite_difference() {
        fd_check(OutputActivation::Softmax);
    }

    #[test]
    fn zero_weights_uniform_softmax() {
        let mlp = OracleMlp {
            layers: vec![4, 5, 3],
            bias: false,
            output: OutputActivation::Softmax,
            softmax_gain: 1.0,
        };
        let w = vec![vec![vec![0.0; 4]; 5], vec![vec![0.0; 5]; 3]];
        let y = mlp.forward(&w, &[0.1, 0.2, 0.3, 0.4]).unwrap().y;
        assert!(y.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert!(mlp.forward(&w[..1].to_vec(), &[0.0; 4]).is_err());
        assert!(mlp.forward(&w, &[0.0; 3]).is_err());
    }
}
