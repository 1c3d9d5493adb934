//! Network assembly and the S[1:0] phase machine: functional read, feedforward,
//! error evaluation, backpropagation, weight update, early stopping, and ADC
//! write-back.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::{activation_potential, local_gradient_gate, output_local_gradient, NeuronState, SoftmaxStage};
use crate::adc::SignedAdc;
use crate::bca::BitCellArray;
use crate::codec::{encode_weight, max_magnitude, WeightCode};
use crate::config::{OutputActivation, SimConfig};
use crate::error::{Error, Result};
use crate::error_block::{ErrorBlock, ErrorReadout};
use crate::frontend::{swc_signed_weight, WeightUpdateUnit};
use crate::ledger::{Block, Ledger, LedgerEntry, Phase, Totals};
use crate::multiplier::{current_sum, SignedMultiplier, SmRouting};

/// Voltage on the constant bias input (V).
pub const BIAS_INPUT: f64 = 1.0;

/// Bank/column footprint of one layer in the bit-cell array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerMap {
    /// One bank per neuron of this layer.
    pub banks: usize,
    /// One column per input of this layer (plus the bias column).
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    layers: Vec<usize>,
    maps: Vec<LayerMap>,
    bias: bool,
}

impl NetworkTopology {
    pub fn new(layers: &[usize], bias: bool) -> Result<Self> {
        let maps = layers
            .windows(2)
            .map(|w| LayerMap {
                banks: w[1],
                cols: w[0] + bias as usize,
            })
            .collect();
        Self::with_maps(layers, maps, bias)
    }

    /// Checks an explicit bank/column map against the layer sizes.
    pub fn with_maps(layers: &[usize], maps: Vec<LayerMap>, bias: bool) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::Validation(format!(
                "a network needs at least an input and an output layer (got {} sizes)",
                layers.len()
            )));
        }
        if let Some(i) = layers.iter().position(|&n| n == 0) {
            return Err(Error::Validation(format!("layer {i} has zero neurons")));
        }
        if maps.len() != layers.len() - 1 {
            return Err(Error::Dimension {
                what: "layer maps",
                expected: layers.len() - 1,
                found: maps.len(),
            });
        }
        for (k, m) in maps.iter().enumerate() {
            if m.banks != layers[k + 1] {
                return Err(Error::Dimension {
                    what: "banks in layer map",
                    expected: layers[k + 1],
                    found: m.banks,
                });
            }
            if m.cols != layers[k] + bias as usize {
                return Err(Error::Dimension {
                    what: "columns in layer map",
                    expected: layers[k] + bias as usize,
                    found: m.cols,
                });
            }
        }
        Ok(Self {
            layers: layers.to_vec(),
            maps,
            bias,
        })
    }

    pub fn from_config(cfg: &SimConfig) -> Result<Self> {
        Self::new(&cfg.layers, cfg.bias)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layers
    }

    pub fn maps(&self) -> &[LayerMap] {
        &self.maps
    }

    pub fn bias(&self) -> bool {
        self.bias
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.layers.last().expect("validated non-empty")
    }

    /// Number of weight layers ξ.
    pub fn depth(&self) -> usize {
        self.maps.len()
    }
}

/// One labelled example: input voltages and one-hot target voltages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub label: usize,
}

/// `[layer][bank][col]` grid.
pub type Grid<T> = Vec<Vec<Vec<T>>>;

#[derive(Debug, Clone)]
struct Layer {
    array: BitCellArray,
    /// `[bank * cols + col]`
    units: Vec<WeightUpdateUnit>,
    /// Inputs seen in the last forward pass, bias included.
    inputs: Vec<f64>,
    neurons: Vec<NeuronState>,
    delta: Vec<f64>,
    last_dw: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    /// Weights live only in SRAM; run a functional read first.
    Unloaded,
    Ready,
    Forwarded,
    ErrorEvaluated,
    BackPropagated,
}

/// Result of a forward pass that has not been committed to the network state.
struct Propagation {
    inputs: Vec<Vec<f64>>,
    neurons: Vec<Vec<NeuronState>>,
    y: Vec<f64>,
    mult_power: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Network {
    cfg: SimConfig,
    topo: NetworkTopology,
    layers: Vec<Layer>,
    sm: SignedMultiplier,
    softmax: SoftmaxStage,
    error_block: ErrorBlock,
    adc: SignedAdc,
    ledger: Ledger,
    stage: Stage,
    /// Simulated time (s).
    clock: f64,
    output: Vec<f64>,
    readout: Option<ErrorReadout>,
    iterations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean |V_E| over the epoch's iterations (V).
    pub mean_abs_ve: f64,
    /// Mean `½Σe²` over the epoch (V²).
    pub mean_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Ledger energy accumulated during the epoch (J).
    pub energy: f64,
    /// Ledger delay accumulated during the epoch (s).
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub iterations: u64,
    pub history: Vec<EpochRecord>,
    /// Accuracies with the analog weights held on the WU capacitors.
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Accuracies after ADC write-back and a fresh functional read.
    pub quantized_train_accuracy: f64,
    pub quantized_test_accuracy: f64,
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Uniform integer codes in `[−max, +max]`, drawn bank by bank.
pub fn random_codes(topo: &NetworkTopology, b_w: u8, seed: u64) -> Result<Grid<WeightCode>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max = max_magnitude(b_w);
    topo.maps()
        .iter()
        .map(|m| {
            (0..m.banks)
                .map(|_| {
                    (0..m.cols)
                        .map(|_| encode_weight(rng.gen_range(-max..=max), b_w))
                        .collect()
                })
                .collect()
        })
        .collect()
}

impl Network {
    /// Builds the network with seeded random codes and performs the initial
    /// functional read.
    pub fn build(cfg: &SimConfig, topo: NetworkTopology) -> Result<Self> {
        let codes = random_codes(&topo, cfg.b_w, cfg.rng_seed)?;
        Self::build_with_codes(cfg, topo, &codes)
    }

    pub fn from_config(cfg: &SimConfig) -> Result<Self> {
        Self::build(cfg, NetworkTopology::from_config(cfg)?)
    }

    pub fn build_with_codes(cfg: &SimConfig, topo: NetworkTopology, codes: &Grid<WeightCode>) -> Result<Self> {
        cfg.validate()?;
        if codes.len() != topo.depth() {
            return Err(Error::Dimension {
                what: "weight layers",
                expected: topo.depth(),
                found: codes.len(),
            });
        }
        let mut layers = Vec::with_capacity(topo.depth());
        for (m, grid) in topo.maps().iter().zip(codes) {
            let mut array = BitCellArray::from_config(cfg, m.banks, m.cols)?;
            if grid.len() != m.banks {
                return Err(Error::Dimension {
                    what: "weight banks",
                    expected: m.banks,
                    found: grid.len(),
                });
            }
            for (b, row) in grid.iter().enumerate() {
                if row.len() != m.cols {
                    return Err(Error::Dimension {
                        what: "weight columns",
                        expected: m.cols,
                        found: row.len(),
                    });
                }
                for (c, &code) in row.iter().enumerate() {
                    array.write_weight(b, c, code)?;
                }
            }
            layers.push(Layer {
                array,
                units: vec![WeightUpdateUnit::new(cfg.leak_rate, cfg.v_ref, cfg.gain_error); m.banks * m.cols],
                inputs: vec![0.0; m.cols],
                neurons: vec![NeuronState::default(); m.banks],
                delta: vec![0.0; m.banks],
                last_dw: vec![0.0; m.banks * m.cols],
            });
        }
        let mut net = Self {
            cfg: cfg.clone(),
            sm: SignedMultiplier::from_config(cfg),
            softmax: SoftmaxStage::from_config(cfg),
            error_block: ErrorBlock::from_config(cfg),
            adc: SignedAdc::from_config(cfg),
            topo,
            layers,
            ledger: Ledger::new(),
            stage: Stage::Unloaded,
            clock: 0.0,
            output: Vec::new(),
            readout: None,
            iterations: 0,
        };
        net.load_weights()?;
        Ok(net)
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topo
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn reset_ledger(&mut self) {
        self.ledger = Ledger::new();
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    fn expect(&self, allowed: &[Stage], op: &str) -> Result<()> {
        if allowed.contains(&self.stage) {
            Ok(())
        } else {
            Err(Error::Protocol(format!("{op} not allowed in stage {:?}", self.stage)))
        }
    }

    fn record(&mut self, block: Block, phase: Phase, energy: f64, delay: f64, count: u64) -> Result<()> {
        self.ledger
            .record(LedgerEntry::new(block, phase, energy, delay).with_count(count))
    }

    /// FR of every column followed by SWC, sampling each weight onto its WU unit.
    pub fn load_weights(&mut self) -> Result<()> {
        self.expect(&[Stage::Unloaded, Stage::Ready], "functional read")?;
        let t = self.clock;
        let mut fr_energy = 0.0;
        let mut reads = 0u64;
        for layer in &mut self.layers {
            let cols = layer.array.cols();
            for b in 0..layer.array.banks() {
                for c in 0..cols {
                    let pair = layer.array.functional_read(b, c)?;
                    fr_energy += layer.array.fr_energy(b, c)?;
                    reads += 1;
                    layer.units[b * cols + c].sample_weight(swc_signed_weight(&pair), t)?;
                }
            }
        }
        let fr_delay = self.cfg.fr_delay();
        let swc_delay = self.cfg.delays.swc;
        self.record(Block::BitCellArray, Phase::FR, fr_energy, fr_delay, reads)?;
        self.record(Block::Swc, Phase::SWC, 0.0, swc_delay, reads)?;
        self.clock += fr_delay + swc_delay;
        self.stage = Stage::Ready;
        Ok(())
    }

    /// Analog weights currently held on the WU units.
    pub fn weights(&self) -> Grid<f64> {
        self.layers
            .iter()
            .map(|l| {
                let cols = l.array.cols();
                (0..l.array.banks())
                    .map(|b| (0..cols).map(|c| l.units[b * cols + c].weight_at(self.clock)).collect())
                    .collect()
            })
            .collect()
    }

    /// Samples arbitrary analog weights onto the WU units, bypassing the SRAM.
    pub fn set_weights(&mut self, w: &Grid<f64>) -> Result<()> {
        self.expect(&[Stage::Ready, Stage::Unloaded], "set_weights")?;
        if w.len() != self.layers.len() {
            return Err(Error::Dimension {
                what: "weight layers",
                expected: self.layers.len(),
                found: w.len(),
            });
        }
        let t = self.clock;
        for (layer, grid) in self.layers.iter_mut().zip(w) {
            let cols = layer.array.cols();
            if grid.len() != layer.array.banks() || grid.iter().any(|r| r.len() != cols) {
                return Err(Error::Dimension {
                    what: "weight grid",
                    expected: layer.array.banks() * cols,
                    found: grid.iter().map(Vec::len).sum(),
                });
            }
            for (b, row) in grid.iter().enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    layer.units[b * cols + c].sample_weight(crate::frontend::SignedWeightVoltage(v), t)?;
                }
            }
        }
        self.stage = Stage::Ready;
        Ok(())
    }

    /// Codes currently stored in SRAM.
    pub fn codes(&self) -> Result<Grid<WeightCode>> {
        self.layers
            .iter()
            .map(|l| {
                (0..l.array.banks())
                    .map(|b| (0..l.array.cols()).map(|c| l.array.stored_code(b, c)).collect())
                    .collect()
            })
            .collect()
    }

    /// Δw sampled on each WU unit in the last update phase.
    pub fn last_delta_w(&self) -> Grid<f64> {
        self.layers
            .iter()
            .map(|l| l.last_dw.chunks(l.array.cols()).map(<[f64]>::to_vec).collect())
            .collect()
    }

    /// Local gradients from the last backward pass, per layer.
    pub fn local_gradients(&self) -> Vec<Vec<f64>> {
        self.layers.iter().map(|l| l.delta.clone()).collect()
    }

    /// Activation potentials sampled in the last forward pass, per layer.
    pub fn potentials(&self) -> Vec<Vec<f64>> {
        self.layers
            .iter()
            .map(|l| l.neurons.iter().map(|n| n.sampled_h).collect())
            .collect()
    }

    pub fn output(&self) -> &[f64] {
        &self.output
    }

    fn propagate(&self, x: &[f64]) -> Result<Propagation> {
        if x.len() != self.topo.n_inputs() {
            return Err(Error::Dimension {
                what: "input length",
                expected: self.topo.n_inputs(),
                found: x.len(),
            });
        }
        let depth = self.layers.len();
        let mut a = x.to_vec();
        let mut inputs = Vec::with_capacity(depth);
        let mut neurons = Vec::with_capacity(depth);
        let mut mult_power = Vec::with_capacity(depth);
        for (k, layer) in self.layers.iter().enumerate() {
            if self.topo.bias() {
                a.push(BIAS_INPUT);
            }
            let cols = layer.array.cols();
            let mut power = 0.0;
            let mut states = Vec::with_capacity(layer.array.banks());
            let mut products = vec![0.0; cols];
            for b in 0..layer.array.banks() {
                for c in 0..cols {
                    let w = layer.units[b * cols + c].weight_at(self.clock);
                    let out = self.sm.run(SmRouting::FEEDFORWARD, a[c], w, 0.0, 1.0)?;
                    products[c] = out.value;
                    power += out.power;
                }
                let h = activation_potential(&products)?;
                states.push(if k + 1 < depth {
                    NeuronState::relu(h)
                } else {
                    NeuronState::output(h)
                });
            }
            let next: Vec<f64> = if k + 1 < depth {
                states.iter().map(|n| n.a).collect()
            } else {
                let h: Vec<f64> = states.iter().map(|n| n.h).collect();
                let y = match self.cfg.output_activation {
                    OutputActivation::Softmax => self.softmax.apply(&h),
                    OutputActivation::Linear => h,
                };
                for (n, &v) in states.iter_mut().zip(&y) {
                    n.a = v;
                }
                y
            };
            inputs.push(a);
            neurons.push(states);
            mult_power.push(power);
            a = next;
        }
        Ok(Propagation {
            inputs,
            neurons,
            y: a,
            mult_power,
        })
    }

    /// Output vector for `x` without touching the network state or the ledger.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.expect(
            &[Stage::Ready, Stage::Forwarded, Stage::ErrorEvaluated, Stage::BackPropagated],
            "predict",
        )?;
        Ok(self.propagate(x)?.y)
    }

    pub fn classify(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict(x)?))
    }

    pub fn accuracy(&self, data: &[Sample]) -> Result<f64> {
        if data.is_empty() {
            return Ok(0.0);
        }
        let mut hits = 0usize;
        for s in data {
            if self.classify(&s.x)? == s.label {
                hits += 1;
            }
        }
        Ok(hits as f64 / data.len() as f64)
    }

    /// S=01 for every layer; activation potentials are latched for the backward
    /// phase.
    pub fn forward_pass(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        self.expect(&[Stage::Ready, Stage::Forwarded], "forward pass")?;
        let p = self.propagate(x)?;
        let depth = self.layers.len();
        let d = self.cfg.delays.clone();
        for (k, ((inputs, states), power)) in p.inputs.into_iter().zip(p.neurons).zip(p.mult_power).enumerate() {
            let hidden = k + 1 < depth;
            let transitions = if hidden {
                states
                    .iter()
                    .zip(&self.layers[k].neurons)
                    .filter(|(n, old)| n.relu_gate != old.relu_gate)
                    .count()
            } else {
                0
            };
            let layer = &mut self.layers[k];
            let ops = (layer.array.banks() * layer.array.cols()) as u64;
            layer.inputs = inputs;
            layer.neurons = states;
            let banks = layer.array.banks() as u64;
            self.record(Block::Multiplier, Phase::FF, power * d.sm, d.sm, ops)?;
            if hidden {
                let e = transitions as f64 * self.cfg.energies.relu_transition;
                self.record(Block::Relu, Phase::FF, e, d.relu, banks)?;
                self.clock += d.sm + d.relu;
            } else {
                if self.cfg.output_activation == OutputActivation::Softmax {
                    self.record(Block::Softmax, Phase::FF, 0.0, d.softmax, banks)?;
                    self.clock += d.softmax;
                }
                self.clock += d.sm;
            }
        }
        self.output = p.y.clone();
        self.stage = Stage::Forwarded;
        Ok(p.y)
    }

    pub fn evaluate_error(&mut self, t: &[f64]) -> Result<ErrorReadout> {
        self.expect(&[Stage::Forwarded], "error evaluation")?;
        let r = self.error_block.evaluate(t, &self.output)?;
        let e = self.error_block.energy(r.v_e);
        self.record(Block::ErrorBlock, Phase::ERR, e, self.error_block.delay, 1)?;
        self.clock += self.error_block.delay;
        self.readout = Some(r.clone());
        self.stage = Stage::ErrorEvaluated;
        Ok(r)
    }

    /// Output δ from the output stage, then S=11 through every hidden layer.
    pub fn backward_pass(&mut self, t: &[f64]) -> Result<()> {
        self.expect(&[Stage::ErrorEvaluated], "backward pass")?;
        let depth = self.layers.len();
        let delta = output_local_gradient(t, &self.output, self.cfg.output_activation)?;
        self.layers[depth - 1].delta = delta;
        // The S=11 route carries a gain of η; the backprop block divides
        // it back out so the hidden δ is the plain gradient and Δw carries η once.
        let eta = if self.cfg.eta != 0.0 { self.cfg.eta } else { 1.0 };
        let sm_delay = self.cfg.delays.sm;
        for k in (0..depth - 1).rev() {
            let (lower, upper) = self.layers.split_at_mut(k + 1);
            let here = &mut lower[k];
            let above = &upper[0];
            let cols = above.array.cols();
            let mut power = 0.0;
            let mut terms = vec![0.0; above.array.banks()];
            let mut delta = Vec::with_capacity(here.neurons.len());
            for (j, n) in here.neurons.iter().enumerate() {
                for (kk, term) in terms.iter_mut().enumerate() {
                    let w = above.units[kk * cols + j].weight_at(self.clock);
                    let out = self.sm.run(SmRouting::BACKPROP, 0.0, w, above.delta[kk], eta)?;
                    *term = out.value / eta;
                    power += out.power;
                }
                delta.push(local_gradient_gate(n.sampled_h, current_sum(&terms)?));
            }
            here.delta = delta;
            let ops = (here.neurons.len() * above.array.banks()) as u64;
            self.ledger
                .record(LedgerEntry::new(Block::Multiplier, Phase::BP, power * sm_delay, sm_delay).with_count(ops))?;
            self.clock += sm_delay;
        }
        self.stage = Stage::BackPropagated;
        Ok(())
    }

    /// S=10: `Δw = η·δ_k·a_j` on every unit, then sample/latch/amplify.
    pub fn weight_update_phase(&mut self) -> Result<()> {
        self.expect(&[Stage::BackPropagated], "weight update")?;
        let eta = self.cfg.eta;
        let d = self.cfg.delays.clone();
        let t = self.clock + d.sm;
        let mut power = 0.0;
        let mut ops = 0u64;
        for layer in &mut self.layers {
            let cols = layer.array.cols();
            for b in 0..layer.array.banks() {
                for c in 0..cols {
                    let out = self.sm.run(SmRouting::WEIGHT_UPDATE, layer.inputs[c], 0.0, layer.delta[b], eta)?;
                    power += out.power;
                    let u = &mut layer.units[b * cols + c];
                    u.sample_delta(out.value, t)?;
                    u.commit(t + d.wu)?;
                    layer.last_dw[b * cols + c] = out.value;
                    ops += 1;
                }
            }
        }
        self.record(Block::Multiplier, Phase::WU, power * d.sm, d.sm, ops)?;
        self.record(Block::WeightUpdate, Phase::WU, 0.0, d.wu, ops)?;
        self.clock += d.sm + d.wu;
        self.iterations += 1;
        self.stage = Stage::Ready;
        Ok(())
    }

    /// One FF → ERR → BP → WU iteration.
    pub fn train_step(&mut self, x: &[f64], t: &[f64]) -> Result<ErrorReadout> {
        self.forward_pass(x)?;
        let r = self.evaluate_error(t)?;
        self.backward_pass(t)?;
        self.weight_update_phase()?;
        Ok(r)
    }

    /// Quantizes every analog weight into SRAM, then reloads through FR + SWC.
    pub fn write_back(&mut self) -> Result<()> {
        self.expect(&[Stage::Ready], "write-back")?;
        let w = self.weights();
        let mut conversions = 0u64;
        for (layer, grid) in self.layers.iter_mut().zip(&w) {
            conversions += self.adc.writeback(&mut layer.array, grid)? as u64;
        }
        let e = conversions as f64 * self.cfg.energies.adc_conversion;
        self.record(Block::Adc, Phase::ADC, e, self.cfg.delays.adc, conversions)?;
        self.clock += self.cfg.delays.adc;
        self.load_weights()
    }

    fn check_schema(&self, data: &[Sample]) -> Result<()> {
        for (i, s) in data.iter().enumerate() {
            if s.x.len() != self.topo.n_inputs() || s.t.len() != self.topo.n_outputs() {
                return Err(Error::Schema(format!(
                    "sample {i} has {} features and {} targets; network expects {} and {}",
                    s.x.len(),
                    s.t.len(),
                    self.topo.n_inputs(),
                    self.topo.n_outputs()
                )));
            }
        }
        Ok(())
    }

    /// Per-sample SGD with one seeded shuffle, early stopping on mean |V_E|, and
    /// ADC write-back at the end.
    pub fn train(&mut self, train: &[Sample], test: &[Sample], epochs: usize) -> Result<TrainReport> {
        if epochs == 0 {
            return Err(Error::Validation("epochs must be >= 1".into()));
        }
        if train.is_empty() {
            return Err(Error::Empty("training set"));
        }
        self.check_schema(train)?;
        self.check_schema(test)?;
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.rng_seed ^ 0x5eed_5eed);
        order.shuffle(&mut rng);

        let min_delta = self.cfg.min_delta();
        let mut best = f64::INFINITY;
        let mut stale = 0usize;
        let mut history = Vec::new();
        let mut stopped_early = false;
        for epoch in 1..=epochs {
            let before: Totals = self.ledger.totals();
            let mut sum_ve = 0.0;
            let mut sum_loss = 0.0;
            for &i in &order {
                let r = self.train_step(&train[i].x, &train[i].t)?;
                sum_ve += r.v_e.abs();
                sum_loss += r.per_output_errors.iter().map(|e| 0.5 * e * e).sum::<f64>();
            }
            let after = self.ledger.totals();
            let n = train.len() as f64;
            let rec = EpochRecord {
                epoch,
                mean_abs_ve: sum_ve / n,
                mean_loss: sum_loss / n,
                train_accuracy: self.accuracy(train)?,
                test_accuracy: self.accuracy(test)?,
                energy: after.energy - before.energy,
                delay: after.delay - before.delay,
            };
            log::debug!(
                "epoch {epoch}: mean |V_E| {:.6e} V, train acc {:.4}, test acc {:.4}",
                rec.mean_abs_ve,
                rec.train_accuracy,
                rec.test_accuracy
            );
            let mean = rec.mean_abs_ve;
            history.push(rec);
            if mean < best - min_delta {
                best = mean;
                stale = 0;
            } else {
                stale += 1;
                if stale >= self.cfg.patience {
                    stopped_early = epoch < epochs;
                    break;
                }
            }
        }
        let train_accuracy = self.accuracy(train)?;
        let test_accuracy = self.accuracy(test)?;
        self.write_back()?;
        Ok(TrainReport {
            epochs_run: history.len(),
            stopped_early,
            iterations: self.iterations,
            history,
            train_accuracy,
            test_accuracy,
            quantized_train_accuracy: self.accuracy(train)?,
            quantized_test_accuracy: self.accuracy(test)?,
        })
    }
}
