//! Simulation configuration.
//!
//! Config files are flat UTF-8 `key = value` lines. `#` starts a comment, blank
//! lines are ignored, keys match case-insensitively against [`KEYS`]. Absent keys
//! keep their defaults. `V_res` / `dV_lsb` are derived from `V_REF` and `B_W`
//! and cannot be set.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `alpha_nl` whose endpoint-calibrated functional-read deviation stays
/// within 0.67 LSB over the 16 codes of a 4-bit word (found by bisection; see
/// the bca tests for the scan).
pub const DEFAULT_ALPHA_NL: f64 = 0.02389;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Softmax,
    Linear,
}

impl FromStr for OutputActivation {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "softmax" => Ok(Self::Softmax),
            "linear" => Ok(Self::Linear),
            _ => Err(format!("expected softmax or linear, got {s:?}")),
        }
    }
}

/// Which operand's sign sets the polarity of the multiplier's quadratic error term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorSign {
    /// `sgn(v1·v2)`: the error always pulls the product toward zero.
    Product,
    /// `sgn(v1)`: the raw triode result, error independent of the sign of `v2`.
    First,
}

impl FromStr for ErrorSign {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "product" => Ok(Self::Product),
            "first" => Ok(Self::First),
            _ => Err(format!("expected product or first, got {s:?}")),
        }
    }
}

/// Operand placement in the signed multiplier for the gradient routes (S=10, S=11).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientOperand {
    /// Local gradient on the attenuated input `V_in2`.
    Attenuated,
    /// Local gradient on the overdrive input `V_in1`.
    Overdrive,
}

impl FromStr for GradientOperand {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "attenuated" => Ok(Self::Attenuated),
            "overdrive" => Ok(Self::Overdrive),
            _ => Err(format!("expected attenuated or overdrive, got {s:?}")),
        }
    }
}

/// Per-block delays in seconds. The functional-read delay is derived from `T_0`
/// and `B_W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayTable {
    pub swc: f64,
    pub sm: f64,
    pub relu: f64,
    pub softmax: f64,
    pub err: f64,
    pub wu: f64,
    pub adc: f64,
}

impl Default for DelayTable {
    fn default() -> Self {
        Self {
            swc: 1e-9,
            sm: 1e-9,
            relu: 300e-12,
            softmax: 1e-9,
            err: 340e-9,
            wu: 1e-9,
            adc: 1e-9,
        }
    }
}

/// Per-event energies in joules for blocks without a physical energy model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTable {
    /// Comparator switching energy per ReLU gate transition.
    pub relu_transition: f64,
    /// Flash ADC energy per conversion.
    pub adc_conversion: f64,
}

impl Default for EnergyTable {
    fn default() -> Self {
        Self {
            relu_transition: 1e-15,
            adc_conversion: 50e-15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Bitline precharge voltage (V).
    pub v_pre: f64,
    /// LSB word-line pulse width (s).
    pub t0: f64,
    /// Bits per stored weight.
    pub b_w: u8,
    /// ADC reference; full scale of a weight (V).
    pub v_ref: f64,
    /// Functional-read nonlinearity per code step.
    pub alpha_nl: f64,
    /// Use the exponential discharge model on the value path.
    pub fr_nonlinear: bool,
    /// Exponent of the functional-read energy model per code step.
    pub alpha_e: f64,
    /// Bitline capacitance (F).
    pub c_bl: f64,
    /// Multiplier input reduction factor `A`.
    pub reduction_factor: f64,
    /// Multiplier output current gain `K_i`.
    pub k_i: f64,
    /// Current-to-voltage conversion resistance (Ω).
    pub r_load: f64,
    /// Error-block summing resistor (Ω).
    pub r_1: f64,
    /// MOSFET transconductance parameter `k = k_n = k_p` (A/V²).
    pub k_mos: f64,
    /// Learning rate.
    pub eta: f64,
    /// Sampling-capacitor droop rate (1/s).
    pub leak_rate: f64,
    pub rng_seed: u64,
    /// Ideal multiplier (exact product, no operating-range limit).
    pub ideal: bool,
    pub mult_error_sign: ErrorSign,
    pub gradient_operand: GradientOperand,
    /// Fractional gain error of the ×2 stage of the weight-update unit.
    pub gain_error: f64,
    /// Constant 1 V input column appended to every layer.
    pub bias: bool,
    pub output_activation: OutputActivation,
    /// Scale applied to activation potentials when they enter the digital softmax.
    pub softmax_gain: f64,
    /// ADC/DAC bits around the digital softmax; 0 disables quantization.
    pub softmax_bits: u32,
    /// Input range of the softmax ADC (±V).
    pub softmax_range: f64,
    /// Layer sizes `[N_0, N_1, …, N_ξ]`.
    pub layers: Vec<usize>,
    pub epochs: usize,
    /// Early-stopping patience in epochs.
    pub patience: usize,
    /// Minimum decrease of mean |V_E| that counts as progress (V). Defaults to 1e-4·V_REF.
    pub min_delta: Option<f64>,
    pub delays: DelayTable,
    pub energies: EnergyTable,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            v_pre: 1.0,
            t0: 0.3e-9,
            b_w: 4,
            v_ref: 0.496,
            alpha_nl: DEFAULT_ALPHA_NL,
            fr_nonlinear: false,
            alpha_e: 0.2,
            c_bl: 50e-15,
            reduction_factor: 10.0,
            k_i: 250.0,
            r_load: 1e3,
            r_1: 1e3,
            k_mos: 1e-3,
            eta: 0.01,
            leak_rate: 0.0,
            rng_seed: 0,
            ideal: false,
            mult_error_sign: ErrorSign::Product,
            gradient_operand: GradientOperand::Attenuated,
            gain_error: 0.0,
            bias: true,
            output_activation: OutputActivation::Softmax,
            softmax_gain: 8.0,
            softmax_bits: 0,
            softmax_range: 4.0,
            layers: vec![4, 5, 3],
            epochs: 500,
            patience: 50,
            min_delta: None,
            delays: DelayTable::default(),
            energies: EnergyTable::default(),
        }
    }
}

/// Canonical config keys, with units.
pub const KEYS: &[(&str, &str)] = &[
    ("V_PRE", "V"),
    ("T_0", "s"),
    ("B_W", "bits"),
    ("V_REF", "V"),
    ("alpha_nl", "1/code"),
    ("fr_nonlinear", "bool"),
    ("alpha_E", "1/code"),
    ("C_BL", "F"),
    ("A", "-"),
    ("K_i", "-"),
    ("R_load", "ohm"),
    ("R_1", "ohm"),
    ("k_mos", "A/V^2"),
    ("eta", "-"),
    ("leak_rate", "1/s"),
    ("rng_seed", "int"),
    ("ideal", "bool"),
    ("mult_error_sign", "product|first"),
    ("gradient_operand", "attenuated|overdrive"),
    ("gain_error", "-"),
    ("bias", "bool"),
    ("output_activation", "softmax|linear"),
    ("softmax_gain", "-"),
    ("softmax_bits", "bits"),
    ("softmax_range", "V"),
    ("layers", "list"),
    ("epochs", "int"),
    ("patience", "epochs"),
    ("min_delta", "V"),
    ("delay_SWC", "s"),
    ("delay_SM", "s"),
    ("delay_ReLU", "s"),
    ("delay_softmax", "s"),
    ("delay_ERR", "s"),
    ("delay_WU", "s"),
    ("delay_ADC", "s"),
    ("energy_ReLU", "J"),
    ("energy_ADC", "J"),
];

fn parse_value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>().map_err(|e| Error::ConfigParse {
        line,
        msg: format!("{key}: cannot parse {raw:?}: {e}"),
    })
}

fn parse_bool(line: usize, key: &str, raw: &str) -> Result<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::ConfigParse {
            line,
            msg: format!("{key}: expected a boolean, got {raw:?}"),
        }),
    }
}

impl SimConfig {
    /// `ΔV_lsb = V_res = V_REF / (2^(B_W-1) - 1)`: code 0111 maps to `V_REF`.
    pub fn v_res(&self) -> f64 {
        self.v_ref / self.max_code() as f64
    }

    pub fn dv_lsb(&self) -> f64 {
        self.v_res()
    }

    pub fn max_code(&self) -> i32 {
        crate::codec::max_magnitude(self.b_w)
    }

    pub fn min_delta(&self) -> f64 {
        self.min_delta.unwrap_or(1e-4 * self.v_ref)
    }

    /// MSB word-line pulse width, `2^(B_W-1)·T_0`.
    pub fn fr_delay(&self) -> f64 {
        crate::bca::fr_delay(self.b_w, self.t0)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SimConfig::default();
        let mut seen: Vec<(&'static str, usize)> = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::ConfigParse {
                line,
                msg: format!("expected `key = value`, got {content:?}"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.eq_ignore_ascii_case("V_res") || key.eq_ignore_ascii_case("dV_lsb") {
                return Err(Error::ConfigParse {
                    line,
                    msg: format!("{key} is derived as V_REF/(2^(B_W-1)-1) and cannot be set"),
                });
            }
            let canonical = KEYS
                .iter()
                .map(|(k, _)| *k)
                .find(|k| k.eq_ignore_ascii_case(key))
                .ok_or_else(|| Error::ConfigParse {
                    line,
                    msg: format!("unknown key {key:?}"),
                })?;
            if let Some((_, first)) = seen.iter().find(|(k, _)| *k == canonical) {
                return Err(Error::ConfigParse {
                    line,
                    msg: format!("duplicate key {canonical} (first set on line {first})"),
                });
            }
            seen.push((canonical, line));
            cfg.set(line, canonical, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &'static str, v: &str) -> Result<()> {
        let bad = |msg: String| Error::ConfigParse { line, msg };
        match key {
            "V_PRE" => self.v_pre = parse_value(line, key, v)?,
            "T_0" => self.t0 = parse_value(line, key, v)?,
            "B_W" => self.b_w = parse_value(line, key, v)?,
            "V_REF" => self.v_ref = parse_value(line, key, v)?,
            "alpha_nl" => self.alpha_nl = parse_value(line, key, v)?,
            "fr_nonlinear" => self.fr_nonlinear = parse_bool(line, key, v)?,
            "alpha_E" => self.alpha_e = parse_value(line, key, v)?,
            "C_BL" => self.c_bl = parse_value(line, key, v)?,
            "A" => self.reduction_factor = parse_value(line, key, v)?,
            "K_i" => self.k_i = parse_value(line, key, v)?,
            "R_load" => self.r_load = parse_value(line, key, v)?,
            "R_1" => self.r_1 = parse_value(line, key, v)?,
            "k_mos" => self.k_mos = parse_value(line, key, v)?,
            "eta" => self.eta = parse_value(line, key, v)?,
            "leak_rate" => self.leak_rate = parse_value(line, key, v)?,
            "rng_seed" => self.rng_seed = parse_value(line, key, v)?,
            "ideal" => self.ideal = parse_bool(line, key, v)?,
            "mult_error_sign" => self.mult_error_sign = v.parse().map_err(bad)?,
            "gradient_operand" => self.gradient_operand = v.parse().map_err(bad)?,
            "gain_error" => self.gain_error = parse_value(line, key, v)?,
            "bias" => self.bias = parse_bool(line, key, v)?,
            "output_activation" => self.output_activation = v.parse().map_err(bad)?,
            "softmax_gain" => self.softmax_gain = parse_value(line, key, v)?,
            "softmax_bits" => self.softmax_bits = parse_value(line, key, v)?,
            "softmax_range" => self.softmax_range = parse_value(line, key, v)?,
            "layers" => {
                self.layers = v
                    .split(',')
                    .map(|s| parse_value::<usize>(line, key, s.trim()))
                    .collect::<Result<_>>()?
            }
            "epochs" => self.epochs = parse_value(line, key, v)?,
            "patience" => self.patience = parse_value(line, key, v)?,
            "min_delta" => self.min_delta = Some(parse_value(line, key, v)?),
            "delay_SWC" => self.delays.swc = parse_value(line, key, v)?,
            "delay_SM" => self.delays.sm = parse_value(line, key, v)?,
            "delay_ReLU" => self.delays.relu = parse_value(line, key, v)?,
            "delay_softmax" => self.delays.softmax = parse_value(line, key, v)?,
            "delay_ERR" => self.delays.err = parse_value(line, key, v)?,
            "delay_WU" => self.delays.wu = parse_value(line, key, v)?,
            "delay_ADC" => self.delays.adc = parse_value(line, key, v)?,
            "energy_ReLU" => self.energies.relu_transition = parse_value(line, key, v)?,
            "energy_ADC" => self.energies.adc_conversion = parse_value(line, key, v)?,
            _ => unreachable!("key table and setter out of sync: {key}"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::Validation(msg()))
            }
        }
        let finite_pos = [
            ("V_PRE", self.v_pre),
            ("T_0", self.t0),
            ("V_REF", self.v_ref),
            ("alpha_E", self.alpha_e),
            ("C_BL", self.c_bl),
            ("K_i", self.k_i),
            ("R_load", self.r_load),
            ("R_1", self.r_1),
            ("k_mos", self.k_mos),
            ("eta", self.eta),
            ("softmax_gain", self.softmax_gain),
            ("softmax_range", self.softmax_range),
        ];
        for (name, v) in finite_pos {
            check(v.is_finite() && v > 0.0, || {
                format!("{name} must be finite and > 0 (got {v})")
            })?;
        }
        let finite_nonneg = [
            ("alpha_nl", self.alpha_nl),
            ("leak_rate", self.leak_rate),
            ("delay_SWC", self.delays.swc),
            ("delay_SM", self.delays.sm),
            ("delay_ReLU", self.delays.relu),
            ("delay_softmax", self.delays.softmax),
            ("delay_ERR", self.delays.err),
            ("delay_WU", self.delays.wu),
            ("delay_ADC", self.delays.adc),
            ("energy_ReLU", self.energies.relu_transition),
            ("energy_ADC", self.energies.adc_conversion),
        ];
        for (name, v) in finite_nonneg {
            check(v.is_finite() && v >= 0.0, || {
                format!("{name} must be finite and >= 0 (got {v})")
            })?;
        }
        check(
            self.reduction_factor.is_finite() && self.reduction_factor >= 1.0,
            || format!("A must be >= 1 (got {})", self.reduction_factor),
        )?;
        check((2..=4).contains(&self.b_w), || {
            format!("B_W must be in 2..=4 (got {})", self.b_w)
        })?;
        check(self.gain_error.is_finite() && self.gain_error > -1.0, || {
            format!("gain_error must be > -1 (got {})", self.gain_error)
        })?;
        check(self.softmax_bits <= 24, || {
            format!("softmax_bits must be <= 24 (got {})", self.softmax_bits)
        })?;
        check(self.layers.len() >= 2, || {
            format!("layers needs at least 2 entries (got {:?})", self.layers)
        })?;
        check(self.layers.iter().all(|&n| n >= 1), || {
            format!("every layer needs at least one neuron (got {:?})", self.layers)
        })?;
        check(self.epochs >= 1, || "epochs must be >= 1".to_string())?;
        if let Some(d) = self.min_delta {
            check(d.is_finite() && d >= 0.0, || {
                format!("min_delta must be finite and >= 0 (got {d})")
            })?;
        }
        Ok(())
    }

    /// Renders the config in the file format, every key explicit.
    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("V_PRE", self.v_pre.to_string());
        put("T_0", self.t0.to_string());
        put("B_W", self.b_w.to_string());
        put("V_REF", self.v_ref.to_string());
        put("alpha_nl", self.alpha_nl.to_string());
        put("fr_nonlinear", self.fr_nonlinear.to_string());
        put("alpha_E", self.alpha_e.to_string());
        put("C_BL", self.c_bl.to_string());
        put("A", self.reduction_factor.to_string());
        put("K_i", self.k_i.to_string());
        put("R_load", self.r_load.to_string());
        put("R_1", self.r_1.to_string());
        put("k_mos", self.k_mos.to_string());
        put("eta", self.eta.to_string());
        put("leak_rate", self.leak_rate.to_string());
        put("rng_seed", self.rng_seed.to_string());
        put("ideal", self.ideal.to_string());
        put(
            "mult_error_sign",
            match self.mult_error_sign {
                ErrorSign::Product => "product",
                ErrorSign::First => "first",
            }
            .into(),
        );
        put(
            "gradient_operand",
            match self.gradient_operand {
                GradientOperand::Attenuated => "attenuated",
                GradientOperand::Overdrive => "overdrive",
            }
            .into(),
        );
        put("gain_error", self.gain_error.to_string());
        put("bias", self.bias.to_string());
        put(
            "output_activation",
            match self.output_activation {
                OutputActivation::Softmax => "softmax",
                OutputActivation::Linear => "linear",
            }
            .into(),
        );
        put("softmax_gain", self.softmax_gain.to_string());
        put("softmax_bits", self.softmax_bits.to_string());
        put("softmax_range", self.softmax_range.to_string());
        put(
            "layers",
            self.layers
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        put("epochs", self.epochs.to_string());
        put("patience", self.patience.to_string());
        put("min_delta", self.min_delta().to_string());
        put("delay_SWC", self.delays.swc.to_string());
        put("delay_SM", self.delays.sm.to_string());
        put("delay_ReLU", self.delays.relu.to_string());
        put("delay_softmax", self.delays.softmax.to_string());
        put("delay_ERR", self.delays.err.to_string());
        put("delay_WU", self.delays.wu.to_string());
        put("delay_ADC", self.delays.adc.to_string());
        put("energy_ReLU", self.energies.relu_transition.to_string());
        put("energy_ADC", self.energies.adc_conversion.to_string());
        s
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<SimConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SimConfig::parse(&text)
}
