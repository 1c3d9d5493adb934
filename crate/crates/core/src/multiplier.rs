//! Four-quadrant analog multiplier, the S[1:0] operand routing of the SM unit,
//! and current-mode summation.

use serde::{Deserialize, Serialize};

use crate::config::{ErrorSign, GradientOperand, SimConfig};
use crate::error::{Error, Result};

/// Operating range of either multiplier input (V).
pub const INPUT_LIMIT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierModel {
    /// Reduction factor applied to the second operand before the triode pair.
    pub a: f64,
    pub k_i: f64,
    pub k_mos: f64,
    pub r_load: f64,
    pub ideal: bool,
    pub error_sign: ErrorSign,
}

impl MultiplierModel {
    pub fn new(a: f64, ideal: bool) -> Self {
        Self {
            a,
            k_i: 250.0,
            k_mos: 1e-3,
            r_load: 1e3,
            ideal,
            error_sign: ErrorSign::Product,
        }
    }

    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            a: cfg.reduction_factor,
            k_i: cfg.k_i,
            k_mos: cfg.k_mos,
            r_load: cfg.r_load,
            ideal: cfg.ideal,
            error_sign: cfg.mult_error_sign,
        }
    }

    fn check(v: f64) -> Result<()> {
        if v.is_nan() || v.abs() > INPUT_LIMIT {
            return Err(Error::InputRange {
                value: v,
                limit: INPUT_LIMIT,
            });
        }
        Ok(())
    }

    /// `v1` drives the gate overdrive, `v2` is attenuated by `A` onto the drain.
    /// The ideal multiplier is an exact product with no range limit.
    pub fn multiply(&self, v1: f64, v2: f64) -> Result<f64> {
        if self.ideal {
            return Ok(v1 * v2);
        }
        Self::check(v1)?;
        Self::check(v2)?;
        let s = match self.error_sign {
            ErrorSign::Product => (v1 * v2).signum(),
            ErrorSign::First => v1.signum(),
        };
        let s = if v1 == 0.0 || v2 == 0.0 { 0.0 } else { s };
        Ok(v1 * v2 - s * v2 * v2 / (2.0 * self.a))
    }

    /// Worst-case output error, reached at `|v1| = |v2| = 1`.
    pub fn worst_case_error(&self) -> f64 {
        if self.ideal {
            0.0
        } else {
            1.0 / (2.0 * self.a)
        }
    }

    /// Device dissipation of the triode pair (W).
    pub fn power(&self, v1: f64, v2: f64) -> f64 {
        let vds = v2 / self.a;
        self.k_mos * v1.abs() * vds * vds
    }
}

/// The S[1:0] control value of the SM unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SmRouting(u8);

impl SmRouting {
    pub const FEEDFORWARD: SmRouting = SmRouting(0b01);
    pub const WEIGHT_UPDATE: SmRouting = SmRouting(0b10);
    pub const BACKPROP: SmRouting = SmRouting(0b11);

    /// Accepts any 2-bit value; 00 is only rejected when routed.
    pub fn new(s: u8) -> Result<Self> {
        if s > 0b11 {
            return Err(Error::InvalidCode {
                bits: s as u16,
                width: 2,
            });
        }
        Ok(SmRouting(s))
    }

    pub fn bits(self) -> u8 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Destination {
    Activation,
    WeightUpdate,
    Backprop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Routed {
    pub operands: (f64, f64),
    pub gain: f64,
    pub destination: Destination,
}

/// Routing: 01 → (a, w) to the activation block, 10 → (δ, a) with gain
/// η to the weight-update unit, 11 → (δ, w) with gain η to the backprop block.
pub fn sm_route(s: SmRouting, a_in: f64, w: f64, delta: f64, eta: f64) -> Result<Routed> {
    match s.0 {
        0b01 => Ok(Routed {
            operands: (a_in, w),
            gain: 1.0,
            destination: Destination::Activation,
        }),
        0b10 => Ok(Routed {
            operands: (delta, a_in),
            gain: eta,
            destination: Destination::WeightUpdate,
        }),
        0b11 => Ok(Routed {
            operands: (delta, w),
            gain: eta,
            destination: Destination::Backprop,
        }),
        _ => Err(Error::ForbiddenState),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmOutput {
    pub value: f64,
    pub destination: Destination,
    /// Triode-pair dissipation at the routed operands (W).
    pub power: f64,
}

/// One SM unit: routes, multiplies, applies the output gain.
#[derive(Debug, Clone)]
pub struct SignedMultiplier {
    pub model: MultiplierModel,
    pub gradient_operand: GradientOperand,
}

impl SignedMultiplier {
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            model: MultiplierModel::from_config(cfg),
            gradient_operand: cfg.gradient_operand,
        }
    }

    /// Operands outside the supply rails are clamped by the input stage before the
    /// range-checked multiplier sees them.
    pub fn run(&self, s: SmRouting, a_in: f64, w: f64, delta: f64, eta: f64) -> Result<SmOutput> {
        let r = sm_route(s, a_in, w, delta, eta)?;
        let (mut v1, mut v2) = r.operands;
        if r.destination != Destination::Activation && self.gradient_operand == GradientOperand::Attenuated {
            std::mem::swap(&mut v1, &mut v2);
        }
        if !self.model.ideal {
            v1 = v1.clamp(-INPUT_LIMIT, INPUT_LIMIT);
            v2 = v2.clamp(-INPUT_LIMIT, INPUT_LIMIT);
        }
        Ok(SmOutput {
            value: r.gain * self.model.multiply(v1, v2)?,
            destination: r.destination,
            power: self.model.power(v1, v2),
        })
    }
}

/// Sum of currents on a shared node, accumulated in index order.
pub fn current_sum(terms: &[f64]) -> Result<f64> {
    if terms.is_empty() {
        return Err(Error::Empty("current sum"));
    }
    Ok(terms.iter().fold(0.0, |acc, t| acc + t))
}
