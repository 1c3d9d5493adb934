//! Signed weight calculation and the capacitor-based weight-update unit.

use crate::bca::BitlinePair;
use crate::error::{Error, Result};

/// Sign bit `S_W` produced by the bitline comparator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightSign {
    /// `S_W = 0`, `V_BLB ≥ V_BL`.
    NonNegative,
    /// `S_W = 1`.
    Negative,
}

impl WeightSign {
    pub fn bit(self) -> u8 {
        match self {
            WeightSign::NonNegative => 0,
            WeightSign::Negative => 1,
        }
    }
}

/// Sign-carrying weight voltage at the output of the follower/inverter stage.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SignedWeightVoltage(pub f64);

impl SignedWeightVoltage {
    pub fn volts(self) -> f64 {
        self.0
    }
}

/// `V_BLB ≥ V_BL` ⇔ the BLB discharge is not larger than the BL discharge.
pub fn swc_sign(p: &BitlinePair) -> WeightSign {
    if p.dv_blb <= p.dv_bl {
        WeightSign::NonNegative
    } else {
        WeightSign::Negative
    }
}

/// The MUX picks the line holding `|w|` (BLB for S_W=0, BL for S_W=1); the
/// follower passes it, the inverter negates it.
pub fn swc_signed_weight(p: &BitlinePair) -> SignedWeightVoltage {
    match swc_sign(p) {
        WeightSign::NonNegative => SignedWeightVoltage(p.dv_blb),
        WeightSign::Negative => SignedWeightVoltage(-p.dv_bl),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Switch {
    /// φ_S, weight onto C_S.
    Sample,
    /// φ_B, weight change onto C_B.
    Delta,
    /// φ_L, divider midpoint onto C_L.
    Latch,
}

/// One weight-update unit: C_S holds the weight, C_B the pending change, C_L the
/// latched midpoint `V_U = (w + Δw)/2` which a ×2 stage turns into the new weight.
/// At most one of φ_S, φ_B, φ_L is closed at a time.
#[derive(Debug, Clone)]
pub struct WeightUpdateUnit {
    c_s: f64,
    c_b: f64,
    c_l: f64,
    closed: Option<Switch>,
    last_t: f64,
    weight_sampled: bool,
    delta_sampled: bool,
    leak_rate: f64,
    clip: f64,
    gain_error: f64,
}

impl WeightUpdateUnit {
    pub fn new(leak_rate: f64, clip: f64, gain_error: f64) -> Self {
        Self {
            c_s: 0.0,
            c_b: 0.0,
            c_l: 0.0,
            closed: None,
            last_t: 0.0,
            weight_sampled: false,
            delta_sampled: false,
            leak_rate,
            clip,
            gain_error,
        }
    }

    fn droop(&self, dt: f64) -> f64 {
        if self.leak_rate == 0.0 {
            1.0
        } else {
            (-self.leak_rate * dt).exp()
        }
    }

    /// Applies leakage up to `t`.
    fn settle(&mut self, t: f64) -> Result<()> {
        if t < self.last_t {
            return Err(Error::Protocol(format!(
                "time went backwards ({t} s after {} s)",
                self.last_t
            )));
        }
        let k = self.droop(t - self.last_t);
        self.c_s *= k;
        self.c_b *= k;
        self.c_l *= k;
        self.last_t = t;
        Ok(())
    }

    pub fn closed_switch(&self) -> Option<Switch> {
        self.closed
    }

    pub fn close(&mut self, sw: Switch) -> Result<()> {
        match self.closed {
            None => {
                self.closed = Some(sw);
                Ok(())
            }
            Some(other) if other == sw => Ok(()),
            Some(other) => Err(Error::Protocol(format!(
                "cannot close {sw:?} while {other:?} is closed"
            ))),
        }
    }

    pub fn open(&mut self, sw: Switch) {
        if self.closed == Some(sw) {
            self.closed = None;
        }
    }

    fn with_switch<T>(&mut self, sw: Switch, t: f64, f: impl FnOnce(&mut Self) -> T) -> Result<T> {
        self.close(sw)?;
        let out = self.settle(t).map(|_| f(self));
        self.open(sw);
        out
    }

    pub fn sample_weight(&mut self, w: SignedWeightVoltage, t: f64) -> Result<()> {
        self.with_switch(Switch::Sample, t, |u| {
            u.c_s = w.0;
            u.weight_sampled = true;
        })
    }

    pub fn sample_delta(&mut self, dw: f64, t: f64) -> Result<()> {
        self.with_switch(Switch::Delta, t, |u| {
            u.c_b = dw;
            u.delta_sampled = true;
        })
    }

    /// Latches `(C_S + C_B)/2`, amplifies by 2, clips, and re-samples the result
    /// onto C_S for the next iteration.
    pub fn commit(&mut self, t: f64) -> Result<SignedWeightVoltage> {
        if !self.weight_sampled || !self.delta_sampled {
            return Err(Error::Protocol(format!(
                "commit needs both samples (weight: {}, delta: {})",
                self.weight_sampled, self.delta_sampled
            )));
        }
        self.with_switch(Switch::Latch, t, |u| u.c_l = 0.5 * (u.c_s + u.c_b))?;
        let updated = (2.0 * (1.0 + self.gain_error) * self.c_l).clamp(-self.clip, self.clip);
        self.with_switch(Switch::Sample, t, |u| {
            u.c_s = updated;
            u.delta_sampled = false;
        })?;
        Ok(SignedWeightVoltage(updated))
    }

    /// Weight held on C_S as seen at time `t`.
    pub fn weight_at(&self, t: f64) -> f64 {
        self.c_s * self.droop((t - self.last_t).max(0.0))
    }

    pub fn delta(&self) -> f64 {
        self.c_b
    }

    pub fn latched(&self) -> f64 {
        self.c_l
    }
}
