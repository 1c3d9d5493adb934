//! Signed flash ADC: quantizes analog weights back to 1's-complement codes for
//! SRAM write-back.

use crate::bca::BitCellArray;
use crate::codec::{max_magnitude, ones_complement, WeightCode};
use crate::config::SimConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedAdc {
    pub v_ref: f64,
    pub n_bits: u8,
}

/// One conversion with the encoder enables exposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conversion {
    pub code: WeightCode,
    pub magnitude: u32,
    pub positive_enabled: bool,
    pub negative_enabled: bool,
}

/// Interval `[from, next from)` of the transfer staircase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferStep {
    /// Lower threshold; `-inf` for the first step.
    pub from: f64,
    pub code: WeightCode,
}

impl SignedAdc {
    pub fn new(v_ref: f64, n_bits: u8) -> Self {
        Self { v_ref, n_bits }
    }

    pub fn from_config(cfg: &SimConfig) -> Self {
        Self::new(cfg.v_ref, cfg.b_w)
    }

    pub fn max_code(&self) -> u32 {
        max_magnitude(self.n_bits) as u32
    }

    pub fn v_res(&self) -> f64 {
        self.v_ref / self.max_code() as f64
    }

    /// Thermometer ladder: comparator `m` fires when `x ≥ (m − ½)·V_res`.
    fn ladder(&self, x: f64) -> u32 {
        let v_res = self.v_res();
        (1..=self.max_code())
            .take_while(|&m| x >= (m as f64 - 0.5) * v_res)
            .count() as u32
    }

    pub fn quantize_detailed(&self, v: f64) -> Conversion {
        let negative = v < -0.5 * self.v_res();
        let magnitude = if negative { self.ladder(-v) } else { self.ladder(v) };
        let natural = WeightCode::from_bits(magnitude as u8, self.n_bits)
            .expect("ladder output fits the code width");
        Conversion {
            code: if negative { ones_complement(natural) } else { natural },
            magnitude,
            positive_enabled: !negative,
            negative_enabled: negative,
        }
    }

    pub fn quantize(&self, v: f64) -> WeightCode {
        self.quantize_detailed(v).code
    }

    /// Ideal staircase: the `2·(2^(B−1) − 1)` ladder thresholds and the code held
    /// on each interval between them. Which side owns a threshold itself follows
    /// [`SignedAdc::quantize`]: positive thresholds belong to the upper interval,
    /// negative ones to the lower.
    pub fn transfer_curve(&self) -> Vec<TransferStep> {
        let v_res = self.v_res();
        let n = self.max_code() as i32;
        let mut thresholds: Vec<f64> = (1..=n)
            .flat_map(|m| {
                let t = (m as f64 - 0.5) * v_res;
                [-t, t]
            })
            .collect();
        thresholds.sort_by(f64::total_cmp);
        let inside = |i: usize| match (i.checked_sub(1).map(|j| thresholds[j]), thresholds.get(i)) {
            (None, Some(&hi)) => hi - 0.5 * v_res,
            (Some(lo), Some(&hi)) => 0.5 * (lo + hi),
            (Some(lo), None) => lo + 0.5 * v_res,
            (None, None) => 0.0,
        };
        let mut steps = Vec::with_capacity(thresholds.len() + 1);
        for i in 0..=thresholds.len() {
            steps.push(TransferStep {
                from: if i == 0 { f64::NEG_INFINITY } else { thresholds[i - 1] },
                code: self.quantize(inside(i)),
            });
        }
        steps
    }

    /// Quantizes `weights[bank][col]` into the array.
    pub fn writeback(&self, array: &mut BitCellArray, weights: &[Vec<f64>]) -> Result<usize> {
        if weights.len() != array.banks() {
            return Err(Error::Dimension {
                what: "weight banks",
                expected: array.banks(),
                found: weights.len(),
            });
        }
        let mut conversions = 0;
        for (bank, row) in weights.iter().enumerate() {
            if row.len() != array.cols() {
                return Err(Error::Dimension {
                    what: "weight columns",
                    expected: array.cols(),
                    found: row.len(),
                });
            }
            for (col, &w) in row.iter().enumerate() {
                array.write_weight(bank, col, self.quantize(w))?;
                conversions += 1;
            }
        }
        Ok(conversions)
    }
}
