//! Banked SRAM bit-cell array with multi-row functional read.
//!
//! Each bank stores the weights of one output neuron, one column per input.
//! A weight occupies the last `B_W` rows of its column; bit `b_i` sits in the row
//! driven by a word-line pulse of width `2^i·T_0`. A functional read pulses all
//! weight rows at once and leaves a discharge on BL proportional to the
//! complement value `w̄` and on BLB proportional to `w`.
//!
//! Two discharge models are provided. The linear one is exact in the
//! short-pulse regime. The exponential one, `V(1 - e^{-αx})` calibrated to the
//! same full-scale discharge, injects the droop of a real RC bitline and is
//! always used for energy.

use crate::codec::WeightCode;
use crate::config::SimConfig;
use crate::error::{Error, Result};

/// Rows per column when the caller does not ask for more.
pub const DEFAULT_ROWS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitlinePair {
    /// Discharge on BL (V), follows `w̄`.
    pub dv_bl: f64,
    /// Discharge on BLB (V), follows `w`.
    pub dv_blb: f64,
}

/// Electrical parameters of a functional read.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadModel {
    pub v_pre: f64,
    pub t0: f64,
    pub dv_lsb: f64,
    pub alpha_nl: f64,
    pub nonlinear: bool,
    pub c_bl: f64,
    pub alpha_e: f64,
}

impl ReadModel {
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            v_pre: cfg.v_pre,
            t0: cfg.t0,
            dv_lsb: cfg.dv_lsb(),
            alpha_nl: cfg.alpha_nl,
            nonlinear: cfg.fr_nonlinear,
            c_bl: cfg.c_bl,
            alpha_e: cfg.alpha_e,
        }
    }

    /// Discharge for an effective pulse-weighted count `x` on a `b_w`-bit word.
    pub fn discharge(&self, x: f64, b_w: u8) -> f64 {
        if self.nonlinear {
            exp_discharge(x, full_scale_code(b_w), self.alpha_nl) * self.dv_lsb
        } else {
            self.dv_lsb * x
        }
    }

    /// `E(w) = C_BL·V_PRE²·[(1 - e^{-α_E·w}) + (1 - e^{-α_E·w̄})]`.
    pub fn energy(&self, w: f64, w_bar: f64) -> f64 {
        let swing = (1.0 - (-self.alpha_e * w).exp()) + (1.0 - (-self.alpha_e * w_bar).exp());
        self.c_bl * self.v_pre * self.v_pre * swing
    }
}

/// `2^B - 1`, the largest unsigned value on a `b_w`-bit word.
pub fn full_scale_code(b_w: u8) -> f64 {
    ((1u32 << b_w) - 1) as f64
}

/// Exponential discharge in LSB units, endpoint-calibrated so that
/// `full_scale` maps to itself. `alpha = 0` is the linear limit.
pub fn exp_discharge(x: f64, full_scale: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return x;
    }
    full_scale * (-(-alpha * x).exp_m1()) / (-(-alpha * full_scale).exp_m1())
}

/// Worst deviation of the endpoint-calibrated exponential discharge from the
/// straight line through its endpoints, in LSB, over all codes of a `b_w` word.
pub fn max_deviation_lsb(alpha: f64, b_w: u8) -> f64 {
    let full = full_scale_code(b_w);
    (0..=full as u32)
        .map(|x| (exp_discharge(x as f64, full, alpha) - x as f64).abs())
        .fold(0.0, f64::max)
}

/// Read latency, set by the MSB word-line pulse `2^(B_W-1)·T_0`.
pub fn fr_delay(b_w: u8, t0: f64) -> f64 {
    (1u64 << (b_w - 1)) as f64 * t0
}

#[derive(Debug, Clone)]
pub struct BitCellArray {
    n_bank: usize,
    n_col: usize,
    n_row: usize,
    b_w: u8,
    /// `[bank][col][row]`, `None` until written.
    cells: Vec<Option<bool>>,
    model: ReadModel,
}

impl BitCellArray {
    pub fn new(n_bank: usize, n_col: usize, n_row: usize, b_w: u8, model: ReadModel) -> Result<Self> {
        if n_bank == 0 || n_col == 0 {
            return Err(Error::Empty("bit-cell array"));
        }
        if n_row < b_w as usize {
            return Err(Error::Dimension {
                what: "rows per column (must hold B_W weight bits)",
                expected: b_w as usize,
                found: n_row,
            });
        }
        Ok(Self {
            n_bank,
            n_col,
            n_row,
            b_w,
            cells: vec![None; n_bank * n_col * n_row],
            model,
        })
    }

    pub fn from_config(cfg: &SimConfig, n_bank: usize, n_col: usize) -> Result<Self> {
        Self::new(
            n_bank,
            n_col,
            DEFAULT_ROWS.max(cfg.b_w as usize),
            cfg.b_w,
            ReadModel::from_config(cfg),
        )
    }

    pub fn banks(&self) -> usize {
        self.n_bank
    }

    pub fn cols(&self) -> usize {
        self.n_col
    }

    pub fn rows(&self) -> usize {
        self.n_row
    }

    pub fn bits_per_weight(&self) -> u8 {
        self.b_w
    }

    pub fn model(&self) -> &ReadModel {
        &self.model
    }

    fn column_base(&self, bank: usize, col: usize) -> Result<usize> {
        if bank >= self.n_bank {
            return Err(Error::Index {
                what: "bank",
                index: bank,
                len: self.n_bank,
            });
        }
        if col >= self.n_col {
            return Err(Error::Index {
                what: "column",
                index: col,
                len: self.n_col,
            });
        }
        Ok((bank * self.n_col + col) * self.n_row)
    }

    /// Row holding bit `i` of a weight.
    fn weight_row(&self, i: u8) -> usize {
        self.n_row - self.b_w as usize + i as usize
    }

    pub fn write_weight(&mut self, bank: usize, col: usize, code: WeightCode) -> Result<()> {
        if code.width() != self.b_w {
            return Err(Error::Dimension {
                what: "weight code width",
                expected: self.b_w as usize,
                found: code.width() as usize,
            });
        }
        let base = self.column_base(bank, col)?;
        for i in 0..self.b_w {
            let row = self.weight_row(i);
            self.cells[base + row] = Some(code.bit(i));
        }
        Ok(())
    }

    fn weight_bits(&self, bank: usize, col: usize) -> Result<Vec<bool>> {
        let base = self.column_base(bank, col)?;
        (0..self.b_w)
            .map(|i| self.cells[base + self.weight_row(i)].ok_or(Error::Uninitialized { bank, col }))
            .collect()
    }

    pub fn stored_code(&self, bank: usize, col: usize) -> Result<WeightCode> {
        let bits = self.weight_bits(bank, col)?;
        let raw = bits
            .iter()
            .enumerate()
            .fold(0u8, |acc, (i, &b)| acc | ((b as u8) << i));
        WeightCode::from_bits(raw, self.b_w)
    }

    /// Pulse-weighted sums `(w, w̄)`: every weight row conducts for `2^i·T_0`.
    fn pulse_sums(&self, bank: usize, col: usize) -> Result<(f64, f64)> {
        let bits = self.weight_bits(bank, col)?;
        let mut w = 0.0;
        let mut w_bar = 0.0;
        for (i, &b) in bits.iter().enumerate() {
            let pulse = (1u32 << i) as f64;
            if b {
                w += pulse;
            } else {
                w_bar += pulse;
            }
        }
        Ok((w, w_bar))
    }

    pub fn functional_read(&self, bank: usize, col: usize) -> Result<BitlinePair> {
        let (w, w_bar) = self.pulse_sums(bank, col)?;
        Ok(BitlinePair {
            dv_bl: self.model.discharge(w_bar, self.b_w),
            dv_blb: self.model.discharge(w, self.b_w),
        })
    }

    pub fn fr_energy(&self, bank: usize, col: usize) -> Result<f64> {
        let (w, w_bar) = self.pulse_sums(bank, col)?;
        Ok(self.model.energy(w, w_bar))
    }

    pub fn fr_delay(&self) -> f64 {
        fr_delay(self.b_w, self.model.t0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{encode_weight, ones_complement};
    use crate::config::DEFAULT_ALPHA_NL;

    fn array(nonlinear: bool) -> BitCellArray {
        let cfg = SimConfig {
            fr_nonlinear: nonlinear,
            ..SimConfig::default()
        };
        BitCellArray::from_config(&cfg, 2, 3).unwrap()
    }

    fn lsb() -> f64 {
        SimConfig::default().dv_lsb()
    }

    #[test]
    fn read_of_five() {
        let mut a = array(false);
        a.write_weight(0, 1, "0101".parse().unwrap()).unwrap();
        let p = a.functional_read(0, 1).unwrap();
        assert_eq!(p.dv_blb, 5.0 * lsb());
        assert_eq!(p.dv_bl, 10.0 * lsb());
    }

    #[test]
    fn read_of_extremes() {
        let mut a = array(false);
        a.write_weight(1, 2, "0000".parse().unwrap()).unwrap();
        let p = a.functional_read(1, 2).unwrap();
        assert_eq!((p.dv_blb, p.dv_bl), (0.0, 15.0 * lsb()));
        a.write_weight(1, 2, "1111".parse().unwrap()).unwrap();
        let p = a.functional_read(1, 2).unwrap();
        assert_eq!((p.dv_blb, p.dv_bl), (15.0 * lsb(), 0.0));
    }

    #[test]
    fn write_errors() {
        let mut a = array(false);
        let c = encode_weight(3, 4).unwrap();
        assert!(matches!(
            a.write_weight(2, 0, c),
            Err(Error::Index { what: "bank", .. })
        ));
        assert!(matches!(
            a.write_weight(0, 3, c),
            Err(Error::Index { what: "column", .. })
        ));
        assert!(a.write_weight(0, 0, encode_weight(3, 3).unwrap()).is_err());
    }

    #[test]
    fn overwrite_is_idempotent() {
        let mut once = array(false);
        let mut twice = array(false);
        let c = encode_weight(-6, 4).unwrap();
        once.write_weight(0, 0, c).unwrap();
        twice.write_weight(0, 0, c).unwrap();
        twice.write_weight(0, 0, c).unwrap();
        assert_eq!(once.cells, twice.cells);
        assert_eq!(twice.stored_code(0, 0).unwrap(), c);
    }

    #[test]
    fn unwritten_cells_are_errors() {
        let a = array(false);
        assert!(matches!(
            a.functional_read(0, 0),
            Err(Error::Uninitialized { bank: 0, col: 0 })
        ));
        assert!(a.fr_energy(1, 1).is_err());
    }

    #[test]
    fn weights_live_in_last_rows() {
        let mut a = array(false);
        a.write_weight(0, 0, "1001".parse().unwrap()).unwrap();
        let n = a.rows();
        let col = &a.cells[..n];
        assert!(col[..n - 4].iter().all(Option::is_none));
        // LSB in the T_0 row, MSB in the 8·T_0 row.
        assert_eq!(&col[n - 4..], &[Some(true), Some(false), Some(false), Some(true)]);
    }

    #[test]
    fn linear_read_is_exactly_linear() {
        let mut a = array(false);
        for c in WeightCode::all(4) {
            a.write_weight(0, 0, c).unwrap();
            let p = a.functional_read(0, 0).unwrap();
            assert_eq!(p.dv_blb, lsb() * c.unsigned() as f64);
            assert_eq!(p.dv_bl, lsb() * (15 - c.unsigned()) as f64);
        }
    }

    #[test]
    fn complement_swaps_bitlines() {
        for nonlinear in [false, true] {
            let mut a = array(nonlinear);
            for c in WeightCode::all(4) {
                a.write_weight(0, 0, c).unwrap();
                a.write_weight(0, 1, ones_complement(c)).unwrap();
                let p = a.functional_read(0, 0).unwrap();
                let q = a.functional_read(0, 1).unwrap();
                assert_eq!((p.dv_bl, p.dv_blb), (q.dv_blb, q.dv_bl));
            }
        }
    }

    /// Brute-force scan for the largest alpha meeting the 0.67 LSB bound,
    /// evaluating the deviation directly from the exponential law.
    #[test]
    fn default_alpha_is_largest_within_bound() {
        let deviation = |alpha: f64| -> f64 {
            let g = |x: f64| 1.0 - (-alpha * x).exp();
            let slope = g(15.0) / 15.0;
            (0..16)
                .map(|x| (g(x as f64) - x as f64 * slope).abs() / slope)
                .fold(0.0, f64::max)
        };
        let (mut lo, mut hi) = (1e-6, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if deviation(mid) <= 0.67 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - 0.023897).abs() < 1e-5, "scan found {lo}");
        assert!(DEFAULT_ALPHA_NL <= lo && lo - DEFAULT_ALPHA_NL < 1e-5);
        assert!(deviation(DEFAULT_ALPHA_NL) <= 0.67);
        assert!((max_deviation_lsb(DEFAULT_ALPHA_NL, 4) - deviation(DEFAULT_ALPHA_NL)).abs() < 1e-12);
        assert_eq!(max_deviation_lsb(0.0, 4), 0.0);
    }

    #[test]
    fn energy_symmetry_and_extremes() {
        let mut a = array(false);
        let mut energies = Vec::new();
        for c in WeightCode::all(4) {
            a.write_weight(0, 0, c).unwrap();
            energies.push(a.fr_energy(0, 0).unwrap());
        }
        for w in 0..16 {
            assert_eq!(energies[w], energies[15 - w]);
            assert!(energies[w] > 0.0);
        }
        let min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(energies[0], min);
        assert_eq!(energies[15], min);
        let argmax = (0..16).max_by(|&i, &j| energies[i].total_cmp(&energies[j])).unwrap();
        assert!(argmax == 7 || argmax == 8);
    }

    #[test]
    fn delays() {
        assert!((fr_delay(4, 0.3e-9) - 2.4e-9).abs() < 1e-21);
        assert!((fr_delay(1, 0.3e-9) - 0.3e-9).abs() < 1e-21);
        assert!((fr_delay(8, 0.3e-9) - 38.4e-9).abs() < 1e-20);
        assert!((array(false).fr_delay() - 2.4e-9).abs() < 1e-21);
    }
}
