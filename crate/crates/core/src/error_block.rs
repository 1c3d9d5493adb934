//! Output error formation, saturation-mode squaring, and the summed error
//! voltage `V_E`.

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};

/// Threshold voltages of the squaring pair (V). They cancel out of the current
/// and only decide which device conducts.
pub const V_TN: f64 = 0.4;
pub const V_TP: f64 = -0.4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputError {
    pub e: f64,
    /// NMOS gate voltage `V_Tn − e`.
    pub v_gn: f64,
    /// PMOS gate voltage `−|V_Tp| − e`.
    pub v_gp: f64,
}

pub fn per_output_error(t: f64, y: f64) -> OutputError {
    let e = t - y;
    OutputError {
        e,
        v_gn: V_TN - e,
        v_gp: -V_TP.abs() - e,
    }
}

/// Drain currents of the two squaring devices (A).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchCurrents {
    pub nmos: f64,
    pub pmos: f64,
}

impl BranchCurrents {
    pub fn total(&self) -> f64 {
        self.nmos + self.pmos
    }
}

/// Sources held at 0 V: the NMOS conducts when `V_Gn > V_Tn` (e < 0), the PMOS
/// when `V_Gp < −|V_Tp|` (e > 0). The threshold shift cancels exactly, so the
/// conducting device carries `k·e²/2`. The branch is picked from `e` itself so
/// errors below the rounding of `V_T ± e` still select a device.
pub fn branch_currents(err: &OutputError, k_mos: f64) -> BranchCurrents {
    let i = 0.5 * k_mos * err.e * err.e;
    BranchCurrents {
        nmos: if err.e < 0.0 { i } else { 0.0 },
        pmos: if err.e > 0.0 { i } else { 0.0 },
    }
}

pub fn square_current(e: f64, k_mos: f64) -> f64 {
    branch_currents(&per_output_error(e, 0.0), k_mos).total()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReadout {
    pub per_output_errors: Vec<f64>,
    /// Summed drain current (A).
    pub i_total: f64,
    /// `−I·R_1` (V).
    pub v_e: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBlock {
    pub k_mos: f64,
    pub r_1: f64,
    pub delay: f64,
}

impl ErrorBlock {
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            k_mos: cfg.k_mos,
            r_1: cfg.r_1,
            delay: cfg.delays.err,
        }
    }

    pub fn sum_squares_voltage(&self, errors: &[f64]) -> Result<ErrorReadout> {
        if errors.is_empty() {
            return Err(Error::Empty("error vector"));
        }
        let i_total = errors
            .iter()
            .fold(0.0, |acc, &e| acc + square_current(e, self.k_mos));
        Ok(ErrorReadout {
            per_output_errors: errors.to_vec(),
            i_total,
            v_e: -i_total * self.r_1,
        })
    }

    pub fn evaluate(&self, t: &[f64], y: &[f64]) -> Result<ErrorReadout> {
        if t.len() != y.len() {
            return Err(Error::Dimension {
                what: "target length",
                expected: y.len(),
                found: t.len(),
            });
        }
        let e: Vec<f64> = t.iter().zip(y).map(|(&t, &y)| per_output_error(t, y).e).collect();
        self.sum_squares_voltage(&e)
    }

    /// Dissipation in `R_1` over the block delay (J).
    pub fn energy(&self, v_e: f64) -> f64 {
        v_e * v_e / self.r_1 * self.delay
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block() -> ErrorBlock {
        ErrorBlock::from_config(&SimConfig::default())
    }

    #[test]
    fn error_examples() {
        assert!((per_output_error(1.0, 0.7).e - 0.3).abs() < 1e-15);
        assert_eq!(per_output_error(0.4, 0.4).e, 0.0);
        assert_eq!(per_output_error(0.0, 0.4).e, -0.4);
        let g = per_output_error(1.0, 0.7);
        assert!((g.v_gn - (V_TN - 0.3)).abs() < 1e-15);
        assert!((g.v_gp - (-V_TP.abs() - 0.3)).abs() < 1e-15);
    }

    #[test]
    fn exactly_one_branch_conducts() {
        for i in -50..=50 {
            let e = i as f64 / 50.0;
            let b = branch_currents(&per_output_error(e, 0.0), 1e-3);
            if e < 0.0 {
                assert!(b.nmos > 0.0 && b.pmos == 0.0);
            } else if e > 0.0 {
                assert!(b.pmos > 0.0 && b.nmos == 0.0);
            } else {
                assert_eq!(b.total(), 0.0);
            }
            assert_eq!(b.total(), 0.5e-3 * e * e);
            if e != 0.0 {
                let g = per_output_error(e, 0.0);
                assert_eq!(b.nmos > 0.0, g.v_gn > V_TN);
                assert_eq!(b.pmos > 0.0, g.v_gp < -V_TP.abs());
            }
        }
    }

    #[test]
    fn square_current_examples() {
        assert_eq!(square_current(0.0, 1e-3), 0.0);
        assert!((square_current(0.3, 1e-3) - 45e-6).abs() < 1e-15);
        assert!((square_current(-0.3, 1e-3) - 45e-6).abs() < 1e-15);
        for i in 0..100 {
            let e = i as f64 * 0.013;
            assert_eq!(square_current(e, 1e-3), square_current(-e, 1e-3));
        }
    }

    #[test]
    fn readout_examples() {
        let b = block();
        assert_eq!(b.sum_squares_voltage(&[0.0, 0.0, 0.0]).unwrap().v_e, 0.0);
        assert!((b.sum_squares_voltage(&[0.3]).unwrap().v_e + 0.045).abs() < 1e-15);
        assert!((b.sum_squares_voltage(&[0.3, -0.3]).unwrap().v_e + 0.090).abs() < 1e-15);
        assert!(b.sum_squares_voltage(&[]).is_err());
        assert!(b.evaluate(&[1.0], &[0.2, 0.1]).is_err());
    }

    #[test]
    fn proportional_to_loss() {
        let b = block();
        let e = [0.21, -0.5, 0.05];
        let r = b.sum_squares_voltage(&e).unwrap();
        let loss = 0.5 * e.iter().map(|v| v * v).sum::<f64>();
        assert!((r.v_e.abs() / (b.k_mos * b.r_1) - loss).abs() < 1e-15);
        assert!(r.v_e <= 0.0);
    }

    #[test]
    fn energy_over_block_delay() {
        let b = block();
        assert!((b.energy(-0.045) - 0.045 * 0.045 / 1e3 * 340e-9).abs() < 1e-25);
    }
}
