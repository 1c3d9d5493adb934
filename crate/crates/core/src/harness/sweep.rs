//! Parameter sweeps. Each returns a header (with units) and rows, written out
//! as `sweep.csv`.

use rayon::prelude::*;

use crate::adc::SignedAdc;
use crate::bca::{max_deviation_lsb, BitCellArray};
use crate::codec::{decode_weight, WeightCode};
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::harness::dataset::DatasetRecord;
use crate::harness::experiment::run_training;
use crate::multiplier::MultiplierModel;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let err = |e: String| Error::Validation(format!("csv: {e}"));
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(|e| err(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| err(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| err(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub const DEFAULT_A: [f64; 5] = [5.0, 10.0, 20.0, 40.0, 80.0];
pub const DEFAULT_ETA: [f64; 5] = [0.01, 0.03, 0.1, 0.3, 1.0];

pub fn default_alpha_nl() -> Vec<f64> {
    (0..=10).map(|i| i as f64 * 0.005).collect()
}

/// Worst-case multiplier error against `A`; when a dataset is given, also the
/// final accuracies of a non-ideal training run at each `A`.
pub fn sweep_a(
    cfg: &SimConfig,
    values: &[f64],
    data: Option<(&str, &[DatasetRecord])>,
    epochs: usize,
) -> Result<Table> {
    let mut t = Table::new(&["A", "worst_case_error_V", "closed_form_V"]);
    if data.is_some() {
        t.header.extend(["train_accuracy".to_string(), "test_accuracy".to_string()]);
    }
    let acc: Vec<Option<(f64, f64)>> = values
        .par_iter()
        .map(|&a| -> Result<Option<(f64, f64)>> {
            let Some((name, recs)) = data else { return Ok(None) };
            let c = SimConfig {
                reduction_factor: a,
                ideal: false,
                ..cfg.clone()
            };
            let r = run_training(&c, name, recs, epochs)?.report.training;
            Ok(Some((r.train_accuracy, r.test_accuracy)))
        })
        .collect::<Result<_>>()?;
    for (&a, acc) in values.iter().zip(acc) {
        let m = MultiplierModel::new(a, false);
        let err = (m.multiply(1.0, 1.0)? - 1.0).abs();
        let mut row = vec![a.to_string(), format!("{err:e}"), format!("{:e}", 1.0 / (2.0 * a))];
        if let Some((tr, te)) = acc {
            row.push(tr.to_string());
            row.push(te.to_string());
        }
        t.rows.push(row);
    }
    Ok(t)
}

/// Functional-read deviation from the ideal line against `alpha_nl`.
pub fn sweep_alpha_nl(cfg: &SimConfig, values: &[f64]) -> Table {
    let mut t = Table::new(&["alpha_nl", "max_deviation_LSB"]);
    for &a in values {
        t.rows.push(vec![a.to_string(), format!("{:e}", max_deviation_lsb(a, cfg.b_w))]);
    }
    t
}

pub fn sweep_eta(cfg: &SimConfig, values: &[f64], name: &str, recs: &[DatasetRecord], epochs: usize) -> Result<Table> {
    let mut t = Table::new(&["eta", "epochs_run", "final_mean_abs_ve_V", "train_accuracy", "test_accuracy"]);
    let rows: Vec<Vec<String>> = values
        .par_iter()
        .map(|&eta| -> Result<Vec<String>> {
            let c = SimConfig { eta, ..cfg.clone() };
            let r = run_training(&c, name, recs, epochs)?.report.training;
            let ve = r.history.last().map(|h| h.mean_abs_ve).unwrap_or(0.0);
            Ok(vec![
                eta.to_string(),
                r.epochs_run.to_string(),
                format!("{ve:e}"),
                r.train_accuracy.to_string(),
                r.test_accuracy.to_string(),
            ])
        })
        .collect::<Result<_>>()?;
    t.rows = rows;
    Ok(t)
}

/// Functional-read energy for every stored code.
pub fn sweep_fr_energy(cfg: &SimConfig) -> Result<Table> {
    let mut t = Table::new(&["code", "unsigned_w", "weight", "energy_J"]);
    let mut arr = BitCellArray::from_config(cfg, 1, 1)?;
    for code in WeightCode::all(cfg.b_w) {
        arr.write_weight(0, 0, code)?;
        t.rows.push(vec![
            code.to_string(),
            code.unsigned().to_string(),
            decode_weight(code).to_string(),
            format!("{:e}", arr.fr_energy(0, 0)?),
        ]);
    }
    Ok(t)
}

/// ADC staircase over `[−V_REF − V_res, V_REF + V_res]`.
pub fn sweep_adc(cfg: &SimConfig, points: usize) -> Table {
    let adc = SignedAdc::from_config(cfg);
    let mut t = Table::new(&["v_in_V", "code", "weight", "v_out_V"]);
    let lo = -cfg.v_ref - adc.v_res();
    let hi = cfg.v_ref + adc.v_res();
    let n = points.max(2);
    for i in 0..n {
        let v = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let c = adc.quantize(v);
        let w = decode_weight(c);
        t.rows.push(vec![
            format!("{v:.6}"),
            c.to_string(),
            w.to_string(),
            format!("{:.6}", w as f64 * adc.v_res()),
        ]);
    }
    t
}
