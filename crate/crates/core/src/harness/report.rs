//! Run artifacts: `run.json`, `metrics.csv`, `ledger.csv`, `weights.txt`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::WeightCode;
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::ledger::{summarize, Block, DecisionSummary, Ledger, Phase, Totals};
use crate::network::{Grid, Network, NetworkTopology, TrainReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTotals {
    pub phase: Phase,
    pub energy: f64,
    pub delay: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerSection {
    pub entries: Ledger,
    pub totals: Totals,
    pub phases: Vec<PhaseTotals>,
    /// Blocks recorded at zero energy because they have no energy model.
    pub unmodeled: Vec<Block>,
    /// One training iteration (FF → ERR → BP → WU) per decision.
    pub per_training_decision: Option<DecisionSummary>,
    /// One inference (FR amortized away, FF only) per decision.
    pub per_inference_decision: Option<DecisionSummary>,
}

impl LedgerSection {
    pub fn new(ledger: &Ledger, iterations: u64, inference: Option<&Ledger>) -> Self {
        let phases = Phase::ALL
            .iter()
            .map(|&p| {
                let t = ledger.phase_totals(p);
                PhaseTotals {
                    phase: p,
                    energy: t.energy,
                    delay: t.delay,
                    count: t.count,
                }
            })
            .filter(|p| p.count > 0)
            .collect();
        let training: Totals = [Phase::FF, Phase::ERR, Phase::BP, Phase::WU]
            .iter()
            .map(|&p| ledger.phase_totals(p))
            .fold(Totals::default(), |a, t| Totals {
                energy: a.energy + t.energy,
                delay: a.delay + t.delay,
                count: a.count + t.count,
            });
        Self {
            entries: ledger.clone(),
            totals: ledger.totals(),
            phases,
            unmodeled: ledger.unmodeled(),
            per_training_decision: summarize(training, iterations).ok(),
            per_inference_decision: inference.and_then(|l| l.per_decision_summary(1).ok()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub seed: u64,
    /// Dataset path as given on the command line.
    pub dataset: String,
    pub epochs_requested: usize,
    pub config: SimConfig,
    pub topology: NetworkTopology,
    pub train_samples: usize,
    pub test_samples: usize,
    pub split_warnings: Vec<String>,
    pub training: TrainReport,
    pub ledger: LedgerSection,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Per-epoch table with a unit-bearing header.
    pub fn metrics_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Validation(format!("csv: {e}"));
        w.write_record([
            "epoch",
            "mean_abs_ve_V",
            "mean_loss_V2",
            "train_accuracy",
            "test_accuracy",
            "energy_J",
            "delay_s",
        ])
        .map_err(io)?;
        for r in &self.training.history {
            w.write_record([
                r.epoch.to_string(),
                format!("{:e}", r.mean_abs_ve),
                format!("{:e}", r.mean_loss),
                format!("{}", r.train_accuracy),
                format!("{}", r.test_accuracy),
                format!("{:e}", r.energy),
                format!("{:e}", r.delay),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Validation(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Text snapshot of the SRAM contents, one bank per line, MSB-first codes.
pub fn weights_to_text(topo: &NetworkTopology, codes: &Grid<WeightCode>) -> String {
    let mut s = String::from("# weight codes, 1's complement, MSB first; one line per bank\n");
    let sizes: Vec<String> = topo.layer_sizes().iter().map(usize::to_string).collect();
    let _ = writeln!(s, "layers {}", sizes.join(" "));
    let _ = writeln!(s, "bias {}", topo.bias());
    for (k, grid) in codes.iter().enumerate() {
        let m = topo.maps()[k];
        let _ = writeln!(s, "layer {} banks {} cols {}", k + 1, m.banks, m.cols);
        for row in grid {
            let line: Vec<String> = row.iter().map(WeightCode::to_string).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
    }
    s
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::ConfigParse { line, msg: msg.into() }
}

pub fn weights_from_text(text: &str) -> Result<(NetworkTopology, Grid<WeightCode>)> {
    let mut layers: Option<Vec<usize>> = None;
    let mut bias: Option<bool> = None;
    let mut grid: Grid<WeightCode> = Vec::new();
    let mut expect_cols = 0;
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        match it.next() {
            Some("layers") => {
                let v: std::result::Result<Vec<usize>, _> = it.map(str::parse).collect();
                layers = Some(v.map_err(|_| bad(n, "layer sizes must be integers"))?);
            }
            Some("bias") => {
                bias = Some(
                    it.next()
                        .and_then(|b| b.parse().ok())
                        .ok_or_else(|| bad(n, "bias must be true or false"))?,
                );
            }
            Some("layer") => {
                let f: Vec<&str> = it.collect();
                if f.len() != 5 || f[1] != "banks" || f[3] != "cols" {
                    return Err(bad(n, "expected `layer K banks N cols M`"));
                }
                expect_cols = f[4].parse().map_err(|_| bad(n, "cols must be an integer"))?;
                grid.push(Vec::new());
            }
            Some(_) => {
                let layer = grid.last_mut().ok_or_else(|| bad(n, "codes before any `layer` line"))?;
                let row: Vec<WeightCode> = line
                    .split_whitespace()
                    .map(|c| c.parse().map_err(|_| bad(n, format!("invalid code {c:?}"))))
                    .collect::<Result<_>>()?;
                if row.len() != expect_cols {
                    return Err(bad(n, format!("expected {expect_cols} codes, found {}", row.len())));
                }
                layer.push(row);
            }
            None => {}
        }
    }
    let layers = layers.ok_or_else(|| bad(0, "missing `layers` line"))?;
    let topo = NetworkTopology::new(&layers, bias.unwrap_or(false))?;
    for (k, g) in grid.iter().enumerate() {
        let banks = topo.maps().get(k).map(|m| m.banks).unwrap_or(0);
        if g.len() != banks {
            return Err(Error::Dimension {
                what: "banks in weight snapshot",
                expected: banks,
                found: g.len(),
            });
        }
    }
    Ok((topo, grid))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Ledger of a single inference on a fresh copy of `net`.
pub fn inference_ledger(net: &Network, x: &[f64]) -> Result<Ledger> {
    let mut probe = net.clone();
    probe.reset_ledger();
    probe.forward_pass(x)?;
    Ok(probe.ledger().clone())
}
