//! End-to-end training run on a dataset file.

use crate::config::SimConfig;
use crate::error::Result;
use crate::harness::dataset::{normalize_split, DatasetRecord, Split};
use crate::harness::report::{inference_ledger, LedgerSection, RunReport};
use crate::network::{Network, NetworkTopology};

pub struct Run {
    pub report: RunReport,
    pub network: Network,
    pub split: Split,
}

/// Splits with `cfg.rng_seed`, builds the network, trains for `epochs`.
pub fn run_training(cfg: &SimConfig, dataset: &str, records: &[DatasetRecord], epochs: usize) -> Result<Run> {
    cfg.validate()?;
    let split = normalize_split(records, cfg.rng_seed)?;
    let topo = NetworkTopology::from_config(cfg)?;
    let mut net = Network::build(cfg, topo.clone())?;
    let training = net.train(&split.train, &split.test, epochs)?;
    let probe = split.test.first().or(split.train.first()).map(|s| s.x.clone());
    let inference = match probe {
        Some(x) => Some(inference_ledger(&net, &x)?),
        None => None,
    };
    let ledger = LedgerSection::new(net.ledger(), net.iterations(), inference.as_ref());
    let report = RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.rng_seed,
        dataset: dataset.to_string(),
        epochs_requested: epochs,
        config: cfg.clone(),
        topology: topo,
        train_samples: split.train.len(),
        test_samples: split.test.len(),
        split_warnings: split.warnings.clone(),
        training,
        ledger,
    };
    Ok(Run {
        report,
        network: net,
        split,
    })
}
