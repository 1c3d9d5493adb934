//! Behavioral simulator of an SRAM compute-in-memory accelerator that trains a
//! multilayer perceptron in the analog domain.

pub mod activation;
pub mod adc;
pub mod bca;
pub mod codec;
pub mod config;
pub mod error;
pub mod error_block;
pub mod frontend;
pub mod ledger;
pub mod harness;
pub mod multiplier;
pub mod network;

pub use codec::{decode_weight, encode_weight, ones_complement, WeightCode};
pub use config::{load_config, SimConfig};
pub use error::{Error, Result};
pub use network::{Network, NetworkTopology, Sample, TrainReport};
