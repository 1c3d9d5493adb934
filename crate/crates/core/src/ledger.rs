//! Energy and delay accounting.
//!
//! Entries are aggregated per `(block, phase)`. Energy is summed over every
//! block instance that fired; delay is the critical-path time the phase
//! occupied, so parallel instances of a block contribute one delay.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    FR,
    SWC,
    FF,
    ERR,
    BP,
    WU,
    ADC,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Phase::FR,
        Phase::SWC,
        Phase::FF,
        Phase::ERR,
        Phase::BP,
        Phase::WU,
        Phase::ADC,
    ];
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    BitCellArray,
    Swc,
    Multiplier,
    Relu,
    Softmax,
    ErrorBlock,
    WeightUpdate,
    Adc,
}

impl Block {
    /// Blocks whose energy has a model; the rest are recorded at zero energy.
    pub fn energy_modeled(self) -> bool {
        !matches!(self, Block::Swc | Block::Softmax | Block::WeightUpdate)
    }

    pub fn name(self) -> &'static str {
        match self {
            Block::BitCellArray => "bca",
            Block::Swc => "swc",
            Block::Multiplier => "multiplier",
            Block::Relu => "relu",
            Block::Softmax => "softmax",
            Block::ErrorBlock => "error_block",
            Block::WeightUpdate => "weight_update",
            Block::Adc => "adc",
        }
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub block: Block,
    pub phase: Phase,
    /// J
    pub energy: f64,
    /// s
    pub delay: f64,
    pub count: u64,
}

impl LedgerEntry {
    pub fn new(block: Block, phase: Phase, energy: f64, delay: f64) -> Self {
        Self {
            block,
            phase,
            energy,
            delay,
            count: 1,
        }
    }

    pub fn with_count(mut self, count: u64) -> Self {
        self.count = count;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub energy: f64,
    pub delay: f64,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionSummary {
    /// J per decision
    pub energy: f64,
    /// s per decision
    pub delay: f64,
    /// J·s
    pub edp: f64,
    /// decisions/s
    pub throughput: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ledger {
    entries: BTreeMap<(Block, Phase), Totals>,
}

fn check(what: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::Ledger(format!("{what} must be finite and >= 0 (got {v})")));
    }
    Ok(())
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, e: LedgerEntry) -> Result<()> {
        check("energy", e.energy)?;
        check("delay", e.delay)?;
        let t = self.entries.entry((e.block, e.phase)).or_default();
        t.energy += e.energy;
        t.delay += e.delay;
        t.count += e.count;
        Ok(())
    }

    /// Folds `other` into `self` in sorted key order.
    pub fn merge(&mut self, other: &Ledger) {
        for (&(block, phase), t) in &other.entries {
            let mine = self.entries.entry((block, phase)).or_default();
            mine.energy += t.energy;
            mine.delay += t.delay;
            mine.count += t.count;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Aggregated entries sorted by `(block, phase)`.
    pub fn entries(&self) -> Vec<LedgerEntry> {
        self.entries
            .iter()
            .map(|(&(block, phase), t)| LedgerEntry {
                block,
                phase,
                energy: t.energy,
                delay: t.delay,
                count: t.count,
            })
            .collect()
    }

    pub fn get(&self, block: Block, phase: Phase) -> Option<Totals> {
        self.entries.get(&(block, phase)).copied()
    }

    fn sum<'a>(it: impl Iterator<Item = &'a Totals>) -> Totals {
        it.fold(Totals::default(), |acc, t| Totals {
            energy: acc.energy + t.energy,
            delay: acc.delay + t.delay,
            count: acc.count + t.count,
        })
    }

    pub fn totals(&self) -> Totals {
        Self::sum(self.entries.values())
    }

    pub fn phase_totals(&self, phase: Phase) -> Totals {
        Self::sum(self.entries.iter().filter(|(k, _)| k.1 == phase).map(|(_, t)| t))
    }

    pub fn block_totals(&self, block: Block) -> Totals {
        Self::sum(self.entries.iter().filter(|(k, _)| k.0 == block).map(|(_, t)| t))
    }

    /// Blocks present in the ledger whose energy is not modeled.
    pub fn unmodeled(&self) -> Vec<Block> {
        let mut v: Vec<Block> = self
            .entries
            .keys()
            .map(|k| k.0)
            .filter(|b| !b.energy_modeled())
            .collect();
        v.dedup();
        v
    }

    pub fn per_decision_summary(&self, n_decisions: u64) -> Result<DecisionSummary> {
        summarize(self.totals(), n_decisions)
    }

    /// `phase,block,count,energy_J,delay_s` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<LedgerEntry> = self.entries();
        rows.sort_by_key(|e| (e.phase, e.block));
        let mut out = String::from("phase,block,count,energy_J,delay_s\n");
        for e in rows {
            out.push_str(&format!(
                "{},{},{},{:e},{:e}\n",
                e.phase, e.block, e.count, e.energy, e.delay
            ));
        }
        out
    }
}

pub fn summarize(t: Totals, n_decisions: u64) -> Result<DecisionSummary> {
    if n_decisions == 0 {
        return Err(Error::Ledger("per-decision summary needs at least one decision".into()));
    }
    let n = n_decisions as f64;
    let energy = t.energy / n;
    let delay = t.delay / n;
    Ok(DecisionSummary {
        energy,
        delay,
        edp: energy * delay,
        throughput: 1.0 / delay,
    })
}

impl Serialize for Ledger {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.entries().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Ledger {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let entries = Vec::<LedgerEntry>::deserialize(d)?;
        let mut l = Ledger::new();
        for e in entries {
            l.record(e).map_err(serde::de::Error::custom)?;
        }
        Ok(l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn record_and_reject() {
        let mut l = Ledger::new();
        l.record(LedgerEntry::new(Block::BitCellArray, Phase::FR, 3e-15, 2.4e-9)).unwrap();
        l.record(LedgerEntry::new(Block::Swc, Phase::SWC, 0.0, 1e-9)).unwrap();
        assert!(l.record(LedgerEntry::new(Block::Swc, Phase::SWC, 0.0, -1e-9)).is_err());
        assert!(l.record(LedgerEntry::new(Block::Swc, Phase::SWC, f64::NAN, 0.0)).is_err());
        assert_eq!(l.get(Block::BitCellArray, Phase::FR).unwrap().delay, 2.4e-9);
        assert_eq!(l.unmodeled(), vec![Block::Swc]);
    }

    #[test]
    fn empty_is_zero() {
        let l = Ledger::new();
        assert_eq!(l.totals(), Totals::default());
        assert!(l.per_decision_summary(0).is_err());
    }

    #[test]
    fn table_identities() {
        let t = Totals {
            energy: 1.855e-12,
            delay: 680.6e-9,
            count: 1,
        };
        let s = summarize(t, 1).unwrap();
        assert!((s.throughput - 1.47e6).abs() / 1.47e6 < 0.005);
        assert!((s.edp - 1.26e-18).abs() / 1.26e-18 < 0.005);
        assert_eq!(s.edp, s.energy * s.delay);
        assert_eq!(s.throughput, 1.0 / s.delay);
    }

    #[test]
    fn single_entry_summary() {
        let mut l = Ledger::new();
        l.record(LedgerEntry::new(Block::ErrorBlock, Phase::ERR, 7e-16, 340e-9)).unwrap();
        let s = l.per_decision_summary(1).unwrap();
        assert_eq!(s.energy, 7e-16);
        assert_eq!(s.delay, 340e-9);
    }

    #[test]
    fn serde_round_trip() {
        let mut l = Ledger::new();
        l.record(LedgerEntry::new(Block::Adc, Phase::ADC, 5e-14, 1e-9).with_count(3)).unwrap();
        l.record(LedgerEntry::new(Block::Relu, Phase::FF, 1e-15, 3e-10)).unwrap();
        let s = serde_json::to_string(&l).unwrap();
        let back: Ledger = serde_json::from_str(&s).unwrap();
        assert_eq!(back, l);
        assert!(l.to_csv().starts_with("phase,block,count,energy_J,delay_s\n"));
    }

    fn entry() -> impl Strategy<Value = LedgerEntry> {
        (0usize..8, 0usize..7, 0.0f64..1e-12, 0.0f64..1e-6).prop_map(|(b, p, e, d)| {
            let blocks = [
                Block::BitCellArray,
                Block::Swc,
                Block::Multiplier,
                Block::Relu,
                Block::Softmax,
                Block::ErrorBlock,
                Block::WeightUpdate,
                Block::Adc,
            ];
            LedgerEntry::new(blocks[b], Phase::ALL[p], e, d)
        })
    }

    proptest! {
        #[test]
        fn totals_are_sums_of_entries(es in proptest::collection::vec(entry(), 0..40)) {
            let mut l = Ledger::new();
            for e in &es {
                l.record(*e).unwrap();
            }
            let parts = l.entries();
            let e: f64 = parts.iter().fold(0.0, |a, p| a + p.energy);
            let d: f64 = parts.iter().fold(0.0, |a, p| a + p.delay);
            prop_assert_eq!(l.totals().energy, e);
            prop_assert_eq!(l.totals().delay, d);
            prop_assert_eq!(l.totals().count, es.len() as u64);
        }

        #[test]
        fn merge_is_order_independent(
            a in proptest::collection::vec(entry(), 0..20),
            b in proptest::collection::vec(entry(), 0..20),
        ) {
            let build = |es: &[LedgerEntry]| {
                let mut l = Ledger::new();
                for e in es {
                    l.record(*e).unwrap();
                }
                l
            };
            let (la, lb) = (build(&a), build(&b));
            let mut x = Ledger::new();
            x.merge(&la);
            x.merge(&lb);
            let mut y = Ledger::new();
            y.merge(&lb);
            y.merge(&la);
            let (tx, ty) = (x.totals(), y.totals());
            prop_assert!((tx.energy - ty.energy).abs() <= 1e-12 * tx.energy.abs().max(1e-30));
            prop_assert_eq!(tx.count, ty.count);
        }

        #[test]
        fn identities_hold(e in 0.0f64..1e-9, d in 1e-12f64..1e-3, n in 1u64..1000) {
            let s = summarize(Totals { energy: e, delay: d, count: n }, n).unwrap();
            prop_assert_eq!(s.edp, s.energy * s.delay);
            prop_assert_eq!(s.throughput, 1.0 / s.delay);
        }
    }
}
