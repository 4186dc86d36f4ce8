//! Scenario files: the full description of one simulated execution,
//! deserialized from TOML.

use ebbflow_consensus::forkchoice::Expiry;
use ebbflow_consensus::types::{Round, ValidatorId};
use ebbflow_consensus::validator::{FcMode, ProtocolParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::AdversaryConfig;

/// A closed interval of rounds during which a validator is asleep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SleepInterval {
    pub validator: ValidatorId,
    pub from: Round,
    pub to: Round,
}

/// Permanent corruption of a validator starting at a round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corruption {
    pub validator: ValidatorId,
    pub round: Round,
}

fn default_eta() -> Expiry {
    Expiry::Infinite
}

fn default_kappa() -> u64 {
    1
}

fn default_tau() -> u64 {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Validator count.
    pub n: usize,
    /// Post-stabilization delay bound; a slot is `4 * delta` rounds.
    pub delta: u64,
    /// Global stabilization time, in rounds.
    #[serde(default)]
    pub gst: Round,
    /// Global awake time, in rounds: no honest validator sleeps afterwards.
    #[serde(default)]
    pub gat: Round,
    /// Head-vote expiry period, in slots, or `"inf"`.
    #[serde(default = "default_eta")]
    pub eta: Expiry,
    /// Sleepiness window, in slots.
    #[serde(default = "default_tau")]
    pub tau: u64,
    /// Confirmation depth of the available chain.
    #[serde(default = "default_kappa")]
    pub kappa: u64,
    /// Number of slots to simulate.
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub fc_mode: FcMode,
    #[serde(default)]
    pub proposer_offset: u64,
    #[serde(default)]
    pub sleep: Vec<SleepInterval>,
    #[serde(default)]
    pub corruptions: Vec<Corruption>,
    #[serde(default)]
    pub adversary: AdversaryConfig,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("{0}")]
    Invalid(String),
    #[error("scenario parse error: {0}")]
    Parse(String),
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario, ScenarioError> {
        let s: Scenario =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let problems = s.validate();
        if let Some(first) = problems.first() {
            return Err(ScenarioError::Invalid(format!(
                "{} ({} problem(s) total)",
                first,
                problems.len()
            )));
        }
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serialization is infallible")
    }

    pub fn params(&self) -> ProtocolParams {
        ProtocolParams {
            n: self.n,
            delta: self.delta,
            expiry: self.eta,
            kappa: self.kappa,
            fc_mode: self.fc_mode,
            proposer_offset: self.proposer_offset,
        }
    }

    pub fn slot_len(&self) -> u64 {
        4 * self.delta
    }

    /// First simulated round; slot 0 is genesis and is not played.
    pub fn first_round(&self) -> Round {
        self.slot_len()
    }

    /// Last simulated round, inclusive: one slot past the horizon's end so
    /// final-slot acknowledgments still reach the observer.
    pub fn last_round(&self) -> Round {
        self.slot_len() * (self.horizon + 1)
    }

    /// Every invariant violation in the description, not just the first.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n == 0 {
            out.push("n must be at least 1".into());
        }
        if self.delta == 0 {
            out.push("delta must be at least 1".into());
        }
        if self.horizon == 0 {
            out.push("horizon must be at least 1 slot".into());
        }
        for s in &self.sleep {
            if s.validator as usize >= self.n {
                out.push(format!("sleep interval names validator {} out of range", s.validator));
            }
            if s.from >= s.to {
                out.push(format!(
                    "sleep interval for validator {} is empty ({}..{})",
                    s.validator, s.from, s.to
                ));
            }
            if self.gat > 0 && s.to > self.gat {
                out.push(format!(
                    "validator {} sleeps until {} past gat {}",
                    s.validator, s.to, self.gat
                ));
            }
        }
        for c in &self.corruptions {
            if c.validator as usize >= self.n {
                out.push(format!("corruption names validator {} out of range", c.validator));
            }
        }
        if let AdversaryConfig::Partitioner { groups } = &self.adversary {
            let mut seen = std::collections::BTreeSet::new();
            for g in groups {
                for v in g {
                    if *v as usize >= self.n {
                        out.push(format!("partition group names validator {v} out of range"));
                    }
                    if !seen.insert(*v) {
                        out.push(format!("validator {v} appears in two partition groups"));
                    }
                }
            }
        }
        if matches!(self.adversary, AdversaryConfig::DoubleFinalizer { .. }) {
            let corrupt_from_start = self
                .corruptions
                .iter()
                .filter(|c| c.round <= self.first_round())
                .count();
            let q = ebbflow_consensus::ffg::quorum(self.n);
            if corrupt_from_start < q {
                out.push(format!(
                    "double-finalizer needs at least {q} validators corrupted from the start, got {corrupt_from_start}"
                ));
            }
        }
        out
    }
}
