//! Compliance checks on scenarios and executions.
//!
//! A schedule is sleepiness-compliant at slot `t` when the previous slot's
//! full participants outnumber this slot's joiners plus every validator that
//! participated somewhere in the trailing `tau` slots but missed the last
//! one:
//!
//! `|H_{t-1}| > |A_t ∪ (H_{t-tau..t-2} \ H_{t-1})|`
//!
//! The strengthened notion additionally requires visible head-vote
//! equivocators to stay below a third of the validator set.

use std::collections::{BTreeMap, BTreeSet};

use ebbflow_consensus::ffg::third;
use ebbflow_consensus::types::{BlockId, Message, Slot, ValidatorId};
use serde::Serialize;

use crate::scenario::Scenario;
use crate::schedule::Timeline;
use crate::trace::{Audience, MsgRecord, TraceRecord};

#[derive(Clone, Debug, Serialize)]
pub struct ComplianceReport {
    /// Post-stabilization slots violating the sleepiness inequality.
    pub tau_violations: Vec<Slot>,
    /// Validators that visibly cast two head votes for one slot.
    pub head_equivocators: BTreeSet<ValidatorId>,
    pub equivocator_bound: usize,
    pub compliant: bool,
}

/// Slots after stabilization whose participation schedule violates the
/// sleepiness inequality. A slot counts as after stabilization when it
/// starts at or past the stabilization round.
pub fn check_tau_sleepiness(s: &Scenario) -> Vec<Slot> {
    let timeline = Timeline::of(s);
    let mut out = Vec::new();
    for t in 1..=s.horizon {
        if s.slot_len() * t < s.gst {
            continue;
        }
        if !slot_is_sleepy_ok(s, &timeline, t) {
            out.push(t);
        }
    }
    out
}

fn slot_is_sleepy_ok(s: &Scenario, timeline: &Timeline, t: Slot) -> bool {
    let h_prev: BTreeSet<ValidatorId> =
        if t >= 1 { timeline.participants(t - 1) } else { BTreeSet::new() };
    let mut rhs: BTreeSet<ValidatorId> = timeline.joiners(t);
    let from = t.saturating_sub(s.tau).max(1);
    for u in from..t.saturating_sub(1) {
        for v in timeline.participants(u) {
            if !h_prev.contains(&v) {
                rhs.insert(v);
            }
        }
    }
    h_prev.len() > rhs.len()
}

/// Head-vote equivocators visible in a trace: distinct (voter, slot) pairs
/// mapped to two or more blocks among non-withheld sends.
pub fn head_equivocators(records: &[TraceRecord]) -> BTreeSet<ValidatorId> {
    let mut per: BTreeMap<(ValidatorId, Slot), BTreeSet<BlockId>> = BTreeMap::new();
    for rec in records {
        let TraceRecord::Send { audience, msg, .. } = rec else { continue };
        if *audience == Audience::None {
            continue;
        }
        if let MsgRecord::Full { msg: Message::HeadVote(hv) } = msg {
            per.entry((hv.voter, hv.slot)).or_default().insert(hv.block);
        }
    }
    per.into_iter()
        .filter(|(_, blocks)| blocks.len() >= 2)
        .map(|((v, _), _)| v)
        .collect()
}

/// Full strengthened-compliance verdict for an executed scenario.
pub fn check_compliance(s: &Scenario, records: &[TraceRecord]) -> ComplianceReport {
    let tau_violations = check_tau_sleepiness(s);
    let head_equivocators = head_equivocators(records);
    let equivocator_bound = third(s.n);
    let compliant = tau_violations.is_empty() && head_equivocators.len() < equivocator_bound;
    ComplianceReport { tau_violations, head_equivocators, equivocator_bound, compliant }
}
