//! Trace-based property checkers.
//!
//! Every checker is a pure function of an immutable trace (plus, for the
//! equivalence check, a scenario it executes itself): re-running a checker on
//! a stored trace produces the identical verdict. Checkers never consult the
//! simulator's in-memory state, so fixtures are replayable from disk.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use ebbflow_consensus::ffg::{self, quorum, third};
use ebbflow_consensus::slasher;
use ebbflow_consensus::types::{BlockId, Checkpoint, Message, Round, Slot, ValidatorId};
use ebbflow_consensus::validator::{FcMode, Status};
use ebbflow_consensus::view::View;
use ebbflow_simnet::compliance;
use ebbflow_simnet::scenario::Scenario;
use ebbflow_simnet::schedule::Timeline;
use ebbflow_simnet::trace::{message_pool, scenario_of, Audience, MsgRecord, TraceRecord};
use ebbflow_simnet::world;
use serde::Serialize;

/// The checkable properties exposed on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Property {
    Safety,
    Liveness,
    ReorgResilience,
    Ssf,
    Prefix,
    Accountability,
}

impl Property {
    pub const ALL: [Property; 6] = [
        Property::Safety,
        Property::Liveness,
        Property::ReorgResilience,
        Property::Ssf,
        Property::Prefix,
        Property::Accountability,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Property::Safety => "safety",
            Property::Liveness => "liveness",
            Property::ReorgResilience => "reorg-resilience",
            Property::Ssf => "ssf",
            Property::Prefix => "prefix",
            Property::Accountability => "accountability",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Property {
    type Err = String;

    fn from_str(s: &str) -> Result<Property, String> {
        Property::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Property::ALL.iter().map(|p| p.name()).collect();
                format!("unknown property {s:?}; expected one of {}", names.join(", "))
            })
    }
}

/// The outcome of one checker: hard violations fail the check, notes are
/// reported observations that do not.
#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub property: String,
    pub pass: bool,
    pub violations: Vec<String>,
    pub notes: Vec<String>,
}

impl Verdict {
    fn new(property: &str) -> Verdict {
        Verdict { property: property.into(), pass: true, violations: Vec::new(), notes: Vec::new() }
    }

    fn violation(&mut self, msg: String) {
        self.pass = false;
        self.violations.push(msg);
    }

    fn note(&mut self, msg: String) {
        self.notes.push(msg);
    }
}

pub fn run_check(property: Property, records: &[TraceRecord]) -> Verdict {
    match property {
        Property::Safety => check_safety(records),
        Property::Liveness => check_liveness(records),
        Property::ReorgResilience => check_reorg_resilience(records),
        Property::Ssf => check_ssf(records),
        Property::Prefix => check_prefix(records),
        Property::Accountability => check_accountability(records),
    }
}

/// The block tree every sent block contributes to, genesis included.
fn pool_view(records: &[TraceRecord]) -> View {
    let mut view = View::with_genesis();
    view.merge(message_pool(records));
    view
}

struct StateRec<'a> {
    round: Round,
    v: ValidatorId,
    status: Status,
    canonical: &'a BlockId,
    available: &'a BlockId,
    finalized: &'a BlockId,
}

fn states(records: &[TraceRecord]) -> impl Iterator<Item = StateRec<'_>> {
    records.iter().filter_map(|r| match r {
        TraceRecord::State { round, v, status, canonical, available, finalized, .. } => {
            Some(StateRec {
                round: *round,
                v: *v,
                status: *status,
                canonical,
                available,
                finalized,
            })
        }
        _ => None,
    })
}

fn block_slot(view: &View, id: &BlockId) -> Option<Slot> {
    view.block(id).map(|b| b.slot)
}

fn comparable(view: &View, a: &BlockId, b: &BlockId) -> Result<bool, String> {
    let ab = view.is_ancestor(a, b).map_err(|e| format!("{e:?}"))?;
    let ba = view.is_ancestor(b, a).map_err(|e| format!("{e:?}"))?;
    Ok(ab || ba)
}

/// Pairwise prefix-comparability of finalized chains across all validators
/// and rounds; incomparable available-chain tips are reported as notes, since
/// the available chain legitimately trades safety away under partition.
pub fn check_safety(records: &[TraceRecord]) -> Verdict {
    let mut verdict = Verdict::new("safety");
    let view = pool_view(records);
    let mut fin_tips: BTreeMap<BlockId, (ValidatorId, Round)> = BTreeMap::new();
    let mut ava_tips: BTreeMap<BlockId, (ValidatorId, Round)> = BTreeMap::new();
    for s in states(records) {
        fin_tips.entry(*s.finalized).or_insert((s.v, s.round));
        if s.status == Status::Active {
            ava_tips.entry(*s.available).or_insert((s.v, s.round));
        }
    }
    let fins: Vec<_> = fin_tips.iter().collect();
    for (i, (a, wa)) in fins.iter().enumerate() {
        for (b, wb) in fins.iter().skip(i + 1) {
            match comparable(&view, a, b) {
                Ok(true) => {}
                Ok(false) => verdict.violation(format!(
                    "finalized chains conflict: validator {} at round {} vs validator {} at round {} ({} vs {})",
                    wa.0, wa.1, wb.0, wb.1, a.to_hex(), b.to_hex()
                )),
                Err(e) => verdict.violation(format!("finalized tip unresolvable: {e}")),
            }
        }
    }
    let avas: Vec<_> = ava_tips.iter().collect();
    for (i, (a, wa)) in avas.iter().enumerate() {
        for (b, wb) in avas.iter().skip(i + 1) {
            if let Ok(false) = comparable(&view, a, b) {
                verdict.note(format!(
                    "available chains diverged: validator {} at round {} vs validator {} at round {}",
                    wa.0, wa.1, wb.0, wb.1
                ));
            }
        }
    }
    verdict
}

/// The nesting `chain_fin ≼ chain_ava ≼ chain_canonical` for every active
/// validator at every recorded round.
pub fn check_prefix(records: &[TraceRecord]) -> Verdict {
    let mut verdict = Verdict::new("prefix");
    let view = pool_view(records);
    for s in states(records) {
        if s.status != Status::Active {
            continue;
        }
        for (what, lo, hi) in [
            ("finalized within available", s.finalized, s.available),
            ("available within canonical", s.available, s.canonical),
        ] {
            match view.is_ancestor(lo, hi) {
                Ok(true) => {}
                Ok(false) => verdict.violation(format!(
                    "validator {} round {}: {} broken ({} not an ancestor of {})",
                    s.v,
                    s.round,
                    what,
                    lo.to_hex(),
                    hi.to_hex()
                )),
                Err(e) => verdict
                    .violation(format!("validator {} round {}: {:?}", s.v, s.round, e)),
            }
        }
    }
    verdict
}

/// Liveness after stabilization: the finalized chain lags at most one slot
/// behind pairs of honest-proposer quorum slots, and the canonical chain
/// grows with every honest-proposer slot.
pub fn check_liveness(records: &[TraceRecord]) -> Verdict {
    let mut verdict = Verdict::new("liveness");
    let Some(scenario) = scenario_of(records) else {
        verdict.violation("trace has no scenario header".into());
        return verdict;
    };
    let view = pool_view(records);
    let timeline = Timeline::of(scenario);
    let params = scenario.params();
    let sl = scenario.slot_len();
    let stab = scenario.gst.max(scenario.gat);
    let q = quorum(scenario.n);

    let mut at_round: BTreeMap<Round, Vec<StateRec<'_>>> = BTreeMap::new();
    for s in states(records) {
        at_round.entry(s.round).or_default().push(s);
    }

    for t in 1..=scenario.horizon {
        if sl * t < stab + sl {
            continue;
        }
        let p_t = timeline.participants(t);
        // canonical growth: an honest full-participant proposer's block is in
        // every participant's canonical chain by the merge phase of its slot
        if p_t.contains(&params.proposer_of(t)) {
            let merge = sl * t + 3 * scenario.delta;
            for s in at_round.get(&merge).into_iter().flatten() {
                if s.status != Status::Active || !p_t.contains(&s.v) {
                    continue;
                }
                let tip_slot = block_slot(&view, s.canonical).unwrap_or(0);
                if tip_slot < t {
                    verdict.violation(format!(
                        "growth: validator {} canonical tip is from slot {tip_slot} at the merge of slot {t}",
                        s.v
                    ));
                }
            }
        }
        // one-slot finality lag: two consecutive honest-proposer quorum slots
        // finalize the first of them within the next slot
        if t + 1 > scenario.horizon {
            continue;
        }
        let p_next = timeline.participants(t + 1);
        let honest_pair = p_t.contains(&params.proposer_of(t))
            && p_next.contains(&params.proposer_of(t + 1))
            && p_t.len() >= q
            && p_next.len() >= q;
        if !honest_pair {
            continue;
        }
        let deadline = sl * (t + 2);
        for s in at_round.get(&deadline).into_iter().flatten() {
            if s.status != Status::Active || !p_next.contains(&s.v) {
                continue;
            }
            let fin_slot = block_slot(&view, s.finalized).unwrap_or(0);
            if fin_slot < t {
                verdict.violation(format!(
                    "finality lag: validator {} finalized only slot {fin_slot} by round {deadline} (slot {t} was due)",
                    s.v
                ));
            }
        }
    }
    verdict
}

/// Reorg resilience after stabilization: honest proposals from slot `t` stay
/// canonical for every active validator from round `4Δt + Δ`, and
/// fast-confirmed blocks from round `4Δ(t+1) + Δ`.
pub fn check_reorg_resilience(records: &[TraceRecord]) -> Verdict {
    let mut verdict = Verdict::new("reorg-resilience");
    let Some(scenario) = scenario_of(records) else {
        verdict.violation("trace has no scenario header".into());
        return verdict;
    };
    let view = pool_view(records);
    let sl = scenario.slot_len();
    let d = scenario.delta;

    // (block, slot, protected-from round)
    let mut protected: Vec<(BlockId, Slot, Round)> = Vec::new();
    for rec in records {
        match rec {
            TraceRecord::Send {
                honest: true,
                msg: MsgRecord::ProposalSummary { block, slot, .. },
                ..
            } if sl * *slot >= scenario.gst => {
                protected.push((block.id, *slot, sl * *slot + d));
            }
            TraceRecord::FastConfirm { round, block, .. } if *round >= scenario.gst => {
                let t = round / sl;
                protected.push((*block, t, sl * (t + 1) + d));
            }
            _ => {}
        }
    }
    protected.sort();
    protected.dedup();

    for s in states(records) {
        if s.status != Status::Active {
            continue;
        }
        for (block, slot, from) in &protected {
            if s.round < *from {
                continue;
            }
            match view.is_ancestor(block, s.canonical) {
                Ok(true) => {}
                Ok(false) => verdict.violation(format!(
                    "slot-{slot} block {} left validator {}'s canonical chain at round {}",
                    block.to_hex(),
                    s.v,
                    s.round
                )),
                Err(e) => verdict
                    .violation(format!("validator {} round {}: {:?}", s.v, s.round, e)),
            }
        }
    }
    verdict
}

/// Replays the observer: every message the trace shows arriving at it, in
/// arrival order, with the round each checkpoint first ack- or
/// link-finalized.
pub fn observer_finality(records: &[TraceRecord], n: usize, delta: u64) -> BTreeMap<Checkpoint, Round> {
    let mut arrivals: BTreeMap<Round, Vec<Message>> = BTreeMap::new();
    for rec in records {
        let TraceRecord::Send { round, audience, msg, .. } = rec else { continue };
        let at = match audience {
            // withheld sends reach only the observer, immediately
            Audience::None => *round,
            _ => *round + delta,
        };
        arrivals.entry(at).or_default().push(msg.pool_message());
    }
    let mut view = View::with_genesis();
    let mut finalized_at = BTreeMap::new();
    for (r, msgs) in arrivals {
        view.merge(msgs);
        let js = ffg::compute_justification(&view, n);
        let acks: Vec<_> = view.acks().copied().collect();
        for c in ffg::compute_finalized_with_acks(&js, acks.iter(), n) {
            finalized_at.entry(c).or_insert(r);
        }
    }
    finalized_at
}

/// Single-slot finality: every honest proposal from a quorum-participation
/// slot after stabilization is acknowledgment-finalized in the observer's
/// reconstructed view by the next slot boundary.
pub fn check_ssf(records: &[TraceRecord]) -> Verdict {
    let mut verdict = Verdict::new("ssf");
    let Some(scenario) = scenario_of(records) else {
        verdict.violation("trace has no scenario header".into());
        return verdict;
    };
    let timeline = Timeline::of(scenario);
    let params = scenario.params();
    let sl = scenario.slot_len();
    let stab = scenario.gst.max(scenario.gat);
    let q = quorum(scenario.n);
    let finalized_at = observer_finality(records, scenario.n, scenario.delta);

    for t in 1..=scenario.horizon {
        if sl * t < stab + sl {
            continue;
        }
        let p_t = timeline.participants(t);
        if !p_t.contains(&params.proposer_of(t)) || p_t.len() < q {
            continue;
        }
        let deadline = sl * (t + 1);
        let hit = finalized_at.iter().find(|(c, _)| c.slot == t).map(|(_, r)| *r);
        match hit {
            Some(r) if r <= deadline => {}
            Some(r) => verdict.violation(format!(
                "slot {t} finalized only at round {r}, past the boundary {deadline}"
            )),
            None => verdict.violation(format!("slot {t} never finalized by the observer")),
        }
    }
    verdict
}

/// Accountable safety: if the trace pool finalizes two conflicting
/// checkpoints, culprit extraction must convict at least a third of the
/// validator set, all of them corrupted, with self-verifying evidence.
pub fn check_accountability(records: &[TraceRecord]) -> Verdict {
    let mut verdict = Verdict::new("accountability");
    let Some(scenario) = scenario_of(records) else {
        verdict.violation("trace has no scenario header".into());
        return verdict;
    };
    let timeline = Timeline::of(scenario);
    let pool = message_pool(records);
    let view = pool_view(records);
    let acks: Vec<_> = view.acks().copied().collect();
    match ffg::finalized_chain(&view, scenario.n, acks.iter()) {
        Ok(chain) => {
            verdict.note(format!(
                "no conflicting finalization; finalized chain has {} blocks",
                chain.len()
            ));
        }
        Err(ffg::FfgError::ConflictingFinalization { a, b }) => {
            verdict.note(format!(
                "conflicting finalization: slot {} vs slot {}",
                a.slot, b.slot
            ));
            match slasher::extract_culprits((a, b), &pool, scenario.n) {
                Ok(violations) => {
                    let offenders = slasher::offenders(&violations);
                    let bound = third(scenario.n);
                    if offenders.len() < bound {
                        verdict.violation(format!(
                            "only {} offenders extracted, {bound} required",
                            offenders.len()
                        ));
                    }
                    for o in &offenders {
                        if !timeline.is_corrupted(*o, scenario.last_round()) {
                            verdict.violation(format!("honest validator {o} accused"));
                        }
                    }
                    for v in &violations {
                        if !slasher::verify(v) {
                            verdict.violation(format!(
                                "evidence against validator {} fails its predicate",
                                v.offender
                            ));
                        }
                    }
                    verdict.note(format!("{} offenders convicted", offenders.len()));
                }
                Err(e) => verdict.violation(format!("culprit extraction failed: {e}")),
            }
        }
    }
    verdict
}

/// A trace record's round, for divergence reporting.
fn record_round(r: &TraceRecord) -> Round {
    match r {
        TraceRecord::Meta { .. } => 0,
        TraceRecord::Send { round, .. }
        | TraceRecord::State { round, .. }
        | TraceRecord::FastConfirm { round, .. }
        | TraceRecord::Drop { round, .. } => *round,
    }
}

/// Runs one scenario under both fork-choice modes and compares every
/// per-round honest output. On compliant schedules (GST = 0, sleepiness
/// holds) a divergence is a violation; otherwise it is only reported.
pub fn check_equivalence(scenario: &Scenario) -> Verdict {
    let mut verdict = Verdict::new("equivalence");
    let compliant = scenario.gst == 0 && compliance::check_tau_sleepiness(scenario).is_empty();
    if !compliant {
        verdict.note("scenario is not compliant; divergence is permitted".into());
    }
    let mut hfc = scenario.clone();
    hfc.fc_mode = FcMode::Hfc;
    let mut rlmd = scenario.clone();
    rlmd.fc_mode = FcMode::Rlmd;
    let out = world::run_batch(&[hfc, rlmd]);

    let body = |records: &[TraceRecord]| -> Vec<String> {
        records
            .iter()
            .filter(|r| !matches!(r, TraceRecord::Meta { .. }))
            .map(|r| serde_json::to_string(r).expect("trace records serialize"))
            .collect()
    };
    let a = body(&out[0].trace);
    let b = body(&out[1].trace);
    let divergence = a
        .iter()
        .zip(&b)
        .position(|(x, y)| x != y)
        .or_else(|| (a.len() != b.len()).then_some(a.len().min(b.len())));
    if let Some(i) = divergence {
        let round = out[0]
            .trace
            .iter()
            .filter(|r| !matches!(r, TraceRecord::Meta { .. }))
            .nth(i)
            .map(record_round)
            .unwrap_or(0);
        let msg = format!(
            "fork-choice modes diverge at record {i} (round {round}): {} vs {}",
            a.get(i).map(String::as_str).unwrap_or("<missing>"),
            b.get(i).map(String::as_str).unwrap_or("<missing>")
        );
        if compliant {
            verdict.violation(msg);
        } else {
            verdict.note(msg);
        }
    } else {
        verdict.note(format!("{} records identical under both modes", a.len()));
    }
    verdict
}

/// The slashing scan over a trace's message pool, as a verdict: offenses
/// found means the trace violates the no-slashing property.
pub fn check_slashing(records: &[TraceRecord]) -> (Verdict, BTreeSet<slasher::Violation>) {
    let mut verdict = Verdict::new("slash-scan");
    let pool = message_pool(records);
    let violations = slasher::scan(pool.iter());
    for v in &violations {
        verdict.violation(format!("{:?} by validator {}", v.kind, v.offender));
    }
    if violations.is_empty() {
        verdict.note("no slashable offenses in the trace".into());
    }
    (verdict, violations)
}
