//! Slashing detection: equivocation, surround voting, acknowledgment
//! surround, head-vote equivocation, and forensic culprit extraction from
//! conflicting finalizations.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::ffg::{self, JustificationState};
use crate::types::{Acknowledgment, Checkpoint, FfgVote, Message, Slot, ValidatorId};
use crate::view::View;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ViolationKind {
    E1,
    E2,
    E3,
    HeadEquivocation,
}

/// A detected offense: the kind, the offender, and the message pair proving
/// it. The pair always satisfies the kind's predicate, re-checkable with the
/// `check_*` functions.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub kind: ViolationKind,
    pub offender: ValidatorId,
    pub evidence: (Message, Message),
}

/// E1, equivocation: two distinct FFG votes by one voter with equal target
/// slots.
pub fn check_e1(a: &FfgVote, b: &FfgVote) -> bool {
    a != b && a.voter == b.voter && a.target.slot == b.target.slot
}

/// E2, surround voting: one vote's (source, target) slot interval strictly
/// contains the other's.
pub fn check_e2(a: &FfgVote, b: &FfgVote) -> bool {
    let surrounds = |outer: &FfgVote, inner: &FfgVote| {
        outer.source.slot < inner.source.slot && inner.target.slot < outer.target.slot
    };
    a != b && a.voter == b.voter && (surrounds(a, b) || surrounds(b, a))
}

/// E3, acknowledgment surround: an FFG vote whose slot interval strictly
/// contains the slot of a checkpoint the same validator acknowledged.
pub fn check_e3(vote: &FfgVote, ack: &Acknowledgment) -> bool {
    vote.voter == ack.voter
        && vote.source.slot < ack.checkpoint.slot
        && ack.checkpoint.slot < vote.target.slot
}

/// All violations derivable from message pairs in the pool, deduplicated by
/// (kind, offender, evidence pair).
pub fn scan<'a, I>(pool: I) -> BTreeSet<Violation>
where
    I: IntoIterator<Item = &'a Message>,
{
    let mut ffg: BTreeMap<ValidatorId, Vec<FfgVote>> = BTreeMap::new();
    let mut acks: BTreeMap<ValidatorId, Vec<Acknowledgment>> = BTreeMap::new();
    let mut heads: BTreeMap<(ValidatorId, Slot), BTreeSet<crate::types::HeadVote>> = BTreeMap::new();
    for m in pool {
        match m {
            Message::FfgVote(v) => {
                let entry = ffg.entry(v.voter).or_default();
                if !entry.contains(v) {
                    entry.push(*v);
                }
            }
            Message::Ack(a) => {
                let entry = acks.entry(a.voter).or_default();
                if !entry.contains(a) {
                    entry.push(*a);
                }
            }
            Message::HeadVote(h) => {
                heads.entry((h.voter, h.slot)).or_default().insert(*h);
            }
            _ => {}
        }
    }

    let mut out = BTreeSet::new();
    for (voter, votes) in &ffg {
        for i in 0..votes.len() {
            for j in (i + 1)..votes.len() {
                let (a, b) = order_pair(votes[i], votes[j]);
                if check_e1(&a, &b) {
                    out.insert(Violation {
                        kind: ViolationKind::E1,
                        offender: *voter,
                        evidence: (Message::FfgVote(a), Message::FfgVote(b)),
                    });
                }
                if check_e2(&a, &b) {
                    out.insert(Violation {
                        kind: ViolationKind::E2,
                        offender: *voter,
                        evidence: (Message::FfgVote(a), Message::FfgVote(b)),
                    });
                }
            }
        }
        for vote in votes {
            for ack in acks.get(voter).into_iter().flatten() {
                if check_e3(vote, ack) {
                    out.insert(Violation {
                        kind: ViolationKind::E3,
                        offender: *voter,
                        evidence: (Message::FfgVote(*vote), Message::Ack(*ack)),
                    });
                }
            }
        }
    }
    for ((voter, _), votes) in &heads {
        if votes.len() >= 2 {
            let votes: Vec<_> = votes.iter().collect();
            for i in 0..votes.len() {
                for j in (i + 1)..votes.len() {
                    out.insert(Violation {
                        kind: ViolationKind::HeadEquivocation,
                        offender: *voter,
                        evidence: (Message::HeadVote(*votes[i]), Message::HeadVote(*votes[j])),
                    });
                }
            }
        }
    }
    out
}

fn order_pair(a: FfgVote, b: FfgVote) -> (FfgVote, FfgVote) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ForensicsError {
    #[error("insufficient evidence: {0}")]
    InsufficientEvidence(&'static str),
}

/// Reconstructs both justification chains behind two conflicting finalized
/// checkpoints and returns the provably-misbehaving validators, at least
/// `ceil(n/3)` of them, each with predicate-verified evidence.
///
/// Routes, tried in order:
///  - a doubly-justified slot yields equivocation (E1) offenders;
///  - otherwise the surrounding link pair yields surround-vote (E2)
///    offenders when the earlier checkpoint is link-finalized;
///  - otherwise its acknowledgers yield acknowledgment-surround (E3)
///    offenders.
pub fn extract_culprits(
    conflict: (Checkpoint, Checkpoint),
    pool: &[Message],
    n: usize,
) -> Result<BTreeSet<Violation>, ForensicsError> {
    let mut view = View::with_genesis();
    view.merge(pool.iter().cloned());
    let js = ffg::compute_justification(&view, n);
    let acks: Vec<Acknowledgment> = view.acks().copied().collect();
    let finalized = ffg::compute_finalized_with_acks(&js, acks.iter(), n);

    let (mut c, mut c_prime) = conflict;
    if !finalized.contains(&c) || !finalized.contains(&c_prime) {
        return Err(ForensicsError::InsufficientEvidence("pool does not finalize both checkpoints"));
    }

    // Route 1: double justification at some slot.
    if !js.double_justified_slots.is_empty() {
        let out = e1_culprits(&js, pool);
        if !out.is_empty() {
            return Ok(out);
        }
        return Err(ForensicsError::InsufficientEvidence("double justification without vote evidence"));
    }

    // Without double justification each slot justifies at most one
    // checkpoint, so the two chains are slot-disjoint above their shared
    // prefix. Order so that c carries the smaller terminal slot.
    if c.slot > c_prime.slot {
        std::mem::swap(&mut c, &mut c_prime);
    }
    let chain_prime = justification_chain(&js, c_prime);
    let t_k = c.slot;
    // minimal j with t_k < t'_j; chain_prime[0] is genesis
    let j = (1..chain_prime.len())
        .find(|&i| chain_prime[i].slot > t_k)
        .ok_or(ForensicsError::InsufficientEvidence("no link beyond the earlier finalized slot"))?;
    let surrounding = find_link(&js, &chain_prime[j - 1], &chain_prime[j])
        .ok_or(ForensicsError::InsufficientEvidence("missing surrounding link"))?;

    // Route 2: earlier checkpoint finalized by slot-adjacent link.
    if let Some(fin_link) = js
        .links
        .iter()
        .find(|l| l.source == c && l.target.slot == c.slot + 1)
    {
        let mut out = BTreeSet::new();
        for voter in fin_link.voters.intersection(&surrounding.voters) {
            let inner = FfgVote { source: fin_link.source, target: fin_link.target, voter: *voter };
            let outer = FfgVote { source: surrounding.source, target: surrounding.target, voter: *voter };
            debug_assert!(check_e2(&inner, &outer));
            out.insert(Violation {
                kind: ViolationKind::E2,
                offender: *voter,
                evidence: (Message::FfgVote(inner), Message::FfgVote(outer)),
            });
        }
        return Ok(out);
    }

    // Route 3: earlier checkpoint finalized by supermajority acknowledgment.
    let ackers: BTreeMap<ValidatorId, Acknowledgment> = acks
        .iter()
        .filter(|a| a.checkpoint == c)
        .map(|a| (a.voter, *a))
        .collect();
    let mut out = BTreeSet::new();
    for (voter, ack) in &ackers {
        if surrounding.voters.contains(voter) {
            let vote = FfgVote { source: surrounding.source, target: surrounding.target, voter: *voter };
            debug_assert!(check_e3(&vote, ack));
            out.insert(Violation {
                kind: ViolationKind::E3,
                offender: *voter,
                evidence: (Message::FfgVote(vote), Message::Ack(*ack)),
            });
        }
    }
    if out.is_empty() {
        return Err(ForensicsError::InsufficientEvidence("no finalizing link or acknowledgment quorum"));
    }
    Ok(out)
}

/// Offenders behind doubly-justified slots: the intersections of the voter
/// sets of link pairs sharing a target slot.
fn e1_culprits(js: &JustificationState, pool: &[Message]) -> BTreeSet<Violation> {
    let _ = pool;
    let mut out = BTreeSet::new();
    for slot in &js.double_justified_slots {
        let links: Vec<_> = js.links.iter().filter(|l| l.target.slot == *slot).collect();
        for i in 0..links.len() {
            for j in (i + 1)..links.len() {
                if links[i].target == links[j].target {
                    continue;
                }
                for voter in links[i].voters.intersection(&links[j].voters) {
                    let a = FfgVote { source: links[i].source, target: links[i].target, voter: *voter };
                    let b = FfgVote { source: links[j].source, target: links[j].target, voter: *voter };
                    debug_assert!(check_e1(&a, &b));
                    out.insert(Violation {
                        kind: ViolationKind::E1,
                        offender: *voter,
                        evidence: (Message::FfgVote(a), Message::FfgVote(b)),
                    });
                }
            }
        }
    }
    out
}

/// The chain of supermajority links from genesis to `c`, choosing, per
/// deterministic scan order, the maximal-slot source when several links share
/// a target.
fn justification_chain(js: &JustificationState, c: Checkpoint) -> Vec<Checkpoint> {
    let mut chain = vec![c];
    let mut cur = c;
    while cur != Checkpoint::genesis() {
        let mut sources: Vec<Checkpoint> = js
            .links
            .iter()
            .filter(|l| l.target == cur)
            .map(|l| l.source)
            .collect();
        sources.sort_by_key(|s| (std::cmp::Reverse(s.slot), s.block));
        match sources.first() {
            Some(s) => {
                chain.push(*s);
                cur = *s;
            }
            None => break,
        }
    }
    chain.reverse();
    chain
}

fn find_link<'a>(js: &'a JustificationState, source: &Checkpoint, target: &Checkpoint) -> Option<&'a ffg::SupermajorityLink> {
    js.links.iter().find(|l| l.source == *source && l.target == *target)
}

/// Convenience: the set of distinct offenders in a violation set.
pub fn offenders(violations: &BTreeSet<Violation>) -> BTreeSet<ValidatorId> {
    violations.iter().map(|v| v.offender).collect()
}

/// Re-checks each violation's evidence pair against its predicate.
pub fn verify(v: &Violation) -> bool {
    match (&v.kind, &v.evidence) {
        (ViolationKind::E1, (Message::FfgVote(a), Message::FfgVote(b))) => {
            a.voter == v.offender && check_e1(a, b)
        }
        (ViolationKind::E2, (Message::FfgVote(a), Message::FfgVote(b))) => {
            a.voter == v.offender && check_e2(a, b)
        }
        (ViolationKind::E3, (Message::FfgVote(a), Message::Ack(b))) => {
            a.voter == v.offender && check_e3(a, b)
        }
        (ViolationKind::HeadEquivocation, (Message::HeadVote(a), Message::HeadVote(b))) => {
            a.voter == v.offender && b.voter == v.offender && a.slot == b.slot && a.block != b.block
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Block, BlockId};

    fn cp(block: BlockId, slot: Slot) -> Checkpoint {
        Checkpoint { block, slot }
    }

    fn vote(src: Checkpoint, tgt: Checkpoint, voter: ValidatorId) -> FfgVote {
        FfgVote { source: src, target: tgt, voter }
    }

    #[test]
    fn e1_cases() {
        let g = Block::genesis_id();
        let a = Block::new(Block::genesis(), 1, 0, vec![]).id;
        let b = Block::new(Block::genesis(), 1, 1, vec![]).id;
        let v1 = vote(cp(g, 0), cp(a, 5), 2);
        let v2 = vote(cp(g, 0), cp(b, 5), 2);
        let v3 = vote(cp(g, 0), cp(a, 4), 2);
        assert!(!check_e1(&v1, &v1)); // identical, not distinct
        assert!(check_e1(&v1, &v2));
        assert!(!check_e1(&v1, &v3));
    }

    #[test]
    fn e2_cases() {
        let g = Block::genesis_id();
        let mk = |s: Slot, t: Slot| vote(cp(g, s), cp(g, t), 0);
        assert!(check_e2(&mk(1, 4), &mk(2, 3)));
        assert!(!check_e2(&mk(1, 2), &mk(2, 3))); // chained, legal
        assert!(!check_e2(&mk(1, 3), &mk(1, 4))); // shared source, not strict
    }

    #[test]
    fn e3_cases() {
        let g = Block::genesis_id();
        let mk_ack = |s: Slot| Acknowledgment { checkpoint: cp(g, s), slot: s, voter: 0 };
        assert!(check_e3(&vote(cp(g, 2), cp(g, 6), 0), &mk_ack(4)));
        assert!(!check_e3(&vote(cp(g, 4), cp(g, 5), 0), &mk_ack(4)));
        assert!(!check_e3(&vote(cp(g, 2), cp(g, 6), 0), &mk_ack(6)));
    }

    #[test]
    fn scan_honest_pool_is_empty() {
        let g = Block::genesis_id();
        let pool = vec![
            Message::FfgVote(vote(cp(g, 0), cp(g, 1), 0)),
            Message::FfgVote(vote(cp(g, 1), cp(g, 2), 0)),
            Message::HeadVote(crate::types::HeadVote { block: g, slot: 1, voter: 0 }),
        ];
        assert!(scan(pool.iter()).is_empty());
    }

    #[test]
    fn scan_finds_injected_equivocation() {
        let g = Block::genesis_id();
        let b = Block::new(Block::genesis(), 1, 1, vec![]).id;
        let pool = vec![
            Message::FfgVote(vote(cp(g, 0), cp(g, 3), 1)),
            Message::FfgVote(vote(cp(g, 0), cp(b, 3), 1)),
        ];
        let found = scan(pool.iter());
        assert_eq!(found.len(), 1);
        let v = found.first().unwrap();
        assert_eq!(v.kind, ViolationKind::E1);
        assert_eq!(v.offender, 1);
        assert!(verify(v));
    }
}
