//! Justification and finalization: supermajority links, the latest justified
//! checkpoint, and finality by slot-adjacent link or supermajority
//! acknowledgment.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::types::{Acknowledgment, BlockId, Checkpoint, Slot, ValidatorId};
use crate::view::View;

/// Smallest integer at or above two thirds of `n`. Two quorums intersect in
/// at least `ceil(n/3)` voters.
pub fn quorum(n: usize) -> usize {
    (2 * n).div_ceil(3)
}

/// Smallest count that cannot be reached by honest validators alone when a
/// third may misbehave.
pub fn third(n: usize) -> usize {
    n.div_ceil(3)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupermajorityLink {
    pub source: Checkpoint,
    pub target: Checkpoint,
    pub voters: BTreeSet<ValidatorId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JustificationState {
    pub justified: BTreeSet<Checkpoint>,
    pub links: Vec<SupermajorityLink>,
    /// Maximal-slot justified checkpoint; ties broken by minimal block id.
    /// A tie is simultaneously a mass-equivocation event, surfaced below.
    pub latest: Checkpoint,
    pub finalized: BTreeSet<Checkpoint>,
    /// Slots holding two or more distinct justified checkpoints.
    pub double_justified_slots: BTreeSet<Slot>,
}

impl JustificationState {
    pub fn genesis_only() -> JustificationState {
        JustificationState {
            justified: BTreeSet::from([Checkpoint::genesis()]),
            links: Vec::new(),
            latest: Checkpoint::genesis(),
            finalized: BTreeSet::new(),
            double_justified_slots: BTreeSet::new(),
        }
    }

    pub fn link_voters(&self, source: &Checkpoint, target: &Checkpoint) -> Option<&BTreeSet<ValidatorId>> {
        self.links
            .iter()
            .find(|l| l.source == *source && l.target == *target)
            .map(|l| &l.voters)
    }
}

/// Fixed-point closure over the view's FFG vote tallies: starting from the
/// genesis checkpoint, a checkpoint becomes justified when a quorum of
/// distinct valid votes links it to an already-justified source.
pub fn compute_justification(v: &View, n: usize) -> JustificationState {
    let q = quorum(n);
    // candidate links: valid, quorum-weight
    let mut candidates: Vec<(Checkpoint, Checkpoint, &BTreeSet<ValidatorId>)> = Vec::new();
    for ((source, target), voters) in v.ffg_tally() {
        if voters.len() >= q && v.is_valid_link(source, target) {
            candidates.push((*source, *target, voters));
        }
    }

    let mut justified = BTreeSet::from([Checkpoint::genesis()]);
    let mut links: Vec<SupermajorityLink> = Vec::new();
    let mut used = vec![false; candidates.len()];
    loop {
        let mut progressed = false;
        for (i, (source, target, voters)) in candidates.iter().enumerate() {
            if used[i] || !justified.contains(source) {
                continue;
            }
            used[i] = true;
            progressed = true;
            justified.insert(*target);
            links.push(SupermajorityLink {
                source: *source,
                target: *target,
                voters: (*voters).clone(),
            });
        }
        if !progressed {
            break;
        }
    }
    links.sort_by_key(|l| (l.target, l.source));

    let max_slot = justified.iter().map(|c| c.slot).max().unwrap_or(0);
    let mut at_max: Vec<Checkpoint> = justified.iter().filter(|c| c.slot == max_slot).copied().collect();
    at_max.sort_by_key(|c| (c.block, v.block(&c.block).map_or(0, |b| b.slot)));
    let latest = at_max[0];

    let mut per_slot: BTreeMap<Slot, usize> = BTreeMap::new();
    for c in &justified {
        *per_slot.entry(c.slot).or_default() += 1;
    }
    let double_justified_slots = per_slot
        .into_iter()
        .filter(|(_, k)| *k >= 2)
        .map(|(s, _)| s)
        .collect();

    let mut js = JustificationState {
        justified,
        links,
        latest,
        finalized: BTreeSet::new(),
        double_justified_slots,
    };
    js.finalized = compute_finalized(&js);
    js
}

/// Justified checkpoints with a recorded supermajority link to a target one
/// slot later, plus genesis, which is finalized by definition.
pub fn compute_finalized(js: &JustificationState) -> BTreeSet<Checkpoint> {
    let mut out: BTreeSet<Checkpoint> = js
        .justified
        .iter()
        .filter(|c| js.links.iter().any(|l| l.source == **c && l.target.slot == c.slot + 1))
        .copied()
        .collect();
    out.insert(Checkpoint::genesis());
    out
}

/// Link-finalized checkpoints plus justified checkpoints carrying a quorum of
/// distinct acknowledgments.
pub fn compute_finalized_with_acks<'a, I>(js: &JustificationState, acks: I, n: usize) -> BTreeSet<Checkpoint>
where
    I: IntoIterator<Item = &'a Acknowledgment>,
{
    let q = quorum(n);
    let mut per: BTreeMap<Checkpoint, BTreeSet<ValidatorId>> = BTreeMap::new();
    for a in acks {
        per.entry(a.checkpoint).or_default().insert(a.voter);
    }
    let mut out = compute_finalized(js);
    for (c, voters) in per {
        if voters.len() >= q && js.justified.contains(&c) {
            out.insert(c);
        }
    }
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FfgError {
    #[error("conflicting finalization: {a:?} vs {b:?}")]
    ConflictingFinalization { a: Checkpoint, b: Checkpoint },
}

/// The finalized blocks ordered by ancestry, genesis first. Two finalized
/// checkpoints on conflicting branches are an error carrying both; that event
/// triggers forensic culprit extraction, it is never silently resolved.
pub fn finalized_chain<'a, I>(v: &View, n: usize, acks: I) -> Result<Vec<BlockId>, FfgError>
where
    I: IntoIterator<Item = &'a Acknowledgment>,
{
    let js = compute_justification(v, n);
    let finalized = compute_finalized_with_acks(&js, acks, n);
    let mut by_height: Vec<(u64, Checkpoint)> = Vec::new();
    for c in &finalized {
        let h = v.block_height(&c.block).expect("finalized blocks are connected");
        by_height.push((h, *c));
    }
    by_height.sort();
    for i in 0..by_height.len() {
        for j in (i + 1)..by_height.len() {
            let (a, b) = (by_height[i].1, by_height[j].1);
            if !v.is_ancestor(&a.block, &b.block).unwrap_or(false)
                && !v.is_ancestor(&b.block, &a.block).unwrap_or(false)
            {
                return Err(FfgError::ConflictingFinalization { a, b });
            }
        }
    }
    let mut chain = vec![crate::types::Block::genesis_id()];
    for (_, c) in by_height {
        if chain.last() != Some(&c.block) {
            chain.push(c.block);
        }
    }
    Ok(chain)
}
