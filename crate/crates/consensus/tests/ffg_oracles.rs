//! Justification and finalization against brute-force oracles.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{ffg_votes_for, tree_strategy};
use ebbflow_consensus::ffg::{compute_justification, quorum, third};
use ebbflow_consensus::types::{Block, Checkpoint, FfgVote, Message, ValidatorId};
use ebbflow_consensus::view::View;
use proptest::prelude::*;

fn view_with(blocks: &[Block], votes: &[FfgVote]) -> View {
    let mut msgs: Vec<Message> = blocks.iter().cloned().map(Message::Block).collect();
    msgs.extend(votes.iter().copied().map(Message::FfgVote));
    View::from_messages(msgs)
}

/// Reachability oracle: a checkpoint is justified iff some path of
/// quorum-weight valid links connects genesis to it. Recomputes tallies by
/// scanning the raw votes, no incremental state.
fn justified_oracle(v: &View, votes: &[FfgVote], n: usize) -> BTreeSet<Checkpoint> {
    let q = quorum(n);
    let mut tally: BTreeMap<(Checkpoint, Checkpoint), BTreeSet<ValidatorId>> = BTreeMap::new();
    for f in votes {
        tally.entry((f.source, f.target)).or_default().insert(f.voter);
    }
    let links: Vec<(Checkpoint, Checkpoint)> = tally
        .into_iter()
        .filter(|((s, t), voters)| voters.len() >= q && v.is_valid_link(s, t))
        .map(|(k, _)| k)
        .collect();
    let mut justified = BTreeSet::from([Checkpoint::genesis()]);
    let mut frontier = vec![Checkpoint::genesis()];
    while let Some(c) = frontier.pop() {
        for (s, t) in &links {
            if *s == c && justified.insert(*t) {
                frontier.push(*t);
            }
        }
    }
    justified
}

#[test]
fn quorum_is_minimal_two_thirds() {
    for n in 1..=300usize {
        let q = quorum(n);
        assert!(3 * q >= 2 * n, "n={n}");
        assert!(3 * (q - 1) < 2 * n, "n={n}");
        // two quorums overlap in at least a third
        assert!(2 * q >= n + third(n), "n={n}");
    }
}

proptest! {
    /// Fixed-point justification agrees with the reachability oracle.
    #[test]
    fn justification_matches_reachability_oracle(
        (blocks, votes) in tree_strategy(6).prop_flat_map(|b| {
            let v = ffg_votes_for(&b, 30);
            (Just(b), v)
        }),
        n in 1usize..8,
    ) {
        let v = view_with(&blocks, &votes);
        let js = compute_justification(&v, n);
        prop_assert_eq!(js.justified.clone(), justified_oracle(&v, &votes, n));
        // the reported latest is a maximal-slot justified checkpoint
        let max_slot = js.justified.iter().map(|c| c.slot).max().unwrap();
        prop_assert_eq!(js.latest.slot, max_slot);
        prop_assert!(js.justified.contains(&js.latest));
    }

    /// Justification is order independent: reversing the message stream
    /// yields the same state.
    #[test]
    fn justification_is_order_independent(
        (blocks, votes) in tree_strategy(6).prop_flat_map(|b| {
            let v = ffg_votes_for(&b, 24);
            (Just(b), v)
        }),
        n in 1usize..8,
    ) {
        let forward = view_with(&blocks, &votes);
        let mut msgs: Vec<Message> = blocks.iter().cloned().map(Message::Block).collect();
        msgs.extend(votes.iter().copied().map(Message::FfgVote));
        msgs.reverse();
        let backward = View::from_messages(msgs);
        prop_assert_eq!(compute_justification(&forward, n), compute_justification(&backward, n));
    }

    /// Justification is monotone: adding votes never unjustifies anything.
    #[test]
    fn justification_is_monotone(
        (blocks, votes, extra) in tree_strategy(6).prop_flat_map(|b| {
            let v = ffg_votes_for(&b, 20);
            let e = ffg_votes_for(&b, 10);
            (Just(b), v, e)
        }),
        n in 1usize..8,
    ) {
        let base = view_with(&blocks, &votes);
        let before = compute_justification(&base, n);
        let mut grown = base.clone();
        grown.merge(extra.iter().copied().map(Message::FfgVote));
        let after = compute_justification(&grown, n);
        prop_assert!(before.justified.is_subset(&after.justified));
        prop_assert!(after.latest.slot >= before.latest.slot);
    }

    /// Every justified checkpoint except genesis sits on a link whose voters
    /// meet quorum and whose source is justified.
    #[test]
    fn links_are_quorum_backed_and_rooted(
        (blocks, votes) in tree_strategy(6).prop_flat_map(|b| {
            let v = ffg_votes_for(&b, 30);
            (Just(b), v)
        }),
        n in 1usize..8,
    ) {
        let v = view_with(&blocks, &votes);
        let js = compute_justification(&v, n);
        for c in &js.justified {
            if *c == Checkpoint::genesis() {
                continue;
            }
            prop_assert!(js.links.iter().any(|l| l.target == *c
                && l.voters.len() >= quorum(n)
                && js.justified.contains(&l.source)));
        }
        for l in &js.links {
            prop_assert!(v.is_valid_link(&l.source, &l.target));
        }
    }

    /// Finalized checkpoints are justified and link-supported one slot ahead,
    /// genesis aside.
    #[test]
    fn finalization_implies_adjacent_link(
        (blocks, votes) in tree_strategy(6).prop_flat_map(|b| {
            let v = ffg_votes_for(&b, 30);
            (Just(b), v)
        }),
        n in 1usize..8,
    ) {
        let v = view_with(&blocks, &votes);
        let js = compute_justification(&v, n);
        prop_assert!(js.finalized.contains(&Checkpoint::genesis()));
        for c in &js.finalized {
            prop_assert!(js.justified.contains(c) || *c == Checkpoint::genesis());
            if *c != Checkpoint::genesis() {
                prop_assert!(js.links.iter().any(|l| l.source == *c && l.target.slot == c.slot + 1));
            }
        }
    }
}
