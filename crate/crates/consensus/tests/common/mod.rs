#![allow(dead_code)]

//! Shared proptest generators: random block trees and vote populations.

use ebbflow_consensus::types::{Block, BlockId, Checkpoint, FfgVote, HeadVote, Message, Slot, ValidatorId};
use ebbflow_consensus::view::View;
use proptest::prelude::*;

/// A random block tree rooted at genesis, as a vector with genesis at index
/// 0 and every parent preceding its children.
pub fn tree_strategy(max_extra: usize) -> impl Strategy<Value = Vec<Block>> {
    prop::collection::vec((any::<prop::sample::Index>(), 0u32..6, 1u64..3), 0..=max_extra).prop_map(
        |specs| {
            let mut blocks = vec![Block::genesis().clone()];
            for (parent_sel, proposer, gap) in specs {
                let parent = parent_sel.get(&blocks).clone();
                let b = Block::new(&parent, parent.slot + gap, proposer, vec![]);
                if !blocks.iter().any(|x| x.id == b.id) {
                    blocks.push(b);
                }
            }
            blocks
        },
    )
}

/// Head votes referencing blocks of the given tree.
pub fn votes_for(blocks: &[Block], max_votes: usize) -> impl Strategy<Value = Vec<HeadVote>> {
    let blocks = blocks.to_vec();
    prop::collection::vec((any::<prop::sample::Index>(), 1u64..12, 0u32..8), 0..=max_votes).prop_map(
        move |specs| {
            specs
                .into_iter()
                .map(|(sel, slot, voter)| HeadVote {
                    block: sel.get(&blocks).id,
                    slot,
                    voter,
                })
                .collect()
        },
    )
}

/// FFG votes over checkpoints of the given tree, valid or not.
pub fn ffg_votes_for(blocks: &[Block], max_votes: usize) -> impl Strategy<Value = Vec<FfgVote>> {
    let blocks = blocks.to_vec();
    prop::collection::vec(
        (
            any::<prop::sample::Index>(),
            0u64..6,
            any::<prop::sample::Index>(),
            0u64..8,
            0u32..8,
        ),
        0..=max_votes,
    )
    .prop_map(move |specs| {
        specs
            .into_iter()
            .map(|(s_sel, s_slot, t_sel, t_slot, voter)| FfgVote {
                source: Checkpoint { block: s_sel.get(&blocks).id, slot: s_slot },
                target: Checkpoint { block: t_sel.get(&blocks).id, slot: t_slot },
                voter,
            })
            .collect()
    })
}

/// A tree plus votes, as one message list.
pub fn population(max_blocks: usize, max_votes: usize) -> impl Strategy<Value = Vec<Message>> {
    tree_strategy(max_blocks).prop_flat_map(move |blocks| {
        let blk_msgs: Vec<Message> = blocks.iter().cloned().map(Message::Block).collect();
        (votes_for(&blocks, max_votes), ffg_votes_for(&blocks, max_votes)).prop_map(
            move |(hvs, fvs)| {
                let mut msgs = blk_msgs.clone();
                msgs.extend(hvs.into_iter().map(Message::HeadVote));
                msgs.extend(fvs.into_iter().map(Message::FfgVote));
                msgs
            },
        )
    })
}

/// Path-walk ancestry oracle: `a` on the parent path of `b`, by explicit
/// chain construction.
pub fn ancestor_oracle(v: &View, a: &BlockId, b: &BlockId) -> Option<bool> {
    let chain = v.chain_of(b).ok()?;
    if !v.is_connected(a) {
        return None;
    }
    Some(chain.contains(a))
}

/// Direct-definition subtree weight: distinct voters whose vote block sits
/// at or under `b`, by scanning every vote.
pub fn subtree_weight_oracle(v: &View, b: &BlockId, votes: &[HeadVote]) -> usize {
    let mut voters = std::collections::BTreeSet::new();
    for hv in votes {
        if v.is_connected(&hv.block) && v.is_ancestor(b, &hv.block).unwrap_or(false) {
            voters.insert(hv.voter);
        }
    }
    voters.len()
}

#[allow(dead_code)]
pub fn slot_of(blocks: &[Block], id: &BlockId) -> Slot {
    blocks.iter().find(|b| b.id == *id).map(|b| b.slot).unwrap_or(0)
}

#[allow(dead_code)]
pub fn distinct_voters(votes: &[HeadVote]) -> Vec<ValidatorId> {
    let mut v: Vec<ValidatorId> = votes.iter().map(|h| h.voter).collect();
    v.sort_unstable();
    v.dedup();
    v
}
