//! The per-validator protocol state machine.
//!
//! A slot `t` spans rounds `4*delta*t .. 4*delta*(t+1)` and has four phases:
//!
//!  - `4dt`        propose: merge the buffer, run fork choice, extend the head;
//!  - `4dt + d`    head-vote: vote for the fork-choice head;
//!  - `4dt + 2d`   confirm: fast-confirm under quorum head-vote support,
//!                 update the available chain, cast the FFG vote;
//!  - `4dt + 3d`   merge: merge the buffer, recompute justification, and
//!                 acknowledge a checkpoint justified in its own slot.
//!
//! Received messages rest in a buffer until a merge point, except a timely
//! proposal from the slot's proposer, whose attached view is merged
//! immediately (view-merge). Waking validators join at the next merge
//! boundary and only then become active.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ffg::{self, JustificationState};
use crate::forkchoice::{self, Expiry, ForkChoiceParams};
use crate::types::{
    Acknowledgment, Block, BlockId, Checkpoint, FfgVote, HeadVote, Message, Proposal, Round, Slot,
    ValidatorId,
};
use crate::view::View;

/// Which fork-choice rule drives the validator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FcMode {
    /// Justification-respecting: RLMD-GHOST restricted to branches comparable
    /// with the latest justified block.
    #[default]
    Hfc,
    /// Plain RLMD-GHOST.
    Rlmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProtocolParams {
    /// Total number of validators.
    pub n: usize,
    /// Maximum post-stabilization message delay; a slot is `4 * delta` rounds.
    pub delta: u64,
    /// Head-vote expiry period.
    pub expiry: Expiry,
    /// Confirmation depth for the available chain.
    pub kappa: u64,
    pub fc_mode: FcMode,
    /// Rotation offset of the round-robin proposer schedule.
    pub proposer_offset: u64,
}

impl ProtocolParams {
    pub fn slot_len(&self) -> u64 {
        4 * self.delta
    }

    pub fn proposer_of(&self, slot: Slot) -> ValidatorId {
        ((slot + self.proposer_offset) % self.n as u64) as ValidatorId
    }

    pub fn fc_params(&self) -> ForkChoiceParams {
        ForkChoiceParams {
            expiry: self.expiry,
            n: self.n,
        }
    }

    /// First round of slot `t`.
    pub fn slot_start(&self, t: Slot) -> Round {
        self.slot_len() * t
    }

    /// The slot a round belongs to and the offset within it.
    pub fn locate(&self, r: Round) -> (Slot, u64) {
        (r / self.slot_len(), r % self.slot_len())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Asleep,
    /// Awake but not yet merged in; becomes active at the next merge boundary.
    Joining,
    Active,
}

/// Why an incoming message was discarded instead of buffered.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropReason {
    Malformed,
}

/// What a validator did in one round.
#[derive(Clone, Debug, Default)]
pub struct RoundOutput {
    pub emissions: Vec<Message>,
    /// Deepest block fast-confirmed this round, when the confirm phase ran.
    pub fast_confirmed: Option<BlockId>,
}

#[derive(Clone, Debug)]
pub struct ValidatorState {
    pub index: ValidatorId,
    pub params: ProtocolParams,
    pub status: Status,
    pub view: View,
    buffer: BTreeSet<Message>,
    /// Fork-choice output, the tip of the canonical chain.
    pub canonical: BlockId,
    /// Tip of the confirmed available chain.
    pub available: BlockId,
    js: JustificationState,
    js_dirty: bool,
}

impl ValidatorState {
    pub fn new(index: ValidatorId, params: ProtocolParams, status: Status) -> ValidatorState {
        ValidatorState {
            index,
            params,
            status,
            view: View::with_genesis(),
            buffer: BTreeSet::new(),
            canonical: Block::genesis_id(),
            available: Block::genesis_id(),
            js: JustificationState::genesis_only(),
            js_dirty: false,
        }
    }

    pub fn latest_justified(&mut self) -> Checkpoint {
        self.refresh_justification();
        self.js.latest
    }

    pub fn justification(&mut self) -> &JustificationState {
        self.refresh_justification();
        &self.js
    }

    fn refresh_justification(&mut self) {
        if self.js_dirty {
            self.js = ffg::compute_justification(&self.view, self.params.n);
            self.js_dirty = false;
        }
    }

    fn merge_buffer(&mut self) {
        if self.buffer.is_empty() {
            return;
        }
        let msgs: Vec<Message> = std::mem::take(&mut self.buffer).into_iter().collect();
        self.view.merge(msgs);
        self.js_dirty = true;
    }

    fn fork_choice(&mut self, t: Slot) -> BlockId {
        let params = self.params.fc_params();
        match self.params.fc_mode {
            FcMode::Rlmd => forkchoice::rlmd_ghost(&self.view, t, &params),
            FcMode::Hfc => {
                let lj = self.latest_justified();
                forkchoice::hfc_with_lj(&self.view, t, &params, lj)
            }
        }
    }

    // -- network input -------------------------------------------------------

    /// Buffers a received message. A well-formed proposal from the expected
    /// proposer, received within the slot's first `delta` rounds, additionally
    /// has its attached view merged immediately.
    pub fn on_receive(&mut self, msg: Message, r: Round) -> Result<(), DropReason> {
        if !msg.is_well_formed() {
            return Err(DropReason::Malformed);
        }
        if let Message::Proposal(p) = &msg {
            self.buffer.insert(Message::Block(p.block.clone()));
            for m in &p.view {
                if m.is_well_formed() {
                    self.buffer.insert(m.clone());
                }
            }
            let (t, _) = self.params.locate(r);
            let timely = p.slot == t
                && p.proposer == self.params.proposer_of(t)
                && r <= self.params.slot_start(t) + self.params.delta;
            if timely && self.status == Status::Active {
                self.view.insert(Message::Block(p.block.clone()));
                for m in &p.view {
                    if m.is_well_formed() {
                        self.view.insert(m.clone());
                    }
                }
                self.js_dirty = true;
            }
        }
        self.buffer.insert(msg);
        Ok(())
    }

    /// Transition out of sleep; the validator participates again only after
    /// the joining merge boundary.
    pub fn wake(&mut self) {
        if self.status == Status::Asleep {
            self.status = Status::Joining;
        }
    }

    pub fn sleep(&mut self) {
        self.status = Status::Asleep;
    }

    // -- per-round behavior --------------------------------------------------

    /// Runs whatever phase falls on round `r`. Slot 0 is genesis; phases fire
    /// from slot 1 on.
    pub fn on_round(&mut self, r: Round) -> RoundOutput {
        let (t, off) = self.params.locate(r);
        let d = self.params.delta;
        if self.status == Status::Joining {
            if off == 3 * d {
                return self.join(t);
            }
            return RoundOutput::default();
        }
        if self.status != Status::Active || t == 0 {
            return RoundOutput::default();
        }
        match off {
            0 => self.phase_propose(t),
            o if o == d => self.phase_head_vote(t),
            o if o == 2 * d => self.phase_confirm(t),
            o if o == 3 * d => self.phase_merge(t),
            _ => RoundOutput::default(),
        }
    }

    fn phase_propose(&mut self, t: Slot) -> RoundOutput {
        let mut out = RoundOutput::default();
        if self.params.proposer_of(t) != self.index {
            return out;
        }
        self.merge_buffer();
        let head = self.fork_choice(t);
        let parent = self.view.block(&head).expect("fork choice returns a known block").clone();
        let block = Block::new(&parent, t, self.index, Vec::new());
        self.view.insert(Message::Block(block.clone()));
        self.js_dirty = true;
        self.canonical = block.id;
        self.align_available();
        // attach the merged view, minus past proposals: their payloads are
        // already unpacked into blocks and votes, so re-attaching them would
        // only nest and bloat every future proposal
        let attached: Vec<Message> = self
            .view
            .messages()
            .into_iter()
            .filter(|m| !matches!(m, Message::Proposal(_)))
            .collect();
        out.emissions.push(Message::Proposal(Proposal {
            block,
            view: attached,
            slot: t,
            proposer: self.index,
        }));
        out
    }

    fn phase_head_vote(&mut self, t: Slot) -> RoundOutput {
        let mut out = RoundOutput::default();
        self.canonical = self.fork_choice(t);
        self.align_available();
        out.emissions.push(Message::HeadVote(HeadVote {
            block: self.canonical,
            slot: t,
            voter: self.index,
        }));
        out
    }

    fn phase_confirm(&mut self, t: Slot) -> RoundOutput {
        let mut out = RoundOutput::default();
        self.canonical = self.fork_choice(t);
        let fast = self.fast_confirmed_block(t);
        out.fast_confirmed = Some(fast);

        let kappa_prefix = self
            .view
            .prefix_at_depth(&self.canonical, self.params.kappa)
            .expect("canonical tip is connected");
        // Keep the available tip monotone: move it only when one of the new
        // confirmations is not already behind it.
        let behind = |b: &BlockId| self.view.is_ancestor(b, &self.available).unwrap_or(false);
        if !(behind(&fast) && behind(&kappa_prefix)) {
            self.available = self.deeper(fast, kappa_prefix);
        }
        self.align_available();

        let lj = self.latest_justified();
        let target_block = if self.view.is_ancestor(&lj.block, &self.available).unwrap_or(false) {
            self.available
        } else {
            lj.block
        };
        out.emissions.push(Message::FfgVote(FfgVote {
            source: lj,
            target: Checkpoint { block: target_block, slot: t },
            voter: self.index,
        }));
        out
    }

    /// Keeps the chain nesting intact between confirm phases: the available
    /// tip must stay on the canonical chain (a merge can reorg the head, e.g.
    /// when a partition heals) and must never trail the finalized tip (a
    /// merge can finalize several slots at once, e.g. right after rejoining).
    fn align_available(&mut self) {
        if self.view.is_ancestor(&self.available, &self.canonical) != Ok(true) {
            self.available = self
                .view
                .prefix_at_depth(&self.canonical, self.params.kappa)
                .expect("canonical tip is connected");
        }
        self.refresh_justification();
        let fin = self
            .js
            .finalized
            .iter()
            .max_by_key(|c| (c.slot, c.block))
            .map(|c| c.block)
            .unwrap_or_else(Block::genesis_id);
        if self.view.is_ancestor(&fin, &self.available) != Ok(true) {
            self.available = fin;
        }
    }

    fn phase_merge(&mut self, t: Slot) -> RoundOutput {
        let mut out = RoundOutput::default();
        self.merge_buffer();
        self.canonical = self.fork_choice(t);
        self.align_available();
        let lj = self.latest_justified();
        if lj.slot == t {
            out.emissions.push(Message::Ack(Acknowledgment {
                checkpoint: lj,
                slot: t,
                voter: self.index,
            }));
        }
        out
    }

    /// Joining merge: adopt everything heard while asleep, then act as the
    /// merge phase does.
    fn join(&mut self, t: Slot) -> RoundOutput {
        self.status = Status::Active;
        if t == 0 {
            self.merge_buffer();
            self.canonical = self.fork_choice(t);
            return RoundOutput::default();
        }
        self.phase_merge(t)
    }

    /// Deepest canonical ancestor backed by a quorum of distinct slot-`t`
    /// head votes for it or its descendants; genesis when no quorum forms.
    /// Votes counted from both the view and the buffer; votes for blocks not
    /// connected in the view carry no support.
    fn fast_confirmed_block(&self, t: Slot) -> BlockId {
        let q = ffg::quorum(self.params.n);
        let votes: Vec<HeadVote> = self
            .view
            .head_votes_at(t)
            .copied()
            .chain(self.buffer.iter().filter_map(|m| match m {
                Message::HeadVote(hv) if hv.slot == t => Some(*hv),
                _ => None,
            }))
            .collect();
        let chain = self
            .view
            .chain_of(&self.canonical)
            .expect("canonical tip is connected");
        for candidate in chain.iter().rev() {
            let mut support: BTreeSet<ValidatorId> = BTreeSet::new();
            for hv in &votes {
                if self.view.is_ancestor(candidate, &hv.block).unwrap_or(false) {
                    support.insert(hv.voter);
                }
            }
            if support.len() >= q {
                return *candidate;
            }
        }
        Block::genesis_id()
    }

    fn deeper(&self, a: BlockId, b: BlockId) -> BlockId {
        let ha = self.view.block_height(&a).unwrap_or(0);
        let hb = self.view.block_height(&b).unwrap_or(0);
        if (ha, a) >= (hb, b) {
            a
        } else {
            b
        }
    }
}
