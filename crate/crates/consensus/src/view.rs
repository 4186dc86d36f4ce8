//! Per-validator message sets with merge semantics and the derived block tree.
//!
//! A view is a deduplicated set of messages. Merging is set union, so it is
//! idempotent, commutative and associative. Blocks whose parent is unknown are
//! retained as dangling and excluded from the tree (and from fork choice and
//! justification) until the parent arrives.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::types::{Acknowledgment, Block, BlockId, Checkpoint, FfgVote, HeadVote, Message, Proposal, Slot, ValidatorId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ViewError {
    #[error("unknown or disconnected block {0}")]
    UnknownBlock(BlockId),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct View {
    blocks: BTreeMap<BlockId, Block>,
    /// Blocks with a parent chain down to genesis.
    connected: BTreeSet<BlockId>,
    /// Depth of each connected block (genesis = 0).
    depth: BTreeMap<BlockId, u64>,
    /// Child edges, including edges whose child is still dangling.
    children: BTreeMap<BlockId, BTreeSet<BlockId>>,
    head_votes: BTreeSet<HeadVote>,
    ffg_votes: BTreeSet<FfgVote>,
    acks: BTreeSet<Acknowledgment>,
    proposals: BTreeSet<Proposal>,
    /// Distinct voters per (source, target) link, maintained incrementally on
    /// insert. Link validity is evaluated lazily against the tree.
    ffg_tally: BTreeMap<(Checkpoint, Checkpoint), BTreeSet<ValidatorId>>,
}

impl View {
    pub fn new() -> View {
        View::default()
    }

    /// A view seeded with the genesis block, the usual starting state.
    pub fn with_genesis() -> View {
        let mut v = View::new();
        v.insert(Message::Block(Block::genesis().clone()));
        v
    }

    pub fn insert(&mut self, msg: Message) {
        match msg {
            Message::Block(b) => self.insert_block(b),
            Message::HeadVote(hv) => {
                self.head_votes.insert(hv);
            }
            Message::FfgVote(fv) => {
                if self.ffg_votes.insert(fv) {
                    self.ffg_tally
                        .entry((fv.source, fv.target))
                        .or_default()
                        .insert(fv.voter);
                }
            }
            Message::Ack(a) => {
                self.acks.insert(a);
            }
            Message::Proposal(p) => {
                self.proposals.insert(p);
            }
        }
    }

    pub fn merge<I: IntoIterator<Item = Message>>(&mut self, msgs: I) {
        for m in msgs {
            self.insert(m);
        }
    }

    pub fn from_messages<I: IntoIterator<Item = Message>>(msgs: I) -> View {
        let mut v = View::new();
        v.merge(msgs);
        v
    }

    fn insert_block(&mut self, b: Block) {
        if self.blocks.contains_key(&b.id) {
            return;
        }
        if let Some(p) = b.parent {
            self.children.entry(p).or_default().insert(b.id);
        }
        let id = b.id;
        let connects = match b.parent {
            None => b.is_genesis(),
            Some(p) => self.connected.contains(&p),
        };
        let parent_depth = b.parent.and_then(|p| self.depth.get(&p).copied());
        self.blocks.insert(id, b);
        if connects {
            self.connect(id, parent_depth.map_or(0, |d| d + 1));
        }
    }

    /// Marks `id` connected and cascades to any dangling descendants.
    fn connect(&mut self, id: BlockId, depth: u64) {
        let mut stack = vec![(id, depth)];
        while let Some((id, depth)) = stack.pop() {
            if !self.connected.insert(id) {
                continue;
            }
            self.depth.insert(id, depth);
            if let Some(kids) = self.children.get(&id) {
                for kid in kids.clone() {
                    if self.blocks.contains_key(&kid) {
                        stack.push((kid, depth + 1));
                    }
                }
            }
        }
    }

    // -- accessors ---------------------------------------------------------

    pub fn block(&self, id: &BlockId) -> Option<&Block> {
        self.blocks.get(id)
    }

    pub fn contains_block(&self, id: &BlockId) -> bool {
        self.blocks.contains_key(id)
    }

    pub fn is_connected(&self, id: &BlockId) -> bool {
        self.connected.contains(id)
    }

    pub fn connected_blocks(&self) -> impl Iterator<Item = &Block> + '_ {
        self.connected.iter().filter_map(|id| self.blocks.get(id))
    }

    /// Connected children of a connected block, in id order.
    pub fn connected_children(&self, id: &BlockId) -> Vec<BlockId> {
        self.children
            .get(id)
            .map(|kids| {
                kids.iter()
                    .filter(|k| self.connected.contains(*k))
                    .copied()
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn head_votes(&self) -> impl Iterator<Item = &HeadVote> + '_ {
        self.head_votes.iter()
    }

    pub fn ffg_votes(&self) -> impl Iterator<Item = &FfgVote> + '_ {
        self.ffg_votes.iter()
    }

    pub fn acks(&self) -> impl Iterator<Item = &Acknowledgment> + '_ {
        self.acks.iter()
    }

    pub fn proposals(&self) -> impl Iterator<Item = &Proposal> + '_ {
        self.proposals.iter()
    }

    /// Distinct voters tallied per (source, target) link.
    pub fn ffg_tally(&self) -> &BTreeMap<(Checkpoint, Checkpoint), BTreeSet<ValidatorId>> {
        &self.ffg_tally
    }

    /// All messages of the view in canonical order. Used to build proposals.
    pub fn messages(&self) -> Vec<Message> {
        let mut out: Vec<Message> = Vec::new();
        out.extend(self.blocks.values().cloned().map(Message::Block));
        out.extend(self.head_votes.iter().copied().map(Message::HeadVote));
        out.extend(self.ffg_votes.iter().copied().map(Message::FfgVote));
        out.extend(self.acks.iter().copied().map(Message::Ack));
        out.extend(self.proposals.iter().cloned().map(Message::Proposal));
        out
    }

    pub fn len(&self) -> usize {
        self.blocks.len() + self.head_votes.len() + self.ffg_votes.len() + self.acks.len() + self.proposals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    // -- chain relations ---------------------------------------------------

    /// Ancestor-or-equal: true iff `a` lies on the parent path from `b` to
    /// genesis, inclusive.
    pub fn is_ancestor(&self, a: &BlockId, b: &BlockId) -> Result<bool, ViewError> {
        let da = *self.depth.get(a).ok_or(ViewError::UnknownBlock(*a))?;
        let db = *self.depth.get(b).ok_or(ViewError::UnknownBlock(*b))?;
        if da > db {
            return Ok(false);
        }
        let mut cur = *b;
        let mut d = db;
        while d > da {
            cur = self.blocks[&cur].parent.expect("connected non-genesis block has parent");
            d -= 1;
        }
        Ok(cur == *a)
    }

    /// Number of ancestors strictly below `b`; genesis has height 0.
    pub fn block_height(&self, b: &BlockId) -> Result<u64, ViewError> {
        self.depth.get(b).copied().ok_or(ViewError::UnknownBlock(*b))
    }

    /// The ancestor exactly `kappa` blocks above `head`, truncated at genesis.
    pub fn prefix_at_depth(&self, head: &BlockId, kappa: u64) -> Result<BlockId, ViewError> {
        if !self.connected.contains(head) {
            return Err(ViewError::UnknownBlock(*head));
        }
        let mut cur = *head;
        for _ in 0..kappa {
            match self.blocks[&cur].parent {
                Some(p) => cur = p,
                None => break,
            }
        }
        Ok(cur)
    }

    /// Parent path from genesis to `b`, inclusive.
    pub fn chain_of(&self, b: &BlockId) -> Result<Vec<BlockId>, ViewError> {
        if !self.connected.contains(b) {
            return Err(ViewError::UnknownBlock(*b));
        }
        let mut out = vec![*b];
        let mut cur = *b;
        while let Some(p) = self.blocks[&cur].parent {
            out.push(p);
            cur = p;
        }
        out.reverse();
        Ok(out)
    }

    /// A checkpoint is usable for justification if its block is connected and
    /// the checkpoint slot does not precede the block's slot.
    pub fn is_valid_checkpoint(&self, c: &Checkpoint) -> bool {
        self.connected.contains(&c.block)
            && self.blocks.get(&c.block).is_some_and(|b| c.slot >= b.slot)
    }

    /// FFG vote validity for justification counting: slot ordering plus
    /// source-ancestor-of-target, both checkable in this view. Votes failing
    /// this are retained as evidence but never count toward links.
    pub fn is_valid_link(&self, source: &Checkpoint, target: &Checkpoint) -> bool {
        source.slot < target.slot
            && self.is_valid_checkpoint(source)
            && self.is_valid_checkpoint(target)
            && self.is_ancestor(&source.block, &target.block).unwrap_or(false)
    }

    /// Head votes of a given slot, by distinct voter.
    pub fn head_votes_at(&self, slot: Slot) -> impl Iterator<Item = &HeadVote> + '_ {
        self.head_votes.iter().filter(move |v| v.slot == slot)
    }
}
