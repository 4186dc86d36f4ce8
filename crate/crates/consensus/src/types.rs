//! Protocol objects: blocks, checkpoints, votes, proposals, acknowledgments.

use std::fmt;
use std::sync::LazyLock;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

/// Discrete time unit. Slots are `4 * delta` consecutive rounds.
pub type Round = u64;
/// Slot number. Genesis occupies slot 0; the protocol runs from slot 1.
pub type Slot = u64;
/// Validator index in `0..n`.
pub type ValidatorId = u32;

/// Content digest identifying a block. Lexicographic byte order gives the
/// total order used for every deterministic tie-break downstream.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId(pub [u8; 32]);

impl BlockId {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let bytes = hex::decode(s).ok()?;
        let arr: [u8; 32] = bytes.try_into().ok()?;
        Some(BlockId(arr))
    }
}

impl fmt::Debug for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BlockId({}..)", &self.to_hex()[..8])
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for BlockId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for BlockId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        BlockId::from_hex(&s).ok_or_else(|| D::Error::custom("invalid block id"))
    }
}

/// A block in the tree. `parent` is `None` only for genesis.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Block {
    pub id: BlockId,
    pub parent: Option<BlockId>,
    pub slot: Slot,
    pub proposer: ValidatorId,
    #[serde(with = "hex_bytes")]
    pub body: Vec<u8>,
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(&s).map_err(serde::de::Error::custom)
    }
}

static GENESIS: LazyLock<Block> = LazyLock::new(|| {
    let id = compute_block_id(None, 0, 0, b"genesis");
    Block {
        id,
        parent: None,
        slot: 0,
        proposer: 0,
        body: b"genesis".to_vec(),
    }
});

fn compute_block_id(parent: Option<BlockId>, slot: Slot, proposer: ValidatorId, body: &[u8]) -> BlockId {
    let mut h = Sha256::new();
    h.update(b"ebbflow/block");
    match parent {
        Some(p) => {
            h.update([1u8]);
            h.update(p.0);
        }
        None => h.update([0u8; 33]),
    }
    h.update(slot.to_le_bytes());
    h.update(proposer.to_le_bytes());
    h.update(body);
    BlockId(h.finalize().into())
}

impl Block {
    /// The unique parentless block at slot 0.
    pub fn genesis() -> &'static Block {
        &GENESIS
    }

    pub fn genesis_id() -> BlockId {
        GENESIS.id
    }

    /// Builds a child block. Panics if `slot <= parent.slot`; callers hold
    /// that invariant by construction.
    pub fn new(parent: &Block, slot: Slot, proposer: ValidatorId, body: Vec<u8>) -> Block {
        assert!(slot > parent.slot, "child slot must exceed parent slot");
        let id = compute_block_id(Some(parent.id), slot, proposer, &body);
        Block {
            id,
            parent: Some(parent.id),
            slot,
            proposer,
            body,
        }
    }

    pub fn is_genesis(&self) -> bool {
        self.parent.is_none()
    }

    /// Structural sanity: slot ordering against the parent reference and the
    /// uniqueness of the parentless genesis.
    pub fn is_well_formed(&self) -> bool {
        match self.parent {
            None => *self == *GENESIS,
            Some(_) => self.id == compute_block_id(self.parent, self.slot, self.proposer, &self.body),
        }
    }
}

/// An FFG checkpoint: a block paired with a slot at or after the block's own.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub block: BlockId,
    pub slot: Slot,
}

impl Checkpoint {
    pub fn genesis() -> Checkpoint {
        Checkpoint {
            block: Block::genesis_id(),
            slot: 0,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct HeadVote {
    pub block: BlockId,
    pub slot: Slot,
    pub voter: ValidatorId,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct FfgVote {
    pub source: Checkpoint,
    pub target: Checkpoint,
    pub voter: ValidatorId,
}

impl FfgVote {
    /// Slot-level field validity. Ancestry of source under target is checked
    /// against a view, see `View::is_valid_ffg_vote`.
    pub fn slots_valid(&self) -> bool {
        self.source.slot < self.target.slot
    }
}

/// End-of-slot attestation that a checkpoint of the current slot is justified.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Acknowledgment {
    pub checkpoint: Checkpoint,
    pub slot: Slot,
    pub voter: ValidatorId,
}

impl Acknowledgment {
    pub fn is_well_formed(&self) -> bool {
        self.checkpoint.slot == self.slot
    }
}

/// A slot proposal carrying the proposer's merged view.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Proposal {
    pub block: Block,
    pub view: Vec<Message>,
    pub slot: Slot,
    pub proposer: ValidatorId,
}

impl Proposal {
    pub fn is_well_formed(&self) -> bool {
        self.block.slot == self.slot
            && self.block.proposer == self.proposer
            && self
                .view
                .iter()
                .any(|m| matches!(m, Message::Block(b) if b.id == self.block.id))
    }
}

/// Tagged union of everything that travels on the simulated network.
/// Sender identity is derived from the inner object and is unforgeable
/// within the simulator.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Message {
    Block(Block),
    HeadVote(HeadVote),
    FfgVote(FfgVote),
    Ack(Acknowledgment),
    Proposal(Proposal),
}

impl Message {
    pub fn sender(&self) -> ValidatorId {
        match self {
            Message::Block(b) => b.proposer,
            Message::HeadVote(v) => v.voter,
            Message::FfgVote(v) => v.voter,
            Message::Ack(a) => a.voter,
            Message::Proposal(p) => p.proposer,
        }
    }

    /// Structural validity. Invalid FFG votes are deliberately well-formed
    /// here: they are retained as slashing evidence.
    pub fn is_well_formed(&self) -> bool {
        match self {
            Message::Block(b) => b.is_well_formed(),
            Message::HeadVote(_) | Message::FfgVote(_) => true,
            Message::Ack(a) => a.is_well_formed(),
            Message::Proposal(p) => p.is_well_formed(),
        }
    }
}
