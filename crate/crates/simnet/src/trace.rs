//! Execution traces: one JSON record per line. A trace is complete enough to
//! rebuild every honest view, re-run the slashing scan, and check every
//! property offline.

use std::io::{BufRead, Write};

use ebbflow_consensus::codec::message_digest;
use ebbflow_consensus::types::{Block, BlockId, Message, Round, Slot, ValidatorId};
use ebbflow_consensus::validator::Status;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::Scenario;

/// A sent message as recorded. Proposals elide their attached view, which
/// duplicates messages already traced, down to a digest; everything else is
/// recorded verbatim.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rec", rename_all = "kebab-case")]
pub enum MsgRecord {
    Full { msg: Message },
    ProposalSummary {
        block: Block,
        slot: Slot,
        proposer: ValidatorId,
        view_digest: String,
        view_len: usize,
    },
}

impl MsgRecord {
    pub fn of(msg: &Message) -> MsgRecord {
        match msg {
            Message::Proposal(p) => MsgRecord::ProposalSummary {
                block: p.block.clone(),
                slot: p.slot,
                proposer: p.proposer,
                view_digest: hex::encode(message_digest(msg)),
                view_len: p.view.len(),
            },
            other => MsgRecord::Full { msg: other.clone() },
        }
    }

    /// The protocol messages this record contributes to a rebuilt pool: the
    /// message itself, or the proposal's block.
    pub fn pool_message(&self) -> Message {
        match self {
            MsgRecord::Full { msg } => msg.clone(),
            MsgRecord::ProposalSummary { block, .. } => Message::Block(block.clone()),
        }
    }
}

/// Whether a send reached anyone: everyone, a chosen subset, or nobody
/// (withheld, visible to the trace and observer only).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Audience {
    All,
    Some(Vec<ValidatorId>),
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum TraceRecord {
    Meta {
        scenario: Scenario,
    },
    Send {
        round: Round,
        from: ValidatorId,
        honest: bool,
        audience: Audience,
        msg: MsgRecord,
    },
    State {
        round: Round,
        v: ValidatorId,
        status: Status,
        canonical: BlockId,
        available: BlockId,
        /// Tip of the finalized chain in this validator's view.
        finalized: BlockId,
        justified_slot: Slot,
    },
    FastConfirm {
        round: Round,
        v: ValidatorId,
        block: BlockId,
    },
    Drop {
        round: Round,
        v: ValidatorId,
        reason: String,
    },
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace io: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace line {0}: {1}")]
    Parse(usize, serde_json::Error),
}

pub fn write_trace<W: Write>(w: &mut W, records: &[TraceRecord]) -> Result<(), TraceError> {
    for r in records {
        serde_json::to_writer(&mut *w, r).map_err(std::io::Error::other)?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_trace<R: BufRead>(r: R) -> Result<Vec<TraceRecord>, TraceError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| TraceError::Parse(i + 1, e))?);
    }
    Ok(out)
}

/// Every protocol message sent in the trace, for slashing scans and view
/// reconstruction.
pub fn message_pool(records: &[TraceRecord]) -> Vec<Message> {
    records
        .iter()
        .filter_map(|r| match r {
            TraceRecord::Send { msg, .. } => Some(msg.pool_message()),
            _ => None,
        })
        .collect()
}

/// The scenario recorded in the trace header, if present.
pub fn scenario_of(records: &[TraceRecord]) -> Option<&Scenario> {
    records.iter().find_map(|r| match r {
        TraceRecord::Meta { scenario } => Some(scenario),
        _ => None,
    })
}
