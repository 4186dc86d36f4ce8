//! Canonical message serialization.
//!
//! Two wire forms, both with fixed field order:
//!  - a length-prefixed binary record (`u32` little-endian length, then a tag
//!    byte and the fields in declaration order), and
//!  - a structured-text record, one JSON object per line, used for traces.

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::types::{Acknowledgment, Block, BlockId, Checkpoint, FfgVote, HeadVote, Message, Proposal};

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("truncated record")]
    Truncated,
    #[error("unknown message tag {0}")]
    UnknownTag(u8),
    #[error("malformed field: {0}")]
    Malformed(&'static str),
    #[error("text record: {0}")]
    Text(#[from] serde_json::Error),
}

const TAG_BLOCK: u8 = 0;
const TAG_HEAD_VOTE: u8 = 1;
const TAG_FFG_VOTE: u8 = 2;
const TAG_ACK: u8 = 3;
const TAG_PROPOSAL: u8 = 4;

/// Encodes a message as a length-prefixed binary record.
pub fn encode(msg: &Message) -> Vec<u8> {
    let mut body = Vec::new();
    encode_body(msg, &mut body);
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    out.extend_from_slice(&body);
    out
}

fn encode_body(msg: &Message, out: &mut Vec<u8>) {
    match msg {
        Message::Block(b) => {
            out.push(TAG_BLOCK);
            encode_block(b, out);
        }
        Message::HeadVote(v) => {
            out.push(TAG_HEAD_VOTE);
            out.extend_from_slice(&v.block.0);
            out.extend_from_slice(&v.slot.to_le_bytes());
            out.extend_from_slice(&v.voter.to_le_bytes());
        }
        Message::FfgVote(v) => {
            out.push(TAG_FFG_VOTE);
            encode_checkpoint(&v.source, out);
            encode_checkpoint(&v.target, out);
            out.extend_from_slice(&v.voter.to_le_bytes());
        }
        Message::Ack(a) => {
            out.push(TAG_ACK);
            encode_checkpoint(&a.checkpoint, out);
            out.extend_from_slice(&a.slot.to_le_bytes());
            out.extend_from_slice(&a.voter.to_le_bytes());
        }
        Message::Proposal(p) => {
            out.push(TAG_PROPOSAL);
            encode_block(&p.block, out);
            out.extend_from_slice(&(p.view.len() as u32).to_le_bytes());
            for m in &p.view {
                let rec = encode(m);
                out.extend_from_slice(&rec);
            }
            out.extend_from_slice(&p.slot.to_le_bytes());
            out.extend_from_slice(&p.proposer.to_le_bytes());
        }
    }
}

fn encode_block(b: &Block, out: &mut Vec<u8>) {
    out.extend_from_slice(&b.id.0);
    match b.parent {
        Some(p) => {
            out.push(1);
            out.extend_from_slice(&p.0);
        }
        None => out.push(0),
    }
    out.extend_from_slice(&b.slot.to_le_bytes());
    out.extend_from_slice(&b.proposer.to_le_bytes());
    out.extend_from_slice(&(b.body.len() as u32).to_le_bytes());
    out.extend_from_slice(&b.body);
}

fn encode_checkpoint(c: &Checkpoint, out: &mut Vec<u8>) {
    out.extend_from_slice(&c.block.0);
    out.extend_from_slice(&c.slot.to_le_bytes());
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.pos + n > self.buf.len() {
            return Err(CodecError::Truncated);
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn block_id(&mut self) -> Result<BlockId, CodecError> {
        Ok(BlockId(self.take(32)?.try_into().unwrap()))
    }
}

/// Decodes one length-prefixed record, returning the message and the number of
/// bytes consumed.
pub fn decode(buf: &[u8]) -> Result<(Message, usize), CodecError> {
    let mut c = Cursor { buf, pos: 0 };
    let len = c.u32()? as usize;
    if 4 + len > buf.len() {
        return Err(CodecError::Truncated);
    }
    let mut body = Cursor {
        buf: &buf[4..4 + len],
        pos: 0,
    };
    let msg = decode_body(&mut body)?;
    Ok((msg, 4 + len))
}

fn decode_body(c: &mut Cursor<'_>) -> Result<Message, CodecError> {
    let tag = c.u8()?;
    match tag {
        TAG_BLOCK => Ok(Message::Block(decode_block(c)?)),
        TAG_HEAD_VOTE => Ok(Message::HeadVote(HeadVote {
            block: c.block_id()?,
            slot: c.u64()?,
            voter: c.u32()?,
        })),
        TAG_FFG_VOTE => Ok(Message::FfgVote(FfgVote {
            source: decode_checkpoint(c)?,
            target: decode_checkpoint(c)?,
            voter: c.u32()?,
        })),
        TAG_ACK => Ok(Message::Ack(Acknowledgment {
            checkpoint: decode_checkpoint(c)?,
            slot: c.u64()?,
            voter: c.u32()?,
        })),
        TAG_PROPOSAL => {
            let block = decode_block(c)?;
            let n = c.u32()? as usize;
            let mut view = Vec::with_capacity(n);
            for _ in 0..n {
                let rest = &c.buf[c.pos..];
                let (m, used) = decode(rest)?;
                view.push(m);
                c.pos += used;
            }
            Ok(Message::Proposal(Proposal {
                block,
                view,
                slot: c.u64()?,
                proposer: c.u32()?,
            }))
        }
        other => Err(CodecError::UnknownTag(other)),
    }
}

fn decode_block(c: &mut Cursor<'_>) -> Result<Block, CodecError> {
    let id = c.block_id()?;
    let parent = match c.u8()? {
        0 => None,
        1 => Some(c.block_id()?),
        _ => return Err(CodecError::Malformed("parent flag")),
    };
    let slot = c.u64()?;
    let proposer = c.u32()?;
    let body_len = c.u32()? as usize;
    let body = c.take(body_len)?.to_vec();
    Ok(Block {
        id,
        parent,
        slot,
        proposer,
        body,
    })
}

fn decode_checkpoint(c: &mut Cursor<'_>) -> Result<Checkpoint, CodecError> {
    Ok(Checkpoint {
        block: c.block_id()?,
        slot: c.u64()?,
    })
}

/// One-line structured-text record.
pub fn encode_text(msg: &Message) -> String {
    serde_json::to_string(msg).expect("message serialization is infallible")
}

pub fn decode_text(line: &str) -> Result<Message, CodecError> {
    Ok(serde_json::from_str(line)?)
}

/// Content digest of a message over its canonical binary encoding. Used for
/// network-level deduplication.
pub fn message_digest(msg: &Message) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(encode(msg));
    h.finalize().into()
}
