//! Core protocol engine for a single-slot-finality consensus design that
//! couples a dynamically available chain (RLMD-GHOST) with an accountably
//! safe finalized chain (an FFG-style finality gadget with same-slot
//! acknowledgment finalization).
//!
//! Layering:
//!  - [`types`]: blocks, checkpoints, votes, acknowledgments, proposals;
//!  - [`codec`]: canonical binary and structured-text wire forms;
//!  - [`view`]: mergeable message sets and the derived block tree;
//!  - [`forkchoice`]: GHOST plus the equivocation/expiry/latest-message and
//!    justification filters;
//!  - [`ffg`]: justification, finalization, acknowledgment finality;
//!  - [`validator`]: the four-phase per-slot state machine;
//!  - [`slasher`]: offense predicates and forensic culprit extraction.

pub mod codec;
pub mod ffg;
pub mod forkchoice;
pub mod slasher;
pub mod types;
pub mod validator;
pub mod view;
