//! Adversary strategies. Corrupted validators hand their state to one
//! adversary, which sees every message the moment it is sent (rushing) and
//! decides what its validators emit and who hears it.

use std::collections::BTreeMap;

use ebbflow_consensus::types::{
    Acknowledgment, Block, Checkpoint, FfgVote, HeadVote, Message, Round, Slot, ValidatorId,
};
use ebbflow_consensus::validator::{Status, ValidatorState};
use serde::{Deserialize, Serialize};

use crate::trace::Audience;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    E1,
    E2,
    E3,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case")]
pub enum AdversaryConfig {
    /// Corrupted validators follow the protocol.
    #[default]
    HonestMirror,
    /// Follow the protocol but withhold own proposals.
    SilentProposer,
    /// Cast a second head vote per slot for a conflicting block.
    HeadEquivocator,
    /// Cast a second FFG vote with the same target slot, different block.
    FfgEquivocator,
    /// Cast an extra FFG vote surrounding the honest one.
    SurroundVoter,
    /// Cast an extra FFG vote surrounding an own earlier acknowledgment.
    AckSurrounder,
    /// Honest behavior; the network delays cross-group delivery until
    /// stabilization.
    Partitioner { groups: Vec<Vec<ValidatorId>> },
    /// Stay silent, then fabricate two conflicting finalized chains at the
    /// end, shown to the trace and observer only.
    DoubleFinalizer { route: Route },
}

/// One adversarial send: attributed sender, payload, and who hears it.
#[derive(Clone, Debug)]
pub struct AdvSend {
    pub from: ValidatorId,
    pub msg: Message,
    pub audience: Audience,
}

fn all(from: ValidatorId, msg: Message) -> AdvSend {
    AdvSend { from, msg, audience: Audience::All }
}

fn withheld(from: ValidatorId, msg: Message) -> AdvSend {
    AdvSend { from, msg, audience: Audience::None }
}

pub struct Adversary {
    config: AdversaryConfig,
    mirrors: BTreeMap<ValidatorId, ValidatorState>,
    acks_sent: BTreeMap<ValidatorId, Vec<Slot>>,
    /// The pair of conflicting finalized checkpoints fabricated by the
    /// double finalizer, once produced.
    pub conflict: Option<(Checkpoint, Checkpoint)>,
}

impl Adversary {
    pub fn new(config: AdversaryConfig) -> Adversary {
        Adversary {
            config,
            mirrors: BTreeMap::new(),
            acks_sent: BTreeMap::new(),
            conflict: None,
        }
    }

    pub fn config(&self) -> &AdversaryConfig {
        &self.config
    }

    pub fn corrupted(&self) -> impl Iterator<Item = ValidatorId> + '_ {
        self.mirrors.keys().copied()
    }

    /// Takes over a validator: the adversary inherits its full state.
    pub fn adopt(&mut self, mut state: ValidatorState) {
        state.status = Status::Active;
        self.mirrors.insert(state.index, state);
    }

    /// Rushing delivery: the adversary hears everything instantly.
    pub fn deliver(&mut self, msg: &Message, r: Round) {
        for m in self.mirrors.values_mut() {
            let _ = m.on_receive(msg.clone(), r);
        }
    }

    /// What the corrupted validators do this round. `last_round` marks the
    /// end of the simulation, when the double finalizer plays its hand.
    pub fn act(&mut self, r: Round, last_round: Round) -> Vec<AdvSend> {
        if let AdversaryConfig::DoubleFinalizer { route } = self.config {
            if r == last_round && self.conflict.is_none() {
                return self.fabricate(route);
            }
            return Vec::new();
        }
        let mut out = Vec::new();
        let ids: Vec<ValidatorId> = self.mirrors.keys().copied().collect();
        for id in ids {
            let emissions = {
                let m = self.mirrors.get_mut(&id).unwrap();
                m.on_round(r).emissions
            };
            for msg in emissions {
                self.transform(id, msg, &mut out);
            }
        }
        // a corrupted validator hears its peers' sends like anyone else
        let payloads: Vec<Message> = out
            .iter()
            .filter(|s| s.audience != Audience::None)
            .map(|s| s.msg.clone())
            .collect();
        for msg in &payloads {
            self.deliver(msg, r);
        }
        out
    }

    fn transform(&mut self, id: ValidatorId, msg: Message, out: &mut Vec<AdvSend>) {
        match (&self.config, &msg) {
            (AdversaryConfig::SilentProposer, Message::Proposal(_)) => {
                out.push(withheld(id, msg));
            }
            (AdversaryConfig::HeadEquivocator, Message::HeadVote(hv)) => {
                let alt = self.conflicting_block_for(id, hv.block);
                out.push(all(id, msg.clone()));
                if let Some(alt) = alt {
                    out.push(all(id, Message::HeadVote(HeadVote { block: alt, slot: hv.slot, voter: id })));
                }
            }
            (AdversaryConfig::FfgEquivocator, Message::FfgVote(fv)) => {
                let alt = self.conflicting_block_for(id, fv.target.block);
                out.push(all(id, msg.clone()));
                if let Some(alt) = alt {
                    out.push(all(
                        id,
                        Message::FfgVote(FfgVote {
                            source: fv.source,
                            target: Checkpoint { block: alt, slot: fv.target.slot },
                            voter: id,
                        }),
                    ));
                }
            }
            (AdversaryConfig::SurroundVoter, Message::FfgVote(fv)) => {
                out.push(all(id, msg.clone()));
                if fv.source.slot > 0 {
                    out.push(all(
                        id,
                        Message::FfgVote(FfgVote {
                            source: Checkpoint::genesis(),
                            target: Checkpoint { block: fv.target.block, slot: fv.target.slot + 1 },
                            voter: id,
                        }),
                    ));
                }
            }
            (AdversaryConfig::AckSurrounder, Message::FfgVote(fv)) => {
                out.push(all(id, msg.clone()));
                let surrounded = self
                    .acks_sent
                    .get(&id)
                    .is_some_and(|slots| slots.iter().any(|u| 0 < *u && *u < fv.target.slot));
                let extra = FfgVote {
                    source: Checkpoint::genesis(),
                    target: fv.target,
                    voter: id,
                };
                if surrounded && extra != *fv {
                    out.push(all(id, Message::FfgVote(extra)));
                }
            }
            (AdversaryConfig::AckSurrounder, Message::Ack(a)) => {
                self.acks_sent.entry(id).or_default().push(a.checkpoint.slot);
                out.push(all(id, msg.clone()));
            }
            _ => out.push(all(id, msg)),
        }
    }

    /// A block conflicting with `b` in this mirror's view: the parent when
    /// `b` has one, to guarantee distinctness.
    fn conflicting_block_for(&self, id: ValidatorId, b: ebbflow_consensus::types::BlockId) -> Option<ebbflow_consensus::types::BlockId> {
        let m = self.mirrors.get(&id)?;
        m.view.block(&b)?.parent
    }

    /// Builds two quorum-backed conflicting finalized chains, each voted by
    /// every corrupted validator, withheld from honest recipients.
    fn fabricate(&mut self, route: Route) -> Vec<AdvSend> {
        let voters: Vec<ValidatorId> = self.mirrors.keys().copied().collect();
        let Some(&leader) = voters.first() else {
            return Vec::new();
        };
        let g = Block::genesis();
        let mut out = Vec::new();
        let emit_block = |out: &mut Vec<AdvSend>, b: &Block| {
            out.push(withheld(b.proposer, Message::Block(b.clone())));
        };
        let emit_link = |out: &mut Vec<AdvSend>, s: Checkpoint, t: Checkpoint| {
            for v in &voters {
                out.push(withheld(*v, Message::FfgVote(FfgVote { source: s, target: t, voter: *v })));
            }
        };
        let cp = |b: &Block, s: Slot| Checkpoint { block: b.id, slot: s };
        match route {
            Route::E1 => {
                let a1 = Block::new(g, 1, leader, b"chain-a".to_vec());
                let a2 = Block::new(&a1, 2, leader, b"chain-a".to_vec());
                let b1 = Block::new(g, 1, leader, b"chain-b".to_vec());
                let b2 = Block::new(&b1, 2, leader, b"chain-b".to_vec());
                for b in [&a1, &a2, &b1, &b2] {
                    emit_block(&mut out, b);
                }
                emit_link(&mut out, Checkpoint::genesis(), cp(&a1, 1));
                emit_link(&mut out, cp(&a1, 1), cp(&a2, 2));
                emit_link(&mut out, Checkpoint::genesis(), cp(&b1, 1));
                emit_link(&mut out, cp(&b1, 1), cp(&b2, 2));
                self.conflict = Some((cp(&a1, 1), cp(&b1, 1)));
            }
            Route::E2 => {
                let a1 = Block::new(g, 1, leader, b"chain-a".to_vec());
                let a2 = Block::new(&a1, 2, leader, b"chain-a".to_vec());
                let b5 = Block::new(g, 5, leader, b"chain-b".to_vec());
                let b6 = Block::new(&b5, 6, leader, b"chain-b".to_vec());
                for b in [&a1, &a2, &b5, &b6] {
                    emit_block(&mut out, b);
                }
                emit_link(&mut out, Checkpoint::genesis(), cp(&a1, 1));
                emit_link(&mut out, cp(&a1, 1), cp(&a2, 2));
                emit_link(&mut out, Checkpoint::genesis(), cp(&b5, 5));
                emit_link(&mut out, cp(&b5, 5), cp(&b6, 6));
                self.conflict = Some((cp(&a1, 1), cp(&b5, 5)));
            }
            Route::E3 => {
                let a1 = Block::new(g, 1, leader, b"chain-a".to_vec());
                let b2 = Block::new(g, 2, leader, b"chain-b".to_vec());
                let b3 = Block::new(&b2, 3, leader, b"chain-b".to_vec());
                for b in [&a1, &b2, &b3] {
                    emit_block(&mut out, b);
                }
                emit_link(&mut out, Checkpoint::genesis(), cp(&a1, 1));
                for v in &voters {
                    out.push(withheld(
                        *v,
                        Message::Ack(Acknowledgment { checkpoint: cp(&a1, 1), slot: 1, voter: *v }),
                    ));
                }
                emit_link(&mut out, Checkpoint::genesis(), cp(&b2, 2));
                emit_link(&mut out, cp(&b2, 2), cp(&b3, 3));
                self.conflict = Some((cp(&a1, 1), cp(&b2, 2)));
            }
        }
        out
    }
}
