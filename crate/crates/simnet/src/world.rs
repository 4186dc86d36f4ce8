//! The deterministic round loop: delivery, sleep/corruption transitions,
//! honest phase actions, adversary actions, gossip, and the observer.
//!
//! Within a round: due messages are delivered first, then status transitions
//! apply, then honest validators act in index order, then the adversary acts
//! having already heard this round's honest sends (rushing). Honest sends are
//! broadcast and arrive `delta` rounds later, so a message sent at the start
//! of a phase is present before the next phase acts. Everything iterates in
//! fixed order over ordered collections; a rerun is byte-identical.

use std::collections::{BTreeMap, BTreeSet};

use ebbflow_consensus::codec::message_digest;
use ebbflow_consensus::ffg;
use ebbflow_consensus::types::{Checkpoint, Message, Round, ValidatorId};
use ebbflow_consensus::validator::{Status, ValidatorState};
use ebbflow_consensus::view::View;

use crate::adversary::{Adversary, AdversaryConfig};
use crate::scenario::Scenario;
use crate::schedule::Timeline;
use crate::trace::{Audience, MsgRecord, TraceRecord};

/// An external observer: hears every broadcast `delta` rounds after sending
/// and every withheld (trace-only) send immediately, and tracks when each
/// checkpoint first became finalized in its view.
#[derive(Clone, Debug)]
pub struct Observer {
    pub view: View,
    pub finalized_at: BTreeMap<Checkpoint, Round>,
}

impl Observer {
    fn new() -> Observer {
        Observer { view: View::with_genesis(), finalized_at: BTreeMap::new() }
    }

    fn absorb(&mut self, msgs: impl IntoIterator<Item = Message>) {
        for msg in msgs {
            if let Message::Proposal(p) = &msg {
                self.view.insert(Message::Block(p.block.clone()));
                self.view.merge(p.view.iter().cloned());
            }
            self.view.insert(msg);
        }
    }

    fn refresh(&mut self, r: Round, n: usize) {
        let js = ffg::compute_justification(&self.view, n);
        let acks: Vec<_> = self.view.acks().copied().collect();
        let finalized = ffg::compute_finalized_with_acks(&js, acks.iter(), n);
        for c in finalized {
            self.finalized_at.entry(c).or_insert(r);
        }
    }
}

pub struct RunOutcome {
    pub scenario: Scenario,
    pub trace: Vec<TraceRecord>,
    /// Conflicting finalized pair fabricated by a double finalizer, if any.
    pub conflict: Option<(Checkpoint, Checkpoint)>,
    pub observer: Observer,
    /// Surviving honest validator states at the end of the run.
    pub validators: Vec<Option<ValidatorState>>,
}

struct Net {
    /// (deliver_round -> [(to, msg)]) for honest recipients.
    queue: BTreeMap<Round, Vec<(ValidatorId, Message)>>,
    /// (deliver_round -> [msg]) for the observer.
    observer_queue: BTreeMap<Round, Vec<Message>>,
    /// Digests already broadcast to all honest validators; receipt of an
    /// unknown digest triggers one gossip re-broadcast.
    known: BTreeSet<[u8; 32]>,
    delta: u64,
    gst: Round,
    /// Partition groups in force before stabilization; `None` for a flat
    /// network. Validators absent from every group share one implicit group.
    groups: Option<Vec<Vec<ValidatorId>>>,
    n: usize,
}

impl Net {
    fn group_of(&self, v: ValidatorId) -> usize {
        if let Some(groups) = &self.groups {
            for (i, g) in groups.iter().enumerate() {
                if g.contains(&v) {
                    return i;
                }
            }
            return usize::MAX;
        }
        0
    }

    fn delivery_round(&self, from: ValidatorId, to: ValidatorId, send: Round) -> Round {
        let base = send + self.delta;
        if send < self.gst && self.group_of(from) != self.group_of(to) {
            return self.gst.max(send) + self.delta;
        }
        base
    }

    fn schedule(&mut self, from: ValidatorId, to: ValidatorId, send: Round, msg: &Message) {
        let at = self.delivery_round(from, to, send);
        self.queue.entry(at).or_default().push((to, msg.clone()));
    }

    fn broadcast(&mut self, from: ValidatorId, send: Round, msg: &Message) {
        self.known.insert(message_digest(msg));
        for to in 0..self.n as ValidatorId {
            if to != from {
                self.schedule(from, to, send, msg);
            }
        }
        self.observer_queue.entry(send + self.delta).or_default().push(msg.clone());
    }

    /// Re-broadcast on first honest receipt of a digest nobody broadcast:
    /// propagates adversarial partial sends to everyone eventually.
    fn gossip(&mut self, receiver: ValidatorId, r: Round, msg: &Message) {
        if self.known.insert(message_digest(msg)) {
            for to in 0..self.n as ValidatorId {
                if to != receiver {
                    self.schedule(receiver, to, r, msg);
                }
            }
            self.observer_queue.entry(r + self.delta).or_default().push(msg.clone());
        }
    }
}

/// Executes a scenario to completion.
pub fn run(scenario: &Scenario) -> RunOutcome {
    let params = scenario.params();
    let timeline = Timeline::of(scenario);
    let n = scenario.n;
    let first = scenario.first_round();
    let last = scenario.last_round();
    let d = scenario.delta;

    let mut trace = vec![TraceRecord::Meta { scenario: scenario.clone() }];
    let mut adversary = Adversary::new(scenario.adversary.clone());
    let mut validators: Vec<Option<ValidatorState>> = (0..n as ValidatorId)
        .map(|i| {
            let status = if timeline.is_asleep(i, first) { Status::Asleep } else { Status::Active };
            Some(ValidatorState::new(i, params, status))
        })
        .collect();
    let mut holdback: Vec<Vec<Message>> = vec![Vec::new(); n];
    let mut observer = Observer::new();
    let mut net = Net {
        queue: BTreeMap::new(),
        observer_queue: BTreeMap::new(),
        known: BTreeSet::new(),
        delta: d,
        gst: scenario.gst,
        groups: match &scenario.adversary {
            AdversaryConfig::Partitioner { groups } => Some(groups.clone()),
            _ => None,
        },
        n,
    };

    for r in first..=last {
        // 1. deliveries due this round
        let due = net.queue.remove(&r).unwrap_or_default();
        for (to, msg) in due {
            let Some(v) = validators[to as usize].as_mut() else { continue };
            if v.status == Status::Asleep {
                holdback[to as usize].push(msg);
                continue;
            }
            match v.on_receive(msg.clone(), r) {
                Ok(()) => net.gossip(to, r, &msg),
                Err(reason) => trace.push(TraceRecord::Drop {
                    round: r,
                    v: to,
                    reason: format!("{reason:?}"),
                }),
            }
        }
        for msg in net.observer_queue.remove(&r).unwrap_or_default() {
            observer.absorb([msg]);
        }

        // 2. sleep and corruption transitions
        for i in 0..n as ValidatorId {
            if timeline.is_corrupted(i, r) {
                if let Some(state) = validators[i as usize].take() {
                    adversary.adopt(state);
                    holdback[i as usize].clear();
                }
                continue;
            }
            let Some(v) = validators[i as usize].as_mut() else { continue };
            let asleep = timeline.is_asleep(i, r);
            if asleep && v.status != Status::Asleep {
                v.sleep();
            } else if !asleep && v.status == Status::Asleep {
                v.wake();
                for msg in std::mem::take(&mut holdback[i as usize]) {
                    let _ = v.on_receive(msg, r);
                }
            }
        }

        // 3. honest actions, index order
        let mut sent: Vec<(ValidatorId, Message)> = Vec::new();
        for i in 0..n {
            let Some(v) = validators[i].as_mut() else { continue };
            let out = v.on_round(r);
            if let Some(block) = out.fast_confirmed {
                trace.push(TraceRecord::FastConfirm { round: r, v: i as ValidatorId, block });
            }
            for msg in out.emissions {
                // a validator keeps its own messages
                let _ = v.on_receive(msg.clone(), r);
                sent.push((i as ValidatorId, msg));
            }
        }
        for (from, msg) in &sent {
            trace.push(TraceRecord::Send {
                round: r,
                from: *from,
                honest: true,
                audience: Audience::All,
                msg: MsgRecord::of(msg),
            });
            adversary.deliver(msg, r);
            net.broadcast(*from, r, msg);
        }

        // 4. adversary actions, rushing on this round's honest sends
        for send in adversary.act(r, last) {
            trace.push(TraceRecord::Send {
                round: r,
                from: send.from,
                honest: false,
                audience: send.audience.clone(),
                msg: MsgRecord::of(&send.msg),
            });
            match &send.audience {
                Audience::All => net.broadcast(send.from, r, &send.msg),
                Audience::Some(list) => {
                    for to in list {
                        net.schedule(send.from, *to, r, &send.msg);
                    }
                    net.observer_queue.entry(r + d).or_default().push(send.msg.clone());
                }
                // withheld: the observer sees it now, honest validators never
                Audience::None => observer.absorb([send.msg.clone()]),
            }
        }

        // 5. per-phase state records
        if r % d == 0 {
            for i in 0..n {
                let Some(v) = validators[i].as_mut() else { continue };
                let status = v.status;
                let canonical = v.canonical;
                let available = v.available;
                let js = v.justification();
                let finalized = js
                    .finalized
                    .iter()
                    .max_by_key(|c| (c.slot, c.block))
                    .map(|c| c.block)
                    .unwrap_or_else(ebbflow_consensus::types::Block::genesis_id);
                let justified_slot = js.latest.slot;
                trace.push(TraceRecord::State {
                    round: r,
                    v: i as ValidatorId,
                    status,
                    canonical,
                    available,
                    finalized,
                    justified_slot,
                });
            }
        }

        // 6. observer finality tracking
        observer.refresh(r, n);
    }

    RunOutcome {
        scenario: scenario.clone(),
        trace,
        conflict: adversary.conflict,
        observer,
        validators,
    }
}

/// Runs many scenarios, data-parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn run_batch(scenarios: &[Scenario]) -> Vec<RunOutcome> {
    use rayon::prelude::*;
    scenarios.par_iter().map(run).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn run_batch(scenarios: &[Scenario]) -> Vec<RunOutcome> {
    run_batch_serial(scenarios)
}

/// Sequential fallback, always available for comparison.
pub fn run_batch_serial(scenarios: &[Scenario]) -> Vec<RunOutcome> {
    scenarios.iter().map(run).collect()
}
