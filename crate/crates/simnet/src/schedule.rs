//! Sleep and corruption timelines derived from a scenario, shared by the
//! world loop and the compliance checks so both agree on who is awake when.

use std::collections::BTreeSet;

use ebbflow_consensus::types::{Round, Slot, ValidatorId};

use crate::scenario::Scenario;

#[derive(Clone, Debug)]
pub struct Timeline {
    n: usize,
    /// Per validator, sleep intervals `[from, to)` sorted by start.
    sleep: Vec<Vec<(Round, Round)>>,
    /// Per validator, the round corruption takes effect, if ever.
    corrupt_at: Vec<Option<Round>>,
    slot_len: u64,
}

impl Timeline {
    pub fn of(s: &Scenario) -> Timeline {
        let mut sleep = vec![Vec::new(); s.n];
        for iv in &s.sleep {
            sleep[iv.validator as usize].push((iv.from, iv.to));
        }
        for list in &mut sleep {
            list.sort_unstable();
        }
        let mut corrupt_at = vec![None; s.n];
        for c in &s.corruptions {
            let e = &mut corrupt_at[c.validator as usize];
            *e = Some(e.map_or(c.round, |r: Round| r.min(c.round)));
        }
        Timeline { n: s.n, sleep, corrupt_at, slot_len: s.slot_len() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Asleep during `[from, to)` intervals.
    pub fn is_asleep(&self, v: ValidatorId, r: Round) -> bool {
        self.sleep[v as usize].iter().any(|(a, b)| *a <= r && r < *b)
    }

    pub fn is_corrupted(&self, v: ValidatorId, r: Round) -> bool {
        self.corrupt_at[v as usize].is_some_and(|c| c <= r)
    }

    pub fn corruption_round(&self, v: ValidatorId) -> Option<Round> {
        self.corrupt_at[v as usize]
    }

    /// Honest validators awake for the whole closed span of rounds.
    pub fn awake_throughout(&self, from: Round, to: Round) -> BTreeSet<ValidatorId> {
        (0..self.n as ValidatorId)
            .filter(|v| {
                !self.is_corrupted(*v, to) && (from..=to).all(|r| !self.is_asleep(*v, r))
            })
            .collect()
    }

    /// Honest validators awake at some round of the closed span.
    pub fn awake_sometime(&self, from: Round, to: Round) -> BTreeSet<ValidatorId> {
        (0..self.n as ValidatorId)
            .filter(|v| {
                !self.is_corrupted(*v, to) && (from..=to).any(|r| !self.is_asleep(*v, r))
            })
            .collect()
    }

    /// Full participants of slot `t`: honest, awake from the previous slot's
    /// merge round through this slot's merge round, so they voted on the
    /// head with a fully merged view.
    pub fn participants(&self, t: Slot) -> BTreeSet<ValidatorId> {
        let d = self.slot_len / 4;
        let start = (self.slot_len * t).saturating_sub(d);
        let end = self.slot_len * t + 3 * d;
        self.awake_throughout(start, end)
    }

    /// Honest validators up at some point in slot `t` without being full
    /// participants: the joining set.
    pub fn joiners(&self, t: Slot) -> BTreeSet<ValidatorId> {
        let start = self.slot_len * t;
        let end = start + self.slot_len - 1;
        let some = self.awake_sometime(start, end);
        let full = self.participants(t);
        some.difference(&full).copied().collect()
    }

    pub fn honest(&self, r: Round) -> BTreeSet<ValidatorId> {
        (0..self.n as ValidatorId).filter(|v| !self.is_corrupted(*v, r)).collect()
    }
}
