//! Randomized scenario generation for the property suites: seeded, hence
//! reproducible, and rejection-sampled into sleepiness compliance.

use ebbflow_simnet::compliance::check_tau_sleepiness;
use ebbflow_simnet::scenario::{Scenario, SleepInterval};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A compliant scenario: GST = 0, everyone honest, a stable core of
/// validators always awake and the rest churning on slot-aligned sleep
/// intervals that never break the sleepiness inequality.
pub fn compliant_scenario(n: usize, horizon: u64, delta: u64, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Scenario::from_toml(&format!("n = {n}\ndelta = {delta}\nhorizon = {horizon}"))
        .expect("base scenario is valid");
    s.seed = seed;
    s.gat = s.slot_len() * horizon;
    s.kappa = rng.gen_range(1..=2);
    s.proposer_offset = rng.gen_range(0..n as u64);

    // a core that never sleeps keeps |H_{t-1}| ahead of the churners
    let core = (n * 3).div_ceil(5).max(2).min(n);
    let sl = s.slot_len();
    for _ in 0..100 {
        s.sleep.clear();
        for v in core..n {
            if !rng.gen_bool(0.5) || horizon < 4 {
                continue;
            }
            let start_slot = rng.gen_range(2..horizon - 1);
            let len_slots = rng.gen_range(1..=2).min(horizon - start_slot);
            s.sleep.push(SleepInterval {
                validator: v as u32,
                from: sl * start_slot,
                to: (sl * (start_slot + len_slots)).min(s.gat),
            });
        }
        if check_tau_sleepiness(&s).is_empty() {
            return s;
        }
    }
    s.sleep.clear();
    s
}
