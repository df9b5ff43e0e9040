//! Deterministic fixtures shared by the criterion benches.

use rand::Rng;

use semalloc_core::auction::{objective::RevenueObjective, MonotoneNet, TrainConfig};
use semalloc_core::metrics::{TokenSeq, TraceEvent};
use semalloc_core::rng::{stream, stream_rng};
use semalloc_core::{Bid, StateTrace};

const WORDS: [&str; 12] = [
    "the", "device", "harvests", "energy", "from", "access", "point", "and", "sends", "a", "short", "sentence",
];

/// Nets shaped like the default training setup, with jittered extra units.
pub fn nets(bidders: usize, seed: u64) -> Vec<MonotoneNet> {
    let cfg = TrainConfig::default();
    let mut rng = stream_rng(seed, stream::NET_INIT);
    (0..bidders)
        .map(|_| MonotoneNet::identity_with_noise(cfg.groups, cfg.units, 0.3, &mut rng))
        .collect()
}

/// `count` bid profiles of `bidders` uniform values each.
pub fn profiles(bidders: usize, count: usize, seed: u64) -> Vec<Vec<Bid>> {
    let mut rng = stream_rng(seed, stream::EVAL);
    (0..count)
        .map(|_| {
            let values: Vec<f64> = (0..bidders).map(|_| rng.random()).collect();
            Bid::profile(&values).expect("values are finite and non-negative")
        })
        .collect()
}

/// Training objective at the default shape with a sampled batch loaded.
pub fn objective(bidders: usize, batch: usize, seed: u64) -> RevenueObjective {
    let cfg = TrainConfig::default();
    let mut obj = RevenueObjective::new(bidders, cfg.groups, cfg.units, batch).expect("valid shape");
    obj.set_nets(&nets(bidders, seed)).expect("matching shape");
    let mut rng = stream_rng(seed, stream::TRAIN);
    let values: Vec<f64> = (0..bidders * batch).map(|_| rng.random()).collect();
    obj.set_profiles(&values).expect("matching batch");
    obj.set_temperature(cfg.temperature_start);
    obj
}

/// A sentence of `len` words from a small vocabulary.
pub fn sentence(len: usize, seed: u64) -> TokenSeq {
    let mut rng = stream_rng(seed, stream::EVAL);
    TokenSeq::new((0..len).map(|_| WORDS[rng.random_range(0..WORDS.len())]))
}

/// Receiver trace with `events` change points and a binary source.
pub fn trace(events: usize, seed: u64) -> StateTrace {
    let mut rng = stream_rng(seed, stream::EVAL);
    let mut t = 0.0;
    let mut generation = 0.0;
    let events = (0..events.max(1))
        .map(|i| {
            if i > 0 {
                t += rng.random_range(0.1..1.0);
                generation = rng.random_range(generation..=t);
            }
            let bit = |b: bool| if b { "1" } else { "0" };
            TraceEvent::new(t, bit(rng.random()), bit(rng.random()), generation)
        })
        .collect();
    StateTrace::new(events).expect("generated trace is ordered")
}
