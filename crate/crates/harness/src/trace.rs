//! Seeded arrival sequences for the online butterfly experiment.

use misnc_core::MulticastRequest;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::butterfly::{session_a, session_b};

/// `count_a` copies of session A and `count_b` of session B, uniformly
/// shuffled. Ids are `a<k>` / `b<k>` in generation order.
pub fn generate_online_trace(
    seed: u64,
    count_a: usize,
    count_b: usize,
    size: f64,
) -> Vec<MulticastRequest> {
    let mut trace: Vec<MulticastRequest> = (1..=count_a)
        .map(|k| session_a(format!("a{k}"), size))
        .chain((1..=count_b).map(|k| session_b(format!("b{k}"), size)))
        .collect();
    trace.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    trace
}
