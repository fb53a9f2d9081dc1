//! Seeded shuffling shared by option permutation and few-shot sampling.
//!
//! The generator is ChaCha8 seeded through `SeedableRng::seed_from_u64`, and
//! shuffles are an explicit Fisher–Yates pass drawing `next_u64() % (i + 1)`
//! for `i` from `n - 1` down to 1. Both steps are fixed here rather than
//! delegated to `rand`'s shuffle helpers so the orders stay stable across
//! crate upgrades and can be reproduced elsewhere.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// In-place Fisher–Yates shuffle.
pub fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}

/// Permutation of `0..n` for `seed`; seed 0 is the identity.
pub fn seeded_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if seed != 0 {
        shuffle(&mut order, &mut rng(seed));
    }
    order
}

pub fn invert_permutation(order: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        inv[old] = new;
    }
    inv
}
