//! Fixtures shared by the criterion benches.

use shl_core::rng::{make_stream, MasterSeed};

/// `n` uniform draws from a fixed stream.
pub fn uniform_series(n: usize, seed: u64) -> Vec<f64> {
    let mut s = make_stream(MasterSeed(seed), 0);
    (0..n).map(|_| s.next_uniform()).collect()
}
