//! Counter-based random streams.
//!
//! Every draw is a pure function of `(master seed, stream id, counter)`,
//! computed with the Philox4x32-10 block function. A simulation that assigns
//! stream ids by work item (run index, setting/bin pair, restart index) gets
//! the same numbers no matter how the items are scheduled across threads.
//!
//! Stream id conventions used throughout the crate:
//!
//! * breakdown device: `stream_id = run_id`
//! * Eberhard simulator: `stream_id = setting_index * 1_000_000 + bin`
//! * optimizer restarts: `stream_id = restart index`

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

/// 2^-53, the spacing of the doubles produced by [`RandomStream::next_uniform`].
const INV_2_53: f64 = 1.0 / (1u64 << 53) as f64;

/// Top-level seed of a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct MasterSeed(pub u64);

impl From<u64> for MasterSeed {
    fn from(value: u64) -> Self {
        MasterSeed(value)
    }
}

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// The Philox4x32 block function with 10 rounds.
#[inline]
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, c[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// A single-owner position in the counter space of one stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomStream {
    master: MasterSeed,
    stream_id: u64,
    counter: u64,
}

/// Returns a stream positioned at counter 0.
pub fn make_stream(seed: MasterSeed, stream_id: u64) -> RandomStream {
    RandomStream::new(seed, stream_id)
}

impl RandomStream {
    pub fn new(master: MasterSeed, stream_id: u64) -> Self {
        Self {
            master,
            stream_id,
            counter: 0,
        }
    }

    pub fn master(&self) -> MasterSeed {
        self.master
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// A copy of this stream moved `offset` draws ahead. Constant time.
    pub fn jumped(&self, offset: u64) -> Self {
        Self {
            counter: self.counter.wrapping_add(offset),
            ..self.clone()
        }
    }

    /// Raw 64 bits; advances the counter by one.
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let seed = self.master.0;
        let block = philox4x32_10(
            [
                self.counter as u32,
                (self.counter >> 32) as u32,
                self.stream_id as u32,
                (self.stream_id >> 32) as u32,
            ],
            [seed as u32, (seed >> 32) as u32],
        );
        self.counter = self.counter.wrapping_add(1);
        (u64::from(block[0]) << 32) | u64::from(block[1])
    }

    /// Uniform double in `[0, 1)` with 53 random mantissa bits.
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * INV_2_53
    }

    /// Uniform integer in `0..bound` (Lemire's multiply-shift with rejection).
    ///
    /// Usually one draw; rejection adds more with probability below `bound / 2^64`.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "next_below requires a positive bound");
        let mut m = u128::from(self.next_u64()) * u128::from(bound);
        if (m as u64) < bound {
            let threshold = bound.wrapping_neg() % bound;
            while (m as u64) < threshold {
                m = u128::from(self.next_u64()) * u128::from(bound);
            }
        }
        (m >> 64) as u64
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// Inverse-CDF sampler over a fixed finite weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl Categorical {
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("empty weight vector".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "weights must be finite and non-negative, found {w}"
            )));
        }
        let mut total = 0.0;
        let cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                total += w;
                total
            })
            .collect();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        let last_positive = weights.iter().rposition(|w| *w > 0.0).unwrap_or(0);
        Ok(Self {
            cumulative,
            last_positive,
        })
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    /// Draws one index; consumes exactly one uniform.
    #[inline]
    pub fn sample(&self, stream: &mut RandomStream) -> usize {
        let total = self.cumulative[self.cumulative.len() - 1];
        let x = stream.next_uniform() * total;
        self.cumulative
            .iter()
            .position(|&c| c > x)
            .unwrap_or(self.last_positive)
    }
}

/// Draws index `i` with probability `weights[i] / sum(weights)`.
pub fn sample_categorical(stream: &mut RandomStream, weights: &[f64]) -> Result<usize> {
    Ok(Categorical::new(weights)?.sample(stream))
}
