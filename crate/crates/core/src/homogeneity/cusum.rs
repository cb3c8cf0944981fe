use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::stats::TestResult;

const MIN_LEN: usize = 50;
const MIN_PERM: usize = 99;

/// Counter space reserved for each permutation's shuffle.
const PERM_STRIDE: u64 = 1 << 40;

/// `(max_k |S_k|, argmax k)` for the cumulative sums of already-centred values.
/// `k` is 1-based: the number of leading values in the prefix.
pub fn cusum_statistic(centred: &[f64]) -> (f64, usize) {
    let mut s = 0.0;
    let mut best = 0.0;
    let mut at = 0;
    for (i, v) in centred.iter().enumerate() {
        s += v;
        if s.abs() > best {
            best = s.abs();
            at = i + 1;
        }
    }
    (best, at)
}

/// A sequence with at most 256 distinct values, stored as byte codes.
struct Coded {
    codes: Vec<u8>,
    values: Vec<f64>,
}

impl Coded {
    fn new(x: &[f64]) -> Option<Self> {
        let mut values: Vec<f64> = Vec::new();
        let mut codes = Vec::with_capacity(x.len());
        for v in x {
            let code = match values.iter().position(|u| u.to_bits() == v.to_bits()) {
                Some(c) => c,
                None if values.len() < 256 => {
                    values.push(*v);
                    values.len() - 1
                }
                None => return None,
            };
            codes.push(code as u8);
        }
        Some(Self { codes, values })
    }

    fn cusum_max(&self, codes: &[u8]) -> f64 {
        let mut s = 0.0;
        let mut best = 0.0f64;
        for &c in codes {
            s += self.values[usize::from(c)];
            best = best.max(f64::abs(s));
        }
        best
    }
}

/// CUSUM change-point scan with a permutation p-value.
///
/// Permutation `j` shuffles with `stream` jumped by `j * 2^40` draws, so the
/// result does not depend on how the permutations are spread over threads.
/// On return `stream` sits past all counters used.
pub fn cusum_changepoint(
    x: &[f64],
    n_perm: usize,
    stream: &mut RandomStream,
) -> Result<TestResult> {
    if x.len() < MIN_LEN {
        return Err(Error::InsufficientSample {
            needed: MIN_LEN,
            got: x.len(),
        });
    }
    if n_perm < MIN_PERM {
        return Err(Error::Precondition(format!(
            "CUSUM needs at least {MIN_PERM} permutations, got {n_perm}"
        )));
    }
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::DegenerateSequence(
            "CUSUM needs non-zero variance".into(),
        ));
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let centred: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let (observed, change_point) = cusum_statistic(&centred);
    let threshold = observed * (1.0 - 1e-12);

    let base = stream.clone();
    let exceeds = |j: usize, buf: &mut [f64]| {
        let mut s = base.jumped(j as u64 * PERM_STRIDE);
        s.shuffle(buf);
        cusum_statistic(buf).0 >= threshold
    };
    let exceed = match Coded::new(&centred) {
        // Same draws as shuffling the values, on an 8x smaller buffer.
        Some(coded) => (0..n_perm)
            .into_par_iter()
            .map_init(
                || coded.codes.clone(),
                |buf, j| {
                    buf.copy_from_slice(&coded.codes);
                    let mut s = base.jumped(j as u64 * PERM_STRIDE);
                    s.shuffle(buf);
                    coded.cusum_max(buf) >= threshold
                },
            )
            .filter(|&hit| hit)
            .count(),
        None => (0..n_perm)
            .into_par_iter()
            .map_init(
                || centred.clone(),
                |buf, j| {
                    buf.copy_from_slice(&centred);
                    exceeds(j, buf)
                },
            )
            .filter(|&hit| hit)
            .count(),
    };
    *stream = base.jumped(n_perm as u64 * PERM_STRIDE);

    let p = (exceed + 1) as f64 / (n_perm + 1) as f64;
    Ok(TestResult::new("cusum_changepoint", observed, None, p)
        .with("change_point", change_point)
        .with("exceedances", exceed)
        .with("n_perm", n_perm))
}
