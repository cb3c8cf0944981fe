use crate::error::{Error, Result};
use crate::stats::{normal_sf, TestResult};

const MIN_LEN: usize = 30;

/// Lag-1 autocorrelation test, `z = r1 sqrt(n)`.
///
/// `detail["sem_inflation"]` is `sqrt((1 + r1) / (1 - r1))`, the factor by
/// which an AR(1)-like dependence inflates the naive SEM.
pub fn lag1_autocorr_test(x: &[f64]) -> Result<TestResult> {
    let n = x.len();
    if n < MIN_LEN {
        return Err(Error::InsufficientSample {
            needed: MIN_LEN,
            got: n,
        });
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let denom: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    if x.iter().all(|&v| v == x[0]) || !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::DegenerateSequence(
            "lag-1 autocorrelation needs non-zero variance".into(),
        ));
    }
    let numer: f64 = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    let r1 = numer / denom;
    let z = r1 * (n as f64).sqrt();
    Ok(
        TestResult::new("lag1_autocorr", z, None, 2.0 * normal_sf(z.abs()))
            .with("r1", r1)
            .with("sem_inflation", sem_inflation(r1)),
    )
}

/// SEM inflation factor for a given lag-1 autocorrelation.
pub fn sem_inflation(r1: f64) -> f64 {
    if r1 >= 1.0 {
        f64::MAX
    } else {
        ((1.0 + r1) / (1.0 - r1)).max(0.0).sqrt()
    }
}
