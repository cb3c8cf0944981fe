use crate::error::{Error, Result};
use crate::stats::{normal_sf, TestResult};

const MIN_LEN: usize = 20;

pub(crate) fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    let n = v.len();
    let mid = n / 2;
    let (_, upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Wald-Wolfowitz runs test above/below the median.
///
/// Values equal to the median are discarded before counting runs.
pub fn runs_test(x: &[f64]) -> Result<TestResult> {
    if x.len() < MIN_LEN {
        return Err(Error::InsufficientSample {
            needed: MIN_LEN,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("runs test needs finite values".into()));
    }
    let med = median(x);
    let mut above = 0u64;
    let mut below = 0u64;
    let mut runs = 0u64;
    let mut last: Option<bool> = None;
    for &v in x {
        if v == med {
            continue;
        }
        let side = v > med;
        if side {
            above += 1;
        } else {
            below += 1;
        }
        if last != Some(side) {
            runs += 1;
            last = Some(side);
        }
    }
    if above == 0 || below == 0 {
        return Err(Error::DegenerateSequence(format!(
            "runs test needs values on both sides of the median ({above} above, {below} below)"
        )));
    }
    let (n1, n2) = (above as f64, below as f64);
    let n = n1 + n2;
    let mean = 2.0 * n1 * n2 / n + 1.0;
    let var = 2.0 * n1 * n2 * (2.0 * n1 * n2 - n1 - n2) / (n * n * (n - 1.0));
    if !(var > 0.0) {
        return Err(Error::DegenerateSequence(
            "runs count has zero variance".into(),
        ));
    }
    let z = (runs as f64 - mean) / var.sqrt();
    Ok(
        TestResult::new("runs_test", z, None, 2.0 * normal_sf(z.abs()))
            .with("runs", runs as i64)
            .with("n_above", above as i64)
            .with("n_below", below as i64)
            .with("median", med)
            .with("discarded_ties", (x.len() as u64 - above - below) as i64),
    )
}
