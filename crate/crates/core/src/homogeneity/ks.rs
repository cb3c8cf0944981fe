use crate::error::{Error, Result};
use crate::stats::{kolmogorov_sf, TestResult};

fn sorted(v: &[f64]) -> Result<Vec<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("KS test needs finite values".into()));
    }
    let mut s = v.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    Ok(s)
}

/// `sup |F_x - F_y|` over the merged support. Both inputs must be sorted.
pub fn ks_statistic(x: &[f64], y: &[f64]) -> f64 {
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        // step both ECDFs past every copy of v before comparing
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value
/// `Q(D sqrt(n m / (n + m)))`.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InsufficientSample {
            needed: 1,
            got: x.len().min(y.len()),
        });
    }
    let (xs, ys) = (sorted(x)?, sorted(y)?);
    let d = ks_statistic(&xs, &ys);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let lambda = d * (n * m / (n + m)).sqrt();
    Ok(
        TestResult::new("ks_two_sample", d, None, kolmogorov_sf(lambda))
            .with("lambda", lambda)
            .with("n_x", x.len())
            .with("n_y", y.len()),
    )
}
