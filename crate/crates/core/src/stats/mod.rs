//! Descriptive statistics, SEM-based significance and distribution-free
//! confidence bounds.

mod special;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use special::{chi2_sf, erfc, gamma_pq, kolmogorov_sf, ln_gamma, normal_sf};

/// Mean, sample standard deviation and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceSummary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation, `n - 1` divisor.
    pub s: f64,
    /// `s / sqrt(n)`.
    pub sem: f64,
    /// Signed `mean / sem`. When `s == 0` this is `+-inf` (or 0 for a zero
    /// mean) and `degenerate` is set.
    pub k_sigma: f64,
    pub degenerate: bool,
}

impl SignificanceSummary {
    /// `|k_sigma|`, the "k sigma" of a deviation from zero.
    pub fn abs_k(&self) -> f64 {
        self.k_sigma.abs()
    }
}

pub fn summarize(sample: &[f64]) -> Result<SignificanceSummary> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::InsufficientSample { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = sample.iter().sum::<f64>() / nf;
    // corrected two-pass variance
    let (ss, comp) = sample.iter().fold((0.0, 0.0), |(ss, c), &x| {
        let d = x - mean;
        (ss + d * d, c + d)
    });
    let var = ((ss - comp * comp / nf) / (nf - 1.0)).max(0.0);
    let s = var.sqrt();
    let sem = s / nf.sqrt();
    let degenerate = s == 0.0;
    let k_sigma = if degenerate {
        if mean > 0.0 {
            f64::INFINITY
        } else if mean < 0.0 {
            f64::NEG_INFINITY
        } else {
            0.0
        }
    } else {
        mean / sem
    };
    Ok(SignificanceSummary {
        n,
        mean,
        s,
        sem,
        k_sigma,
        degenerate,
    })
}

fn check_k(k: f64) -> Result<()> {
    if k > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "confidence bound needs k > 0, got {k}"
        )))
    }
}

/// Two-sided Chebyshev lower bound on the confidence of a `k`-SEM
/// deviation: `max(0, 1 - 1/k^2)`.
pub fn chebyshev_confidence(k: f64) -> Result<f64> {
    check_k(k)?;
    Ok((1.0 - 1.0 / (k * k)).max(0.0))
}

/// One-sided Cantelli bound: `1 - 1/(1 + k^2)`.
pub fn cantelli_confidence(k: f64) -> Result<f64> {
    check_k(k)?;
    Ok(1.0 - 1.0 / (1.0 + k * k))
}

/// Annotation value attached to a [`TestResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Detail {
    Int(i64),
    Num(f64),
    Text(String),
    List(Vec<i64>),
}

impl From<f64> for Detail {
    fn from(v: f64) -> Self {
        Detail::Num(v)
    }
}

impl From<usize> for Detail {
    fn from(v: usize) -> Self {
        Detail::Int(v as i64)
    }
}

impl From<i64> for Detail {
    fn from(v: i64) -> Self {
        Detail::Int(v)
    }
}

impl From<&str> for Detail {
    fn from(v: &str) -> Self {
        Detail::Text(v.to_owned())
    }
}

impl From<String> for Detail {
    fn from(v: String) -> Self {
        Detail::Text(v)
    }
}

impl From<Vec<i64>> for Detail {
    fn from(v: Vec<i64>) -> Self {
        Detail::List(v)
    }
}

/// Outcome of one significance test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    pub dof: Option<u64>,
    /// Always within `[0, 1]`.
    pub p_value: f64,
    #[serde(default)]
    pub detail: BTreeMap<String, Detail>,
}

impl TestResult {
    pub fn new(name: impl Into<String>, statistic: f64, dof: Option<u64>, p_value: f64) -> Self {
        debug_assert!(statistic.is_finite(), "test statistic must be finite");
        Self {
            name: name.into(),
            statistic,
            dof,
            p_value: p_value.clamp(0.0, 1.0),
            detail: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Detail>) -> Self {
        self.detail.insert(key.to_owned(), value.into());
        self
    }
}
