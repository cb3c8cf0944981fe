//! Sample homogeneity and independence tests.
//!
//! A significance test on a pooled sample is only meaningful when the
//! sample is simple random: trials independent (checked here by the runs
//! test and lag-1 autocorrelation) and identically distributed (checked by
//! chi-square homogeneity across runs, two-sample KS, and a CUSUM
//! change-point scan). [`audit`] runs the whole battery under a Bonferroni
//! correction and reduces it to a [`Verdict`].

mod autocorr;
mod chi2;
mod cusum;
mod ks;
mod runs;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::stats::TestResult;

pub use autocorr::{lag1_autocorr_test, sem_inflation};
pub use chi2::chi2_homogeneity;
pub use cusum::{cusum_changepoint, cusum_statistic};
pub use ks::{ks_statistic, ks_two_sample};
pub use runs::runs_test;

/// Permutations used by [`audit`] when the caller does not choose.
pub const DEFAULT_PERMUTATIONS: usize = 199;

/// Outcomes of one run, either category indices `1..=m` or real values.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcomes {
    Categorical(Vec<u32>),
    Real(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeKind {
    Categorical,
    Real,
}

impl Outcomes {
    pub fn kind(&self) -> OutcomeKind {
        match self {
            Outcomes::Categorical(_) => OutcomeKind::Categorical,
            Outcomes::Real(_) => OutcomeKind::Real,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Outcomes::Categorical(v) => v.len(),
            Outcomes::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values as reals; categories map to their index.
    pub fn to_reals(&self) -> Vec<f64> {
        match self {
            Outcomes::Categorical(v) => v.iter().map(|&c| f64::from(c)).collect(),
            Outcomes::Real(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSample {
    pub run_id: u64,
    pub outcomes: Outcomes,
}

impl RunSample {
    pub fn categorical(run_id: u64, outcomes: Vec<u32>) -> Self {
        Self {
            run_id,
            outcomes: Outcomes::Categorical(outcomes),
        }
    }

    pub fn real(run_id: u64, values: Vec<f64>) -> Self {
        Self {
            run_id,
            outcomes: Outcomes::Real(values),
        }
    }
}

/// Ordered runs of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSet {
    pub runs: Vec<RunSample>,
    /// Number of categories for categorical runs.
    pub m: Option<usize>,
}

impl RunSet {
    /// Checks that runs are non-empty and categorical outcomes lie in `1..=m`.
    pub fn new(runs: Vec<RunSample>, m: Option<usize>) -> Result<Self> {
        for run in &runs {
            if run.outcomes.is_empty() {
                return Err(Error::Precondition(format!("run {} is empty", run.run_id)));
            }
            if let (Outcomes::Categorical(v), Some(m)) = (&run.outcomes, m) {
                if let Some(bad) = v.iter().find(|&&c| c == 0 || c as usize > m) {
                    return Err(Error::Precondition(format!(
                        "run {}: category {bad} outside 1..={m}",
                        run.run_id
                    )));
                }
            }
        }
        Ok(Self { runs, m })
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// Common kind of all runs.
    pub fn kind(&self) -> Result<OutcomeKind> {
        let first = self
            .runs
            .first()
            .ok_or_else(|| Error::Precondition("run set is empty".into()))?
            .outcomes
            .kind();
        match self.runs.iter().find(|r| r.outcomes.kind() != first) {
            Some(r) => Err(Error::MixedKinds(format!(
                "run {} is {:?}, expected {first:?}",
                r.run_id,
                r.outcomes.kind()
            ))),
            None => Ok(first),
        }
    }

    /// All runs back to back, as reals.
    pub fn concatenated(&self) -> Vec<f64> {
        let total = self.runs.iter().map(|r| r.outcomes.len()).sum();
        let mut out = Vec::with_capacity(total);
        for run in &self.runs {
            match &run.outcomes {
                Outcomes::Categorical(v) => out.extend(v.iter().map(|&c| f64::from(c))),
                Outcomes::Real(v) => out.extend_from_slice(v),
            }
        }
        out
    }
}

/// Runs x categories table of counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<u64>>,
}

impl ContingencyTable {
    pub fn new(counts: Vec<Vec<u64>>) -> Result<Self> {
        let width = counts.first().map_or(0, Vec::len);
        if counts.iter().any(|row| row.len() != width) {
            return Err(Error::Precondition("ragged contingency table".into()));
        }
        Ok(Self { counts })
    }

    pub fn rows(&self) -> usize {
        self.counts.len()
    }

    pub fn cols(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.cols())
            .map(|c| self.counts.iter().map(|r| r[c]).sum())
            .collect()
    }
}

/// Counts category occurrences per run.
pub fn tabulate(rs: &RunSet) -> Result<ContingencyTable> {
    if rs.kind()? != OutcomeKind::Categorical {
        return Err(Error::MixedKinds("tabulate needs categorical runs".into()));
    }
    if rs.len() < 2 {
        return Err(Error::Precondition(format!(
            "homogeneity testing needs at least 2 runs, got {}",
            rs.len()
        )));
    }
    let m = match rs.m {
        Some(m) => m,
        None => rs
            .runs
            .iter()
            .filter_map(|r| match &r.outcomes {
                Outcomes::Categorical(v) => v.iter().max().copied(),
                Outcomes::Real(_) => None,
            })
            .max()
            .unwrap_or(0) as usize,
    };
    let mut counts = Vec::with_capacity(rs.len());
    for run in &rs.runs {
        let Outcomes::Categorical(v) = &run.outcomes else {
            unreachable!("kind checked above")
        };
        let mut row = vec![0u64; m];
        for &c in v {
            if c == 0 || c as usize > m {
                return Err(Error::Precondition(format!(
                    "run {}: category {c} outside 1..={m}",
                    run.run_id
                )));
            }
            row[c as usize - 1] += 1;
        }
        counts.push(row);
    }
    ContingencyTable::new(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Homogeneous,
    Inhomogeneous,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Homogeneous => "HOMOGENEOUS",
            Verdict::Inhomogeneous => "INHOMOGENEOUS",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// A test that errored or was not applicable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFailure {
    pub name: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityReport {
    pub results: Vec<TestResult>,
    /// Tests that were attempted and errored.
    #[serde(default)]
    pub errors: Vec<TestFailure>,
    /// Tests left out because the sample is too short for them.
    #[serde(default)]
    pub skipped: Vec<TestFailure>,
    pub alpha: f64,
    pub corrected_alpha: f64,
    pub verdict: Verdict,
}

impl HomogeneityReport {
    /// Bonferroni-corrects over every attempted test and derives the verdict.
    ///
    /// A rejection by any test gives `Inhomogeneous` even if another test
    /// errored; otherwise any error gives `Inconclusive`.
    pub fn evaluate(alpha: f64, attempts: Vec<(String, Result<TestResult>)>) -> Self {
        let attempted = attempts.len();
        let corrected_alpha = if attempted == 0 {
            alpha
        } else {
            alpha / attempted as f64
        };
        let mut results = Vec::new();
        let mut errors = Vec::new();
        for (name, outcome) in attempts {
            match outcome {
                Ok(r) => results.push(r),
                Err(e) => errors.push(TestFailure {
                    name,
                    reason: e.to_string(),
                }),
            }
        }
        let verdict = if results.iter().any(|r| r.p_value < corrected_alpha) {
            Verdict::Inhomogeneous
        } else if !errors.is_empty() || attempted == 0 {
            Verdict::Inconclusive
        } else {
            Verdict::Homogeneous
        };
        Self {
            results,
            errors,
            skipped: Vec::new(),
            alpha,
            corrected_alpha,
            verdict,
        }
    }

    pub fn result(&self, name: &str) -> Option<&TestResult> {
        self.results.iter().find(|r| r.name == name)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

/// Runs the battery with [`DEFAULT_PERMUTATIONS`] CUSUM permutations.
pub fn audit(rs: &RunSet, alpha: f64, stream: &mut RandomStream) -> Result<HomogeneityReport> {
    audit_with(rs, alpha, DEFAULT_PERMUTATIONS, stream)
}

/// Audits a run set.
///
/// Categorical runs get a chi-square homogeneity test on the run x category
/// table; real-valued runs get one KS test per run against the pooled
/// sample. The concatenated sequence then goes through the runs test,
/// lag-1 autocorrelation and the CUSUM permutation scan.
pub fn audit_with(
    rs: &RunSet,
    alpha: f64,
    n_perm: usize,
    stream: &mut RandomStream,
) -> Result<HomogeneityReport> {
    check_alpha(alpha)?;
    if rs.len() < 2 {
        return Err(Error::Precondition(format!(
            "homogeneity audit needs at least 2 runs, got {}",
            rs.len()
        )));
    }
    let kind = rs.kind()?;
    let mut attempts = Vec::new();
    match kind {
        OutcomeKind::Categorical => {
            let outcome = tabulate(rs).and_then(|t| chi2_homogeneity(&t));
            attempts.push(("chi2_homogeneity".to_owned(), outcome));
        }
        OutcomeKind::Real => {
            let pooled = rs.concatenated();
            for run in &rs.runs {
                let name = format!("ks_two_sample[run {}]", run.run_id);
                let outcome = ks_two_sample(&run.outcomes.to_reals(), &pooled).map(|mut r| {
                    r.name = name.clone();
                    r
                });
                attempts.push((name, outcome));
            }
        }
    }
    let sequence = rs.concatenated();
    attempts.push(("runs_test".to_owned(), runs_test(&sequence)));
    attempts.push(("lag1_autocorr".to_owned(), lag1_autocorr_test(&sequence)));
    attempts.push((
        "cusum_changepoint".to_owned(),
        cusum_changepoint(&sequence, n_perm, stream),
    ));
    Ok(HomogeneityReport::evaluate(alpha, attempts))
}

/// Minimum lengths below which [`audit_series`] skips a test.
const RUNS_MIN: usize = 20;
const LAG1_MIN: usize = 30;
const CUSUM_MIN: usize = 50;

/// Audits one short real-valued series, such as per-bin J values.
///
/// KS compares the first and second halves; runs, lag-1 and CUSUM run on
/// the whole series. Tests whose minimum length exceeds the series length
/// are recorded in `skipped` instead of erroring.
pub fn audit_series(
    x: &[f64],
    alpha: f64,
    n_perm: usize,
    stream: &mut RandomStream,
) -> Result<HomogeneityReport> {
    check_alpha(alpha)?;
    if x.len() < 2 {
        return Err(Error::InsufficientSample {
            needed: 2,
            got: x.len(),
        });
    }
    let mut attempts = Vec::new();
    let mut skipped = Vec::new();
    let (first, second) = x.split_at(x.len() / 2);
    attempts.push((
        "ks_two_sample[halves]".to_owned(),
        ks_two_sample(first, second).map(|mut r| {
            r.name = "ks_two_sample[halves]".into();
            r
        }),
    ));
    let mut skip = |name: &str, min: usize| {
        skipped.push(TestFailure {
            name: name.to_owned(),
            reason: format!("needs at least {min} values, series has {}", x.len()),
        })
    };
    if x.len() >= RUNS_MIN {
        attempts.push(("runs_test".to_owned(), runs_test(x)));
    } else {
        skip("runs_test", RUNS_MIN);
    }
    if x.len() >= LAG1_MIN {
        attempts.push(("lag1_autocorr".to_owned(), lag1_autocorr_test(x)));
    } else {
        skip("lag1_autocorr", LAG1_MIN);
    }
    if x.len() >= CUSUM_MIN {
        attempts.push((
            "cusum_changepoint".to_owned(),
            cusum_changepoint(x, n_perm, stream),
        ));
    } else {
        skip("cusum_changepoint", CUSUM_MIN);
    }
    let mut report = HomogeneityReport::evaluate(alpha, attempts);
    report.skipped = skipped;
    Ok(report)
}
