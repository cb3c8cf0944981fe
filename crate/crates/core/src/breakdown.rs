//! Six-outcome device whose runs come from different internal contexts.
//!
//! Every run on its own rejects (or clearly accepts) `H0: 1 - B >= 0` by
//! thousands of standard errors, while the pooled sample sits within about
//! one SEM of zero. Nothing is wrong with any single run; the pooled sample
//! simply is not identically distributed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homogeneity::{RunSample, RunSet};
use crate::rng::{make_stream, Categorical, MasterSeed};
use crate::stats::{summarize, SignificanceSummary};

/// Number of distinct device outputs.
pub const OUTCOMES: usize = 6;

/// Outcome distribution of one internal context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSpec {
    pub label: String,
    pub probs: [f64; OUTCOMES],
}

impl ContextSpec {
    pub fn new(label: impl Into<String>, probs: [f64; OUTCOMES]) -> Result<Self> {
        let spec = Self {
            label: label.into(),
            probs,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "context {}: probabilities must be non-negative",
                self.label
            )));
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() >= 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "context {}: probabilities sum to {total}, not 1",
                self.label
            )));
        }
        Ok(())
    }

    /// `E[f]` and `sd[f]` under this context.
    pub fn moments(&self, f: &[f64; OUTCOMES]) -> (f64, f64) {
        let mean: f64 = self.probs.iter().zip(f).map(|(p, v)| p * v).sum();
        let var: f64 = self
            .probs
            .iter()
            .zip(f)
            .map(|(p, v)| p * (v - mean) * (v - mean))
            .sum();
        (mean, var.sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownConfig {
    /// Weight of each outcome; `B` is the run mean of `f(x)`.
    pub f: [f64; OUTCOMES],
    pub contexts: Vec<ContextSpec>,
    /// Context label of each run, in run order.
    pub schedule: Vec<String>,
    pub runs: usize,
    pub items_per_run: usize,
}

pub const DEFAULT_F: [f64; OUTCOMES] = [0.86, 0.93, 1.00, 1.07, 1.14, 1.21];

fn default_contexts() -> Vec<ContextSpec> {
    vec![
        ContextSpec {
            label: "H".into(),
            probs: [0.0, 0.0, 0.01, 0.98, 0.01, 0.0],
        },
        ContextSpec {
            label: "L".into(),
            probs: [0.01, 0.98, 0.01, 0.0, 0.0, 0.0],
        },
    ]
}

/// `H` on odd run ids and `L` on even ones, with runs 49 and 50 swapped
/// (when present) so that runs 25, 50 and 75 are all `H` and the split
/// stays balanced.
pub fn alternating_schedule(runs: usize) -> Vec<String> {
    let mut schedule: Vec<String> = (1..=runs)
        .map(|id| if id % 2 == 1 { "H" } else { "L" }.to_owned())
        .collect();
    if runs >= 50 {
        schedule.swap(48, 49);
    }
    schedule
}

/// 100 runs of 10^5 items, alternating `H` (`E[f] = 1.07`) and `L`
/// (`E[f] = 0.93`) contexts.
///
/// Within either context `sd[f] ~ 0.0099`, so a single run misses
/// `1 - B = 0` by about `0.07 * sqrt(1e5) / 0.0099 ~ 2236` SEM while the
/// balanced pool averages to `E[1 - B] = 0`.
pub fn default_config() -> BreakdownConfig {
    BreakdownConfig::alternating(100, 100_000)
}

impl BreakdownConfig {
    /// Default `f` and contexts with [`alternating_schedule`].
    pub fn alternating(runs: usize, items_per_run: usize) -> Self {
        Self {
            f: DEFAULT_F,
            contexts: default_contexts(),
            schedule: alternating_schedule(runs),
            runs,
            items_per_run,
        }
    }

    /// Default `f` and contexts, every run in context `label`.
    pub fn single_context(label: &str, runs: usize, items_per_run: usize) -> Self {
        Self {
            f: DEFAULT_F,
            contexts: default_contexts(),
            schedule: vec![label.to_owned(); runs],
            runs,
            items_per_run,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.f.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("f must be finite".into()));
        }
        for c in &self.contexts {
            c.validate()?;
        }
        if self.schedule.len() != self.runs {
            return Err(Error::InvalidConfig(format!(
                "schedule has {} entries for {} runs",
                self.schedule.len(),
                self.runs
            )));
        }
        if let Some(missing) = self
            .schedule
            .iter()
            .find(|l| !self.contexts.iter().any(|c| &c.label == *l))
        {
            return Err(Error::InvalidConfig(format!(
                "schedule names unknown context {missing}"
            )));
        }
        if self.items_per_run < 2 {
            return Err(Error::InvalidConfig(
                "items_per_run must be at least 2".into(),
            ));
        }
        Ok(())
    }

    pub fn context(&self, label: &str) -> Option<&ContextSpec> {
        self.contexts.iter().find(|c| c.label == label)
    }
}

/// Significance of one run against `H0: 1 - B >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: u64,
    pub context: String,
    /// Summary of the per-item values `1 - f(x)`.
    pub summary: SignificanceSummary,
    pub one_minus_b: f64,
    /// `(1 - B) / SEM`.
    pub k_sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreakdownResult {
    pub per_run: Vec<RunSummary>,
    /// Summary of `1 - f(x)` over every item of every run.
    pub pooled: SignificanceSummary,
    pub runset: RunSet,
}

impl BreakdownResult {
    pub fn run(&self, run_id: u64) -> Option<&RunSummary> {
        self.per_run.iter().find(|r| r.run_id == run_id)
    }
}

/// Mean of `f(x)` over a run of outcomes in `1..=6`.
pub fn b_statistic(f: &[f64; OUTCOMES], outcomes: &[u32]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::InsufficientSample { needed: 1, got: 0 });
    }
    let mut sum = 0.0;
    for &x in outcomes {
        if x == 0 || x as usize > OUTCOMES {
            return Err(Error::Precondition(format!("outcome {x} outside 1..=6")));
        }
        sum += f[x as usize - 1];
    }
    Ok(sum / outcomes.len() as f64)
}

/// Simulates every run and summarises each one and the pool.
///
/// Run ids are 1-based and double as stream ids.
pub fn run_experiment(cfg: &BreakdownConfig, seed: MasterSeed) -> Result<BreakdownResult> {
    cfg.validate()?;
    let samplers = cfg
        .contexts
        .iter()
        .map(|c| Ok((c.label.as_str(), Categorical::new(&c.probs)?)))
        .collect::<Result<Vec<_>>>()?;

    let runs: Vec<(u64, Vec<u32>)> = cfg
        .schedule
        .par_iter()
        .enumerate()
        .map(|(i, label)| {
            let run_id = i as u64 + 1;
            let sampler = &samplers
                .iter()
                .find(|(l, _)| l == label)
                .expect("schedule validated")
                .1;
            let mut stream = make_stream(seed, run_id);
            let outcomes = (0..cfg.items_per_run)
                .map(|_| sampler.sample(&mut stream) as u32 + 1)
                .collect();
            (run_id, outcomes)
        })
        .collect();

    let deviation = |x: u32| 1.0 - cfg.f[x as usize - 1];
    let per_run = runs
        .iter()
        .zip(&cfg.schedule)
        .map(|((run_id, outcomes), label)| {
            let values: Vec<f64> = outcomes.iter().map(|&x| deviation(x)).collect();
            let summary = summarize(&values)?;
            Ok(RunSummary {
                run_id: *run_id,
                context: label.clone(),
                summary,
                one_minus_b: summary.mean,
                k_sigma: summary.k_sigma,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let pooled_values: Vec<f64> = runs
        .iter()
        .flat_map(|(_, o)| o.iter().map(|&x| deviation(x)))
        .collect();
    let pooled = summarize(&pooled_values)?;
    drop(pooled_values);

    let runset = RunSet::new(
        runs.into_iter()
            .map(|(id, o)| RunSample::categorical(id, o))
            .collect(),
        Some(OUTCOMES),
    )?;
    Ok(BreakdownResult {
        per_run,
        pooled,
        runset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schedule_marks_quoted_runs() {
        let cfg = default_config();
        cfg.validate().unwrap();
        assert_eq!(cfg.runs, 100);
        assert_eq!(cfg.items_per_run, 100_000);
        for id in [25, 50, 75] {
            assert_eq!(cfg.schedule[id - 1], "H", "run {id}");
        }
        assert_eq!(cfg.schedule[48], "L");
        assert_eq!(cfg.schedule.iter().filter(|l| *l == "H").count(), 50);
    }

    #[test]
    fn default_context_moments() {
        let cfg = default_config();
        let (mh, sh) = cfg.context("H").unwrap().moments(&cfg.f);
        let (ml, sl) = cfg.context("L").unwrap().moments(&cfg.f);
        assert!((mh - 1.07).abs() < 1e-12);
        assert!((ml - 0.93).abs() < 1e-12);
        // var = 0.02 * 0.07^2
        assert!((sh - 0.0098f64.sqrt() * 0.1).abs() < 1e-12);
        assert!((sl - sh).abs() < 1e-12);
        let expected_k = 0.07 * 1e5f64.sqrt() / sh;
        assert!(expected_k > 2200.0 && expected_k < 2250.0);
    }

    #[test]
    fn b_statistic_examples() {
        let f = DEFAULT_F;
        assert!((b_statistic(&f, &[3; 10]).unwrap() - 1.0).abs() < 1e-15);
        assert!((b_statistic(&f, &[4, 4]).unwrap() - 1.07).abs() < 1e-15);
        assert!((b_statistic(&f, &[2, 4]).unwrap() - 1.0).abs() < 1e-15);
        assert!(b_statistic(&f, &[]).is_err());
        assert!(b_statistic(&f, &[7]).is_err());
    }

    #[test]
    fn b_statistic_is_linear_in_f() {
        let outcomes = [1, 2, 2, 3, 5, 6, 6, 6];
        let (a, c) = (2.5, -0.75);
        let scaled = DEFAULT_F.map(|v| a * v + c);
        let lhs = b_statistic(&scaled, &outcomes).unwrap();
        let rhs = a * b_statistic(&DEFAULT_F, &outcomes).unwrap() + c;
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let mut cfg = default_config();
        cfg.schedule.pop();
        assert!(cfg.validate().is_err());
        let mut cfg = default_config();
        cfg.schedule[0] = "X".into();
        assert!(cfg.validate().is_err());
        let mut cfg = default_config();
        cfg.contexts[0].probs[0] = 0.5;
        assert!(cfg.validate().is_err());
        assert!(ContextSpec::new("bad", [0.5; 6]).is_err());
    }

    #[test]
    fn small_experiment_shapes() {
        let cfg = BreakdownConfig::alternating(4, 1000);
        let res = run_experiment(&cfg, MasterSeed(1)).unwrap();
        assert_eq!(res.per_run.len(), 4);
        assert_eq!(res.pooled.n, 4000);
        assert_eq!(res.runset.len(), 4);
        assert_eq!(res.per_run[0].context, "H");
        assert!(res.per_run[0].k_sigma < -100.0);
        assert!(res.per_run[1].k_sigma > 100.0);
    }

    #[test]
    fn pooled_mean_is_weighted_run_mean() {
        let cfg = BreakdownConfig::alternating(6, 2000);
        let res = run_experiment(&cfg, MasterSeed(9)).unwrap();
        let weighted: f64 = res.per_run.iter().map(|r| r.one_minus_b).sum::<f64>() / 6.0;
        assert!((res.pooled.mean - weighted).abs() < 1e-12);
    }
}
