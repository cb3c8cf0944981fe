//! Simulation and statistical auditing of repeated random experiments:
//! reproducible random streams, significance summaries, homogeneity tests,
//! a pooled-context breakdown simulator, an Eberhard-type photon simulator
//! and a settings optimizer.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod breakdown;
pub mod eberhard;
pub mod error;
pub mod homogeneity;
pub mod optimize;
pub mod rng;
pub mod stats;

pub use breakdown::{BreakdownConfig, BreakdownResult, ContextSpec, RunSummary};
pub use eberhard::{
    EberhardConfig, JEstimate, Response, Setting, SettingCounts, SettingProbabilities,
};
pub use error::{Error, Result};
pub use homogeneity::{
    ContingencyTable, HomogeneityReport, OutcomeKind, Outcomes, RunSample, RunSet, TestFailure,
    Verdict,
};
pub use optimize::OptResult;
pub use rng::{MasterSeed, RandomStream};
pub use stats::{Detail, SignificanceSummary, TestResult};
