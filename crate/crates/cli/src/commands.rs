use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use shl_core::breakdown::{run_experiment, BreakdownConfig};
use shl_core::eberhard::{
    estimate_rescaled, expected_j_per_pair, simulate, EberhardConfig, DEFAULT_BINS,
};
use shl_core::homogeneity::{audit_series, audit_with, HomogeneityReport, DEFAULT_PERMUTATIONS};
use shl_core::optimize::optimize_settings;
use shl_core::rng::{make_stream, MasterSeed};
use shl_core::stats::{cantelli_confidence, chebyshev_confidence, summarize, SignificanceSummary};

use crate::io::{self as csvio, AuditInput};
use crate::plot;
use crate::report::{self, ReportDocument, SummaryDoc};
use crate::{Command, Outcome};

pub fn execute(cmd: &Command, out: &mut (dyn Write + Send)) -> Result<Outcome> {
    match cmd {
        Command::SimulateDevice(a) => simulate_device(a, out),
        Command::Audit(a) => audit(a, out),
        Command::SimulateEberhard(a) => simulate_eberhard(a, out),
        Command::Significance(a) => significance(a, out),
        Command::Optimize(a) => optimize(a, out),
        Command::Report(a) => report_plot(a, out),
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateDeviceArgs {
    /// Number of runs [default: 100].
    #[arg(long, conflicts_with = "config")]
    pub runs: Option<usize>,
    /// Items per run [default: 100000].
    #[arg(long, conflicts_with = "config")]
    pub items: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Outcomes CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Full breakdown configuration as JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Put every run in this context instead of alternating `H` and `L`.
    #[arg(long, conflicts_with = "config")]
    pub context: Option<String>,
}

fn simulate_device(a: &SimulateDeviceArgs, out: &mut (dyn Write + Send)) -> Result<Outcome> {
    let cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str::<BreakdownConfig>(&text)
                .with_context(|| format!("bad configuration in {}", path.display()))?
        }
        None => {
            let runs = a.runs.unwrap_or(100);
            let items = a.items.unwrap_or(100_000);
            match &a.context {
                Some(label) => BreakdownConfig::single_context(label, runs, items),
                None => BreakdownConfig::alternating(runs, items),
            }
        }
    };
    let res = run_experiment(&cfg, MasterSeed(a.seed))?;
    let mut w = csvio::create(&a.out)?;
    csvio::write_outcomes(&mut w, &res.runset)?;
    w.flush()
        .with_context(|| format!("cannot write {}", a.out.display()))?;

    writeln!(
        out,
        "{:>6}  {:>7}  {:>14}  {:>12}  {:>12}",
        "run", "context", "1-B", "SEM", "k_sigma"
    )?;
    for r in &res.per_run {
        writeln!(
            out,
            "{:>6}  {:>7}  {:>14.6e}  {:>12.4e}  {:>12.2}",
            r.run_id, r.context, r.one_minus_b, r.summary.sem, r.k_sigma
        )?;
    }
    let p = &res.pooled;
    writeln!(
        out,
        "{:>6}  {:>7}  {:>14.6e}  {:>12.4e}  {:>12.2}",
        "pooled", "-", p.mean, p.sem, p.k_sigma
    )?;
    Ok(Outcome::Done)
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    /// Outcomes CSV (`run_id,t,outcome`), values CSV (`run_id,value`) or a `value` series.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    /// CUSUM permutations.
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    pub perm: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Report JSON to write.
    #[arg(long)]
    pub out: PathBuf,
}

fn confidences(s: &SignificanceSummary) -> (Option<f64>, Option<f64>) {
    let k = s.abs_k();
    if k.is_infinite() {
        (Some(1.0), Some(1.0))
    } else {
        (chebyshev_confidence(k).ok(), cantelli_confidence(k).ok())
    }
}

fn write_report(path: &PathBuf, doc: &ReportDocument) -> Result<()> {
    fs::write(path, report::to_json(doc)?)
        .with_context(|| format!("cannot write {}", path.display()))
}

fn audit(a: &AuditArgs, out: &mut (dyn Write + Send)) -> Result<Outcome> {
    let input = csvio::read_audit_input(csvio::open(&a.input)?)
        .with_context(|| format!("malformed input {}", a.input.display()))?;
    let mut stream = make_stream(MasterSeed(a.seed), 0);
    let (hom, values) = match &input {
        AuditInput::Runs(rs) => {
            let values = rs.kind()?;
            let report = audit_with(rs, a.alpha, a.perm, &mut stream)?;
            let values = match values {
                shl_core::homogeneity::OutcomeKind::Real => Some(rs.concatenated()),
                shl_core::homogeneity::OutcomeKind::Categorical => None,
            };
            (report, values)
        }
        AuditInput::Series(x) => (
            audit_series(x, a.alpha, a.perm, &mut stream)?,
            Some(x.clone()),
        ),
    };
    let summary = values.as_deref().map(summarize).transpose()?;
    let (cheb, cant) = summary.as_ref().map_or((None, None), confidences);
    let doc = ReportDocument {
        command: "audit".into(),
        config: json!({
            "input": a.input.display().to_string(),
            "alpha": a.alpha,
            "perm": a.perm,
            "seed": a.seed,
        }),
        significance: summary.as_ref().map(SummaryDoc::from),
        chebyshev_conf: cheb,
        cantelli_conf: cant,
        per_bin_j: None,
        warnings: Vec::new(),
        verdict_text: audit_text(&hom),
        homogeneity: Some(hom.clone()),
    };
    write_report(&a.out, &doc)?;
    print_battery(out, &hom)?;
    Ok(Outcome::Verdict(hom.verdict))
}

fn audit_text(r: &HomogeneityReport) -> String {
    format!(
        "audit: {} ({} tests, Bonferroni-corrected alpha {:.3e})",
        r.verdict,
        r.results.len() + r.errors.len(),
        r.corrected_alpha
    )
}

fn print_battery(out: &mut (dyn Write + Send), r: &HomogeneityReport) -> Result<()> {
    for t in &r.results {
        writeln!(
            out,
            "{:<28} statistic {:>14.6e}  p {:.6e}",
            t.name, t.statistic, t.p_value
        )?;
    }
    for e in &r.errors {
        writeln!(out, "{:<28} error: {}", e.name, e.reason)?;
    }
    for s in &r.skipped {
        writeln!(out, "{:<28} skipped: {}", s.name, s.reason)?;
    }
    writeln!(out, "{}", audit_text(r))?;
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct SimulateEberhardArgs {
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, conflicts_with = "settings")]
    pub r: Option<f64>,
    /// alpha1,alpha2,beta1,beta2 in degrees.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        conflicts_with = "settings"
    )]
    pub angles: Option<Vec<f64>>,
    /// Settings JSON written by `optimize` (supplies eta, r and angles).
    #[arg(long)]
    pub settings: Option<PathBuf>,
    /// Pairs per setting.
    #[arg(long, default_value_t = 3_000_000)]
    pub pairs: u64,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Counts CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

/// Angles of the four settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Angles {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Angles {
    fn from_slice(x: &[f64]) -> Self {
        Self {
            alpha1: x[0],
            alpha2: x[1],
            beta1: x[2],
            beta2: x[3],
        }
    }

    fn to_array(self) -> [f64; 4] {
        [self.alpha1, self.alpha2, self.beta1, self.beta2]
    }

    fn map(self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_slice(&self.to_array().map(f))
    }
}

/// Output of `optimize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingsDocument {
    pub eta: f64,
    pub multistart: usize,
    pub seed: u64,
    pub r: f64,
    pub angles_deg: Angles,
    pub angles_rad: Angles,
    /// Expected J per pair at these settings.
    pub j_pp: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn simulate_eberhard(a: &SimulateEberhardArgs, out: &mut (dyn Write + Send)) -> Result<Outcome> {
    let (eta, r, angles) = match &a.settings {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            let doc: SettingsDocument = serde_json::from_str(&text)
                .with_context(|| format!("bad settings in {}", path.display()))?;
            (a.eta.unwrap_or(doc.eta), doc.r, doc.angles_rad.to_array())
        }
        None => {
            let deg = a.angles.as_deref().unwrap_or(&[0.0, 45.0, 67.5, 112.5]);
            if deg.len() != 4 {
                bail!("--angles needs exactly 4 values, got {}", deg.len());
            }
            (
                a.eta.unwrap_or(1.0),
                a.r.unwrap_or(1.0),
                Angles::from_slice(deg).map(f64::to_radians).to_array(),
            )
        }
    };
    let cfg = EberhardConfig::new(r, angles, eta, a.pairs, a.bins)?;
    let counts = simulate(&cfg, MasterSeed(a.seed))?;
    let mut w = csvio::create(&a.out)?;
    csvio::write_counts(&mut w, &counts)?;
    w.flush()
        .with_context(|| format!("cannot write {}", a.out.display()))?;

    let est = estimate_rescaled(&counts, cfg.bins)?;
    let s = &est.summary;
    let model = expected_j_per_pair(&cfg) * cfg.trials_per_bin() as f64;
    writeln!(out, "bins                 {}", s.n)?;
    writeln!(out, "trials per bin       {}", cfg.trials_per_bin())?;
    writeln!(out, "mean J per bin       {:.6e}", s.mean)?;
    writeln!(out, "model J per bin      {model:.6e}")?;
    writeln!(out, "SEM                  {:.6e}", s.sem)?;
    writeln!(out, "k_sigma              {:.3}", s.k_sigma)?;
    writeln!(out, "Chebyshev confidence {}", fmt_conf(est.chebyshev_conf))?;
    writeln!(out, "Cantelli confidence  {}", fmt_conf(est.cantelli_conf))?;
    Ok(Outcome::Done)
}

fn fmt_conf(c: Option<f64>) -> String {
    c.map_or_else(|| "undefined".to_owned(), |v| format!("{v:.9}"))
}

#[derive(Debug, Clone, Args)]
pub struct SignificanceArgs {
    /// Counts CSV.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Report JSON to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also audit the per-bin J series for homogeneity.
    #[arg(long)]
    pub audit: bool,
    /// Level for rejecting `J >= 0` and for the audit.
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    pub perm: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

fn significance(a: &SignificanceArgs, out: &mut (dyn Write + Send)) -> Result<Outcome> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        bail!("--alpha must lie in (0, 1)");
    }
    let counts = csvio::read_counts(csvio::open(&a.input)?)
        .with_context(|| format!("malformed counts {}", a.input.display()))?;
    let bins = csvio::bin_count(&counts)?;
    let est = estimate_rescaled(&counts, bins)?;
    let mut warnings = Vec::new();
    if !est.rescaled_bins.is_empty() {
        warnings.push(format!(
            "unequal trials across settings in bins {:?}: J computed on per-trial rates and rescaled to the smallest trial count",
            est.rescaled_bins
        ));
    }
    let hom = if a.audit {
        let mut stream = make_stream(MasterSeed(a.seed), 0);
        Some(audit_series(&est.per_bin_j, a.alpha, a.perm, &mut stream)?)
    } else {
        None
    };
    let doc = ReportDocument {
        command: "significance".into(),
        config: json!({
            "input": a.input.display().to_string(),
            "bins": bins,
            "alpha": a.alpha,
            "audit": a.audit,
            "perm": a.perm,
            "seed": a.seed,
        }),
        significance: Some(SummaryDoc::from(&est.summary)),
        chebyshev_conf: est.chebyshev_conf,
        cantelli_conf: est.cantelli_conf,
        per_bin_j: Some(est.per_bin_j.clone()),
        warnings,
        verdict_text: report::verdict_text(&est, a.alpha, hom.as_ref()),
        homogeneity: hom.clone(),
    };
    write_report(&a.out, &doc)?;
    for w in &doc.warnings {
        writeln!(out, "warning: {w}")?;
    }
    writeln!(out, "{}", doc.verdict_text)?;
    Ok(match hom {
        Some(h) => Outcome::Verdict(h.verdict),
        None => Outcome::Done,
    })
}

#[derive(Debug, Clone, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub eta: f64,
    #[arg(long, default_value_t = 20)]
    pub multistart: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Settings JSON to write.
    #[arg(long)]
    pub out: PathBuf,
}

fn optimize(a: &OptimizeArgs, out: &mut (dyn Write + Send)) -> Result<Outcome> {
    if !(a.eta > 0.0 && a.eta <= 1.0) {
        bail!("--eta must lie in (0, 1], got {}", a.eta);
    }
    if a.multistart == 0 {
        bail!("--multistart must be at least 1");
    }
    let res = optimize_settings(a.eta, a.multistart, MasterSeed(a.seed));
    let rad = Angles::from_slice(&res.x[..4]);
    let doc = SettingsDocument {
        eta: a.eta,
        multistart: a.multistart,
        seed: a.seed,
        r: res.x[4],
        angles_deg: rad.map(|v| v * 180.0 / PI),
        angles_rad: rad,
        j_pp: res.f,
        iterations: res.iterations,
        converged: res.converged,
    };
    fs::write(&a.out, report::to_json(&doc)?)
        .with_context(|| format!("cannot write {}", a.out.display()))?;
    let d = doc.angles_deg;
    writeln!(
        out,
        "J_pp = {:.9e} at r = {:.6}, angles (deg) = {:.4}, {:.4}, {:.4}, {:.4}",
        doc.j_pp, doc.r, d.alpha1, d.alpha2, d.beta1, d.beta2
    )?;
    Ok(Outcome::Done)
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Report JSON written by `significance`.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub svg: PathBuf,
    #[arg(long)]
    pub tsv: PathBuf,
}

fn report_plot(a: &ReportArgs, out: &mut (dyn Write + Send)) -> Result<Outcome> {
    let text = fs::read_to_string(&a.input)
        .with_context(|| format!("cannot read {}", a.input.display()))?;
    let doc = report::from_json(&text)
        .with_context(|| format!("malformed report {}", a.input.display()))?;
    let Some(values) = doc.per_bin_j.as_ref().filter(|v| !v.is_empty()) else {
        bail!(
            "report {} has no per-bin J values; produce it with `shl significance`",
            a.input.display()
        );
    };
    let (mean, sem) = match &doc.significance {
        Some(s) => (s.mean, s.sem),
        None => {
            let s = summarize(values)?;
            (s.mean, s.sem)
        }
    };
    fs::write(&a.svg, plot::svg_histogram(values, mean, sem))
        .with_context(|| format!("cannot write {}", a.svg.display()))?;
    fs::write(&a.tsv, plot::tsv(values))
        .with_context(|| format!("cannot write {}", a.tsv.display()))?;
    writeln!(out, "{} bins plotted", values.len())?;
    Ok(Outcome::Done)
}
