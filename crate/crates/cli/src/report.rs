//! JSON report document and its 17-significant-digit encoding.

use std::io;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use shl_core::eberhard::JEstimate;
use shl_core::homogeneity::{HomogeneityReport, Verdict};
use shl_core::stats::SignificanceSummary;

/// [`SignificanceSummary`] with a non-finite `k_sigma` stored as `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryDoc {
    pub n: usize,
    pub mean: f64,
    pub s: f64,
    pub sem: f64,
    pub k_sigma: Option<f64>,
    pub degenerate: bool,
}

impl From<&SignificanceSummary> for SummaryDoc {
    fn from(s: &SignificanceSummary) -> Self {
        Self {
            n: s.n,
            mean: s.mean,
            s: s.s,
            sem: s.sem,
            k_sigma: s.k_sigma.is_finite().then_some(s.k_sigma),
            degenerate: s.degenerate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub command: String,
    pub config: serde_json::Value,
    pub significance: Option<SummaryDoc>,
    pub chebyshev_conf: Option<f64>,
    pub cantelli_conf: Option<f64>,
    pub homogeneity: Option<HomogeneityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_bin_j: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub verdict_text: String,
}

/// Pretty JSON whose floats carry 17 significant digits.
struct Precise<'a>(PrettyFormatter<'a>);

impl Formatter for Precise<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes `value` as pretty JSON with 17 significant digits per float.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Precise(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf)?)
}

pub fn from_json(text: &str) -> Result<ReportDocument> {
    Ok(serde_json::from_str(text)?)
}

/// Whether `H0: J >= 0` is rejected: a negative mean whose one-sided
/// Cantelli tail bound `1 / (1 + k^2)` falls below `alpha`. Degenerate
/// summaries never reject.
pub fn h0_rejected(summary: &SignificanceSummary, alpha: f64) -> bool {
    let k = summary.k_sigma;
    !summary.degenerate && k < 0.0 && 1.0 / (1.0 + k * k) < alpha
}

/// Human-readable statement of the significance decision and whether the
/// homogeneity audit supports it.
pub fn verdict_text(est: &JEstimate, alpha: f64, audit: Option<&HomogeneityReport>) -> String {
    let s = &est.summary;
    let decision = if s.degenerate {
        format!(
            "H0 (J >= 0) not rejected: per-bin J values are all equal to {:e}, so the SEM is zero and k_sigma is undefined",
            s.mean
        )
    } else {
        let bound = 1.0 / (1.0 + s.k_sigma * s.k_sigma);
        let head = if h0_rejected(s, alpha) {
            "H0 rejected"
        } else {
            "H0 not rejected"
        };
        format!(
            "{head} (H0: J >= 0): mean J = {:.6e}, SEM = {:.6e}, k_sigma = {:.3}, one-sided Cantelli bound {bound:.3e} vs alpha {alpha}",
            s.mean, s.sem, s.k_sigma
        )
    };
    let audit = match audit {
        None => "audit: not run, sample homogeneity unchecked".to_owned(),
        Some(r) => {
            let failing: Vec<&str> = r
                .results
                .iter()
                .filter(|t| t.p_value < r.corrected_alpha)
                .map(|t| t.name.as_str())
                .collect();
            match r.verdict {
                Verdict::Homogeneous => {
                    "audit: HOMOGENEOUS, per-bin values are consistent with a simple random sample".to_owned()
                }
                Verdict::Inhomogeneous => format!(
                    "audit: INHOMOGENEOUS ({} reject at corrected alpha {:.3e}), the k_sigma figure is not trustworthy",
                    failing.join(", "),
                    r.corrected_alpha
                ),
                Verdict::Inconclusive => {
                    "audit: INCONCLUSIVE, some tests could not be evaluated".to_owned()
                }
            }
        }
    };
    format!("{decision}; {audit}")
}
