//! Eberhard-type photon experiment: a polarization-entangled pair source,
//! two settings per side, lossy detectors, per-bin counts and the J
//! statistic built from four coincidence counts and two singles counts.
//!
//! Local realism implies `J >= 0`; quantum mechanics predicts `J < 0` for
//! suitable angles once the detection efficiency exceeds 2/3.
//!
//! Source state: `(|HV> + r |VH>) / sqrt(1 + r^2)`. Each side has a
//! two-channel polarizer (`o` along the setting angle, `e` orthogonal) and
//! each photon is detected independently with probability `eta`; a missed
//! photon is outcome `u`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{make_stream, Categorical, MasterSeed};
use crate::stats::{cantelli_confidence, chebyshev_confidence, summarize, SignificanceSummary};

/// Stream ids for simulation are `setting_index * STREAM_STRIDE + bin`.
pub const STREAM_STRIDE: u64 = 1_000_000;

/// Bins per setting unless configured otherwise.
pub const DEFAULT_BINS: u64 = 30;

/// Per-photon outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Response {
    O,
    E,
    U,
}

impl Response {
    pub const ALL: [Response; 3] = [Response::O, Response::E, Response::U];

    pub fn index(self) -> usize {
        match self {
            Response::O => 0,
            Response::E => 1,
            Response::U => 2,
        }
    }
}

/// Setting pair `(i, j)`: Alice uses `alpha_i`, Bob `beta_j`, both in `{1, 2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Setting {
    pub a: u8,
    pub b: u8,
}

impl Setting {
    pub const ALL: [Setting; 4] = [
        Setting { a: 1, b: 1 },
        Setting { a: 1, b: 2 },
        Setting { a: 2, b: 1 },
        Setting { a: 2, b: 2 },
    ];

    pub fn new(a: u8, b: u8) -> Result<Self> {
        if (1..=2).contains(&a) && (1..=2).contains(&b) {
            Ok(Self { a, b })
        } else {
            Err(Error::InconsistentCounts(format!("no setting ({a},{b})")))
        }
    }

    /// 0..4 in the order (1,1), (1,2), (2,1), (2,2).
    pub fn index(self) -> usize {
        usize::from(self.a - 1) * 2 + usize::from(self.b - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EberhardConfig {
    /// Entanglement parameter in `(0, 1]`.
    pub r: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Detection efficiency in `[0, 1]`.
    pub eta: f64,
    pub pairs_per_setting: u64,
    pub bins: u64,
}

impl EberhardConfig {
    /// Angles in radians.
    pub fn new(
        r: f64,
        angles: [f64; 4],
        eta: f64,
        pairs_per_setting: u64,
        bins: u64,
    ) -> Result<Self> {
        let cfg = Self {
            r,
            alpha1: angles[0],
            alpha2: angles[1],
            beta1: angles[2],
            beta2: angles[3],
            eta,
            pairs_per_setting,
            bins,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "r must lie in (0, 1], got {}",
                self.r
            )));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidConfig(format!(
                "eta must lie in [0, 1], got {}",
                self.eta
            )));
        }
        if self.angles().iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidConfig("angles must be finite".into()));
        }
        if self.bins == 0 || self.bins >= STREAM_STRIDE {
            return Err(Error::InvalidConfig(format!(
                "bins must lie in 1..{STREAM_STRIDE}, got {}",
                self.bins
            )));
        }
        if self.pairs_per_setting == 0 || self.pairs_per_setting % self.bins != 0 {
            return Err(Error::InvalidConfig(format!(
                "pairs_per_setting ({}) must be a positive multiple of bins ({})",
                self.pairs_per_setting, self.bins
            )));
        }
        Ok(())
    }

    pub fn angles(&self) -> [f64; 4] {
        [self.alpha1, self.alpha2, self.beta1, self.beta2]
    }

    pub fn trials_per_bin(&self) -> u64 {
        self.pairs_per_setting / self.bins
    }

    fn setting_angles(&self, s: Setting) -> (f64, f64) {
        let alpha = if s.a == 1 { self.alpha1 } else { self.alpha2 };
        let beta = if s.b == 1 { self.beta1 } else { self.beta2 };
        (alpha, beta)
    }
}

/// Joint outcome law of one setting, indexed `[alice][bob]` by
/// [`Response::index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettingProbabilities {
    pub p: [[f64; 3]; 3],
}

impl SettingProbabilities {
    pub fn get(&self, a: Response, b: Response) -> f64 {
        self.p[a.index()][b.index()]
    }

    pub fn total(&self) -> f64 {
        self.p.iter().flatten().sum()
    }

    pub fn alice(&self, a: Response) -> f64 {
        self.p[a.index()].iter().sum()
    }

    pub fn bob(&self, b: Response) -> f64 {
        self.p.iter().map(|row| row[b.index()]).sum()
    }

    fn flat(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for (i, v) in self.p.iter().flatten().enumerate() {
            out[i] = *v;
        }
        out
    }
}

/// Lossless channel probabilities `q[a][b]` over `{o, e}^2` at angles `(alpha, beta)`.
pub fn channel_probabilities(alpha: f64, beta: f64, r: f64) -> [[f64; 2]; 2] {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let norm = 1.0 + r * r;
    let oo = ca * sb + r * sa * cb;
    let oe = ca * cb - r * sa * sb;
    let eo = -sa * sb + r * ca * cb;
    let ee = -(sa * cb + r * ca * sb);
    [
        [oo * oo / norm, oe * oe / norm],
        [eo * eo / norm, ee * ee / norm],
    ]
}

/// Detection-diluted joint law for one setting.
pub fn quantum_probabilities(cfg: &EberhardConfig, setting: Setting) -> SettingProbabilities {
    let (alpha, beta) = cfg.setting_angles(setting);
    let q = channel_probabilities(alpha, beta, cfg.r);
    let eta = cfg.eta;
    let miss = 1.0 - eta;
    let mut p = [[0.0; 3]; 3];
    for a in 0..2 {
        for b in 0..2 {
            p[a][b] = eta * eta * q[a][b];
        }
        // Bob misses
        p[a][2] = eta * miss * (q[a][0] + q[a][1]);
    }
    for b in 0..2 {
        p[2][b] = miss * eta * (q[0][b] + q[1][b]);
    }
    p[2][2] = miss * miss;
    SettingProbabilities { p }
}

/// Deterministic local response: outcome for setting 1 and setting 2.
pub type Strategy = [Response; 2];

/// J contribution of one pair under a deterministic local strategy.
pub fn lhv_expected_j(alice: Strategy, bob: Strategy) -> f64 {
    let o = |r: Response| r == Response::O;
    let [a1, a2] = alice.map(o);
    let [b1, b2] = bob.map(o);
    let ind = |x: bool| if x { 1.0 } else { 0.0 };
    ind(a1) + ind(b1) + ind(a2 && b2) - ind(a1 && b1) - ind(a1 && b2) - ind(a2 && b1)
}

/// All 9 local strategies of one side.
pub fn strategies() -> impl Iterator<Item = Strategy> {
    Response::ALL
        .into_iter()
        .flat_map(|x| Response::ALL.into_iter().map(move |y| [x, y]))
}

/// A convex mixture of deterministic strategy pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct LhvMixture {
    pub components: Vec<(f64, Strategy, Strategy)>,
}

impl LhvMixture {
    pub fn new(components: Vec<(f64, Strategy, Strategy)>) -> Result<Self> {
        if components.iter().any(|(w, _, _)| !(*w >= 0.0)) {
            return Err(Error::InvalidDistribution(
                "mixture weights must be >= 0".into(),
            ));
        }
        let total: f64 = components.iter().map(|(w, _, _)| w).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidDistribution(
                "mixture weights sum to zero".into(),
            ));
        }
        Ok(Self {
            components: components
                .into_iter()
                .map(|(w, a, b)| (w / total, a, b))
                .collect(),
        })
    }

    pub fn expected_j(&self) -> f64 {
        self.components
            .iter()
            .map(|(w, a, b)| w * lhv_expected_j(*a, *b))
            .sum()
    }

    pub fn probabilities(&self, setting: Setting) -> SettingProbabilities {
        let mut p = [[0.0; 3]; 3];
        for (w, a, b) in &self.components {
            let ra = a[usize::from(setting.a - 1)];
            let rb = b[usize::from(setting.b - 1)];
            p[ra.index()][rb.index()] += w;
        }
        SettingProbabilities { p }
    }
}

/// Expected J per pair,
/// `P_A(o|a1) + P_B(o|b1) + P(oo|a2,b2) - P(oo|a1,b1) - P(oo|a1,b2) - P(oo|a2,b1)`.
pub fn expected_j_per_pair(cfg: &EberhardConfig) -> f64 {
    expected_j_from_laws(&Setting::ALL.map(|s| quantum_probabilities(cfg, s)))
}

/// Same combination for arbitrary per-setting laws, ordered as [`Setting::ALL`].
pub fn expected_j_from_laws(laws: &[SettingProbabilities; 4]) -> f64 {
    let [p11, p12, p21, p22] = laws;
    let oo = |p: &SettingProbabilities| p.get(Response::O, Response::O);
    p11.alice(Response::O) + p11.bob(Response::O) + oo(p22) - oo(p11) - oo(p12) - oo(p21)
}

/// Counts of one setting in one time bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettingCounts {
    pub setting: Setting,
    pub bin: u64,
    /// `[alice][bob]` by [`Response::index`].
    pub joint: [[u64; 3]; 3],
    /// Alice `o` singles, `n_oo + n_oe + n_ou`.
    pub n_a_o: u64,
    /// Bob `o` singles, `n_oo + n_eo + n_uo`.
    pub n_b_o: u64,
    pub trials: u64,
}

impl SettingCounts {
    /// Builds counts with singles and trials derived from the joint table.
    pub fn from_joint(setting: Setting, bin: u64, joint: [[u64; 3]; 3]) -> Self {
        let n_a_o = joint[0].iter().sum();
        let n_b_o = joint.iter().map(|r| r[0]).sum();
        let trials = joint.iter().flatten().sum();
        Self {
            setting,
            bin,
            joint,
            n_a_o,
            n_b_o,
            trials,
        }
    }

    pub fn n(&self, a: Response, b: Response) -> u64 {
        self.joint[a.index()][b.index()]
    }

    pub fn n_oo(&self) -> u64 {
        self.joint[0][0]
    }

    /// Closure of the joint counts and the two marginal identities.
    pub fn validate(&self) -> Result<()> {
        let derived = Self::from_joint(self.setting, self.bin, self.joint);
        if derived.trials != self.trials {
            return Err(Error::InconsistentCounts(format!(
                "setting ({},{}) bin {}: joint counts sum to {}, trials = {}",
                self.setting.a, self.setting.b, self.bin, derived.trials, self.trials
            )));
        }
        if derived.n_a_o != self.n_a_o || derived.n_b_o != self.n_b_o {
            return Err(Error::InconsistentCounts(format!(
                "setting ({},{}) bin {}: singles do not match joint marginals",
                self.setting.a, self.setting.b, self.bin
            )));
        }
        Ok(())
    }
}

/// Draws `trials_per_bin` pairs for every (setting, bin) from the quantum law.
pub fn simulate(cfg: &EberhardConfig, seed: MasterSeed) -> Result<Vec<SettingCounts>> {
    cfg.validate()?;
    let laws = Setting::ALL.map(|s| quantum_probabilities(cfg, s));
    simulate_laws(&laws, cfg.trials_per_bin(), cfg.bins, seed)
}

/// Simulation core for arbitrary per-setting laws (ordered as [`Setting::ALL`]).
///
/// Output is ordered by setting, then bin.
pub fn simulate_laws(
    laws: &[SettingProbabilities; 4],
    trials_per_bin: u64,
    bins: u64,
    seed: MasterSeed,
) -> Result<Vec<SettingCounts>> {
    if bins == 0 || bins >= STREAM_STRIDE {
        return Err(Error::InvalidConfig(format!(
            "bins must lie in 1..{STREAM_STRIDE}"
        )));
    }
    let samplers = laws
        .iter()
        .map(|l| Categorical::new(&l.flat()))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = (0..4)
        .flat_map(|s| (0..bins).map(move |b| (s, b)))
        .collect();
    Ok(jobs
        .into_par_iter()
        .map(|(s, bin)| {
            let mut stream = make_stream(seed, s as u64 * STREAM_STRIDE + bin);
            let mut flat = [0u64; 9];
            for _ in 0..trials_per_bin {
                flat[samplers[s].sample(&mut stream)] += 1;
            }
            let mut joint = [[0u64; 3]; 3];
            for (i, n) in flat.into_iter().enumerate() {
                joint[i / 3][i % 3] = n;
            }
            SettingCounts::from_joint(Setting::ALL[s], bin, joint)
        })
        .collect())
}

fn by_setting(c: &[SettingCounts]) -> Result<[&SettingCounts; 4]> {
    if c.len() != 4 {
        return Err(Error::InconsistentCounts(format!(
            "J needs exactly 4 settings for one bin, got {}",
            c.len()
        )));
    }
    let find = |s: Setting| {
        c.iter()
            .find(|x| x.setting == s)
            .ok_or_else(|| Error::InconsistentCounts(format!("missing setting ({},{})", s.a, s.b)))
    };
    let out = [
        find(Setting::ALL[0])?,
        find(Setting::ALL[1])?,
        find(Setting::ALL[2])?,
        find(Setting::ALL[3])?,
    ];
    if out.iter().any(|x| x.bin != out[0].bin) {
        return Err(Error::InconsistentCounts(
            "counts come from different bins".into(),
        ));
    }
    Ok(out)
}

/// `J = nA_o(1,1) + nB_o(1,1) + n_oo(2,2) - n_oo(1,1) - n_oo(1,2) - n_oo(2,1)`
/// for one bin with equal trials in every setting.
pub fn j_from_counts(c: &[SettingCounts]) -> Result<f64> {
    let [c11, c12, c21, c22] = by_setting(c)?;
    if [c12, c21, c22].iter().any(|x| x.trials != c11.trials) {
        return Err(Error::InconsistentCounts(format!(
            "bin {}: settings have unequal trials",
            c11.bin
        )));
    }
    let j = c11.n_a_o as i128 + c11.n_b_o as i128 + c22.n_oo() as i128
        - c11.n_oo() as i128
        - c12.n_oo() as i128
        - c21.n_oo() as i128;
    Ok(j as f64)
}

/// J on per-trial rates, rescaled to the smallest trial count of the bin.
/// Equals [`j_from_counts`] when trials agree.
pub fn j_from_rates(c: &[SettingCounts]) -> Result<f64> {
    let [c11, c12, c21, c22] = by_setting(c)?;
    if [c11, c12, c21, c22].iter().any(|x| x.trials == 0) {
        return Err(Error::InconsistentCounts(format!(
            "bin {}: a setting has zero trials",
            c11.bin
        )));
    }
    let rate = |n: u64, t: u64| n as f64 / t as f64;
    let scale = [c11, c12, c21, c22]
        .iter()
        .map(|x| x.trials)
        .min()
        .unwrap_or(0) as f64;
    let j =
        rate(c11.n_a_o, c11.trials) + rate(c11.n_b_o, c11.trials) + rate(c22.n_oo(), c22.trials)
            - rate(c11.n_oo(), c11.trials)
            - rate(c12.n_oo(), c12.trials)
            - rate(c21.n_oo(), c21.trials);
    Ok(j * scale)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JEstimate {
    pub per_bin_j: Vec<f64>,
    pub summary: SignificanceSummary,
    /// `None` when `|k_sigma|` is zero or undefined.
    pub chebyshev_conf: Option<f64>,
    pub cantelli_conf: Option<f64>,
    /// Bins where trials differed between settings and J was rescaled.
    #[serde(default)]
    pub rescaled_bins: Vec<u64>,
}

fn group_bins(counts: &[SettingCounts], bins: u64) -> Result<Vec<Vec<SettingCounts>>> {
    let mut grouped = vec![Vec::with_capacity(4); bins as usize];
    for c in counts {
        let slot = grouped
            .get_mut(c.bin as usize)
            .ok_or_else(|| Error::InconsistentCounts(format!("bin {} outside 0..{bins}", c.bin)))?;
        slot.push(*c);
    }
    Ok(grouped)
}

fn finish(per_bin_j: Vec<f64>, rescaled_bins: Vec<u64>) -> Result<JEstimate> {
    let summary = summarize(&per_bin_j)?;
    let k = summary.abs_k();
    let conf = |f: fn(f64) -> Result<f64>| {
        if k.is_finite() && k > 0.0 {
            f(k).ok()
        } else if k.is_infinite() {
            Some(1.0)
        } else {
            None
        }
    };
    Ok(JEstimate {
        chebyshev_conf: conf(chebyshev_confidence),
        cantelli_conf: conf(cantelli_confidence),
        per_bin_j,
        summary,
        rescaled_bins,
    })
}

/// Per-bin J and its significance summary; all settings must share trials.
pub fn estimate(counts: &[SettingCounts], bins: u64) -> Result<JEstimate> {
    let per_bin_j = group_bins(counts, bins)?
        .iter()
        .map(|b| j_from_counts(b))
        .collect::<Result<Vec<_>>>()?;
    finish(per_bin_j, Vec::new())
}

/// Like [`estimate`], but bins with unequal trials fall back to
/// [`j_from_rates`] and are listed in `rescaled_bins`.
pub fn estimate_rescaled(counts: &[SettingCounts], bins: u64) -> Result<JEstimate> {
    let mut rescaled = Vec::new();
    let per_bin_j = group_bins(counts, bins)?
        .iter()
        .enumerate()
        .map(|(i, b)| match j_from_counts(b) {
            Ok(j) => Ok(j),
            Err(_) if b.len() == 4 => {
                rescaled.push(i as u64);
                j_from_rates(b)
            }
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    finish(per_bin_j, rescaled)
}
