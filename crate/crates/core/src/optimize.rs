//! Nelder–Mead minimization and the search for violating Eberhard settings.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eberhard::{expected_j_per_pair, EberhardConfig, DEFAULT_BINS};
use crate::rng::{make_stream, MasterSeed};

/// Lower clamp on the entanglement parameter.
pub const R_MIN: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Nelder–Mead from `x0` with the default initial simplex (5% of each
/// coordinate, or 0.00025 for zero coordinates).
///
/// Converged when the spread of objective values over the simplex drops
/// below `tol` and no vertex lies farther than `sqrt(tol)` from the best one
/// in any coordinate. Hitting `max_iter` is reported through
/// `converged = false`.
pub fn nelder_mead<F>(objective: F, x0: &[f64], tol: f64, max_iter: usize) -> OptResult
where
    F: Fn(&[f64]) -> f64,
{
    let steps: Vec<f64> = x0
        .iter()
        .map(|&v| if v != 0.0 { 0.05 * v } else { 0.00025 })
        .collect();
    nelder_mead_with_steps(objective, x0, &steps, tol, max_iter)
}

/// Nelder–Mead with vertex `i + 1` of the initial simplex at `x0 + steps[i] e_i`.
pub fn nelder_mead_with_steps<F>(
    objective: F,
    x0: &[f64],
    steps: &[f64],
    tol: f64,
    max_iter: usize,
) -> OptResult
where
    F: Fn(&[f64]) -> f64,
{
    assert!(!x0.is_empty(), "nelder_mead needs dimension >= 1");
    assert!(tol > 0.0, "nelder_mead needs tol > 0");
    assert_eq!(x0.len(), steps.len());
    let n = x0.len();
    let eval = |x: &[f64]| {
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += steps[i];
        let f = eval(&v);
        simplex.push((v, f));
    }

    let point = |c: &[f64], towards: &[f64], t: f64| -> Vec<f64> {
        c.iter()
            .zip(towards)
            .map(|(c, w)| c + t * (w - c))
            .collect()
    };

    let mut iterations = 0;
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[n].1 - simplex[0].1 < tol && x_spread(&simplex) <= tol.sqrt() {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let worst = simplex[n].0.clone();
        let f_best = simplex[0].1;
        let f_second = simplex[n - 1].1;
        let f_worst = simplex[n].1;

        let xr = point(&centroid, &worst, -REFLECT);
        let fr = eval(&xr);
        if fr < f_best {
            let xe = point(&centroid, &worst, -EXPAND);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < f_second {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < f_worst {
            let xc = point(&centroid, &xr, CONTRACT);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = point(&centroid, &worst, CONTRACT);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < fr.min(f_worst) {
            simplex[n] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let v = point(&best, &vertex.0, SHRINK);
            let f = eval(&v);
            *vertex = (v, f);
        }
    }

    let (x, f) = simplex.swap_remove(0);
    OptResult {
        x,
        f,
        iterations,
        converged,
    }
}

fn x_spread(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let best = &simplex[0].0;
    simplex[1..]
        .iter()
        .flat_map(|(v, _)| v.iter().zip(best).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

fn canonical(x: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = x[..4]
        .iter()
        .map(|a| {
            let m = a.rem_euclid(PI);
            if m >= PI {
                0.0
            } else {
                m
            }
        })
        .collect();
    out.push(x[4].clamp(R_MIN, 1.0));
    out
}

/// Expected J per pair at `x = (alpha1, alpha2, beta1, beta2, r)`, with `r`
/// clamped to `[R_MIN, 1]`.
pub fn settings_objective(eta: f64, x: &[f64]) -> f64 {
    let cfg = EberhardConfig {
        r: x[4].clamp(R_MIN, 1.0),
        alpha1: x[0],
        alpha2: x[1],
        beta1: x[2],
        beta2: x[3],
        eta,
        pairs_per_setting: DEFAULT_BINS,
        bins: DEFAULT_BINS,
    };
    expected_j_per_pair(&cfg)
}

/// Builds a simulation config from an optimizer point.
pub fn config_from_point(
    x: &[f64],
    eta: f64,
    pairs_per_setting: u64,
    bins: u64,
) -> crate::Result<EberhardConfig> {
    EberhardConfig::new(
        x[4].clamp(R_MIN, 1.0),
        [x[0], x[1], x[2], x[3]],
        eta,
        pairs_per_setting,
        bins,
    )
}

const TOL: f64 = 1e-15;
const MAX_ITER: usize = 4000;
const ANGLE_STEP: f64 = 0.3;
const R_STEP: f64 = 0.2;

fn local_search(eta: f64, x0: &[f64]) -> OptResult {
    let objective = |x: &[f64]| settings_objective(eta, x);
    let mut steps = [ANGLE_STEP, ANGLE_STEP, ANGLE_STEP, ANGLE_STEP, R_STEP];
    let mut best = nelder_mead_with_steps(objective, x0, &steps, TOL, MAX_ITER);
    let mut iterations = best.iterations;
    // Restart from the best vertex with a fresh, smaller simplex until it stops improving.
    for _ in 0..6 {
        steps.iter_mut().for_each(|s| *s *= 0.5);
        let start = canonical(&best.x);
        let next = nelder_mead_with_steps(objective, &start, &steps, TOL, MAX_ITER);
        iterations += next.iterations;
        let improved = next.f < best.f - 1e-15;
        if next.f <= best.f {
            best = OptResult { iterations, ..next };
        }
        if !improved {
            break;
        }
    }
    best.iterations = iterations;
    best
}

/// Minimizes [`expected_j_per_pair`] over `(alpha1, alpha2, beta1, beta2, r)`
/// for a fixed efficiency, from `multistart` random starts.
///
/// Restart `k` draws its start from stream id `k`. Angles in the result are
/// mapped into `[0, pi)` and `f` is re-evaluated there.
pub fn optimize_settings(eta: f64, multistart: usize, seed: MasterSeed) -> OptResult {
    assert!(eta > 0.0 && eta <= 1.0, "eta must lie in (0, 1]");
    assert!(multistart >= 1, "multistart must be >= 1");
    let results: Vec<OptResult> = (0..multistart as u64)
        .into_par_iter()
        .map(|k| {
            let mut s = make_stream(seed, k);
            let mut x0: Vec<f64> = (0..4).map(|_| s.next_uniform() * PI).collect();
            x0.push(R_MIN + (1.0 - R_MIN) * s.next_uniform());
            local_search(eta, &x0)
        })
        .collect();
    let iterations = results.iter().map(|r| r.iterations).sum();
    let best = results
        .into_iter()
        .reduce(|a, b| if b.f < a.f { b } else { a })
        .expect("multistart >= 1");
    let x = canonical(&best.x);
    OptResult {
        f: settings_objective(eta, &x),
        x,
        iterations,
        converged: best.converged,
    }
}
