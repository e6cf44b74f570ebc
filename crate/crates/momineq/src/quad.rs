//! Adaptive log-space quadrature.
//!
//! Every routine here integrates `exp(f)` while only ever handling `f`
//! and log-domain partial sums, so integrands whose peak sits at
//! `exp(-4000)` come out with full relative precision instead of
//! underflowing to zero. Panels are 15-point Gauss--Legendre rules,
//! refined by bisection until parent and children agree in log space.
//!
//! Callers pass interior knots where the integrand is known to kink or
//! peak (moment-mean roots, prior centers); panels are never allowed to
//! straddle a knot, which is what keeps narrow features from slipping
//! between quadrature nodes on very wide domains.

use crate::error::{Error, Result};
use crate::stats::{log_sum_exp, log_add_exp};

/// Gauss--Legendre nodes and weights on [-1, 1], 15 points.
const GL15: [(f64, f64); 15] = [
    (-0.987992518020485428, 0.0307532419961172684),
    (-0.937273392400705904, 0.0703660474881081247),
    (-0.848206583410427216, 0.107159220467171935),
    (-0.724417731360170047, 0.139570677926154314),
    (-0.570972172608538848, 0.166269205816993934),
    (-0.39415134707756337, 0.186161000015562211),
    (-0.201194093997434522, 0.198431485327111576),
    (0.0, 0.202578241925561273),
    (0.201194093997434522, 0.198431485327111576),
    (0.39415134707756337, 0.186161000015562211),
    (0.570972172608538848, 0.166269205816993934),
    (0.724417731360170047, 0.139570677926154314),
    (0.848206583410427216, 0.107159220467171935),
    (0.937273392400705904, 0.0703660474881081247),
    (0.987992518020485428, 0.0307532419961172684),
];

/// Default log-space agreement tolerance between a panel and its split.
pub const DEFAULT_LOG_TOL: f64 = 1e-10;

/// Default bisection depth limit per initial panel.
pub const DEFAULT_MAX_DEPTH: usize = 40;

/// Panels more than this far (in log units) below the running maximum
/// are accepted without refinement; their linear-space contribution is
/// below 1e-26 of the total.
const DEAD_ZONE: f64 = 60.0;

/// Hard cap on processed panels per integral.
const PANEL_BUDGET: usize = 500_000;

/// `ln((hi - lo) / 2 * sum_i w_i exp(f(x_i)))` on one panel.
fn log_panel<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<f64> {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut terms = [f64::NEG_INFINITY; 15];
    for (k, &(node, weight)) in GL15.iter().enumerate() {
        let x = mid + half * node;
        let v = f(x);
        if v.is_nan() || v == f64::INFINITY {
            return Err(Error::Integration(format!("integrand returned {v} at {x}")));
        }
        terms[k] = weight.ln() + v;
    }
    Ok(half.ln() + log_sum_exp(&terms))
}

/// `ln` of the integral of `exp(f)` over `[a, b]`.
///
/// `knots` are interior abscissas the panel structure must respect;
/// values outside `(a, b)` are ignored. Refinement stops when a panel
/// agrees with its bisection within `tol` log units or lies in the dead
/// zone far below the running total.
pub fn log_integral_1d<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    knots: &[f64],
    tol: f64,
    max_depth: usize,
) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::InvalidArgument(format!(
            "integration interval [{a}, {b}] must be finite and ordered"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    // Each knot becomes a cascade of cut points at geometrically growing
    // distances. A bare cut is not enough on wide domains: a peak of
    // width 1e-3 against a panel of width 8000 leaves every quadrature
    // node in dead territory, parent and children agree on "zero", and
    // refinement stops. With panels whose widths grow from ~1e-13 of the
    // span outward, any feature anchored at a knot is sampled at its own
    // scale.
    let span = b - a;
    let min_gap = 1e-12 * span;
    let mut interior: Vec<f64> = Vec::new();
    for &k in knots {
        if !(k.is_finite() && k > a && k < b) {
            continue;
        }
        interior.push(k);
        let mut offset = 0.5 * span;
        while offset > 4.0 * min_gap {
            interior.push(k - offset);
            interior.push(k + offset);
            offset *= 0.5;
        }
    }
    interior.retain(|x| *x > a && *x < b);
    interior.sort_unstable_by(|x, y| x.partial_cmp(y).expect("finite by filter"));
    let mut cuts: Vec<f64> = vec![a];
    for x in interior {
        if x - cuts.last().expect("non-empty") > min_gap && b - x > min_gap {
            cuts.push(x);
        }
    }
    cuts.push(b);

    // Panel stack: (lo, hi, cached parent estimate, depth).
    let mut stack: Vec<(f64, f64, f64, usize)> = Vec::new();
    for w in cuts.windows(2).rev() {
        let est = log_panel(&f, w[0], w[1])?;
        stack.push((w[0], w[1], est, 0));
    }
    let mut scale = stack
        .iter()
        .map(|&(_, _, e, _)| e)
        .fold(f64::NEG_INFINITY, f64::max);

    let mut total = f64::NEG_INFINITY;
    let mut processed = 0usize;
    while let Some((lo, hi, parent, depth)) = stack.pop() {
        processed += 1;
        if processed > PANEL_BUDGET {
            return Err(Error::Integration(format!(
                "integral over [{a}, {b}] exceeded the panel budget"
            )));
        }
        if parent <= scale - DEAD_ZONE {
            total = log_add_exp(total, parent);
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let left = log_panel(&f, lo, mid)?;
        let right = log_panel(&f, mid, hi)?;
        let refined = log_add_exp(left, right);
        scale = scale.max(refined);
        let gap = if refined == f64::NEG_INFINITY && parent == f64::NEG_INFINITY {
            0.0
        } else {
            (refined - parent).abs()
        };
        if gap <= tol || refined <= scale - DEAD_ZONE {
            total = log_add_exp(total, refined);
        } else if depth >= max_depth {
            return Err(Error::Integration(format!(
                "panel [{lo}, {hi}] failed to converge at depth {max_depth} (log gap {gap:.3e})"
            )));
        } else {
            stack.push((mid, hi, right, depth + 1));
            stack.push((lo, mid, left, depth + 1));
        }
    }
    Ok(total)
}

/// `ln` of the integral of `exp(f)` over the rectangle
/// `[a1, b1] x [a2, b2]`, iterated as an outer integral in the first
/// coordinate of inner 1-D integrals in the second.
pub fn log_integral_2d<F: Fn(f64, f64) -> f64>(
    f: F,
    a1: f64,
    b1: f64,
    a2: f64,
    b2: f64,
    knots1: &[f64],
    knots2: &[f64],
    tol: f64,
    max_depth: usize,
) -> Result<f64> {
    // Inner failures surface as NaN through the outer integrand and are
    // converted back into an integration error by log_panel.
    let inner = |x: f64| -> f64 {
        match log_integral_1d(|y| f(x, y), a2, b2, knots2, tol, max_depth) {
            Ok(v) => v,
            Err(_) => f64::NAN,
        }
    };
    log_integral_1d(inner, a1, b1, knots1, tol.max(1e-12), max_depth).map_err(|e| match e {
        Error::Integration(msg) => Error::Integration(format!("2-d integral: {msg}")),
        other => other,
    })
}

/// `ln` of the integral of `exp(f)` over an axis-aligned box, by plain
/// uniform Monte Carlo: `ln vol + ln mean_i exp(f(u_i))`.
///
/// Used for three and more free coordinates where tensorized panels are
/// no longer economical. Deterministic for a fixed seed.
pub fn log_integral_mc_box<F: Fn(&[f64]) -> f64>(
    f: F,
    lower: &[f64],
    upper: &[f64],
    samples: usize,
    seed: u64,
) -> Result<f64> {
    use rand::{RngExt, SeedableRng};
    if lower.len() != upper.len() || lower.is_empty() {
        return Err(Error::Dimension("box bounds must be non-empty and equal length".into()));
    }
    let mut log_vol = 0.0;
    for (lo, hi) in lower.iter().zip(upper) {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "box side [{lo}, {hi}] must be finite and ordered"
            )));
        }
        log_vol += (hi - lo).ln();
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut point = vec![0.0; lower.len()];
    let mut acc = f64::NEG_INFINITY;
    for _ in 0..samples {
        for (j, slot) in point.iter_mut().enumerate() {
            *slot = rng.random_range(lower[j]..upper[j]);
        }
        let v = f(&point);
        if v.is_nan() || v == f64::INFINITY {
            return Err(Error::Integration(format!(
                "integrand returned {v} at {point:?}"
            )));
        }
        acc = log_add_exp(acc, v);
    }
    Ok(log_vol + acc - (samples as f64).ln())
}
