//! Set estimators for the identified region and its scalar images.
//!
//! Two complementary constructions over one posterior: the empirical
//! quantile interval of a scalar functional along an MCMC chain, and the
//! level set of the unnormalized log posterior within a cut-off of its
//! maximum. Both operate on unnormalized targets; adding any constant in
//! log space changes neither.

use std::fs;
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::mcmc::{chain_quantile, Chain};
use crate::model::ThetaBox;

/// Closed interval `[lower, upper]` from chain quantiles at `pi_n` and
/// `1 - pi_n`.
#[derive(Debug, Clone)]
pub struct IntervalEstimate {
    pub lower: f64,
    pub upper: f64,
    pub pi_n: f64,
    /// Human-readable description of the scalar map that was bracketed.
    pub g_label: String,
}

/// Quantile interval for the scalar image `g(theta)` of the posterior.
pub fn quantile_set_estimate<G>(
    chain: &Chain,
    g: G,
    g_label: &str,
    pi_n: f64,
) -> Result<IntervalEstimate>
where
    G: Fn(&DVector<f64>) -> f64,
{
    if !(pi_n > 0.0 && pi_n < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "quantile level {pi_n} outside (0, 0.5)"
        )));
    }
    let lower = chain_quantile(chain, &g, pi_n)?;
    let upper = chain_quantile(chain, &g, 1.0 - pi_n)?;
    Ok(IntervalEstimate { lower, upper, pi_n, g_label: g_label.to_string() })
}

/// Cut-off growth law for the level-set estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsilonKind {
    SqrtN,
    LogN,
    LogLogN,
}

impl EpsilonKind {
    pub fn label(self) -> &'static str {
        match self {
            EpsilonKind::SqrtN => "sqrt-n",
            EpsilonKind::LogN => "log-n",
            EpsilonKind::LogLogN => "loglog-n",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sqrt-n" => Ok(EpsilonKind::SqrtN),
            "log-n" => Ok(EpsilonKind::LogN),
            "loglog-n" => Ok(EpsilonKind::LogLogN),
            other => Err(Error::Config(format!(
                "unknown cut-off kind {other:?}; expected sqrt-n, log-n or loglog-n"
            ))),
        }
    }
}

/// Evaluates the cut-off `sqrt(n)`, `ln n` or `ln ln n`.
pub fn epsilon_schedule(n: usize, kind: EpsilonKind) -> Result<f64> {
    let nf = n as f64;
    match kind {
        EpsilonKind::SqrtN => {
            if n < 1 {
                return Err(Error::InvalidArgument("sample size must be positive".into()));
            }
            Ok(nf.sqrt())
        }
        EpsilonKind::LogN => {
            if n < 2 {
                return Err(Error::InvalidArgument(
                    "log-n cut-off needs n >= 2 to be positive".into(),
                ));
            }
            Ok(nf.ln())
        }
        EpsilonKind::LogLogN => {
            if n < 3 {
                return Err(Error::InvalidArgument(
                    "loglog-n cut-off needs n >= 3 to be positive".into(),
                ));
            }
            Ok(nf.ln().ln())
        }
    }
}

/// Low-discrepancy interior points of a box, for optimizer multi-starts.
///
/// Uses the additive recurrence with the generalized golden ratio: with
/// phi the positive root of x^(d+1) = x + 1 and alpha_j = phi^-(j+1),
/// the sequence frac(1/2 + k alpha) fills the unit cube evenly for
/// every prefix length.
pub fn default_starts(bounds: &ThetaBox, count: usize) -> Vec<DVector<f64>> {
    let d = bounds.dim();
    // Solve x^(d+1) = x + 1 by Newton from 1.5; converges in a handful
    // of steps for every d >= 1.
    let mut phi = 1.5_f64;
    for _ in 0..64 {
        let fp = phi.powi(d as i32 + 1) - phi - 1.0;
        let dp = (d as f64 + 1.0) * phi.powi(d as i32) - 1.0;
        let next = phi - fp / dp;
        if (next - phi).abs() < 1e-15 {
            phi = next;
            break;
        }
        phi = next;
    }
    let alpha: Vec<f64> = (0..d).map(|j| phi.powi(-(j as i32 + 1))).collect();
    (0..count)
        .map(|k| {
            DVector::from_fn(d, |j, _| {
                let u = (0.5 + (k + 1) as f64 * alpha[j]).fract();
                bounds.lower()[j] + u * bounds.width(j)
            })
        })
        .collect()
}

/// Number of default multi-starts for posterior maximization.
pub const DEFAULT_START_COUNT: usize = 8;

/// Multi-start derivative-free maximization of a log density over a box.
///
/// Each start runs a Nelder--Mead simplex with candidates clamped into
/// the box; the best terminal vertex across starts wins. Plateau-shaped
/// targets (flat interiors with sharp shoulders) are exactly why this is
/// not a gradient ascent.
pub fn map_maximize<F>(
    target: F,
    bounds: &ThetaBox,
    starts: &[DVector<f64>],
) -> Result<(DVector<f64>, f64)>
where
    F: Fn(&DVector<f64>) -> f64,
{
    if starts.is_empty() {
        return Err(Error::InvalidArgument("need at least one start".into()));
    }
    let d = bounds.dim();
    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut usable = 0usize;
    for start in starts {
        if start.len() != d {
            return Err(Error::Dimension(format!(
                "start has length {}, box has dimension {d}",
                start.len()
            )));
        }
        let x0 = bounds.clamp(start);
        let v0 = target(&x0);
        if v0.is_nan() {
            return Err(Error::BrokenTarget(format!(
                "target returned NaN at start {:?}",
                x0.as_slice()
            )));
        }
        if v0 == f64::NEG_INFINITY {
            continue;
        }
        usable += 1;
        let (x, v) = nelder_mead(&target, bounds, &x0, v0);
        match &best {
            Some((_, bv)) if *bv >= v => {}
            _ => best = Some((x, v)),
        }
    }
    if usable == 0 {
        return Err(Error::Optimization(
            "every start has zero posterior density".into(),
        ));
    }
    Ok(best.expect("usable > 0 implies a candidate"))
}

/// One Nelder--Mead run maximizing `target` from `x0`; all trial points
/// are clamped into the box, values of NaN are treated as rejected
/// moves.
fn nelder_mead<F>(
    target: &F,
    bounds: &ThetaBox,
    x0: &DVector<f64>,
    v0: f64,
) -> (DVector<f64>, f64)
where
    F: Fn(&DVector<f64>) -> f64,
{
    let d = x0.len();
    let eval = |x: &DVector<f64>| -> f64 {
        let v = target(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    // Initial simplex: x0 plus a 5% step of each side length, pulled
    // back inside the box.
    let mut simplex: Vec<(DVector<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.clone(), v0));
    for j in 0..d {
        let mut x = x0.clone();
        let h = 0.05 * bounds.width(j);
        x[j] = if x[j] + h <= bounds.upper()[j] { x[j] + h } else { x[j] - h };
        let v = eval(&x);
        simplex.push((x, v));
    }
    let max_iter = 400 * d.max(1);
    for _ in 0..max_iter {
        // Descending by value: best first.
        simplex.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("NaN mapped to -inf"));
        let best_v = simplex[0].1;
        let worst_v = simplex[d].1;
        let diam = simplex
            .iter()
            .skip(1)
            .map(|(x, _)| (x - &simplex[0].0).amax())
            .fold(0.0_f64, f64::max);
        if (best_v - worst_v).abs() < 1e-12 && diam < 1e-9 {
            break;
        }
        let centroid: DVector<f64> = simplex[..d]
            .iter()
            .fold(DVector::zeros(d), |acc, (x, _)| acc + x)
            / d as f64;
        let worst = simplex[d].0.clone();
        let reflect = bounds.clamp(&(&centroid + (&centroid - &worst)));
        let rv = eval(&reflect);
        if rv > best_v {
            let expand = bounds.clamp(&(&centroid + (&centroid - &worst) * 2.0));
            let ev = eval(&expand);
            simplex[d] = if ev > rv { (expand, ev) } else { (reflect, rv) };
        } else if rv > simplex[d - 1].1 {
            simplex[d] = (reflect, rv);
        } else {
            let contract = bounds.clamp(&(&centroid + (&worst - &centroid) * 0.5));
            let cv = eval(&contract);
            if cv > worst_v {
                simplex[d] = (contract, cv);
            } else {
                // Shrink toward the best vertex.
                let anchor = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    entry.0 = bounds.clamp(&(&anchor + (&entry.0 - &anchor) * 0.5));
                    entry.1 = eval(&entry.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("NaN mapped to -inf"));
    simplex.swap_remove(0)
}

/// How [`level_set_region`] enumerates candidate points.
pub enum LevelSetResolution<'a> {
    /// Uniform lattice over the box at the given spacing; for one or two
    /// coordinates.
    Grid { spacing: f64 },
    /// Retained MCMC draws, for three or more coordinates; the chain
    /// must have been sampled from the same target, since its stored
    /// log-posterior values are reused for membership.
    ChainDraws(&'a Chain),
}

/// Default lattice spacing for grid-based level sets.
pub const DEFAULT_GRID_SPACING: f64 = 0.02;

/// Points within `epsilon_n` of the posterior maximum in log space.
#[derive(Debug, Clone)]
pub struct LevelSetRegion {
    pub epsilon_n: f64,
    pub max_log_post: f64,
    pub argmax: DVector<f64>,
    /// Membership cut: `max_log_post - epsilon_n`.
    pub threshold: f64,
    pub accepted: Vec<DVector<f64>>,
    /// Lattice spacing when grid-based, absent for chain-filtered sets.
    pub spacing: Option<f64>,
    /// For one-dimensional regions, `[min, max]` of the accepted points.
    pub hull: Option<(f64, f64)>,
}

/// Computes the level set `{theta : target(theta) >= max - epsilon_n}`.
///
/// The maximum is located by multi-start simplex ascent; grid points or
/// chain draws at or above the threshold are retained (the boundary is
/// closed). Errors if nothing is accepted, which signals a cut-off
/// below the optimizer's resolution.
pub fn level_set_region<F>(
    target: F,
    bounds: &ThetaBox,
    epsilon_n: f64,
    resolution: LevelSetResolution<'_>,
) -> Result<LevelSetRegion>
where
    F: Fn(&DVector<f64>) -> f64,
{
    if !(epsilon_n > 0.0 && epsilon_n.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "cut-off must be positive and finite, got {epsilon_n}"
        )));
    }
    let d = bounds.dim();
    let mut starts = default_starts(bounds, DEFAULT_START_COUNT);
    if let LevelSetResolution::ChainDraws(chain) = &resolution {
        if chain.dim() != d {
            return Err(Error::Dimension(format!(
                "chain dimension {} vs box dimension {d}",
                chain.dim()
            )));
        }
        // The best visited draw is a free, often excellent start.
        if !chain.is_empty() {
            let mut best_i = 0;
            for i in 1..chain.len() {
                if chain.log_post[i] > chain.log_post[best_i] {
                    best_i = i;
                }
            }
            starts.push(chain.state(best_i));
        }
    }
    let (argmax, max_log_post) = map_maximize(&target, bounds, &starts)?;
    let threshold = max_log_post - epsilon_n;

    let mut accepted = Vec::new();
    let mut spacing_out = None;
    match resolution {
        LevelSetResolution::Grid { spacing } => {
            if d > 2 {
                return Err(Error::InvalidArgument(format!(
                    "grid enumeration supports at most two coordinates, box has {d}"
                )));
            }
            if !(spacing > 0.0 && spacing.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "grid spacing must be positive, got {spacing}"
                )));
            }
            spacing_out = Some(spacing);
            let counts: Vec<usize> = (0..d)
                .map(|j| (bounds.width(j) / spacing + 1e-9).floor() as usize + 1)
                .collect();
            let mut point = DVector::zeros(d);
            if d == 1 {
                for i in 0..counts[0] {
                    point[0] = bounds.lower()[0] + i as f64 * spacing;
                    if target(&point) >= threshold {
                        accepted.push(point.clone());
                    }
                }
            } else {
                for i in 0..counts[0] {
                    point[0] = bounds.lower()[0] + i as f64 * spacing;
                    for k in 0..counts[1] {
                        point[1] = bounds.lower()[1] + k as f64 * spacing;
                        if target(&point) >= threshold {
                            accepted.push(point.clone());
                        }
                    }
                }
            }
        }
        LevelSetResolution::ChainDraws(chain) => {
            for i in 0..chain.len() {
                if chain.log_post[i] >= threshold {
                    accepted.push(chain.state(i));
                }
            }
        }
    }
    if accepted.is_empty() {
        return Err(Error::Optimization(format!(
            "no point reaches the threshold {threshold}; cut-off {epsilon_n} is below the \
             resolution of the search"
        )));
    }
    let hull = if d == 1 {
        let lo = accepted.iter().map(|x| x[0]).fold(f64::INFINITY, f64::min);
        let hi = accepted.iter().map(|x| x[0]).fold(f64::NEG_INFINITY, f64::max);
        Some((lo, hi))
    } else {
        None
    };
    Ok(LevelSetRegion {
        epsilon_n,
        max_log_post,
        argmax,
        threshold,
        accepted,
        spacing: spacing_out,
        hull,
    })
}

/// Exact Hausdorff distance between two finite point sets under the
/// Euclidean metric.
pub fn hausdorff(a: &[DVector<f64>], b: &[DVector<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("point sets must be non-empty".into()));
    }
    let directed = |from: &[DVector<f64>], to: &[DVector<f64>]| -> f64 {
        from.iter()
            .map(|x| {
                to.iter()
                    .map(|y| (x - y).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0_f64, f64::max)
    };
    Ok(directed(a, b).max(directed(b, a)))
}

/// Writes the accepted points as CSV plus a TOML metadata sidecar with
/// the cut-off, maximum and argmax.
pub fn save_level_set(region: &LevelSetRegion, csv_path: &Path, meta_path: &Path) -> Result<()> {
    let d = region.argmax.len();
    let mut writer = csv::Writer::from_path(csv_path)?;
    let header: Vec<String> = (1..=d).map(|j| format!("theta_{j}")).collect();
    writer.write_record(&header)?;
    for point in &region.accepted {
        let row: Vec<String> = point.iter().map(|v| format!("{v}")).collect();
        writer.write_record(&row)?;
    }
    writer.flush()?;
    let argmax: Vec<f64> = region.argmax.iter().copied().collect();
    let mut meta = String::new();
    meta.push_str(&format!("epsilon_n = {}\n", region.epsilon_n));
    meta.push_str(&format!("max_log_post = {}\n", region.max_log_post));
    meta.push_str(&format!("threshold = {}\n", region.threshold));
    meta.push_str(&format!("argmax = {argmax:?}\n"));
    if let Some(s) = region.spacing {
        meta.push_str(&format!("spacing = {s}\n"));
    }
    if let Some((lo, hi)) = region.hull {
        meta.push_str(&format!("hull_lower = {lo}\nhull_upper = {hi}\n"));
    }
    fs::write(meta_path, meta)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::{metropolis, ProposalSpec};
    use approx::assert_relative_eq;
    use nalgebra::{dvector, DMatrix};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn epsilon_schedule_values() {
        assert_relative_eq!(
            epsilon_schedule(5000, EpsilonKind::LogLogN).unwrap(),
            2.1424,
            epsilon = 5e-4
        );
        assert_relative_eq!(
            epsilon_schedule(5000, EpsilonKind::SqrtN).unwrap(),
            70.711,
            epsilon = 5e-3
        );
        assert_relative_eq!(
            epsilon_schedule(1000, EpsilonKind::LogN).unwrap(),
            6.9078,
            epsilon = 5e-4
        );
        assert!(epsilon_schedule(2, EpsilonKind::LogLogN).is_err());
    }

    #[test]
    fn quadratic_maximum_found_from_poor_starts() {
        let bounds = ThetaBox::new(vec![0.0], vec![5.0]).unwrap();
        let (x, v) = map_maximize(
            |theta: &DVector<f64>| -(theta[0] - 2.0).powi(2),
            &bounds,
            &[dvector![0.5], dvector![4.5]],
        )
        .unwrap();
        assert!((x[0] - 2.0).abs() < 1e-6, "argmax {}", x[0]);
        assert!(v > -1e-10);
    }

    #[test]
    fn plateau_maximum_matches_grid_scan() {
        // Flat top on [0, 5] with sharp quadratic shoulders, the shape a
        // partially identified posterior takes.
        let n = 5000.0;
        let target = |theta: &DVector<f64>| {
            let t = theta[0];
            let under = (-t).max(0.0);
            let over = (t - 5.0).max(0.0);
            -0.5 * n * (under * under + over * over)
        };
        let bounds = ThetaBox::new(vec![-2.0], vec![7.0]).unwrap();
        let starts = default_starts(&bounds, DEFAULT_START_COUNT);
        let (_, v) = map_maximize(target, &bounds, &starts).unwrap();
        let mut grid_best = f64::NEG_INFINITY;
        let mut t = -2.0;
        while t <= 7.0 {
            grid_best = grid_best.max(target(&dvector![t]));
            t += 1e-3;
        }
        assert!((v - grid_best).abs() < 1e-4, "simplex {v} vs grid {grid_best}");
    }

    #[test]
    fn all_dead_starts_error() {
        let bounds = ThetaBox::new(vec![0.0], vec![1.0]).unwrap();
        let r = map_maximize(
            |_: &DVector<f64>| f64::NEG_INFINITY,
            &bounds,
            &[dvector![0.2], dvector![0.8]],
        );
        assert!(matches!(r, Err(Error::Optimization(_))));
    }

    #[test]
    fn disk_level_set_on_grid() {
        let bounds = ThetaBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let region = level_set_region(
            |theta: &DVector<f64>| -(theta[0] * theta[0] + theta[1] * theta[1]),
            &bounds,
            0.25,
            LevelSetResolution::Grid { spacing: 0.05 },
        )
        .unwrap();
        assert!(region.max_log_post.abs() < 1e-10);
        for p in &region.accepted {
            let r2 = p[0] * p[0] + p[1] * p[1];
            assert!(r2 <= 0.25 + 1e-7, "accepted point at radius^2 {r2}");
        }
        // Every strictly interior lattice point is accepted.
        let mut interior = 0;
        for i in 0..41 {
            for k in 0..41 {
                let x = -1.0 + i as f64 * 0.05;
                let y = -1.0 + k as f64 * 0.05;
                if x * x + y * y <= 0.25 - 1e-7 {
                    interior += 1;
                    assert!(
                        region
                            .accepted
                            .iter()
                            .any(|p| (p[0] - x).abs() < 1e-12 && (p[1] - y).abs() < 1e-12),
                        "missing interior point ({x}, {y})"
                    );
                }
            }
        }
        assert!(interior > 0);
        let xs: Vec<f64> = region.accepted.iter().map(|p| p[0]).collect();
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!((lo + 0.5).abs() <= 0.05 + 1e-9);
        assert!((hi - 0.5).abs() <= 0.05 + 1e-9);
    }

    #[test]
    fn level_sets_nest_in_epsilon() {
        let bounds = ThetaBox::new(vec![-3.0], vec![3.0]).unwrap();
        let target =
            |theta: &DVector<f64>| -(theta[0] - 0.7).powi(2) - 0.3 * (theta[0] - 0.7).powi(4);
        let small = level_set_region(target, &bounds, 0.5, LevelSetResolution::Grid {
            spacing: 0.01,
        })
        .unwrap();
        let large = level_set_region(target, &bounds, 2.0, LevelSetResolution::Grid {
            spacing: 0.01,
        })
        .unwrap();
        assert!(small.accepted.len() <= large.accepted.len());
        for p in &small.accepted {
            assert!(
                large
                    .accepted
                    .iter()
                    .any(|q| (q[0] - p[0]).abs() < 1e-12),
                "point {} in the tighter set is missing from the looser one",
                p[0]
            );
        }
    }

    #[test]
    fn log_constant_shift_changes_nothing() {
        let bounds = ThetaBox::new(vec![-3.0], vec![3.0]).unwrap();
        let base = |theta: &DVector<f64>| -(theta[0] + 0.4).powi(2);
        let shifted = |theta: &DVector<f64>| -(theta[0] + 0.4).powi(2) + 123.456;
        let a = level_set_region(base, &bounds, 1.0, LevelSetResolution::Grid { spacing: 0.01 })
            .unwrap();
        let b = level_set_region(shifted, &bounds, 1.0, LevelSetResolution::Grid {
            spacing: 0.01,
        })
        .unwrap();
        assert_eq!(a.accepted.len(), b.accepted.len());
        for (p, q) in a.accepted.iter().zip(&b.accepted) {
            assert_eq!(p[0], q[0]);
        }
        assert_relative_eq!(b.max_log_post - a.max_log_post, 123.456, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_chain_interval_collapses() {
        let b = 100;
        let chain = Chain {
            draws: DMatrix::from_element(b, 1, 3.25),
            log_post: DVector::zeros(b),
            acceptance_rate: 1.0,
            seed: 0,
            burn_in: 0,
        };
        let est = quantile_set_estimate(&chain, |t: &DVector<f64>| t[0], "theta", 0.01).unwrap();
        assert_eq!((est.lower, est.upper), (3.25, 3.25));
    }

    #[test]
    fn quantile_intervals_nest_in_pi() {
        let chain = metropolis(
            |theta: &DVector<f64>| -0.5 * theta[0] * theta[0],
            &dvector![0.0],
            &ProposalSpec::isotropic(1, 2.0).unwrap(),
            5_000,
            500,
            21,
        )
        .unwrap();
        let g = |t: &DVector<f64>| t[0];
        let wide = quantile_set_estimate(&chain, g, "theta", 0.01).unwrap();
        let tight = quantile_set_estimate(&chain, g, "theta", 0.10).unwrap();
        assert!(wide.lower <= tight.lower);
        assert!(tight.upper <= wide.upper);
        assert!(quantile_set_estimate(&chain, g, "theta", 0.6).is_err());
    }

    #[test]
    fn chain_filtered_level_set_respects_threshold() {
        let target = |theta: &DVector<f64>| {
            -0.5 * (theta[0] * theta[0] + theta[1] * theta[1] + theta[2] * theta[2])
        };
        let chain = metropolis(
            target,
            &dvector![0.0, 0.0, 0.0],
            &ProposalSpec::isotropic(3, 1.0).unwrap(),
            4_000,
            400,
            13,
        )
        .unwrap();
        let bounds = ThetaBox::new(vec![-5.0; 3], vec![5.0; 3]).unwrap();
        let region =
            level_set_region(target, &bounds, 2.0, LevelSetResolution::ChainDraws(&chain))
                .unwrap();
        assert!(region.max_log_post.abs() < 1e-6);
        for p in &region.accepted {
            assert!(target(p) >= region.threshold - 1e-12);
        }
        assert!(!region.accepted.is_empty());
        assert!(region.hull.is_none());
    }

    #[test]
    fn hausdorff_examples_and_axioms() {
        let a = vec![dvector![0.0]];
        let b = vec![dvector![1.0]];
        assert_eq!(hausdorff(&a, &b).unwrap(), 1.0);
        assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
        let a2 = vec![dvector![0.0, 0.0], dvector![1.0, 0.0]];
        let b2 = vec![dvector![0.0, 1.0]];
        assert_relative_eq!(hausdorff(&a2, &b2).unwrap(), 2.0_f64.sqrt(), epsilon = 1e-15);
        assert!(hausdorff(&a, &[]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut random_set = |len: usize| -> Vec<DVector<f64>> {
            (0..len)
                .map(|_| DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0)))
                .collect()
        };
        for _ in 0..50 {
            let x = random_set(4);
            let y = random_set(3);
            let z = random_set(5);
            let dxy = hausdorff(&x, &y).unwrap();
            let dyx = hausdorff(&y, &x).unwrap();
            assert_eq!(dxy, dyx);
            let dxz = hausdorff(&x, &z).unwrap();
            let dzy = hausdorff(&z, &y).unwrap();
            assert!(dxy <= dxz + dzy + 1e-12, "triangle inequality violated");
        }
    }

    #[test]
    fn level_set_round_trips_to_disk() {
        let bounds = ThetaBox::new(vec![-1.0], vec![1.0]).unwrap();
        let region = level_set_region(
            |theta: &DVector<f64>| -theta[0] * theta[0],
            &bounds,
            0.25,
            LevelSetResolution::Grid { spacing: 0.1 },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("region.csv");
        let meta_path = dir.path().join("region.meta.toml");
        save_level_set(&region, &csv_path, &meta_path).unwrap();
        let mut reader = csv::Reader::from_path(&csv_path).unwrap();
        let rows: Vec<_> = reader.records().collect::<std::result::Result<_, _>>().unwrap();
        assert_eq!(rows.len(), region.accepted.len());
        let meta = fs::read_to_string(&meta_path).unwrap();
        assert!(meta.contains("epsilon_n = 0.25"));
        assert!(meta.contains("hull_lower"));
    }
}
