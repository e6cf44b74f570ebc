//! Joint moment and parameter selection by maximum posterior criterion.
//!
//! A candidate pairs a non-empty subset of the p moment inequalities
//! with a mask of free parameter components (masked-out components are
//! pinned at zero). Each candidate is scored by an integrated
//! likelihood; normalized scores give a posterior over candidates and
//! the argmax is the selected combination.
//!
//! Two scoring routes are provided. The first keeps the exponential
//! slack prior on the selected moments only and integrates the free
//! parameters against an explicit proper prior:
//!
//! ```text
//! ln IL_1 = sum_{j in s} ln psi_j
//!         + ln int p(theta) P(Z_theta >= 0)
//!                  exp(-psi_s' mbar_s + psi_s' V_s psi_s / 2n) dtheta,
//! Z_theta ~ N(mbar_s - V_s psi_s / n, V_s / n).
//! ```
//!
//! The second keeps all p moments, placing a N(0, sigma_n^2 I) working
//! prior on the slack of the unselected ones and N(0, n sigma_n^2 I) on
//! the free parameters. With S_n = V/n + blockdiag(0, sigma_n^2 I),
//! S_n^-1 = n [[Sigma1, Sigma3], [Sigma3', Sigma2]] and
//! V2 = V22 + n sigma_n^2 I, both Gaussian slack integrals close:
//!
//! ```text
//! ln L(theta) = sum_{j in s} ln psi_j
//!             - (p-m)/2 ln 2 pi + (p-m)/2 ln n - 1/2 ln det V2
//!             + ln P(Z_theta >= 0) + tau(theta),
//! tau = -(n/2) c' V2^-1 c - psi_s' (Sigma1^-1 Sigma3 c + u) + psi_s' Sigma1^-1 psi_s / 2n,
//! Z_theta ~ N(u + Sigma1^-1 Sigma3 c - Sigma1^-1 psi_s / n, Sigma1^-1 / n),
//! ```
//!
//! where u and c are the sample moment means of the selected and
//! unselected rows. Every 2 pi power and determinant is carried
//! exactly, so scores are comparable across candidates of different
//! sizes without any cancellation argument.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::likelihood::OrthantSettings;
use crate::model::{MomentModel, PopulationMoments, ThetaBox};
use crate::orthant::{log_orthant_probability, OrthantQuery};
use crate::prior::{Hyperparameters, ThetaPrior};
use crate::quad::{log_integral_1d, log_integral_2d, log_integral_mc_box};
use crate::stats::log_sum_exp;

/// One candidate: which moment inequalities hold, which parameter
/// components are free. Indices are 1-based in both sets.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Combination {
    pub moments: BTreeSet<usize>,
    pub free: BTreeSet<usize>,
}

impl Combination {
    pub fn new(
        moments: impl IntoIterator<Item = usize>,
        free: impl IntoIterator<Item = usize>,
        p: usize,
        k: usize,
    ) -> Result<Self> {
        let moments: BTreeSet<usize> = moments.into_iter().collect();
        let free: BTreeSet<usize> = free.into_iter().collect();
        if moments.is_empty() {
            return Err(Error::InvalidArgument(
                "a candidate must select at least one moment".into(),
            ));
        }
        if let Some(&j) = moments.iter().find(|&&j| j == 0 || j > p) {
            return Err(Error::InvalidArgument(format!(
                "moment index {j} outside 1..={p}"
            )));
        }
        if let Some(&j) = free.iter().find(|&&j| j == 0 || j > k) {
            return Err(Error::InvalidArgument(format!(
                "parameter index {j} outside 1..={k}"
            )));
        }
        Ok(Self { moments, free })
    }

    /// Number of selected moments.
    pub fn m(&self) -> usize {
        self.moments.len()
    }

    /// Number of free parameter components.
    pub fn t(&self) -> usize {
        self.free.len()
    }

    /// Zero-based selected moment indices, ascending.
    pub fn moment_indices(&self) -> Vec<usize> {
        self.moments.iter().map(|&j| j - 1).collect()
    }

    /// Zero-based free parameter indices, ascending.
    pub fn free_indices(&self) -> Vec<usize> {
        self.free.iter().map(|&j| j - 1).collect()
    }

    pub fn moments_label(&self) -> String {
        let parts: Vec<String> = self.moments.iter().map(|j| j.to_string()).collect();
        parts.join("+")
    }

    pub fn free_label(&self) -> String {
        if self.free.is_empty() {
            "none".into()
        } else {
            let parts: Vec<String> = self.free.iter().map(|j| j.to_string()).collect();
            parts.join("+")
        }
    }
}

/// Allow-lists restricting candidate enumeration.
#[derive(Debug, Clone, Default)]
pub struct CandidateConstraints {
    /// When set, only these moment subsets are kept.
    pub moment_subsets: Option<Vec<BTreeSet<usize>>>,
    /// When set, only these free masks are kept.
    pub free_masks: Option<Vec<BTreeSet<usize>>>,
}

/// All candidates: non-empty moment subsets crossed with all free
/// masks, in ascending lexicographic order; `2^k (2^p - 1)` of them
/// without constraints.
pub fn enumerate_candidates(
    p: usize,
    k: usize,
    constraints: Option<&CandidateConstraints>,
) -> Result<Vec<Combination>> {
    if p == 0 || k == 0 {
        return Err(Error::InvalidArgument(
            "need at least one moment and one parameter component".into(),
        ));
    }
    if p > 20 || k > 20 {
        return Err(Error::InvalidArgument(format!(
            "candidate space 2^{k} (2^{p} - 1) is too large to enumerate"
        )));
    }
    let subsets = |count: usize, skip_empty: bool| -> Vec<BTreeSet<usize>> {
        let mut all: Vec<BTreeSet<usize>> = (0..(1usize << count))
            .filter(|mask| !(skip_empty && *mask == 0))
            .map(|mask| (0..count).filter(|j| mask >> j & 1 == 1).map(|j| j + 1).collect())
            .collect();
        all.sort();
        all
    };
    let moment_sets = subsets(p, true);
    let free_sets = subsets(k, false);
    let mut out = Vec::with_capacity(moment_sets.len() * free_sets.len());
    for ms in &moment_sets {
        if let Some(allow) = constraints.and_then(|c| c.moment_subsets.as_ref()) {
            if !allow.contains(ms) {
                continue;
            }
        }
        for fs in &free_sets {
            if let Some(allow) = constraints.and_then(|c| c.free_masks.as_ref()) {
                if !allow.contains(fs) {
                    continue;
                }
            }
            out.push(Combination { moments: ms.clone(), free: fs.clone() });
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::InvalidArgument(
            "constraints filtered out every candidate".into(),
        ));
    }
    Ok(out)
}

/// Decides by grid search whether a candidate is compatible with known
/// population moments: true iff some masked grid point satisfies every
/// selected population moment above `-tolerance`, with the tolerance a
/// Lipschitz bound times the grid spacing. A test utility; selection
/// itself never sees population quantities.
pub fn true_combination_oracle(
    comb: &Combination,
    population: &PopulationMoments,
    bounds: &ThetaBox,
    spacing: f64,
) -> Result<bool> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "grid spacing must be positive, got {spacing}"
        )));
    }
    let d = bounds.dim();
    if let Some(&j) = comb.free.iter().max() {
        if j > d {
            return Err(Error::Dimension(format!(
                "free index {j} outside the {d}-dimensional box"
            )));
        }
    }
    let sel = comb.moment_indices();
    if sel.iter().any(|&j| j >= population.p()) {
        return Err(Error::Dimension("moment index outside population".into()));
    }
    let free = comb.free_indices();
    let t = free.len();
    // Per-row slack: the mean can move at most sum_j |g_rj| * spacing
    // between neighbouring grid points over the free coordinates.
    let g = population.coefficients().0;
    let tol: Vec<f64> = sel
        .iter()
        .map(|&r| {
            free.iter().map(|&j| g[(r, j)].abs()).sum::<f64>() * spacing + 1e-12
        })
        .collect();
    let mut theta = DVector::zeros(d);
    if t == 0 {
        let mean = population.mean(&theta)?;
        return Ok(sel.iter().zip(&tol).all(|(&r, &tl)| mean[r] >= -tl));
    }
    let counts: Vec<usize> = free
        .iter()
        .map(|&j| (bounds.width(j) / spacing + 1e-9).floor() as usize + 1)
        .collect();
    let total: usize = counts.iter().product();
    if total > 50_000_000 {
        return Err(Error::InvalidArgument(format!(
            "oracle grid of {total} points is too fine; coarsen the spacing"
        )));
    }
    let mut index = vec![0usize; t];
    loop {
        for (slot, &j) in free.iter().enumerate() {
            theta[j] = bounds.lower()[j] + index[slot] as f64 * spacing;
        }
        let mean = population.mean(&theta)?;
        if sel.iter().zip(&tol).all(|(&r, &tl)| mean[r] >= -tl) {
            return Ok(true);
        }
        let mut slot = 0;
        loop {
            if slot == t {
                return Ok(false);
            }
            index[slot] += 1;
            if index[slot] < counts[slot] {
                break;
            }
            index[slot] = 0;
            slot += 1;
        }
    }
}

/// Log-weight `alpha (m - t) ln n` favouring many moments and few free
/// parameters; normalization happens in [`mpc_select`].
pub fn candidate_prior_a1(comb: &Combination, n: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "prior sharpness must be positive, got {alpha}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("need n >= 2 for the log weight".into()));
    }
    Ok(alpha * (comb.m() as f64 - comb.t() as f64) * (n as f64).ln())
}

/// Numerical controls for the candidate evidence integrals.
#[derive(Debug, Clone)]
pub struct SelectionSettings {
    /// Log-space panel agreement tolerance for adaptive quadrature.
    pub quad_log_tol: f64,
    pub max_depth: usize,
    /// Sample count for Monte Carlo integrals over three or more free
    /// coordinates.
    pub mc_samples: usize,
    pub seed: u64,
    pub orthant: OrthantSettings,
}

impl Default for SelectionSettings {
    fn default() -> Self {
        Self {
            quad_log_tol: 1e-8,
            max_depth: 50,
            mc_samples: 200_000,
            seed: 0,
            orthant: OrthantSettings::default(),
        }
    }
}

/// Selected-rows affine view `mbar_s(x) = A x + b` over the free
/// coordinates, plus knot positions where individual rows cross zero.
struct MaskedAffine {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl MaskedAffine {
    fn new(
        rows: &[usize],
        free: &[usize],
        abar: &DMatrix<f64>,
        bbar: &DVector<f64>,
    ) -> Self {
        let a = DMatrix::from_fn(rows.len(), free.len(), |i, j| abar[(rows[i], free[j])]);
        let b = DVector::from_fn(rows.len(), |i, _| bbar[rows[i]]);
        Self { a, b }
    }

    fn mean(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b
    }

    /// Zero crossings of each row along `axis`, other coordinates at 0.
    fn axis_roots(&self, axis: usize) -> Vec<f64> {
        (0..self.a.nrows())
            .filter_map(|r| {
                let slope = self.a[(r, axis)];
                if slope.abs() > 1e-12 {
                    Some(-self.b[r] / slope)
                } else {
                    None
                }
            })
            .collect()
    }
}

fn embed(free: &[usize], x: &DVector<f64>, d: usize) -> DVector<f64> {
    let mut theta = DVector::zeros(d);
    for (slot, &j) in free.iter().enumerate() {
        theta[j] = x[slot];
    }
    theta
}

/// Integrated likelihood keeping only the selected moments, free
/// parameters integrated against `theta_prior` restricted to the masked
/// box. Exact over the slack variables; the remaining t-dimensional
/// integral is adaptive quadrature for t <= 2 and seeded Monte Carlo
/// beyond.
pub fn log_integrated_likelihood_a1(
    comb: &Combination,
    data: &Dataset,
    model: &MomentModel,
    hyper: &Hyperparameters,
    theta_prior: &ThetaPrior,
    settings: &SelectionSettings,
) -> Result<f64> {
    validate_candidate(comb, model, hyper)?;
    if theta_prior.dim() != model.d() {
        return Err(Error::Dimension(format!(
            "prior dimension {} vs model dimension {}",
            theta_prior.dim(),
            model.d()
        )));
    }
    let n = data.n() as f64;
    let sel = comb.moment_indices();
    let free = comb.free_indices();
    let sub = hyper.restrict(&sel)?;
    let psi = sub.psi().clone_owned();
    let cov = sub.v() / n;
    let v_psi_over_n = sub.v() * &psi / n;
    let ln_psi_sum: f64 = psi.iter().map(|x| x.ln()).sum();
    let quad_const = psi.dot(&(sub.v() * &psi)) / (2.0 * n);

    let affine = if model.is_affine() {
        let (abar, bbar) = model.averaged_coefficients(data)?;
        Some(MaskedAffine::new(&sel, &free, &abar, &bbar))
    } else {
        None
    };
    let masked_mean = |x: &DVector<f64>| -> Result<DVector<f64>> {
        match &affine {
            Some(aff) => Ok(aff.mean(x)),
            None => {
                let theta = embed(&free, x, model.d());
                let full = model.sample_moment_mean(data, &theta)?;
                Ok(DVector::from_fn(sel.len(), |i, _| full[sel[i]]))
            }
        }
    };
    let log_kernel = |x: &DVector<f64>| -> Result<f64> {
        let mbar = masked_mean(x)?;
        let query = OrthantQuery {
            mean: &mbar - &v_psi_over_n,
            cov: cov.clone(),
            method: settings.orthant.method,
            mc_samples: settings.orthant.mc_samples,
            seed: settings.orthant.seed,
        };
        Ok(log_orthant_probability(&query)? - psi.dot(&mbar))
    };

    let t = free.len();
    if t == 0 {
        let point = DVector::zeros(0);
        return Ok(ln_psi_sum + quad_const + log_kernel(&point)?);
    }
    let restricted = theta_prior.restrict(&free)?;
    let support = restricted.support().clone();
    let integrand_nan = |x: &DVector<f64>| -> f64 {
        let lp = restricted.log_density(x);
        if lp == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        match log_kernel(x) {
            Ok(v) => lp + v,
            Err(_) => f64::NAN,
        }
    };
    let integral = match t {
        1 => {
            let knots = affine.as_ref().map(|a| a.axis_roots(0)).unwrap_or_default();
            log_integral_1d(
                |x| integrand_nan(&DVector::from_row_slice(&[x])),
                support.lower()[0],
                support.upper()[0],
                &knots,
                settings.quad_log_tol,
                settings.max_depth,
            )?
        }
        2 => {
            let (kx, ky) = match &affine {
                Some(a) => (a.axis_roots(0), a.axis_roots(1)),
                None => (Vec::new(), Vec::new()),
            };
            log_integral_2d(
                |x, y| integrand_nan(&DVector::from_row_slice(&[x, y])),
                support.lower()[0],
                support.upper()[0],
                support.lower()[1],
                support.upper()[1],
                &kx,
                &ky,
                settings.quad_log_tol,
                settings.max_depth,
            )?
        }
        _ => {
            let lower: Vec<f64> = support.lower().iter().copied().collect();
            let upper: Vec<f64> = support.upper().iter().copied().collect();
            log_integral_mc_box(
                |x: &[f64]| integrand_nan(&DVector::from_row_slice(x)),
                &lower,
                &upper,
                settings.mc_samples,
                settings.seed,
            )?
        }
    };
    Ok(ln_psi_sum + quad_const + integral)
}

/// Reordered covariance blocks for the all-moments working-prior score.
#[derive(Debug, Clone)]
pub struct ApproachTwoBlocks {
    /// `V/n + blockdiag(0_m, sigma_n^2 I)` in (selected, unselected)
    /// order.
    pub s_n: DMatrix<f64>,
    /// Blocks of `S_n^-1 / n`: m x m.
    pub sigma1: DMatrix<f64>,
    /// (p-m) x (p-m); empty when every moment is selected.
    pub sigma2: DMatrix<f64>,
    /// m x (p-m); empty when every moment is selected.
    pub sigma3: DMatrix<f64>,
    /// `V22 + n sigma_n^2 I`; empty when every moment is selected.
    pub v2: DMatrix<f64>,
    pub sigma_n2: f64,
    /// Zero-based moment order: selected ascending, then unselected.
    pub order: Vec<usize>,
    pub m: usize,
}

/// Builds the block decomposition for a candidate.
pub fn assemble_a2_blocks(
    comb: &Combination,
    hyper: &Hyperparameters,
    n: usize,
    sigma_n2: f64,
) -> Result<ApproachTwoBlocks> {
    if !(sigma_n2 > 0.0 && sigma_n2.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "working prior scale must be positive, got {sigma_n2}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("need a positive sample size".into()));
    }
    let p = hyper.p();
    if let Some(&j) = comb.moments.iter().max() {
        if j > p {
            return Err(Error::Dimension(format!("moment index {j} outside 1..={p}")));
        }
    }
    let sel = comb.moment_indices();
    let m = sel.len();
    let mut order = sel.clone();
    order.extend((0..p).filter(|j| !sel.contains(j)));
    let nf = n as f64;
    let v = DMatrix::from_fn(p, p, |i, j| hyper.v()[(order[i], order[j])]);
    let mut s_n = &v / nf;
    for j in m..p {
        s_n[(j, j)] += sigma_n2;
    }
    let s_n_inv = s_n
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("working covariance".into()))?
        .inverse();
    let block = |rows: std::ops::Range<usize>, cols: std::ops::Range<usize>| -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
            s_n_inv[(rows.start + i, cols.start + j)] / nf
        })
    };
    let sigma1 = block(0..m, 0..m);
    let sigma2 = block(m..p, m..p);
    let sigma3 = block(0..m, m..p);
    let mut v2 = DMatrix::from_fn(p - m, p - m, |i, j| v[(m + i, m + j)]);
    for j in 0..(p - m) {
        v2[(j, j)] += nf * sigma_n2;
    }
    Ok(ApproachTwoBlocks { s_n, sigma1, sigma2, sigma3, v2, sigma_n2, order, m })
}

/// Integrated likelihood keeping all p moments: exponential slack on
/// the selected rows, a `N(0, sigma_n^2 I)` working prior on the slack
/// of the unselected rows, and a `N(0, n sigma_n^2 I)` working prior on
/// the free parameters. Affine models only.
///
/// The parameter prior is the untruncated normal density, but the
/// integral runs only over `bounds` (clipped to eight prior standard
/// deviations). Restricting to the stated parameter space is what lets
/// the data reject moments that only hold far outside it, while the
/// unnormalized density keeps the dimension penalty that makes scores
/// comparable across candidates with different free-parameter counts.
pub fn log_integrated_likelihood_a2(
    comb: &Combination,
    data: &Dataset,
    model: &MomentModel,
    hyper: &Hyperparameters,
    sigma_n2: f64,
    bounds: &ThetaBox,
    settings: &SelectionSettings,
) -> Result<f64> {
    validate_candidate(comb, model, hyper)?;
    if bounds.dim() != model.d() {
        return Err(Error::Dimension(format!(
            "bounds have dimension {}, model expects {}",
            bounds.dim(),
            model.d()
        )));
    }
    if !model.is_affine() {
        return Err(Error::InvalidArgument(
            "the working-prior score needs an affine moment model".into(),
        ));
    }
    let n = data.n();
    let nf = n as f64;
    let p = model.p();
    let blocks = assemble_a2_blocks(comb, hyper, n, sigma_n2)?;
    let m = blocks.m;
    let sel = comb.moment_indices();
    let free = comb.free_indices();
    let t = free.len();

    let psi = DVector::from_fn(m, |i, _| hyper.psi()[sel[i]]);
    let ln_psi_sum: f64 = psi.iter().map(|x| x.ln()).sum();
    // Sigma1^-1 as the Schur complement V11 - V12 V2^-1 V21 of the
    // reordered covariance; equals V11 when nothing is unselected.
    let v_re = DMatrix::from_fn(p, p, |i, j| hyper.v()[(blocks.order[i], blocks.order[j])]);
    let v11 = DMatrix::from_fn(m, m, |i, j| v_re[(i, j)]);
    let v12 = DMatrix::from_fn(m, p - m, |i, j| v_re[(i, m + j)]);
    let v2_chol = if p > m {
        Some(
            blocks
                .v2
                .clone()
                .cholesky()
                .ok_or_else(|| Error::NotPositiveDefinite("unselected block".into()))?,
        )
    } else {
        None
    };
    let sigma1_inv = match &v2_chol {
        Some(chol) => &v11 - &v12 * chol.solve(&v12.transpose()),
        None => v11.clone(),
    };
    // Sigma1^-1 Sigma3 = -V12 V2^-1 from the block-inverse identities.
    let bmat = match &v2_chol {
        Some(chol) => -(&v12 * chol.inverse()),
        None => DMatrix::zeros(m, 0),
    };
    let ln_det_v2 = match &v2_chol {
        Some(chol) => 2.0 * (0..p - m).map(|j| chol.l()[(j, j)].ln()).sum::<f64>(),
        None => 0.0,
    };
    let pm = (p - m) as f64;
    let constant = ln_psi_sum - 0.5 * pm * (2.0 * std::f64::consts::PI).ln()
        + 0.5 * pm * nf.ln()
        - 0.5 * ln_det_v2
        + psi.dot(&(&sigma1_inv * &psi)) / (2.0 * nf);
    let shift = &sigma1_inv * &psi / nf;
    let cov_z = &sigma1_inv / nf;

    let (abar, bbar) = model.averaged_coefficients(data)?;
    let sel_aff = MaskedAffine::new(&sel, &free, &abar, &bbar);
    let unsel: Vec<usize> = blocks.order[m..].to_vec();
    let unsel_aff = MaskedAffine::new(&unsel, &free, &abar, &bbar);

    let log_cond = |x: &DVector<f64>| -> Result<f64> {
        let u = sel_aff.mean(x);
        let c = unsel_aff.mean(x);
        let mut tau = -psi.dot(&u);
        let mut mean = &u - &shift;
        if p > m {
            let chol = v2_chol.as_ref().expect("built when p > m");
            tau -= 0.5 * nf * c.dot(&chol.solve(&c));
            let bc = &bmat * &c;
            tau -= psi.dot(&bc);
            mean += bc;
        }
        let query = OrthantQuery {
            mean,
            cov: cov_z.clone(),
            method: settings.orthant.method,
            mc_samples: settings.orthant.mc_samples,
            seed: settings.orthant.seed,
        };
        Ok(constant + log_orthant_probability(&query)? + tau)
    };

    if t == 0 {
        return log_cond(&DVector::zeros(0));
    }
    // Free parameters carry a N(0, n sigma_n^2 I) working prior; the
    // domain is the stated box clipped to +-8 prior standard
    // deviations.
    let prior_var = nf * sigma_n2;
    let half = 8.0 * prior_var.sqrt();
    let mut lo = Vec::with_capacity(t);
    let mut hi = Vec::with_capacity(t);
    for &j in &free {
        let a = bounds.lower()[j].max(-half);
        let b = bounds.upper()[j].min(half);
        if !(a < b) {
            return Err(Error::InvalidArgument(format!(
                "parameter {} range [{a}, {b}] carries no working prior mass",
                j + 1
            )));
        }
        lo.push(a);
        hi.push(b);
    }
    let ln_prior_1d = |x: f64| -> f64 {
        -0.5 * (2.0 * std::f64::consts::PI * prior_var).ln() - x * x / (2.0 * prior_var)
    };
    let integrand_nan = |x: &DVector<f64>| -> f64 {
        match log_cond(x) {
            Ok(v) => v + x.iter().map(|&xi| ln_prior_1d(xi)).sum::<f64>(),
            Err(_) => f64::NAN,
        }
    };
    let mut knots_per_axis: Vec<Vec<f64>> = Vec::with_capacity(t);
    for axis in 0..t {
        let mut ks = sel_aff.axis_roots(axis);
        ks.extend(unsel_aff.axis_roots(axis));
        ks.push(0.0);
        knots_per_axis.push(ks);
    }
    match t {
        1 => log_integral_1d(
            |x| integrand_nan(&DVector::from_row_slice(&[x])),
            lo[0],
            hi[0],
            &knots_per_axis[0],
            settings.quad_log_tol,
            settings.max_depth,
        ),
        2 => log_integral_2d(
            |x, y| integrand_nan(&DVector::from_row_slice(&[x, y])),
            lo[0],
            hi[0],
            lo[1],
            hi[1],
            &knots_per_axis[0],
            &knots_per_axis[1],
            settings.quad_log_tol,
            settings.max_depth,
        ),
        _ => log_integral_mc_box(
            |x: &[f64]| integrand_nan(&DVector::from_row_slice(x)),
            &lo,
            &hi,
            settings.mc_samples,
            settings.seed,
        ),
    }
}

fn validate_candidate(
    comb: &Combination,
    model: &MomentModel,
    hyper: &Hyperparameters,
) -> Result<()> {
    if model.p() != hyper.p() {
        return Err(Error::Dimension(format!(
            "model has p = {}, hyperparameters have p = {}",
            model.p(),
            hyper.p()
        )));
    }
    if let Some(&j) = comb.moments.iter().max() {
        if j > model.p() {
            return Err(Error::Dimension(format!(
                "moment index {j} outside 1..={}",
                model.p()
            )));
        }
    }
    if let Some(&j) = comb.free.iter().max() {
        if j > model.d() {
            return Err(Error::Dimension(format!(
                "parameter index {j} outside 1..={}",
                model.d()
            )));
        }
    }
    Ok(())
}

/// Scoring rule for [`mpc_select`].
#[derive(Debug, Clone)]
pub enum SelectionApproach {
    /// Selected-moments evidence with candidate log-prior
    /// `alpha (m - t) ln n` and an explicit free-parameter prior.
    A1 { alpha: f64, theta_prior: ThetaPrior },
    /// All-moments working-prior evidence over the stated parameter
    /// box, with a flat candidate prior.
    A2 { sigma_n2: f64, bounds: ThetaBox },
}

impl SelectionApproach {
    pub fn label(&self) -> &'static str {
        match self {
            SelectionApproach::A1 { .. } => "selected-moments",
            SelectionApproach::A2 { .. } => "working-prior",
        }
    }

    pub fn params_label(&self) -> String {
        match self {
            SelectionApproach::A1 { alpha, .. } => format!("alpha = {alpha}"),
            SelectionApproach::A2 { sigma_n2, .. } => format!("sigma_n2 = {sigma_n2}"),
        }
    }
}

/// One scored candidate.
#[derive(Debug, Clone)]
pub struct CandidateScore {
    pub comb: Combination,
    pub log_evidence: f64,
    pub log_prior: f64,
    pub weight: f64,
}

/// Normalized posterior over candidates.
#[derive(Debug, Clone)]
pub struct CandidatePosterior {
    /// Scores in the order the candidates were given.
    pub entries: Vec<CandidateScore>,
    pub approach_label: String,
    pub params_label: String,
    pub argmax: Combination,
}

impl CandidatePosterior {
    pub fn weight_of(&self, comb: &Combination) -> Option<f64> {
        self.entries.iter().find(|e| &e.comb == comb).map(|e| e.weight)
    }
}

/// Normalizes log scores into probabilities by stable log-sum-exp;
/// invariant under adding any constant to every score.
pub fn normalized_weights(log_scores: &[f64]) -> Result<Vec<f64>> {
    let lse = log_sum_exp(log_scores);
    if lse == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument(
            "every candidate has zero evidence".into(),
        ));
    }
    Ok(log_scores.iter().map(|s| (s - lse).exp()).collect())
}

/// Scores every candidate, normalizes, and returns the posterior with
/// its argmax (ties broken toward the lexicographically smallest
/// candidate).
pub fn mpc_select(
    candidates: &[Combination],
    data: &Dataset,
    model: &MomentModel,
    hyper: &Hyperparameters,
    approach: &SelectionApproach,
    settings: &SelectionSettings,
) -> Result<CandidatePosterior> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidates to score".into()));
    }
    let mut log_evidence = Vec::with_capacity(candidates.len());
    let mut log_prior = Vec::with_capacity(candidates.len());
    for comb in candidates {
        match approach {
            SelectionApproach::A1 { alpha, theta_prior } => {
                log_evidence.push(log_integrated_likelihood_a1(
                    comb,
                    data,
                    model,
                    hyper,
                    theta_prior,
                    settings,
                )?);
                log_prior.push(candidate_prior_a1(comb, data.n(), *alpha)?);
            }
            SelectionApproach::A2 { sigma_n2, bounds } => {
                log_evidence.push(log_integrated_likelihood_a2(
                    comb, data, model, hyper, *sigma_n2, bounds, settings,
                )?);
                log_prior.push(0.0);
            }
        }
    }
    let scores: Vec<f64> = log_evidence
        .iter()
        .zip(&log_prior)
        .map(|(e, p)| e + p)
        .collect();
    let weights = normalized_weights(&scores)?;
    let mut entries = Vec::with_capacity(candidates.len());
    for i in 0..candidates.len() {
        entries.push(CandidateScore {
            comb: candidates[i].clone(),
            log_evidence: log_evidence[i],
            log_prior: log_prior[i],
            weight: weights[i],
        });
    }
    let mut best = 0usize;
    for i in 1..entries.len() {
        if entries[i].weight > entries[best].weight
            || (entries[i].weight == entries[best].weight && entries[i].comb < entries[best].comb)
        {
            best = i;
        }
    }
    Ok(CandidatePosterior {
        argmax: entries[best].comb.clone(),
        approach_label: approach.label().into(),
        params_label: approach.params_label(),
        entries,
    })
}

/// Writes one row per candidate, heaviest first, plus a metadata
/// sidecar echoing the argmax.
pub fn save_selection_report(
    posterior: &CandidatePosterior,
    csv_path: &Path,
    meta_path: &Path,
) -> Result<()> {
    let mut order: Vec<usize> = (0..posterior.entries.len()).collect();
    order.sort_by(|&i, &j| {
        let a = &posterior.entries[i];
        let b = &posterior.entries[j];
        b.weight
            .partial_cmp(&a.weight)
            .expect("weights are finite")
            .then_with(|| a.comb.cmp(&b.comb))
    });
    let mut writer = csv::Writer::from_path(csv_path)?;
    writer.write_record(["moment_subset", "free_mask", "log_evidence", "log_prior", "posterior_weight"])?;
    for &i in &order {
        let e = &posterior.entries[i];
        writer.write_record(&[
            e.comb.moments_label(),
            e.comb.free_label(),
            format!("{}", e.log_evidence),
            format!("{}", e.log_prior),
            format!("{}", e.weight),
        ])?;
    }
    writer.flush()?;
    let meta = format!(
        "approach = \"{}\"\nparams = \"{}\"\nargmax_moments = \"{}\"\nargmax_free = \"{}\"\n",
        posterior.approach_label,
        posterior.params_label,
        posterior.argmax.moments_label(),
        posterior.argmax.free_label(),
    );
    fs::write(meta_path, meta)?;
    Ok(())
}
