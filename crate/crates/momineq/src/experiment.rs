//! Batch experiment front end: declarative run configuration, seeded
//! per-cell data generation, and emission of tables, posterior curves,
//! draw clouds, level sets and selection reports as CSV plus metadata.
//!
//! Everything is deterministic. Cell seeds derive from the base seed
//! and a textual stream name, cells run sequentially in a fixed order,
//! and floats are written in shortest round-trip form, so rerunning a
//! config reproduces every output file byte for byte.

use std::env;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::dataset::load_dataset;
use crate::error::{Error, Result};
use crate::likelihood::LogLikelihoodContext;
use crate::mcmc::{default_burn_in, metropolis, save_chain, Chain, ProposalSpec};
use crate::model::{
    make_interval_mean_model, make_interval_regression_model, make_missing_data_model,
    MomentModel, ThetaBox,
};
use crate::prior::{Hyperparameters, PriorKind, ThetaPrior};
use crate::selection::{
    enumerate_candidates, mpc_select, save_selection_report, CandidateConstraints,
    SelectionApproach, SelectionSettings,
};
use crate::setestim::{
    epsilon_schedule, level_set_region, quantile_set_estimate, save_level_set, EpsilonKind,
    LevelSetResolution,
};
use crate::simulate::{
    example_5_3_model, gen_example_5_1, gen_example_5_2, gen_example_5_3,
    population_example_5_2,
};

/// Environment variable that, when set and non-empty, overrides the
/// configured output directory.
pub const OUT_DIR_ENV: &str = "MOMINEQ_OUT_DIR";

/// Which worked experiment a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentId {
    /// One-dimensional mean bracketed by two noisy order statistics.
    Ex51,
    /// Two-regressor interval regression with a parallelogram region.
    Ex52,
    /// Four-candidate moment selection with one false inequality.
    Ex53,
    /// User-supplied data file and model, interval estimates out.
    Custom,
}

impl ExperimentId {
    pub fn label(self) -> &'static str {
        match self {
            ExperimentId::Ex51 => "ex51",
            ExperimentId::Ex52 => "ex52",
            ExperimentId::Ex53 => "ex53",
            ExperimentId::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ex51" => Ok(ExperimentId::Ex51),
            "ex52" => Ok(ExperimentId::Ex52),
            "ex53" => Ok(ExperimentId::Ex53),
            "custom" => Ok(ExperimentId::Custom),
            other => Err(Error::Config(format!(
                "unknown experiment {other:?}; expected ex51, ex52, ex53 or custom"
            ))),
        }
    }
}

/// Shrinkage law for the quantile level of interval estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PiKind {
    /// `exp(-sqrt(n))`: essentially the chain extremes.
    ExpSqrtN,
    /// `1/n`.
    InverseN,
    /// `1/ln n`.
    InverseLogN,
}

impl PiKind {
    pub fn label(self) -> &'static str {
        match self {
            PiKind::ExpSqrtN => "exp-sqrt-n",
            PiKind::InverseN => "1-over-n",
            PiKind::InverseLogN => "1-over-log-n",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "exp-sqrt-n" => Ok(PiKind::ExpSqrtN),
            "1-over-n" => Ok(PiKind::InverseN),
            "1-over-log-n" => Ok(PiKind::InverseLogN),
            other => Err(Error::Config(format!(
                "unknown quantile law {other:?}; expected exp-sqrt-n, 1-over-n or 1-over-log-n"
            ))),
        }
    }

    pub fn value(self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            PiKind::ExpSqrtN => (-nf.sqrt()).exp(),
            PiKind::InverseN => 1.0 / nf,
            PiKind::InverseLogN => 1.0 / nf.ln(),
        }
    }
}

/// Scale law for the working-prior variance of the all-moments
/// selection approach.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaLaw {
    N,
    NSquared,
}

impl SigmaLaw {
    pub fn label(self) -> &'static str {
        match self {
            SigmaLaw::N => "n",
            SigmaLaw::NSquared => "n2",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(SigmaLaw::N),
            "n2" => Ok(SigmaLaw::NSquared),
            other => Err(Error::Config(format!(
                "unknown working-prior law {other:?}; expected n or n2"
            ))),
        }
    }

    pub fn value(self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            SigmaLaw::N => nf,
            SigmaLaw::NSquared => nf * nf,
        }
    }
}

/// Which selection evidence a config requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApproachKind {
    SelectedMoments,
    WorkingPrior,
}

impl ApproachKind {
    pub fn label(self) -> &'static str {
        match self {
            ApproachKind::SelectedMoments => "a1",
            ApproachKind::WorkingPrior => "a2",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "a1" => Ok(ApproachKind::SelectedMoments),
            "a2" => Ok(ApproachKind::WorkingPrior),
            other => Err(Error::Config(format!(
                "unknown selection approach {other:?}; expected a1 or a2"
            ))),
        }
    }
}

// ---------------------------------------------------------------------
// Raw config: what the TOML file and the CLI flags deserialize into.
// Every field is optional; resolution fills per-experiment defaults and
// reports all remaining problems at once.
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: Option<String>,
    pub n: Option<Vec<u64>>,
    pub seed: Option<u64>,
    pub psi: Option<Vec<f64>>,
    pub output_dir: Option<PathBuf>,
    pub v: Option<RawMatrix>,
    pub theta_prior: Option<RawPrior>,
    pub sampler: Option<RawSampler>,
    pub estimator: Option<RawEstimator>,
    pub selection: Option<RawSelection>,
    pub custom: Option<RawCustom>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMatrix {
    /// "identity" (default) or "explicit".
    pub kind: Option<String>,
    pub rows: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPrior {
    /// "flat" (default) or "normal".
    pub kind: Option<String>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub mean: Option<Vec<f64>>,
    pub variance: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSampler {
    pub b: Option<u64>,
    pub burn_in: Option<u64>,
    pub proposal_sd: Option<Vec<f64>>,
    pub init: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawEstimator {
    pub pi: Option<Vec<String>>,
    pub epsilon: Option<Vec<String>>,
    pub grid_spacing: Option<f64>,
    pub density_step: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSelection {
    pub approach: Option<String>,
    pub alpha: Option<f64>,
    pub sigma_n2: Option<Vec<String>>,
    pub moment_subsets: Option<Vec<Vec<usize>>>,
    pub free_masks: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCustom {
    pub data: Option<PathBuf>,
    /// "interval-mean", "missing-data" or "interval-regression".
    pub model: Option<String>,
    pub num_instruments: Option<u64>,
    pub num_regressors: Option<u64>,
}

impl RawConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Lays `over` on top of `self`: set fields of `over` win, nested
    /// sections merge field by field.
    pub fn overlaid(mut self, over: RawConfig) -> RawConfig {
        if over.experiment.is_some() {
            self.experiment = over.experiment;
        }
        if over.n.is_some() {
            self.n = over.n;
        }
        if over.seed.is_some() {
            self.seed = over.seed;
        }
        if over.psi.is_some() {
            self.psi = over.psi;
        }
        if over.output_dir.is_some() {
            self.output_dir = over.output_dir;
        }
        if over.v.is_some() {
            self.v = over.v;
        }
        if over.theta_prior.is_some() {
            self.theta_prior = over.theta_prior;
        }
        self.sampler = match (self.sampler, over.sampler) {
            (Some(mut a), Some(b)) => {
                if b.b.is_some() {
                    a.b = b.b;
                }
                if b.burn_in.is_some() {
                    a.burn_in = b.burn_in;
                }
                if b.proposal_sd.is_some() {
                    a.proposal_sd = b.proposal_sd;
                }
                if b.init.is_some() {
                    a.init = b.init;
                }
                Some(a)
            }
            (a, b) => b.or(a),
        };
        if over.estimator.is_some() {
            self.estimator = over.estimator;
        }
        if over.selection.is_some() {
            self.selection = over.selection;
        }
        if over.custom.is_some() {
            self.custom = over.custom;
        }
        self
    }
}

// ---------------------------------------------------------------------
// Resolved config.
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SamplerSpec {
    /// Retained draws.
    pub b: usize,
    pub burn_in: usize,
    pub proposal_sd: Vec<f64>,
    pub init: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EstimatorSpec {
    pub pi: Vec<PiKind>,
    pub epsilon: Vec<EpsilonKind>,
    /// Lattice spacing of grid level sets.
    pub grid_spacing: f64,
    /// Step of the posterior curve grid.
    pub density_step: f64,
}

#[derive(Debug, Clone)]
pub struct SelectionSpec {
    pub approach: ApproachKind,
    /// Candidate log-prior strength of the selected-moments approach.
    pub alpha: f64,
    /// One report per law, working-prior approach only.
    pub sigma_laws: Vec<SigmaLaw>,
    pub constraints: Option<CandidateConstraints>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CustomModelKind {
    IntervalMean,
    MissingData,
    IntervalRegression { instruments: usize, regressors: usize },
}

impl CustomModelKind {
    pub fn build(self) -> Result<MomentModel> {
        match self {
            CustomModelKind::IntervalMean => Ok(make_interval_mean_model()),
            CustomModelKind::MissingData => Ok(make_missing_data_model()),
            CustomModelKind::IntervalRegression { instruments, regressors } => {
                make_interval_regression_model(instruments, regressors)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CustomSpec {
    pub data: PathBuf,
    pub model: CustomModelKind,
}

/// A fully validated run request. Build one from a file or string with
/// [`ExperimentConfig::from_toml_str`], or take the per-experiment
/// defaults with [`ExperimentConfig::default_for`].
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub n: Vec<usize>,
    pub seed: u64,
    pub psi: Vec<f64>,
    pub v: DMatrix<f64>,
    pub theta_prior: ThetaPrior,
    pub sampler: SamplerSpec,
    pub estimator: EstimatorSpec,
    pub selection: Option<SelectionSpec>,
    pub out_dir: PathBuf,
    /// Kept private so configs only exist through [`Self::resolve`].
    custom_spec: Option<CustomSpec>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::resolve(RawConfig::from_toml_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::resolve(RawConfig::from_file(path)?)
    }

    /// The untouched defaults of one experiment.
    pub fn default_for(id: ExperimentId) -> Result<Self> {
        Self::resolve(RawConfig {
            experiment: Some(id.label().to_string()),
            ..RawConfig::default()
        })
    }

    /// Custom-run payload; present exactly when the experiment is
    /// [`ExperimentId::Custom`].
    pub fn custom(&self) -> Option<&CustomSpec> {
        self.custom_spec.as_ref()
    }

    /// Fills per-experiment defaults, then reports every remaining
    /// problem in one itemized error.
    pub fn resolve(raw: RawConfig) -> Result<Self> {
        let mut issues: Vec<String> = Vec::new();
        let id = match &raw.experiment {
            None => {
                return Err(Error::Config(
                    "config needs an experiment id: ex51, ex52, ex53 or custom".into(),
                ))
            }
            Some(s) => match ExperimentId::parse(s) {
                Ok(id) => id,
                Err(e) => return Err(e),
            },
        };
        let d = Defaults::for_id(id);

        let n: Vec<usize> = match &raw.n {
            Some(list) => list.iter().map(|&v| v as usize).collect(),
            None => d.n.clone(),
        };
        if id == ExperimentId::Custom {
            if raw.n.is_some() {
                issues.push("custom experiments take n from the data file; remove n".into());
            }
        } else if n.is_empty() {
            issues.push("n must list at least one sample size".into());
        } else {
            for &v in &n {
                if v < d.min_n {
                    issues.push(format!(
                        "sample size {v} is below the minimum {} for {}",
                        d.min_n,
                        id.label()
                    ));
                }
            }
        }

        let seed = raw.seed.unwrap_or(0);

        let psi = raw.psi.unwrap_or_else(|| d.psi.clone());
        if psi.is_empty() {
            issues.push("psi must be non-empty".into());
        }
        for (j, &v) in psi.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                issues.push(format!("psi component {} must be positive, got {v}", j + 1));
            }
        }
        if let Some(p) = d.p {
            if psi.len() != p {
                issues.push(format!(
                    "{} has {p} moments, psi has {} components",
                    id.label(),
                    psi.len()
                ));
            }
        }

        let v = resolve_matrix(raw.v.as_ref(), psi.len(), &mut issues);

        let custom_spec = resolve_custom(id, raw.custom.as_ref(), &mut issues);
        let dim = match (id, &custom_spec) {
            (ExperimentId::Custom, Some(spec)) => match spec.model.build() {
                Ok(m) => {
                    if psi.len() != m.p() {
                        issues.push(format!(
                            "the custom model has {} moments, psi has {} components",
                            m.p(),
                            psi.len()
                        ));
                    }
                    Some(m.d())
                }
                Err(e) => {
                    issues.push(format!("custom model: {e}"));
                    None
                }
            },
            (ExperimentId::Custom, None) => None,
            _ => Some(d.dim),
        };

        let theta_prior = resolve_prior(raw.theta_prior.as_ref(), &d, id, dim, &mut issues);
        let sampler = resolve_sampler(raw.sampler.as_ref(), &d, theta_prior.as_ref(), &mut issues);
        let estimator = resolve_estimator(raw.estimator.as_ref(), &d, &n, id, &mut issues);
        let selection = resolve_selection(raw.selection.as_ref(), id, psi.len(), dim, &mut issues);

        let out_dir = resolve_out_dir(raw.output_dir);

        if !issues.is_empty() {
            let mut msg = String::from("invalid config:");
            for item in &issues {
                msg.push_str("\n  - ");
                msg.push_str(item);
            }
            return Err(Error::Config(msg));
        }
        Ok(ExperimentConfig {
            experiment: id,
            n,
            seed,
            psi,
            v: v.expect("issues empty implies matrix resolved"),
            theta_prior: theta_prior.expect("issues empty implies prior resolved"),
            sampler: sampler.expect("issues empty implies sampler resolved"),
            estimator,
            selection,
            out_dir,
            custom_spec,
        })
    }
}

/// Per-experiment default values; `None`/0 entries mean "not known
/// until the custom model is parsed".
struct Defaults {
    n: Vec<usize>,
    min_n: usize,
    psi: Vec<f64>,
    p: Option<usize>,
    dim: usize,
    prior_lower: Vec<f64>,
    prior_upper: Vec<f64>,
    b: usize,
    proposal_sd: Vec<f64>,
    init: Vec<f64>,
    pi: Vec<PiKind>,
    epsilon: Vec<EpsilonKind>,
    grid_spacing: f64,
    density_step: f64,
}

impl Defaults {
    fn for_id(id: ExperimentId) -> Defaults {
        match id {
            ExperimentId::Ex51 => Defaults {
                n: vec![500, 1000, 5000],
                min_n: 8,
                psi: vec![0.1, 0.5],
                p: Some(2),
                dim: 1,
                prior_lower: vec![-2.0],
                prior_upper: vec![7.0],
                b: 5000,
                proposal_sd: vec![0.5_f64.sqrt()],
                init: vec![1.0],
                pi: vec![PiKind::ExpSqrtN, PiKind::InverseN, PiKind::InverseLogN],
                epsilon: vec![EpsilonKind::SqrtN, EpsilonKind::LogN, EpsilonKind::LogLogN],
                grid_spacing: 0.02,
                density_step: 0.01,
            },
            ExperimentId::Ex52 => Defaults {
                n: vec![500],
                min_n: 8,
                psi: vec![0.1, 0.1, 0.5, 0.5],
                p: Some(4),
                dim: 2,
                prior_lower: vec![-15.0, -15.0],
                prior_upper: vec![15.0, 15.0],
                b: 5000,
                proposal_sd: vec![0.5, 0.5],
                init: vec![1.5, 1.5],
                pi: vec![PiKind::InverseN],
                epsilon: vec![EpsilonKind::LogLogN],
                grid_spacing: 0.1,
                density_step: 0.01,
            },
            ExperimentId::Ex53 => Defaults {
                n: vec![100, 1000, 5000],
                min_n: 3,
                psi: vec![0.05, 0.05, 0.05, 0.05],
                p: Some(4),
                dim: 1,
                prior_lower: vec![0.0],
                prior_upper: vec![10.0],
                b: 5000,
                proposal_sd: vec![0.5],
                init: vec![2.0],
                pi: vec![PiKind::InverseN],
                epsilon: vec![EpsilonKind::LogLogN],
                grid_spacing: 0.02,
                density_step: 0.01,
            },
            ExperimentId::Custom => Defaults {
                n: Vec::new(),
                min_n: 1,
                psi: Vec::new(),
                p: None,
                dim: 0,
                prior_lower: Vec::new(),
                prior_upper: Vec::new(),
                b: 5000,
                proposal_sd: Vec::new(),
                init: Vec::new(),
                pi: vec![PiKind::InverseN],
                epsilon: vec![EpsilonKind::LogLogN],
                grid_spacing: 0.02,
                density_step: 0.01,
            },
        }
    }
}

fn resolve_matrix(
    raw: Option<&RawMatrix>,
    p: usize,
    issues: &mut Vec<String>,
) -> Option<DMatrix<f64>> {
    let raw = match raw {
        None => return Some(DMatrix::identity(p, p)),
        Some(r) => r,
    };
    match raw.kind.as_deref().unwrap_or("identity") {
        "identity" => {
            if raw.rows.is_some() {
                issues.push("v.rows is only meaningful with v.kind = \"explicit\"".into());
                None
            } else {
                Some(DMatrix::identity(p, p))
            }
        }
        "explicit" => {
            let rows = match &raw.rows {
                None => {
                    issues.push("v.kind = \"explicit\" needs v.rows".into());
                    return None;
                }
                Some(r) => r,
            };
            if rows.len() != p || rows.iter().any(|r| r.len() != p) {
                issues.push(format!("v.rows must form a {p} x {p} matrix"));
                return None;
            }
            let mut m = DMatrix::zeros(p, p);
            for (i, row) in rows.iter().enumerate() {
                for (j, &x) in row.iter().enumerate() {
                    m[(i, j)] = x;
                }
            }
            Some(m)
        }
        other => {
            issues.push(format!("unknown v.kind {other:?}; expected identity or explicit"));
            None
        }
    }
}

fn resolve_custom(
    id: ExperimentId,
    raw: Option<&RawCustom>,
    issues: &mut Vec<String>,
) -> Option<CustomSpec> {
    if id != ExperimentId::Custom {
        if raw.is_some() {
            issues.push("the custom section applies to the custom experiment only".into());
        }
        return None;
    }
    let raw = match raw {
        None => {
            issues.push("custom experiments need a [custom] section with data and model".into());
            return None;
        }
        Some(r) => r,
    };
    let data = match &raw.data {
        None => {
            issues.push("custom.data must point at a CSV file".into());
            None
        }
        Some(p) => Some(p.clone()),
    };
    let model = match raw.model.as_deref() {
        None => {
            issues.push("custom.model must name a model".into());
            None
        }
        Some("interval-mean") => Some(CustomModelKind::IntervalMean),
        Some("missing-data") => Some(CustomModelKind::MissingData),
        Some("interval-regression") => {
            match (raw.num_instruments, raw.num_regressors) {
                (Some(l), Some(k)) if l >= 1 && k >= 1 => Some(CustomModelKind::IntervalRegression {
                    instruments: l as usize,
                    regressors: k as usize,
                }),
                _ => {
                    issues.push(
                        "interval-regression needs custom.num_instruments >= 1 and custom.num_regressors >= 1"
                            .into(),
                    );
                    None
                }
            }
        }
        Some(other) => {
            issues.push(format!(
                "unknown custom.model {other:?}; expected interval-mean, missing-data or interval-regression"
            ));
            None
        }
    };
    if raw.model.as_deref() != Some("interval-regression")
        && (raw.num_instruments.is_some() || raw.num_regressors.is_some())
    {
        issues.push("num_instruments/num_regressors apply to interval-regression only".into());
    }
    match (data, model) {
        (Some(data), Some(model)) => Some(CustomSpec { data, model }),
        _ => None,
    }
}

fn resolve_prior(
    raw: Option<&RawPrior>,
    d: &Defaults,
    id: ExperimentId,
    dim: Option<usize>,
    issues: &mut Vec<String>,
) -> Option<ThetaPrior> {
    let (lower, upper, kind, mean, variance) = match raw {
        None => {
            if id == ExperimentId::Custom {
                issues.push("custom experiments need a [theta_prior] section".into());
                return None;
            }
            (d.prior_lower.clone(), d.prior_upper.clone(), "flat".to_string(), None, None)
        }
        Some(r) => {
            let lower = match &r.lower {
                Some(l) => l.clone(),
                None => {
                    if id == ExperimentId::Custom {
                        issues.push("theta_prior.lower is required".into());
                        return None;
                    }
                    d.prior_lower.clone()
                }
            };
            let upper = match &r.upper {
                Some(u) => u.clone(),
                None => {
                    if id == ExperimentId::Custom {
                        issues.push("theta_prior.upper is required".into());
                        return None;
                    }
                    d.prior_upper.clone()
                }
            };
            (
                lower,
                upper,
                r.kind.clone().unwrap_or_else(|| "flat".to_string()),
                r.mean.clone(),
                r.variance.clone(),
            )
        }
    };
    if let Some(dim) = dim {
        if lower.len() != dim || upper.len() != dim {
            issues.push(format!(
                "theta_prior bounds must have {dim} components for this model"
            ));
            return None;
        }
    }
    let support = match ThetaBox::new(lower, upper) {
        Ok(b) => b,
        Err(e) => {
            issues.push(format!("theta_prior support: {e}"));
            return None;
        }
    };
    match kind.as_str() {
        "flat" => {
            if mean.is_some() || variance.is_some() {
                issues.push("theta_prior.mean/variance apply to kind = \"normal\" only".into());
                return None;
            }
            Some(ThetaPrior::flat(support))
        }
        "normal" => {
            let (mean, variance) = match (mean, variance) {
                (Some(m), Some(v)) => (m, v),
                _ => {
                    issues.push("theta_prior kind = \"normal\" needs mean and variance".into());
                    return None;
                }
            };
            match ThetaPrior::independent_normal(support, mean, variance) {
                Ok(p) => Some(p),
                Err(e) => {
                    issues.push(format!("theta_prior: {e}"));
                    None
                }
            }
        }
        other => {
            issues.push(format!(
                "unknown theta_prior.kind {other:?}; expected flat or normal"
            ));
            None
        }
    }
}

fn resolve_sampler(
    raw: Option<&RawSampler>,
    d: &Defaults,
    prior: Option<&ThetaPrior>,
    issues: &mut Vec<String>,
) -> Option<SamplerSpec> {
    let b = raw.and_then(|r| r.b).map(|v| v as usize).unwrap_or(d.b);
    if b == 0 {
        issues.push("sampler.b must be at least 1".into());
    }
    let burn_in = raw
        .and_then(|r| r.burn_in)
        .map(|v| v as usize)
        .unwrap_or_else(|| default_burn_in(b));
    // Box-derived fallbacks: a tenth of each width for the proposal,
    // the midpoint for the start.
    let fallback = prior.map(|p| {
        let lo = p.support().lower();
        let hi = p.support().upper();
        let sd: Vec<f64> = (0..lo.len()).map(|j| (hi[j] - lo[j]) / 10.0).collect();
        let init: Vec<f64> = (0..lo.len()).map(|j| 0.5 * (lo[j] + hi[j])).collect();
        (sd, init)
    });
    let proposal_sd = match raw.and_then(|r| r.proposal_sd.clone()) {
        Some(sd) => sd,
        None if !d.proposal_sd.is_empty() => d.proposal_sd.clone(),
        None => match &fallback {
            Some((sd, _)) => sd.clone(),
            None => return None,
        },
    };
    let init = match raw.and_then(|r| r.init.clone()) {
        Some(init) => init,
        None if !d.init.is_empty() => d.init.clone(),
        None => match &fallback {
            Some((_, init)) => init.clone(),
            None => return None,
        },
    };
    for (j, &s) in proposal_sd.iter().enumerate() {
        if !(s.is_finite() && s > 0.0) {
            issues.push(format!(
                "sampler.proposal_sd component {} must be positive, got {s}",
                j + 1
            ));
        }
    }
    if let Some(p) = prior {
        if proposal_sd.len() != p.dim() {
            issues.push(format!(
                "sampler.proposal_sd must have {} components",
                p.dim()
            ));
        }
        if init.len() != p.dim() {
            issues.push(format!("sampler.init must have {} components", p.dim()));
        } else {
            let theta = DVector::from_column_slice(&init);
            if !p.support().contains(&theta) {
                issues.push("sampler.init lies outside the prior support".into());
            }
        }
    }
    Some(SamplerSpec { b, burn_in, proposal_sd, init })
}

fn resolve_estimator(
    raw: Option<&RawEstimator>,
    d: &Defaults,
    n: &[usize],
    id: ExperimentId,
    issues: &mut Vec<String>,
) -> EstimatorSpec {
    let pi = match raw.and_then(|r| r.pi.clone()) {
        None => d.pi.clone(),
        Some(labels) => {
            let mut kinds = Vec::new();
            for s in &labels {
                match PiKind::parse(s) {
                    Ok(k) => kinds.push(k),
                    Err(e) => issues.push(e.to_string()),
                }
            }
            kinds
        }
    };
    let epsilon = match raw.and_then(|r| r.epsilon.clone()) {
        None => d.epsilon.clone(),
        Some(labels) => {
            let mut kinds = Vec::new();
            for s in &labels {
                match EpsilonKind::parse(s) {
                    Ok(k) => kinds.push(k),
                    Err(e) => issues.push(e.to_string()),
                }
            }
            kinds
        }
    };
    if matches!(id, ExperimentId::Ex51 | ExperimentId::Custom) && pi.is_empty() {
        issues.push("estimator.pi must list at least one quantile law".into());
    }
    if matches!(id, ExperimentId::Ex51 | ExperimentId::Ex52) && epsilon.is_empty() {
        issues.push("estimator.epsilon must list at least one cut-off law".into());
    }
    // The quantile routine needs pi in (0, 0.5); itemize the exact
    // offending cells instead of failing mid-run.
    if id != ExperimentId::Custom {
        for &kind in &pi {
            for &nv in n {
                if nv == 0 {
                    continue;
                }
                let v = kind.value(nv);
                if !(v > 0.0 && v < 0.5) {
                    issues.push(format!(
                        "quantile level {} = {v} at n = {nv} is outside (0, 0.5)",
                        kind.label()
                    ));
                }
            }
        }
    }
    let grid_spacing = raw.and_then(|r| r.grid_spacing).unwrap_or(d.grid_spacing);
    if !(grid_spacing.is_finite() && grid_spacing > 0.0) {
        issues.push(format!("estimator.grid_spacing must be positive, got {grid_spacing}"));
    }
    let density_step = raw.and_then(|r| r.density_step).unwrap_or(d.density_step);
    if !(density_step.is_finite() && density_step > 0.0) {
        issues.push(format!("estimator.density_step must be positive, got {density_step}"));
    }
    EstimatorSpec { pi, epsilon, grid_spacing, density_step }
}

fn resolve_selection(
    raw: Option<&RawSelection>,
    id: ExperimentId,
    p: usize,
    dim: Option<usize>,
    issues: &mut Vec<String>,
) -> Option<SelectionSpec> {
    if id != ExperimentId::Ex53 {
        if raw.is_some() {
            issues.push("the selection section applies to ex53 only".into());
        }
        return None;
    }
    let approach = match raw.and_then(|r| r.approach.as_deref()) {
        None => ApproachKind::WorkingPrior,
        Some(s) => match ApproachKind::parse(s) {
            Ok(a) => a,
            Err(e) => {
                issues.push(e.to_string());
                return None;
            }
        },
    };
    let alpha = raw.and_then(|r| r.alpha).unwrap_or(0.5);
    if !(alpha.is_finite() && alpha > 0.0) {
        issues.push(format!("selection.alpha must be positive, got {alpha}"));
    }
    if approach == ApproachKind::SelectedMoments && raw.is_some_and(|r| r.sigma_n2.is_some()) {
        issues.push("selection.sigma_n2 applies to approach a2 only".into());
    }
    if approach == ApproachKind::WorkingPrior && raw.is_some_and(|r| r.alpha.is_some()) {
        issues.push("selection.alpha applies to approach a1 only".into());
    }
    let sigma_laws = match raw.and_then(|r| r.sigma_n2.clone()) {
        None => vec![SigmaLaw::N, SigmaLaw::NSquared],
        Some(labels) => {
            let mut laws = Vec::new();
            for s in &labels {
                match SigmaLaw::parse(s) {
                    Ok(l) => laws.push(l),
                    Err(e) => issues.push(e.to_string()),
                }
            }
            laws
        }
    };
    if approach == ApproachKind::WorkingPrior && sigma_laws.is_empty() {
        issues.push("selection.sigma_n2 must list at least one law".into());
    }
    let to_sets = |lists: &Vec<Vec<usize>>,
                   max: usize,
                   what: &str,
                   allow_empty: bool,
                   issues: &mut Vec<String>| {
        let mut sets = Vec::new();
        for list in lists {
            if list.is_empty() && !allow_empty {
                issues.push(format!("{what} entries must be non-empty"));
            }
            for &i in list {
                if i < 1 || i > max {
                    issues.push(format!("{what} index {i} is outside 1..={max}"));
                }
            }
            sets.push(list.iter().copied().collect());
        }
        sets
    };
    let moment_subsets = raw.and_then(|r| r.moment_subsets.as_ref()).map(|lists| {
        to_sets(lists, p, "selection.moment_subsets", false, issues)
    });
    let free_masks = raw.and_then(|r| r.free_masks.as_ref()).map(|lists| {
        to_sets(lists, dim.unwrap_or(1), "selection.free_masks", true, issues)
    });
    let constraints = match (moment_subsets, free_masks) {
        (None, None) => Some(CandidateConstraints {
            moment_subsets: None,
            // The scalar mean is always free; only the moment set is
            // under selection by default.
            free_masks: Some(vec![[1].into_iter().collect()]),
        }),
        (ms, fm) => Some(CandidateConstraints { moment_subsets: ms, free_masks: fm }),
    };
    Some(SelectionSpec { approach, alpha, sigma_laws, constraints })
}

fn resolve_out_dir(requested: Option<PathBuf>) -> PathBuf {
    if let Ok(dir) = env::var(OUT_DIR_ENV) {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    requested.unwrap_or_else(|| PathBuf::from("."))
}

// ---------------------------------------------------------------------
// Seed derivation.
// ---------------------------------------------------------------------

/// Stable per-stream seed: FNV-1a over the stream name, mixed with the
/// base seed and finalized by the splitmix64 permutation. Distinct
/// stream names give unrelated seeds from one base.
pub fn derive_seed(base: u64, stream: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &byte in stream.as_bytes() {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = base ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one cell's data draw.
pub fn data_seed(base: u64, id: ExperimentId, n: usize) -> u64 {
    derive_seed(base, &format!("{}/n={n}/data", id.label()))
}

/// Seed of one cell's chain; `prior_label` separates runs that differ
/// only in the prior.
pub fn chain_seed(base: u64, id: ExperimentId, n: usize, prior_label: &str) -> u64 {
    derive_seed(base, &format!("{}/n={n}/chain/{prior_label}", id.label()))
}

/// Seed of the candidate-scoring integrator.
pub fn selection_seed(base: u64) -> u64 {
    derive_seed(base, "ex53/selection")
}

// ---------------------------------------------------------------------
// Running.
// ---------------------------------------------------------------------

/// What a run produced: the directory and every emitted file, in
/// emission order.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Runs one experiment end to end and writes its outputs under
/// `<out_dir>/<experiment>/`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    let dir = config.out_dir.join(config.experiment.label());
    fs::create_dir_all(&dir)?;
    match config.experiment {
        ExperimentId::Ex51 => run_ex51(config, &dir),
        ExperimentId::Ex52 => run_ex52(config, &dir),
        ExperimentId::Ex53 => run_ex53(config, &dir),
        ExperimentId::Custom => run_custom(config, &dir),
    }
}

/// Writes `(theta, posterior / max posterior)` rows over `grid`.
///
/// The curve is the unnormalized posterior of a one-dimensional model
/// rescaled so its maximum is one; grids that lie entirely outside the
/// prior support produce all-zero densities.
pub fn emit_density_curve(
    ctx: &LogLikelihoodContext,
    prior: &ThetaPrior,
    grid: &[f64],
    path: &Path,
) -> Result<()> {
    if ctx.d() != 1 || prior.dim() != 1 {
        return Err(Error::Dimension(format!(
            "density curves need a one-dimensional parameter, model has {} and prior {}",
            ctx.d(),
            prior.dim()
        )));
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("density grid must be non-empty".into()));
    }
    let mut lps = Vec::with_capacity(grid.len());
    for &t in grid {
        lps.push(ctx.log_posterior_unnorm(prior, &DVector::from_element(1, t))?);
    }
    let max = lps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["theta", "density"])?;
    for (&t, &lp) in grid.iter().zip(&lps) {
        let density = if max.is_finite() { (lp - max).exp() } else { 0.0 };
        w.write_record([format!("{t}"), format!("{density}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Inclusive grid from `lo` to `hi` at `step`; the upper endpoint is
/// always present.
pub fn theta_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    let mut i = 0_usize;
    loop {
        let x = lo + step * i as f64;
        if x >= hi - 1e-12 {
            break;
        }
        grid.push(x);
        i += 1;
    }
    grid.push(hi);
    grid
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_draws(path: &Path, chain: &Chain) -> Result<()> {
    let d = chain.dim();
    let mut w = csv::Writer::from_path(path)?;
    let header: Vec<String> = (1..=d).map(|j| format!("theta_{j}")).collect();
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(d);
    for i in 0..chain.len() {
        record.clear();
        for j in 0..d {
            record.push(format!("{}", chain.draws[(i, j)]));
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

fn prior_summary(prior: &ThetaPrior) -> String {
    let lo: Vec<f64> = prior.support().lower().iter().copied().collect();
    let hi: Vec<f64> = prior.support().upper().iter().copied().collect();
    match prior.kind() {
        PriorKind::Flat => format!("flat on {lo:?} .. {hi:?}"),
        PriorKind::IndependentNormal { mean, sd } => {
            let m: Vec<f64> = mean.iter().copied().collect();
            let s: Vec<f64> = sd.iter().copied().collect();
            format!("normal mean {m:?} sd {s:?} truncated to {lo:?} .. {hi:?}")
        }
    }
}

fn common_metadata(config: &ExperimentConfig) -> String {
    let mut meta = String::new();
    meta.push_str(&format!("experiment = \"{}\"\n", config.experiment.label()));
    meta.push_str(&format!("seed = {}\n", config.seed));
    if !config.n.is_empty() {
        meta.push_str(&format!("n = {:?}\n", config.n));
    }
    meta.push_str(&format!("psi = {:?}\n", config.psi));
    meta.push_str(&format!("prior = \"{}\"\n", prior_summary(&config.theta_prior)));
    meta
}

fn sampler_metadata(sampler: &SamplerSpec) -> String {
    format!(
        "b = {}\nburn_in = {}\nproposal_sd = {:?}\ninit = {:?}\n",
        sampler.b, sampler.burn_in, sampler.proposal_sd, sampler.init
    )
}

/// Mean bracketed between two order statistics: tables of quantile and
/// level-set intervals per cell, plus posterior curves at the largest
/// sample size under the flat and a sharply informative prior.
fn run_ex51(config: &ExperimentConfig, dir: &Path) -> Result<RunReport> {
    // Population bounds of the generator's mean, for the squared-error
    // column.
    const TRUTH: (f64, f64) = (0.0, 5.0);
    let hyper = Hyperparameters::new(config.psi.clone(), config.v.clone())?;
    let mut table1: Vec<Vec<String>> = Vec::new();
    let mut table2: Vec<Vec<String>> = Vec::new();
    let mut acceptance: Vec<(usize, f64)> = Vec::new();
    let mut files = Vec::new();
    let largest = *config.n.iter().max().expect("validated non-empty");
    for &n in &config.n {
        let data = gen_example_5_1(n, data_seed(config.seed, ExperimentId::Ex51, n))?;
        let ctx = LogLikelihoodContext::new(
            make_interval_mean_model(),
            Arc::new(data),
            hyper.clone(),
        )?;
        let target = ctx.posterior_target(&config.theta_prior);
        let init = DVector::from_column_slice(&config.sampler.init);
        let proposal = ProposalSpec::new(config.sampler.proposal_sd.clone())?;
        let chain = metropolis(
            &target,
            &init,
            &proposal,
            config.sampler.b,
            config.sampler.burn_in,
            chain_seed(config.seed, ExperimentId::Ex51, n, "flat"),
        )?;
        acceptance.push((n, chain.acceptance_rate));
        for &kind in &config.estimator.pi {
            let interval = quantile_set_estimate(&chain, |t| t[0], "theta", kind.value(n))?;
            let sq_err = (interval.lower - TRUTH.0).powi(2) + (interval.upper - TRUTH.1).powi(2);
            table2.push(vec![
                format!("{n}"),
                kind.label().to_string(),
                format!("{}", kind.value(n)),
                format!("{}", interval.lower),
                format!("{}", interval.upper),
                format!("{sq_err}"),
            ]);
        }
        for &kind in &config.estimator.epsilon {
            let epsilon = epsilon_schedule(n, kind)?;
            let region = level_set_region(
                &target,
                config.theta_prior.support(),
                epsilon,
                LevelSetResolution::Grid { spacing: config.estimator.grid_spacing },
            )?;
            let (lower, upper) = region.hull.expect("one-dimensional region has a hull");
            let sq_err = (lower - TRUTH.0).powi(2) + (upper - TRUTH.1).powi(2);
            table1.push(vec![
                format!("{n}"),
                kind.label().to_string(),
                format!("{epsilon}"),
                format!("{lower}"),
                format!("{upper}"),
                format!("{sq_err}"),
            ]);
        }
        if n == largest {
            let support = config.theta_prior.support();
            let grid = theta_grid(
                support.lower()[0],
                support.upper()[0],
                config.estimator.density_step,
            );
            let flat_path = dir.join(format!("figure1_flat_n{n}.csv"));
            emit_density_curve(&ctx, &config.theta_prior, &grid, &flat_path)?;
            files.push(flat_path);
            let informative = ThetaPrior::independent_normal(
                support.clone(),
                vec![0.0],
                vec![0.25],
            )?;
            let informative_path = dir.join(format!("figure1_informative_n{n}.csv"));
            emit_density_curve(&ctx, &informative, &grid, &informative_path)?;
            files.push(informative_path);
        }
    }
    let table1_path = dir.join("table1.csv");
    write_rows(
        &table1_path,
        &["n", "epsilon_kind", "epsilon", "lower", "upper", "sq_err"],
        &table1,
    )?;
    let table2_path = dir.join("table2.csv");
    write_rows(
        &table2_path,
        &["n", "pi_kind", "pi", "lower", "upper", "sq_err"],
        &table2,
    )?;
    files.insert(0, table2_path);
    files.insert(0, table1_path);

    let mut meta = common_metadata(config);
    meta.push_str(&sampler_metadata(&config.sampler));
    meta.push_str(&format!("grid_spacing = {}\n", config.estimator.grid_spacing));
    meta.push_str(&format!("density_step = {}\n", config.estimator.density_step));
    meta.push_str(&format!("density_n = {largest}\n"));
    meta.push_str("truth = [0.0, 5.0]\n\n[acceptance_rates]\n");
    for (n, rate) in &acceptance {
        meta.push_str(&format!("n{n} = {rate}\n"));
    }
    let meta_path = dir.join("metadata.toml");
    fs::write(&meta_path, meta)?;
    files.push(meta_path);
    Ok(RunReport { out_dir: dir.to_path_buf(), files })
}

/// Interval regression: draw clouds under the flat and the informative
/// prior, a level-set lattice, and the region's boundary half-planes.
fn run_ex52(config: &ExperimentConfig, dir: &Path) -> Result<RunReport> {
    let hyper = Hyperparameters::new(config.psi.clone(), config.v.clone())?;
    let mut acceptance: Vec<(usize, &str, f64)> = Vec::new();
    let mut files = Vec::new();
    for &n in &config.n {
        let data = gen_example_5_2(n, data_seed(config.seed, ExperimentId::Ex52, n))?;
        let ctx = LogLikelihoodContext::new(
            make_interval_regression_model(2, 2)?,
            Arc::new(data),
            hyper.clone(),
        )?;
        let init = DVector::from_column_slice(&config.sampler.init);
        let proposal = ProposalSpec::new(config.sampler.proposal_sd.clone())?;
        let informative = ThetaPrior::independent_normal(
            config.theta_prior.support().clone(),
            vec![10.0, -6.0],
            vec![144.0, 144.0],
        )?;
        for (prior, label) in [(&config.theta_prior, "flat"), (&informative, "informative")] {
            let target = ctx.posterior_target(prior);
            let chain = metropolis(
                &target,
                &init,
                &proposal,
                config.sampler.b,
                config.sampler.burn_in,
                chain_seed(config.seed, ExperimentId::Ex52, n, label),
            )?;
            acceptance.push((n, label, chain.acceptance_rate));
            let path = dir.join(format!("figure2_{label}_draws_n{n}.csv"));
            write_draws(&path, &chain)?;
            files.push(path);
        }
        let target = ctx.posterior_target(&config.theta_prior);
        let epsilon = epsilon_schedule(n, config.estimator.epsilon[0])?;
        let region = level_set_region(
            &target,
            config.theta_prior.support(),
            epsilon,
            LevelSetResolution::Grid { spacing: config.estimator.grid_spacing },
        )?;
        let csv_path = dir.join(format!("figure2_level_set_n{n}.csv"));
        let meta_path = dir.join(format!("figure2_level_set_n{n}.toml"));
        save_level_set(&region, &csv_path, &meta_path)?;
        files.push(csv_path);
        files.push(meta_path);
    }
    // Half-planes `coef . theta + offset >= 0` of the population
    // region, for overplotting the clouds.
    let population = population_example_5_2();
    let (g, h) = population.coefficients();
    let mut boundary = Vec::new();
    for r in 0..g.nrows() {
        boundary.push(vec![
            format!("{}", g[(r, 0)]),
            format!("{}", g[(r, 1)]),
            format!("{}", h[r]),
        ]);
    }
    let boundary_path = dir.join("figure2_boundary.csv");
    write_rows(
        &boundary_path,
        &["coef_theta_1", "coef_theta_2", "offset"],
        &boundary,
    )?;
    files.push(boundary_path);

    let mut meta = common_metadata(config);
    meta.push_str(&sampler_metadata(&config.sampler));
    meta.push_str(&format!("grid_spacing = {}\n", config.estimator.grid_spacing));
    meta.push_str(&format!(
        "epsilon_kind = \"{}\"\n",
        config.estimator.epsilon[0].label()
    ));
    meta.push_str("informative_prior = \"normal mean [10.0, -6.0] sd [12.0, 12.0]\"\n");
    meta.push_str("region_vertices = [[1.0, 1.0], [-8.0, 10.0], [2.0, 2.0], [11.0, -7.0]]\n");
    meta.push_str("\n[acceptance_rates]\n");
    for (n, label, rate) in &acceptance {
        meta.push_str(&format!("n{n}_{label} = {rate}\n"));
    }
    let meta_path = dir.join("metadata.toml");
    fs::write(&meta_path, meta)?;
    files.push(meta_path);
    Ok(RunReport { out_dir: dir.to_path_buf(), files })
}

/// Moment selection: one candidate-posterior report per (law, n) cell.
fn run_ex53(config: &ExperimentConfig, dir: &Path) -> Result<RunReport> {
    let selection = config
        .selection
        .as_ref()
        .expect("resolution supplies a selection spec for ex53");
    let model = example_5_3_model();
    let hyper = Hyperparameters::new(config.psi.clone(), config.v.clone())?;
    let candidates = enumerate_candidates(model.p(), model.d(), selection.constraints.as_ref())?;
    let settings = SelectionSettings {
        seed: selection_seed(config.seed),
        ..SelectionSettings::default()
    };
    let mut files = Vec::new();
    let mut cells: Vec<(String, usize)> = Vec::new();
    let mut run_cell = |label: &str, n: usize, approach: &SelectionApproach| -> Result<()> {
        let data = gen_example_5_3(n, data_seed(config.seed, ExperimentId::Ex53, n))?;
        let posterior = mpc_select(&candidates, &data, &model, &hyper, approach, &settings)?;
        let csv_path = dir.join(format!("selection_{label}_{n}.csv"));
        let meta_path = dir.join(format!("selection_{label}_{n}.toml"));
        save_selection_report(&posterior, &csv_path, &meta_path)?;
        files.push(csv_path);
        files.push(meta_path);
        cells.push((label.to_string(), n));
        Ok(())
    };
    match selection.approach {
        ApproachKind::WorkingPrior => {
            for &law in &selection.sigma_laws {
                for &n in &config.n {
                    let approach = SelectionApproach::A2 {
                        sigma_n2: law.value(n),
                        bounds: config.theta_prior.support().clone(),
                    };
                    run_cell(law.label(), n, &approach)?;
                }
            }
        }
        ApproachKind::SelectedMoments => {
            for &n in &config.n {
                let approach = SelectionApproach::A1 {
                    alpha: selection.alpha,
                    theta_prior: config.theta_prior.clone(),
                };
                run_cell("a1", n, &approach)?;
            }
        }
    }
    let mut meta = common_metadata(config);
    meta.push_str(&format!("approach = \"{}\"\n", selection.approach.label()));
    if selection.approach == ApproachKind::SelectedMoments {
        meta.push_str(&format!("alpha = {}\n", selection.alpha));
    }
    meta.push_str(&format!("candidates = {}\n", candidates.len()));
    let cell_list: Vec<String> = cells
        .iter()
        .map(|(label, n)| format!("\"{label}_{n}\""))
        .collect();
    meta.push_str(&format!("cells = [{}]\n", cell_list.join(", ")));
    let meta_path = dir.join("metadata.toml");
    fs::write(&meta_path, meta)?;
    files.push(meta_path);
    Ok(RunReport { out_dir: dir.to_path_buf(), files })
}

/// User data: one chain, then a quantile interval per coordinate and
/// quantile law.
fn run_custom(config: &ExperimentConfig, dir: &Path) -> Result<RunReport> {
    let spec = config.custom().expect("resolution supplies a custom spec");
    let model = spec.model.build()?;
    let expected: Vec<&str> = model.required_columns().iter().map(|s| s.as_str()).collect();
    let data = load_dataset(&spec.data, &expected)?;
    let n = data.n();
    let hyper = Hyperparameters::new(config.psi.clone(), config.v.clone())?;
    let ctx = LogLikelihoodContext::new(model, Arc::new(data), hyper)?;
    let target = ctx.posterior_target(&config.theta_prior);
    let init = DVector::from_column_slice(&config.sampler.init);
    let proposal = ProposalSpec::new(config.sampler.proposal_sd.clone())?;
    let chain = metropolis(
        &target,
        &init,
        &proposal,
        config.sampler.b,
        config.sampler.burn_in,
        chain_seed(config.seed, ExperimentId::Custom, n, "flat"),
    )?;
    let chain_csv = dir.join("chain.csv");
    let chain_meta = dir.join("chain.toml");
    save_chain(&chain, &chain_csv, &chain_meta)?;
    let mut rows = Vec::new();
    for j in 0..ctx.d() {
        for &kind in &config.estimator.pi {
            let pi = kind.value(n);
            if !(pi > 0.0 && pi < 0.5) {
                return Err(Error::InvalidArgument(format!(
                    "quantile level {} = {pi} at n = {n} is outside (0, 0.5)",
                    kind.label()
                )));
            }
            let interval =
                quantile_set_estimate(&chain, |t| t[j], &format!("theta_{}", j + 1), pi)?;
            rows.push(vec![
                format!("{}", j + 1),
                kind.label().to_string(),
                format!("{pi}"),
                format!("{}", interval.lower),
                format!("{}", interval.upper),
            ]);
        }
    }
    let intervals_path = dir.join("intervals.csv");
    write_rows(
        &intervals_path,
        &["coordinate", "pi_kind", "pi", "lower", "upper"],
        &rows,
    )?;
    let mut meta = common_metadata(config);
    meta.push_str(&format!("data = \"{}\"\n", spec.data.display()));
    meta.push_str(&format!("n = {n}\n"));
    meta.push_str(&sampler_metadata(&config.sampler));
    meta.push_str(&format!("acceptance_rate = {}\n", chain.acceptance_rate));
    let meta_path = dir.join("metadata.toml");
    fs::write(&meta_path, meta)?;
    Ok(RunReport {
        out_dir: dir.to_path_buf(),
        files: vec![chain_csv, chain_meta, intervals_path, meta_path],
    })
}
