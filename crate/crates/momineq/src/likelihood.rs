//! Limited-information log likelihood and unnormalized log posterior.
//!
//! For sample moment mean `mbar(theta)`, rate vector `psi` and moment
//! covariance `V`, the log likelihood is
//!
//! ```text
//! ln P(Z_theta >= 0) - psi' mbar(theta) + psi' V psi / (2 n) + sum_i ln psi_i,
//! Z_theta ~ N(mbar(theta) - V psi / n, V / n).
//! ```
//!
//! The context caches everything theta-independent: averaged affine
//! coefficients, `V psi / n`, `V / n`, and the additive constant. With an
//! affine model one evaluation costs O(p d) plus p scalar `ln Phi` calls,
//! which is what makes long chains and dense grids cheap.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::MomentModel;
use crate::orthant::{log_orthant_probability, OrthantMethod, OrthantQuery, DEFAULT_MC_SAMPLES};
use crate::prior::{Hyperparameters, ThetaPrior};

/// How the context resolves embedded orthant probabilities.
#[derive(Debug, Clone, Copy)]
pub struct OrthantSettings {
    pub method: OrthantMethod,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for OrthantSettings {
    fn default() -> Self {
        Self { method: OrthantMethod::Auto, mc_samples: DEFAULT_MC_SAMPLES, seed: 0 }
    }
}

/// Cached evaluation state for one (model, dataset, hyperparameters)
/// triple.
#[derive(Debug, Clone)]
pub struct LogLikelihoodContext {
    data: Arc<Dataset>,
    model: MomentModel,
    hyper: Hyperparameters,
    orthant: OrthantSettings,
    abar: Option<DMatrix<f64>>,
    bbar: Option<DVector<f64>>,
    cov: DMatrix<f64>,
    v_psi_over_n: DVector<f64>,
    constant: f64,
}

impl LogLikelihoodContext {
    pub fn new(model: MomentModel, data: Arc<Dataset>, hyper: Hyperparameters) -> Result<Self> {
        if model.p() != hyper.p() {
            return Err(Error::Dimension(format!(
                "model has p = {}, hyperparameters have p = {}",
                model.p(),
                hyper.p()
            )));
        }
        model.check_columns(&data)?;
        let n = data.n() as f64;
        let (abar, bbar) = if model.is_affine() {
            let (a, b) = model.averaged_coefficients(&data)?;
            (Some(a), Some(b))
        } else {
            (None, None)
        };
        let cov = hyper.v() / n;
        let v_psi_over_n = hyper.v() * hyper.psi() / n;
        let constant = hyper.psi().dot(&(hyper.v() * hyper.psi())) / (2.0 * n)
            + hyper.psi().iter().map(|x| x.ln()).sum::<f64>();
        Ok(Self {
            data,
            model,
            hyper,
            orthant: OrthantSettings::default(),
            abar,
            bbar,
            cov,
            v_psi_over_n,
            constant,
        })
    }

    pub fn with_orthant_settings(mut self, orthant: OrthantSettings) -> Self {
        self.orthant = orthant;
        self
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn p(&self) -> usize {
        self.model.p()
    }

    pub fn d(&self) -> usize {
        self.model.d()
    }

    pub fn data(&self) -> &Arc<Dataset> {
        &self.data
    }

    pub fn model(&self) -> &MomentModel {
        &self.model
    }

    pub fn hyper(&self) -> &Hyperparameters {
        &self.hyper
    }

    /// Averaged affine coefficients `(Abar, bbar)`; present iff the model
    /// is affine.
    pub fn averaged_coefficients(&self) -> Option<(&DMatrix<f64>, &DVector<f64>)> {
        match (&self.abar, &self.bbar) {
            (Some(a), Some(b)) => Some((a, b)),
            _ => None,
        }
    }

    /// Sample moment mean, via the affine cache when available.
    pub fn sample_moment_mean(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        match (&self.abar, &self.bbar) {
            (Some(a), Some(b)) => {
                if theta.len() != self.d() {
                    return Err(Error::Dimension(format!(
                        "theta has length {}, model expects {}",
                        theta.len(),
                        self.d()
                    )));
                }
                Ok(a * theta + b)
            }
            _ => self.model.sample_moment_mean(&self.data, theta),
        }
    }

    /// Log likelihood at `theta`.
    ///
    /// Finite for any finite `theta` on the exact diagonal path; returns
    /// `-inf` only when a Monte Carlo orthant estimate underflows below
    /// its resolvable range.
    pub fn log_limited_likelihood(&self, theta: &DVector<f64>) -> Result<f64> {
        let mbar = self.sample_moment_mean(theta)?;
        let mean = &mbar - &self.v_psi_over_n;
        let query = OrthantQuery {
            mean,
            cov: self.cov.clone(),
            method: self.orthant.method,
            mc_samples: self.orthant.mc_samples,
            seed: self.orthant.seed,
        };
        let ln_orthant = log_orthant_probability(&query)?;
        Ok(ln_orthant - self.hyper.psi().dot(&mbar) + self.constant)
    }

    /// Unnormalized log posterior `ln prior + ln likelihood`.
    ///
    /// Outside the prior's truncation box the likelihood is never
    /// evaluated and the result is `-inf`.
    pub fn log_posterior_unnorm(&self, prior: &ThetaPrior, theta: &DVector<f64>) -> Result<f64> {
        if prior.dim() != self.d() {
            return Err(Error::Dimension(format!(
                "prior dimension {} vs model dimension {}",
                prior.dim(),
                self.d()
            )));
        }
        let lp = prior.log_density(theta);
        if lp == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(lp + self.log_limited_likelihood(theta)?)
    }

    /// Infallible closure over [`LogLikelihoodContext::log_posterior_unnorm`]
    /// for samplers and optimizers; internal evaluation errors surface as
    /// NaN, which those consumers reject as a broken target.
    pub fn posterior_target<'a>(&'a self, prior: &'a ThetaPrior) -> impl Fn(&DVector<f64>) -> f64 + 'a {
        move |theta: &DVector<f64>| self.log_posterior_unnorm(prior, theta).unwrap_or(f64::NAN)
    }
}
