//! Parameter priors and likelihood hyperparameters.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::ThetaBox;
use crate::stats::{std_normal_cdf, HALF_LN_TWO_PI};

/// Shape of the prior density inside the truncation box.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorKind {
    /// Constant density.
    Flat,
    /// Independent normal coordinates, truncated to the box.
    IndependentNormal { mean: DVector<f64>, sd: DVector<f64> },
}

/// Proper prior over a compact parameter box.
///
/// The density integrates to one over the box and is zero outside it;
/// the normal kind renormalizes by its box mass exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaPrior {
    kind: PriorKind,
    support: ThetaBox,
    ln_norm: f64,
}

impl ThetaPrior {
    /// Flat prior over `support`.
    pub fn flat(support: ThetaBox) -> Self {
        let ln_norm = support.volume().ln();
        Self { kind: PriorKind::Flat, support, ln_norm }
    }

    /// Independent-normal prior over `support`; `variance[j]` is the
    /// variance of coordinate `j` before truncation.
    pub fn independent_normal(support: ThetaBox, mean: Vec<f64>, variance: Vec<f64>) -> Result<Self> {
        let d = support.dim();
        if mean.len() != d || variance.len() != d {
            return Err(Error::Dimension(format!(
                "normal prior with {} means and {} variances over a box of dim {d}",
                mean.len(),
                variance.len()
            )));
        }
        for (j, &v) in variance.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "prior variance {v} at coordinate {} must be positive and finite",
                    j + 1
                )));
            }
            if !mean[j].is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "prior mean at coordinate {} must be finite",
                    j + 1
                )));
            }
        }
        let sd: Vec<f64> = variance.iter().map(|v| v.sqrt()).collect();
        // Box mass of the untruncated product measure; factors stay well
        // away from 0 for any reasonable box, so linear-space Phi
        // differences are accurate enough here.
        let mut ln_mass = 0.0;
        for j in 0..d {
            let zl = (support.lower()[j] - mean[j]) / sd[j];
            let zu = (support.upper()[j] - mean[j]) / sd[j];
            let mass = std_normal_cdf(zu) - std_normal_cdf(zl);
            if mass <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "prior mass underflows on coordinate {}: box [{}, {}] is too deep in the tail",
                    j + 1,
                    support.lower()[j],
                    support.upper()[j]
                )));
            }
            ln_mass += mass.ln();
        }
        Ok(Self {
            kind: PriorKind::IndependentNormal {
                mean: DVector::from_vec(mean),
                sd: DVector::from_vec(sd),
            },
            support,
            ln_norm: ln_mass,
        })
    }

    pub fn kind(&self) -> &PriorKind {
        &self.kind
    }

    pub fn support(&self) -> &ThetaBox {
        &self.support
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    /// Log prior density; `-inf` outside the box.
    pub fn log_density(&self, theta: &DVector<f64>) -> f64 {
        if !self.support.contains(theta) {
            return f64::NEG_INFINITY;
        }
        match &self.kind {
            PriorKind::Flat => -self.ln_norm,
            PriorKind::IndependentNormal { mean, sd } => {
                let mut acc = -self.ln_norm;
                for j in 0..theta.len() {
                    let z = (theta[j] - mean[j]) / sd[j];
                    acc += -0.5 * z * z - sd[j].ln() - HALF_LN_TWO_PI;
                }
                acc
            }
        }
    }

    /// Prior over a coordinate subset (0-based, strictly increasing):
    /// the product of the kept coordinates' marginals on the restricted
    /// box.
    pub fn restrict(&self, coords: &[usize]) -> Result<ThetaPrior> {
        let sub = self.support.restrict(coords)?;
        match &self.kind {
            PriorKind::Flat => Ok(ThetaPrior::flat(sub)),
            PriorKind::IndependentNormal { mean, sd } => ThetaPrior::independent_normal(
                sub,
                coords.iter().map(|&c| mean[c]).collect(),
                coords.iter().map(|&c| sd[c] * sd[c]).collect(),
            ),
        }
    }
}

/// Exponential-rate vector `psi` and moment covariance `V` of the
/// limited-information likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    psi: DVector<f64>,
    v: DMatrix<f64>,
}

/// Relative tolerance for the symmetry check on `V`.
const SYMMETRY_TOL: f64 = 1e-12;

impl Hyperparameters {
    /// Validates `psi > 0` componentwise and `V` symmetric positive
    /// definite (symmetry within 1e-12 relative; definiteness via
    /// Cholesky).
    pub fn new(psi: Vec<f64>, v: DMatrix<f64>) -> Result<Self> {
        let p = psi.len();
        if p == 0 {
            return Err(Error::InvalidArgument("psi must have at least one component".into()));
        }
        for (j, &x) in psi.iter().enumerate() {
            if !x.is_finite() || x <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "psi[{}] = {x} must be positive and finite",
                    j + 1
                )));
            }
        }
        if v.nrows() != p || v.ncols() != p {
            return Err(Error::Dimension(format!(
                "V is {}x{}, expected {p}x{p}",
                v.nrows(),
                v.ncols()
            )));
        }
        let scale = v.iter().fold(0.0_f64, |m, &x| m.max(x.abs())).max(1.0);
        for i in 0..p {
            for j in (i + 1)..p {
                if (v[(i, j)] - v[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::InvalidArgument(format!(
                        "V is not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        if v.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite("V".into()));
        }
        Ok(Self { psi: DVector::from_vec(psi), v })
    }

    /// Convenience constructor with `V = I`.
    pub fn with_identity_v(psi: Vec<f64>) -> Result<Self> {
        let p = psi.len();
        Self::new(psi, DMatrix::identity(p, p))
    }

    pub fn p(&self) -> usize {
        self.psi.len()
    }

    pub fn psi(&self) -> &DVector<f64> {
        &self.psi
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    /// Sub-hyperparameters over a moment subset (0-based, strictly
    /// increasing): the matching components of `psi` and principal
    /// sub-block of `V`.
    pub fn restrict(&self, moments: &[usize]) -> Result<Hyperparameters> {
        if moments.is_empty() {
            return Err(Error::InvalidArgument("cannot restrict to zero moments".into()));
        }
        for &m in moments {
            if m >= self.p() {
                return Err(Error::Dimension(format!(
                    "moment index {m} outside 0..{}",
                    self.p()
                )));
            }
        }
        let psi: Vec<f64> = moments.iter().map(|&m| self.psi[m]).collect();
        let k = moments.len();
        let v = DMatrix::from_fn(k, k, |i, j| self.v[(moments[i], moments[j])]);
        Hyperparameters::new(psi, v)
    }
}
