//! Random-walk Metropolis sampling and empirical chain quantiles.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Component-wise normal random-walk proposal.
#[derive(Debug, Clone)]
pub struct ProposalSpec {
    pub sd: Vec<f64>,
}

impl ProposalSpec {
    pub fn new(sd: Vec<f64>) -> Result<Self> {
        if sd.is_empty() {
            return Err(Error::InvalidArgument("proposal needs at least one component".into()));
        }
        if let Some(bad) = sd.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "proposal standard deviations must be positive and finite, got {bad}"
            )));
        }
        Ok(Self { sd })
    }

    /// Same standard deviation for every coordinate.
    pub fn isotropic(dim: usize, sd: f64) -> Result<Self> {
        Self::new(vec![sd; dim])
    }
}

/// Retained post-burn-in states of one Metropolis run.
#[derive(Debug, Clone)]
pub struct Chain {
    /// B x d matrix, one retained state per row.
    pub draws: DMatrix<f64>,
    /// Unnormalized log posterior at each retained state.
    pub log_post: DVector<f64>,
    pub acceptance_rate: f64,
    pub seed: u64,
    pub burn_in: usize,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.draws.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.draws.ncols()
    }

    /// One retained state as a column vector.
    pub fn state(&self, i: usize) -> DVector<f64> {
        self.draws.row(i).transpose()
    }
}

/// Default burn-in fraction: one tenth of the retained length.
pub fn default_burn_in(b: usize) -> usize {
    b / 10
}

/// Runs random-walk Metropolis and returns `b` retained states recorded
/// after `burn_in` discarded transitions.
///
/// All coordinates are perturbed jointly each step with independent
/// normal increments. A proposal with `-inf` target is rejected through
/// the ordinary acceptance comparison; NaN or `+inf` target values abort
/// with [`Error::BrokenTarget`]. Output is bit-reproducible for a fixed
/// seed.
pub fn metropolis<F>(
    target: F,
    init: &DVector<f64>,
    proposal: &ProposalSpec,
    b: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Chain>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let d = init.len();
    if d == 0 {
        return Err(Error::InvalidArgument("initial state must be non-empty".into()));
    }
    if proposal.sd.len() != d {
        return Err(Error::Dimension(format!(
            "proposal has {} components, initial state has {d}",
            proposal.sd.len()
        )));
    }
    if b == 0 {
        return Err(Error::InvalidArgument("chain length must be at least 1".into()));
    }
    let check = |value: f64, theta: &DVector<f64>| -> Result<f64> {
        if value.is_nan() || value == f64::INFINITY {
            return Err(Error::BrokenTarget(format!(
                "target returned {value} at theta = {:?}",
                theta.as_slice()
            )));
        }
        Ok(value)
    };
    let mut current = init.clone();
    let mut current_lp = check(target(&current), &current)?;
    if current_lp == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument(
            "initial state has zero posterior density".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = DMatrix::zeros(b, d);
    let mut log_post = DVector::zeros(b);
    let mut accepted = 0_usize;
    let total = burn_in + b;
    let mut candidate = DVector::zeros(d);
    for step in 0..total {
        for j in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            candidate[j] = current[j] + proposal.sd[j] * z;
        }
        let candidate_lp = check(target(&candidate), &candidate)?;
        // The uniform is always consumed so the random stream does not
        // depend on the accept/reject pattern.
        let u: f64 = rng.random();
        if u.ln() < candidate_lp - current_lp {
            current.copy_from(&candidate);
            current_lp = candidate_lp;
            accepted += 1;
        }
        if step >= burn_in {
            let i = step - burn_in;
            draws.row_mut(i).copy_from(&current.transpose());
            log_post[i] = current_lp;
        }
    }
    Ok(Chain {
        draws,
        log_post,
        acceptance_rate: accepted as f64 / total as f64,
        seed,
        burn_in,
    })
}

/// Empirical `q`-quantile of `{g(theta_i)}` over the retained states,
/// using the left-continuous inverse `inf {x : F(x) >= q}`.
pub fn chain_quantile<G>(chain: &Chain, g: G, q: f64) -> Result<f64>
where
    G: Fn(&DVector<f64>) -> f64,
{
    if chain.is_empty() {
        return Err(Error::InvalidArgument("chain is empty".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("quantile level {q} outside [0, 1]")));
    }
    let b = chain.len();
    let mut values = Vec::with_capacity(b);
    for i in 0..b {
        let v = g(&chain.state(i));
        if v.is_nan() {
            return Err(Error::BrokenTarget(format!("functional returned NaN at draw {i}")));
        }
        values.push(v);
    }
    values.sort_unstable_by(|a, b| a.partial_cmp(b).expect("NaN filtered above"));
    if q == 0.0 {
        return Ok(values[0]);
    }
    // Smallest k with k/B >= q, shifted to a zero-based index. The tiny
    // slack keeps exact multiples like q = 0.5 with B = 4 from being
    // pushed up a rank by the floating-point product.
    let rank = (q * b as f64 - 1e-9).ceil() as usize;
    Ok(values[rank.clamp(1, b) - 1])
}

#[derive(Debug, Serialize, Deserialize)]
struct ChainMeta {
    seed: u64,
    b: usize,
    burn_in: usize,
    acceptance_rate: f64,
    dim: usize,
}

/// Writes the chain as CSV (theta components then log_post per row) with
/// a TOML metadata sidecar.
pub fn save_chain(chain: &Chain, csv_path: &Path, meta_path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(csv_path)?;
    let d = chain.dim();
    let mut header: Vec<String> = (1..=d).map(|j| format!("theta_{j}")).collect();
    header.push("log_post".into());
    writer.write_record(&header)?;
    let mut record = Vec::with_capacity(d + 1);
    for i in 0..chain.len() {
        record.clear();
        for j in 0..d {
            record.push(format!("{}", chain.draws[(i, j)]));
        }
        record.push(format!("{}", chain.log_post[i]));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    let meta = ChainMeta {
        seed: chain.seed,
        b: chain.len(),
        burn_in: chain.burn_in,
        acceptance_rate: chain.acceptance_rate,
        dim: d,
    };
    let text = toml::to_string(&meta)
        .map_err(|e| Error::Internal(format!("metadata serialization failed: {e}")))?;
    fs::write(meta_path, text)?;
    Ok(())
}

/// Reads a chain written by [`save_chain`].
pub fn load_chain(csv_path: &Path, meta_path: &Path) -> Result<Chain> {
    let meta_text = fs::read_to_string(meta_path)?;
    let meta: ChainMeta = toml::from_str(&meta_text)
        .map_err(|e| Error::Config(format!("bad chain metadata: {e}")))?;
    let mut reader = csv::Reader::from_path(csv_path)?;
    let mut draws = DMatrix::zeros(meta.b, meta.dim);
    let mut log_post = DVector::zeros(meta.b);
    let mut rows = 0_usize;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if i >= meta.b {
            return Err(Error::Dataset(format!(
                "chain file has more than the {} draws announced by its metadata",
                meta.b
            )));
        }
        if record.len() != meta.dim + 1 {
            return Err(Error::Dataset(format!(
                "chain row {} has {} fields, expected {}",
                i + 1,
                record.len(),
                meta.dim + 1
            )));
        }
        for j in 0..=meta.dim {
            let raw = record.get(j).unwrap();
            let value: f64 = raw.trim().parse().map_err(|_| {
                Error::Dataset(format!("chain row {} field {} is not numeric: {raw:?}", i + 1, j + 1))
            })?;
            if j < meta.dim {
                draws[(i, j)] = value;
            } else {
                log_post[i] = value;
            }
        }
        rows += 1;
    }
    if rows != meta.b {
        return Err(Error::Dataset(format!(
            "chain file has {rows} draws, metadata announces {}",
            meta.b
        )));
    }
    Ok(Chain {
        draws,
        log_post,
        acceptance_rate: meta.acceptance_rate,
        seed: meta.seed,
        burn_in: meta.burn_in,
    })
}
