//! Bayesian inference for partially identified moment inequality models.
//!
//! A model asserts `E[m(X, theta)] >= 0` componentwise for a p-vector of
//! moment functions, which typically pins theta down only to a set. This
//! crate builds a limited-information likelihood from the sample moment
//! means, samples the resulting posterior with random-walk Metropolis,
//! and turns chains into interval and level-set estimates of the
//! identified region. A separate layer scores candidate combinations of
//! binding inequalities and equalities by integrated likelihood, so the
//! data can vote on which constraints actually hold.
//!
//! Modules, bottom up:
//!
//! * [`stats`]: scalar normal helpers hardened for deep tails.
//! * [`dataset`]: named-column numeric data with CSV round-tripping.
//! * [`model`]: moment functions, affine representations, theta boxes.
//! * [`prior`]: truncated priors over theta and the (psi, V) weights.
//! * [`orthant`]: multivariate normal orthant probabilities and bounds.
//! * [`likelihood`]: the limited-information log likelihood itself.
//! * [`mcmc`]: Metropolis chains, quantiles, persistence.
//! * [`quad`]: log-space adaptive quadrature and Monte Carlo boxes.
//! * [`setestim`]: interval, MAP, and level-set estimates of the region.
//! * [`selection`]: posterior scores over candidate constraint sets.
//! * [`simulate`]: seeded data generators for the worked experiments.
//! * [`experiment`]: config-driven batch runs emitting tables and plot
//!   data.

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod likelihood;
pub mod mcmc;
pub mod model;
pub mod orthant;
pub mod prior;
pub mod quad;
pub mod selection;
pub mod setestim;
pub mod simulate;
pub mod stats;

pub use dataset::{load_dataset, Dataset};
pub use error::{Error, Result};
pub use experiment::{
    derive_seed, emit_density_curve, run_experiment, ExperimentConfig, ExperimentId, PiKind,
    RunReport, SigmaLaw,
};
pub use likelihood::{LogLikelihoodContext, OrthantSettings};
pub use mcmc::{chain_quantile, metropolis, Chain, ProposalSpec};
pub use model::{MomentModel, PopulationMoments, ThetaBox};
pub use orthant::{orthant_bounds, orthant_probability, OrthantMethod, OrthantQuery};
pub use prior::{Hyperparameters, PriorKind, ThetaPrior};
pub use selection::{
    assemble_a2_blocks, candidate_prior_a1, enumerate_candidates, log_integrated_likelihood_a1,
    log_integrated_likelihood_a2, mpc_select, save_selection_report, true_combination_oracle,
    ApproachTwoBlocks, CandidateConstraints, CandidatePosterior, CandidateScore, Combination,
    SelectionApproach, SelectionSettings,
};
pub use setestim::{
    epsilon_schedule, hausdorff, level_set_region, map_maximize, quantile_set_estimate,
    EpsilonKind, IntervalEstimate, LevelSetRegion, LevelSetResolution,
};
pub use simulate::{
    example_5_3_model, gen_example_4_1, gen_example_5_1, gen_example_5_2, gen_example_5_3,
    population_example_4_1, population_example_5_1, population_example_5_2,
    population_example_5_3,
};
