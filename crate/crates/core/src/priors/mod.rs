//! Centering-distribution families for the Dirichlet process: the
//! noninformative product prior, the secondary-structure HMM prior, the
//! Wishart prior on precisions, and the conjugate machinery for the mean
//! updates.

pub mod hmm;
pub mod mean_update;
pub mod wishart;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hmm::{
    builtin_general_emissions, estimate_transition_matrix, fb_sample_states, hmm_log_prior,
    stationary_distribution, EmissionTable, ResidueClass, ResiduePriorSet, SecondaryStructureHmm,
    SineMixture, SsState, StateChain,
};
pub use mean_update::{
    eight_param_posterior, mixture_full_conditional, sample_mean_full_conditional,
    sine_approx_lambda, EightParamPosterior, H1Prior, MeanFullConditional, MeanObservation,
    NoninformativePrior,
};
pub use wishart::WishartPrior;

use crate::torus::TorusError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PriorError {
    #[error("Wishart degrees of freedom must be >= 1, got {0}")]
    InvalidWishartDof(f64),
    #[error("transition row {0} is not a probability vector")]
    InvalidTransitionRow(usize),
    #[error("stationary distribution did not converge within 10000 iterations (reducible or periodic chain)")]
    StationaryDidNotConverge,
    #[error("unknown secondary-structure state '{0}' (expected H, E, T, or C)")]
    UnknownState(char),
    #[error("state corpus is empty")]
    EmptyStateCorpus,
    #[error("mixture must have 1..=8 components, got {0}")]
    BadMixtureSize(usize),
    #[error("mixture weights must be nonnegative and sum to 1, got sum {0}")]
    BadMixtureWeights(f64),
    #[error("means/states length mismatch: {means} vs {states}")]
    LengthMismatch { means: usize, states: usize },
    #[error("all four states have zero emission density at position {0}")]
    ZeroEmissionRow(usize),
    #[error(transparent)]
    Torus(#[from] TorusError),
}

/// The centering distribution G0 = H1 * H2 in one of its two forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Prior {
    Noninformative(NoninformativePrior),
    Hmm(HmmPrior),
}

/// HMM centering prior: per-residue-class emission tables plus the shared
/// Wishart for precisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmPrior {
    pub set: ResiduePriorSet,
    pub wishart: WishartPrior,
}

impl Prior {
    pub fn wishart(&self) -> &WishartPrior {
        match self {
            Prior::Noninformative(p) => &p.wishart,
            Prior::Hmm(p) => &p.wishart,
        }
    }

    pub fn is_hmm(&self) -> bool {
        matches!(self, Prior::Hmm(_))
    }
}
