//! Dirichlet process mixture MCMC over aligned angle-pair sequences.

pub mod chain;
pub mod dataset;

use thiserror::Error;

pub use chain::{
    assignment_log_weights, aux_gibbs_scan, expected_clusters_prior, init_chain, run_chain,
    sequence_log_likelihood, update_means, update_precisions, update_states, ChainOutput, Cluster,
    ClusterParams, ClusterSnapshot, ClusterState, InitMode, McmcConfig, PosteriorSample,
};
pub use dataset::{AlignmentDataset, AngleSequence, DataError};

use crate::priors::PriorError;
use crate::torus::TorusError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid partition state: {0}")]
    InvalidPartition(String),
    #[error("at iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        source: Box<SamplerError>,
    },
    #[error(transparent)]
    Prior(#[from] PriorError),
    #[error(transparent)]
    Torus(#[from] TorusError),
    #[error(transparent)]
    Data(#[from] DataError),
}
