//! Dirichlet process mixtures of bivariate von Mises sine models for
//! joint density estimation of torsion-angle sequences under sparse
//! alignment data, with either a noninformative centering prior or a
//! secondary-structure hidden-Markov-model centering prior.

pub mod bessel;
pub mod priors;
pub mod torus;

pub use priors::{Prior, SsState};
pub use torus::{AnglePair, PrecisionMatrix, SineModel, SineModelParams};
