//! Conjugate machinery for updating the sine-model mean parameters.
//!
//! With the precision matrix known, the full conditional of (mu, nu) under a
//! sine-model prior component is an eight-parameter bivariate von Mises
//! distribution whose resultant parameters have closed forms; the prior mean
//! pair enters as one additional observation. A mixture prior stays a
//! mixture with reweighted components. Since the eight-parameter normalizing
//! constant has no computational formula, sampling uses an independence
//! proposal that collapses each component to a five-parameter sine model.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::priors::hmm::{sample_categorical, SineMixture};
use crate::priors::wishart::WishartPrior;
use crate::priors::PriorError;
use crate::torus::{log_sum_exp, AnglePair, SineModel, SineModelParams};

/// One likelihood term entering the mean full conditional: an observed angle
/// pair with its per-point sine parameters. In the sampler these come from
/// the cluster's precision matrix, shared across the cluster's members.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanObservation {
    pub angles: AnglePair,
    pub kappa1: f64,
    pub kappa2: f64,
    pub lambda: f64,
}

/// Eight-parameter full conditional of (mu, nu): resultant directions and
/// lengths plus the 2x2 association matrix from the lambda terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EightParamPosterior {
    pub mu: f64,
    pub nu: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub a: [[f64; 2]; 2],
    /// Set when a resultant length vanished; the direction defaults to 0.
    pub degenerate: bool,
}

impl EightParamPosterior {
    /// Unnormalized log density:
    /// k1 cos(mu - mu~) + k2 cos(nu - nu~)
    ///   + [cos(mu - mu~), sin(mu - mu~)] A [cos(nu - nu~), sin(nu - nu~)]^T.
    pub fn log_unnorm(&self, x: AnglePair) -> f64 {
        let (su, cu) = (x.phi - self.mu).sin_cos();
        let (sv, cv) = (x.psi - self.nu).sin_cos();
        self.kappa1 * cu
            + self.kappa2 * cv
            + cu * (self.a[0][0] * cv + self.a[0][1] * sv)
            + su * (self.a[1][0] * cv + self.a[1][1] * sv)
    }
}

/// Combines the prior component (as the i = 0 pseudo-observation) with the
/// data terms into the eight-parameter full conditional.
pub fn eight_param_posterior(
    data: &[MeanObservation],
    prior: &SineModelParams,
) -> EightParamPosterior {
    let mut c1 = prior.kappa1 * prior.mu.cos();
    let mut s1 = prior.kappa1 * prior.mu.sin();
    let mut c2 = prior.kappa2 * prior.nu.cos();
    let mut s2 = prior.kappa2 * prior.nu.sin();
    for obs in data {
        c1 += obs.kappa1 * obs.angles.phi.cos();
        s1 += obs.kappa1 * obs.angles.phi.sin();
        c2 += obs.kappa2 * obs.angles.psi.cos();
        s2 += obs.kappa2 * obs.angles.psi.sin();
    }
    let kappa1 = (c1 * c1 + s1 * s1).sqrt();
    let kappa2 = (c2 * c2 + s2 * s2).sqrt();
    let degenerate = kappa1 == 0.0 || kappa2 == 0.0;
    let mu = if kappa1 > 0.0 { s1.atan2(c1) } else { 0.0 };
    let nu = if kappa2 > 0.0 { s2.atan2(c2) } else { 0.0 };

    let mut a = [[0.0_f64; 2]; 2];
    let mut add = |lambda: f64, phi: f64, psi: f64| {
        let (sdu, cdu) = (phi - mu).sin_cos();
        let (sdv, cdv) = (psi - nu).sin_cos();
        a[0][0] += lambda * sdu * sdv;
        a[0][1] -= lambda * sdu * cdv;
        a[1][0] -= lambda * cdu * sdv;
        a[1][1] += lambda * cdu * cdv;
    };
    add(prior.lambda, prior.mu, prior.nu);
    for obs in data {
        add(obs.lambda, obs.angles.phi, obs.angles.psi);
    }
    EightParamPosterior {
        mu,
        nu,
        kappa1,
        kappa2,
        a,
        degenerate,
    }
}

/// Five-parameter surrogate for the association matrix:
/// lambda~ = (sum_{i=0}^n lambda_i x_i . y_i) / cos(mu~ - nu~) with x_i, y_i
/// the unit vectors of phi_i and psi_i, so a lone prior pseudo-observation
/// reproduces its own lambda. Falls back to 0 when the denominator is within
/// 1e-8 of zero; the acceptance step preserves correctness either way.
pub fn sine_approx_lambda(
    posterior: &EightParamPosterior,
    data: &[MeanObservation],
    prior: &SineModelParams,
) -> f64 {
    let denom = (posterior.mu - posterior.nu).cos();
    if denom.abs() < 1e-8 {
        return 0.0;
    }
    let mut dot = prior.lambda * (prior.mu - prior.nu).cos();
    for obs in data {
        dot += obs.lambda * (obs.angles.phi - obs.angles.psi).cos();
    }
    dot / denom
}

/// One component of the mixture full conditional: the exact eight-parameter
/// form for the Metropolis-Hastings target and the five-parameter surrogate
/// used as the independence proposal.
#[derive(Debug, Clone)]
pub struct FullConditionalComponent {
    /// ln p*_k, normalized across components.
    pub log_weight: f64,
    /// Five-parameter surrogate with its series constant.
    pub proposal: SineModel,
    /// Exact eight-parameter full conditional.
    pub exact: EightParamPosterior,
    /// ln p_k + ln C_k, the component's weight in the unnormalized target.
    pub log_target_weight: f64,
}

/// Approximate mixture full conditional of (mu, nu) for one position.
#[derive(Debug, Clone)]
pub struct MeanFullConditional {
    pub components: Vec<FullConditionalComponent>,
}

impl MeanFullConditional {
    /// Unnormalized log density of the exact eight-parameter mixture.
    pub fn log_target(&self, x: AnglePair) -> f64 {
        let terms: Vec<f64> = self
            .components
            .iter()
            .map(|c| c.log_target_weight + c.exact.log_unnorm(x))
            .collect();
        log_sum_exp(&terms)
    }

    /// Normalized log density of the five-parameter proposal mixture.
    pub fn log_proposal(&self, x: AnglePair) -> f64 {
        let terms: Vec<f64> = self
            .components
            .iter()
            .map(|c| c.log_weight + c.proposal.log_density(x))
            .collect();
        log_sum_exp(&terms)
    }

    pub fn propose(&self, rng: &mut impl Rng) -> AnglePair {
        let weights: Vec<f64> = self.components.iter().map(|c| c.log_weight.exp()).collect();
        let k = sample_categorical(&weights, rng);
        self.components[k].proposal.sample_one(rng)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.log_weight.exp()).collect()
    }

    /// The proposal mixture as a plain sine mixture (weights p*_k).
    pub fn approximate_mixture(&self) -> Result<SineMixture, PriorError> {
        let mut comps: Vec<(f64, SineModelParams)> = self
            .components
            .iter()
            .map(|c| (c.log_weight.exp(), *c.proposal.params()))
            .collect();
        let total: f64 = comps.iter().map(|(w, _)| w).sum();
        for (w, _) in &mut comps {
            *w /= total;
        }
        SineMixture::new(comps)
    }
}

/// Builds the K-component approximate full conditional. Component k combines
/// the prior component with the data via `eight_param_posterior`, collapses
/// to five parameters via `sine_approx_lambda`, and is weighted
/// p*_k proportional to p_k C_k / C~_k, with both constants from the series.
pub fn mixture_full_conditional(
    prior: &SineMixture,
    data: &[MeanObservation],
) -> Result<MeanFullConditional, PriorError> {
    let mut components = Vec::with_capacity(prior.len());
    let mut raw_log_weights = Vec::with_capacity(prior.len());
    for (weight, component) in prior.models() {
        let prior_params = component.params();
        let exact = eight_param_posterior(data, prior_params);
        let lambda = sine_approx_lambda(&exact, data, prior_params);
        let surrogate = SineModelParams {
            mu: exact.mu,
            nu: exact.nu,
            kappa1: exact.kappa1,
            kappa2: exact.kappa2,
            lambda,
        };
        let proposal = SineModel::new(surrogate)?;
        // ln p_k + ln C_k - ln C~_k
        let log_target_weight = weight.ln() + component.log_norm_constant();
        raw_log_weights.push(log_target_weight - proposal.log_norm_constant());
        components.push(FullConditionalComponent {
            log_weight: f64::NAN, // filled below
            proposal,
            exact,
            log_target_weight,
        });
    }
    let norm = log_sum_exp(&raw_log_weights);
    for (c, lw) in components.iter_mut().zip(&raw_log_weights) {
        c.log_weight = lw - norm;
    }
    Ok(MeanFullConditional { components })
}

/// One Metropolis-Hastings independence step on (mu, nu): propose from the
/// five-parameter mixture, accept against the exact eight-parameter target.
/// Any numerical failure in the ratio rejects the move.
pub fn sample_mean_full_conditional(
    current: AnglePair,
    full_cond: &MeanFullConditional,
    rng: &mut impl Rng,
) -> (AnglePair, bool) {
    let proposal = full_cond.propose(rng);
    let log_ratio = full_cond.log_target(proposal) + full_cond.log_proposal(current)
        - full_cond.log_target(current)
        - full_cond.log_proposal(proposal);
    if log_ratio.is_nan() {
        return (current, false);
    }
    if log_ratio >= 0.0 || rng.gen::<f64>().ln() < log_ratio {
        (proposal, true)
    } else {
        (current, false)
    }
}

/// The noninformative centering prior: a single diffuse sine model (or the
/// flat density on the torus) for the means, and a Wishart for precisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoninformativePrior {
    pub h1: H1Prior,
    pub wishart: WishartPrior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum H1Prior {
    Sine(SineModelParams),
    /// Flat density (2 pi)^{-2}, entering the conjugate update as a
    /// pseudo-observation with zero concentrations.
    Uniform,
}

impl H1Prior {
    /// The prior as a single-component mixture for the conjugate machinery.
    pub fn as_component(&self) -> SineModelParams {
        match self {
            H1Prior::Sine(p) => *p,
            H1Prior::Uniform => SineModelParams {
                mu: 0.0,
                nu: 0.0,
                kappa1: 0.0,
                kappa2: 0.0,
                lambda: 0.0,
            },
        }
    }

    pub fn log_density(&self, x: AnglePair) -> f64 {
        match self {
            H1Prior::Sine(p) => SineModel::new(*p).expect("valid prior").log_density(x),
            H1Prior::Uniform => -2.0 * crate::torus::TWO_PI.ln(),
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> AnglePair {
        match self {
            H1Prior::Sine(p) => SineModel::new(*p).expect("valid prior").sample_one(rng),
            H1Prior::Uniform => {
                let phi = crate::torus::wrap_angle(
                    crate::torus::TWO_PI * rng.gen::<f64>() - std::f64::consts::PI,
                );
                let psi = crate::torus::wrap_angle(
                    crate::torus::TWO_PI * rng.gen::<f64>() - std::f64::consts::PI,
                );
                AnglePair { phi, psi }
            }
        }
    }
}

impl NoninformativePrior {
    pub fn new(h1: H1Prior, wishart: WishartPrior) -> Self {
        Self { h1, wishart }
    }

    /// Single-component prior mixture for the mean update.
    pub fn prior_mixture(&self) -> Result<SineMixture, PriorError> {
        SineMixture::new(vec![(1.0, self.h1.as_component())])
    }
}
