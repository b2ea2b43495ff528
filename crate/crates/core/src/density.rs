//! Posterior-predictive density estimation: Monte Carlo averages of sine
//! densities over predictive parameter draws, grid evaluation per position,
//! and candidate-sequence sampling from a fitted model.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::priors::{Prior, ResidueClass};
use crate::sampler::{AngleSequence, ChainOutput, ClusterSnapshot, SamplerError};
use crate::torus::{
    precision_to_sine, sine_gibbs_draw, AnglePair, PrecisionMatrix, SineModelParams, TorusError,
    TWO_PI,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DensityError {
    #[error("model needs at least one retained posterior sample")]
    NoSamples,
    #[error("draw count must be >= 1")]
    ZeroDraws,
    #[error("target mask or length inconsistent with the fitted model")]
    MaskMismatch,
    #[error("position {0} is not observed in the target mask")]
    PositionNotObserved(usize),
    #[error("conditional requires nonempty, disjoint position sets")]
    BadConditionalSets,
    #[error("grids differ in resolution or position")]
    GridMismatch,
    #[error(transparent)]
    Torus(#[from] TorusError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// One retained posterior sample tagged with its origin; the tag keys the
/// per-draw random streams so estimates do not depend on sample order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetainedSample {
    pub chain_id: usize,
    pub iteration: usize,
    pub clusters: Vec<ClusterSnapshot>,
}

/// Sine-model parameters of one position in one predictive draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionParams {
    pub mean: AnglePair,
    pub precision: PrecisionMatrix,
    pub log_c: f64,
}

impl PositionParams {
    pub fn log_density(&self, x: AnglePair) -> f64 {
        let (k1, k2, l) = precision_to_sine(&self.precision);
        self.log_c
            + k1 * (x.phi - self.mean.phi).cos()
            + k2 * (x.psi - self.mean.psi).cos()
            + l * (x.phi - self.mean.phi).sin() * (x.psi - self.mean.psi).sin()
    }

    pub fn sine_params(&self) -> SineModelParams {
        let (kappa1, kappa2, lambda) = precision_to_sine(&self.precision);
        SineModelParams {
            mu: self.mean.phi,
            nu: self.mean.psi,
            kappa1,
            kappa2,
            lambda,
        }
    }
}

/// One predictive parameter draw: parameters at every observed target
/// position (masked-out positions stay `None` and consume no randomness).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDraw {
    pub params: Vec<Option<PositionParams>>,
    /// State per observed position when the draw came from the HMM prior or
    /// an HMM-mode cluster.
    pub states: Vec<Option<crate::priors::SsState>>,
}

/// A fitted model ready for posterior-predictive evaluation at one target
/// mask.
#[derive(Debug, Clone)]
pub struct PredictiveModel {
    pub id: String,
    samples: Vec<RetainedSample>,
    n_data: usize,
    alpha0: f64,
    prior: Prior,
    mask: Vec<bool>,
    classes: Vec<ResidueClass>,
}

impl PredictiveModel {
    pub fn new(
        id: impl Into<String>,
        chains: &[ChainOutput],
        n_data: usize,
        alpha0: f64,
        prior: Prior,
        mask: Vec<bool>,
        classes: Vec<ResidueClass>,
    ) -> Result<Self, DensityError> {
        let samples: Vec<RetainedSample> = chains
            .iter()
            .flat_map(|c| {
                c.samples.iter().map(move |s| RetainedSample {
                    chain_id: c.chain_id,
                    iteration: s.iteration,
                    clusters: s.clusters.clone(),
                })
            })
            .collect();
        Self::from_samples(id, samples, n_data, alpha0, prior, mask, classes)
    }

    pub fn from_samples(
        id: impl Into<String>,
        samples: Vec<RetainedSample>,
        n_data: usize,
        alpha0: f64,
        prior: Prior,
        mask: Vec<bool>,
        classes: Vec<ResidueClass>,
    ) -> Result<Self, DensityError> {
        if samples.is_empty() {
            return Err(DensityError::NoSamples);
        }
        if mask.len() != classes.len() {
            return Err(DensityError::MaskMismatch);
        }
        for s in &samples {
            for c in &s.clusters {
                if c.means.len() != mask.len() {
                    return Err(DensityError::MaskMismatch);
                }
            }
        }
        Ok(Self {
            id: id.into(),
            samples,
            n_data,
            alpha0,
            prior,
            mask,
            classes,
        })
    }

    pub fn retained_count(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[RetainedSample] {
        &self.samples
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn classes(&self) -> &[ResidueClass] {
        &self.classes
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn n_data(&self) -> usize {
        self.n_data
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    fn observed_positions(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(j, &m)| if m { Some(j) } else { None })
            .collect()
    }

    /// Deterministic per-draw stream keyed by the retained sample's identity
    /// and the cycle index, so estimates are invariant to sample ordering.
    fn draw_rng(&self, sample: &RetainedSample, cycle: u64, base: u64) -> ChaCha20Rng {
        let mut h = crate::util::Fnv1a::new();
        h.write_u64(base);
        h.write_u64(sample.chain_id as u64);
        h.write_u64(sample.iteration as u64);
        h.write_u64(cycle);
        ChaCha20Rng::seed_from_u64(h.finish())
    }

    /// The predictive draws for a seeded estimator call: draw k cycles over
    /// the retained samples (sample k mod R, cycle k div R).
    pub fn predictive_draws_seeded(
        &self,
        draw_count: usize,
        base: u64,
    ) -> Result<Vec<PredictiveDraw>, DensityError> {
        if draw_count == 0 {
            return Err(DensityError::ZeroDraws);
        }
        let r = self.samples.len();
        (0..draw_count)
            .map(|k| {
                let sample = &self.samples[k % r];
                let mut rng = self.draw_rng(sample, (k / r) as u64, base);
                posterior_predictive_draw(sample, self, &mut rng)
            })
            .collect()
    }

    fn check_target(&self, target: &AngleSequence) -> Result<(), DensityError> {
        if target.len() != self.mask.len() {
            return Err(DensityError::MaskMismatch);
        }
        for (j, cell) in target.cells.iter().enumerate() {
            if cell.is_some() && !self.mask[j] {
                return Err(DensityError::MaskMismatch);
            }
        }
        Ok(())
    }
}

/// One draw from the Dirichlet-process posterior predictive of the
/// parameters: an existing cluster c with probability n_c / (n + alpha0),
/// a fresh draw from the centering distribution with probability
/// alpha0 / (n + alpha0). Parameters are generated only at observed target
/// positions.
pub fn posterior_predictive_draw(
    sample: &RetainedSample,
    model: &PredictiveModel,
    rng: &mut impl Rng,
) -> Result<PredictiveDraw, DensityError> {
    let m = model.mask.len();
    let positions = model.observed_positions();
    let total = model.n_data as f64 + model.alpha0;
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut chosen: Option<&ClusterSnapshot> = None;
    for cluster in &sample.clusters {
        acc += cluster.size() as f64;
        if u < acc {
            chosen = Some(cluster);
            break;
        }
    }
    let mut params = vec![None; m];
    let mut states = vec![None; m];
    match chosen {
        Some(cluster) => {
            for &j in &positions {
                params[j] = Some(PositionParams {
                    mean: cluster.means[j],
                    precision: cluster.precisions[j],
                    log_c: cluster.log_c[j],
                });
                states[j] = cluster.states.as_ref().map(|s| s[j]);
            }
        }
        None => match &model.prior {
            Prior::Noninformative(nip) => {
                for &j in &positions {
                    let mean = nip.h1.sample(rng);
                    let precision = nip.wishart.sample(rng);
                    params[j] = Some(make_position_params(mean, precision)?);
                }
            }
            Prior::Hmm(hp) => {
                // States only at observed positions, jumping the gaps with
                // multi-step transitions so masked-out positions consume no
                // randomness.
                let path = hp.set.chain().sample_path_at(&positions, rng);
                for (&j, &s) in positions.iter().zip(&path) {
                    let mean = hp.set.emission(model.classes[j], s).sample(rng);
                    let precision = hp.wishart.sample(rng);
                    params[j] = Some(make_position_params(mean, precision)?);
                    states[j] = Some(s);
                }
            }
        },
    }
    Ok(PredictiveDraw { params, states })
}

fn make_position_params(
    mean: AnglePair,
    precision: PrecisionMatrix,
) -> Result<PositionParams, DensityError> {
    let (kappa1, kappa2, lambda) = precision_to_sine(&precision);
    let log_c = crate::torus::log_sine_norm_constant(&SineModelParams {
        mu: 0.0,
        nu: 0.0,
        kappa1,
        kappa2,
        lambda,
    })?;
    Ok(PositionParams {
        mean,
        precision,
        log_c,
    })
}

/// Sorted log-sum-exp: summation order independent of input order, so
/// estimates are bitwise stable under permutations of equal draw sets.
fn log_mean_exp_sorted(values: &mut Vec<f64>) -> f64 {
    values.sort_by(|a, b| b.total_cmp(a));
    let m = values.first().copied().unwrap_or(f64::NEG_INFINITY);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - m).exp()).sum();
    m + sum.ln() - (values.len() as f64).ln()
}

/// Monte Carlo estimate of the joint predictive log density of the target:
/// log (1/B) sum_k f(x | theta_k), only observed positions contributing.
pub fn estimate_joint_logdensity_seeded(
    target: &AngleSequence,
    model: &PredictiveModel,
    draw_count: usize,
    base: u64,
) -> Result<f64, DensityError> {
    model.check_target(target)?;
    let draws = model.predictive_draws_seeded(draw_count, base)?;
    let mut terms: Vec<f64> = draws
        .iter()
        .map(|d| draw_log_likelihood(d, target))
        .collect();
    Ok(log_mean_exp_sorted(&mut terms))
}

/// As `estimate_joint_logdensity_seeded`, drawing the stream key from `rng`.
pub fn estimate_joint_logdensity(
    target: &AngleSequence,
    model: &PredictiveModel,
    draw_count: usize,
    rng: &mut impl Rng,
) -> Result<f64, DensityError> {
    estimate_joint_logdensity_seeded(target, model, draw_count, rng.next_u64())
}

fn draw_log_likelihood(draw: &PredictiveDraw, target: &AngleSequence) -> f64 {
    target
        .cells
        .iter()
        .enumerate()
        .filter_map(|(j, c)| {
            c.map(|x| draw.params[j].expect("mask checked").log_density(x))
        })
        .sum()
}

/// Per-position log-density lattice over cell centers of (-pi, pi]^2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub position: usize,
    pub resolution: usize,
    /// Row-major: index u * resolution + v holds the cell centered at
    /// phi = -pi + (u + 0.5) dx, psi = -pi + (v + 0.5) dx.
    pub log_values: Vec<f64>,
}

impl DensityGrid {
    pub fn cell_width(&self) -> f64 {
        TWO_PI / self.resolution as f64
    }

    pub fn cell_center(&self, u: usize, v: usize) -> AnglePair {
        let dx = self.cell_width();
        AnglePair {
            phi: -std::f64::consts::PI + (u as f64 + 0.5) * dx,
            psi: -std::f64::consts::PI + (v as f64 + 0.5) * dx,
        }
    }

    /// Riemann mass: sum exp(log f) times cell area. Near 1 for a proper
    /// marginal grid.
    pub fn quadrature_mass(&self) -> f64 {
        let area = self.cell_width() * self.cell_width();
        self.log_values.iter().map(|l| l.exp()).sum::<f64>() * area
    }

    /// Cell probability masses normalized to sum 1.
    pub fn normalized_masses(&self) -> Vec<f64> {
        let total: f64 = self.log_values.iter().map(|l| l.exp()).sum();
        self.log_values.iter().map(|l| l.exp() / total).collect()
    }
}

/// Marginal predictive density grid at one position: per cell the log of the
/// Monte Carlo average of sine densities over the predictive draws. Draws
/// are generated serially first; the grid is filled in parallel from the
/// frozen draw list.
pub fn marginal_grid_seeded(
    position: usize,
    model: &PredictiveModel,
    draw_count: usize,
    resolution: usize,
    base: u64,
) -> Result<DensityGrid, DensityError> {
    if position >= model.mask.len() || !model.mask[position] {
        return Err(DensityError::PositionNotObserved(position));
    }
    let draws = model.predictive_draws_seeded(draw_count, base)?;
    let params: Vec<PositionParams> = draws
        .iter()
        .map(|d| d.params[position].expect("observed position"))
        .collect();
    let g = resolution;
    let dx = TWO_PI / g as f64;
    let b = params.len() as f64;
    let mut log_values = vec![0.0_f64; g * g];
    log_values
        .par_chunks_mut(g)
        .enumerate()
        .for_each(|(u, row)| {
            let phi = -std::f64::consts::PI + (u as f64 + 0.5) * dx;
            // Per-draw terms that depend only on phi.
            let pre: Vec<(f64, f64, f64, f64, f64)> = params
                .iter()
                .map(|p| {
                    let (k1, k2, l) = precision_to_sine(&p.precision);
                    let du = phi - p.mean.phi;
                    (p.log_c + k1 * du.cos(), l * du.sin(), k2, p.mean.psi, l)
                })
                .collect();
            for (v, out) in row.iter_mut().enumerate() {
                let psi = -std::f64::consts::PI + (v as f64 + 0.5) * dx;
                let mut sum = 0.0_f64;
                for &(base_term, lsin, k2, nu, _) in &pre {
                    let dv = psi - nu;
                    sum += (base_term + k2 * dv.cos() + lsin * dv.sin()).exp();
                }
                *out = (sum / b).ln();
            }
        });
    Ok(DensityGrid {
        position,
        resolution,
        log_values,
    })
}

pub fn marginal_grid(
    position: usize,
    model: &PredictiveModel,
    draw_count: usize,
    resolution: usize,
    rng: &mut impl Rng,
) -> Result<DensityGrid, DensityError> {
    marginal_grid_seeded(position, model, draw_count, resolution, rng.next_u64())
}

/// Conditional predictive log density of the query values given the
/// conditioning values, sharing one draw set:
/// log[ avg_k f(Q, S | theta_k) ] - log[ avg_k f(S | theta_k) ].
pub fn conditional_logdensity_seeded(
    conditioning: &[(usize, AnglePair)],
    query: &[(usize, AnglePair)],
    model: &PredictiveModel,
    draw_count: usize,
    base: u64,
) -> Result<f64, DensityError> {
    if conditioning.is_empty() || query.is_empty() {
        return Err(DensityError::BadConditionalSets);
    }
    for (j, _) in conditioning.iter().chain(query) {
        if *j >= model.mask.len() || !model.mask[*j] {
            return Err(DensityError::PositionNotObserved(*j));
        }
    }
    for (j, _) in query {
        if conditioning.iter().any(|(s, _)| s == j) {
            return Err(DensityError::BadConditionalSets);
        }
    }
    let draws = model.predictive_draws_seeded(draw_count, base)?;
    let mut joint_terms = Vec::with_capacity(draws.len());
    let mut cond_terms = Vec::with_capacity(draws.len());
    for d in &draws {
        let s: f64 = conditioning
            .iter()
            .map(|&(j, x)| d.params[j].expect("checked").log_density(x))
            .sum();
        let q: f64 = query
            .iter()
            .map(|&(j, x)| d.params[j].expect("checked").log_density(x))
            .sum();
        cond_terms.push(s);
        joint_terms.push(s + q);
    }
    Ok(log_mean_exp_sorted(&mut joint_terms) - log_mean_exp_sorted(&mut cond_terms))
}

pub fn conditional_logdensity(
    conditioning: &[(usize, AnglePair)],
    query: &[(usize, AnglePair)],
    model: &PredictiveModel,
    draw_count: usize,
    rng: &mut impl Rng,
) -> Result<f64, DensityError> {
    conditional_logdensity_seeded(conditioning, query, model, draw_count, rng.next_u64())
}

/// Candidate angle-pair sequences: one predictive parameter draw per
/// candidate (cycling over the retained samples), then one sine-model draw
/// per observed position.
pub fn sample_candidate_sequences(
    model: &PredictiveModel,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<AngleSequence>, DensityError> {
    let r = model.samples.len();
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let sample = &model.samples[k % r];
        let draw = posterior_predictive_draw(sample, model, rng)?;
        let cells: Vec<Option<AnglePair>> = draw
            .params
            .iter()
            .map(|p| p.map(|pp| sine_gibbs_draw(&pp.sine_params(), rng)))
            .collect();
        out.push(AngleSequence {
            id: format!("candidate_{k}"),
            classes: model.classes.clone(),
            cells,
        });
    }
    Ok(out)
}
