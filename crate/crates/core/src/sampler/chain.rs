//! The Dirichlet process mixture sampler over angle-pair sequences.
//!
//! One iteration runs, in order: (a) one Auxiliary Gibbs scan reassigning
//! sequences among clusters, (b) a Wishart independence-sampler update of
//! each cluster's per-position precision matrix, (c) under the HMM prior, a
//! forward-backward draw of each cluster's state chain, and (d) an
//! independence-sampler update of each cluster's per-position means.
//! Absent cells contribute no likelihood factor anywhere.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::eval::clustering_entropy;
use crate::priors::hmm::{fb_sample_from_log_emissions, sample_categorical_log};
use crate::priors::{
    mixture_full_conditional, sample_mean_full_conditional, HmmPrior, MeanObservation, Prior,
    ResidueClass, SineMixture, SsState,
};
use crate::sampler::{AlignmentDataset, SamplerError};
use crate::torus::{
    angular_diff, log_sine_norm_constant, precision_to_sine, AnglePair, PrecisionMatrix,
    SineModelParams,
};

/// Per-cluster sine-model parameters for every alignment position, with the
/// normalizing constant cached per position (it depends only on the
/// precision matrix).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub means: Vec<AnglePair>,
    pub precisions: Vec<PrecisionMatrix>,
    pub log_c: Vec<f64>,
    pub states: Option<Vec<SsState>>,
}

impl ClusterParams {
    /// Fresh draw from the centering distribution H1 x H2.
    pub fn sample_from_prior(
        prior: &Prior,
        classes: &[ResidueClass],
        rng: &mut impl Rng,
    ) -> Result<Self, SamplerError> {
        let m = classes.len();
        let (means, states) = match prior {
            Prior::Noninformative(nip) => {
                let means = (0..m).map(|_| nip.h1.sample(rng)).collect();
                (means, None)
            }
            Prior::Hmm(hp) => {
                let states = hp.set.chain().sample_path(m, rng);
                let means = states
                    .iter()
                    .enumerate()
                    .map(|(j, &s)| hp.set.emission(classes[j], s).sample(rng))
                    .collect();
                (means, Some(states))
            }
        };
        let precisions: Vec<PrecisionMatrix> =
            (0..m).map(|_| prior.wishart().sample(rng)).collect();
        let log_c = precisions
            .iter()
            .map(|omega| log_c_for(omega))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            means,
            precisions,
            log_c,
            states,
        })
    }

    pub fn n_positions(&self) -> usize {
        self.means.len()
    }

    /// Sine-model log density of one observed cell under position j's
    /// parameters.
    pub fn position_log_density(&self, j: usize, x: AnglePair) -> f64 {
        let mean = self.means[j];
        let (k1, k2, l) = precision_to_sine(&self.precisions[j]);
        self.log_c[j]
            + k1 * (x.phi - mean.phi).cos()
            + k2 * (x.psi - mean.psi).cos()
            + l * (x.phi - mean.phi).sin() * (x.psi - mean.psi).sin()
    }
}

fn log_c_for(omega: &PrecisionMatrix) -> Result<f64, SamplerError> {
    let (kappa1, kappa2, lambda) = precision_to_sine(omega);
    let params = SineModelParams {
        mu: 0.0,
        nu: 0.0,
        kappa1,
        kappa2,
        lambda,
    };
    Ok(log_sine_norm_constant(&params)?)
}

/// Log likelihood of one sequence under a cluster's parameters; absent cells
/// contribute factor 1.
pub fn sequence_log_likelihood(cells: &[Option<AnglePair>], params: &ClusterParams) -> f64 {
    cells
        .iter()
        .enumerate()
        .filter_map(|(j, c)| c.map(|x| params.position_log_density(j, x)))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub members: Vec<usize>,
    pub params: ClusterParams,
}

/// Current partition of the sequences plus per-cluster parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    pub clusters: Vec<Cluster>,
    pub assignment: Vec<usize>,
}

impl ClusterState {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c.members.len()).collect()
    }

    /// Checks the partition: every sequence in exactly one cluster, no empty
    /// clusters, assignment consistent with membership.
    pub fn check_partition(&self, n: usize) -> Result<(), SamplerError> {
        let mut seen = vec![false; n];
        for (ci, cluster) in self.clusters.iter().enumerate() {
            if cluster.members.is_empty() {
                return Err(SamplerError::InvalidPartition("empty cluster retained".into()));
            }
            for &i in &cluster.members {
                if i >= n || seen[i] {
                    return Err(SamplerError::InvalidPartition(format!(
                        "sequence {i} misassigned"
                    )));
                }
                seen[i] = true;
                if self.assignment[i] != ci {
                    return Err(SamplerError::InvalidPartition(format!(
                        "assignment[{i}] inconsistent"
                    )));
                }
            }
        }
        if !seen.iter().all(|&s| s) {
            return Err(SamplerError::InvalidPartition("unassigned sequence".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitMode {
    /// One cluster holding every sequence.
    SingleCluster,
    /// Each sequence in its own cluster.
    Singletons,
}

/// Chain configuration. The defaults follow the reference protocol: 11,000
/// iterations, 1,000 burn-in, 1-in-20 thinning, mass parameter 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub alpha0: f64,
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub init_mode: InitMode,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            alpha0: 1.0,
            iterations: 11_000,
            burnin: 1_000,
            thin: 20,
            init_mode: InitMode::SingleCluster,
            seed: 0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if !(self.alpha0 > 0.0) {
            return Err(SamplerError::InvalidConfig(format!(
                "alpha0 must be positive, got {}",
                self.alpha0
            )));
        }
        if self.burnin >= self.iterations {
            return Err(SamplerError::InvalidConfig(format!(
                "burnin {} must be below iterations {}",
                self.burnin, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(SamplerError::InvalidConfig("thin must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of samples a chain retains.
    pub fn retained_samples(&self) -> usize {
        (self.iterations - self.burnin) / self.thin
    }
}

/// Immutable snapshot of one retained iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSample {
    pub iteration: usize,
    pub clusters: Vec<ClusterSnapshot>,
    pub assignment: Vec<usize>,
    pub cluster_count: usize,
    pub entropy: f64,
    pub means_accepted: u64,
    pub means_attempted: u64,
    pub precisions_accepted: u64,
    pub precisions_attempted: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSnapshot {
    pub members: Vec<usize>,
    pub means: Vec<AnglePair>,
    pub precisions: Vec<PrecisionMatrix>,
    pub log_c: Vec<f64>,
    pub states: Option<Vec<SsState>>,
}

impl ClusterSnapshot {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Initial state: the chosen partition with every cluster's parameters drawn
/// from the centering distribution.
pub fn init_chain(
    data: &AlignmentDataset,
    config: &McmcConfig,
    prior: &Prior,
    rng: &mut impl Rng,
) -> Result<ClusterState, SamplerError> {
    let n = data.n_sequences();
    let state = match config.init_mode {
        InitMode::SingleCluster => ClusterState {
            clusters: vec![Cluster {
                members: (0..n).collect(),
                params: ClusterParams::sample_from_prior(prior, data.classes(), rng)?,
            }],
            assignment: vec![0; n],
        },
        InitMode::Singletons => {
            let clusters = (0..n)
                .map(|i| {
                    Ok(Cluster {
                        members: vec![i],
                        params: ClusterParams::sample_from_prior(prior, data.classes(), rng)?,
                    })
                })
                .collect::<Result<Vec<_>, SamplerError>>()?;
            ClusterState {
                clusters,
                assignment: (0..n).collect(),
            }
        }
    };
    Ok(state)
}

/// Unnormalized log assignment weights for one sequence: n_c * L_i(c) for
/// each existing cluster, then alpha0 * L_i(aux) for the auxiliary.
pub fn assignment_log_weights(
    clusters: &[Cluster],
    row: &[Option<AnglePair>],
    alpha0: f64,
    aux: &ClusterParams,
) -> Vec<f64> {
    let mut weights: Vec<f64> = clusters
        .iter()
        .map(|c| (c.members.len() as f64).ln() + sequence_log_likelihood(row, &c.params))
        .collect();
    weights.push(alpha0.ln() + sequence_log_likelihood(row, aux));
    weights
}

/// One full Auxiliary Gibbs scan with a single auxiliary component. A
/// departing singleton's parameters become the auxiliary's; otherwise the
/// auxiliary is a fresh draw from the centering distribution.
pub fn aux_gibbs_scan(
    state: &mut ClusterState,
    data: &AlignmentDataset,
    alpha0: f64,
    prior: &Prior,
    rng: &mut impl Rng,
) -> Result<(), SamplerError> {
    let n = data.n_sequences();
    for i in 0..n {
        let ci = state.assignment[i];
        let members = &mut state.clusters[ci].members;
        members.retain(|&x| x != i);
        let aux = if members.is_empty() {
            // Singleton departure: its cluster becomes the auxiliary.
            let removed = state.clusters.swap_remove(ci);
            if ci < state.clusters.len() {
                for &member in &state.clusters[ci].members {
                    state.assignment[member] = ci;
                }
            }
            removed.params
        } else {
            ClusterParams::sample_from_prior(prior, data.classes(), rng)?
        };

        let weights = assignment_log_weights(&state.clusters, data.row(i), alpha0, &aux);
        let choice = sample_categorical_log(&weights, rng);
        if choice == state.clusters.len() {
            state.clusters.push(Cluster {
                members: vec![i],
                params: aux,
            });
            state.assignment[i] = state.clusters.len() - 1;
        } else {
            state.clusters[choice].members.push(i);
            state.assignment[i] = choice;
        }
    }
    Ok(())
}

/// Independence-sampler update of every cluster's per-position precision
/// matrix. The proposal is the Wishart full conditional under the bivariate
/// normal approximation of the sine likelihood around the current means;
/// the acceptance ratio restores the exact von Mises target. Returns
/// (accepted, attempted).
pub fn update_precisions(
    state: &mut ClusterState,
    data: &AlignmentDataset,
    prior: &Prior,
    rng: &mut impl Rng,
) -> Result<(u64, u64), SamplerError> {
    let wishart = prior.wishart();
    let m = data.n_positions();
    let mut accepted = 0;
    let mut attempted = 0;
    for cluster in &mut state.clusters {
        for j in 0..m {
            let mean = cluster.params.means[j];
            // Residuals and likelihood sufficient statistics over observed
            // cells (shortest-arc differences).
            let mut n_obs = 0usize;
            let (mut s11, mut s12, mut s22) = (0.0, 0.0, 0.0);
            let (mut sum_c1, mut sum_c2, mut sum_ss) = (0.0, 0.0, 0.0);
            for &i in &cluster.members {
                if let Some(x) = data.cell(i, j) {
                    let d1 = angular_diff(x.phi, mean.phi);
                    let d2 = angular_diff(x.psi, mean.psi);
                    s11 += d1 * d1;
                    s12 += d1 * d2;
                    s22 += d2 * d2;
                    sum_c1 += d1.cos();
                    sum_c2 += d2.cos();
                    sum_ss += d1.sin() * d2.sin();
                    n_obs += 1;
                }
            }
            let proposal = wishart.posterior_given_normal(n_obs, s11, s12, s22);
            let omega_new = proposal.sample(rng);
            let log_c_new = log_c_for(&omega_new)?;
            let omega_old = cluster.params.precisions[j];
            let log_c_old = cluster.params.log_c[j];

            let target = |omega: &PrecisionMatrix, log_c: f64| -> f64 {
                let (k1, k2, l) = precision_to_sine(omega);
                wishart.log_density(omega)
                    + n_obs as f64 * log_c
                    + k1 * sum_c1
                    + k2 * sum_c2
                    + l * sum_ss
            };
            let log_ratio = target(&omega_new, log_c_new) - target(&omega_old, log_c_old)
                + proposal.log_density(&omega_old)
                - proposal.log_density(&omega_new);
            attempted += 1;
            if !log_ratio.is_nan() && (log_ratio >= 0.0 || rng.gen::<f64>().ln() < log_ratio) {
                cluster.params.precisions[j] = omega_new;
                cluster.params.log_c[j] = log_c_new;
                accepted += 1;
            }
        }
    }
    Ok((accepted, attempted))
}

/// Forward-backward redraw of every cluster's state chain given its means.
/// Given the means, the states are independent of the observed data.
pub fn update_states(
    state: &mut ClusterState,
    classes: &[ResidueClass],
    hmm: &HmmPrior,
    rng: &mut impl Rng,
) -> Result<(), SamplerError> {
    for cluster in &mut state.clusters {
        let log_emit: Vec<[f64; 4]> = cluster
            .params
            .means
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                let table = hmm.set.table_for(classes[j]);
                [
                    table[0].log_density(x),
                    table[1].log_density(x),
                    table[2].log_density(x),
                    table[3].log_density(x),
                ]
            })
            .collect();
        let states = fb_sample_from_log_emissions(&log_emit, hmm.set.chain(), rng)?;
        cluster.params.states = Some(states);
    }
    Ok(())
}

/// One independence-sampler step on every cluster's per-position means. The
/// prior component(s) come from h1 (noninformative) or from the position's
/// state emission mixture (HMM); the data terms use the cluster's precision
/// matrix. Returns (accepted, attempted).
pub fn update_means(
    state: &mut ClusterState,
    data: &AlignmentDataset,
    prior: &Prior,
    rng: &mut impl Rng,
) -> Result<(u64, u64), SamplerError> {
    let m = data.n_positions();
    let noninf_mixture: Option<SineMixture> = match prior {
        Prior::Noninformative(nip) => Some(nip.prior_mixture()?),
        Prior::Hmm(_) => None,
    };
    let mut accepted = 0;
    let mut attempted = 0;
    for cluster in &mut state.clusters {
        for j in 0..m {
            let (k1, k2, l) = precision_to_sine(&cluster.params.precisions[j]);
            let obs: Vec<MeanObservation> = cluster
                .members
                .iter()
                .filter_map(|&i| {
                    data.cell(i, j).map(|x| MeanObservation {
                        angles: x,
                        kappa1: k1,
                        kappa2: k2,
                        lambda: l,
                    })
                })
                .collect();
            let prior_mixture: &SineMixture = match prior {
                Prior::Noninformative(_) => noninf_mixture.as_ref().expect("built above"),
                Prior::Hmm(hp) => {
                    let states = cluster
                        .params
                        .states
                        .as_ref()
                        .ok_or_else(|| SamplerError::InvalidConfig(
                            "HMM prior requires state chains; run update_states first".into(),
                        ))?;
                    hp.set.emission(data.class(j), states[j])
                }
            };
            let fc = mixture_full_conditional(prior_mixture, &obs)?;
            let (new_mean, acc) =
                sample_mean_full_conditional(cluster.params.means[j], &fc, rng);
            cluster.params.means[j] = new_mean;
            attempted += 1;
            if acc {
                accepted += 1;
            }
        }
    }
    Ok((accepted, attempted))
}

/// Output of one chain: thinned post-burn-in snapshots plus whole-run
/// acceptance summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub chain_id: usize,
    pub config: McmcConfig,
    pub samples: Vec<PosteriorSample>,
    pub means_accept_rate: f64,
    pub precision_accept_rate: f64,
}

/// Runs one chain: scan -> precisions -> states (HMM only) -> means, fully
/// deterministic given the config seed.
pub fn run_chain(
    data: &AlignmentDataset,
    config: &McmcConfig,
    prior: &Prior,
) -> Result<ChainOutput, SamplerError> {
    config.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut state = init_chain(data, config, prior, &mut rng)?;
    let mut samples = Vec::with_capacity(config.retained_samples());
    let (mut tot_ma, mut tot_mt, mut tot_pa, mut tot_pt) = (0u64, 0u64, 0u64, 0u64);
    for iteration in 1..=config.iterations {
        let step = |e: SamplerError| SamplerError::AtIteration {
            iteration,
            source: Box::new(e),
        };
        aux_gibbs_scan(&mut state, data, config.alpha0, prior, &mut rng).map_err(step)?;
        let (pa, pt) = update_precisions(&mut state, data, prior, &mut rng).map_err(step)?;
        if let Prior::Hmm(hp) = prior {
            update_states(&mut state, data.classes(), hp, &mut rng).map_err(step)?;
        }
        let (ma, mt) = update_means(&mut state, data, prior, &mut rng).map_err(step)?;
        tot_ma += ma;
        tot_mt += mt;
        tot_pa += pa;
        tot_pt += pt;

        if iteration > config.burnin && (iteration - config.burnin) % config.thin == 0 {
            let sizes = state.cluster_sizes();
            samples.push(PosteriorSample {
                iteration,
                clusters: state
                    .clusters
                    .iter()
                    .map(|c| ClusterSnapshot {
                        members: c.members.clone(),
                        means: c.params.means.clone(),
                        precisions: c.params.precisions.clone(),
                        log_c: c.params.log_c.clone(),
                        states: c.params.states.clone(),
                    })
                    .collect(),
                assignment: state.assignment.clone(),
                cluster_count: state.clusters.len(),
                entropy: clustering_entropy(&sizes),
                means_accepted: ma,
                means_attempted: mt,
                precisions_accepted: pa,
                precisions_attempted: pt,
            });
        }
    }
    debug_assert!(state.check_partition(data.n_sequences()).is_ok());
    Ok(ChainOutput {
        chain_id: 0,
        config: config.clone(),
        samples,
        means_accept_rate: tot_ma as f64 / tot_mt.max(1) as f64,
        precision_accept_rate: tot_pa as f64 / tot_pt.max(1) as f64,
    })
}

/// Prior expectation of the cluster count under a DP(alpha0) over n items:
/// sum_{i=1}^n alpha0 / (alpha0 + i - 1).
pub fn expected_clusters_prior(alpha0: f64, n: usize) -> f64 {
    (1..=n).map(|i| alpha0 / (alpha0 + (i - 1) as f64)).sum()
}
