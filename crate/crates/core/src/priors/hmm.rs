//! Secondary-structure hidden Markov model used as the centering
//! distribution for the mean parameters: a four-state chain over the DSSP
//! metatypes helix (H), strand (E), turn (T), coil (C), with sine-mixture
//! emissions per state, plus forward-backward state sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::priors::PriorError;
use crate::torus::{log_sum_exp, AnglePair, SineModel, SineModelParams};

pub const N_STATES: usize = 4;

/// DSSP metatypes, in the fixed order H, E, T, C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SsState {
    Helix,
    Strand,
    Turn,
    Coil,
}

impl SsState {
    pub const ALL: [SsState; N_STATES] = [SsState::Helix, SsState::Strand, SsState::Turn, SsState::Coil];

    pub fn index(self) -> usize {
        match self {
            SsState::Helix => 0,
            SsState::Strand => 1,
            SsState::Turn => 2,
            SsState::Coil => 3,
        }
    }

    pub fn from_index(i: usize) -> SsState {
        Self::ALL[i]
    }

    pub fn from_char(c: char) -> Result<SsState, PriorError> {
        match c.to_ascii_uppercase() {
            'H' => Ok(SsState::Helix),
            'E' => Ok(SsState::Strand),
            'T' => Ok(SsState::Turn),
            'C' => Ok(SsState::Coil),
            other => Err(PriorError::UnknownState(other)),
        }
    }

    pub fn to_char(self) -> char {
        match self {
            SsState::Helix => 'H',
            SsState::Strand => 'E',
            SsState::Turn => 'T',
            SsState::Coil => 'C',
        }
    }
}

/// Residue classes carrying distinct emission tables. Proline and glycine
/// have their own secondary-structure distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResidueClass {
    General,
    Gly,
    Pro,
}

/// Stationary distribution of a row-stochastic matrix by power iteration to
/// 1e-12. Chains that fail to converge within 10,000 iterations (reducible
/// or periodic) are reported.
pub fn stationary_distribution(m: &[[f64; 4]; 4]) -> Result<[f64; 4], PriorError> {
    validate_transition(m)?;
    let mut pi = [0.25_f64; 4];
    for _ in 0..10_000 {
        let mut next = [0.0_f64; 4];
        for (s, row) in m.iter().enumerate() {
            for (t, p) in row.iter().enumerate() {
                next[t] += pi[s] * p;
            }
        }
        let total: f64 = next.iter().sum();
        for v in &mut next {
            *v /= total;
        }
        let delta = pi
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        pi = next;
        if delta < 1e-12 {
            // Confirm the fixed point.
            let mut check = [0.0_f64; 4];
            for (s, row) in m.iter().enumerate() {
                for (t, p) in row.iter().enumerate() {
                    check[t] += pi[s] * p;
                }
            }
            let err = pi
                .iter()
                .zip(&check)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if err < 1e-10 {
                return Ok(pi);
            }
        }
    }
    Err(PriorError::StationaryDidNotConverge)
}

fn validate_transition(m: &[[f64; 4]; 4]) -> Result<(), PriorError> {
    for (i, row) in m.iter().enumerate() {
        let mut sum = 0.0;
        for &p in row {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(PriorError::InvalidTransitionRow(i));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(PriorError::InvalidTransitionRow(i));
        }
    }
    Ok(())
}

/// Row-normalized transition counts plus a pseudocount per cell. Rows with
/// no mass (no observed transitions and pseudocount 0) fall back to uniform.
pub fn estimate_transition_matrix<S: AsRef<str>>(
    sequences: &[S],
    pseudocount: f64,
) -> Result<[[f64; 4]; 4], PriorError> {
    if sequences.is_empty() {
        return Err(PriorError::EmptyStateCorpus);
    }
    let mut counts = [[pseudocount; 4]; 4];
    for seq in sequences {
        let states: Vec<SsState> = seq
            .as_ref()
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(SsState::from_char)
            .collect::<Result<_, _>>()?;
        for w in states.windows(2) {
            counts[w[0].index()][w[1].index()] += 1.0;
        }
    }
    let mut m = [[0.0_f64; 4]; 4];
    for (i, row) in counts.iter().enumerate() {
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            for (j, c) in row.iter().enumerate() {
                m[i][j] = c / total;
            }
        } else {
            m[i] = [0.25; 4];
        }
    }
    Ok(m)
}

/// A validated four-state Markov chain with its stationary initial law and
/// cached logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateChain {
    transition: [[f64; 4]; 4],
    initial: [f64; 4],
    log_transition: [[f64; 4]; 4],
    log_initial: [f64; 4],
}

impl StateChain {
    /// Builds the chain; the initial vector is the stationary distribution.
    pub fn new(transition: [[f64; 4]; 4]) -> Result<Self, PriorError> {
        let initial = stationary_distribution(&transition)?;
        let log_transition = transition.map(|row| row.map(f64::ln));
        let log_initial = initial.map(f64::ln);
        Ok(Self {
            transition,
            initial,
            log_transition,
            log_initial,
        })
    }

    pub fn transition(&self) -> &[[f64; 4]; 4] {
        &self.transition
    }

    pub fn initial(&self) -> &[f64; 4] {
        &self.initial
    }

    pub fn log_transition(&self) -> &[[f64; 4]; 4] {
        &self.log_transition
    }

    pub fn log_initial(&self) -> &[f64; 4] {
        &self.log_initial
    }

    /// k-step transition matrix M^k.
    pub fn n_step(&self, k: usize) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for _ in 0..k {
            let mut next = [[0.0; 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    for l in 0..4 {
                        next[i][j] += out[i][l] * self.transition[l][j];
                    }
                }
            }
            out = next;
        }
        out
    }

    /// Full path of length `len`: s_1 from the stationary law, then
    /// transitions.
    pub fn sample_path(&self, len: usize, rng: &mut impl Rng) -> Vec<SsState> {
        let mut path = Vec::with_capacity(len);
        if len == 0 {
            return path;
        }
        let mut s = sample_categorical(&self.initial, rng);
        path.push(SsState::from_index(s));
        for _ in 1..len {
            s = sample_categorical(&self.transition[s], rng);
            path.push(SsState::from_index(s));
        }
        path
    }

    /// States at the given (sorted, strictly increasing) positions only,
    /// jumping intermediate positions with multi-step transition rows so no
    /// randomness is consumed for skipped positions.
    pub fn sample_path_at(&self, positions: &[usize], rng: &mut impl Rng) -> Vec<SsState> {
        let mut out = Vec::with_capacity(positions.len());
        let mut prev: Option<(usize, usize)> = None;
        for &j in positions {
            let s = match prev {
                None => sample_categorical(&self.initial, rng),
                Some((pj, ps)) => {
                    let gap = j - pj;
                    if gap == 1 {
                        sample_categorical(&self.transition[ps], rng)
                    } else {
                        sample_categorical(&self.n_step(gap)[ps], rng)
                    }
                }
            };
            out.push(SsState::from_index(s));
            prev = Some((j, s));
        }
        out
    }
}

pub(crate) fn sample_categorical(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

pub(crate) fn sample_categorical_log(log_weights: &[f64], rng: &mut impl Rng) -> usize {
    let m = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_weights.iter().map(|&lw| (lw - m).exp()).collect();
    sample_categorical(&weights, rng)
}

/// Mixture of one to eight sine models with normalized weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SineMixture {
    components: Vec<(f64, SineModel)>,
    log_weights: Vec<f64>,
}

impl SineMixture {
    /// Weights must already sum to 1 within 1e-12 (loaders renormalize
    /// before constructing).
    pub fn new(components: Vec<(f64, SineModelParams)>) -> Result<Self, PriorError> {
        if components.is_empty() || components.len() > 8 {
            return Err(PriorError::BadMixtureSize(components.len()));
        }
        let sum: f64 = components.iter().map(|(w, _)| w).sum();
        if components.iter().any(|(w, _)| *w < 0.0) || (sum - 1.0).abs() > 1e-12 {
            return Err(PriorError::BadMixtureWeights(sum));
        }
        let compiled = components
            .into_iter()
            .map(|(w, p)| SineModel::new(p).map(|m| (w, m)))
            .collect::<Result<Vec<_>, _>>()?;
        let log_weights = compiled.iter().map(|(w, _)| w.ln()).collect();
        Ok(Self {
            components: compiled,
            log_weights,
        })
    }

    pub fn single(params: SineModelParams) -> Result<Self, PriorError> {
        Self::new(vec![(1.0, params)])
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> impl Iterator<Item = (f64, &SineModelParams)> {
        self.components.iter().map(|(w, m)| (*w, m.params()))
    }

    pub fn models(&self) -> impl Iterator<Item = (f64, &SineModel)> {
        self.components.iter().map(|(w, m)| (*w, m))
    }

    pub fn log_density(&self, x: AnglePair) -> f64 {
        let terms: Vec<f64> = self
            .components
            .iter()
            .zip(&self.log_weights)
            .map(|((_, m), lw)| lw + m.log_density(x))
            .collect();
        log_sum_exp(&terms)
    }

    pub fn sample(&self, rng: &mut impl Rng) -> AnglePair {
        let weights: Vec<f64> = self.components.iter().map(|(w, _)| *w).collect();
        let k = sample_categorical(&weights, rng);
        self.components[k].1.sample_one(rng)
    }
}

/// Emission tables indexed by state, order H, E, T, C.
pub type EmissionTable = [SineMixture; N_STATES];

/// The four-state secondary-structure HMM with a single emission table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondaryStructureHmm {
    chain: StateChain,
    emissions: EmissionTable,
}

impl SecondaryStructureHmm {
    pub fn new(transition: [[f64; 4]; 4], emissions: EmissionTable) -> Result<Self, PriorError> {
        Ok(Self {
            chain: StateChain::new(transition)?,
            emissions,
        })
    }

    pub fn chain(&self) -> &StateChain {
        &self.chain
    }

    pub fn emissions(&self) -> &EmissionTable {
        &self.emissions
    }

    pub fn emission(&self, state: SsState) -> &SineMixture {
        &self.emissions[state.index()]
    }
}

/// Per-residue-class emission tables sharing one transition matrix. GLY and
/// PRO tables are optional and fall back to GENERAL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResiduePriorSet {
    chain: StateChain,
    general: EmissionTable,
    gly: Option<EmissionTable>,
    pro: Option<EmissionTable>,
}

impl ResiduePriorSet {
    pub fn new(
        transition: [[f64; 4]; 4],
        general: EmissionTable,
        gly: Option<EmissionTable>,
        pro: Option<EmissionTable>,
    ) -> Result<Self, PriorError> {
        if gly.is_none() {
            log::warn!("no GLY emission table supplied; GLY positions fall back to GENERAL");
        }
        if pro.is_none() {
            log::warn!("no PRO emission table supplied; PRO positions fall back to GENERAL");
        }
        Ok(Self {
            chain: StateChain::new(transition)?,
            general,
            gly,
            pro,
        })
    }

    pub fn chain(&self) -> &StateChain {
        &self.chain
    }

    pub fn table_for(&self, class: ResidueClass) -> &EmissionTable {
        match class {
            ResidueClass::General => &self.general,
            ResidueClass::Gly => self.gly.as_ref().unwrap_or(&self.general),
            ResidueClass::Pro => self.pro.as_ref().unwrap_or(&self.general),
        }
    }

    pub fn general(&self) -> &EmissionTable {
        &self.general
    }

    pub fn emission(&self, class: ResidueClass, state: SsState) -> &SineMixture {
        &self.table_for(class)[state.index()]
    }
}

/// Joint log prior of a mean sequence and its state chain:
/// ln pi(s_1) + sum ln M(s_j | s_{j-1}) + sum ln f(mu_j, nu_j | s_j).
pub fn hmm_log_prior(
    means: &[AnglePair],
    states: &[SsState],
    hmm: &SecondaryStructureHmm,
) -> Result<f64, PriorError> {
    if means.len() != states.len() {
        return Err(PriorError::LengthMismatch {
            means: means.len(),
            states: states.len(),
        });
    }
    let chain = &hmm.chain;
    let mut total = 0.0;
    for (j, (&x, &s)) in means.iter().zip(states).enumerate() {
        if j == 0 {
            total += chain.log_initial[s.index()];
        } else {
            total += chain.log_transition[states[j - 1].index()][s.index()];
        }
        total += hmm.emission(s).log_density(x);
    }
    Ok(total)
}

/// Exact draw from the full conditional of the state chain given per-position
/// log emissions: forward filtering in log space, then backward sampling.
pub(crate) fn fb_sample_from_log_emissions(
    log_emit: &[[f64; 4]],
    chain: &StateChain,
    rng: &mut impl Rng,
) -> Result<Vec<SsState>, PriorError> {
    let m = log_emit.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut alpha = vec![[0.0_f64; 4]; m];
    for s in 0..4 {
        alpha[0][s] = chain.log_initial[s] + log_emit[0][s];
    }
    if log_sum_exp(&alpha[0]) == f64::NEG_INFINITY {
        return Err(PriorError::ZeroEmissionRow(0));
    }
    for j in 1..m {
        for s in 0..4 {
            let terms: Vec<f64> = (0..4)
                .map(|t| alpha[j - 1][t] + chain.log_transition[t][s])
                .collect();
            alpha[j][s] = log_emit[j][s] + log_sum_exp(&terms);
        }
        if log_sum_exp(&alpha[j]) == f64::NEG_INFINITY {
            return Err(PriorError::ZeroEmissionRow(j));
        }
    }
    let mut states = vec![SsState::Coil; m];
    let mut s = sample_categorical_log(&alpha[m - 1], rng);
    states[m - 1] = SsState::from_index(s);
    for j in (0..m - 1).rev() {
        let weights: Vec<f64> = (0..4)
            .map(|t| alpha[j][t] + chain.log_transition[t][s])
            .collect();
        s = sample_categorical_log(&weights, rng);
        states[j] = SsState::from_index(s);
    }
    Ok(states)
}

/// Draw the state chain from its full conditional given the means; given the
/// means, the states are independent of the observed data.
pub fn fb_sample_states(
    means: &[AnglePair],
    hmm: &SecondaryStructureHmm,
    rng: &mut impl Rng,
) -> Result<Vec<SsState>, PriorError> {
    let log_emit: Vec<[f64; 4]> = means
        .iter()
        .map(|&x| {
            [
                hmm.emissions[0].log_density(x),
                hmm.emissions[1].log_density(x),
                hmm.emissions[2].log_density(x),
                hmm.emissions[3].log_density(x),
            ]
        })
        .collect();
    fb_sample_from_log_emissions(&log_emit, &hmm.chain, rng)
}

/// Reference emission tables for the eighteen standard amino acids (the
/// general set; GLY and PRO tables are supplied via configuration). The coil
/// weights are printed as summing to 1.001 and are renormalized here.
pub fn builtin_general_emissions() -> EmissionTable {
    fn mixture(rows: &[(f64, f64, f64, f64, f64, f64)]) -> SineMixture {
        let total: f64 = rows.iter().map(|r| r.0).sum();
        let comps = rows
            .iter()
            .map(|&(p, mu, nu, k1, k2, l)| {
                (
                    p / total,
                    SineModelParams::new(mu, nu, k1, k2, l).expect("builtin component"),
                )
            })
            .collect();
        SineMixture::new(comps).expect("builtin mixture")
    }
    [
        // Helix
        mixture(&[(1.000, -1.0, -0.5, 21.33, 21.33, 10.67)]),
        // Strand
        mixture(&[(1.000, -2.0, 2.5, 5.33, 21.33, 5.33)]),
        // Turn
        mixture(&[
            (0.800, -1.2, -0.2, 8.33, 8.33, -4.17),
            (0.100, -1.0, 2.5, 21.33, 21.33, -10.67),
            (0.100, 1.0, 0.6, 33.33, 8.33, -8.33),
        ]),
        // Coil (weights printed as 0.625 + 0.208 + 0.125 + 0.043 = 1.001).
        mixture(&[
            (0.625, -2.0, 2.5, 4.00, 4.00, 0.00),
            (0.208, -1.0, 2.5, 21.33, 21.33, -10.67),
            (0.125, -2.0, 0.0, 6.25, 6.25, 0.00),
            (0.043, 1.0, 1.0, 12.21, 12.21, -3.66),
        ]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn demo_transition() -> [[f64; 4]; 4] {
        [
            [0.92, 0.01, 0.04, 0.03],
            [0.01, 0.90, 0.05, 0.04],
            [0.06, 0.05, 0.55, 0.34],
            [0.04, 0.06, 0.22, 0.68],
        ]
    }

    #[test]
    fn stationary_uniform_for_symmetric_chain() {
        let m = [[0.25; 4]; 4];
        let pi = stationary_distribution(&m).unwrap();
        for p in pi {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_uniform_for_doubly_stochastic() {
        let m = [
            [0.7, 0.1, 0.1, 0.1],
            [0.1, 0.7, 0.1, 0.1],
            [0.1, 0.1, 0.7, 0.1],
            [0.1, 0.1, 0.1, 0.7],
        ];
        let pi = stationary_distribution(&m).unwrap();
        for p in pi {
            assert!((p - 0.25).abs() < 1e-10);
        }
    }

    #[test]
    fn stationary_is_fixed_point_for_random_chain() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for _ in 0..20 {
            let mut m = [[0.0; 4]; 4];
            for row in &mut m {
                let mut total = 0.0;
                for v in row.iter_mut() {
                    *v = 0.05 + rng.gen::<f64>();
                    total += *v;
                }
                for v in row.iter_mut() {
                    *v /= total;
                }
            }
            let pi = stationary_distribution(&m).unwrap();
            for t in 0..4 {
                let mut got = 0.0;
                for s in 0..4 {
                    got += pi[s] * m[s][t];
                }
                assert!((got - pi[t]).abs() < 1e-10);
            }
            assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn periodic_chain_is_reported() {
        // Period-2 chain with unequal cyclic classes: power iteration from
        // the uniform start oscillates forever.
        let third = 1.0 / 3.0;
        let m = [
            [0.0, third, third, third],
            [1.0, 0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
        ];
        assert!(matches!(
            stationary_distribution(&m),
            Err(PriorError::StationaryDidNotConverge)
        ));
    }

    #[test]
    fn transition_estimate_single_sequence() {
        let m = estimate_transition_matrix(&["HHHH"], 0.0).unwrap();
        assert_eq!(m[0], [1.0, 0.0, 0.0, 0.0]);
        // Unobserved rows fall back to uniform when there is no pseudocount.
        assert_eq!(m[1], [0.25; 4]);
    }

    #[test]
    fn transition_estimate_pseudocounts_only() {
        let m = estimate_transition_matrix(&[""], 1.0).unwrap();
        for row in m {
            assert_eq!(row, [0.25; 4]);
        }
        assert!(estimate_transition_matrix::<&str>(&[], 1.0).is_err());
    }

    #[test]
    fn transition_estimate_recovers_simulated_chain() {
        let truth = demo_transition();
        let chain = StateChain::new(truth).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let seq: String = chain
            .sample_path(1_000_001, &mut rng)
            .iter()
            .map(|s| s.to_char())
            .collect();
        let m = estimate_transition_matrix(&[seq.as_str()], 0.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (m[i][j] - truth[i][j]).abs() < 0.01,
                    "entry ({i},{j}): {} vs {}",
                    m[i][j],
                    truth[i][j]
                );
            }
        }
    }

    #[test]
    fn transition_estimate_error_shrinks_like_root_n() {
        let truth = demo_transition();
        let chain = StateChain::new(truth).unwrap();
        let mut err = |n: usize, seed: u64| -> f64 {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let seq: String = chain
                .sample_path(n, &mut rng)
                .iter()
                .map(|s| s.to_char())
                .collect();
            let m = estimate_transition_matrix(&[seq.as_str()], 0.0).unwrap();
            let mut worst = 0.0_f64;
            for i in 0..4 {
                for j in 0..4 {
                    worst = worst.max((m[i][j] - truth[i][j]).abs());
                }
            }
            worst
        };
        let e4 = err(10_000, 7);
        let e6 = err(1_000_000, 8);
        assert!(
            e6 < e4 / 3.0,
            "expected roughly 10x shrink from 1e4 to 1e6 transitions: {e4} vs {e6}"
        );
    }

    fn demo_hmm() -> SecondaryStructureHmm {
        SecondaryStructureHmm::new(demo_transition(), builtin_general_emissions()).unwrap()
    }

    #[test]
    fn initial_law_is_stationary() {
        let hmm = demo_hmm();
        let pi = hmm.chain().initial();
        let m = hmm.chain().transition();
        for t in 0..4 {
            let mut got = 0.0;
            for s in 0..4 {
                got += pi[s] * m[s][t];
            }
            assert!((got - pi[t]).abs() < 1e-10);
        }
        for row in m {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn builtin_emissions_match_published_tables() {
        let tables = builtin_general_emissions();
        let helix: Vec<_> = tables[SsState::Helix.index()].components().collect();
        assert_eq!(helix.len(), 1);
        assert_eq!(helix[0].0, 1.0);
        assert_eq!(helix[0].1.kappa1, 21.33);
        assert_eq!(helix[0].1.lambda, 10.67);

        let turn: Vec<_> = tables[SsState::Turn.index()].components().collect();
        assert_eq!(turn.len(), 3);
        assert!((turn[0].0 - 0.8).abs() < 1e-12);
        assert!((turn[1].0 - 0.1).abs() < 1e-12);
        assert_eq!(turn[2].1.kappa1, 33.33);

        let coil: Vec<_> = tables[SsState::Coil.index()].components().collect();
        assert_eq!(coil.len(), 4);
        let total: f64 = coil.iter().map(|(w, _)| w).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Renormalized from the printed 0.625/1.001 etc.
        assert!((coil[0].0 - 0.625 / 1.001).abs() < 1e-12);
        assert_eq!(coil[3].1.lambda, -3.66);

        let strand: Vec<_> = tables[SsState::Strand.index()].components().collect();
        assert_eq!(strand[0].1.kappa1, 5.33);
        assert_eq!(strand[0].1.kappa2, 21.33);
    }

    #[test]
    fn hmm_log_prior_single_position_at_helix_mode() {
        let hmm = demo_hmm();
        let mode = AnglePair::new(-1.0, -0.5).unwrap();
        let got = hmm_log_prior(&[mode], &[SsState::Helix], &hmm).unwrap();
        let helix = &hmm.emissions()[SsState::Helix.index()];
        let want = hmm.chain().log_initial()[0] + helix.log_density(mode);
        assert!((got - want).abs() < 1e-12);
        // With a single component of weight 1 the emission term is the
        // component's own log density at its mode.
        let single = helix.models().next().unwrap().1;
        assert!((helix.log_density(mode) - single.log_density(mode)).abs() < 1e-12);
    }

    #[test]
    fn hmm_log_prior_is_additive_over_positions() {
        let hmm = demo_hmm();
        let mode = AnglePair::new(-1.0, -0.5).unwrap();
        let one = hmm_log_prior(&[mode], &[SsState::Helix], &hmm).unwrap();
        let two = hmm_log_prior(&[mode, mode], &[SsState::Helix, SsState::Helix], &hmm).unwrap();
        let want = one
            + hmm.chain().log_transition()[0][0]
            + hmm.emission(SsState::Helix).log_density(mode);
        assert!((two - want).abs() < 1e-12);
    }

    #[test]
    fn hmm_log_prior_matches_term_by_term_oracle() {
        let hmm = demo_hmm();
        let means = [
            AnglePair::new(-1.1, -0.4).unwrap(),
            AnglePair::new(-2.1, 2.4).unwrap(),
            AnglePair::new(1.0, 0.7).unwrap(),
        ];
        let states = [SsState::Helix, SsState::Strand, SsState::Turn];
        let got = hmm_log_prior(&means, &states, &hmm).unwrap();
        let chain = hmm.chain();
        let want = chain.log_initial()[0]
            + hmm.emission(SsState::Helix).log_density(means[0])
            + chain.log_transition()[0][1]
            + hmm.emission(SsState::Strand).log_density(means[1])
            + chain.log_transition()[1][2]
            + hmm.emission(SsState::Turn).log_density(means[2]);
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn fb_single_position_matches_direct_normalization() {
        let hmm = demo_hmm();
        let x = AnglePair::new(-1.0, -0.4).unwrap();
        let mut weights = [0.0_f64; 4];
        for s in 0..4 {
            weights[s] =
                hmm.chain().initial()[s] * hmm.emissions()[s].log_density(x).exp();
        }
        let total: f64 = weights.iter().sum();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let n = 200_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let s = fb_sample_states(&[x], &hmm, &mut rng).unwrap()[0];
            counts[s.index()] += 1;
        }
        for s in 0..4 {
            let p = weights[s] / total;
            let freq = counts[s] as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (freq - p).abs() < 4.0 * se + 1e-4,
                "state {s}: freq {freq}, want {p}"
            );
        }
    }

    #[test]
    fn fb_with_identical_emissions_is_the_bare_chain() {
        // All states share one emission table entry, so emissions cancel and
        // path frequencies follow the Markov chain alone.
        let shared = SineMixture::single(
            SineModelParams::new(0.0, 0.0, 1.0, 1.0, 0.0).unwrap(),
        )
        .unwrap();
        let hmm = SecondaryStructureHmm::new(
            demo_transition(),
            [shared.clone(), shared.clone(), shared.clone(), shared],
        )
        .unwrap();
        let means = [AnglePair::new(0.2, 0.3).unwrap(); 2];
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let n = 100_000;
        let mut first_counts = [0usize; 4];
        let mut pair_count = 0usize;
        for _ in 0..n {
            let s = fb_sample_states(&means, &hmm, &mut rng).unwrap();
            first_counts[s[0].index()] += 1;
            if s[0] == SsState::Helix && s[1] == SsState::Helix {
                pair_count += 1;
            }
        }
        let pi = hmm.chain().initial();
        for s in 0..4 {
            let freq = first_counts[s] as f64 / n as f64;
            assert!((freq - pi[s]).abs() < 0.01, "state {s}: {freq} vs {}", pi[s]);
        }
        let want_hh = pi[0] * hmm.chain().transition()[0][0];
        assert!((pair_count as f64 / n as f64 - want_hh).abs() < 0.01);
    }

    #[test]
    fn masked_path_sampling_matches_multistep_marginals() {
        let chain = StateChain::new(demo_transition()).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let n = 200_000;
        let mut joint = [[0usize; 4]; 4];
        for _ in 0..n {
            let s = chain.sample_path_at(&[0, 3], &mut rng);
            joint[s[0].index()][s[1].index()] += 1;
        }
        let m3 = chain.n_step(3);
        for a in 0..4 {
            for b in 0..4 {
                let want = chain.initial()[a] * m3[a][b];
                let got = joint[a][b] as f64 / n as f64;
                assert!((got - want).abs() < 0.01, "({a},{b}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn residue_set_falls_back_to_general() {
        let set = ResiduePriorSet::new(
            demo_transition(),
            builtin_general_emissions(),
            None,
            None,
        )
        .unwrap();
        let a = set.table_for(ResidueClass::Gly)[0].log_density(AnglePair::new(0.1, 0.2).unwrap());
        let b = set.general()[0].log_density(AnglePair::new(0.1, 0.2).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn mixture_weight_validation() {
        let p = SineModelParams::new(0.0, 0.0, 1.0, 1.0, 0.0).unwrap();
        assert!(SineMixture::new(vec![(0.5, p), (0.5001, p)]).is_err());
        assert!(SineMixture::new(vec![]).is_err());
    }
}
