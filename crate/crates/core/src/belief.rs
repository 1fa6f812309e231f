//! Exact discrete Bayes filtering, expected information gain, greedy action
//! oracles, and a bootstrap particle filter.
//!
//! This is the model-based reference the learned agents are compared
//! against: given the true transition and observation matrices, beliefs
//! are filtered exactly and one-step action values (information gain or
//! expected prediction value) are computed by enumeration over
//! observations.

use crate::bounds::RewardVectorFamily;
use crate::simplex::{self, BeliefVector};
use crate::{CoreError, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A discrete hidden-Markov model of the target variable.
///
/// `transition[y_next, y_prev] = Pr(y_next | y_prev)` and
/// `observation(a)[z, y] = Pr(z | y, a)`; both are column-stochastic.
#[derive(Debug, Clone, Serialize)]
#[serde(into = "DiscreteModelData")]
pub struct DiscreteModel {
    n_targets: usize,
    n_actions: usize,
    n_obs: usize,
    transition: Vec<f64>,
    observations: Vec<Vec<f64>>,
}

/// Wire form: row-major transition, one row-major matrix per action.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct DiscreteModelData {
    n_targets: usize,
    n_actions: usize,
    n_obs: usize,
    transition: Vec<f64>,
    observations: Vec<Vec<f64>>,
}

impl From<DiscreteModel> for DiscreteModelData {
    fn from(m: DiscreteModel) -> Self {
        DiscreteModelData {
            n_targets: m.n_targets,
            n_actions: m.n_actions,
            n_obs: m.n_obs,
            transition: m.transition,
            observations: m.observations,
        }
    }
}

impl<'de> Deserialize<'de> for DiscreteModel {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let data = DiscreteModelData::deserialize(deserializer)?;
        DiscreteModel::new(
            data.n_targets,
            data.n_actions,
            data.n_obs,
            data.transition,
            data.observations,
        )
        .map_err(serde::de::Error::custom)
    }
}

const STOCHASTIC_TOLERANCE: f64 = 1e-9;

impl DiscreteModel {
    pub fn new(
        n_targets: usize,
        n_actions: usize,
        n_obs: usize,
        transition: Vec<f64>,
        observations: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if n_targets == 0 || n_actions == 0 || n_obs == 0 {
            return Err(CoreError::InvalidModel("all dimensions must be positive".into()));
        }
        if transition.len() != n_targets * n_targets {
            return Err(CoreError::InvalidModel(format!(
                "transition must be {n_targets}x{n_targets}"
            )));
        }
        if observations.len() != n_actions {
            return Err(CoreError::InvalidModel(format!(
                "need one observation matrix per action ({n_actions})"
            )));
        }
        let model = DiscreteModel { n_targets, n_actions, n_obs, transition, observations };
        for y in 0..n_targets {
            let col: f64 = (0..n_targets).map(|yn| model.transition(yn, y)).sum();
            if (col - 1.0).abs() > STOCHASTIC_TOLERANCE {
                return Err(CoreError::InvalidModel(format!(
                    "transition column {y} sums to {col}"
                )));
            }
        }
        for (a, obs) in model.observations.iter().enumerate() {
            if obs.len() != n_obs * n_targets {
                return Err(CoreError::InvalidModel(format!(
                    "observation matrix for action {a} must be {n_obs}x{n_targets}"
                )));
            }
            for y in 0..n_targets {
                let col: f64 = (0..n_obs).map(|z| obs[z * n_targets + y]).sum();
                if (col - 1.0).abs() > STOCHASTIC_TOLERANCE {
                    return Err(CoreError::InvalidModel(format!(
                        "observation column y={y} of action {a} sums to {col}"
                    )));
                }
            }
        }
        Ok(model)
    }

    /// A static model: identity transition.
    pub fn static_model(n_targets: usize, n_obs: usize, observations: Vec<Vec<f64>>) -> Result<Self> {
        let mut t = vec![0.0; n_targets * n_targets];
        for y in 0..n_targets {
            t[y * n_targets + y] = 1.0;
        }
        let n_actions = observations.len();
        Self::new(n_targets, n_actions, n_obs, t, observations)
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    #[inline]
    pub fn transition(&self, y_next: usize, y_prev: usize) -> f64 {
        self.transition[y_next * self.n_targets + y_prev]
    }

    #[inline]
    pub fn observation(&self, action: usize, z: usize, y: usize) -> f64 {
        self.observations[action][z * self.n_targets + y]
    }

    /// One prediction step: `(T b)_y' = Σ_y T[y', y] b_y`.
    pub fn predict(&self, b: &BeliefVector) -> Result<Vec<f64>> {
        if b.len() != self.n_targets {
            return Err(CoreError::LengthMismatch { expected: self.n_targets, got: b.len() });
        }
        let mut out = vec![0.0; self.n_targets];
        for (y_prev, &p) in b.probs().iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (y_next, o) in out.iter_mut().enumerate() {
                *o += self.transition(y_next, y_prev) * p;
            }
        }
        Ok(out)
    }

    /// Sample the next hidden state from column `y` of the transition.
    pub fn sample_transition(&self, y: usize, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for y_next in 0..self.n_targets {
            acc += self.transition(y_next, y);
            if u < acc {
                return y_next;
            }
        }
        self.n_targets - 1
    }

    /// Sample an observation for action `a` given hidden state `y`.
    pub fn sample_observation(&self, action: usize, y: usize, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for z in 0..self.n_obs {
            acc += self.observation(action, z, y);
            if u < acc {
                return z;
            }
        }
        self.n_obs - 1
    }
}

/// Exact filter step: transition (prediction) first, then observation
/// correction, normalized.
pub fn bayes_update(
    b: &BeliefVector,
    action: usize,
    z: usize,
    model: &DiscreteModel,
) -> Result<BeliefVector> {
    let pred = model.predict(b)?;
    let mut post: Vec<f64> = (0..model.n_targets())
        .map(|y| model.observation(action, z, y) * pred[y])
        .collect();
    let total: f64 = post.iter().sum();
    if !(total > 0.0) {
        return Err(CoreError::ImpossibleObservation { action, obs: z });
    }
    for p in &mut post {
        *p /= total;
    }
    BeliefVector::new(post)
}

/// Expected one-step information gain of an action:
/// `H(T b) − Σ_z Pr(z | b, a) H(posterior_z)`.
///
/// The baseline is the predicted belief so the gain isolates the
/// observation's effect from transition diffusion; Jensen makes it
/// non-negative.
pub fn expected_info_gain(b: &BeliefVector, action: usize, model: &DiscreteModel) -> Result<f64> {
    let pred = model.predict(b)?;
    let prior_entropy = simplex::entropy_raw(&pred);
    let n = model.n_targets();
    let mut expected_posterior_entropy = 0.0;
    let mut post = vec![0.0; n];
    for z in 0..model.n_obs() {
        let mut pz = 0.0;
        for y in 0..n {
            post[y] = model.observation(action, z, y) * pred[y];
            pz += post[y];
        }
        if pz <= 0.0 {
            continue;
        }
        for p in &mut post {
            *p /= pz;
        }
        expected_posterior_entropy += pz * simplex::entropy_raw(&post);
    }
    Ok(prior_entropy - expected_posterior_entropy)
}

/// Expected prediction value of an action:
/// `Σ_z Pr(z | b, a) max_j ⟨posterior_z, r_j⟩` — the conjugate constant is
/// omitted since it does not affect the maximizing action.
pub fn expected_prediction_value(
    b: &BeliefVector,
    action: usize,
    model: &DiscreteModel,
    family: &RewardVectorFamily,
) -> Result<f64> {
    if family.n_y() != model.n_targets() {
        return Err(CoreError::LengthMismatch {
            expected: model.n_targets(),
            got: family.n_y(),
        });
    }
    let pred = model.predict(b)?;
    let n = model.n_targets();
    let mut value = 0.0;
    let mut post = vec![0.0; n];
    for z in 0..model.n_obs() {
        let mut pz = 0.0;
        for y in 0..n {
            post[y] = model.observation(action, z, y) * pred[y];
            pz += post[y];
        }
        if pz <= 0.0 {
            continue;
        }
        // max_j <post, r_j> computed on the unnormalized posterior, then
        // the 1/pz normalization cancels against the pz weight.
        let best = family
            .vectors()
            .iter()
            .map(|r| r.iter().zip(&post).map(|(ri, pi)| ri * pi).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        value += best;
    }
    Ok(value)
}

/// Greedy one-step criterion for [`greedy_action`].
pub enum GreedyCriterion<'a> {
    InfoGain,
    Prediction(&'a RewardVectorFamily),
}

/// The action maximizing the chosen one-step criterion; lowest index wins
/// ties.
pub fn greedy_action(
    b: &BeliefVector,
    model: &DiscreteModel,
    criterion: GreedyCriterion<'_>,
) -> Result<usize> {
    let mut best_action = 0;
    let mut best_value = f64::NEG_INFINITY;
    for a in 0..model.n_actions() {
        let v = match &criterion {
            GreedyCriterion::InfoGain => expected_info_gain(b, a, model)?,
            GreedyCriterion::Prediction(family) => expected_prediction_value(b, a, model, family)?,
        };
        if v > best_value {
            best_value = v;
            best_action = a;
        }
    }
    Ok(best_action)
}

/// Maximum history length accepted by [`brute_force_posterior`].
pub const BRUTE_FORCE_MAX_HISTORY: usize = 8;
/// Maximum target count accepted by [`brute_force_posterior`].
pub const BRUTE_FORCE_MAX_TARGETS: usize = 64;
const BRUTE_FORCE_MAX_PATHS: f64 = 1e8;

/// Test oracle: the exact posterior after `history`, obtained by summing
/// the joint weight of every hidden trajectory `y_0..y_t` rather than by
/// iterating the filter.
pub fn brute_force_posterior(
    history: &[(usize, usize)],
    prior: &BeliefVector,
    model: &DiscreteModel,
) -> Result<BeliefVector> {
    let n = model.n_targets();
    let t = history.len();
    if t > BRUTE_FORCE_MAX_HISTORY || n > BRUTE_FORCE_MAX_TARGETS {
        return Err(CoreError::SizeGuard(format!(
            "history {t} (max {BRUTE_FORCE_MAX_HISTORY}), targets {n} (max {BRUTE_FORCE_MAX_TARGETS})"
        )));
    }
    if (n as f64).powi(t as i32 + 1) > BRUTE_FORCE_MAX_PATHS {
        return Err(CoreError::SizeGuard(format!("{n}^{} paths exceed cap", t + 1)));
    }
    if prior.len() != n {
        return Err(CoreError::LengthMismatch { expected: n, got: prior.len() });
    }
    if t == 0 {
        return Ok(prior.clone());
    }

    let mut marginal = vec![0.0f64; n];
    let mut path = vec![0usize; t + 1];
    loop {
        let mut w = prior.probs()[path[0]];
        for (k, &(a, z)) in history.iter().enumerate() {
            if w == 0.0 {
                break;
            }
            w *= model.transition(path[k + 1], path[k]);
            w *= model.observation(a, z, path[k + 1]);
        }
        marginal[path[t]] += w;

        // odometer over the path digits
        let mut pos = 0;
        loop {
            path[pos] += 1;
            if path[pos] < n {
                break;
            }
            path[pos] = 0;
            pos += 1;
            if pos > t {
                return BeliefVector::normalized(marginal);
            }
        }
    }
}

/// A weighted particle approximation to a belief over `0..n_targets`.
#[derive(Debug, Clone)]
pub struct ParticleSet {
    particles: Vec<usize>,
    weights: Vec<f64>,
}

impl ParticleSet {
    pub fn new(particles: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if particles.is_empty() || particles.len() != weights.len() {
            return Err(CoreError::InvalidConfig("particles and weights must be non-empty and equal length".into()));
        }
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || weights.iter().any(|&w| w < 0.0) {
            return Err(CoreError::DegenerateParticles);
        }
        let weights = weights.into_iter().map(|w| w / sum).collect();
        Ok(ParticleSet { particles, weights })
    }

    /// `n` particles drawn i.i.d. from the prior, uniform weights.
    pub fn from_prior(prior: &BeliefVector, n: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if n == 0 {
            return Err(CoreError::EmptyInput("particle count"));
        }
        let particles = (0..n)
            .map(|_| {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (y, &p) in prior.probs().iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return y;
                    }
                }
                prior.len() - 1
            })
            .collect();
        Ok(ParticleSet { particles, weights: vec![1.0 / n as f64; n] })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[usize] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Empirical belief: weighted histogram over target values.
    pub fn to_belief(&self, n_targets: usize) -> Result<BeliefVector> {
        let mut hist = vec![0.0; n_targets];
        for (&p, &w) in self.particles.iter().zip(&self.weights) {
            hist[p] += w;
        }
        BeliefVector::normalized(hist)
    }
}

/// One bootstrap step: propagate every particle through the transition,
/// weight by the observation likelihood, then systematic-resample back to
/// uniform weights.
pub fn particle_filter_step(
    p: &ParticleSet,
    action: usize,
    z: usize,
    model: &DiscreteModel,
    rng: &mut ChaCha8Rng,
) -> Result<ParticleSet> {
    let n = p.len();
    let mut propagated = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut total = 0.0;
    for (&particle, &w_prev) in p.particles.iter().zip(&p.weights) {
        let next = model.sample_transition(particle, rng);
        let w = w_prev * model.observation(action, z, next);
        propagated.push(next);
        weights.push(w);
        total += w;
    }
    if !(total > 0.0) {
        return Err(CoreError::DegenerateParticles);
    }

    // systematic resampling
    let step = total / n as f64;
    let start: f64 = rng.gen_range(0.0..step);
    let mut resampled = Vec::with_capacity(n);
    let mut acc = weights[0];
    let mut idx = 0;
    for i in 0..n {
        let target = start + i as f64 * step;
        while acc < target && idx + 1 < n {
            idx += 1;
            acc += weights[idx];
        }
        resampled.push(propagated[idx]);
    }
    Ok(ParticleSet { particles: resampled, weights: vec![1.0 / n as f64; n] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::simplex::tv_distance;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Static 2-state model with one informative action:
    /// Pr(z=0 | y) = (0.9, 0.2).
    fn two_state() -> DiscreteModel {
        DiscreteModel::static_model(2, 2, vec![vec![0.9, 0.2, 0.1, 0.8]]).unwrap()
    }

    #[test]
    fn model_validation_catches_bad_columns() {
        let bad = DiscreteModel::new(2, 1, 2, vec![0.5, 0.4, 0.4, 0.6], vec![vec![1.0, 0.0, 0.0, 1.0]]);
        assert!(bad.is_err());
        let bad_obs = DiscreteModel::static_model(2, 2, vec![vec![0.9, 0.2, 0.2, 0.8]]);
        assert!(bad_obs.is_err());
    }

    #[test]
    fn bayes_static_hand_value() {
        let m = two_state();
        let b = BeliefVector::uniform(2).unwrap();
        let post = bayes_update(&b, 0, 0, &m).unwrap();
        assert!(close(post.probs()[0], 9.0 / 11.0, 1e-12));
        assert!(close(post.probs()[1], 2.0 / 11.0, 1e-12));
    }

    #[test]
    fn bayes_uninformative_rows_reduce_to_prediction() {
        let m = DiscreteModel::new(
            2,
            1,
            2,
            vec![0.7, 0.4, 0.3, 0.6],
            vec![vec![0.5, 0.5, 0.5, 0.5]],
        )
        .unwrap();
        let b = BeliefVector::new(vec![0.9, 0.1]).unwrap();
        let post = bayes_update(&b, 0, 0, &m).unwrap();
        let pred = m.predict(&b).unwrap();
        assert!(close(post.probs()[0], pred[0], 1e-12));
        assert!(close(post.probs()[1], pred[1], 1e-12));
    }

    #[test]
    fn certainty_is_absorbing_under_identity_transition() {
        let m = two_state();
        let b = BeliefVector::vertex(2, 0).unwrap();
        let post = bayes_update(&b, 0, 0, &m).unwrap();
        assert_eq!(post.probs(), &[1.0, 0.0]);
    }

    #[test]
    fn impossible_observation_errors() {
        let m = DiscreteModel::static_model(2, 2, vec![vec![1.0, 1.0, 0.0, 0.0]]).unwrap();
        let b = BeliefVector::uniform(2).unwrap();
        assert!(matches!(
            bayes_update(&b, 0, 1, &m),
            Err(CoreError::ImpossibleObservation { .. })
        ));
    }

    #[test]
    fn info_gain_hand_value() {
        let m = two_state();
        let b = BeliefVector::uniform(2).unwrap();
        assert!(close(
            expected_info_gain(&b, 0, &m).unwrap(),
            0.275396115248770,
            1e-12
        ));
    }

    #[test]
    fn info_gain_uninformative_is_zero_and_revealing_is_max() {
        let uninf = DiscreteModel::static_model(2, 2, vec![vec![0.5, 0.5, 0.5, 0.5]]).unwrap();
        let b = BeliefVector::uniform(2).unwrap();
        assert!(expected_info_gain(&b, 0, &uninf).unwrap().abs() < 1e-12);

        let revealing = DiscreteModel::static_model(2, 2, vec![vec![1.0, 0.0, 0.0, 1.0]]).unwrap();
        assert!(close(
            expected_info_gain(&b, 0, &revealing).unwrap(),
            std::f64::consts::LN_2,
            1e-12
        ));
    }

    #[test]
    fn prediction_value_hand_value() {
        use crate::bounds::{reward_vectors_01, PredictionRewardSpec};
        let m = two_state();
        let b = BeliefVector::uniform(2).unwrap();
        let fam = reward_vectors_01(&PredictionRewardSpec::new(1.0, 0.0, 2).unwrap());
        assert!(close(
            expected_prediction_value(&b, 0, &m, &fam).unwrap(),
            0.85,
            1e-12
        ));

        let uninf = DiscreteModel::static_model(2, 2, vec![vec![0.5, 0.5, 0.5, 0.5]]).unwrap();
        assert!(close(
            expected_prediction_value(&b, 0, &uninf, &fam).unwrap(),
            0.5,
            1e-12
        ));

        let revealing = DiscreteModel::static_model(2, 2, vec![vec![1.0, 0.0, 0.0, 1.0]]).unwrap();
        assert!(close(
            expected_prediction_value(&b, 0, &revealing, &fam).unwrap(),
            1.0,
            1e-12
        ));
    }

    #[test]
    fn greedy_prefers_informative_action() {
        use crate::bounds::{reward_vectors_01, PredictionRewardSpec};
        // action 0: Pr(z=0|y) = (0.9, 0.2); action 1: (0.6, 0.4)
        let m = DiscreteModel::static_model(
            2,
            2,
            vec![vec![0.9, 0.2, 0.1, 0.8], vec![0.6, 0.4, 0.4, 0.6]],
        )
        .unwrap();
        let b = BeliefVector::uniform(2).unwrap();
        assert_eq!(greedy_action(&b, &m, GreedyCriterion::InfoGain).unwrap(), 0);
        let fam = reward_vectors_01(&PredictionRewardSpec::new(1.0, 0.0, 2).unwrap());
        assert_eq!(
            greedy_action(&b, &m, GreedyCriterion::Prediction(&fam)).unwrap(),
            0
        );

        let single = two_state();
        assert_eq!(greedy_action(&b, &single, GreedyCriterion::InfoGain).unwrap(), 0);
    }

    fn random_model(n: usize, n_actions: usize, n_obs: usize, rng: &mut ChaCha8Rng) -> DiscreteModel {
        let col = |rng: &mut ChaCha8Rng, len: usize| -> Vec<f64> {
            let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / s).collect()
        };
        let mut t = vec![0.0; n * n];
        for y in 0..n {
            for (yn, v) in col(rng, n).into_iter().enumerate() {
                t[yn * n + y] = v;
            }
        }
        let obs = (0..n_actions)
            .map(|_| {
                let mut o = vec![0.0; n_obs * n];
                for y in 0..n {
                    for (z, v) in col(rng, n_obs).into_iter().enumerate() {
                        o[z * n + y] = v;
                    }
                }
                o
            })
            .collect();
        DiscreteModel::new(n, n_actions, n_obs, t, obs).unwrap()
    }

    #[test]
    fn brute_force_edge_cases() {
        let m = two_state();
        let prior = BeliefVector::new(vec![0.3, 0.7]).unwrap();
        // empty history returns the prior
        let p = brute_force_posterior(&[], &prior, &m).unwrap();
        assert_eq!(p.probs(), prior.probs());
        // length-1 history equals a single filter step
        let p = brute_force_posterior(&[(0, 0)], &prior, &m).unwrap();
        let q = bayes_update(&prior, 0, 0, &m).unwrap();
        assert!(tv_distance(&p, &q).unwrap() < 1e-12);
    }

    #[test]
    fn brute_force_matches_iterated_filter() {
        let mut r = rng::stream(11, "bf");
        for trial in 0..20 {
            let n = 2 + (trial % 3); // 2..4 states
            let m = random_model(n, 2, 3, &mut r);
            let mut b = BeliefVector::uniform(n).unwrap();
            let mut history = vec![];
            for _ in 0..5 {
                let a = r.gen_range(0..2);
                let z = r.gen_range(0..3);
                history.push((a, z));
                b = bayes_update(&b, a, z, &m).unwrap();
            }
            let oracle =
                brute_force_posterior(&history, &BeliefVector::uniform(n).unwrap(), &m).unwrap();
            assert!(tv_distance(&b, &oracle).unwrap() < 1e-9);
        }
    }

    #[test]
    fn brute_force_guard() {
        let m = two_state();
        let prior = BeliefVector::uniform(2).unwrap();
        let long: Vec<(usize, usize)> = vec![(0, 0); 9];
        assert!(matches!(
            brute_force_posterior(&long, &prior, &m),
            Err(CoreError::SizeGuard(_))
        ));
    }

    #[test]
    fn particle_filter_tracks_exact_posterior() {
        let m = two_state();
        let prior = BeliefVector::uniform(2).unwrap();
        let mut mean_tv = 0.0;
        let seeds = 100;
        for seed in 0..seeds {
            let mut r = rng::stream_indexed(5, "pf", seed);
            let mut ps = ParticleSet::from_prior(&prior, 1500, &mut r).unwrap();
            let mut exact = prior.clone();
            for _ in 0..5 {
                let z = m.sample_observation(0, 0, &mut r);
                ps = particle_filter_step(&ps, 0, z, &m, &mut r).unwrap();
                exact = bayes_update(&exact, 0, z, &m).unwrap();
            }
            mean_tv += tv_distance(&ps.to_belief(2).unwrap(), &exact).unwrap();
        }
        mean_tv /= seeds as f64;
        assert!(mean_tv < 0.05, "mean TV {mean_tv} too large at 1500 particles");
    }

    #[test]
    fn particle_filter_collapses_under_deterministic_observation() {
        let m = DiscreteModel::static_model(2, 2, vec![vec![1.0, 0.0, 0.0, 1.0]]).unwrap();
        let prior = BeliefVector::uniform(2).unwrap();
        let mut r = rng::stream(1, "pf-det");
        let mut ps = ParticleSet::from_prior(&prior, 64, &mut r).unwrap();
        ps = particle_filter_step(&ps, 0, 0, &m, &mut r).unwrap();
        assert!(ps.particles().iter().all(|&p| p == 0));
    }

    #[test]
    fn particle_filter_degeneracy_errors() {
        let m = DiscreteModel::static_model(2, 2, vec![vec![1.0, 1.0, 0.0, 0.0]]).unwrap();
        let mut r = rng::stream(2, "pf-deg");
        let ps = ParticleSet::new(vec![0, 1], vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            particle_filter_step(&ps, 0, 1, &m, &mut r),
            Err(CoreError::DegenerateParticles)
        ));
    }

    #[test]
    fn model_json_round_trip() {
        let m = two_state();
        let text = serde_json::to_string(&m).unwrap();
        let back: DiscreteModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back.n_targets(), 2);
        assert_eq!(back.observation(0, 0, 0), 0.9);
        // corrupted matrices are rejected on read
        let bad = text.replace("0.9", "0.95");
        assert!(serde_json::from_str::<DiscreteModel>(&bad).is_err());
    }
}
