//! Greedy evaluation of trained agents: generic per-environment scoring,
//! combined x/y tracking evaluation with multi-person transfer, and the
//! exact-filter oracle baseline.

use super::envs::DanEnv;
use super::{encode_step, DanAgent};
use crate::belief::{bayes_update, expected_info_gain, DiscreteModel};
use crate::nn::forward_step;
use crate::rng;
use crate::simplex::{argmax, BeliefVector};
use crate::tracking::{
    axis_obs_symbol, factored_model, Axis, CameraLayout, GridConfig, MultiEpisode, Track,
};
use crate::{CoreError, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Greedy-policy evaluation statistics, averaged over episodes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EvalStats {
    pub episodes: usize,
    /// Mean per-episode sum of correct per-step predictions.
    pub continuous_reward: f64,
    /// Mean final-step prediction correctness.
    pub terminal_reward: f64,
    /// Mean per-step prediction accuracy (continuous reward / length).
    pub accuracy: f64,
    /// Mean per-episode count of non-null observations.
    pub coverage_reward: f64,
}

/// Evaluate the agent's greedy policy with its online M network.
pub fn evaluate<E: DanEnv>(
    agent: &DanAgent,
    env: &mut E,
    episodes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<EvalStats> {
    if episodes == 0 {
        return Err(CoreError::EmptyInput("evaluation episodes"));
    }
    let n_actions = env.n_actions();
    let episode_len = env.episode_len();
    let mut sum_correct = 0.0;
    let mut sum_final = 0.0;
    let mut sum_cover = 0.0;
    for _ in 0..episodes {
        env.reset(rng)?;
        let mut x = vec![0.0; n_actions + env.obs_len()];
        let mut q_state: Option<Vec<f64>> = None;
        let mut m_state: Option<Vec<f64>> = None;
        for t in 0..episode_len {
            let (q_out, q_next) = forward_step(&agent.q, &agent.q_spec, &x, q_state.as_deref())?;
            q_state = q_next;
            let action = argmax(&q_out);
            let step = env.step(action)?;
            x = encode_step(action, n_actions, &step.obs_encoding);
            let (m_out, m_next) = forward_step(&agent.m, &agent.m_spec, &x, m_state.as_deref())?;
            m_state = m_next;
            let correct = argmax(&m_out) == step.label;
            if correct {
                sum_correct += 1.0;
                if t == episode_len - 1 {
                    sum_final += 1.0;
                }
            }
            if step.non_null {
                sum_cover += 1.0;
            }
        }
    }
    let n = episodes as f64;
    Ok(EvalStats {
        episodes,
        continuous_reward: sum_correct / n,
        terminal_reward: sum_final / n,
        accuracy: sum_correct / (n * episode_len as f64),
        coverage_reward: sum_cover / n,
    })
}

/// How the combined tracking evaluation turns observations into per-person
/// predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackingPredictor {
    /// Each axis agent's M network predicts its coordinate.
    MNetworks,
    /// The raw readings stand in as predictions (coverage baseline:
    /// a null observation can never be correct).
    Observations,
}

/// How the shared camera is chosen at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CameraPolicy {
    /// Argmax of the mean Q-value across axis agents and persons.
    MeanQ,
    /// Uniformly random camera (random-policy baseline).
    Random,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrackingEvalResult {
    pub mean_episode_reward: f64,
    /// Mean episode reward of each person slot (averaged over episodes).
    pub per_person: Vec<f64>,
    pub episodes: usize,
}

/// Combined x/y evaluation with optional multi-person transfer: one shared
/// camera per step (mean Q across axis agents and persons), per-person
/// coordinate predictions, and a per-step reward of 1 only when both
/// coordinates are right, averaged over persons and summed over steps.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_tracking(
    x_agent: &DanAgent,
    y_agent: &DanAgent,
    config: &GridConfig,
    layout: &CameraLayout,
    tracks: &[Track],
    episodes: usize,
    persons: usize,
    predictor: TrackingPredictor,
    camera_policy: CameraPolicy,
    seed: u64,
) -> Result<TrackingEvalResult> {
    if tracks.is_empty() {
        return Err(CoreError::EmptyInput("evaluation tracks"));
    }
    if persons == 0 || persons > tracks.len() {
        return Err(CoreError::InvalidConfig(format!(
            "persons {persons} outside 1..={}",
            tracks.len()
        )));
    }
    let n_cameras = layout.cameras.len();
    let mut pick_rng = rng::stream(seed, "tracking-eval-pick");
    let mut cam_rng = rng::stream(seed, "tracking-eval-cam");
    let mut per_person = vec![0.0; persons];
    let mut total = 0.0;

    struct AxisStream {
        x: Vec<f64>,
        q_state: Option<Vec<f64>>,
        m_state: Option<Vec<f64>>,
    }

    for ep_i in 0..episodes {
        // sample distinct tracks for the persons
        let mut chosen: Vec<usize> = vec![];
        while chosen.len() < persons {
            let c = pick_rng.gen_range(0..tracks.len());
            if !chosen.contains(&c) {
                chosen.push(c);
            }
        }
        let episode_tracks: Vec<Track> = chosen.iter().map(|&i| tracks[i].clone()).collect();
        let mut env = MultiEpisode::new(
            config,
            layout,
            &episode_tracks,
            rng::derive_seed_indexed(seed, "tracking-eval-noise", ep_i as u64),
        )?;

        let mut streams: Vec<[AxisStream; 2]> = (0..persons)
            .map(|_| {
                [
                    AxisStream {
                        x: vec![0.0; n_cameras + config.width + 1],
                        q_state: None,
                        m_state: None,
                    },
                    AxisStream {
                        x: vec![0.0; n_cameras + config.height + 1],
                        q_state: None,
                        m_state: None,
                    },
                ]
            })
            .collect();

        for _ in 0..config.episode_len {
            // camera choice: mean Q over persons and axes
            let camera = match camera_policy {
                CameraPolicy::Random => cam_rng.gen_range(0..n_cameras),
                CameraPolicy::MeanQ => {
                    let mut mean_q = vec![0.0; n_cameras];
                    for person in streams.iter_mut() {
                        for (axis_i, agent) in [(0, x_agent), (1, y_agent)] {
                            let stream = &mut person[axis_i];
                            let (q_out, q_next) = forward_step(
                                &agent.q,
                                &agent.q_spec,
                                &stream.x,
                                stream.q_state.as_deref(),
                            )?;
                            stream.q_state = q_next;
                            for (m, v) in mean_q.iter_mut().zip(&q_out) {
                                *m += v;
                            }
                        }
                    }
                    argmax(&mean_q)
                }
            };

            let results = env.step(camera)?;
            let mut step_reward = 0.0;
            for (k, (obs, truth)) in results.iter().enumerate() {
                // advance each axis stream's encoded input; predict with M
                // when asked to
                let mut preds = [0usize; 2];
                for (axis_i, (agent, axis)) in
                    [(x_agent, Axis::X), (y_agent, Axis::Y)].iter().enumerate()
                {
                    let extent = axis.extent(config);
                    let symbol = axis_obs_symbol(obs, *axis, extent);
                    let mut enc = vec![0.0; extent + 1];
                    enc[symbol] = 1.0;
                    let stream = &mut streams[k][axis_i];
                    stream.x = encode_step(camera, n_cameras, &enc);
                    if predictor == TrackingPredictor::MNetworks {
                        let (m_out, m_next) = forward_step(
                            &agent.m,
                            &agent.m_spec,
                            &stream.x,
                            stream.m_state.as_deref(),
                        )?;
                        stream.m_state = m_next;
                        preds[axis_i] = argmax(&m_out);
                    }
                }
                let correct = match predictor {
                    TrackingPredictor::Observations => {
                        obs.reading_x == Some(truth.0) && obs.reading_y == Some(truth.1)
                    }
                    TrackingPredictor::MNetworks => preds[0] == truth.0 && preds[1] == truth.1,
                };
                if correct {
                    step_reward += 1.0;
                    per_person[k] += 1.0;
                }
            }
            total += step_reward / persons as f64;
        }
    }

    for p in &mut per_person {
        *p /= episodes as f64;
    }
    Ok(TrackingEvalResult {
        mean_episode_reward: total / episodes as f64,
        per_person,
        episodes,
    })
}


/// Model-based baseline: exact per-axis Bayes filters on the factored
/// models, one-step greedy information gain (summed over axes) for camera
/// selection, belief argmax per axis as the prediction. No learning.
pub fn run_exact_oracle(
    config: &GridConfig,
    layout: &CameraLayout,
    tracks: &[Track],
    episodes: usize,
    seed: u64,
) -> Result<f64> {
    if tracks.is_empty() {
        return Err(CoreError::EmptyInput("tracks"));
    }
    let model_x = factored_model(config, layout, Axis::X)?;
    let model_y = factored_model(config, layout, Axis::Y)?;
    let mut pick_rng = rng::stream(seed, "oracle-pick");
    let mut total = 0.0;
    for ep_i in 0..episodes {
        let track = &tracks[pick_rng.gen_range(0..tracks.len())];
        let mut env = crate::tracking::Episode::new(
            config,
            layout,
            track,
            rng::derive_seed_indexed(seed, "oracle-noise", ep_i as u64),
        )?;
        let mut bx = BeliefVector::uniform(config.width)?;
        let mut by = BeliefVector::uniform(config.height)?;
        for _ in 0..config.episode_len {
            let camera = greedy_joint_info_gain(&bx, &by, &model_x, &model_y)?;
            let (obs, truth) = env.step(camera)?;
            let zx = axis_obs_symbol(&obs, Axis::X, config.width);
            let zy = axis_obs_symbol(&obs, Axis::Y, config.height);
            bx = bayes_update(&bx, camera, zx, &model_x)?;
            by = bayes_update(&by, camera, zy, &model_y)?;
            if bx.argmax() == truth.0 && by.argmax() == truth.1 {
                total += 1.0;
            }
        }
    }
    Ok(total / episodes as f64)
}

/// One-step greedy camera over the summed per-axis information gains.
fn greedy_joint_info_gain(
    bx: &BeliefVector,
    by: &BeliefVector,
    model_x: &DiscreteModel,
    model_y: &DiscreteModel,
) -> Result<usize> {
    let mut best = 0;
    let mut best_gain = f64::NEG_INFINITY;
    for a in 0..model_x.n_actions() {
        let gain = expected_info_gain(bx, a, model_x)? + expected_info_gain(by, a, model_y)?;
        if gain > best_gain {
            best_gain = gain;
            best = a;
        }
    }
    Ok(best)
}
