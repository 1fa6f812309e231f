//! Deep anticipatory networks: a Q network selecting sensory actions and
//! an M network predicting the target, trained simultaneously. The Q
//! network's reward is the target M network's prediction correctness, so
//! maximizing expected return maximizes a tangent lower bound on the
//! negative entropy of the (implicit) belief.

mod baselines;
mod envs;
mod eval;
mod replay;
mod train;

pub use baselines::{
    run_baseline, run_tracking_variant, train_axis_agent, BaselineKind, ModelSizes, TrackingTask,
    TrackingVariant, VariantOutcome,
};
pub use envs::{AttentionDanEnv, DanEnv, EnvStep, SplitChoice, TrackingAxisEnv};
pub use eval::{
    evaluate, run_exact_oracle, CameraPolicy, EvalStats, TrackingEvalResult, TrackingPredictor,
    evaluate_tracking,
};
pub use replay::{EpisodeTrace, ReplayBuffer, SliceRef};
pub use train::{
    curve_to_csv, events_to_jsonl, m_update, q_update, train, CurvePoint, Event, TrainResult,
};

pub use crate::attention::RewardSchedule;
pub use crate::tracking::CoverageRewardMode as RewardMode;

use crate::nn::{
    self, forward, AdamState, ForwardMode, NetworkSpec, Parameters,
};
use crate::simplex::argmax;
use crate::tracking::reward_for;
use crate::{CoreError, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Paired online/target Q and M networks with their optimizer state.
#[derive(Debug, Clone)]
pub struct DanAgent {
    pub q_spec: NetworkSpec,
    pub m_spec: NetworkSpec,
    pub q: Parameters,
    pub m: Parameters,
    pub q_target: Parameters,
    pub m_target: Parameters,
    pub q_adam: AdamState,
    pub m_adam: AdamState,
    pub gamma: f64,
}

impl DanAgent {
    pub fn new(q_spec: NetworkSpec, m_spec: NetworkSpec, lr: f64, gamma: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(CoreError::InvalidConfig(format!("gamma {gamma} outside [0,1]")));
        }
        let q = nn::init_params(&q_spec, &mut crate::rng::stream(seed, "q-init"))?;
        let m = nn::init_params(&m_spec, &mut crate::rng::stream(seed, "m-init"))?;
        Ok(DanAgent {
            q_target: q.clone(),
            m_target: m.clone(),
            q_adam: AdamState::new(&q_spec, lr)?,
            m_adam: AdamState::new(&m_spec, lr)?,
            q_spec,
            m_spec,
            q,
            m,
            gamma,
        })
    }

    /// Hard copy online → target for both networks. Idempotent.
    pub fn sync_targets(&mut self) {
        self.q_target = self.q.clone();
        self.m_target = self.m.clone();
    }

    pub fn n_actions(&self) -> usize {
        self.q_spec.output_size()
    }

    pub fn n_classes(&self) -> usize {
        self.m_spec.output_size()
    }
}

/// Per-step network input: one-hot action followed by the observation
/// encoding. The step-0 input (empty history) is all zeros.
pub fn encode_step(action: usize, n_actions: usize, obs_encoding: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; n_actions + obs_encoding.len()];
    x[action] = 1.0;
    x[n_actions..].copy_from_slice(obs_encoding);
    x
}

/// ε-greedy action over the Q outputs for the given encoded history
/// (ties resolve to the lowest action index).
pub fn select_action(
    agent: &DanAgent,
    history: &[Vec<f64>],
    epsilon: f64,
    rng: &mut ChaCha8Rng,
) -> Result<usize> {
    let n_actions = agent.n_actions();
    if rng.gen_range(0.0..1.0) < epsilon {
        return Ok(rng.gen_range(0..n_actions));
    }
    let trace = forward(&agent.q, &agent.q_spec, history, ForwardMode::Eval)?;
    Ok(argmax(trace.output(history.len() - 1)))
}

/// Prediction reward from the target M network: compare its argmax over
/// the encoded history against the label, apply the reward mode's tiers,
/// then zero non-final steps under the terminal schedule.
///
/// Returns `(reward, m_target_prediction)`.
#[allow(clippy::too_many_arguments)]
pub fn prediction_reward(
    agent: &DanAgent,
    history: &[Vec<f64>],
    label: usize,
    mode: RewardMode,
    schedule: RewardSchedule,
    step_idx: usize,
    episode_len: usize,
    non_null: bool,
) -> Result<(f64, usize)> {
    let trace = forward(&agent.m_target, &agent.m_spec, history, ForwardMode::Eval)?;
    let pred = argmax(trace.output(history.len() - 1));
    let base = reward_for(non_null, pred == label, mode);
    let reward = match schedule {
        RewardSchedule::Continuous => base,
        RewardSchedule::Terminal => {
            if step_idx == episode_len - 1 {
                base
            } else {
                0.0
            }
        }
    };
    Ok((reward, pred))
}

/// Double-DQN target: the online network picks the next action, the
/// target network evaluates it.
pub fn double_dqn_target(
    reward: f64,
    gamma: f64,
    q_online_next: &[f64],
    q_target_next: &[f64],
    terminal: bool,
) -> f64 {
    if terminal {
        reward
    } else {
        reward + gamma * q_target_next[argmax(q_online_next)]
    }
}

/// All knobs of the training loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub episodes: usize,
    /// Environment steps collected before any update.
    pub warmup_steps: u64,
    pub epsilon_initial: f64,
    /// Episodes that use `epsilon_initial` before switching to
    /// `epsilon_final`.
    pub epsilon_initial_episodes: usize,
    pub epsilon_final: f64,
    pub lr: f64,
    pub minibatch_episodes: usize,
    pub trace_len: usize,
    /// Leading slice steps that build recurrent state but produce no loss.
    pub burn_in: usize,
    /// Environment steps between updates.
    pub update_period: u64,
    /// Environment steps between hard target syncs (applied at episode
    /// boundaries).
    pub target_sync_period: u64,
    /// Replay capacity in whole episodes.
    pub replay_capacity: usize,
    pub reward_mode: RewardMode,
    pub reward_schedule: RewardSchedule,
    /// Under the terminal schedule, train M only on terminal-step labels.
    pub m_terminal_only: bool,
    /// Recompute stored rewards from the current M target when replaying
    /// (ablation; default keeps the collection-time rewards).
    pub recompute_reward_on_replay: bool,
    pub train_q: bool,
    pub train_m: bool,
    pub l2_scale: f64,
    pub grad_clip: f64,
    pub gamma: f64,
    pub eval_period_episodes: usize,
    pub eval_episodes: usize,
    /// Keep the online parameters from the best evaluation point instead
    /// of the last episode's.
    pub select_best_eval: bool,
}

impl TrainConfig {
    /// Desk-scale camera-selection defaults (per-axis agent).
    pub fn tracking_desk() -> Self {
        TrainConfig {
            episodes: 3000,
            warmup_steps: 3000,
            epsilon_initial: 0.1,
            epsilon_initial_episodes: 0,
            epsilon_final: 0.1,
            lr: 1e-3,
            minibatch_episodes: 4,
            trace_len: 8,
            burn_in: 4,
            update_period: 4,
            target_sync_period: 500,
            replay_capacity: 400,
            reward_mode: RewardMode::Dan,
            reward_schedule: RewardSchedule::Continuous,
            m_terminal_only: false,
            recompute_reward_on_replay: false,
            train_q: true,
            train_m: true,
            l2_scale: 1e-4,
            grad_clip: 5.0,
            gamma: 0.99,
            eval_period_episodes: 250,
            eval_episodes: 100,
            select_best_eval: true,
        }
    }

    /// Desk-scale glimpse-attention defaults.
    pub fn attention_desk() -> Self {
        TrainConfig {
            episodes: 2400,
            warmup_steps: 600,
            epsilon_initial: 1.0,
            epsilon_initial_episodes: 300,
            epsilon_final: 0.05,
            lr: 5e-4,
            minibatch_episodes: 4,
            trace_len: 12,
            burn_in: 0,
            update_period: 4,
            target_sync_period: 500,
            replay_capacity: 300,
            reward_mode: RewardMode::Dan,
            reward_schedule: RewardSchedule::Continuous,
            m_terminal_only: false,
            recompute_reward_on_replay: false,
            train_q: true,
            train_m: true,
            l2_scale: 1e-4,
            grad_clip: 5.0,
            gamma: 0.99,
            eval_period_episodes: 150,
            eval_episodes: 100,
            select_best_eval: true,
        }
    }

    /// Switch to the terminal reward schedule (M trained on terminal
    /// labels only, matching the terminal-feedback setting).
    pub fn with_terminal_reward(mut self) -> Self {
        self.reward_schedule = RewardSchedule::Terminal;
        self.m_terminal_only = true;
        self
    }

    pub fn validate(&self, episode_len: usize) -> Result<()> {
        if self.episodes == 0 {
            return Err(CoreError::InvalidConfig("episodes must be >= 1".into()));
        }
        if self.trace_len > episode_len {
            return Err(CoreError::InvalidConfig(format!(
                "trace_len {} exceeds episode length {episode_len}",
                self.trace_len
            )));
        }
        if self.burn_in >= self.trace_len {
            return Err(CoreError::InvalidConfig(format!(
                "burn_in {} must be < trace_len {}",
                self.burn_in, self.trace_len
            )));
        }
        if self.minibatch_episodes == 0 || self.replay_capacity == 0 {
            return Err(CoreError::InvalidConfig("batch and replay capacity must be >= 1".into()));
        }
        for (name, e) in [
            ("epsilon_initial", self.epsilon_initial),
            ("epsilon_final", self.epsilon_final),
        ] {
            if !(0.0..=1.0).contains(&e) {
                return Err(CoreError::InvalidConfig(format!("{name}={e} outside [0,1]")));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(CoreError::InvalidConfig(format!("gamma {} outside [0,1]", self.gamma)));
        }
        if self.update_period == 0 || self.target_sync_period == 0 {
            return Err(CoreError::InvalidConfig("periods must be >= 1".into()));
        }
        if self.eval_period_episodes == 0 || self.eval_episodes == 0 {
            return Err(CoreError::InvalidConfig("eval cadence must be >= 1".into()));
        }
        if !(self.lr > 0.0) || !(self.grad_clip > 0.0) || self.l2_scale < 0.0 {
            return Err(CoreError::InvalidConfig("lr/grad_clip must be positive, l2 >= 0".into()));
        }
        Ok(())
    }
}

/// Write Q and M checkpoints for an agent under `dir` with a name prefix.
pub fn save_agent(agent: &DanAgent, dir: &std::path::Path, prefix: &str, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let q = nn::Checkpoint {
        version: nn::CHECKPOINT_VERSION,
        spec: agent.q_spec.clone(),
        params: agent.q.clone(),
        step_counter: agent.q_adam.step_count(),
        rng_seed: seed,
    };
    let m = nn::Checkpoint {
        version: nn::CHECKPOINT_VERSION,
        spec: agent.m_spec.clone(),
        params: agent.m.clone(),
        step_counter: agent.m_adam.step_count(),
        rng_seed: seed,
    };
    nn::save_checkpoint(&dir.join(format!("{prefix}-q.json")), &q)?;
    nn::save_checkpoint(&dir.join(format!("{prefix}-m.json")), &m)?;
    Ok(())
}

/// Load an agent previously written by [`save_agent`]; targets start as
/// copies of the online networks.
pub fn load_agent(dir: &std::path::Path, prefix: &str, lr: f64, gamma: f64) -> Result<DanAgent> {
    let q = nn::load_checkpoint(&dir.join(format!("{prefix}-q.json")))?;
    let m = nn::load_checkpoint(&dir.join(format!("{prefix}-m.json")))?;
    Ok(DanAgent {
        q_target: q.params.clone(),
        m_target: m.params.clone(),
        q_adam: AdamState::new(&q.spec, lr)?,
        m_adam: AdamState::new(&m.spec, lr)?,
        q_spec: q.spec,
        m_spec: m.spec,
        q: q.params,
        m: m.params,
        gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerSpec;

    fn tiny_agent() -> DanAgent {
        let q_spec = NetworkSpec::recurrent_net(5, &[6], 6, 3);
        let m_spec = NetworkSpec::recurrent_net(5, &[6], 6, 4);
        DanAgent::new(q_spec, m_spec, 1e-3, 0.99, 7).unwrap()
    }

    #[test]
    fn select_action_greedy_and_uniform() {
        let agent = tiny_agent();
        let history = vec![vec![0.0; 5]];
        let mut rng = crate::rng::stream(1, "sel");
        // epsilon 0: deterministic argmax of Q outputs
        let a = select_action(&agent, &history, 0.0, &mut rng).unwrap();
        let b = select_action(&agent, &history, 0.0, &mut rng).unwrap();
        assert_eq!(a, b);

        // epsilon 1: empirical frequencies uniform within 2%
        let mut counts = [0usize; 3];
        let n = 30_000;
        for _ in 0..n {
            counts[select_action(&agent, &history, 1.0, &mut rng).unwrap()] += 1;
        }
        for c in counts {
            let f = c as f64 / n as f64;
            assert!((f - 1.0 / 3.0).abs() < 0.02, "frequency {f}");
        }
    }

    #[test]
    fn equal_q_outputs_select_action_zero() {
        let q_spec = NetworkSpec { input: 2, layers: vec![LayerSpec::Output { out: 3 }] };
        let m_spec = NetworkSpec { input: 2, layers: vec![LayerSpec::Output { out: 2 }] };
        let mut agent = DanAgent::new(q_spec, m_spec, 1e-3, 0.99, 1).unwrap();
        for v in agent.q.values_mut() {
            *v = 0.0;
        }
        let mut rng = crate::rng::stream(2, "sel");
        assert_eq!(select_action(&agent, &[vec![0.0, 0.0]], 0.0, &mut rng).unwrap(), 0);
    }

    #[test]
    fn prediction_reward_modes_and_schedule() {
        let agent = tiny_agent();
        let history = vec![vec![0.0; 5], vec![0.3; 5]];
        let (_, pred) = prediction_reward(
            &agent, &history, 0, RewardMode::Dan, RewardSchedule::Continuous, 0, 12, true,
        )
        .unwrap();
        // reward is 1 exactly when the M-target argmax equals the label
        let (r_match, _) = prediction_reward(
            &agent, &history, pred, RewardMode::Dan, RewardSchedule::Continuous, 0, 12, true,
        )
        .unwrap();
        assert_eq!(r_match, 1.0);
        let wrong = (pred + 1) % agent.n_classes();
        let (r_wrong, _) = prediction_reward(
            &agent, &history, wrong, RewardMode::Dan, RewardSchedule::Continuous, 0, 12, true,
        )
        .unwrap();
        assert_eq!(r_wrong, 0.0);
        // incorrect but observed earns the 0.2 tier
        let (r_cov, _) = prediction_reward(
            &agent, &history, wrong, RewardMode::DanPlusCoverage, RewardSchedule::Continuous, 0, 12, true,
        )
        .unwrap();
        assert_eq!(r_cov, 0.2);
        // terminal schedule zeroes mid-episode rewards even when correct
        let (r_mid, _) = prediction_reward(
            &agent, &history, pred, RewardMode::Dan, RewardSchedule::Terminal, 5, 12, true,
        )
        .unwrap();
        assert_eq!(r_mid, 0.0);
        let (r_end, _) = prediction_reward(
            &agent, &history, pred, RewardMode::Dan, RewardSchedule::Terminal, 11, 12, true,
        )
        .unwrap();
        assert_eq!(r_end, 1.0);
    }

    #[test]
    fn double_dqn_target_values() {
        let t = double_dqn_target(1.0, 0.99, &[0.9, 0.1], &[0.2, 0.5], false);
        assert!((t - 1.198).abs() < 1e-12, "online argmax 0 evaluated by target: {t}");
        assert_eq!(double_dqn_target(1.0, 0.99, &[0.9, 0.1], &[0.2, 0.5], true), 1.0);
        assert_eq!(double_dqn_target(0.7, 0.0, &[0.9, 0.1], &[0.2, 0.5], false), 0.7);
    }

    #[test]
    fn sync_is_hard_copy_and_idempotent() {
        let mut agent = tiny_agent();
        // targets equal initial params before any sync
        assert_eq!(agent.q, agent.q_target);
        for v in agent.q.values_mut() {
            *v += 1.0;
        }
        assert_ne!(agent.q, agent.q_target);
        agent.sync_targets();
        assert_eq!(agent.q, agent.q_target);
        let snapshot = agent.q_target.clone();
        agent.sync_targets();
        assert_eq!(agent.q_target, snapshot);
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig::tracking_desk();
        assert!(cfg.validate(12).is_ok());
        cfg.trace_len = 13;
        assert!(cfg.validate(12).is_err());
        let mut cfg = TrainConfig::tracking_desk();
        cfg.burn_in = 8;
        assert!(cfg.validate(12).is_err());
        let mut cfg = TrainConfig::tracking_desk();
        cfg.epsilon_final = 1.5;
        assert!(cfg.validate(12).is_err());
    }

    #[test]
    fn agent_save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let agent = tiny_agent();
        save_agent(&agent, dir.path(), "x", 7).unwrap();
        let back = load_agent(dir.path(), "x", 1e-3, 0.99).unwrap();
        assert_eq!(back.q, agent.q);
        assert_eq!(back.m, agent.m);
        assert_eq!(back.q_spec, agent.q_spec);
    }
}
