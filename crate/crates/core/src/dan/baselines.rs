//! End-to-end tracking variants: DAN and the comparison baselines from the
//! sensor-selection protocol, all producing a prediction-scored combined
//! evaluation on held-out tracks.

use super::envs::TrackingAxisEnv;
use super::eval::{evaluate_tracking, run_exact_oracle, CameraPolicy, TrackingPredictor};
use super::train::{train, TrainResult};
use super::{DanAgent, RewardMode, TrainConfig};
use crate::nn::NetworkSpec;
use crate::rng;
use crate::tracking::{Axis, CameraLayout, GridConfig, Track};
use crate::Result;

/// Network sizes shared by the Q and M networks of one agent.
#[derive(Debug, Clone)]
pub struct ModelSizes {
    pub dense: Vec<usize>,
    pub recurrent: usize,
}

impl Default for ModelSizes {
    fn default() -> Self {
        ModelSizes { dense: vec![32, 32], recurrent: 32 }
    }
}

/// Everything a tracking run needs besides the training config.
#[derive(Clone)]
pub struct TrackingTask<'a> {
    pub grid: &'a GridConfig,
    pub layout: &'a CameraLayout,
    pub train_tracks: &'a [Track],
    pub test_tracks: &'a [Track],
    pub sizes: ModelSizes,
}

impl TrackingTask<'_> {
    fn axis_specs(&self, axis: Axis) -> (NetworkSpec, NetworkSpec) {
        let extent = axis.extent(self.grid);
        let input = self.layout.cameras.len() + extent + 1;
        (
            NetworkSpec::recurrent_net(input, &self.sizes.dense, self.sizes.recurrent, self.layout.cameras.len()),
            NetworkSpec::recurrent_net(input, &self.sizes.dense, self.sizes.recurrent, extent),
        )
    }
}

/// Train one per-axis agent on the task's train tracks, evaluating on the
/// test tracks.
pub fn train_axis_agent(
    task: &TrackingTask<'_>,
    axis: Axis,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(DanAgent, TrainResult)> {
    let (q_spec, m_spec) = task.axis_specs(axis);
    let tag = match axis {
        Axis::X => "agent-x",
        Axis::Y => "agent-y",
    };
    let agent_seed = rng::derive_seed(seed, tag);
    let mut agent = DanAgent::new(q_spec, m_spec, cfg.lr, cfg.gamma, agent_seed)?;
    let mut env = TrackingAxisEnv::new(
        *task.grid,
        task.layout.clone(),
        task.train_tracks.to_vec(),
        axis,
        rng::derive_seed(seed, &format!("{tag}-env")),
    )?;
    let mut eval_env = TrackingAxisEnv::new(
        *task.grid,
        task.layout.clone(),
        task.test_tracks.to_vec(),
        axis,
        rng::derive_seed(seed, &format!("{tag}-eval-env")),
    )?;
    let result = train(&mut agent, &mut env, &mut eval_env, cfg, agent_seed)?;
    Ok((agent, result))
}

/// The trained variants and model-free baselines of the tracking
/// comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackingVariant {
    /// Prediction reward from the M target network.
    Dan,
    /// Prediction reward plus the 0.2 coverage tier.
    DanPlusCoverage,
    /// Coverage reward only, no M network; observations stand in as
    /// predictions.
    Coverage,
    /// Uniform random cameras; only M trains.
    RandomPolicy,
    /// No learning: exact per-axis filters with greedy information gain.
    ExactOracle,
}

/// Result of one variant run: the prediction-scored combined evaluation
/// (mean episode reward over both-coordinate correctness) plus, for the
/// learned variants, the per-axis agents and curves.
pub struct VariantOutcome {
    pub final_reward: f64,
    pub agents: Option<[DanAgent; 2]>,
    pub curves: Option<[TrainResult; 2]>,
}

/// Train (where applicable) and evaluate one tracking variant.
///
/// All variants are scored the same way: per step, +1 only when both
/// coordinates of the person are predicted correctly, averaged over
/// evaluation episodes on the held-out tracks.
pub fn run_tracking_variant(
    variant: TrackingVariant,
    task: &TrackingTask<'_>,
    cfg: &TrainConfig,
    eval_episodes: usize,
    seed: u64,
) -> Result<VariantOutcome> {
    if variant == TrackingVariant::ExactOracle {
        let score = run_exact_oracle(
            task.grid,
            task.layout,
            task.test_tracks,
            eval_episodes,
            rng::derive_seed(seed, "oracle"),
        )?;
        return Ok(VariantOutcome { final_reward: score, agents: None, curves: None });
    }

    let mut cfg = cfg.clone();
    match variant {
        TrackingVariant::Dan => cfg.reward_mode = RewardMode::Dan,
        TrackingVariant::DanPlusCoverage => cfg.reward_mode = RewardMode::DanPlusCoverage,
        TrackingVariant::Coverage => {
            cfg.reward_mode = RewardMode::Coverage;
            cfg.train_m = false;
        }
        TrackingVariant::RandomPolicy => {
            cfg.reward_mode = RewardMode::Dan;
            cfg.train_q = false;
            cfg.epsilon_initial = 1.0;
            cfg.epsilon_final = 1.0;
        }
        TrackingVariant::ExactOracle => unreachable!(),
    }

    let (x_agent, x_result) = train_axis_agent(task, Axis::X, &cfg, seed)?;
    let (y_agent, y_result) = train_axis_agent(task, Axis::Y, &cfg, seed)?;

    let predictor = if variant == TrackingVariant::Coverage {
        TrackingPredictor::Observations
    } else {
        TrackingPredictor::MNetworks
    };
    let camera_policy = if variant == TrackingVariant::RandomPolicy {
        CameraPolicy::Random
    } else {
        CameraPolicy::MeanQ
    };
    let final_reward = evaluate_tracking(
        &x_agent,
        &y_agent,
        task.grid,
        task.layout,
        task.test_tracks,
        eval_episodes,
        1,
        predictor,
        camera_policy,
        rng::derive_seed(seed, "variant-eval"),
    )?
    .mean_episode_reward;

    Ok(VariantOutcome {
        final_reward,
        agents: Some([x_agent, y_agent]),
        curves: Some([x_result, y_result]),
    })
}

/// The named comparison baselines of the tracking protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    RandomPolicy,
    Coverage,
    ExactOracle,
}

impl From<BaselineKind> for TrackingVariant {
    fn from(kind: BaselineKind) -> Self {
        match kind {
            BaselineKind::RandomPolicy => TrackingVariant::RandomPolicy,
            BaselineKind::Coverage => TrackingVariant::Coverage,
            BaselineKind::ExactOracle => TrackingVariant::ExactOracle,
        }
    }
}

/// The spec-level baseline entry point: the three named baselines, scored
/// exactly like [`run_tracking_variant`].
pub fn run_baseline(
    kind: BaselineKind,
    task: &TrackingTask<'_>,
    cfg: &TrainConfig,
    eval_episodes: usize,
    seed: u64,
) -> Result<VariantOutcome> {
    run_tracking_variant(kind.into(), task, cfg, eval_episodes, seed)
}
