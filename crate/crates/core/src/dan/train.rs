//! The DAN training loop: ε-greedy collection with rewards from the M
//! target network, whole-episode replay, recurrent double-DQN updates for
//! Q and supervised cross-entropy updates for M, periodic hard target
//! syncs, and periodic held-out evaluation.

use super::envs::DanEnv;
use super::eval::{evaluate, EvalStats};
use super::replay::{ReplayBuffer, SliceRef};
use super::{encode_step, double_dqn_target, DanAgent, EpisodeTrace, RewardMode, RewardSchedule, TrainConfig};
use crate::nn::{
    adam_step, add_l2_gradients, backward, clip_global_norm, cross_entropy_loss, forward,
    forward_step, ForwardMode, Parameters,
};
use crate::rng;
use crate::simplex::argmax;
use crate::tracking::reward_for;
use crate::Result;
use rand::Rng;
use serde::Serialize;

/// One row of the learning-curve CSV.
#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub mean_eval_reward: f64,
    pub mean_eval_accuracy: f64,
    pub td_loss: f64,
    pub ce_loss: f64,
}

/// One line of the JSON-lines event log.
#[derive(Debug, Clone, Serialize)]
pub struct Event {
    pub step: u64,
    pub event: String,
    pub payload: serde_json::Value,
}

/// Everything a training run produces besides the mutated agent.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub curve: Vec<CurvePoint>,
    pub events: Vec<Event>,
    /// Full statistics per evaluation point `(episode, stats)`.
    pub eval_history: Vec<(usize, EvalStats)>,
}

impl TrainResult {
    pub fn final_stats(&self) -> Option<&EvalStats> {
        self.eval_history.last().map(|(_, s)| s)
    }

    /// First evaluation episode at which `metric(stats)` reached
    /// `threshold`, or `None` if it never did.
    pub fn episodes_to_reach(&self, threshold: f64, metric: impl Fn(&EvalStats) -> f64) -> Option<usize> {
        self.eval_history
            .iter()
            .find(|(_, s)| metric(s) >= threshold)
            .map(|(ep, _)| *ep)
    }
}

/// Render the learning curve with the fixed CSV header.
pub fn curve_to_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("episode,mean_eval_reward,mean_eval_accuracy,td_loss,ce_loss\n");
    for p in curve {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.episode, p.mean_eval_reward, p.mean_eval_accuracy, p.td_loss, p.ce_loss
        ));
    }
    out
}

pub fn events_to_jsonl(events: &[Event]) -> Result<String> {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e)?);
        out.push('\n');
    }
    Ok(out)
}

/// Recurrent double-DQN update on a minibatch of episode slices. The
/// squared TD error is averaged over post-burn-in steps only; one Adam
/// step on the online Q parameters. M parameters are never touched.
pub fn q_update(
    agent: &mut DanAgent,
    buffer: &ReplayBuffer,
    slices: &[SliceRef],
    cfg: &TrainConfig,
    dropout_seed: u64,
) -> Result<f64> {
    let n_loss = slices.len() * (cfg.trace_len - cfg.burn_in);
    let mut grads = Parameters::zeros(&agent.q_spec)?;
    let mut loss_sum = 0.0;
    for (i, s) in slices.iter().enumerate() {
        let ep = buffer.episode(s.episode);
        let inputs = &ep.inputs[s.start..s.start + cfg.trace_len + 1];
        let online = forward(
            &agent.q,
            &agent.q_spec,
            inputs,
            ForwardMode::Train { dropout_seed: rng::derive_seed_indexed(dropout_seed, "q", i as u64) },
        )?;
        let target = forward(&agent.q_target, &agent.q_spec, inputs, ForwardMode::Eval)?;
        // optionally refresh rewards from the current M target over the
        // full history prefix (ablation path)
        let recomputed: Option<Vec<usize>> = if cfg.recompute_reward_on_replay {
            let m_trace = forward(
                &agent.m_target,
                &agent.m_spec,
                &ep.inputs[..s.start + cfg.trace_len + 1],
                ForwardMode::Eval,
            )?;
            Some((0..s.start + cfg.trace_len + 1).map(|p| argmax(m_trace.output(p))).collect())
        } else {
            None
        };

        let mut d_out = vec![vec![0.0; agent.n_actions()]; cfg.trace_len + 1];
        for t_rel in cfg.burn_in..cfg.trace_len {
            let t_abs = s.start + t_rel;
            let terminal = t_abs + 1 == ep.len();
            let reward = match &recomputed {
                None => ep.rewards[t_abs],
                Some(preds) => {
                    let correct = preds[t_abs + 1] == ep.labels[t_abs];
                    let base = reward_for(ep.non_null[t_abs], correct, cfg.reward_mode);
                    match cfg.reward_schedule {
                        RewardSchedule::Continuous => base,
                        RewardSchedule::Terminal if terminal => base,
                        RewardSchedule::Terminal => 0.0,
                    }
                }
            };
            let td_target = double_dqn_target(
                reward,
                cfg.gamma,
                online.output(t_rel + 1),
                target.output(t_rel + 1),
                terminal,
            );
            let action = ep.actions[t_abs];
            let delta = online.output(t_rel)[action] - td_target;
            d_out[t_rel][action] = 2.0 * delta / n_loss as f64;
            loss_sum += delta * delta;
        }
        let slice_grads = backward(&agent.q, &agent.q_spec, &online, &d_out, 0.0)?;
        grads.add_from(&slice_grads);
    }
    add_l2_gradients(&mut grads, &agent.q, cfg.l2_scale);
    clip_global_norm(&mut grads, cfg.grad_clip);
    adam_step(&mut agent.q, &grads, &mut agent.q_adam)?;
    Ok(loss_sum / n_loss as f64)
}

/// Supervised update of the M network: mean cross entropy of its per-step
/// predictions against the stored labels on post-burn-in steps (terminal
/// steps only when `m_terminal_only`). Returns `None` when the batch
/// contributes no labeled step. Q parameters are never touched.
pub fn m_update(
    agent: &mut DanAgent,
    buffer: &ReplayBuffer,
    slices: &[SliceRef],
    cfg: &TrainConfig,
    dropout_seed: u64,
) -> Result<Option<f64>> {
    // loss positions per slice: M sees inputs[p] and predicts labels[p-1]
    let positions: Vec<Vec<usize>> = slices
        .iter()
        .map(|s| {
            let ep_len = buffer.episode(s.episode).len();
            ((cfg.burn_in + 1)..=cfg.trace_len)
                .filter(|p| !cfg.m_terminal_only || s.start + p == ep_len)
                .collect()
        })
        .collect();
    let n_loss: usize = positions.iter().map(|v| v.len()).sum();
    if n_loss == 0 {
        return Ok(None);
    }
    let mut grads = Parameters::zeros(&agent.m_spec)?;
    let mut loss_sum = 0.0;
    for (i, (s, pos)) in slices.iter().zip(&positions).enumerate() {
        if pos.is_empty() {
            continue;
        }
        let ep = buffer.episode(s.episode);
        let inputs = &ep.inputs[s.start..s.start + cfg.trace_len + 1];
        let trace = forward(
            &agent.m,
            &agent.m_spec,
            inputs,
            ForwardMode::Train { dropout_seed: rng::derive_seed_indexed(dropout_seed, "m", i as u64) },
        )?;
        let mut d_out = vec![vec![0.0; agent.n_classes()]; cfg.trace_len + 1];
        for &p in pos {
            let label = ep.labels[s.start + p - 1];
            let (loss, grad) = cross_entropy_loss(trace.output(p), label)?;
            loss_sum += loss;
            for (d, g) in d_out[p].iter_mut().zip(&grad) {
                *d += g / n_loss as f64;
            }
        }
        let slice_grads = backward(&agent.m, &agent.m_spec, &trace, &d_out, 0.0)?;
        grads.add_from(&slice_grads);
    }
    add_l2_gradients(&mut grads, &agent.m, cfg.l2_scale);
    clip_global_norm(&mut grads, cfg.grad_clip);
    adam_step(&mut agent.m, &grads, &mut agent.m_adam)?;
    Ok(Some(loss_sum / n_loss as f64))
}

/// Run the full training loop; the agent is trained in place.
///
/// Deterministic per `(cfg, seed)`: episode draws, exploration,
/// minibatch sampling and evaluation each use their own derived stream.
pub fn train<E: DanEnv>(
    agent: &mut DanAgent,
    env: &mut E,
    eval_env: &mut E,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainResult> {
    let episode_len = env.episode_len();
    cfg.validate(episode_len)?;
    let n_actions = env.n_actions();
    let input_width = n_actions + env.obs_len();

    let mut buffer = ReplayBuffer::new(cfg.replay_capacity);
    let mut env_rng = rng::stream(seed, "env-reset");
    let mut act_rng = rng::stream(seed, "explore");
    let mut sample_rng = rng::stream(seed, "replay");

    let mut events = vec![Event {
        step: 0,
        event: "train_start".into(),
        payload: serde_json::json!({
            "episodes": cfg.episodes,
            "warmup_steps": cfg.warmup_steps,
            "update_period": cfg.update_period,
            "target_sync_period": cfg.target_sync_period,
            "epsilon_initial": cfg.epsilon_initial,
            "epsilon_initial_episodes": cfg.epsilon_initial_episodes,
            "epsilon_final": cfg.epsilon_final,
        }),
    }];
    let mut curve = vec![];
    let mut eval_history = vec![];

    let mut total_steps: u64 = 0;
    let mut steps_since_sync: u64 = 0;
    let mut warmup_done = cfg.warmup_steps == 0;
    let mut best: Option<(f64, usize, Parameters, Parameters)> = None;
    let mut td_sum = 0.0;
    let mut td_n = 0usize;
    let mut ce_sum = 0.0;
    let mut ce_n = 0usize;

    for ep_idx in 0..cfg.episodes {
        let epsilon = if ep_idx < cfg.epsilon_initial_episodes {
            cfg.epsilon_initial
        } else {
            cfg.epsilon_final
        };
        if ep_idx == cfg.epsilon_initial_episodes && cfg.epsilon_initial_episodes > 0 {
            events.push(Event {
                step: total_steps,
                event: "epsilon_change".into(),
                payload: serde_json::json!({ "epsilon": epsilon, "episode": ep_idx }),
            });
        }

        env.reset(&mut env_rng)?;
        let mut trace = EpisodeTrace::with_capacity(episode_len, input_width);
        let mut q_state: Option<Vec<f64>> = None;
        let mut mt_state: Option<Vec<f64>> = None;

        for t in 0..episode_len {
            let x_t = trace.inputs.last().expect("episode trace always holds x_0");
            let (q_out, q_next) = forward_step(&agent.q, &agent.q_spec, x_t, q_state.as_deref())?;
            q_state = q_next;
            let action = if act_rng.gen_range(0.0..1.0) < epsilon {
                act_rng.gen_range(0..n_actions)
            } else {
                argmax(&q_out)
            };

            let step = env.step(action)?;
            let x_next = encode_step(action, n_actions, &step.obs_encoding);

            let base = if cfg.reward_mode == RewardMode::Coverage {
                reward_for(step.non_null, false, RewardMode::Coverage)
            } else {
                let (m_out, mt_next) =
                    forward_step(&agent.m_target, &agent.m_spec, &x_next, mt_state.as_deref())?;
                mt_state = mt_next;
                let correct = argmax(&m_out) == step.label;
                reward_for(step.non_null, correct, cfg.reward_mode)
            };
            let reward = match cfg.reward_schedule {
                RewardSchedule::Continuous => base,
                RewardSchedule::Terminal if t == episode_len - 1 => base,
                RewardSchedule::Terminal => 0.0,
            };

            trace.inputs.push(x_next);
            trace.actions.push(action);
            trace.rewards.push(reward);
            trace.labels.push(step.label);
            trace.non_null.push(step.non_null);

            total_steps += 1;
            steps_since_sync += 1;
            if !warmup_done && total_steps >= cfg.warmup_steps {
                warmup_done = true;
                events.push(Event {
                    step: total_steps,
                    event: "warmup_end".into(),
                    payload: serde_json::json!({ "episode": ep_idx }),
                });
            }

            if warmup_done && total_steps % cfg.update_period == 0 && (cfg.train_q || cfg.train_m) {
                if let Some(slices) =
                    buffer.sample_slices(cfg.minibatch_episodes, cfg.trace_len, &mut sample_rng)
                {
                    let dropout_seed = rng::derive_seed_indexed(seed, "dropout", total_steps);
                    let mut td = serde_json::Value::Null;
                    let mut ce = serde_json::Value::Null;
                    if cfg.train_q {
                        let loss = q_update(agent, &buffer, &slices, cfg, dropout_seed)?;
                        td_sum += loss;
                        td_n += 1;
                        td = serde_json::json!(loss);
                    }
                    if cfg.train_m {
                        if let Some(loss) = m_update(agent, &buffer, &slices, cfg, dropout_seed)? {
                            ce_sum += loss;
                            ce_n += 1;
                            ce = serde_json::json!(loss);
                        }
                    }
                    events.push(Event {
                        step: total_steps,
                        event: "update".into(),
                        payload: serde_json::json!({ "td_loss": td, "ce_loss": ce }),
                    });
                }
            }
        }
        buffer.push(trace)?;

        if steps_since_sync >= cfg.target_sync_period {
            agent.sync_targets();
            steps_since_sync = 0;
            events.push(Event {
                step: total_steps,
                event: "target_sync".into(),
                payload: serde_json::json!({ "episode": ep_idx }),
            });
        }

        let last = ep_idx + 1 == cfg.episodes;
        if (ep_idx + 1) % cfg.eval_period_episodes == 0 || last {
            let mut eval_rng = rng::stream_indexed(seed, "eval", ep_idx as u64);
            let stats = evaluate(agent, eval_env, cfg.eval_episodes, &mut eval_rng)?;
            let mean_eval_reward = match (cfg.reward_mode, cfg.reward_schedule) {
                (RewardMode::Coverage, _) => stats.coverage_reward,
                (_, RewardSchedule::Terminal) => stats.terminal_reward,
                (_, RewardSchedule::Continuous) => stats.continuous_reward,
            };
            curve.push(CurvePoint {
                episode: ep_idx + 1,
                mean_eval_reward,
                mean_eval_accuracy: stats.accuracy,
                td_loss: if td_n > 0 { td_sum / td_n as f64 } else { 0.0 },
                ce_loss: if ce_n > 0 { ce_sum / ce_n as f64 } else { 0.0 },
            });
            events.push(Event {
                step: total_steps,
                event: "eval".into(),
                payload: serde_json::json!({
                    "episode": ep_idx + 1,
                    "continuous_reward": stats.continuous_reward,
                    "terminal_reward": stats.terminal_reward,
                    "accuracy": stats.accuracy,
                    "coverage_reward": stats.coverage_reward,
                }),
            });
            eval_history.push((ep_idx + 1, stats));
            if cfg.select_best_eval
                && best.as_ref().map_or(true, |(r, ..)| mean_eval_reward > *r)
            {
                best = Some((mean_eval_reward, ep_idx + 1, agent.q.clone(), agent.m.clone()));
            }
            td_sum = 0.0;
            td_n = 0;
            ce_sum = 0.0;
            ce_n = 0;
        }
    }

    if let Some((reward, episode, q, m)) = best {
        agent.q = q;
        agent.m = m;
        agent.sync_targets();
        events.push(Event {
            step: total_steps,
            event: "select_best".into(),
            payload: serde_json::json!({ "episode": episode, "mean_eval_reward": reward }),
        });
    }

    Ok(TrainResult { curve, events, eval_history })
}
