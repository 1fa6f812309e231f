//! Command implementations. Every command is a pure function of its flags,
//! config file and seed; all artifacts land under the chosen output
//! directory next to a manifest listing them with the resolved config.

use crate::config::{
    parse_attention_config, parse_tracking_config, AttentionRunConfig, TrackingRunConfig,
};
use dan_core::attention::{glyphs_from_json, glyphs_to_json, make_glyph_dataset, RewardSchedule};
use dan_core::bounds::{verify_bound_sweep, PredictionRewardSpec, SimplexSampler};
use dan_core::dan::{
    self, evaluate, evaluate_tracking, train, AttentionDanEnv, CameraPolicy, DanAgent, RewardMode,
    SplitChoice, TrackingAxisEnv, TrackingEvalResult, TrackingPredictor, TrainConfig, TrainResult,
};
use dan_core::nn::{self, NetworkSpec};
use dan_core::tracking::{
    default_layout, generate_dataset, tracks_from_jsonl, tracks_to_jsonl, Axis, CameraLayout,
    GridConfig, Track,
};
use dan_core::rng;
use serde_json::json;
use std::error::Error;
use std::fs;
use std::path::Path;

type CmdResult = Result<u8, Box<dyn Error>>;

fn read_config(path: Option<&Path>) -> Result<String, Box<dyn Error>> {
    match path {
        None => Ok(String::new()),
        Some(p) => Ok(fs::read_to_string(p)?),
    }
}

fn parse_sampler(text: &str, seed: u64) -> Result<SimplexSampler, Box<dyn Error>> {
    let (kind, value) = text
        .split_once(':')
        .ok_or_else(|| format!("sampler must be grid:STEP or random:N, got '{text}'"))?;
    match kind {
        "grid" => Ok(SimplexSampler::Grid { step: value.parse()? }),
        "random" => Ok(SimplexSampler::Random { n: value.parse()?, seed }),
        other => Err(format!("unknown sampler kind '{other}'").into()),
    }
}

struct Manifest {
    command: String,
    seed: u64,
    resolved_config: serde_json::Value,
    files: Vec<String>,
}

impl Manifest {
    fn new(command: &str, seed: u64, resolved_config: serde_json::Value) -> Self {
        Manifest { command: command.into(), seed, resolved_config, files: vec![] }
    }

    fn write_file(&mut self, dir: &Path, name: &str, contents: &str) -> Result<(), Box<dyn Error>> {
        fs::write(dir.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn finish(mut self, dir: &Path) -> Result<(), Box<dyn Error>> {
        self.files.push("manifest.json".into());
        self.files.sort();
        let doc = json!({
            "command": self.command,
            "seed": self.seed,
            "resolved_config": self.resolved_config,
            "files": self.files,
        });
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&doc)?)?;
        Ok(())
    }
}

pub fn verify_bounds(
    ny: usize,
    r_correct: f64,
    r_incorrect: f64,
    sampler: &str,
    seed: u64,
    out: Option<&Path>,
) -> CmdResult {
    let spec = PredictionRewardSpec::new(r_correct, r_incorrect, ny)?;
    if !spec.bound_applicable() {
        return Err(format!(
            "margin m = {} outside [1, {ny}]: the gap theorem does not apply",
            spec.margin()
        )
        .into());
    }
    let sampler = parse_sampler(sampler, seed)?;
    let report = verify_bound_sweep(&spec, sampler)?;
    let text = serde_json::to_string_pretty(&report)?;
    if let Some(path) = out {
        fs::write(path, &text)?;
    }
    println!("{text}");
    Ok(if report.holds { 0 } else { 2 })
}

pub fn gen_tracking(config: Option<&Path>, seed: u64, out: &Path) -> CmdResult {
    let cfg = parse_tracking_config(&read_config(config)?)?;
    fs::create_dir_all(out)?;
    let layout = default_layout(&cfg.grid)?;
    let (train_tracks, test_tracks) = generate_dataset(&cfg.grid, cfg.n_tracks, seed)?;
    let mut manifest = Manifest::new("gen-data tracking", seed, serde_json::to_value(&cfg)?);
    manifest.write_file(out, "layout.json", &serde_json::to_string_pretty(&layout)?)?;
    manifest.write_file(out, "train-tracks.jsonl", &tracks_to_jsonl(&train_tracks)?)?;
    manifest.write_file(out, "test-tracks.jsonl", &tracks_to_jsonl(&test_tracks)?)?;
    manifest.finish(out)?;
    println!(
        "wrote {} train and {} test tracks under {}",
        train_tracks.len(),
        test_tracks.len(),
        out.display()
    );
    Ok(0)
}

pub fn gen_glyphs(config: Option<&Path>, seed: u64, out: &Path) -> CmdResult {
    let cfg = parse_attention_config(&read_config(config)?)?;
    fs::create_dir_all(out)?;
    let ds = make_glyph_dataset(seed, cfg.n_per_class, cfg.pixel_noise)?;
    let mut manifest = Manifest::new("gen-data glyphs", seed, serde_json::to_value(&cfg)?);
    manifest.write_file(out, "glyphs.json", &glyphs_to_json(&ds)?)?;
    manifest.finish(out)?;
    println!(
        "wrote {} glyph images ({} train / {} test) under {}",
        ds.images.len(),
        ds.train_idx.len(),
        ds.test_idx.len(),
        out.display()
    );
    Ok(0)
}

fn axis_specs(cfg: &TrackingRunConfig, axis: Axis) -> (NetworkSpec, NetworkSpec) {
    let extent = axis.extent(&cfg.grid);
    let input = cfg.grid.n_cameras + extent + 1;
    (
        NetworkSpec::recurrent_net(input, &cfg.model.dense, cfg.model.recurrent, cfg.grid.n_cameras),
        NetworkSpec::recurrent_net(input, &cfg.model.dense, cfg.model.recurrent, extent),
    )
}

/// Train one per-axis agent; returns the agent and its curve.
pub fn train_tracking_axis(
    cfg: &TrackingRunConfig,
    layout: &CameraLayout,
    train_tracks: &[Track],
    test_tracks: &[Track],
    axis: Axis,
    seed: u64,
) -> Result<(DanAgent, TrainResult), Box<dyn Error>> {
    let (q_spec, m_spec) = axis_specs(cfg, axis);
    let tag = match axis {
        Axis::X => "agent-x",
        Axis::Y => "agent-y",
    };
    let agent_seed = rng::derive_seed(seed, tag);
    let mut agent = DanAgent::new(q_spec, m_spec, cfg.train.lr, cfg.train.gamma, agent_seed)?;
    let mut env = TrackingAxisEnv::new(
        cfg.grid,
        layout.clone(),
        train_tracks.to_vec(),
        axis,
        rng::derive_seed(seed, &format!("{tag}-env")),
    )?;
    let mut eval_env = TrackingAxisEnv::new(
        cfg.grid,
        layout.clone(),
        test_tracks.to_vec(),
        axis,
        rng::derive_seed(seed, &format!("{tag}-eval-env")),
    )?;
    let result = train(&mut agent, &mut env, &mut eval_env, &cfg.train, agent_seed)?;
    Ok((agent, result))
}

pub fn train_tracking(config: Option<&Path>, seed: u64, out: &Path) -> CmdResult {
    let cfg = parse_tracking_config(&read_config(config)?)?;
    fs::create_dir_all(out)?;
    let layout = default_layout(&cfg.grid)?;
    let (train_tracks, test_tracks) = generate_dataset(&cfg.grid, cfg.n_tracks, seed)?;

    let mut manifest = Manifest::new("train tracking", seed, serde_json::to_value(&cfg)?);
    manifest.write_file(out, "layout.json", &serde_json::to_string_pretty(&layout)?)?;
    manifest.write_file(out, "train-tracks.jsonl", &tracks_to_jsonl(&train_tracks)?)?;
    manifest.write_file(out, "test-tracks.jsonl", &tracks_to_jsonl(&test_tracks)?)?;

    let mut summaries = vec![];
    let mut agents = vec![];
    for axis in [Axis::X, Axis::Y] {
        let name = match axis {
            Axis::X => "x",
            Axis::Y => "y",
        };
        eprintln!("training {name}-axis agent ({} episodes)...", cfg.train.episodes);
        let (agent, result) =
            train_tracking_axis(&cfg, &layout, &train_tracks, &test_tracks, axis, seed)?;
        manifest.write_file(out, &format!("{name}-curves.csv"), &dan::curve_to_csv(&result.curve))?;
        manifest.write_file(
            out,
            &format!("{name}-events.jsonl"),
            &dan::events_to_jsonl(&result.events)?,
        )?;
        if let Some(stats) = result.final_stats() {
            summaries.push((name, *stats));
        }
        agents.push(agent);
    }

    let ckpt_dir = out.join("checkpoints");
    dan::save_agent(&agents[0], &ckpt_dir, "x", seed)?;
    dan::save_agent(&agents[1], &ckpt_dir, "y", seed)?;
    for f in ["x-q.json", "x-m.json", "y-q.json", "y-m.json"] {
        manifest.files.push(format!("checkpoints/{f}"));
    }

    let combined = evaluate_tracking(
        &agents[0],
        &agents[1],
        &cfg.grid,
        &layout,
        &test_tracks,
        cfg.eval.episodes,
        cfg.eval.persons,
        if cfg.train.reward_mode == RewardMode::Coverage {
            TrackingPredictor::Observations
        } else {
            TrackingPredictor::MNetworks
        },
        CameraPolicy::MeanQ,
        rng::derive_seed(seed, "final-eval"),
    )?;

    let meta = json!({
        "kind": "tracking",
        "config": serde_json::to_value(&cfg)?,
        "seed": seed,
    });
    manifest.write_file(out, "meta.json", &serde_json::to_string_pretty(&meta)?)?;
    let summary = json!({
        "per_axis_final": summaries
            .iter()
            .map(|(name, s)| json!({ "axis": name, "stats": s }))
            .collect::<Vec<_>>(),
        "combined_eval": combined,
    });
    manifest.write_file(out, "summary.json", &serde_json::to_string_pretty(&summary)?)?;
    manifest.finish(out)?;
    println!(
        "combined prediction-scored mean episode reward: {:.4}",
        combined.mean_episode_reward
    );
    Ok(0)
}

fn attention_specs(cfg: &AttentionRunConfig, width: usize, height: usize) -> (NetworkSpec, NetworkSpec) {
    let input = cfg.glimpse.n_patches() + width * height;
    (
        NetworkSpec::recurrent_net(input, &cfg.model.dense, cfg.model.recurrent, cfg.glimpse.n_patches()),
        NetworkSpec::recurrent_net(input, &cfg.model.dense, cfg.model.recurrent, 10),
    )
}

pub fn train_attention_run(
    cfg: &AttentionRunConfig,
    seed: u64,
) -> Result<(DanAgent, TrainResult), Box<dyn Error>> {
    let ds = make_glyph_dataset(rng::derive_seed(seed, "glyph-data"), cfg.n_per_class, cfg.pixel_noise)?;
    let (q_spec, m_spec) = attention_specs(cfg, ds.width, ds.height);
    let agent_seed = rng::derive_seed(seed, "agent");
    let mut agent = DanAgent::new(q_spec, m_spec, cfg.train.lr, cfg.train.gamma, agent_seed)?;
    let mut env = AttentionDanEnv::new(ds.clone(), cfg.glimpse, SplitChoice::Train)?;
    let mut eval_env = AttentionDanEnv::new(ds, cfg.glimpse, SplitChoice::Test)?;
    let result = train(&mut agent, &mut env, &mut eval_env, &cfg.train, agent_seed)?;
    Ok((agent, result))
}

pub fn train_attention(
    config: Option<&Path>,
    seed: u64,
    out: &Path,
    reward_override: Option<&str>,
) -> CmdResult {
    let mut cfg = parse_attention_config(&read_config(config)?)?;
    match reward_override {
        Some("terminal") => cfg.train = cfg.train.clone().with_terminal_reward(),
        Some("continuous") => {
            cfg.train.reward_schedule = RewardSchedule::Continuous;
            cfg.train.m_terminal_only = false;
        }
        _ => {}
    }
    fs::create_dir_all(out)?;
    let mut manifest = Manifest::new("train attention", seed, serde_json::to_value(&cfg)?);
    let ds = make_glyph_dataset(rng::derive_seed(seed, "glyph-data"), cfg.n_per_class, cfg.pixel_noise)?;
    manifest.write_file(out, "glyphs.json", &glyphs_to_json(&ds)?)?;

    eprintln!(
        "training attention agent ({} episodes, {:?} reward)...",
        cfg.train.episodes, cfg.train.reward_schedule
    );
    let (agent, result) = train_attention_run(&cfg, seed)?;
    manifest.write_file(out, "curves.csv", &dan::curve_to_csv(&result.curve))?;
    manifest.write_file(out, "events.jsonl", &dan::events_to_jsonl(&result.events)?)?;

    let ckpt_dir = out.join("checkpoints");
    dan::save_agent(&agent, &ckpt_dir, "agent", seed)?;
    manifest.files.push("checkpoints/agent-q.json".into());
    manifest.files.push("checkpoints/agent-m.json".into());

    let meta = json!({
        "kind": "attention",
        "config": serde_json::to_value(&cfg)?,
        "seed": seed,
    });
    manifest.write_file(out, "meta.json", &serde_json::to_string_pretty(&meta)?)?;
    let summary = json!({ "final": result.final_stats() });
    manifest.write_file(out, "summary.json", &serde_json::to_string_pretty(&summary)?)?;
    manifest.finish(out)?;
    if let Some(stats) = result.final_stats() {
        println!(
            "final eval: continuous reward {:.3}/episode, accuracy {:.3}, terminal reward {:.3}",
            stats.continuous_reward, stats.accuracy, stats.terminal_reward
        );
    }
    Ok(0)
}

pub fn eval(checkpoint: &Path, data: &Path, multi_person: usize, episodes: usize, seed: u64) -> CmdResult {
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(checkpoint.join("meta.json"))?)?;
    let kind = meta["kind"].as_str().ok_or("meta.json missing 'kind'")?;
    match kind {
        "tracking" => {
            let cfg: TrackingRunConfig = {
                // the resolved config is embedded; re-derive the typed form
                let grid: GridConfig = serde_json::from_value(meta["config"]["grid"].clone())?;
                let train: TrainConfig = serde_json::from_value(meta["config"]["train"].clone())?;
                TrackingRunConfig {
                    grid,
                    model: serde_json::from_value(meta["config"]["model"].clone())
                        .map_err(|e| format!("meta.json model: {e}"))?,
                    train,
                    n_tracks: 0,
                    eval: serde_json::from_value(meta["config"]["eval"].clone())
                        .map_err(|e| format!("meta.json eval: {e}"))?,
                }
            };
            let layout: CameraLayout =
                serde_json::from_str(&fs::read_to_string(checkpoint.join("layout.json"))?)?;
            let tracks = tracks_from_jsonl(&fs::read_to_string(data)?)?;
            let x_agent = dan::load_agent(&checkpoint.join("checkpoints"), "x", cfg.train.lr, cfg.train.gamma)?;
            let y_agent = dan::load_agent(&checkpoint.join("checkpoints"), "y", cfg.train.lr, cfg.train.gamma)?;
            let predictor = if cfg.train.reward_mode == RewardMode::Coverage {
                TrackingPredictor::Observations
            } else {
                TrackingPredictor::MNetworks
            };
            let result: TrackingEvalResult = evaluate_tracking(
                &x_agent,
                &y_agent,
                &cfg.grid,
                &layout,
                &tracks,
                episodes,
                multi_person,
                predictor,
                CameraPolicy::MeanQ,
                seed,
            )?;
            for (k, score) in result.per_person.iter().enumerate() {
                println!("person {k}: mean episode reward {score:.4}");
            }
            println!("averaged mean episode reward: {:.4}", result.mean_episode_reward);
        }
        "attention" => {
            let cfg: AttentionRunConfig = serde_json::from_value(meta["config"].clone())
                .map_err(|e| format!("meta.json config: {e}"))?;
            let ds = glyphs_from_json(&fs::read_to_string(data)?)?;
            let agent = dan::load_agent(&checkpoint.join("checkpoints"), "agent", cfg.train.lr, cfg.train.gamma)?;
            let mut env = AttentionDanEnv::new(ds, cfg.glimpse, SplitChoice::Test)?;
            let stats = evaluate(&agent, &mut env, episodes, &mut rng::stream(seed, "cli-eval"))?;
            println!(
                "continuous reward {:.3}/episode, accuracy {:.3}, terminal reward {:.3}",
                stats.continuous_reward, stats.accuracy, stats.terminal_reward
            );
        }
        other => return Err(format!("unknown checkpoint kind '{other}'").into()),
    }
    Ok(0)
}

pub fn grad_check(trials: usize, seed: u64, inject_flip: bool) -> CmdResult {
    let report = nn::grad_check(trials, seed, inject_flip)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if report.pass {
        println!("gradient check passed: max relative error {:.3e}", report.max_rel_err);
        Ok(0)
    } else {
        println!(
            "gradient check FAILED: worst trial {} layer {} index {} (rel err {:.3e})",
            report.worst_trial, report.worst_layer, report.worst_index, report.max_rel_err
        );
        Ok(2)
    }
}
