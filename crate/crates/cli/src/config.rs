//! Flat `key = value` configuration files with `[section]` headers.
//! Unknown sections and keys are rejected with the offending name, and
//! every value is range-checked before a run starts.

use dan_core::attention::{GlimpseSpec, RewardSchedule};
use dan_core::dan::{RewardMode, TrainConfig};
use dan_core::tracking::GridConfig;
use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

/// Parsed but untyped config text.
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError(format!("line {}: unterminated section header", lineno + 1)))?;
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key = value", lineno + 1)))?;
            if current.is_empty() {
                return Err(ConfigError(format!(
                    "line {}: key before any [section] header",
                    lineno + 1
                )));
            }
            let prev = sections
                .get_mut(&current)
                .unwrap()
                .insert(key.trim().to_string(), value.trim().to_string());
            if prev.is_some() {
                return Err(ConfigError(format!(
                    "line {}: duplicate key '{}' in [{current}]",
                    lineno + 1,
                    key.trim()
                )));
            }
        }
        Ok(RawConfig { sections })
    }

    fn section(&mut self, name: &str) -> Section {
        Section {
            name: name.to_string(),
            values: self.sections.remove(name).unwrap_or_default(),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(name) = self.sections.keys().next() {
            return Err(ConfigError(format!("unknown section [{name}]")));
        }
        Ok(())
    }
}

struct Section {
    name: String,
    values: BTreeMap<String, String>,
}

impl Section {
    fn take<T: FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        match self.values.remove(key) {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|e| {
                ConfigError(format!("[{}] {key} = {raw}: {e}", self.name))
            }),
        }
    }

    fn take_usize_list(&mut self, key: &str, default: Vec<usize>) -> Result<Vec<usize>> {
        match self.values.remove(key) {
            None => Ok(default),
            Some(raw) => raw
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse()
                        .map_err(|e| ConfigError(format!("[{}] {key} = {raw}: {e}", self.name)))
                })
                .collect(),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(key) = self.values.keys().next() {
            return Err(ConfigError(format!("unknown key '{key}' in [{}]", self.name)));
        }
        Ok(())
    }
}

/// Network sizes shared by the Q and M networks.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    pub dense: Vec<usize>,
    pub recurrent: usize,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EvalConfig {
    pub episodes: usize,
    pub persons: usize,
}

/// Fully resolved tracking run configuration.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrackingRunConfig {
    pub grid: GridConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub n_tracks: usize,
    pub eval: EvalConfig,
}

/// Fully resolved attention run configuration.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AttentionRunConfig {
    pub glimpse: GlimpseSpec,
    pub n_per_class: usize,
    pub pixel_noise: f64,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

fn parse_train(section: &mut Section, mut cfg: TrainConfig) -> Result<TrainConfig> {
    let m_terminal_explicit = section.values.contains_key("m_terminal_only");
    cfg.episodes = section.take("episodes", cfg.episodes)?;
    cfg.warmup_steps = section.take("warmup_steps", cfg.warmup_steps)?;
    cfg.epsilon_initial = section.take("epsilon_initial", cfg.epsilon_initial)?;
    cfg.epsilon_initial_episodes =
        section.take("epsilon_initial_episodes", cfg.epsilon_initial_episodes)?;
    cfg.epsilon_final = section.take("epsilon_final", cfg.epsilon_final)?;
    cfg.lr = section.take("lr", cfg.lr)?;
    cfg.minibatch_episodes = section.take("minibatch_episodes", cfg.minibatch_episodes)?;
    cfg.trace_len = section.take("trace_len", cfg.trace_len)?;
    cfg.burn_in = section.take("burn_in", cfg.burn_in)?;
    cfg.update_period = section.take("update_period", cfg.update_period)?;
    cfg.target_sync_period = section.take("target_sync_period", cfg.target_sync_period)?;
    cfg.replay_capacity = section.take("replay_capacity", cfg.replay_capacity)?;
    cfg.l2_scale = section.take("l2_scale", cfg.l2_scale)?;
    cfg.grad_clip = section.take("grad_clip", cfg.grad_clip)?;
    cfg.gamma = section.take("gamma", cfg.gamma)?;
    cfg.eval_period_episodes = section.take("eval_period_episodes", cfg.eval_period_episodes)?;
    cfg.eval_episodes = section.take("eval_episodes", cfg.eval_episodes)?;
    cfg.m_terminal_only = section.take("m_terminal_only", cfg.m_terminal_only)?;
    cfg.recompute_reward_on_replay =
        section.take("recompute_reward_on_replay", cfg.recompute_reward_on_replay)?;
    let mode = section.take("reward_mode", String::from("dan"))?;
    cfg.reward_mode = match mode.as_str() {
        "dan" => RewardMode::Dan,
        "dan_plus_coverage" => RewardMode::DanPlusCoverage,
        "coverage" => RewardMode::Coverage,
        other => return Err(ConfigError(format!("unknown reward_mode '{other}'"))),
    };
    if cfg.reward_mode == RewardMode::Coverage {
        cfg.train_m = false;
    }
    let schedule = section.take("reward_schedule", String::from("continuous"))?;
    cfg.reward_schedule = match schedule.as_str() {
        "continuous" => RewardSchedule::Continuous,
        "terminal" => RewardSchedule::Terminal,
        other => return Err(ConfigError(format!("unknown reward_schedule '{other}'"))),
    };
    if cfg.reward_schedule == RewardSchedule::Terminal && !m_terminal_explicit {
        cfg.m_terminal_only = true;
    }
    Ok(cfg)
}

fn parse_model(section: &mut Section, default_dense: Vec<usize>, default_rec: usize) -> Result<ModelConfig> {
    Ok(ModelConfig {
        dense: section.take_usize_list("dense", default_dense)?,
        recurrent: section.take("recurrent", default_rec)?,
    })
}

pub fn parse_tracking_config(text: &str) -> Result<TrackingRunConfig> {
    let mut raw = RawConfig::parse(text)?;
    let mut grid_s = raw.section("grid");
    let defaults = GridConfig::default();
    let grid = GridConfig {
        width: grid_s.take("width", defaults.width)?,
        height: grid_s.take("height", defaults.height)?,
        n_cameras: grid_s.take("n_cameras", defaults.n_cameras)?,
        episode_len: grid_s.take("episode_len", defaults.episode_len)?,
        walk_persistence: grid_s.take("walk_persistence", defaults.walk_persistence)?,
        noise_adjacent: grid_s.take("noise_adjacent", defaults.noise_adjacent)?,
        miss_prob: grid_s.take("miss_prob", defaults.miss_prob)?,
    };
    grid_s.finish()?;
    grid.validate().map_err(|e| ConfigError(e.to_string()))?;

    let mut model_s = raw.section("model");
    let model = parse_model(&mut model_s, vec![32, 32], 32)?;
    model_s.finish()?;

    let mut train_s = raw.section("train");
    let train = parse_train(&mut train_s, TrainConfig::tracking_desk())?;
    train_s.finish()?;
    train
        .validate(grid.episode_len)
        .map_err(|e| ConfigError(e.to_string()))?;

    let mut data_s = raw.section("dataset");
    let n_tracks = data_s.take("n_tracks", 600usize)?;
    data_s.finish()?;

    let mut eval_s = raw.section("eval");
    let eval = EvalConfig {
        episodes: eval_s.take("episodes", 100usize)?,
        persons: eval_s.take("persons", 1usize)?,
    };
    eval_s.finish()?;
    raw.finish()?;
    Ok(TrackingRunConfig { grid, model, train, n_tracks, eval })
}

pub fn parse_attention_config(text: &str) -> Result<AttentionRunConfig> {
    let mut raw = RawConfig::parse(text)?;
    let mut glimpse_s = raw.section("glimpse");
    let defaults = GlimpseSpec::default();
    let glimpse = GlimpseSpec {
        patch_rows: glimpse_s.take("patch_rows", defaults.patch_rows)?,
        patch_cols: glimpse_s.take("patch_cols", defaults.patch_cols)?,
        episode_len: glimpse_s.take("episode_len", defaults.episode_len)?,
    };
    glimpse_s.finish()?;

    let mut glyph_s = raw.section("glyphs");
    let n_per_class = glyph_s.take("n_per_class", 40usize)?;
    let pixel_noise = glyph_s.take("pixel_noise", 0.03f64)?;
    glyph_s.finish()?;
    if !(0.0..=1.0).contains(&pixel_noise) {
        return Err(ConfigError(format!("pixel_noise {pixel_noise} outside [0,1]")));
    }

    let mut model_s = raw.section("model");
    let model = parse_model(&mut model_s, vec![48, 32], 32)?;
    model_s.finish()?;

    let mut train_s = raw.section("train");
    let train = parse_train(&mut train_s, TrainConfig::attention_desk())?;
    train_s.finish()?;
    train
        .validate(glimpse.episode_len)
        .map_err(|e| ConfigError(e.to_string()))?;
    raw.finish()?;
    Ok(AttentionRunConfig { glimpse, n_per_class, pixel_noise, model, train })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_empty_text() {
        let cfg = parse_tracking_config("").unwrap();
        assert_eq!(cfg.grid.width, 10);
        assert_eq!(cfg.train.episodes, 3000);
        let cfg = parse_attention_config("").unwrap();
        assert_eq!(cfg.glimpse.n_patches(), 16);
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        let err = parse_tracking_config("[grid]\nwith = 10\n").unwrap_err();
        assert!(err.0.contains("with"), "{err}");
        let err = parse_tracking_config("[grib]\nwidth = 10\n").unwrap_err();
        assert!(err.0.contains("grib"), "{err}");
        let err = parse_tracking_config("width = 10\n").unwrap_err();
        assert!(err.0.contains("section"), "{err}");
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        assert!(parse_tracking_config("[grid]\nmiss_prob = 1.5\n").is_err());
        assert!(parse_tracking_config("[train]\ntrace_len = 40\n").is_err());
        assert!(parse_attention_config("[glyphs]\npixel_noise = -0.1\n").is_err());
    }

    #[test]
    fn terminal_schedule_defaults_to_terminal_only_m() {
        let cfg = parse_attention_config("[train]\nreward_schedule = terminal\n").unwrap();
        assert!(cfg.train.m_terminal_only);
        let cfg = parse_attention_config(
            "[train]\nreward_schedule = terminal\nm_terminal_only = false\n",
        )
        .unwrap();
        assert!(!cfg.train.m_terminal_only);
    }

    #[test]
    fn values_and_comments_parse() {
        let text = "# top comment\n[train]\nepisodes = 100  # inline\nlr = 0.002\nreward_mode = dan_plus_coverage\n";
        let cfg = parse_tracking_config(text).unwrap();
        assert_eq!(cfg.train.episodes, 100);
        assert_eq!(cfg.train.lr, 0.002);
        assert_eq!(cfg.train.reward_mode, RewardMode::DanPlusCoverage);
    }

    #[test]
    fn duplicate_keys_rejected() {
        assert!(parse_tracking_config("[grid]\nwidth = 4\nwidth = 5\n").is_err());
    }
}
