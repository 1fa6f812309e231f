//! Environment adapters feeding the DAN training loop: per-axis camera
//! selection and glimpse attention, both behind one episodic interface.

use crate::attention::{AttentionState, GlimpseSpec, GlyphDataset};
use crate::rng;
use crate::tracking::{
    axis_obs_symbol, sample_observation, Axis, CameraLayout, GridConfig, Track,
};
use crate::{CoreError, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One environment step as seen by the trainer.
#[derive(Debug, Clone)]
pub struct EnvStep {
    /// Observation encoding (one-hot symbol, or pixel composite).
    pub obs_encoding: Vec<f64>,
    /// True target value for this step (training label).
    pub label: usize,
    /// Whether the observation carried any signal (non-null reading, or
    /// always true where null does not exist).
    pub non_null: bool,
}

/// An episodic partially observable environment with per-step labels.
pub trait DanEnv {
    fn n_actions(&self) -> usize;
    fn n_classes(&self) -> usize;
    fn obs_len(&self) -> usize;
    fn episode_len(&self) -> usize;
    /// Start a new episode; draws (track/image choice) come from `rng`.
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<()>;
    fn step(&mut self, action: usize) -> Result<EnvStep>;
}

/// Which split of a dataset an environment draws episodes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitChoice {
    Train,
    Test,
}

/// Per-axis view of the camera-selection task: actions are cameras,
/// observations are the axis reading (or null), the label is the person's
/// axis coordinate.
pub struct TrackingAxisEnv {
    config: GridConfig,
    layout: CameraLayout,
    tracks: Vec<Track>,
    axis: Axis,
    noise_root: u64,
    episodes_started: u64,
    track_idx: usize,
    t: usize,
    episode_rng: ChaCha8Rng,
}

impl TrackingAxisEnv {
    pub fn new(
        config: GridConfig,
        layout: CameraLayout,
        tracks: Vec<Track>,
        axis: Axis,
        noise_root: u64,
    ) -> Result<Self> {
        config.validate()?;
        layout.validate()?;
        if tracks.is_empty() {
            return Err(CoreError::EmptyInput("tracks"));
        }
        if tracks.iter().any(|t| t.positions.len() != config.episode_len) {
            return Err(CoreError::InvalidConfig("track length != episode_len".into()));
        }
        Ok(TrackingAxisEnv {
            config,
            layout,
            tracks,
            axis,
            noise_root,
            episodes_started: 0,
            track_idx: 0,
            t: usize::MAX,
            episode_rng: rng::stream(noise_root, "unstarted"),
        })
    }

    pub fn extent(&self) -> usize {
        self.axis.extent(&self.config)
    }
}

impl DanEnv for TrackingAxisEnv {
    fn n_actions(&self) -> usize {
        self.layout.cameras.len()
    }

    fn n_classes(&self) -> usize {
        self.extent()
    }

    fn obs_len(&self) -> usize {
        self.extent() + 1 // cells plus null
    }

    fn episode_len(&self) -> usize {
        self.config.episode_len
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        self.track_idx = rng.gen_range(0..self.tracks.len());
        self.t = 0;
        self.episode_rng = rng::stream_indexed(self.noise_root, "episode", self.episodes_started);
        self.episodes_started += 1;
        Ok(())
    }

    fn step(&mut self, action: usize) -> Result<EnvStep> {
        if self.t >= self.config.episode_len {
            return Err(CoreError::EpisodeState("episode exhausted".into()));
        }
        if action >= self.layout.cameras.len() {
            return Err(CoreError::InvalidConfig(format!("camera {action} out of range")));
        }
        let pos = self.tracks[self.track_idx].positions[self.t];
        self.t += 1;
        let obs = sample_observation(
            &self.config,
            &self.layout.cameras[action],
            pos,
            &mut self.episode_rng,
        );
        let extent = self.extent();
        let symbol = axis_obs_symbol(&obs, self.axis, extent);
        let mut obs_encoding = vec![0.0; extent + 1];
        obs_encoding[symbol] = 1.0;
        Ok(EnvStep {
            obs_encoding,
            label: self.axis.of(pos),
            non_null: !obs.is_null(),
        })
    }
}

/// Glimpse-attention task: actions are patches, the observation encoding
/// is the composited partial image, the label is the image class.
pub struct AttentionDanEnv {
    dataset: GlyphDataset,
    pool: Vec<usize>,
    spec: GlimpseSpec,
    state: Option<AttentionState>,
}

impl AttentionDanEnv {
    pub fn new(dataset: GlyphDataset, spec: GlimpseSpec, split: SplitChoice) -> Result<Self> {
        dataset.validate()?;
        spec.validate(dataset.width, dataset.height)?;
        let pool = match split {
            SplitChoice::Train => dataset.train_idx.clone(),
            SplitChoice::Test => dataset.test_idx.clone(),
        };
        if pool.is_empty() {
            return Err(CoreError::EmptyInput("dataset split"));
        }
        Ok(AttentionDanEnv { dataset, pool, spec, state: None })
    }
}

impl DanEnv for AttentionDanEnv {
    fn n_actions(&self) -> usize {
        self.spec.n_patches()
    }

    fn n_classes(&self) -> usize {
        self.dataset.n_classes
    }

    fn obs_len(&self) -> usize {
        self.dataset.width * self.dataset.height
    }

    fn episode_len(&self) -> usize {
        self.spec.episode_len
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        let idx = self.pool[rng.gen_range(0..self.pool.len())];
        self.state = Some(AttentionState::new(&self.dataset, idx, self.spec)?);
        Ok(())
    }

    fn step(&mut self, action: usize) -> Result<EnvStep> {
        let state = self
            .state
            .as_mut()
            .ok_or_else(|| CoreError::EpisodeState("reset() not called".into()))?;
        let (composite, label) = state.step(action)?;
        Ok(EnvStep {
            obs_encoding: composite.to_vec(),
            label: usize::from(label),
            non_null: true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::make_glyph_dataset;
    use crate::tracking::{default_layout, generate_dataset};

    #[test]
    fn tracking_env_encodings() {
        let config = GridConfig::default();
        let layout = default_layout(&config).unwrap();
        let (train, _) = generate_dataset(&config, 20, 1).unwrap();
        let mut env = TrackingAxisEnv::new(config, layout, train, Axis::X, 3).unwrap();
        assert_eq!(env.n_actions(), 4);
        assert_eq!(env.n_classes(), 10);
        assert_eq!(env.obs_len(), 11);
        let mut rng = rng::stream(0, "reset");
        env.reset(&mut rng).unwrap();
        for _ in 0..env.episode_len() {
            let step = env.step(1).unwrap();
            assert_eq!(step.obs_encoding.iter().sum::<f64>(), 1.0, "one-hot encoding");
            assert!(step.label < 10);
            // null symbol is the last slot
            if !step.non_null {
                assert_eq!(step.obs_encoding[10], 1.0);
            }
        }
        assert!(env.step(0).is_err());
    }

    #[test]
    fn attention_env_composite_grows() {
        let ds = make_glyph_dataset(1, 4, 0.0).unwrap();
        let mut env = AttentionDanEnv::new(ds, GlimpseSpec::default(), SplitChoice::Train).unwrap();
        assert_eq!(env.n_actions(), 16);
        assert_eq!(env.obs_len(), 144);
        let mut rng = rng::stream(0, "reset");
        env.reset(&mut rng).unwrap();
        let a = env.step(0).unwrap();
        let b = env.step(1).unwrap();
        let on_a = a.obs_encoding.iter().filter(|&&v| v != 0.0).count();
        let on_b = b.obs_encoding.iter().filter(|&&v| v != 0.0).count();
        assert!(on_b >= on_a);
        assert!(b.non_null);
    }

    #[test]
    fn env_resets_are_deterministic_per_stream() {
        let config = GridConfig::default();
        let layout = default_layout(&config).unwrap();
        let (train, _) = generate_dataset(&config, 20, 1).unwrap();
        let mut e1 = TrackingAxisEnv::new(config, layout.clone(), train.clone(), Axis::X, 3).unwrap();
        let mut e2 = TrackingAxisEnv::new(config, layout, train, Axis::X, 3).unwrap();
        let mut r1 = rng::stream(5, "env");
        let mut r2 = rng::stream(5, "env");
        for _ in 0..3 {
            e1.reset(&mut r1).unwrap();
            e2.reset(&mut r2).unwrap();
            for _ in 0..12 {
                let s1 = e1.step(2).unwrap();
                let s2 = e2.step(2).unwrap();
                assert_eq!(s1.obs_encoding, s2.obs_encoding);
                assert_eq!(s1.label, s2.label);
            }
        }
    }
}
