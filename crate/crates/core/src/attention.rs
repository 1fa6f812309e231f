//! Discrete glimpse-attention environment: a static labelled image is
//! revealed patch by patch, and the agent is rewarded for predicting its
//! class either every step or only at the episode's end.

use crate::rng;
use crate::{CoreError, Result};
use base64::Engine;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A labelled grayscale image dataset with a train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphDataset {
    pub n_classes: usize,
    pub width: usize,
    pub height: usize,
    /// Row-major pixels in [0, 1], one vec per image.
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

impl GlyphDataset {
    pub fn validate(&self) -> Result<()> {
        if self.images.len() != self.labels.len() {
            return Err(CoreError::LengthMismatch {
                expected: self.images.len(),
                got: self.labels.len(),
            });
        }
        let px = self.width * self.height;
        for img in &self.images {
            if img.len() != px {
                return Err(CoreError::ShapeMismatch {
                    context: "glyph image",
                    expected: px,
                    got: img.len(),
                });
            }
        }
        for &l in &self.labels {
            if usize::from(l) >= self.n_classes {
                return Err(CoreError::LabelOutOfRange {
                    label: usize::from(l),
                    n_classes: self.n_classes,
                });
            }
        }
        for idx in self.train_idx.iter().chain(&self.test_idx) {
            if *idx >= self.images.len() {
                return Err(CoreError::InvalidConfig(format!("split index {idx} out of range")));
            }
        }
        if self.train_idx.iter().any(|i| self.test_idx.contains(i)) {
            return Err(CoreError::InvalidConfig("train/test overlap".into()));
        }
        Ok(())
    }
}

/// How the image is tiled into glimpse patches and how long an episode is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlimpseSpec {
    pub patch_rows: usize,
    pub patch_cols: usize,
    pub episode_len: usize,
}

impl Default for GlimpseSpec {
    fn default() -> Self {
        GlimpseSpec { patch_rows: 4, patch_cols: 4, episode_len: 12 }
    }
}

impl GlimpseSpec {
    pub fn n_patches(&self) -> usize {
        self.patch_rows * self.patch_cols
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        if self.n_patches() < 2 {
            return Err(CoreError::InvalidConfig("need at least 2 patches".into()));
        }
        if self.episode_len < 1 {
            return Err(CoreError::InvalidConfig("episode_len must be >= 1".into()));
        }
        if width % self.patch_cols != 0 || height % self.patch_rows != 0 {
            return Err(CoreError::InvalidConfig(format!(
                "{width}x{height} image not tiled exactly by {}x{} patches",
                self.patch_rows, self.patch_cols
            )));
        }
        Ok(())
    }
}

/// Ten fixed digit-like 12x12 stroke patterns.
const BASE_GLYPHS: [[&str; 12]; 10] = [
    [
        "............",
        "...######...",
        "..##....##..",
        "..##....##..",
        "..##....##..",
        "..##....##..",
        "..##....##..",
        "..##....##..",
        "..##....##..",
        "..##....##..",
        "...######...",
        "............",
    ],
    [
        "............",
        ".....##.....",
        "....###.....",
        "...####.....",
        ".....##.....",
        ".....##.....",
        ".....##.....",
        ".....##.....",
        ".....##.....",
        ".....##.....",
        "...######...",
        "............",
    ],
    [
        "............",
        "..#######...",
        ".........#..",
        "........##..",
        "........##..",
        "......##....",
        "....##......",
        "...##.......",
        "..##........",
        "..##........",
        "..########..",
        "............",
    ],
    [
        "............",
        "..#######...",
        "........##..",
        "........##..",
        "........##..",
        "....#####...",
        "........##..",
        "........##..",
        "........##..",
        "........##..",
        "..#######...",
        "............",
    ],
    [
        "............",
        "..##....##..",
        "..##....##..",
        "..##....##..",
        "..##....##..",
        "..########..",
        "........##..",
        "........##..",
        "........##..",
        "........##..",
        "........##..",
        "............",
    ],
    [
        "............",
        "..########..",
        "..##........",
        "..##........",
        "..##........",
        "..#######...",
        ".........#..",
        "........##..",
        "........##..",
        "........##..",
        "..#######...",
        "............",
    ],
    [
        "............",
        "...######...",
        "..##........",
        "..##........",
        "..##........",
        "..#######...",
        "..##....##..",
        "..##....##..",
        "..##....##..",
        "..##....##..",
        "...######...",
        "............",
    ],
    [
        "............",
        "..########..",
        "........##..",
        ".......##...",
        ".......##...",
        "......##....",
        "......##....",
        ".....##.....",
        ".....##.....",
        "....##......",
        "....##......",
        "............",
    ],
    [
        "............",
        "...######...",
        "..##....##..",
        "..##....##..",
        "...######...",
        "...######...",
        "..##....##..",
        "..##....##..",
        "..##....##..",
        "..##....##..",
        "...######...",
        "............",
    ],
    [
        "............",
        "...######...",
        "..##....##..",
        "..##....##..",
        "..##....##..",
        "...#######..",
        "........##..",
        "........##..",
        "........##..",
        "........##..",
        "...######...",
        "............",
    ],
];

/// Generate the synthetic glyph dataset: `n_per_class` noisy instances of
/// each of the 10 base glyphs, each pixel flipped with probability
/// `pixel_noise`, split 80/20 per class. Deterministic per seed.
pub fn make_glyph_dataset(seed: u64, n_per_class: usize, pixel_noise: f64) -> Result<GlyphDataset> {
    if n_per_class < 2 {
        return Err(CoreError::InvalidConfig("need at least 2 images per class".into()));
    }
    if !(0.0..=1.0).contains(&pixel_noise) {
        return Err(CoreError::InvalidConfig(format!("pixel_noise {pixel_noise} outside [0,1]")));
    }
    let width = 12;
    let height = 12;
    let bases: Vec<Vec<f64>> = BASE_GLYPHS
        .iter()
        .map(|rows| {
            rows.iter()
                .flat_map(|r| r.chars().map(|c| if c == '#' { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();

    let mut images = Vec::with_capacity(10 * n_per_class);
    let mut labels = Vec::with_capacity(10 * n_per_class);
    let mut train_idx = vec![];
    let mut test_idx = vec![];
    for class in 0..10u8 {
        let n_train = n_per_class * 4 / 5;
        for i in 0..n_per_class {
            let mut rng = rng::stream_indexed(seed, "glyph", u64::from(class) * 1_000_000 + i as u64);
            let mut img = bases[usize::from(class)].clone();
            if pixel_noise > 0.0 {
                for px in &mut img {
                    if rng.gen_range(0.0..1.0) < pixel_noise {
                        *px = 1.0 - *px;
                    }
                }
            }
            let idx = images.len();
            images.push(img);
            labels.push(class);
            if i < n_train {
                train_idx.push(idx);
            } else {
                test_idx.push(idx);
            }
        }
    }
    let ds = GlyphDataset { n_classes: 10, width, height, images, labels, train_idx, test_idx };
    ds.validate()?;
    Ok(ds)
}

/// Episode state: a partially revealed image.
#[derive(Debug, Clone)]
pub struct AttentionState {
    spec: GlimpseSpec,
    width: usize,
    height: usize,
    source: Vec<f64>,
    label: u8,
    revealed: Vec<bool>,
    composite: Vec<f64>,
    step: usize,
}

impl AttentionState {
    pub fn new(dataset: &GlyphDataset, image_index: usize, spec: GlimpseSpec) -> Result<Self> {
        spec.validate(dataset.width, dataset.height)?;
        let source = dataset
            .images
            .get(image_index)
            .ok_or_else(|| CoreError::InvalidConfig(format!("image index {image_index} out of range")))?
            .clone();
        Ok(AttentionState {
            spec,
            width: dataset.width,
            height: dataset.height,
            label: dataset.labels[image_index],
            composite: vec![0.0; source.len()],
            revealed: vec![false; spec.n_patches()],
            source,
            step: 0,
        })
    }

    pub fn label(&self) -> u8 {
        self.label
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn composite(&self) -> &[f64] {
        &self.composite
    }

    pub fn revealed(&self) -> &[bool] {
        &self.revealed
    }

    /// Reveal a patch (idempotent for already-revealed patches) and return
    /// the composited partial image and the true label.
    pub fn step(&mut self, patch: usize) -> Result<(&[f64], u8)> {
        if self.step >= self.spec.episode_len {
            return Err(CoreError::EpisodeState(format!(
                "episode exhausted after {} steps",
                self.step
            )));
        }
        if patch >= self.spec.n_patches() {
            return Err(CoreError::InvalidConfig(format!("patch {patch} out of range")));
        }
        self.step += 1;
        if !self.revealed[patch] {
            self.revealed[patch] = true;
            let ph = self.height / self.spec.patch_rows;
            let pw = self.width / self.spec.patch_cols;
            let r0 = (patch / self.spec.patch_cols) * ph;
            let c0 = (patch % self.spec.patch_cols) * pw;
            for r in r0..r0 + ph {
                for c in c0..c0 + pw {
                    let i = r * self.width + c;
                    self.composite[i] = self.source[i];
                }
            }
        }
        Ok((&self.composite, self.label))
    }
}

/// When prediction rewards are granted within an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardSchedule {
    /// 1 for a correct prediction at every step.
    Continuous,
    /// Reward only at the final step; zero earlier.
    Terminal,
}

pub fn reward_schedule(mode: RewardSchedule, step_idx: usize, episode_len: usize, correct: bool) -> f64 {
    let r = if correct { 1.0 } else { 0.0 };
    match mode {
        RewardSchedule::Continuous => r,
        RewardSchedule::Terminal => {
            if step_idx == episode_len - 1 {
                r
            } else {
                0.0
            }
        }
    }
}

/// JSON container for glyph datasets; pixels quantized to 8-bit and
/// base64-encoded.
#[derive(Serialize, Deserialize)]
struct GlyphDatasetFile {
    version: u32,
    n_classes: usize,
    width: usize,
    height: usize,
    labels: Vec<u8>,
    images_b64: Vec<String>,
    train_idx: Vec<usize>,
    test_idx: Vec<usize>,
}

pub fn glyphs_to_json(ds: &GlyphDataset) -> Result<String> {
    ds.validate()?;
    let engine = base64::engine::general_purpose::STANDARD;
    let images_b64 = ds
        .images
        .iter()
        .map(|img| {
            let bytes: Vec<u8> = img.iter().map(|&v| (v * 255.0).round() as u8).collect();
            engine.encode(bytes)
        })
        .collect();
    let file = GlyphDatasetFile {
        version: 1,
        n_classes: ds.n_classes,
        width: ds.width,
        height: ds.height,
        labels: ds.labels.clone(),
        images_b64,
        train_idx: ds.train_idx.clone(),
        test_idx: ds.test_idx.clone(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn glyphs_from_json(text: &str) -> Result<GlyphDataset> {
    let file: GlyphDatasetFile = serde_json::from_str(text)?;
    if file.version != 1 {
        return Err(CoreError::InvalidConfig(format!("unsupported dataset version {}", file.version)));
    }
    let engine = base64::engine::general_purpose::STANDARD;
    let images = file
        .images_b64
        .iter()
        .map(|b64| {
            let bytes = engine
                .decode(b64)
                .map_err(|e| CoreError::InvalidConfig(format!("bad base64 payload: {e}")))?;
            Ok(bytes.into_iter().map(|b| f64::from(b) / 255.0).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let ds = GlyphDataset {
        n_classes: file.n_classes,
        width: file.width,
        height: file.height,
        images,
        labels: file.labels,
        train_idx: file.train_idx,
        test_idx: file.test_idx,
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_instances_are_identical() {
        let ds = make_glyph_dataset(1, 4, 0.0).unwrap();
        assert_eq!(ds.images.len(), 40);
        assert_eq!(ds.images[0], ds.images[1]);
        assert_ne!(ds.images[0], ds.images[4], "different classes must differ");
    }

    #[test]
    fn dataset_is_deterministic() {
        let a = make_glyph_dataset(9, 5, 0.05).unwrap();
        let b = make_glyph_dataset(9, 5, 0.05).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn flip_rate_matches_noise() {
        let noise = 0.05;
        let ds = make_glyph_dataset(3, 100, noise).unwrap();
        let clean = make_glyph_dataset(3, 2, 0.0).unwrap();
        let mut flipped = 0usize;
        let mut total = 0usize;
        for (img, &label) in ds.images.iter().zip(&ds.labels) {
            let base = &clean.images[usize::from(label) * 2];
            flipped += img.iter().zip(base).filter(|(a, b)| a != b).count();
            total += img.len();
        }
        let rate = flipped as f64 / total as f64;
        assert!((rate - noise).abs() < 0.005, "flip rate {rate}");
    }

    #[test]
    fn split_is_disjoint_80_20() {
        let ds = make_glyph_dataset(2, 10, 0.02).unwrap();
        assert_eq!(ds.train_idx.len(), 80);
        assert_eq!(ds.test_idx.len(), 20);
        ds.validate().unwrap();
    }

    #[test]
    fn glyphs_are_mutually_distinct() {
        let ds = make_glyph_dataset(1, 2, 0.0).unwrap();
        for a in 0..10 {
            for b in (a + 1)..10 {
                let ia = &ds.images[a * 2];
                let ib = &ds.images[b * 2];
                let diff = ia.iter().zip(ib).filter(|(x, y)| x != y).count();
                assert!(diff >= 8, "glyphs {a} and {b} differ in only {diff} pixels");
            }
        }
    }

    #[test]
    fn reveal_tracks_source_and_is_idempotent() {
        let ds = make_glyph_dataset(5, 2, 0.0).unwrap();
        let spec = GlimpseSpec { patch_rows: 4, patch_cols: 4, episode_len: 20 };
        let mut st = AttentionState::new(&ds, 0, spec).unwrap();
        assert!(st.composite().iter().all(|&p| p == 0.0));

        let (after_first, _) = st.step(5).map(|(c, l)| (c.to_vec(), l)).unwrap();
        let (after_repeat, _) = st.step(5).map(|(c, l)| (c.to_vec(), l)).unwrap();
        assert_eq!(after_first, after_repeat, "re-selecting a patch must be idempotent");

        for p in 0..16 {
            st.step(p).unwrap();
        }
        assert_eq!(st.composite(), ds.images[0].as_slice(), "all patches revealed = source");
    }

    #[test]
    fn composite_is_zero_outside_revealed_patches() {
        let ds = make_glyph_dataset(5, 2, 0.0).unwrap();
        let spec = GlimpseSpec::default();
        let mut st = AttentionState::new(&ds, 3, spec).unwrap();
        st.step(0).unwrap();
        // patch 0 is rows 0..3, cols 0..3
        for r in 0..12 {
            for c in 0..12 {
                let i = r * 12 + c;
                if r < 3 && c < 3 {
                    assert_eq!(st.composite()[i], ds.images[3][i]);
                } else {
                    assert_eq!(st.composite()[i], 0.0);
                }
            }
        }
    }

    #[test]
    fn stepping_past_episode_end_fails() {
        let ds = make_glyph_dataset(5, 2, 0.0).unwrap();
        let spec = GlimpseSpec { episode_len: 2, ..GlimpseSpec::default() };
        let mut st = AttentionState::new(&ds, 0, spec).unwrap();
        st.step(0).unwrap();
        st.step(1).unwrap();
        assert!(st.step(2).is_err());
    }

    #[test]
    fn reward_schedule_table() {
        use RewardSchedule::*;
        assert_eq!(reward_schedule(Continuous, 4, 12, true), 1.0);
        assert_eq!(reward_schedule(Continuous, 4, 12, false), 0.0);
        assert_eq!(reward_schedule(Terminal, 11, 12, true), 1.0);
        assert_eq!(reward_schedule(Terminal, 5, 12, true), 0.0);
        let total: f64 = (0..12).map(|t| reward_schedule(Continuous, t, 12, true)).sum();
        assert_eq!(total, 12.0);
    }

    #[test]
    fn patch_tiling_must_divide_image() {
        let ds = make_glyph_dataset(5, 2, 0.0).unwrap();
        let spec = GlimpseSpec { patch_rows: 5, patch_cols: 4, episode_len: 12 };
        assert!(AttentionState::new(&ds, 0, spec).is_err());
    }

    #[test]
    fn json_round_trip_preserves_binary_pixels() {
        let ds = make_glyph_dataset(7, 3, 0.1).unwrap();
        let text = glyphs_to_json(&ds).unwrap();
        let back = glyphs_from_json(&text).unwrap();
        // glyph pixels are 0/1 so 8-bit quantization is lossless
        assert_eq!(ds, back);
    }
}
