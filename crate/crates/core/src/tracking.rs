//! Synthetic camera-selection tracking environment: a walker on a grid,
//! rectangular camera footprints with miss/displacement noise, factored
//! per-axis models for exact filtering, and multi-person episodes.

use crate::belief::DiscreteModel;
use crate::rng;
use crate::{CoreError, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Environment geometry and noise parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    pub n_cameras: usize,
    pub episode_len: usize,
    /// Probability that each axis repeats its previous unit move.
    pub walk_persistence: f64,
    /// Probability that a covered reading is displaced to a neighboring
    /// cell (independently per axis).
    pub noise_adjacent: f64,
    /// Probability that a covered person yields a null observation.
    pub miss_prob: f64,
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 {
            return Err(CoreError::InvalidConfig("grid must be at least 2x2".into()));
        }
        if self.episode_len < 1 {
            return Err(CoreError::InvalidConfig("episode_len must be >= 1".into()));
        }
        if self.n_cameras < 1 {
            return Err(CoreError::InvalidConfig("need at least one camera".into()));
        }
        for (name, p) in [
            ("walk_persistence", self.walk_persistence),
            ("noise_adjacent", self.noise_adjacent),
            ("miss_prob", self.miss_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(CoreError::InvalidConfig(format!("{name}={p} outside [0,1]")));
            }
        }
        Ok(())
    }
}

impl Default for GridConfig {
    /// Desk-scale defaults: 10x10 grid, 4 cameras, 12-step episodes.
    /// Persistence 0 keeps the per-cell walk Markov, so the factored model
    /// filters it exactly.
    fn default() -> Self {
        GridConfig {
            width: 10,
            height: 10,
            n_cameras: 4,
            episode_len: 12,
            walk_persistence: 0.0,
            noise_adjacent: 0.1,
            miss_prob: 0.25,
        }
    }
}

/// Axis-aligned camera footprint, inclusive cell coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub id: usize,
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl CameraSpec {
    pub fn covers(&self, x: usize, y: usize) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }

    pub fn covers_axis(&self, axis: Axis, v: usize) -> bool {
        match axis {
            Axis::X => (self.x0..=self.x1).contains(&v),
            Axis::Y => (self.y0..=self.y1).contains(&v),
        }
    }

    fn axis_range(&self, axis: Axis) -> (usize, usize) {
        match axis {
            Axis::X => (self.x0, self.x1),
            Axis::Y => (self.y0, self.y1),
        }
    }
}

/// A camera layout over a grid; serializable for reproducibility.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraLayout {
    pub grid: GridDims,
    pub cameras: Vec<CameraSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDims {
    pub w: usize,
    pub h: usize,
}

impl CameraLayout {
    pub fn validate(&self) -> Result<()> {
        if self.cameras.is_empty() {
            return Err(CoreError::InvalidConfig("layout has no cameras".into()));
        }
        for c in &self.cameras {
            if c.x1 >= self.grid.w || c.y1 >= self.grid.h || c.x0 > c.x1 || c.y0 > c.y1 {
                return Err(CoreError::InvalidConfig(format!(
                    "camera {} rectangle outside {}x{} grid",
                    c.id, self.grid.w, self.grid.h
                )));
            }
        }
        Ok(())
    }

    /// Fraction of grid cells covered by at least one camera.
    pub fn coverage_fraction(&self) -> f64 {
        let mut covered = 0usize;
        for x in 0..self.grid.w {
            for y in 0..self.grid.h {
                if self.cameras.iter().any(|c| c.covers(x, y)) {
                    covered += 1;
                }
            }
        }
        covered as f64 / (self.grid.w * self.grid.h) as f64
    }
}

/// Default layout generator: a partition tiling. The grid splits into a
/// near-square arrangement of tiles, one camera per tile. With a square
/// camera count the tiles are disjoint and cover the whole grid, so a
/// wrongly pointed camera returns null and the agent has to anticipate
/// which region the walker occupies.
pub fn default_layout(config: &GridConfig) -> Result<CameraLayout> {
    config.validate()?;
    let n = config.n_cameras;
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let mut cameras = Vec::with_capacity(n);
    'outer: for r in 0..rows {
        for c in 0..cols {
            if cameras.len() == n {
                break 'outer;
            }
            let x0 = c * config.width / cols;
            let x1 = ((c + 1) * config.width / cols - 1).clamp(x0, config.width - 1);
            let y0 = r * config.height / rows;
            let y1 = ((r + 1) * config.height / rows - 1).clamp(y0, config.height - 1);
            let id = cameras.len();
            cameras.push(CameraSpec { id, x0, y0, x1, y1 });
        }
    }
    let layout = CameraLayout {
        grid: GridDims { w: config.width, h: config.height },
        cameras,
    };
    layout.validate()?;
    Ok(layout)
}

/// A person's ground-truth trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Track {
    pub positions: Vec<(usize, usize)>,
}

/// What one camera reports about one person at one step. Both axes are
/// null together (person missed or outside the footprint).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvObservation {
    pub camera_id: usize,
    pub reading_x: Option<usize>,
    pub reading_y: Option<usize>,
}

impl EnvObservation {
    pub fn is_null(&self) -> bool {
        self.reading_x.is_none()
    }
}

/// An axis of the grid; positions and models factor over the two axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn extent(&self, config: &GridConfig) -> usize {
        match self {
            Axis::X => config.width,
            Axis::Y => config.height,
        }
    }

    pub fn of(&self, pos: (usize, usize)) -> usize {
        match self {
            Axis::X => pos.0,
            Axis::Y => pos.1,
        }
    }
}

fn step_axis(pos: usize, mv: i64, extent: usize) -> usize {
    (pos as i64 + mv).clamp(0, extent as i64 - 1) as usize
}

/// Generate persistent-random-walk tracks, deterministically from the
/// seed, split 80/20 into train and test.
///
/// Each axis starts uniform and independently either repeats its previous
/// attempted unit move (probability `walk_persistence`) or redraws it
/// uniformly from {-1, 0, +1}; positions clamp at the borders.
pub fn generate_dataset(
    config: &GridConfig,
    n_tracks: usize,
    seed: u64,
) -> Result<(Vec<Track>, Vec<Track>)> {
    config.validate()?;
    if n_tracks < 2 {
        return Err(CoreError::InvalidConfig("need at least 2 tracks".into()));
    }
    let tracks: Vec<Track> = (0..n_tracks)
        .map(|i| generate_track(config, rng::derive_seed_indexed(seed, "track", i as u64)))
        .collect();
    let n_train = n_tracks * 4 / 5;
    let mut train = tracks;
    let test = train.split_off(n_train);
    Ok((train, test))
}

fn generate_track(config: &GridConfig, seed: u64) -> Track {
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = rng.gen_range(0..config.width);
    let mut y = rng.gen_range(0..config.height);
    let mut mv_x: i64 = rng.gen_range(-1..=1);
    let mut mv_y: i64 = rng.gen_range(-1..=1);
    let mut positions = Vec::with_capacity(config.episode_len);
    positions.push((x, y));
    for _ in 1..config.episode_len {
        if rng.gen_range(0.0..1.0) >= config.walk_persistence {
            mv_x = rng.gen_range(-1..=1);
        }
        if rng.gen_range(0.0..1.0) >= config.walk_persistence {
            mv_y = rng.gen_range(-1..=1);
        }
        x = step_axis(x, mv_x, config.width);
        y = step_axis(y, mv_y, config.height);
        positions.push((x, y));
    }
    Track { positions }
}

/// A live single-person episode over a fixed track.
pub struct Episode<'a> {
    config: &'a GridConfig,
    layout: &'a CameraLayout,
    track: &'a Track,
    t: usize,
    rng: ChaCha8Rng,
}

impl<'a> Episode<'a> {
    pub fn new(
        config: &'a GridConfig,
        layout: &'a CameraLayout,
        track: &'a Track,
        noise_seed: u64,
    ) -> Result<Self> {
        use rand_chacha::rand_core::SeedableRng;
        config.validate()?;
        layout.validate()?;
        if track.positions.is_empty() {
            return Err(CoreError::InvalidConfig("track has no positions".into()));
        }
        Ok(Episode {
            config,
            layout,
            track,
            t: 0,
            rng: ChaCha8Rng::seed_from_u64(noise_seed),
        })
    }

    pub fn steps_taken(&self) -> usize {
        self.t
    }

    pub fn remaining(&self) -> usize {
        self.track.positions.len() - self.t
    }

    /// Query the chosen camera about the person's current position.
    /// Returns the observation and the true position (the training label).
    pub fn step(&mut self, camera: usize) -> Result<(EnvObservation, (usize, usize))> {
        if self.t >= self.track.positions.len() {
            return Err(CoreError::EpisodeState(format!(
                "episode exhausted after {} steps",
                self.t
            )));
        }
        if camera >= self.layout.cameras.len() {
            return Err(CoreError::InvalidConfig(format!("camera {camera} out of range")));
        }
        let pos = self.track.positions[self.t];
        self.t += 1;
        let obs = sample_observation(self.config, &self.layout.cameras[camera], pos, &mut self.rng);
        Ok((obs, pos))
    }
}

/// Sample what `cam` reports about a person at the given position.
pub fn sample_observation(
    config: &GridConfig,
    cam: &CameraSpec,
    (x, y): (usize, usize),
    rng: &mut ChaCha8Rng,
) -> EnvObservation {
    let null = EnvObservation { camera_id: cam.id, reading_x: None, reading_y: None };
    if !cam.covers(x, y) {
        return null;
    }
    if rng.gen_range(0.0..1.0) < config.miss_prob {
        return null;
    }
    let rx = noisy_axis_reading(x, cam.x0, cam.x1, config.noise_adjacent, rng);
    let ry = noisy_axis_reading(y, cam.y0, cam.y1, config.noise_adjacent, rng);
    EnvObservation { camera_id: cam.id, reading_x: Some(rx), reading_y: Some(ry) }
}

/// With probability `noise`, displace the reading to a uniformly chosen
/// in-coverage neighbor on this axis; otherwise report the true cell.
fn noisy_axis_reading(v: usize, lo: usize, hi: usize, noise: f64, rng: &mut ChaCha8Rng) -> usize {
    if noise <= 0.0 || rng.gen_range(0.0..1.0) >= noise {
        return v;
    }
    let mut neighbors = [0usize; 2];
    let mut n = 0;
    if v > lo {
        neighbors[n] = v - 1;
        n += 1;
    }
    if v < hi {
        neighbors[n] = v + 1;
        n += 1;
    }
    if n == 0 {
        v
    } else {
        neighbors[rng.gen_range(0..n)]
    }
}

/// A multi-person episode: one shared camera choice per step, independent
/// per-person observations.
pub struct MultiEpisode<'a> {
    episodes: Vec<Episode<'a>>,
}

impl<'a> MultiEpisode<'a> {
    pub fn new(
        config: &'a GridConfig,
        layout: &'a CameraLayout,
        tracks: &'a [Track],
        noise_seed: u64,
    ) -> Result<Self> {
        if tracks.is_empty() {
            return Err(CoreError::EmptyInput("tracks"));
        }
        let len = tracks[0].positions.len();
        if tracks.iter().any(|t| t.positions.len() != len) {
            return Err(CoreError::InvalidConfig("tracks must share one length".into()));
        }
        let episodes = tracks
            .iter()
            .enumerate()
            .map(|(i, t)| Episode::new(config, layout, t, rng::derive_seed_indexed(noise_seed, "person", i as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(MultiEpisode { episodes })
    }

    pub fn n_persons(&self) -> usize {
        self.episodes.len()
    }

    pub fn remaining(&self) -> usize {
        self.episodes[0].remaining()
    }

    pub fn step(&mut self, camera: usize) -> Result<Vec<(EnvObservation, (usize, usize))>> {
        self.episodes.iter_mut().map(|e| e.step(camera)).collect()
    }
}

/// Reward variants used by the camera-selection baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageRewardMode {
    /// 1 for any non-null observation.
    Coverage,
    /// 1 if the prediction is correct, 0.2 for an incorrect prediction
    /// with a non-null observation, 0 otherwise.
    DanPlusCoverage,
    /// 1 if the prediction is correct, else 0.
    Dan,
}

pub fn coverage_reward(obs: &EnvObservation, prediction_correct: bool, mode: CoverageRewardMode) -> f64 {
    reward_for(!obs.is_null(), prediction_correct, mode)
}

/// The same reward table on bare flags (environments without a null
/// observation pass `non_null = true`).
pub fn reward_for(non_null: bool, prediction_correct: bool, mode: CoverageRewardMode) -> f64 {
    match mode {
        CoverageRewardMode::Coverage => {
            if non_null {
                1.0
            } else {
                0.0
            }
        }
        CoverageRewardMode::DanPlusCoverage => {
            if prediction_correct {
                1.0
            } else if non_null {
                0.2
            } else {
                0.0
            }
        }
        CoverageRewardMode::Dan => {
            if prediction_correct {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Exact per-axis model of the marginal walk and the per-camera axis
/// observations.
///
/// Observation symbols are `0..extent` for cells plus `extent` for null.
/// The coverage test on the other axis is marginalized under the walk's
/// uniform stationary distribution, so the exported model is the exact
/// filter model when `walk_persistence = 0` and the stationary one-step
/// approximation otherwise.
pub fn factored_model(config: &GridConfig, layout: &CameraLayout, axis: Axis) -> Result<DiscreteModel> {
    config.validate()?;
    layout.validate()?;
    let extent = axis.extent(config);
    let other_extent = match axis {
        Axis::X => config.height,
        Axis::Y => config.width,
    };
    let n_obs = extent + 1;
    let null = extent;

    // Marginal one-step walk kernel: uniform attempted move in {-1,0,+1},
    // clamped at the borders.
    let mut transition = vec![0.0; extent * extent];
    for v in 0..extent {
        for mv in -1i64..=1 {
            let next = step_axis(v, mv, extent);
            transition[next * extent + v] += 1.0 / 3.0;
        }
    }

    let mut observations = Vec::with_capacity(layout.cameras.len());
    for cam in &layout.cameras {
        let (lo, hi) = cam.axis_range(axis);
        let (other_lo, other_hi) = cam.axis_range(match axis {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        });
        let other_cover = (other_hi - other_lo + 1) as f64 / other_extent as f64;
        let mut o = vec![0.0; n_obs * extent];
        for v in 0..extent {
            if !(lo..=hi).contains(&v) {
                o[null * extent + v] = 1.0;
                continue;
            }
            let read_prob = other_cover * (1.0 - config.miss_prob);
            o[null * extent + v] = 1.0 - read_prob;
            // displacement mass splits over the in-coverage neighbors
            let mut neighbors = vec![];
            if v > lo {
                neighbors.push(v - 1);
            }
            if v < hi {
                neighbors.push(v + 1);
            }
            if neighbors.is_empty() {
                o[v * extent + v] += read_prob;
            } else {
                o[v * extent + v] += read_prob * (1.0 - config.noise_adjacent);
                let share = read_prob * config.noise_adjacent / neighbors.len() as f64;
                for nb in neighbors {
                    o[nb * extent + v] += share;
                }
            }
        }
        observations.push(o);
    }
    DiscreteModel::new(extent, layout.cameras.len(), n_obs, transition, observations)
}

/// Encode an axis observation as a symbol in `0..=extent` (null last).
pub fn axis_obs_symbol(obs: &EnvObservation, axis: Axis, extent: usize) -> usize {
    let reading = match axis {
        Axis::X => obs.reading_x,
        Axis::Y => obs.reading_y,
    };
    reading.unwrap_or(extent)
}

/// Dataset file format: JSON-lines, one `{track_id, positions}` per line.
pub fn tracks_to_jsonl(tracks: &[Track]) -> Result<String> {
    let mut out = String::new();
    for (i, t) in tracks.iter().enumerate() {
        let line = serde_json::json!({ "track_id": i, "positions": t.positions });
        out.push_str(&serde_json::to_string(&line)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn tracks_from_jsonl(text: &str) -> Result<Vec<Track>> {
    let mut tracks = vec![];
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        #[derive(Deserialize)]
        struct Line {
            #[allow(dead_code)]
            track_id: usize,
            positions: Vec<(usize, usize)>,
        }
        let parsed: Line = serde_json::from_str(line)?;
        tracks.push(Track { positions: parsed.positions });
    }
    if tracks.is_empty() {
        return Err(CoreError::EmptyInput("track dataset"));
    }
    Ok(tracks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::bayes_update;
    use crate::simplex::BeliefVector;

    fn desk() -> (GridConfig, CameraLayout) {
        let config = GridConfig::default();
        let layout = default_layout(&config).unwrap();
        (config, layout)
    }

    #[test]
    fn default_layout_tiles_the_grid() {
        let (_, layout) = desk();
        assert_eq!(layout.cameras.len(), 4);
        assert_eq!(layout.coverage_fraction(), 1.0);
        // quadrants are disjoint for a square camera count
        for a in &layout.cameras {
            for b in &layout.cameras {
                if a.id != b.id {
                    let overlap_x = a.x0 <= b.x1 && b.x0 <= a.x1;
                    let overlap_y = a.y0 <= b.y1 && b.y0 <= a.y1;
                    assert!(!(overlap_x && overlap_y), "cameras {} and {} overlap", a.id, b.id);
                }
            }
        }
        // odd camera counts still produce a valid in-bounds layout
        let config = GridConfig { n_cameras: 5, ..GridConfig::default() };
        let layout = default_layout(&config).unwrap();
        assert_eq!(layout.cameras.len(), 5);
        layout.validate().unwrap();
    }

    #[test]
    fn straight_track_under_full_persistence() {
        let config = GridConfig { walk_persistence: 1.0, ..GridConfig::default() };
        // scan seeds for a track whose first move is horizontal-only
        for i in 0..200u64 {
            let t = generate_track(&config, i);
            let (x0, y0) = t.positions[0];
            let (x1, y1) = t.positions[1];
            if y1 == y0 && x1 == x0 + 1 {
                for w in t.positions.windows(2) {
                    let (ax, ay) = w[0];
                    let (bx, by) = w[1];
                    assert_eq!(by, ay, "vertical drift in persistent track");
                    assert!(bx == ax + 1 || (ax == config.width - 1 && bx == ax));
                }
                return;
            }
        }
        panic!("no horizontal-start track found in 200 seeds");
    }

    #[test]
    fn dataset_is_deterministic_and_split_80_20() {
        let config = GridConfig::default();
        let (train1, test1) = generate_dataset(&config, 500, 9).unwrap();
        let (train2, test2) = generate_dataset(&config, 500, 9).unwrap();
        assert_eq!(train1, train2);
        assert_eq!(test1, test2);
        assert_eq!(train1.len(), 400);
        assert_eq!(test1.len(), 100);
    }

    #[test]
    fn track_steps_are_unit_moves() {
        let config = GridConfig { walk_persistence: 0.4, ..GridConfig::default() };
        let (train, _) = generate_dataset(&config, 50, 3).unwrap();
        for t in &train {
            assert_eq!(t.positions.len(), config.episode_len);
            for w in t.positions.windows(2) {
                let dx = (w[1].0 as i64 - w[0].0 as i64).abs();
                let dy = (w[1].1 as i64 - w[0].1 as i64).abs();
                assert!(dx <= 1 && dy <= 1);
            }
        }
    }

    #[test]
    fn walk_kernel_matches_spec_rate() {
        // with persistence 0 every step is uniform over {-1,0,1} per axis;
        // chi-square-style check on the empirical move distribution away
        // from walls
        let config = GridConfig {
            width: 30,
            height: 30,
            episode_len: 40,
            walk_persistence: 0.0,
            ..GridConfig::default()
        };
        let (train, test) = generate_dataset(&config, 500, 21).unwrap();
        let mut counts = [[0usize; 3]; 2];
        let mut total = 0usize;
        for t in train.iter().chain(test.iter()) {
            for w in t.positions.windows(2) {
                let interior = |v: usize, ext: usize| v > 0 && v < ext - 1;
                if interior(w[0].0, config.width) && interior(w[0].1, config.height) {
                    let dx = (w[1].0 as i64 - w[0].0 as i64 + 1) as usize;
                    let dy = (w[1].1 as i64 - w[0].1 as i64 + 1) as usize;
                    counts[0][dx] += 1;
                    counts[1][dy] += 1;
                    total += 1;
                }
            }
        }
        for axis in counts {
            for c in axis {
                let rate = c as f64 / total as f64;
                assert!((rate - 1.0 / 3.0).abs() < 0.02, "move rate {rate}");
            }
        }
    }

    #[test]
    fn persistence_rate_matches_config() {
        // fraction of steps repeating the previous move should be
        // p + (1 - p) / 3 per axis
        let config = GridConfig {
            width: 30,
            height: 30,
            episode_len: 40,
            walk_persistence: 0.6,
            ..GridConfig::default()
        };
        let (train, _) = generate_dataset(&config, 500, 23).unwrap();
        let mut repeats = 0usize;
        let mut total = 0usize;
        for t in &train {
            for w in t.positions.windows(3) {
                let interior = |v: usize| v > 1 && v < 28;
                if interior(w[0].0) && interior(w[1].0) && interior(w[2].0) {
                    let d1 = w[1].0 as i64 - w[0].0 as i64;
                    let d2 = w[2].0 as i64 - w[1].0 as i64;
                    if d1 == d2 {
                        repeats += 1;
                    }
                    total += 1;
                }
            }
        }
        let rate = repeats as f64 / total as f64;
        let expected = 0.6 + 0.4 / 3.0;
        assert!((rate - expected).abs() < 0.02, "repeat rate {rate} vs {expected}");
    }

    #[test]
    fn observations_outside_coverage_are_null() {
        let (config, layout) = desk();
        // person in quadrant 3, camera 0 pointed at quadrant 0
        let track = Track { positions: vec![(9, 9); 12] };
        assert!(!layout.cameras[0].covers(9, 9));
        let mut ep = Episode::new(&config, &layout, &track, 5).unwrap();
        let (obs, pos) = ep.step(0).unwrap();
        assert!(obs.is_null());
        assert_eq!(pos, (9, 9));
    }

    #[test]
    fn noise_free_readings_are_exact_and_in_coverage() {
        let config = GridConfig { noise_adjacent: 0.0, miss_prob: 0.0, ..GridConfig::default() };
        let layout = default_layout(&config).unwrap();
        let cam = layout.cameras[0];
        let inside = (cam.x0 + 1, cam.y0 + 1);
        let track = Track { positions: vec![inside; 12] };
        let mut ep = Episode::new(&config, &layout, &track, 7).unwrap();
        for _ in 0..12 {
            let (obs, pos) = ep.step(0).unwrap();
            assert_eq!(obs.reading_x, Some(pos.0));
            assert_eq!(obs.reading_y, Some(pos.1));
            assert!(cam.covers(obs.reading_x.unwrap(), obs.reading_y.unwrap()));
        }
        assert!(ep.step(0).is_err(), "stepping past the end must fail");
    }

    #[test]
    fn displacement_rate_matches_config() {
        let config = GridConfig { noise_adjacent: 0.2, miss_prob: 0.0, ..GridConfig::default() };
        let layout = default_layout(&config).unwrap();
        let cam = layout.cameras[0];
        let inside = ((cam.x0 + cam.x1) / 2, (cam.y0 + cam.y1) / 2);
        let mut displaced = 0usize;
        let mut total = 0usize;
        for trial in 0..10_000u64 {
            let track = Track { positions: vec![inside] };
            let mut ep = Episode::new(&config, &layout, &track, trial).unwrap();
            let (obs, _) = ep.step(0).unwrap();
            if obs.reading_x != Some(inside.0) {
                displaced += 1;
            }
            total += 1;
        }
        let rate = displaced as f64 / total as f64;
        assert!((rate - 0.2).abs() < 0.015, "x displacement rate {rate}");
    }

    #[test]
    fn multi_person_emits_independent_observations() {
        let config = GridConfig { noise_adjacent: 0.0, miss_prob: 0.0, ..GridConfig::default() };
        let layout = default_layout(&config).unwrap();
        let cam = layout.cameras[0];
        let covered = (cam.x0, cam.y0);
        // outside camera 0 but inside the grid (other quadrants)
        let uncovered = (9usize, 9usize);
        assert!(!cam.covers(uncovered.0, uncovered.1));
        let tracks = vec![
            Track { positions: vec![covered; 3] },
            Track { positions: vec![uncovered; 3] },
            Track { positions: vec![uncovered; 3] },
        ];
        let mut ep = MultiEpisode::new(&config, &layout, &tracks, 11).unwrap();
        let results = ep.step(0).unwrap();
        assert_eq!(results.len(), 3);
        assert!(!results[0].0.is_null());
        assert!(results[1].0.is_null());
        assert!(results[2].0.is_null());

        // mismatched lengths rejected
        let bad = vec![Track { positions: vec![covered; 3] }, Track { positions: vec![covered; 2] }];
        assert!(MultiEpisode::new(&config, &layout, &bad, 0).is_err());
    }

    #[test]
    fn coverage_reward_table() {
        let non_null = EnvObservation { camera_id: 0, reading_x: Some(1), reading_y: Some(1) };
        let null = EnvObservation { camera_id: 0, reading_x: None, reading_y: None };
        assert_eq!(coverage_reward(&non_null, false, CoverageRewardMode::DanPlusCoverage), 0.2);
        assert_eq!(coverage_reward(&null, false, CoverageRewardMode::Coverage), 0.0);
        assert_eq!(coverage_reward(&non_null, true, CoverageRewardMode::Dan), 1.0);
        assert_eq!(coverage_reward(&non_null, false, CoverageRewardMode::Dan), 0.0);
        assert_eq!(coverage_reward(&non_null, true, CoverageRewardMode::Coverage), 1.0);
    }

    #[test]
    fn factored_model_shape_and_null_column() {
        let (config, layout) = desk();
        let m = factored_model(&config, &layout, Axis::X).unwrap();
        assert_eq!(m.n_targets(), 10);
        assert_eq!(m.n_obs(), 11);
        assert_eq!(m.n_actions(), 4);
        // column outside camera 0's x-range is all-null
        let cam = layout.cameras[0];
        let outside = if cam.x0 > 0 { 0 } else { cam.x1 + 1 };
        assert_eq!(m.observation(0, 10, outside), 1.0);
    }

    #[test]
    fn filter_on_simulated_episodes_keeps_truth_supported() {
        let (config, layout) = desk();
        let model = factored_model(&config, &layout, Axis::X).unwrap();
        let (train, _) = generate_dataset(&config, 200, 13).unwrap();
        let mut checked = 0usize;
        for (i, track) in train.iter().enumerate() {
            let mut ep = Episode::new(&config, &layout, track, 1000 + i as u64).unwrap();
            let mut b = BeliefVector::uniform(config.width).unwrap();
            for t in 0..config.episode_len {
                let cam = (i + t) % layout.cameras.len();
                let (obs, pos) = ep.step(cam).unwrap();
                let z = axis_obs_symbol(&obs, Axis::X, config.width);
                b = bayes_update(&b, cam, z, &model).unwrap();
                assert!(b.probs()[pos.0] > 0.0, "true cell got zero probability");
                checked += 1;
            }
        }
        assert_eq!(checked, train.len() * 12);
    }

    #[test]
    fn joint_marginal_matches_factored_stationary_behavior() {
        // empirical x histogram over many simulated steps vs the uniform
        // stationary distribution of the exported kernel
        let config = GridConfig { episode_len: 50, walk_persistence: 0.0, ..GridConfig::default() };
        let (train, _) = generate_dataset(&config, 500, 17).unwrap();
        let mut hist = vec![0.0f64; config.width];
        let mut total = 0.0;
        for t in &train {
            // skip the warm-up to stationarity
            for &(x, _) in t.positions.iter().skip(10) {
                hist[x] += 1.0;
                total += 1.0;
            }
        }
        let tv: f64 = hist
            .iter()
            .map(|h| (h / total - 1.0 / config.width as f64).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.02, "x-marginal TV {tv} from stationary uniform");
    }

    #[test]
    fn jsonl_round_trip() {
        let config = GridConfig::default();
        let (train, _) = generate_dataset(&config, 10, 1).unwrap();
        let text = tracks_to_jsonl(&train).unwrap();
        let back = tracks_from_jsonl(&text).unwrap();
        assert_eq!(train, back);
    }

    #[test]
    fn layout_json_round_trip() {
        let (_, layout) = desk();
        let text = serde_json::to_string(&layout).unwrap();
        let back: CameraLayout = serde_json::from_str(&text).unwrap();
        assert_eq!(back.cameras, layout.cameras);
    }
}
