// scratch probe: compare tracking variants at desk scale
use dan_core::dan::*;
use dan_core::tracking::*;

fn main() {
    let grid = GridConfig::default();
    let layout = default_layout(&grid).unwrap();
    let (train_tracks, test_tracks) = generate_dataset(&grid, 600, 99).unwrap();
    let task = TrackingTask {
        grid: &grid,
        layout: &layout,
        train_tracks: &train_tracks,
        test_tracks: &test_tracks,
        sizes: ModelSizes::default(),
    };
    let cfg = TrainConfig::tracking_desk();
    let episodes: usize = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(2000);
    let mut cfg = cfg;
    cfg.episodes = episodes;
    for variant in [
        TrackingVariant::Dan,
        TrackingVariant::DanPlusCoverage,
        TrackingVariant::Coverage,
        TrackingVariant::RandomPolicy,
        TrackingVariant::ExactOracle,
    ] {
        let start = std::time::Instant::now();
        let out = run_tracking_variant(variant, &task, &cfg, 100, 7).unwrap();
        println!(
            "{variant:?}: final prediction-scored reward {:.3} ({:.1}s)",
            out.final_reward,
            start.elapsed().as_secs_f64()
        );
    }
}
