// scratch probe: variant means across seeds
use dan_core::dan::*;
use dan_core::tracking::*;

fn main() {
    let grid = GridConfig::default();
    let layout = default_layout(&grid).unwrap();
    let (train_tracks, test_tracks) = generate_dataset(&grid, 600, 99).unwrap();
    let mut cfg = TrainConfig::tracking_desk();
    cfg.episodes = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(3000);
    let n_seeds: u64 = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(4);
    let mut rec: usize = 32;
    let mut dense: Vec<usize> = vec![32, 32];
    let mut variants = vec![
        TrackingVariant::Dan,
        TrackingVariant::DanPlusCoverage,
        TrackingVariant::Coverage,
        TrackingVariant::RandomPolicy,
        TrackingVariant::ExactOracle,
    ];
    for arg in std::env::args().skip(3) {
        if arg == "danonly" {
            variants = vec![TrackingVariant::Dan, TrackingVariant::RandomPolicy];
            continue;
        }
        let (k, v) = arg.split_once('=').unwrap();
        match k {
            "lr" => cfg.lr = v.parse().unwrap(),
            "sync" => cfg.target_sync_period = v.parse().unwrap(),
            "l2" => cfg.l2_scale = v.parse().unwrap(),
            "clip" => cfg.grad_clip = v.parse().unwrap(),
            "eps" => { cfg.epsilon_final = v.parse().unwrap(); cfg.epsilon_initial = cfg.epsilon_final; }
            "rec" => rec = v.parse().unwrap(),
            "dense" => dense = v.split(',').map(|p| p.parse().unwrap()).collect(),
            _ => panic!("unknown override {k}"),
        }
    }
    let results: Vec<(String, Vec<f64>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = variants
            .iter()
            .map(|&variant| {
                let grid = &grid;
                let layout = &layout;
                let train_tracks = &train_tracks;
                let test_tracks = &test_tracks;
                let cfg = &cfg;
                let dense = dense.clone();
                scope.spawn(move || {
                    let task = TrackingTask {
                        grid,
                        layout,
                        train_tracks,
                        test_tracks,
                        sizes: ModelSizes { dense: dense.clone(), recurrent: rec },
                    };
                    let scores: Vec<f64> = (0..n_seeds)
                        .map(|s| {
                            run_tracking_variant(variant, &task, cfg, 150, 1000 + s)
                                .unwrap()
                                .final_reward
                        })
                        .collect();
                    (format!("{variant:?}"), scores)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for (name, scores) in results {
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        println!("{name:16} mean {mean:.3}  {scores:.3?}");
    }
}
