// scratch probe: DAN-only mean over chosen seeds with config overrides
use dan_core::dan::*;
use dan_core::tracking::*;

fn main() {
    let mut grid = GridConfig::default();
    if let Ok(v) = std::env::var("PERSIST") { grid.walk_persistence = v.parse().unwrap(); }
    if let Ok(v) = std::env::var("MISS") { grid.miss_prob = v.parse().unwrap(); }
    let layout = default_layout(&grid).unwrap();
    let (train_tracks, test_tracks) = generate_dataset(&grid, 600, 99).unwrap();
    let mut cfg = TrainConfig::tracking_desk();
    let mut variant = TrackingVariant::Dan;
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').unwrap();
        match k {
            "lr" => cfg.lr = v.parse().unwrap(),
            "sync" => cfg.target_sync_period = v.parse().unwrap(),
            "eps" => { cfg.epsilon_final = v.parse().unwrap(); cfg.epsilon_initial = cfg.epsilon_final; }
            "epsinit" => { cfg.epsilon_initial = 1.0; cfg.epsilon_initial_episodes = v.parse().unwrap(); }
            "evaleps" => cfg.eval_episodes = v.parse().unwrap(),
            "warmup" => cfg.warmup_steps = v.parse().unwrap(),
            "upd" => cfg.update_period = v.parse().unwrap(),
            "cap" => cfg.replay_capacity = v.parse().unwrap(),
            "variant" => variant = match v { "dpc" => TrackingVariant::DanPlusCoverage, "cov" => TrackingVariant::Coverage, _ => TrackingVariant::Dan },
            _ => panic!("unknown {k}"),
        }
    }
    let seeds: Vec<u64> = vec![1000, 1001, 1005, 1006];
    let mut sizes = ModelSizes::default();
    if let Ok(v) = std::env::var("REC") { sizes.recurrent = v.parse().unwrap(); }
    if let Ok(v) = std::env::var("DENSE") { sizes.dense = v.split(',').map(|x| x.parse().unwrap()).collect(); }
    let task = TrackingTask { grid: &grid, layout: &layout, train_tracks: &train_tracks, test_tracks: &test_tracks, sizes };
    let scores: Vec<f64> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds.iter().map(|&s| {
            let (task, cfg) = (task.clone(), cfg.clone());
            scope.spawn(move || run_tracking_variant(variant, &task, &cfg, 200, s).unwrap().final_reward)
        }).collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    println!("mean {mean:.3} {scores:.2?}");
}
