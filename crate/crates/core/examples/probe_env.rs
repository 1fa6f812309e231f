// scratch probe: learned Dan/Random means across env geometries
use dan_core::dan::*;
use dan_core::tracking::*;

fn layout_with_size(grid: &GridConfig, size: usize) -> CameraLayout {
    let lo = if std::env::var("FULL").is_ok() { 0 } else { 1 };
    let hi = grid.width - lo - size;
    let mut cameras = vec![];
    for (i, (ax, ay)) in [(lo, lo), (hi, lo), (lo, hi), (hi, hi)].iter().enumerate() {
        cameras.push(CameraSpec { id: i, x0: *ax, y0: *ay, x1: ax + size - 1, y1: ay + size - 1 });
    }
    CameraLayout { grid: GridDims { w: grid.width, h: grid.height }, cameras }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let size: usize = args[1].parse().unwrap();
    let miss: f64 = args[2].parse().unwrap();
    let n_seeds: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(3);
    let rec: usize = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(32);
    let noise: f64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(0.1);
    let persistence: f64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(0.0);
    let grid = GridConfig { miss_prob: miss, noise_adjacent: noise, walk_persistence: persistence, ..GridConfig::default() };
    let layout = layout_with_size(&grid, size);
    eprintln!("coverage fraction: {:.2}", layout.coverage_fraction());
    let (train_tracks, test_tracks) = generate_dataset(&grid, 600, 99).unwrap();
    let mut cfg = TrainConfig::tracking_desk();
    cfg.lr = 5e-4;
    cfg.target_sync_period = 1000;
    let results: Vec<(String, Vec<f64>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = [TrackingVariant::Dan, TrackingVariant::DanPlusCoverage, TrackingVariant::RandomPolicy, TrackingVariant::Coverage]
            .iter()
            .map(|&variant| {
                let (grid, layout, tr, te, cfg) = (&grid, &layout, &train_tracks, &test_tracks, &cfg);
                scope.spawn(move || {
                    let task = TrackingTask {
                        grid,
                        layout,
                        train_tracks: tr,
                        test_tracks: te,
                        sizes: ModelSizes { dense: vec![32, 32], recurrent: rec },
                    };
                    let scores: Vec<f64> = (0..n_seeds)
                        .map(|s| run_tracking_variant(variant, &task, cfg, 200, 1000 + s).unwrap().final_reward)
                        .collect();
                    (format!("{variant:?}"), scores)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let means: Vec<f64> = results
        .iter()
        .map(|(n, s)| {
            let m = s.iter().sum::<f64>() / s.len() as f64;
            println!("{n:14} mean {m:.3} {s:.2?}");
            m
        })
        .collect();
    println!("ratio {:.2}", means[0] / means[1]);
}
