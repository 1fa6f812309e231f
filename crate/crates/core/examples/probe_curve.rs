// scratch probe: dump the per-axis DAN learning curve
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
    let mut cfg = TrainConfig::tracking_desk();
    cfg.episodes = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(3000);
    for arg in std::env::args().skip(2) {
        let (k, v) = arg.split_once('=').unwrap();
        match k {
            "lr" => cfg.lr = v.parse().unwrap(),
            "sync" => cfg.target_sync_period = v.parse().unwrap(),
            "l2" => cfg.l2_scale = v.parse().unwrap(),
            "eps" => { cfg.epsilon_final = v.parse().unwrap(); cfg.epsilon_initial = cfg.epsilon_final; }
            "cap" => cfg.replay_capacity = v.parse().unwrap(),
            _ => panic!("unknown override {k}"),
        }
    }
    let out = run_tracking_variant(TrackingVariant::Dan, &task, &cfg, 100, 7).unwrap();
    let curves = out.curves.unwrap();
    println!("x-axis curve: episode reward accuracy td ce");
    for p in &curves[0].curve {
        println!(
            "  {:5} {:6.3} {:5.3} td {:8.4} ce {:7.4}",
            p.episode, p.mean_eval_reward, p.mean_eval_accuracy, p.td_loss, p.ce_loss
        );
    }
    println!("combined final: {:.3}", out.final_reward);
}
