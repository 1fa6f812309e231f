// scratch probe: where does DAN lose accuracy - hit rate or prediction?
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
    cfg.lr = 5e-4;
    cfg.target_sync_period = 1000;
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').unwrap();
        match k {
            "upd" => cfg.update_period = v.parse().unwrap(),
            "lr" => cfg.lr = v.parse().unwrap(),
            "batch" => cfg.minibatch_episodes = v.parse().unwrap(),
            "eps" => { cfg.epsilon_final = v.parse().unwrap(); cfg.epsilon_initial = cfg.epsilon_final; }
            "epsinit" => { cfg.epsilon_initial = v.parse().unwrap(); cfg.epsilon_initial_episodes = 300; }
            "cap" => cfg.replay_capacity = v.parse().unwrap(),
            "trace" => cfg.trace_len = v.parse().unwrap(),
            "burn" => cfg.burn_in = v.parse().unwrap(),
            "l2" => cfg.l2_scale = v.parse().unwrap(),
            "sync" => cfg.target_sync_period = v.parse().unwrap(),
            "gamma" => cfg.gamma = v.parse().unwrap(),
            "recompute" => cfg.recompute_reward_on_replay = v.parse().unwrap(),
            "warmup" => cfg.warmup_steps = v.parse().unwrap(),
            _ => panic!("unknown {k}"),
        }
    }
    let out = run_tracking_variant(TrackingVariant::Dan, &task, &cfg, 150, 1000).unwrap();
    let curves = out.curves.unwrap();
    for (axis, c) in ["x", "y"].iter().zip(curves.iter()) {
        let last = c.eval_history.last().unwrap();
        println!(
            "{axis}: acc {:.3} hit-rate {:.3} (reward {:.2})",
            last.1.accuracy,
            last.1.coverage_reward / 12.0,
            last.1.continuous_reward
        );
    }
    println!("combined {:.3}", out.final_reward);
}
