// scratch probe: hit rates of reference camera policies
use dan_core::belief::{bayes_update, expected_info_gain};
use dan_core::rng;
use dan_core::simplex::BeliefVector;
use dan_core::tracking::*;
use rand::Rng;

fn main() {
    let grid = GridConfig::default();
    let layout = default_layout(&grid).unwrap();
    let (_, test) = generate_dataset(&grid, 600, 99).unwrap();
    let model_x = factored_model(&grid, &layout, Axis::X).unwrap();
    let model_y = factored_model(&grid, &layout, Axis::Y).unwrap();
    let episodes = 600;

    for policy in ["oracle", "follow", "const", "random"] {
        let mut pick = rng::stream(11, "pick");
        let mut cam_rng = rng::stream(11, "cam");
        let mut hits = 0usize;
        let mut covered = 0usize;
        let mut steps = 0usize;
        for ep in 0..episodes {
            let track = &test[pick.gen_range(0..test.len())];
            let mut env = Episode::new(&grid, &layout, track, rng::derive_seed_indexed(3, "n", ep)).unwrap();
            let mut bx = BeliefVector::uniform(grid.width).unwrap();
            let mut by = BeliefVector::uniform(grid.height).unwrap();
            let mut last_cam = 0usize;
            let mut last_nonnull: Option<usize> = None;
            let mut sweep = 0usize;
            for _ in 0..grid.episode_len {
                let cam = match policy {
                    "oracle" => {
                        let mut best = (0, f64::NEG_INFINITY);
                        for a in 0..4 {
                            let g = expected_info_gain(&bx, a, &model_x).unwrap()
                                + expected_info_gain(&by, a, &model_y).unwrap();
                            if g > best.1 {
                                best = (a, g);
                            }
                        }
                        best.0
                    }
                    "follow" => match last_nonnull {
                        Some(c) => c,
                        None => {
                            sweep = (sweep + 1) % 4;
                            sweep
                        }
                    },
                    "const" => 0,
                    _ => cam_rng.gen_range(0..4),
                };
                let (obs, truth) = env.step(cam).unwrap();
                bx = bayes_update(&bx, cam, axis_obs_symbol(&obs, Axis::X, 10), &model_x).unwrap();
                by = bayes_update(&by, cam, axis_obs_symbol(&obs, Axis::Y, 10), &model_y).unwrap();
                last_nonnull = if obs.is_null() { None } else { Some(cam) };
                last_cam = cam;
                let _ = last_cam;
                if !obs.is_null() {
                    hits += 1;
                }
                if layout.cameras[cam].covers(truth.0, truth.1) {
                    covered += 1;
                }
                steps += 1;
            }
        }
        println!(
            "{policy:8} non-null rate {:.3}  right-camera rate {:.3}",
            hits as f64 / steps as f64,
            covered as f64 / steps as f64
        );
    }
}
