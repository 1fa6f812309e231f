// scratch probe: exact-filter ceilings under greedy vs random cameras
use dan_core::belief::{bayes_update, expected_info_gain, DiscreteModel};
use dan_core::rng;
use dan_core::simplex::BeliefVector;
use dan_core::tracking::*;
use rand::Rng;

fn run(
    grid: &GridConfig,
    layout: &CameraLayout,
    tracks: &[Track],
    episodes: usize,
    random_cams: bool,
    seed: u64,
) -> f64 {
    let model_x = factored_model(grid, layout, Axis::X).unwrap();
    let model_y = factored_model(grid, layout, Axis::Y).unwrap();
    let mut pick = rng::stream(seed, "pick");
    let mut cam_rng = rng::stream(seed, "cam");
    let greedy = |bx: &BeliefVector, by: &BeliefVector, mx: &DiscreteModel, my: &DiscreteModel| {
        let mut best = (0, f64::NEG_INFINITY);
        for a in 0..mx.n_actions() {
            let g = expected_info_gain(bx, a, mx).unwrap() + expected_info_gain(by, a, my).unwrap();
            if g > best.1 {
                best = (a, g);
            }
        }
        best.0
    };
    let mut total = 0.0;
    for ep in 0..episodes {
        let track = &tracks[pick.gen_range(0..tracks.len())];
        let mut env = Episode::new(grid, layout, track, rng::derive_seed_indexed(seed, "noise", ep as u64)).unwrap();
        let mut bx = BeliefVector::uniform(grid.width).unwrap();
        let mut by = BeliefVector::uniform(grid.height).unwrap();
        for _ in 0..grid.episode_len {
            let cam = if random_cams { cam_rng.gen_range(0..layout.cameras.len()) } else { greedy(&bx, &by, &model_x, &model_y) };
            let (obs, truth) = env.step(cam).unwrap();
            bx = bayes_update(&bx, cam, axis_obs_symbol(&obs, Axis::X, grid.width), &model_x).unwrap();
            by = bayes_update(&by, cam, axis_obs_symbol(&obs, Axis::Y, grid.height), &model_y).unwrap();
            if bx.argmax() == truth.0 && by.argmax() == truth.1 {
                total += 1.0;
            }
        }
    }
    total / episodes as f64
}

fn main() {
    for (noise, miss) in [(0.1, 0.3), (0.1, 0.4), (0.1, 0.5), (0.05, 0.4)] {
        let grid = GridConfig { noise_adjacent: noise, miss_prob: miss, ..GridConfig::default() };
        let layout = default_layout(&grid).unwrap();
        let (_, test) = generate_dataset(&grid, 600, 99).unwrap();
        let g = run(&grid, &layout, &test, 400, false, 5);
        let r = run(&grid, &layout, &test, 400, true, 5);
        println!(
            "noise {noise} miss {miss}: greedy-filter {g:.3}  random-filter {r:.3}  ceiling ratio {:.2}",
            g / r
        );
    }
}
