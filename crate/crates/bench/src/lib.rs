//! Fixtures shared by the benchmarks.

use maskprune::{generate_scene, SceneSpec, SyntheticScene};

/// A default-proportioned scene with `n` Gaussians in total.
pub fn scene(n: usize, seed: u64) -> SyntheticScene {
    let object = n * 5 / 22;
    let floaters = n * 2 / 22;
    let spec = SceneSpec {
        seed,
        n_object: object,
        n_background: n - object - floaters,
        n_floaters: floaters,
        width: 640,
        height: 480,
        focal: 620.0,
        ..SceneSpec::default()
    };
    generate_scene(&spec).expect("benchmark scene")
}

/// Centers of the Gaussians that survive the whitelist in `scene`.
pub fn whitelisted_positions(scene: &SyntheticScene) -> Vec<[f32; 3]> {
    let hits = maskprune::whitelist::accumulate_hits(&scene.cloud, &scene.masks);
    hits.iter()
        .zip(&scene.cloud.positions)
        .filter_map(|(&h, &p)| (h > 0).then_some(p))
        .collect()
}
