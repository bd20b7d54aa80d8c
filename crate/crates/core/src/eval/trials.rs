use rayon::prelude::*;

use super::passk::{cell_seed, TrialMatrix};
use crate::cat::CatBundle;
use crate::envs::WorldSet;
use crate::rollout::{run_executor_episode, ExecutorConfig, Policy, RolloutError, Trajectory};

/// Builds the policy for one trial from the bundle and the cell seed.
pub type PolicyFactory<'a> = dyn Fn(&CatBundle, u64) -> Box<dyn Policy> + Sync + 'a;

/// Runs `trials` independent episodes per bundle in parallel. Trials differ
/// only in the policy seed; the world is always the bundle's.
pub fn run_trials(
    worlds: &WorldSet,
    bundles: &[CatBundle],
    trials: usize,
    base_seed: u64,
    factory: &PolicyFactory<'_>,
    config: &ExecutorConfig,
) -> Result<(TrialMatrix, Vec<Trajectory>), RolloutError> {
    let cells: Vec<(usize, usize)> = (0..bundles.len()).flat_map(|i| (0..trials).map(move |j| (i, j))).collect();
    let episodes: Vec<Result<Trajectory, RolloutError>> = cells
        .par_iter()
        .map(|&(i, j)| {
            let b = &bundles[i];
            let seed = cell_seed(base_seed, &b.task_id(), j);
            let world = worlds.get(b.env_kind, b.scale());
            let mut policy = factory(b, seed);
            run_executor_episode(b, world, policy.as_mut(), seed, config).map(|r| r.trajectory)
        })
        .collect();
    let mut matrix = TrialMatrix {
        tasks: bundles.iter().map(CatBundle::task_id).collect(),
        cells: vec![Vec::with_capacity(trials); bundles.len()],
        seeds: vec![Vec::with_capacity(trials); bundles.len()],
    };
    let mut out = Vec::with_capacity(episodes.len());
    for (&(i, _), ep) in cells.iter().zip(episodes) {
        let t = ep?;
        matrix.cells[i].push(t.reward);
        matrix.seeds[i].push(t.seed);
        out.push(t);
    }
    Ok((matrix, out))
}
