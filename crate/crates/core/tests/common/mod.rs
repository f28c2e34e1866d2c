//! Shared helpers for the integration and acceptance suites: random model
//! generation and independent oracles.

#![allow(dead_code)]

pub mod oracles;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pomdp_core::belief::BeliefState;
use pomdp_core::model::{PomdpModel, SparseRows};

/// A dense random POMDP with rewards in [0, 1] shifted so the minimum reward
/// is exactly zero (several oracle slack arguments rely on non-negative
/// rewards).
pub fn random_model(
    seed: u64,
    num_states: usize,
    num_actions: usize,
    num_observations: usize,
    discount: f64,
) -> PomdpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_row = |rng: &mut ChaCha8Rng, cols: usize| -> Vec<(u32, f64)> {
        let weights: Vec<f64> = (0..cols).map(|_| -rng.random::<f64>().ln()).collect();
        let total: f64 = weights.iter().sum();
        weights
            .into_iter()
            .enumerate()
            .map(|(c, w)| (c as u32, w / total))
            .collect()
    };
    let transitions = (0..num_actions)
        .map(|_| {
            SparseRows::from_rows(
                num_states,
                (0..num_states).map(|_| random_row(&mut rng, num_states)).collect::<Vec<_>>(),
            )
        })
        .collect();
    let observations = (0..num_actions)
        .map(|_| {
            SparseRows::from_rows(
                num_observations,
                (0..num_states)
                    .map(|_| random_row(&mut rng, num_observations))
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    let mut rewards: Vec<f64> = (0..num_states * num_actions)
        .map(|_| rng.random::<f64>())
        .collect();
    let min = rewards.iter().copied().fold(f64::INFINITY, f64::min);
    for r in &mut rewards {
        *r -= min;
    }
    let initial: Vec<f64> = {
        let row = random_row(&mut rng, num_states);
        let mut dense = vec![0.0; num_states];
        for (s, p) in row {
            dense[s as usize] = p;
        }
        dense
    };
    PomdpModel::new(
        transitions,
        observations,
        rewards,
        discount,
        BeliefState::from_dense(&initial).unwrap(),
        None,
    )
    .unwrap()
}

/// A random belief over `num_states` states.
pub fn random_belief(rng: &mut ChaCha8Rng, num_states: usize) -> BeliefState {
    let weights: Vec<f64> = (0..num_states).map(|_| -rng.random::<f64>().ln()).collect();
    BeliefState::from_entries(weights.into_iter().enumerate()).unwrap()
}

/// 2 states, 1 action, 2 observations: static world, noisy sensor with the
/// given accuracy, rewards R(s, 0) = [10, -10].
pub fn static_two_state_model(accuracy: f64) -> PomdpModel {
    let t = SparseRows::from_rows(2, [vec![(0, 1.0)], vec![(1, 1.0)]]);
    let o = SparseRows::from_rows(
        2,
        [
            vec![(0, accuracy), (1, 1.0 - accuracy)],
            vec![(0, 1.0 - accuracy), (1, accuracy)],
        ],
    );
    PomdpModel::new(
        vec![t],
        vec![o],
        vec![10.0, -10.0],
        0.95,
        BeliefState::from_dense(&[0.5, 0.5]).unwrap(),
        None,
    )
    .unwrap()
}

pub fn assert_close(actual: f64, expected: f64, tolerance: f64, what: &str) {
    assert!(
        (actual - expected).abs() <= tolerance,
        "{what}: {actual} vs {expected} (tolerance {tolerance})"
    );
}
