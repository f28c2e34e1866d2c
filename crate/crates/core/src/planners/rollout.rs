//! Rollout and parallel rollout.
//!
//! Estimates each root action's value by sampling trajectories that take the
//! action once and then follow a fixed policy (greedy on an α-vector set).
//! With several policies in Π, each action scores the max estimate over
//! policies; a singleton Π is plain rollout.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::belief::{BeliefDynamics, BeliefState};
use crate::bounds::AlphaVectorSet;

/// Averages `trajectories` sampled depth-`depth` returns per (action, policy)
/// pair and returns the argmax action (lowest id on ties) with the per-action
/// values. Each trajectory accumulates `depth + 1` reward terms.
pub fn parallel_rollout_plan(
    dynamics: &dyn BeliefDynamics,
    belief: &BeliefState,
    policies: &[&AlphaVectorSet],
    trajectories: usize,
    depth: usize,
    rng: &mut ChaCha8Rng,
    node_counter: &mut u64,
) -> (usize, Vec<f64>) {
    assert!(!policies.is_empty(), "rollout needs at least one policy");
    let discount = dynamics.discount();
    let mut values = Vec::with_capacity(dynamics.num_actions());
    for action in 0..dynamics.num_actions() {
        let mut best = f64::NEG_INFINITY;
        for policy in policies {
            let mut estimate = 0.0;
            for _ in 0..trajectories {
                let mut current = belief.clone();
                let mut next_action = action;
                let mut weight = 1.0;
                for _ in 0..=depth {
                    if dynamics.is_terminal(&current) {
                        break;
                    }
                    estimate += weight * dynamics.expected_reward(&current, next_action)
                        / trajectories as f64;
                    let successors = dynamics.successors(&current, next_action);
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut pick = successors.len() - 1;
                    for (i, (_, p, _)) in successors.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            pick = i;
                            break;
                        }
                    }
                    current = successors.into_iter().nth(pick).unwrap().2;
                    *node_counter += 1;
                    next_action = policy.evaluate_with_action(&current).1;
                    weight *= discount;
                }
            }
            best = best.max(estimate);
        }
        values.push(best);
    }
    let mut best_action = 0;
    for (a, &v) in values.iter().enumerate() {
        if v > values[best_action] {
            best_action = a;
        }
    }
    (best_action, values)
}
