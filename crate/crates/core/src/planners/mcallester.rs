//! Depth-limited search with sparse observation sampling.
//!
//! At every belief/action pair, `C` observations are drawn from Pr(z|b,a) and
//! the search recurses only on the distinct draws, weighted by their sample
//! frequencies N_z/C. Leaves are scored by max_a R_B(b,a) unless an explicit
//! fringe evaluator is supplied. No bound property survives the sampling, so
//! the planner reports no tree bounds.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::belief::{BeliefDynamics, BeliefState};
use crate::bounds::BoundFunction;

/// Sampled depth-`d` value estimate. Deterministic given the RNG state.
pub fn mcallester_expand(
    dynamics: &dyn BeliefDynamics,
    belief: &BeliefState,
    depth: usize,
    obs_samples: usize,
    fringe: Option<&dyn BoundFunction>,
    rng: &mut ChaCha8Rng,
) -> f64 {
    expand(dynamics, belief, depth, obs_samples, fringe, rng, &mut 0)
}

/// Root-level search returning the argmax action (lowest id on ties).
pub(crate) fn plan(
    dynamics: &dyn BeliefDynamics,
    belief: &BeliefState,
    depth: usize,
    obs_samples: usize,
    fringe: Option<&dyn BoundFunction>,
    rng: &mut ChaCha8Rng,
    node_counter: &mut u64,
) -> (usize, f64) {
    let mut best = f64::NEG_INFINITY;
    let mut best_action = 0;
    for action in 0..dynamics.num_actions() {
        let q = sampled_action_value(
            dynamics,
            belief,
            action,
            depth,
            obs_samples,
            fringe,
            rng,
            node_counter,
        );
        if q > best {
            best = q;
            best_action = action;
        }
    }
    (best_action, best)
}

fn expand(
    dynamics: &dyn BeliefDynamics,
    belief: &BeliefState,
    depth: usize,
    obs_samples: usize,
    fringe: Option<&dyn BoundFunction>,
    rng: &mut ChaCha8Rng,
    node_counter: &mut u64,
) -> f64 {
    if dynamics.is_terminal(belief) {
        return 0.0;
    }
    if depth == 0 {
        return match fringe {
            Some(bound) => bound.evaluate(belief),
            None => (0..dynamics.num_actions())
                .map(|a| dynamics.expected_reward(belief, a))
                .fold(f64::NEG_INFINITY, f64::max),
        };
    }
    let mut best = f64::NEG_INFINITY;
    for action in 0..dynamics.num_actions() {
        let q = sampled_action_value(
            dynamics,
            belief,
            action,
            depth,
            obs_samples,
            fringe,
            rng,
            node_counter,
        );
        best = best.max(q);
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn sampled_action_value(
    dynamics: &dyn BeliefDynamics,
    belief: &BeliefState,
    action: usize,
    depth: usize,
    obs_samples: usize,
    fringe: Option<&dyn BoundFunction>,
    rng: &mut ChaCha8Rng,
    node_counter: &mut u64,
) -> f64 {
    let discount = dynamics.discount();
    let successors = dynamics.successors(belief, action);
    // Draw C observations from the exact branch distribution and recurse on
    // the distinct ones with frequency weights.
    let mut counts = vec![0u32; successors.len()];
    for _ in 0..obs_samples {
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
        counts[pick] += 1;
    }
    let mut q = dynamics.expected_reward(belief, action);
    for (i, (_, _, next)) in successors.iter().enumerate() {
        if counts[i] == 0 {
            continue;
        }
        *node_counter += 1;
        let weight = counts[i] as f64 / obs_samples as f64;
        let value = expand(
            dynamics,
            next,
            depth - 1,
            obs_samples,
            fringe,
            rng,
            node_counter,
        );
        q += discount * weight * value;
    }
    q
}
