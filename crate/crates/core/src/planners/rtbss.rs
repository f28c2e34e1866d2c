//! Depth-limited branch-and-bound search (RTBSS).
//!
//! A full depth-first lookahead to a fixed horizon, evaluating the offline
//! lower bound at the leaves. At each belief node actions are tried in
//! descending order of their one-step upper bound
//! `U(b,a) = R_B(b,a) + γ Σ_z Pr(z|b,a)·upper(τ(b,a,z))`, and the search
//! recurses only while that upper bound still exceeds the best value found,
//! so every action prunable under any ordering is pruned.

use crate::belief::{BeliefDynamics, BeliefState};
use crate::bounds::BoundFunction;

/// Lower bound on V*(b) from a depth-`d` branch-and-bound lookahead.
pub fn rtbss_expand(
    dynamics: &dyn BeliefDynamics,
    lower: &dyn BoundFunction,
    upper: &dyn BoundFunction,
    belief: &BeliefState,
    depth: usize,
) -> f64 {
    expand(dynamics, lower, upper, belief, depth, &mut 0)
}

/// Root-level search returning the argmax action (lowest id on ties) and its
/// value. `node_counter` counts materialized successor beliefs.
pub(crate) fn plan(
    dynamics: &dyn BeliefDynamics,
    lower: &dyn BoundFunction,
    upper: &dyn BoundFunction,
    belief: &BeliefState,
    depth: usize,
    node_counter: &mut u64,
) -> (usize, f64) {
    debug_assert!(depth >= 1);
    let ordered = order_actions(dynamics, upper, belief, node_counter);
    let mut best_value = f64::NEG_INFINITY;
    let mut best_action = ordered.first().map(|e| e.action).unwrap_or(0);
    for entry in &ordered {
        if entry.one_step_upper <= best_value {
            break;
        }
        let q = action_value(dynamics, lower, upper, entry, depth, node_counter);
        // Strict improvement keeps the lowest action id on exact ties.
        if q > best_value || (q == best_value && entry.action < best_action) {
            best_value = q;
            best_action = entry.action;
        }
    }
    (best_action, best_value)
}

struct ActionExpansion {
    action: usize,
    reward: f64,
    successors: Vec<(usize, f64, BeliefState)>,
    one_step_upper: f64,
}

fn order_actions(
    dynamics: &dyn BeliefDynamics,
    upper: &dyn BoundFunction,
    belief: &BeliefState,
    node_counter: &mut u64,
) -> Vec<ActionExpansion> {
    let discount = dynamics.discount();
    let mut entries: Vec<ActionExpansion> = (0..dynamics.num_actions())
        .map(|action| {
            let reward = dynamics.expected_reward(belief, action);
            let successors = dynamics.successors(belief, action);
            *node_counter += successors.len() as u64;
            let one_step_upper = reward
                + discount
                    * successors
                        .iter()
                        .map(|(_, p, b)| p * upper.evaluate(b))
                        .sum::<f64>();
            ActionExpansion {
                action,
                reward,
                successors,
                one_step_upper,
            }
        })
        .collect();
    // Descending upper bound, ties toward the lowest action id.
    entries.sort_by(|a, b| {
        b.one_step_upper
            .partial_cmp(&a.one_step_upper)
            .unwrap()
            .then(a.action.cmp(&b.action))
    });
    entries
}

fn action_value(
    dynamics: &dyn BeliefDynamics,
    lower: &dyn BoundFunction,
    upper: &dyn BoundFunction,
    entry: &ActionExpansion,
    depth: usize,
    node_counter: &mut u64,
) -> f64 {
    let discount = dynamics.discount();
    let mut q = entry.reward;
    for (_, prob, next) in &entry.successors {
        q += discount * prob * expand(dynamics, lower, upper, next, depth - 1, node_counter);
    }
    q
}

fn expand(
    dynamics: &dyn BeliefDynamics,
    lower: &dyn BoundFunction,
    upper: &dyn BoundFunction,
    belief: &BeliefState,
    depth: usize,
    node_counter: &mut u64,
) -> f64 {
    if dynamics.is_terminal(belief) {
        return 0.0;
    }
    if depth == 0 {
        return lower.evaluate(belief);
    }
    let ordered = order_actions(dynamics, upper, belief, node_counter);
    let mut best = f64::NEG_INFINITY;
    for entry in &ordered {
        if entry.one_step_upper <= best {
            break;
        }
        let q = action_value(dynamics, lower, upper, entry, depth, node_counter);
        best = best.max(q);
    }
    best
}
