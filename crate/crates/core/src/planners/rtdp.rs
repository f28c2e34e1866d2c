//! Real-time dynamic programming over discretized beliefs.
//!
//! Beliefs are discretized entrywise to a 1/k grid and used as keys into a
//! value table. Each step evaluates all actions with one-step lookups,
//! writes the best Q-value back for the current belief's key, and acts
//! greedily. Missing keys fall back to an initial value function (the MDP
//! upper bound). The table persists across episodes within a process run.

use std::collections::HashMap;

use crate::belief::{BeliefDynamics, BeliefState};
use crate::bounds::BoundFunction;

/// A belief rounded entrywise to numerators over a fixed denominator `k`.
/// Zero entries are dropped; the entry list is NOT renormalized. Hashable,
/// which is the whole point.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DiscretizedBelief {
    resolution: u32,
    entries: Vec<(u32, u32)>,
}

impl DiscretizedBelief {
    pub fn resolution(&self) -> usize {
        self.resolution as usize
    }

    /// `(state, numerator/k)` weights; may not sum to one.
    pub fn weights(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        let k = self.resolution as f64;
        self.entries.iter().map(move |&(s, n)| (s, n as f64 / k))
    }
}

/// Entrywise `round(k·b(s))/k` over the sparse support.
pub fn discretize(belief: &BeliefState, resolution: usize) -> DiscretizedBelief {
    debug_assert!(resolution >= 1);
    let k = resolution as f64;
    let entries = belief
        .entries()
        .iter()
        .filter_map(|&(s, p)| {
            let numerator = (k * p).round() as u32;
            (numerator > 0).then_some((s, numerator))
        })
        .collect();
    DiscretizedBelief {
        resolution: resolution as u32,
        entries,
    }
}

/// Value table over discretized beliefs with a fallback for missing keys.
pub struct RtdpValueStore<'a> {
    values: HashMap<DiscretizedBelief, f64>,
    fallback: &'a dyn BoundFunction,
}

impl<'a> RtdpValueStore<'a> {
    pub fn new(fallback: &'a dyn BoundFunction) -> Self {
        RtdpValueStore {
            values: HashMap::new(),
            fallback,
        }
    }

    /// Stored value, or the fallback evaluated at the discretized weights.
    pub fn lookup(&self, key: &DiscretizedBelief) -> f64 {
        if let Some(&v) = self.values.get(key) {
            return v;
        }
        self.fallback.evaluate_entries(&key.weights().collect::<Vec<_>>())
    }

    pub fn insert(&mut self, key: DiscretizedBelief, value: f64) {
        debug_assert!(value.is_finite());
        self.values.insert(key, value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One planning/learning step: evaluates Q(b,a) for every action with
/// store lookups of the discretized successors, writes max_a Q back under
/// the current belief's key and returns the argmax action (lowest id on
/// ties). Terminal beliefs have Q = 0 for every action.
pub fn rtdp_bel_step(
    dynamics: &dyn BeliefDynamics,
    belief: &BeliefState,
    store: &mut RtdpValueStore,
    resolution: usize,
    node_counter: &mut u64,
) -> usize {
    let key = discretize(belief, resolution);
    if dynamics.is_terminal(belief) {
        store.insert(key, 0.0);
        return 0;
    }
    let discount = dynamics.discount();
    let mut best_action = 0;
    let mut best_q = f64::NEG_INFINITY;
    for action in 0..dynamics.num_actions() {
        let mut q = dynamics.expected_reward(belief, action);
        for (_, prob, next) in dynamics.successors(belief, action) {
            *node_counter += 1;
            q += discount * prob * store.lookup(&discretize(&next, resolution));
        }
        if q > best_q {
            best_q = q;
            best_action = action;
        }
    }
    store.insert(key, best_q);
    best_action
}
