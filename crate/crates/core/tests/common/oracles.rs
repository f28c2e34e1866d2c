//! Independent oracles: exhaustive belief-tree evaluations and from-scratch
//! tree recomputations. These deliberately avoid the incremental machinery
//! they are used to check.

use std::collections::HashMap;

use pomdp_core::belief::{BeliefDynamics, BeliefState};
use pomdp_core::bounds::BoundFunction;
use pomdp_core::heuristics::HeuristicPolicy;
use pomdp_core::model::PomdpModel;
use pomdp_core::tree::{OrId, SearchTree};

/// Optimal value of the depth-`horizon` truncated belief MDP (zero value at
/// the horizon): exhaustive expectimax over all positive-probability
/// branches, on dense belief vectors for speed.
///
/// Works on unnormalized beliefs: every Bellman term is linear in the belief
/// and max commutes with positive scaling, so child branches recurse on the
/// unnormalized posterior and skip both the normalization and the Pr(z|b,a)
/// reweighting.
pub fn optimal_truncated_value(model: &PomdpModel, belief: &[f64], horizon: usize) -> f64 {
    if horizon == 0 {
        return 0.0;
    }
    optimal_truncated_values(model, belief, horizon)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Per-action Q-values of the truncated belief MDP (dense, unnormalized-safe
/// up to overall scale).
pub fn optimal_truncated_values(model: &PomdpModel, belief: &[f64], horizon: usize) -> Vec<f64> {
    let n = model.num_states();
    let nz = model.num_observations();
    let discount = model.discount();
    (0..model.num_actions())
        .map(|action| {
            let mut q = (0..n).map(|s| belief[s] * model.reward(s, action)).sum::<f64>();
            if horizon > 1 {
                let mut projected = vec![0.0; n];
                for s in 0..n {
                    if belief[s] == 0.0 {
                        continue;
                    }
                    for &(s2, t) in model.transition_row(action, s) {
                        projected[s2 as usize] += belief[s] * t;
                    }
                }
                let mut branches = vec![vec![0.0; n]; nz];
                let mut masses = vec![0.0; nz];
                for (s2, mass) in projected.iter().enumerate() {
                    if *mass == 0.0 {
                        continue;
                    }
                    for &(z, o) in model.observation_row(action, s2) {
                        branches[z as usize][s2] = mass * o;
                        masses[z as usize] += mass * o;
                    }
                }
                for (z, branch) in branches.iter().enumerate() {
                    if masses[z] > 0.0 {
                        q += discount * optimal_truncated_value(model, branch, horizon - 1);
                    }
                }
            }
            q
        })
        .collect()
}

/// Dense belief vector for a sparse belief state.
pub fn dense_belief(belief: &BeliefState, num_states: usize) -> Vec<f64> {
    let mut out = vec![0.0; num_states];
    for &(s, p) in belief.entries() {
        out[s as usize] = p;
    }
    out
}

/// Allocation-free variant of [`optimal_truncated_value`] for deep searches:
/// one scratch frame per recursion level.
pub struct TruncatedOracle<'m> {
    model: &'m PomdpModel,
    frames: Vec<OracleFrame>,
    pub nodes_visited: u64,
}

struct OracleFrame {
    projected: Vec<f64>,
    branches: Vec<Vec<f64>>,
    masses: Vec<f64>,
}

impl<'m> TruncatedOracle<'m> {
    pub fn new(model: &'m PomdpModel, max_depth: usize) -> Self {
        let n = model.num_states();
        let nz = model.num_observations();
        let frames = (0..max_depth + 1)
            .map(|_| OracleFrame {
                projected: vec![0.0; n],
                branches: vec![vec![0.0; n]; nz],
                masses: vec![0.0; nz],
            })
            .collect();
        TruncatedOracle {
            model,
            frames,
            nodes_visited: 0,
        }
    }

    pub fn value(&mut self, belief: &[f64], horizon: usize) -> f64 {
        self.action_values(belief, horizon)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn action_values(&mut self, belief: &[f64], horizon: usize) -> Vec<f64> {
        (0..self.model.num_actions())
            .map(|a| self.q(belief, a, horizon))
            .collect()
    }

    fn q(&mut self, belief: &[f64], action: usize, horizon: usize) -> f64 {
        self.nodes_visited += 1;
        let model = self.model;
        let n = model.num_states();
        let nz = model.num_observations();
        let discount = model.discount();
        let mut q = (0..n)
            .map(|s| belief[s] * model.reward(s, action))
            .sum::<f64>();
        if horizon <= 1 {
            return q;
        }
        // This level's scratch is split off so recursive calls can use the
        // deeper frames without aliasing.
        let frame_index = self.frames.len() - horizon;
        let mut frame = std::mem::replace(
            &mut self.frames[frame_index],
            OracleFrame {
                projected: Vec::new(),
                branches: Vec::new(),
                masses: Vec::new(),
            },
        );
        frame.projected.iter_mut().for_each(|x| *x = 0.0);
        for s in 0..n {
            if belief[s] == 0.0 {
                continue;
            }
            for &(s2, t) in model.transition_row(action, s) {
                frame.projected[s2 as usize] += belief[s] * t;
            }
        }
        for z in 0..nz {
            frame.masses[z] = 0.0;
            frame.branches[z].iter_mut().for_each(|x| *x = 0.0);
        }
        for (s2, mass) in frame.projected.iter().enumerate() {
            if *mass == 0.0 {
                continue;
            }
            for &(z, o) in model.observation_row(action, s2) {
                frame.branches[z as usize][s2] = mass * o;
                frame.masses[z as usize] += mass * o;
            }
        }
        for z in 0..nz {
            if frame.masses[z] > 0.0 {
                let mut best = f64::NEG_INFINITY;
                for a in 0..model.num_actions() {
                    let value = self.q(&frame.branches[z], a, horizon - 1);
                    best = best.max(value);
                }
                q += discount * best;
            }
        }
        self.frames[frame_index] = frame;
        q
    }
}

/// Unpruned exhaustive depth-`depth` lookahead evaluating `leaf` at the
/// fringe: the reference value for RTBSS.
pub fn exhaustive_lookahead(
    dynamics: &dyn BeliefDynamics,
    leaf: &dyn BoundFunction,
    belief: &BeliefState,
    depth: usize,
) -> f64 {
    if dynamics.is_terminal(belief) {
        return 0.0;
    }
    if depth == 0 {
        return leaf.evaluate(belief);
    }
    let discount = dynamics.discount();
    (0..dynamics.num_actions())
        .map(|action| {
            let mut q = dynamics.expected_reward(belief, action);
            for (_, prob, next) in dynamics.successors(belief, action) {
                q += discount * prob * exhaustive_lookahead(dynamics, leaf, &next, depth - 1);
            }
            q
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// From-scratch recomputation of every node's bounds and of the weighted
/// best-fringe bookkeeping, recomputing rewards and branch probabilities from
/// the dynamics instead of trusting the cached values.
pub struct RecomputedNode {
    pub lower: f64,
    pub upper: f64,
    pub score: f64,
    pub best_fringe: OrId,
}

pub fn recompute_tree(
    tree: &SearchTree,
    dynamics: &dyn BeliefDynamics,
    lower: &dyn BoundFunction,
    upper: &dyn BoundFunction,
    heuristic: &dyn HeuristicPolicy,
) -> HashMap<OrId, RecomputedNode> {
    let mut out = HashMap::new();
    recompute_or(tree, tree.root(), dynamics, lower, upper, heuristic, &mut out);
    out
}

fn recompute_or(
    tree: &SearchTree,
    id: OrId,
    dynamics: &dyn BeliefDynamics,
    lower_fn: &dyn BoundFunction,
    upper_fn: &dyn BoundFunction,
    heuristic: &dyn HeuristicPolicy,
    out: &mut HashMap<OrId, RecomputedNode>,
) -> (f64, f64, f64, OrId) {
    let node = tree.or_node(id);
    let (offline_lower, offline_upper) = if dynamics.is_terminal(node.belief()) {
        (0.0, 0.0)
    } else {
        (
            lower_fn.evaluate(node.belief()),
            upper_fn.evaluate(node.belief()),
        )
    };
    let result = match node.children() {
        None => {
            let score = heuristic.fringe_weight(offline_lower, offline_upper);
            (offline_lower, offline_upper, score, id)
        }
        Some(children) => {
            let discount = dynamics.discount();
            let mut per_action = Vec::with_capacity(children.len());
            for &and_id in children {
                let and = tree.and_node(and_id);
                let reward = dynamics.expected_reward(node.belief(), and.action());
                let mut lower = reward;
                let mut upper = reward;
                let mut best_score = f64::NEG_INFINITY;
                let mut best_fringe = id;
                for &(z, _, child) in and.children() {
                    let prob =
                        dynamics.observation_probability(node.belief(), and.action(), z as usize);
                    let (cl, cu, cscore, cfringe) =
                        recompute_or(tree, child, dynamics, lower_fn, upper_fn, heuristic, out);
                    lower += discount * prob * cl;
                    upper += discount * prob * cu;
                    let weight = heuristic.observation_weight(discount, prob, cl, cu) * cscore;
                    if weight > best_score {
                        best_score = weight;
                        best_fringe = cfringe;
                    }
                }
                per_action.push((lower, upper, best_score, best_fringe));
            }
            let mut lower = per_action
                .iter()
                .map(|a| a.0)
                .fold(f64::NEG_INFINITY, f64::max)
                .max(offline_lower);
            let upper = per_action
                .iter()
                .map(|a| a.1)
                .fold(f64::NEG_INFINITY, f64::max)
                .min(offline_upper);
            if lower > upper {
                let mid = 0.5 * (lower + upper);
                lower = mid;
            }
            let upper = upper.max(lower);
            let bounds: Vec<(f64, f64)> = per_action.iter().map(|a| (a.0, a.1)).collect();
            let mut weights = Vec::new();
            heuristic.action_weights(lower, &bounds, &mut weights);
            let mut best_score = f64::NEG_INFINITY;
            let mut best_fringe = id;
            for (a, &w) in weights.iter().enumerate() {
                let score = w * per_action[a].2;
                if score > best_score {
                    best_score = score;
                    best_fringe = per_action[a].3;
                }
            }
            (lower, upper, best_score, best_fringe)
        }
    };
    out.insert(
        id,
        RecomputedNode {
            lower: result.0,
            upper: result.1,
            score: result.2,
            best_fringe: result.3,
        },
    );
    result
}

/// Global heuristic weight products of every fringe node, in DFS order
/// (actions ascending, observations ascending). Products are multiplied
/// bottom-up, matching the incremental bookkeeping's associativity.
pub fn fringe_products(tree: &SearchTree, heuristic: &dyn HeuristicPolicy) -> Vec<(OrId, f64)> {
    let mut out = Vec::new();
    fringe_products_rec(tree, tree.root(), heuristic, &mut out);
    out
}

fn fringe_products_rec(
    tree: &SearchTree,
    id: OrId,
    heuristic: &dyn HeuristicPolicy,
    out: &mut Vec<(OrId, f64)>,
) {
    let node = tree.or_node(id);
    let Some(children) = node.children() else {
        out.push((id, heuristic.fringe_weight(node.lower(), node.upper())));
        return;
    };
    let discount = tree.discount();
    let bounds: Vec<(f64, f64)> = children
        .iter()
        .map(|&a| {
            let and = tree.and_node(a);
            (and.lower(), and.upper())
        })
        .collect();
    let mut action_weights = Vec::new();
    heuristic.action_weights(node.lower(), &bounds, &mut action_weights);
    for (&and_id, &aw) in children.iter().zip(&action_weights) {
        let and = tree.and_node(and_id);
        for &(_, prob, child) in and.children() {
            let c = tree.or_node(child);
            let ow = heuristic.observation_weight(discount, prob, c.lower(), c.upper());
            let start = out.len();
            fringe_products_rec(tree, child, heuristic, out);
            // Same associativity as the incremental bookkeeping:
            // w_a · (w_z · subproduct).
            for entry in &mut out[start..] {
                entry.1 = aw * (ow * entry.1);
            }
        }
    }
}

/// Expands every fringe node shallower than `depth`, breadth-first, so the
/// tree becomes the complete reachability tree to that depth.
pub fn expand_to_depth(tree: &mut SearchTree, depth: u32) {
    loop {
        let next: Vec<OrId> = tree
            .or_ids()
            .filter(|&id| {
                let n = tree.or_node(id);
                n.is_fringe() && n.depth() < depth
            })
            .collect();
        if next.is_empty() {
            break;
        }
        for id in next {
            tree.expand(id).unwrap();
            tree.update_ancestors(id);
        }
    }
}
