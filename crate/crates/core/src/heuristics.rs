//! Pluggable node-selection policies for the AND-OR search.
//!
//! A weighted policy supplies three non-negative weight functions: a fringe
//! weight on belief nodes and multiplicative factors per action edge and per
//! observation edge. The tree keeps, per node, the best weight product over
//! fringe nodes in its subtree together with a reference to that fringe, so
//! selection is O(1) at the root and maintenance is linear in tree depth.
//! HSVI-style greedy descent is the alternative selector; it needs no
//! bookkeeping at all.

use crate::error::{PomdpError, Result};
use crate::tree::SearchTree;

pub trait HeuristicPolicy: Sync {
    /// Weight of an unexpanded belief node: the bound gap by default.
    fn fringe_weight(&self, lower: f64, upper: f64) -> f64 {
        upper - lower
    }

    /// Weights of every action edge under a belief node, given the node's
    /// lower bound and each action's `(lower, upper)` pair. Computed jointly
    /// because some policies normalize across actions.
    fn action_weights(&self, node_lower: f64, action_bounds: &[(f64, f64)], out: &mut Vec<f64>);

    /// Weight of an observation edge under an action node.
    fn observation_weight(
        &self,
        discount: f64,
        prob: f64,
        child_lower: f64,
        child_upper: f64,
    ) -> f64;

    /// True when action/observation weights read the bounds, which forces
    /// ancestor updates to recompute them. Holds for all built-ins.
    fn weights_depend_on_bounds(&self) -> bool {
        true
    }
}

/// Weight the gap by the path probability and discount; exclude dominated
/// actions outright.
pub struct SatiaLave;

impl HeuristicPolicy for SatiaLave {
    fn action_weights(&self, node_lower: f64, action_bounds: &[(f64, f64)], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            action_bounds
                .iter()
                .map(|&(_, upper)| if upper > node_lower { 1.0 } else { 0.0 }),
        );
    }

    fn observation_weight(&self, discount: f64, prob: f64, _: f64, _: f64) -> f64 {
        discount * prob
    }
}

/// AO*-style: search only under the action maximizing the upper bound, all
/// observation branches weighted equally.
pub struct BiPomdp;

impl HeuristicPolicy for BiPomdp {
    fn action_weights(&self, _node_lower: f64, action_bounds: &[(f64, f64)], out: &mut Vec<f64>) {
        indicator_of_max_upper(action_bounds, out);
    }

    fn observation_weight(&self, _: f64, _: f64, _: f64, _: f64) -> f64 {
        1.0
    }
}

/// Error-minimizing search with action probabilities from a uniformity
/// assumption on the Q-value between its bounds.
pub struct Aems1;

impl HeuristicPolicy for Aems1 {
    fn action_weights(&self, node_lower: f64, action_bounds: &[(f64, f64)], out: &mut Vec<f64>) {
        out.clear();
        let mut total = 0.0;
        for &(lower, upper) in action_bounds {
            let term = if upper > node_lower {
                let width = upper - lower;
                let gain = upper - node_lower;
                // A converged action with remaining upside gets a large
                // finite weight instead of a division by ~0.
                if width < 1e-12 {
                    1e12
                } else {
                    gain * gain / width
                }
            } else {
                0.0
            };
            out.push(term);
            total += term;
        }
        // All actions dominated: every weight is zero and the node is solved.
        if total > 0.0 {
            for w in out.iter_mut() {
                *w /= total;
            }
        }
    }

    fn observation_weight(&self, discount: f64, prob: f64, _: f64, _: f64) -> f64 {
        discount * prob
    }
}

/// Error-minimizing search assuming the max-upper-bound action is optimal.
pub struct Aems2;

impl HeuristicPolicy for Aems2 {
    fn action_weights(&self, _node_lower: f64, action_bounds: &[(f64, f64)], out: &mut Vec<f64>) {
        indicator_of_max_upper(action_bounds, out);
    }

    fn observation_weight(&self, discount: f64, prob: f64, _: f64, _: f64) -> f64 {
        discount * prob
    }
}

fn indicator_of_max_upper(action_bounds: &[(f64, f64)], out: &mut Vec<f64>) {
    out.clear();
    out.resize(action_bounds.len(), 0.0);
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (i, &(_, upper)) in action_bounds.iter().enumerate() {
        if upper > best {
            best = upper;
            arg = i;
        }
    }
    if !action_bounds.is_empty() {
        out[arg] = 1.0;
    }
}

/// How the planner picks the next fringe node to expand.
pub enum NodeSelector<'a> {
    /// Best-fringe bookkeeping driven by a weight-product policy.
    Weighted(&'a dyn HeuristicPolicy),
    /// Greedy descent on upper bounds (HSVI-BFS); no bookkeeping.
    GreedyUpper,
}

/// Heuristic tokens accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeuristicKind {
    SatiaLave,
    BiPomdp,
    Aems1,
    Aems2,
    HsviBfs,
}

static SATIA_LAVE: SatiaLave = SatiaLave;
static BI_POMDP: BiPomdp = BiPomdp;
static AEMS1: Aems1 = Aems1;
static AEMS2: Aems2 = Aems2;

impl HeuristicKind {
    pub fn from_token(token: &str) -> Result<Self> {
        match token {
            "satia" => Ok(HeuristicKind::SatiaLave),
            "bipomdp" => Ok(HeuristicKind::BiPomdp),
            "aems1" => Ok(HeuristicKind::Aems1),
            "aems2" => Ok(HeuristicKind::Aems2),
            "hsvi-bfs" => Ok(HeuristicKind::HsviBfs),
            other => Err(PomdpError::Config(format!(
                "unknown heuristic `{other}` (expected satia|bipomdp|aems1|aems2|hsvi-bfs)"
            ))),
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            HeuristicKind::SatiaLave => "satia",
            HeuristicKind::BiPomdp => "bipomdp",
            HeuristicKind::Aems1 => "aems1",
            HeuristicKind::Aems2 => "aems2",
            HeuristicKind::HsviBfs => "hsvi-bfs",
        }
    }

    pub fn selector(self) -> NodeSelector<'static> {
        match self {
            HeuristicKind::SatiaLave => NodeSelector::Weighted(&SATIA_LAVE),
            HeuristicKind::BiPomdp => NodeSelector::Weighted(&BI_POMDP),
            HeuristicKind::Aems1 => NodeSelector::Weighted(&AEMS1),
            HeuristicKind::Aems2 => NodeSelector::Weighted(&AEMS2),
            HeuristicKind::HsviBfs => NodeSelector::GreedyUpper,
        }
    }
}

/// Greedy selector: descend from the root picking the max-upper-bound action
/// at each belief node and the max `Pr(z|b,a)·gap(child)` branch at each
/// action node, stopping at the first fringe node. Ties break toward the
/// lowest id at both levels. Returns nothing once the reached fringe has no
/// gap left to reduce.
pub fn hsvi_bfs_select(tree: &SearchTree) -> Option<crate::tree::OrId> {
    let mut current = tree.root();
    loop {
        let node = tree.or_node(current);
        let children = match node.children() {
            None => {
                let (lower, upper) = (node.lower(), node.upper());
                return (upper - lower > 0.0).then_some(current);
            }
            Some(c) => c,
        };
        let mut best_and = children[0];
        let mut best_upper = f64::NEG_INFINITY;
        for &and_id in children {
            let upper = tree.and_node(and_id).upper();
            if upper > best_upper {
                best_upper = upper;
                best_and = and_id;
            }
        }
        let and = tree.and_node(best_and);
        let mut next = None;
        let mut best_score = f64::NEG_INFINITY;
        for &(_, prob, child) in and.children() {
            let c = tree.or_node(child);
            let score = prob * (c.upper() - c.lower());
            if score > best_score {
                best_score = score;
                next = Some(child);
            }
        }
        current = next?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn satia_weights() {
        let h = SatiaLave;
        assert_eq!(h.fringe_weight(1.0, 1.0), 0.0);
        let mut out = Vec::new();
        // Dominated action (upper ≤ node lower) gets weight zero.
        h.action_weights(5.0, &[(0.0, 4.0), (0.0, 6.0)], &mut out);
        assert_eq!(out, vec![0.0, 1.0]);
        assert!((h.observation_weight(0.95, 0.5, 0.0, 1.0) - 0.475).abs() < 1e-12);
    }

    #[test]
    fn bipomdp_breaks_ties_toward_lowest_id() {
        let h = BiPomdp;
        let mut out = Vec::new();
        h.action_weights(0.0, &[(0.0, 3.0)], &mut out);
        assert_eq!(out, vec![1.0]);
        h.action_weights(0.0, &[(0.0, 3.0), (0.0, 3.0)], &mut out);
        assert_eq!(out, vec![1.0, 0.0]);
        assert_eq!(h.observation_weight(0.95, 0.01, 0.0, 9.0), 1.0);
    }

    #[test]
    fn aems1_normalized_preferences() {
        let h = Aems1;
        let mut out = Vec::new();
        // Node lower 0, widths both 2, uppers 2 and 1: unnormalized terms
        // 4/2 = 2 and 1/2 = 0.5, normalized (0.8, 0.2).
        h.action_weights(0.0, &[(0.0, 2.0), (-1.0, 1.0)], &mut out);
        assert!((out[0] - 0.8).abs() < 1e-12);
        assert!((out[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn aems1_degenerate_cases() {
        let h = Aems1;
        let mut out = Vec::new();
        // Every action dominated: all-zero weights.
        h.action_weights(10.0, &[(0.0, 1.0), (0.0, 2.0)], &mut out);
        assert_eq!(out, vec![0.0, 0.0]);
        // One unpruned action normalizes to 1.
        h.action_weights(1.5, &[(0.0, 1.0), (0.0, 2.0)], &mut out);
        assert_eq!(out, vec![0.0, 1.0]);
    }

    #[test]
    fn aems2_prefers_max_upper() {
        let h = Aems2;
        let mut out = Vec::new();
        h.action_weights(0.0, &[(0.0, 5.0), (0.0, 3.0)], &mut out);
        assert_eq!(out, vec![1.0, 0.0]);
    }

    #[test]
    fn tokens_round_trip() {
        for kind in [
            HeuristicKind::SatiaLave,
            HeuristicKind::BiPomdp,
            HeuristicKind::Aems1,
            HeuristicKind::Aems2,
            HeuristicKind::HsviBfs,
        ] {
            assert_eq!(HeuristicKind::from_token(kind.token()).unwrap(), kind);
        }
        assert!(HeuristicKind::from_token("fancy").is_err());
    }
}
