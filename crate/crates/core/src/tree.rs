//! The AND-OR tree over beliefs: bound propagation, best-fringe bookkeeping,
//! one-step expansion, ancestor updates and subtree reuse across steps.
//!
//! OR-nodes hold beliefs and choose an action; AND-nodes hold an action and
//! weigh all positive-probability observation branches. Each node carries a
//! lower and upper bound on its value. Fringe nodes take theirs from the
//! offline bound functions; interior nodes propagate one-step Bellman backups
//! of their children's bounds, clamped so bounds only tighten. Beliefs are
//! never merged: a belief reached along two paths appears twice.

use std::fmt::Write as _;

use crate::belief::{BeliefDynamics, BeliefState};
use crate::bounds::BoundFunction;
use crate::error::{PomdpError, Result};
use crate::heuristics::{hsvi_bfs_select, NodeSelector};

/// Bound crossings up to this size are treated as float noise and clamped to
/// the midpoint; anything larger means a broken bound function.
pub const BOUND_CROSSING_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OrId(u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AndId(u32);

/// A belief node. Fringe ⇔ `children` is `None` ⇔ `best_fringe` is itself.
#[derive(Debug, Clone)]
pub struct OrNode {
    belief: BeliefState,
    depth: u32,
    lower: f64,
    upper: f64,
    /// Highest heuristic weight product over fringe nodes in this subtree.
    score: f64,
    best_fringe: OrId,
    parent: Option<(AndId, u32)>,
    /// One AND child per action, indexed by action id.
    children: Option<Vec<AndId>>,
    /// Index of the score-maximizing action child (valid when expanded).
    best_child: u32,
}

impl OrNode {
    pub fn belief(&self) -> &BeliefState {
        &self.belief
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn best_fringe(&self) -> OrId {
        self.best_fringe
    }

    pub fn is_fringe(&self) -> bool {
        self.children.is_none()
    }

    pub fn children(&self) -> Option<&[AndId]> {
        self.children.as_deref()
    }

    pub fn parent(&self) -> Option<(AndId, u32)> {
        self.parent
    }
}

/// An action node under a belief node, with cached expected reward and one
/// child per positive-probability observation.
#[derive(Debug, Clone)]
pub struct AndNode {
    action: u32,
    parent: OrId,
    reward: f64,
    lower: f64,
    upper: f64,
    score: f64,
    best_fringe: OrId,
    best_child: u32,
    /// `(observation, Pr(z|b,a), child)`, observation ids ascending.
    children: Vec<(u32, f64, OrId)>,
}

impl AndNode {
    pub fn action(&self) -> usize {
        self.action as usize
    }

    pub fn reward(&self) -> f64 {
        self.reward
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn best_fringe(&self) -> OrId {
        self.best_fringe
    }

    pub fn children(&self) -> &[(u32, f64, OrId)] {
        &self.children
    }

    pub fn parent(&self) -> OrId {
        self.parent
    }
}

pub struct SearchTree<'a> {
    dynamics: &'a dyn BeliefDynamics,
    lower_bound: &'a dyn BoundFunction,
    upper_bound: &'a dyn BoundFunction,
    selector: NodeSelector<'a>,
    or_nodes: Vec<OrNode>,
    and_nodes: Vec<AndNode>,
    root: OrId,
    reused_count: usize,
}

impl<'a> SearchTree<'a> {
    pub fn new(
        dynamics: &'a dyn BeliefDynamics,
        lower_bound: &'a dyn BoundFunction,
        upper_bound: &'a dyn BoundFunction,
        selector: NodeSelector<'a>,
        root_belief: BeliefState,
    ) -> Self {
        let mut tree = SearchTree {
            dynamics,
            lower_bound,
            upper_bound,
            selector,
            or_nodes: Vec::new(),
            and_nodes: Vec::new(),
            root: OrId(0),
            reused_count: 0,
        };
        tree.root = tree.make_or_node(root_belief, 0, None);
        tree
    }

    pub fn root(&self) -> OrId {
        self.root
    }

    pub fn root_node(&self) -> &OrNode {
        &self.or_nodes[self.root.0 as usize]
    }

    pub fn or_node(&self, id: OrId) -> &OrNode {
        &self.or_nodes[id.0 as usize]
    }

    pub fn and_node(&self, id: AndId) -> &AndNode {
        &self.and_nodes[id.0 as usize]
    }

    pub fn or_ids(&self) -> impl Iterator<Item = OrId> {
        (0..self.or_nodes.len() as u32).map(OrId)
    }

    /// Number of belief nodes in the tree.
    pub fn node_count(&self) -> usize {
        self.or_nodes.len()
    }

    /// Belief nodes carried over from the previous step by `reuse_subtree`.
    pub fn reused_count(&self) -> usize {
        self.reused_count
    }

    pub fn discount(&self) -> f64 {
        self.dynamics.discount()
    }

    fn make_or_node(
        &mut self,
        belief: BeliefState,
        depth: u32,
        parent: Option<(AndId, u32)>,
    ) -> OrId {
        let id = OrId(self.or_nodes.len() as u32);
        // Terminal beliefs have value exactly zero; this overrides the
        // offline bounds, which only converge to zero within tolerance.
        let (mut lower, mut upper) = if self.dynamics.is_terminal(&belief) {
            (0.0, 0.0)
        } else {
            (
                self.lower_bound.evaluate(&belief),
                self.upper_bound.evaluate(&belief),
            )
        };
        reconcile_bounds(&mut lower, &mut upper, "fringe initialization");
        let score = match &self.selector {
            NodeSelector::Weighted(h) => h.fringe_weight(lower, upper),
            NodeSelector::GreedyUpper => 0.0,
        };
        self.or_nodes.push(OrNode {
            belief,
            depth,
            lower,
            upper,
            score,
            best_fringe: id,
            parent,
            children: None,
            best_child: 0,
        });
        id
    }

    /// One-step lookahead under a fringe node: materializes an AND child per
    /// action with every positive-probability observation branch, initializes
    /// the new fringe bounds from the offline functions and refreshes this
    /// node's bounds, best action and best-fringe reference.
    pub fn expand(&mut self, node: OrId) -> Result<()> {
        if !self.or_nodes[node.0 as usize].is_fringe() {
            return Err(PomdpError::ExpandNonFringe);
        }
        let belief = self.or_nodes[node.0 as usize].belief.clone();
        let depth = self.or_nodes[node.0 as usize].depth;
        let num_actions = self.dynamics.num_actions();
        let discount = self.dynamics.discount();
        let mut and_ids = Vec::with_capacity(num_actions);
        for action in 0..num_actions {
            let and_id = AndId(self.and_nodes.len() as u32);
            let reward = self.dynamics.expected_reward(&belief, action);
            let successors = self.dynamics.successors(&belief, action);
            let mut children = Vec::with_capacity(successors.len());
            let mut lower = reward;
            let mut upper = reward;
            for (z, prob, next_belief) in successors {
                let child = self.make_or_node(next_belief, depth + 1, Some((and_id, z as u32)));
                let c = &self.or_nodes[child.0 as usize];
                lower += discount * prob * c.lower;
                upper += discount * prob * c.upper;
                children.push((z as u32, prob, child));
            }
            reconcile_bounds(&mut lower, &mut upper, "action backup");
            let (score, best_child, best_fringe) =
                self.and_selection(&children, discount, node);
            self.and_nodes.push(AndNode {
                action: action as u32,
                parent: node,
                reward,
                lower,
                upper,
                score,
                best_fringe,
                best_child,
                children,
            });
            and_ids.push(and_id);
        }
        self.or_nodes[node.0 as usize].children = Some(and_ids);
        self.refresh_or(node);
        Ok(())
    }

    /// Best observation branch of an AND node under the current weights:
    /// `(score, child index, best fringe)`. Ties toward the lowest index,
    /// which is the lowest observation id.
    fn and_selection(
        &self,
        children: &[(u32, f64, OrId)],
        discount: f64,
        fallback: OrId,
    ) -> (f64, u32, OrId) {
        let h = match &self.selector {
            NodeSelector::Weighted(h) => h,
            NodeSelector::GreedyUpper => return (0.0, 0, fallback),
        };
        let mut best_score = f64::NEG_INFINITY;
        let mut best = None;
        for (i, &(_, prob, child)) in children.iter().enumerate() {
            let c = &self.or_nodes[child.0 as usize];
            let score = h.observation_weight(discount, prob, c.lower, c.upper) * c.score;
            if score > best_score {
                best_score = score;
                best = Some((i as u32, c.best_fringe));
            }
        }
        match best {
            Some((i, fringe)) => (best_score, i, fringe),
            None => (0.0, 0, fallback),
        }
    }

    /// Recomputes an OR node's bounds (clamped against its previous values)
    /// and its best action / best-fringe bookkeeping from its AND children.
    fn refresh_or(&mut self, node: OrId) {
        let and_ids = self.or_nodes[node.0 as usize]
            .children
            .take()
            .expect("refresh_or on an expanded node");
        let mut max_lower = f64::NEG_INFINITY;
        let mut max_upper = f64::NEG_INFINITY;
        for &a in &and_ids {
            let n = &self.and_nodes[a.0 as usize];
            max_lower = max_lower.max(n.lower);
            max_upper = max_upper.max(n.upper);
        }
        let prev = &self.or_nodes[node.0 as usize];
        let mut lower = max_lower.max(prev.lower);
        let mut upper = max_upper.min(prev.upper);
        reconcile_bounds(&mut lower, &mut upper, "belief backup");
        if let NodeSelector::Weighted(h) = &self.selector {
            let bounds: Vec<(f64, f64)> = and_ids
                .iter()
                .map(|&a| {
                    let n = &self.and_nodes[a.0 as usize];
                    (n.lower, n.upper)
                })
                .collect();
            let mut weights = Vec::with_capacity(bounds.len());
            h.action_weights(lower, &bounds, &mut weights);
            let mut best_score = f64::NEG_INFINITY;
            let mut best = 0;
            for (i, (&a, &w)) in and_ids.iter().zip(&weights).enumerate() {
                let score = w * self.and_nodes[a.0 as usize].score;
                if score > best_score {
                    best_score = score;
                    best = i;
                }
            }
            let best_fringe = self.and_nodes[and_ids[best].0 as usize].best_fringe;
            let n = &mut self.or_nodes[node.0 as usize];
            n.score = best_score;
            n.best_child = best as u32;
            n.best_fringe = best_fringe;
        }
        let n = &mut self.or_nodes[node.0 as usize];
        n.lower = lower;
        n.upper = upper;
        n.children = Some(and_ids);
    }

    /// Walks parent links from `node` to the root, refreshing bounds and
    /// selection bookkeeping. Cached rewards, branch probabilities and child
    /// beliefs are reused, never recomputed; heuristic weights are recomputed
    /// because they read the refreshed bounds.
    pub fn update_ancestors(&mut self, node: OrId) {
        let discount = self.dynamics.discount();
        let mut current = node;
        while let Some((and_id, _)) = self.or_nodes[current.0 as usize].parent {
            let (lower, upper, selection) = {
                let and = &self.and_nodes[and_id.0 as usize];
                let mut lower = and.reward;
                let mut upper = and.reward;
                for &(_, prob, child) in &and.children {
                    let c = &self.or_nodes[child.0 as usize];
                    lower += discount * prob * c.lower;
                    upper += discount * prob * c.upper;
                }
                reconcile_bounds(&mut lower, &mut upper, "action backup");
                let selection = self.and_selection(&and.children, discount, and.parent);
                (lower, upper, selection)
            };
            let parent = {
                let and = &mut self.and_nodes[and_id.0 as usize];
                and.lower = lower;
                and.upper = upper;
                and.score = selection.0;
                and.best_child = selection.1;
                and.best_fringe = selection.2;
                and.parent
            };
            self.refresh_or(parent);
            current = parent;
        }
    }

    /// The fringe node the selection policy wants expanded next, or nothing
    /// when every fringe path is pruned or already solved.
    pub fn choose_next_node(&self) -> Option<OrId> {
        match &self.selector {
            NodeSelector::Weighted(_) => {
                let root = self.root_node();
                (root.score > 0.0).then_some(root.best_fringe)
            }
            NodeSelector::GreedyUpper => hsvi_bfs_select(self),
        }
    }

    /// True when the gap at the root is within ε, or when every action other
    /// than the lower-bound argmax is dominated (its upper bound does not
    /// exceed the root's lower bound).
    pub fn is_epsilon_optimal(&self, epsilon: f64) -> bool {
        let root = self.root_node();
        if root.upper - root.lower <= epsilon {
            return true;
        }
        let Some(children) = root.children() else {
            return false;
        };
        let Some(best) = self.best_lower_action() else {
            return false;
        };
        children.iter().all(|&a| {
            let n = &self.and_nodes[a.0 as usize];
            n.action as usize == best || root.lower >= n.upper
        })
    }

    /// Argmax over root actions of the lower bound, ties toward the lowest
    /// action id. `None` when the root is unexpanded.
    pub fn best_lower_action(&self) -> Option<usize> {
        let children = self.root_node().children()?;
        let mut best = f64::NEG_INFINITY;
        let mut action = 0;
        for &a in children {
            let n = &self.and_nodes[a.0 as usize];
            if n.lower > best {
                best = n.lower;
                action = n.action as usize;
            }
        }
        Some(action)
    }

    /// True when `action` at `node` is dominated: its upper bound does not
    /// exceed the node's lower bound.
    pub fn action_pruned(&self, node: OrId, action: usize) -> bool {
        let or = self.or_node(node);
        match or.children() {
            Some(children) => {
                let and = &self.and_nodes[children[action].0 as usize];
                and.upper <= or.lower
            }
            None => false,
        }
    }

    /// Re-roots the tree after executing `action` and observing `z`. If the
    /// matching grandchild exists its subtree is kept verbatim (bounds and
    /// bookkeeping untouched, depths shifted); otherwise a fresh root is
    /// built from the updated belief and the offline bounds.
    pub fn reuse_subtree(self, action: usize, observation: usize) -> Result<SearchTree<'a>> {
        let kept = {
            let root = self.root_node();
            root.children().and_then(|children| {
                let and = &self.and_nodes[children[action].0 as usize];
                and.children
                    .iter()
                    .find(|&&(z, _, _)| z as usize == observation)
                    .map(|&(_, _, child)| child)
            })
        };
        match kept {
            Some(child) => Ok(self.split_off(child)),
            None => {
                let next_belief = self.dynamics.update(
                    &self.or_nodes[self.root.0 as usize].belief,
                    action,
                    observation,
                )?;
                let SearchTree {
                    dynamics,
                    lower_bound,
                    upper_bound,
                    selector,
                    ..
                } = self;
                Ok(SearchTree::new(
                    dynamics,
                    lower_bound,
                    upper_bound,
                    selector,
                    next_belief,
                ))
            }
        }
    }

    /// Copies the subtree under `new_root` into fresh arenas.
    fn split_off(self, new_root: OrId) -> SearchTree<'a> {
        let depth_shift = self.or_nodes[new_root.0 as usize].depth;
        // Pass one: enumerate the kept OR nodes and assign new ids.
        let mut or_map: std::collections::HashMap<u32, u32> = std::collections::HashMap::new();
        let mut order = Vec::new();
        let mut stack = vec![new_root];
        while let Some(id) = stack.pop() {
            or_map.insert(id.0, order.len() as u32);
            order.push(id);
            if let Some(children) = self.or_nodes[id.0 as usize].children() {
                for &and_id in children {
                    for &(_, _, child) in &self.and_nodes[and_id.0 as usize].children {
                        stack.push(child);
                    }
                }
            }
        }
        // Pass two: copy nodes with remapped ids and shifted depths.
        let mut or_nodes = Vec::with_capacity(order.len());
        let mut and_nodes = Vec::new();
        for &old_or in &order {
            let old = &self.or_nodes[old_or.0 as usize];
            let new_children = old.children().map(|children| {
                children
                    .iter()
                    .map(|&old_and| {
                        let a = &self.and_nodes[old_and.0 as usize];
                        let new_and_id = AndId(and_nodes.len() as u32);
                        and_nodes.push(AndNode {
                            action: a.action,
                            parent: OrId(or_map[&old_or.0]),
                            reward: a.reward,
                            lower: a.lower,
                            upper: a.upper,
                            score: a.score,
                            best_fringe: OrId(or_map[&a.best_fringe.0]),
                            best_child: a.best_child,
                            children: a
                                .children
                                .iter()
                                .map(|&(z, p, c)| (z, p, OrId(or_map[&c.0])))
                                .collect(),
                        });
                        new_and_id
                    })
                    .collect::<Vec<_>>()
            });
            or_nodes.push(OrNode {
                belief: old.belief.clone(),
                depth: old.depth - depth_shift,
                lower: old.lower,
                upper: old.upper,
                score: old.score,
                best_fringe: OrId(or_map[&old.best_fringe.0]),
                parent: None, // rebuilt below from the AND children
                children: new_children,
                best_child: old.best_child,
            });
        }
        for and_id in 0..and_nodes.len() {
            for i in 0..and_nodes[and_id].children.len() {
                let (z, _, child) = and_nodes[and_id].children[i];
                or_nodes[child.0 as usize].parent = Some((AndId(and_id as u32), z));
            }
        }
        let reused_count = or_nodes.len();
        SearchTree {
            dynamics: self.dynamics,
            lower_bound: self.lower_bound,
            upper_bound: self.upper_bound,
            selector: self.selector,
            or_nodes,
            and_nodes,
            root: OrId(or_map[&new_root.0]),
            reused_count,
        }
    }

    /// Indented diagnostic dump, one node per line, for golden-file debugging.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        self.dump_or(self.root, 0, &mut out);
        out
    }

    fn dump_or(&self, id: OrId, indent: usize, out: &mut String) {
        let n = self.or_node(id);
        let _ = writeln!(
            out,
            "{:indent$}OR d={} L={:.6} U={:.6} H*={:.6}",
            "",
            n.depth,
            n.lower,
            n.upper,
            n.score,
            indent = indent
        );
        if let Some(children) = n.children() {
            for &and_id in children {
                let a = self.and_node(and_id);
                let probs = a
                    .children
                    .iter()
                    .map(|&(_, p, _)| format!("{p:.6}"))
                    .collect::<Vec<_>>()
                    .join(",");
                let _ = writeln!(
                    out,
                    "{:indent$}AND a={} p(z)={}",
                    "",
                    a.action,
                    probs,
                    indent = indent + 2
                );
                for &(_, _, child) in &a.children {
                    self.dump_or(child, indent + 4, out);
                }
            }
        }
    }
}

/// Clamps tiny lower/upper crossings to the midpoint; larger crossings are an
/// internal consistency failure.
fn reconcile_bounds(lower: &mut f64, upper: &mut f64, context: &str) {
    if *lower > *upper {
        let crossing = *lower - *upper;
        if crossing <= BOUND_CROSSING_TOLERANCE {
            let mid = 0.5 * (*lower + *upper);
            log::warn!("bound crossing of {crossing:.3e} during {context}, clamping to midpoint");
            *lower = mid;
            *upper = mid;
        } else {
            panic!(
                "bound crossing of {crossing:.3e} during {context}: lower {lower} > upper {upper}"
            );
        }
    }
}
