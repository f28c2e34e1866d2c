//! Sparse belief states and the belief-MDP primitives.
//!
//! A belief is a probability distribution over hidden states, stored sparsely
//! as a sorted `(state, probability)` list. The update rule is Bayes filtering:
//! the posterior over successor states after acting and observing, normalized
//! by the observation probability. Everything downstream (bound evaluation,
//! tree search, planners) goes through the [`BeliefDynamics`] contract so that
//! flat sparse-matrix models and factored domain realizations are
//! interchangeable.

use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};

use crate::error::{PomdpError, Result};
use crate::model::PomdpModel;

/// Entries below this are dropped (followed by a renormalization) whenever a
/// belief is constructed. Keeps beliefs compact without measurably perturbing
/// bound values.
pub const DROP_TOLERANCE: f64 = 1e-12;

/// Sparse probability distribution over state ids.
///
/// Invariants: entries are sorted by state id, all probabilities are positive,
/// and they sum to 1 within 1e-9. Equality and hashing are defined over the
/// canonical sorted entry list (exact f64 bits), which is what value stores
/// keyed by beliefs rely on.
#[derive(Debug, Clone)]
pub struct BeliefState {
    entries: Vec<(u32, f64)>,
}

impl BeliefState {
    /// Builds a belief from (state, weight) pairs. Weights are normalized,
    /// entries below [`DROP_TOLERANCE`] are dropped and the rest renormalized.
    pub fn from_entries(entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut map: BTreeMap<u32, f64> = BTreeMap::new();
        for (s, w) in entries {
            if !w.is_finite() || w < 0.0 {
                return Err(PomdpError::Validation(format!(
                    "belief weight for state {s} is {w}"
                )));
            }
            if w > 0.0 {
                *map.entry(s as u32).or_insert(0.0) += w;
            }
        }
        let total: f64 = map.values().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(PomdpError::Validation(format!(
                "belief has non-positive total mass {total}"
            )));
        }
        let mut entries: Vec<(u32, f64)> = map
            .into_iter()
            .filter_map(|(s, w)| {
                let p = w / total;
                (p >= DROP_TOLERANCE).then_some((s, p))
            })
            .collect();
        if entries.is_empty() {
            return Err(PomdpError::Validation(
                "belief lost all mass to the drop tolerance".into(),
            ));
        }
        let kept: f64 = entries.iter().map(|&(_, p)| p).sum();
        for e in &mut entries {
            e.1 /= kept;
        }
        Ok(BeliefState { entries })
    }

    pub fn from_dense(probs: &[f64]) -> Result<Self> {
        Self::from_entries(probs.iter().copied().enumerate())
    }

    pub fn point_mass(state: usize) -> Self {
        BeliefState {
            entries: vec![(state as u32, 1.0)],
        }
    }

    pub fn uniform_over(states: impl IntoIterator<Item = usize>) -> Result<Self> {
        Self::from_entries(states.into_iter().map(|s| (s, 1.0)))
    }

    /// Sorted `(state, probability)` entries.
    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn prob(&self, state: usize) -> f64 {
        match self.entries.binary_search_by_key(&(state as u32), |e| e.0) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0.0,
        }
    }

    /// Dot product against a dense per-state value array.
    pub fn dot_dense(&self, values: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(s, p)| p * values[s as usize])
            .sum()
    }

    pub fn l1_distance(&self, other: &BeliefState) -> f64 {
        let mut d = 0.0;
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() || j < b.len() {
            match (a.get(i), b.get(j)) {
                (Some(&(sa, pa)), Some(&(sb, pb))) => {
                    if sa == sb {
                        d += (pa - pb).abs();
                        i += 1;
                        j += 1;
                    } else if sa < sb {
                        d += pa;
                        i += 1;
                    } else {
                        d += pb;
                        j += 1;
                    }
                }
                (Some(&(_, pa)), None) => {
                    d += pa;
                    i += 1;
                }
                (None, Some(&(_, pb))) => {
                    d += pb;
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        d
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|&(_, p)| p).sum()
    }
}

impl PartialEq for BeliefState {
    fn eq(&self, other: &Self) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.0 == b.0 && a.1.to_bits() == b.1.to_bits())
    }
}

impl Eq for BeliefState {}

impl Hash for BeliefState {
    fn hash<H: Hasher>(&self, state: &mut H) {
        for &(s, p) in &self.entries {
            s.hash(state);
            p.to_bits().hash(state);
        }
    }
}

/// The exact belief-MDP primitives behind a common contract.
///
/// A flat realization computes everything from the sparse model matrices; a
/// factored realization (RockSample, FieldVisionRockSample, Tag) exploits the
/// domain structure but must produce identical results within float noise.
pub trait BeliefDynamics: Sync {
    fn num_actions(&self) -> usize;
    fn num_observations(&self) -> usize;
    fn discount(&self) -> f64;
    fn initial_belief(&self) -> BeliefState;

    /// Bayes update τ(b, a, z). Errors with `ZeroProbabilityObservation` when
    /// Pr(z|b,a) = 0, signalling the caller enumerated an impossible branch.
    fn update(&self, belief: &BeliefState, action: usize, observation: usize)
        -> Result<BeliefState>;

    /// Pr(z|b,a), the normalizing constant of the update.
    fn observation_probability(&self, belief: &BeliefState, action: usize, observation: usize)
        -> f64;

    /// Immediate expected reward of executing `action` in `belief`.
    fn expected_reward(&self, belief: &BeliefState, action: usize) -> f64;

    /// True iff the entire belief support is absorbing zero-reward states.
    fn is_terminal(&self, belief: &BeliefState) -> bool;

    /// All positive-probability observation branches of `(belief, action)`:
    /// `(z, Pr(z|b,a), τ(b,a,z))`, ordered by observation id. Zero-probability
    /// observations are never materialized.
    fn successors(&self, belief: &BeliefState, action: usize) -> Vec<(usize, f64, BeliefState)> {
        let mut out = Vec::new();
        for z in 0..self.num_observations() {
            let p = self.observation_probability(belief, action, z);
            if p > 0.0 {
                if let Ok(next) = self.update(belief, action, z) {
                    out.push((z, p, next));
                }
            }
        }
        out
    }
}

/// Belief-state update function τ(b, a, z) computed from the flat model.
pub fn belief_update(
    model: &PomdpModel,
    belief: &BeliefState,
    action: usize,
    observation: usize,
) -> Result<BeliefState> {
    let projected = project(model, belief, action);
    let mut weights: Vec<(u32, f64)> = Vec::with_capacity(projected.len());
    let mut total = 0.0;
    for &(s2, mass) in &projected {
        let w = mass * model.observation_prob(action, s2 as usize, observation);
        if w > 0.0 {
            weights.push((s2, w));
            total += w;
        }
    }
    if total <= 0.0 {
        return Err(PomdpError::ZeroProbabilityObservation {
            action,
            observation,
        });
    }
    BeliefState::from_entries(weights.into_iter().map(|(s, w)| (s as usize, w)))
}

/// Pr(z|b,a) = Σ_{s'} O(s',a,z) Σ_s T(s,a,s') b(s).
pub fn observation_probability(
    model: &PomdpModel,
    belief: &BeliefState,
    action: usize,
    observation: usize,
) -> f64 {
    project(model, belief, action)
        .iter()
        .map(|&(s2, mass)| mass * model.observation_prob(action, s2 as usize, observation))
        .sum()
}

/// Immediate expected reward Σ_s b(s) R(s,a).
pub fn belief_reward(model: &PomdpModel, belief: &BeliefState, action: usize) -> f64 {
    belief
        .entries()
        .iter()
        .map(|&(s, p)| p * model.reward(s as usize, action))
        .sum()
}

/// Pushes the belief through the transition function: Σ_s T(s,a,·) b(s).
fn project(model: &PomdpModel, belief: &BeliefState, action: usize) -> Vec<(u32, f64)> {
    let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
    for &(s, p) in belief.entries() {
        for &(s2, t) in model.transition_row(action, s as usize) {
            *acc.entry(s2).or_insert(0.0) += p * t;
        }
    }
    acc.into_iter().collect()
}

/// Flat realization of the belief contract backed by the sparse model.
pub struct FlatDynamics {
    model: std::sync::Arc<PomdpModel>,
}

impl FlatDynamics {
    pub fn new(model: std::sync::Arc<PomdpModel>) -> Self {
        FlatDynamics { model }
    }

    pub fn model(&self) -> &PomdpModel {
        &self.model
    }
}

impl BeliefDynamics for FlatDynamics {
    fn num_actions(&self) -> usize {
        self.model.num_actions()
    }

    fn num_observations(&self) -> usize {
        self.model.num_observations()
    }

    fn discount(&self) -> f64 {
        self.model.discount()
    }

    fn initial_belief(&self) -> BeliefState {
        self.model.initial_belief().clone()
    }

    fn update(
        &self,
        belief: &BeliefState,
        action: usize,
        observation: usize,
    ) -> Result<BeliefState> {
        belief_update(&self.model, belief, action, observation)
    }

    fn observation_probability(
        &self,
        belief: &BeliefState,
        action: usize,
        observation: usize,
    ) -> f64 {
        observation_probability(&self.model, belief, action, observation)
    }

    fn expected_reward(&self, belief: &BeliefState, action: usize) -> f64 {
        belief_reward(&self.model, belief, action)
    }

    fn is_terminal(&self, belief: &BeliefState) -> bool {
        belief
            .entries()
            .iter()
            .all(|&(s, _)| self.model.is_terminal_state(s as usize))
    }

    fn successors(&self, belief: &BeliefState, action: usize) -> Vec<(usize, f64, BeliefState)> {
        // Shares the projection across observations instead of recomputing it
        // per z.
        let projected = project(&self.model, belief, action);
        let mut out = Vec::new();
        for z in 0..self.model.num_observations() {
            let mut weights: Vec<(usize, f64)> = Vec::new();
            let mut total = 0.0;
            for &(s2, mass) in &projected {
                let w = mass * self.model.observation_prob(action, s2 as usize, z);
                if w > 0.0 {
                    weights.push((s2 as usize, w));
                    total += w;
                }
            }
            if total > 0.0 {
                if let Ok(next) = BeliefState::from_entries(weights) {
                    out.push((z, total, next));
                }
            }
        }
        out
    }
}
