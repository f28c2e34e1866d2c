//! Benchmark domain generators: Tag, RockSample[n,k] and
//! FieldVisionRockSample[n,k].
//!
//! Each domain is described once as [`DomainMechanics`]: analytic per-state
//! transitions, rewards and observation distributions. From that single
//! description we derive both the flat sparse [`PomdpModel`] (for validation,
//! serialization and oracle tests) and a [`StructuredDynamics`] realization of
//! the belief contract that computes updates directly from the domain
//! structure. The two must agree within float tolerance on every belief.

mod fvrs;
mod rocksample;
mod tag;

pub use fvrs::{build_fvrs, FvrsSpec};
pub use rocksample::{build_rocksample, rock_sensor_accuracy, RockSampleRewards, RockSampleSpec};
pub use tag::{build_tag, TagSpec};

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::belief::{BeliefDynamics, BeliefState};
use crate::error::{PomdpError, Result};
use crate::model::{PomdpModel, SparseRows};

/// One domain, fully described by per-state mechanics.
pub trait DomainMechanics: Sync + Send {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn num_observations(&self) -> usize;
    fn discount(&self) -> f64;
    fn reward(&self, state: usize, action: usize) -> f64;
    fn is_terminal(&self, state: usize) -> bool;
    /// Successor distribution; probabilities sum to 1.
    fn transitions_into(&self, state: usize, action: usize, out: &mut Vec<(usize, f64)>);
    /// Observation distribution on arrival in `next_state`; sums to 1,
    /// zero-probability observations omitted, ids ascending.
    fn observations_into(&self, next_state: usize, action: usize, out: &mut Vec<(usize, f64)>);
    fn observation_weight(&self, next_state: usize, action: usize, observation: usize) -> f64;
    /// Initial belief as (state, weight) pairs.
    fn initial_states(&self) -> Vec<(usize, f64)>;
}

/// Materializes the flat sparse model from the mechanics.
pub fn build_flat_model<M: DomainMechanics>(mechanics: &M) -> Result<PomdpModel> {
    let n = mechanics.num_states();
    let mut transitions = Vec::with_capacity(mechanics.num_actions());
    let mut observations = Vec::with_capacity(mechanics.num_actions());
    let mut rewards = vec![0.0; n * mechanics.num_actions()];
    let mut buffer = Vec::new();
    for a in 0..mechanics.num_actions() {
        let mut t_rows = Vec::with_capacity(n);
        let mut o_rows = Vec::with_capacity(n);
        for s in 0..n {
            buffer.clear();
            mechanics.transitions_into(s, a, &mut buffer);
            t_rows.push(buffer.iter().map(|&(s2, p)| (s2 as u32, p)).collect());
            buffer.clear();
            mechanics.observations_into(s, a, &mut buffer);
            o_rows.push(buffer.iter().map(|&(z, p)| (z as u32, p)).collect());
            rewards[s * mechanics.num_actions() + a] = mechanics.reward(s, a);
        }
        transitions.push(SparseRows::from_rows(n, t_rows));
        observations.push(SparseRows::from_rows(mechanics.num_observations(), o_rows));
    }
    let initial = BeliefState::from_entries(mechanics.initial_states())?;
    let terminal: Vec<usize> = (0..n).filter(|&s| mechanics.is_terminal(s)).collect();
    PomdpModel::new(
        transitions,
        observations,
        rewards,
        mechanics.discount(),
        initial,
        Some(terminal),
    )
}

/// Factored realization of the belief contract: updates computed from the
/// domain mechanics instead of the sparse matrices.
pub struct StructuredDynamics<M: DomainMechanics> {
    mechanics: M,
}

impl<M: DomainMechanics> StructuredDynamics<M> {
    pub fn new(mechanics: M) -> Self {
        StructuredDynamics { mechanics }
    }

    pub fn mechanics(&self) -> &M {
        &self.mechanics
    }

    fn project(&self, belief: &BeliefState, action: usize) -> BTreeMap<usize, f64> {
        let mut acc = BTreeMap::new();
        let mut buffer = Vec::new();
        for &(s, p) in belief.entries() {
            self.mechanics
                .transitions_into(s as usize, action, &mut buffer);
            for &(s2, t) in &buffer {
                *acc.entry(s2).or_insert(0.0) += p * t;
            }
            buffer.clear();
        }
        acc
    }
}

impl<M: DomainMechanics> BeliefDynamics for StructuredDynamics<M> {
    fn num_actions(&self) -> usize {
        self.mechanics.num_actions()
    }

    fn num_observations(&self) -> usize {
        self.mechanics.num_observations()
    }

    fn discount(&self) -> f64 {
        self.mechanics.discount()
    }

    fn initial_belief(&self) -> BeliefState {
        BeliefState::from_entries(self.mechanics.initial_states())
            .expect("domain initial belief is well-formed")
    }

    fn update(
        &self,
        belief: &BeliefState,
        action: usize,
        observation: usize,
    ) -> Result<BeliefState> {
        let mut total = 0.0;
        let mut weights = Vec::new();
        for (s2, mass) in self.project(belief, action) {
            let w = mass * self.mechanics.observation_weight(s2, action, observation);
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
        BeliefState::from_entries(weights)
    }

    fn observation_probability(
        &self,
        belief: &BeliefState,
        action: usize,
        observation: usize,
    ) -> f64 {
        self.project(belief, action)
            .into_iter()
            .map(|(s2, mass)| {
                mass * self.mechanics.observation_weight(s2, action, observation)
            })
            .sum()
    }

    fn expected_reward(&self, belief: &BeliefState, action: usize) -> f64 {
        belief
            .entries()
            .iter()
            .map(|&(s, p)| p * self.mechanics.reward(s as usize, action))
            .sum()
    }

    fn is_terminal(&self, belief: &BeliefState) -> bool {
        belief
            .entries()
            .iter()
            .all(|&(s, _)| self.mechanics.is_terminal(s as usize))
    }

    fn successors(&self, belief: &BeliefState, action: usize) -> Vec<(usize, f64, BeliefState)> {
        let projected = self.project(belief, action);
        let mut per_obs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.num_observations()];
        let mut totals = vec![0.0; self.num_observations()];
        let mut buffer = Vec::new();
        for (&s2, &mass) in &projected {
            self.mechanics.observations_into(s2, action, &mut buffer);
            for &(z, w) in &buffer {
                let weight = mass * w;
                if weight > 0.0 {
                    per_obs[z].push((s2, weight));
                    totals[z] += weight;
                }
            }
            buffer.clear();
        }
        per_obs
            .into_iter()
            .enumerate()
            .filter(|(z, entries)| totals[*z] > 0.0 && !entries.is_empty())
            .filter_map(|(z, entries)| {
                BeliefState::from_entries(entries)
                    .ok()
                    .map(|b| (z, totals[z], b))
            })
            .collect()
    }
}

/// Domain selector strings: `tag`, `rocksample:<n>,<k>`, `fvrs:<n>,<k>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DomainSpecifier {
    Tag,
    RockSample { n: usize, k: usize },
    Fvrs { n: usize, k: usize },
}

impl DomainSpecifier {
    pub fn parse(selector: &str) -> Result<Self> {
        if selector == "tag" {
            return Ok(DomainSpecifier::Tag);
        }
        let parse_nk = |rest: &str| -> Result<(usize, usize)> {
            let (n, k) = rest.split_once(',').ok_or_else(|| {
                PomdpError::Config(format!("expected `<n>,<k>` after `:` in `{selector}`"))
            })?;
            let n = n
                .trim()
                .parse()
                .map_err(|_| PomdpError::Config(format!("bad grid size in `{selector}`")))?;
            let k = k
                .trim()
                .parse()
                .map_err(|_| PomdpError::Config(format!("bad rock count in `{selector}`")))?;
            Ok((n, k))
        };
        if let Some(rest) = selector.strip_prefix("rocksample:") {
            let (n, k) = parse_nk(rest)?;
            return Ok(DomainSpecifier::RockSample { n, k });
        }
        if let Some(rest) = selector.strip_prefix("fvrs:") {
            let (n, k) = parse_nk(rest)?;
            return Ok(DomainSpecifier::Fvrs { n, k });
        }
        Err(PomdpError::Config(format!(
            "unknown domain `{selector}` (expected tag, rocksample:<n>,<k> or fvrs:<n>,<k>)"
        )))
    }
}

/// A built domain: the flat model plus its factored belief realization.
pub struct GeneratedDomain {
    pub name: String,
    pub model: Arc<PomdpModel>,
    pub factored: Arc<dyn BeliefDynamics + Send + Sync>,
}

/// Builds a domain from its selector, using the canonical layout (or a
/// deterministic placement) unless an explicit layout is given.
pub fn build_domain(
    spec: &DomainSpecifier,
    layout: Option<Vec<(usize, usize)>>,
) -> Result<GeneratedDomain> {
    match *spec {
        DomainSpecifier::Tag => {
            let (model, dynamics) = build_tag()?;
            Ok(GeneratedDomain {
                name: "tag".into(),
                model: Arc::new(model),
                factored: Arc::new(dynamics),
            })
        }
        DomainSpecifier::RockSample { n, k } => {
            let layout = layout.map(Ok).unwrap_or_else(|| default_layout(n, k))?;
            let (model, dynamics) = build_rocksample(n, k, &layout)?;
            Ok(GeneratedDomain {
                name: format!("rocksample:{n},{k}"),
                model: Arc::new(model),
                factored: Arc::new(dynamics),
            })
        }
        DomainSpecifier::Fvrs { n, k } => {
            let layout = layout.map(Ok).unwrap_or_else(|| default_layout(n, k))?;
            let (model, dynamics) = build_fvrs(n, k, &layout)?;
            Ok(GeneratedDomain {
                name: format!("fvrs:{n},{k}"),
                model: Arc::new(model),
                factored: Arc::new(dynamics),
            })
        }
    }
}

const ROCKSAMPLE_7_8: &str = include_str!("../../data/rocksample_7_8.layout");
const ROCKSAMPLE_10_10: &str = include_str!("../../data/rocksample_10_10.layout");

/// The canonical rock layout for [7,8] and [10,10]; a deterministic seeded
/// placement for other sizes.
pub fn default_layout(n: usize, k: usize) -> Result<Vec<(usize, usize)>> {
    match (n, k) {
        (7, 8) => parse_layout(ROCKSAMPLE_7_8),
        (10, 10) => parse_layout(ROCKSAMPLE_10_10),
        _ => {
            if k > n * n {
                return Err(PomdpError::InvalidLayout(format!(
                    "{k} rocks cannot fit an {n}x{n} grid"
                )));
            }
            let mut cells: Vec<(usize, usize)> = (0..n * n).map(|i| (i % n, i / n)).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(0x524f434b ^ ((n as u64) << 16) ^ k as u64);
            cells.shuffle(&mut rng);
            cells.truncate(k);
            cells.sort();
            Ok(cells)
        }
    }
}

/// Parses a layout file: one `x y` pair per line, `#` comments.
pub fn parse_layout(text: &str) -> Result<Vec<(usize, usize)>> {
    let mut rocks = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let bad = || PomdpError::InvalidLayout(format!("line {}: expected `x y`", idx + 1));
        let x = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let y = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if it.next().is_some() {
            return Err(bad());
        }
        rocks.push((x, y));
    }
    Ok(rocks)
}
