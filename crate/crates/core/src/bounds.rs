//! Offline α-vector bounds on the optimal value function.
//!
//! Lower bounds: Blind (one vector per always-the-same-action policy) and
//! PBVI (point-based backups over a sampled belief set). Upper bounds: the
//! underlying MDP value function, QMDP and FIB. All iterative solvers run
//! until the sup-norm residual drops below `residual_tol` or `max_iters` is
//! hit; every intermediate iterate is already a valid bound (lower bounds
//! start below their fixed point and increase, upper bounds start above and
//! decrease), so early stopping never invalidates a bound.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::belief::{BeliefState, FlatDynamics};
use crate::error::{PomdpError, Result};
use crate::model::{PomdpModel, SparseRows};

/// Which side of the optimal value function a bound lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Lower,
    Upper,
}

impl BoundKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::Lower => "lower",
            BoundKind::Upper => "upper",
        }
    }
}

/// A linear value function over beliefs, tagged with the action it backs.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaVector {
    pub action: usize,
    pub values: Vec<f64>,
}

impl AlphaVector {
    pub fn dot(&self, belief: &BeliefState) -> f64 {
        belief.dot_dense(&self.values)
    }
}

/// A non-empty set of α-vectors representing a piecewise-linear convex bound.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaVectorSet {
    pub kind: BoundKind,
    vectors: Vec<AlphaVector>,
}

impl AlphaVectorSet {
    pub fn new(kind: BoundKind, vectors: Vec<AlphaVector>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(PomdpError::Validation("empty alpha-vector set".into()));
        }
        let len = vectors[0].values.len();
        if vectors.iter().any(|v| v.values.len() != len) {
            return Err(PomdpError::Validation(
                "alpha vectors have mismatched lengths".into(),
            ));
        }
        if vectors
            .iter()
            .any(|v| v.values.iter().any(|x| !x.is_finite()))
        {
            return Err(PomdpError::Validation(
                "alpha vector with non-finite entry".into(),
            ));
        }
        Ok(AlphaVectorSet { kind, vectors })
    }

    pub fn vectors(&self) -> &[AlphaVector] {
        &self.vectors
    }

    pub fn num_states(&self) -> usize {
        self.vectors[0].values.len()
    }

    /// Max over vectors of α·b together with the winning vector's action.
    /// Ties break toward the lowest vector index.
    pub fn evaluate_with_action(&self, belief: &BeliefState) -> (f64, usize) {
        let mut best = f64::NEG_INFINITY;
        let mut action = self.vectors[0].action;
        for v in &self.vectors {
            let value = v.dot(belief);
            if value > best {
                best = value;
                action = v.action;
            }
        }
        (best, action)
    }
}

/// Evaluation contract shared by every bound representation.
pub trait BoundFunction: Sync {
    fn evaluate(&self, belief: &BeliefState) -> f64;

    /// Evaluates at a sparse, possibly unnormalized weight vector; used for
    /// discretized beliefs, whose entries intentionally need not sum to one.
    fn evaluate_entries(&self, entries: &[(u32, f64)]) -> f64;

    fn kind(&self) -> BoundKind;
}

impl BoundFunction for AlphaVectorSet {
    fn evaluate(&self, belief: &BeliefState) -> f64 {
        self.evaluate_with_action(belief).0
    }

    fn evaluate_entries(&self, entries: &[(u32, f64)]) -> f64 {
        self.vectors
            .iter()
            .map(|v| {
                entries
                    .iter()
                    .map(|&(s, w)| w * v.values[s as usize])
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn kind(&self) -> BoundKind {
        self.kind
    }
}

/// Per-state value array evaluated as Σ_s V(s) b(s); how the MDP upper bound
/// is represented.
#[derive(Debug, Clone, PartialEq)]
pub struct StateValueBound {
    pub kind: BoundKind,
    pub values: Vec<f64>,
}

impl BoundFunction for StateValueBound {
    fn evaluate(&self, belief: &BeliefState) -> f64 {
        belief.dot_dense(&self.values)
    }

    fn evaluate_entries(&self, entries: &[(u32, f64)]) -> f64 {
        entries
            .iter()
            .map(|&(s, w)| w * self.values[s as usize])
            .sum()
    }

    fn kind(&self) -> BoundKind {
        self.kind
    }
}

/// Stopping rule for the iterative solvers.
#[derive(Debug, Clone, Copy)]
pub struct SolverParams {
    pub residual_tol: f64,
    pub max_iters: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            residual_tol: 1e-6,
            max_iters: 10_000,
        }
    }
}

/// Iteration diagnostics: sup-norm change per iteration.
#[derive(Debug, Clone, Default)]
pub struct SolveInfo {
    pub residuals: Vec<f64>,
}

impl SolveInfo {
    pub fn iterations(&self) -> usize {
        self.residuals.len()
    }
}

/// Blind-policy lower bound: one α-vector per action, each the value of
/// always executing that action, iterated from min_s R(s,a)/(1-γ).
pub fn blind_bound(model: &PomdpModel, params: &SolverParams) -> AlphaVectorSet {
    blind_bound_traced(model, params).0
}

pub fn blind_bound_traced(
    model: &PomdpModel,
    params: &SolverParams,
) -> (AlphaVectorSet, SolveInfo) {
    let n = model.num_states();
    let gamma = model.discount();
    let mut info = SolveInfo::default();
    let mut vectors = Vec::with_capacity(model.num_actions());
    for a in 0..model.num_actions() {
        let floor = (0..n)
            .map(|s| model.reward(s, a))
            .fold(f64::INFINITY, f64::min)
            / (1.0 - gamma);
        let mut alpha = vec![floor; n];
        let mut residuals = Vec::new();
        for _ in 0..params.max_iters {
            let mut next = vec![0.0; n];
            let mut residual = 0.0f64;
            for s in 0..n {
                let mut v = model.reward(s, a);
                for &(s2, t) in model.transition_row(a, s) {
                    v += gamma * t * alpha[s2 as usize];
                }
                residual = residual.max((v - alpha[s]).abs());
                next[s] = v;
            }
            alpha = next;
            residuals.push(residual);
            if residual < params.residual_tol {
                break;
            }
        }
        // Keep the longest per-action trace; actions converge at the same
        // geometric rate so any of them documents the solve.
        if residuals.len() > info.residuals.len() {
            info.residuals = residuals;
        }
        vectors.push(AlphaVector { action: a, values: alpha });
    }
    (
        AlphaVectorSet::new(BoundKind::Lower, vectors).expect("non-empty by construction"),
        info,
    )
}

/// MDP upper bound V(s) via value iteration on the fully observable problem,
/// started at R_max/(1-γ) so every iterate stays above the fixed point.
pub fn mdp_bound(model: &PomdpModel, params: &SolverParams) -> StateValueBound {
    mdp_bound_traced(model, params).0
}

pub fn mdp_bound_traced(
    model: &PomdpModel,
    params: &SolverParams,
) -> (StateValueBound, SolveInfo) {
    let n = model.num_states();
    let gamma = model.discount();
    let ceiling = model.max_reward() / (1.0 - gamma);
    let mut values = vec![ceiling; n];
    let mut info = SolveInfo::default();
    for _ in 0..params.max_iters {
        let mut next = vec![0.0; n];
        let mut residual = 0.0f64;
        for s in 0..n {
            let mut best = f64::NEG_INFINITY;
            for a in 0..model.num_actions() {
                let mut q = model.reward(s, a);
                for &(s2, t) in model.transition_row(a, s) {
                    q += gamma * t * values[s2 as usize];
                }
                best = best.max(q);
            }
            residual = residual.max((best - values[s]).abs());
            next[s] = best;
        }
        values = next;
        info.residuals.push(residual);
        if residual < params.residual_tol {
            break;
        }
    }
    (
        StateValueBound {
            kind: BoundKind::Upper,
            values,
        },
        info,
    )
}

/// QMDP upper bound: one α-vector per action with αᵃ(s) = Q(s,a) under the
/// converged MDP values (partial observability vanishes after one step).
pub fn qmdp_bound(model: &PomdpModel, params: &SolverParams) -> AlphaVectorSet {
    qmdp_from_values(model, &mdp_bound(model, params))
}

pub fn qmdp_from_values(model: &PomdpModel, mdp: &StateValueBound) -> AlphaVectorSet {
    let n = model.num_states();
    let gamma = model.discount();
    let vectors = (0..model.num_actions())
        .map(|a| {
            let values = (0..n)
                .map(|s| {
                    let mut q = model.reward(s, a);
                    for &(s2, t) in model.transition_row(a, s) {
                        q += gamma * t * mdp.values[s2 as usize];
                    }
                    q
                })
                .collect();
            AlphaVector { action: a, values }
        })
        .collect();
    AlphaVectorSet::new(BoundKind::Upper, vectors).expect("non-empty by construction")
}

/// Fast Informed Bound: starts from the QMDP vectors and iterates
/// αᵃ(s) ← R(s,a) + γ Σ_z max_α Σ_s' O(s',a,z) T(s,a,s') α(s').
/// Iterates decrease pointwise, so the result is a valid upper bound no
/// tighter than the FIB fixed point and never looser than QMDP.
pub fn fib_bound(model: &PomdpModel, params: &SolverParams) -> AlphaVectorSet {
    fib_bound_traced(model, params).0
}

pub fn fib_bound_traced(
    model: &PomdpModel,
    params: &SolverParams,
) -> (AlphaVectorSet, SolveInfo) {
    let qmdp = qmdp_bound(model, params);
    let (set, info) = fib_from_qmdp(model, &qmdp, params);
    (set, info)
}

pub fn fib_from_qmdp(
    model: &PomdpModel,
    qmdp: &AlphaVectorSet,
    params: &SolverParams,
) -> (AlphaVectorSet, SolveInfo) {
    let n = model.num_states();
    let na = model.num_actions();
    let nz = model.num_observations();
    let gamma = model.discount();
    let mut alphas: Vec<Vec<f64>> = qmdp.vectors().iter().map(|v| v.values.clone()).collect();
    let mut info = SolveInfo::default();
    for _ in 0..params.max_iters {
        let mut next = vec![vec![0.0; n]; na];
        let mut residual = 0.0f64;
        for a in 0..na {
            for s in 0..n {
                let row = model.transition_row(a, s);
                let mut v = model.reward(s, a);
                for z in 0..nz {
                    let mut best = f64::NEG_INFINITY;
                    for alpha in &alphas {
                        let mut sum = 0.0;
                        for &(s2, t) in row {
                            sum += model.observation_prob(a, s2 as usize, z)
                                * t
                                * alpha[s2 as usize];
                        }
                        best = best.max(sum);
                    }
                    v += gamma * best;
                }
                residual = residual.max((v - alphas[a][s]).abs());
                next[a][s] = v;
            }
        }
        alphas = next;
        info.residuals.push(residual);
        if residual < params.residual_tol {
            break;
        }
    }
    let vectors = alphas
        .into_iter()
        .enumerate()
        .map(|(a, values)| AlphaVector { action: a, values })
        .collect();
    (
        AlphaVectorSet::new(BoundKind::Upper, vectors).expect("non-empty by construction"),
        info,
    )
}

/// Point-based value iteration lower bound over a belief set sampled by
/// forward simulation from b₀ with uniformly random actions.
///
/// Belief collection deduplicates at L1 distance < 1e-6 and gives up after a
/// bounded number of simulation steps, so degenerate models with few
/// reachable beliefs still terminate (the set is then smaller than requested).
pub fn pbvi_bound(
    model: &PomdpModel,
    num_beliefs: usize,
    num_iterations: usize,
    seed: u64,
) -> AlphaVectorSet {
    let beliefs = sample_belief_set(model, num_beliefs.max(1), seed);
    pbvi_over_beliefs(model, &beliefs, num_iterations)
}

/// Grows the belief set breadth-first from b₀: each collected belief is
/// expanded in turn with a uniformly random action, keeping every
/// positive-probability posterior that is at least 1e-6 away (L1) from
/// everything collected so far. Enumerating the observation branches instead
/// of sampling them keeps rare but decision-critical posteriors in the set.
/// Gives up after a bounded number of attempts so degenerate models with few
/// reachable beliefs still terminate.
fn sample_belief_set(model: &PomdpModel, num_beliefs: usize, seed: u64) -> Vec<BeliefState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dynamics = FlatDynamics::new(std::sync::Arc::new(model.clone()));
    let mut set: Vec<BeliefState> = vec![model.initial_belief().clone()];
    let max_attempts = num_beliefs.saturating_mul(50);
    use crate::belief::BeliefDynamics as _;
    let mut cursor = 0usize;
    for _ in 0..max_attempts {
        if set.len() >= num_beliefs {
            break;
        }
        let parent = set[cursor % set.len()].clone();
        cursor += 1;
        if dynamics.is_terminal(&parent) {
            continue;
        }
        let action = rng.random_range(0..model.num_actions());
        for (_, _, next) in dynamics.successors(&parent, action) {
            if set.len() >= num_beliefs {
                break;
            }
            if set.iter().all(|b| b.l1_distance(&next) >= 1e-6) {
                set.push(next);
            }
        }
    }
    set
}

fn pbvi_over_beliefs(
    model: &PomdpModel,
    beliefs: &[BeliefState],
    num_iterations: usize,
) -> AlphaVectorSet {
    let n = model.num_states();
    let na = model.num_actions();
    let nz = model.num_observations();
    let gamma = model.discount();
    let floor = model.min_reward() / (1.0 - gamma);
    let mut gamma_set: Vec<AlphaVector> = vec![AlphaVector {
        action: 0,
        values: vec![floor; n],
    }];

    // Transposed matrices let the projection loop touch only the states in
    // each observation's support (and their predecessors) instead of every
    // (state, successor) pair per observation.
    let transition_transposed: Vec<_> = (0..na)
        .map(|a| {
            SparseRows::from_rows(
                n,
                (0..n)
                    .map(|s| model.transition_row(a, s).to_vec())
                    .collect::<Vec<_>>(),
            )
            .transposed()
        })
        .collect();
    let observation_transposed: Vec<_> = (0..na)
        .map(|a| {
            SparseRows::from_rows(
                nz,
                (0..n)
                    .map(|s2| model.observation_row(a, s2).to_vec())
                    .collect::<Vec<_>>(),
            )
            .transposed()
        })
        .collect();

    for _ in 0..num_iterations {
        // Project every vector through every (a, z).
        let mut projections: Vec<Vec<Vec<Vec<f64>>>> = Vec::with_capacity(na);
        for a in 0..na {
            let mut per_z = Vec::with_capacity(nz);
            for z in 0..nz {
                let mut per_alpha = Vec::with_capacity(gamma_set.len());
                for alpha in &gamma_set {
                    let mut g = vec![0.0; n];
                    for &(s2, o) in observation_transposed[a].row(z) {
                        let weighted = gamma * o * alpha.values[s2 as usize];
                        for &(s, t) in transition_transposed[a].row(s2 as usize) {
                            g[s as usize] += t * weighted;
                        }
                    }
                    per_alpha.push(g);
                }
                per_z.push(per_alpha);
            }
            projections.push(per_z);
        }

        let mut next: Vec<AlphaVector> = Vec::with_capacity(beliefs.len());
        let mut seen: HashSet<Vec<u64>> = HashSet::new();
        for b in beliefs {
            let mut best: Option<(f64, AlphaVector)> = None;
            for a in 0..na {
                let mut candidate: Vec<f64> = (0..n).map(|s| model.reward(s, a)).collect();
                for z in 0..nz {
                    let choices = &projections[a][z];
                    let mut arg = 0;
                    let mut arg_value = f64::NEG_INFINITY;
                    for (i, g) in choices.iter().enumerate() {
                        let value = b.dot_dense(g);
                        if value > arg_value {
                            arg_value = value;
                            arg = i;
                        }
                    }
                    for s in 0..n {
                        candidate[s] += choices[arg][s];
                    }
                }
                let value = b.dot_dense(&candidate);
                if best.as_ref().map_or(true, |(v, _)| value > *v) {
                    best = Some((
                        value,
                        AlphaVector {
                            action: a,
                            values: candidate,
                        },
                    ));
                }
            }
            let (_, vector) = best.expect("at least one action");
            let key: Vec<u64> = vector.values.iter().map(|x| x.to_bits()).collect();
            if seen.insert(key) {
                next.push(vector);
            }
        }
        gamma_set = next;
    }

    AlphaVectorSet::new(BoundKind::Lower, gamma_set).expect("non-empty by construction")
}

/// Serializes an α-vector set to its line-oriented text format:
/// `alpha-set <kind> <num_vectors> <num_states>` followed by one
/// `<action_id> v0 v1 ...` line per vector, 17 significant digits.
pub fn alpha_set_to_text(set: &AlphaVectorSet) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "alpha-set {} {} {}",
        set.kind.as_str(),
        set.vectors().len(),
        set.num_states()
    );
    for v in set.vectors() {
        let _ = write!(out, "{}", v.action);
        for x in &v.values {
            let _ = write!(out, " {x:.16e}");
        }
        out.push('\n');
    }
    out
}

pub fn alpha_set_from_text(text: &str) -> Result<AlphaVectorSet> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| PomdpError::Validation("empty alpha-set text".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let parse_err = |line: usize, message: &str| PomdpError::Parse {
        line: line + 1,
        column: 1,
        message: message.to_string(),
    };
    if fields.len() != 4 || fields[0] != "alpha-set" {
        return Err(parse_err(0, "expected `alpha-set <kind> <count> <states>`"));
    }
    let kind = match fields[1] {
        "lower" => BoundKind::Lower,
        "upper" => BoundKind::Upper,
        other => return Err(parse_err(0, &format!("unknown kind `{other}`"))),
    };
    let count: usize = fields[2]
        .parse()
        .map_err(|_| parse_err(0, "bad vector count"))?;
    let states: usize = fields[3]
        .parse()
        .map_err(|_| parse_err(0, "bad state count"))?;
    let mut vectors = Vec::with_capacity(count);
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let action: usize = it
            .next()
            .unwrap()
            .parse()
            .map_err(|_| parse_err(lineno, "bad action id"))?;
        let values: Vec<f64> = it
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(lineno, "bad vector entry"))?;
        if values.len() != states {
            return Err(parse_err(lineno, "vector length mismatch"));
        }
        vectors.push(AlphaVector { action, values });
    }
    if vectors.len() != count {
        return Err(PomdpError::Validation(format!(
            "alpha-set header promised {count} vectors, found {}",
            vectors.len()
        )));
    }
    AlphaVectorSet::new(kind, vectors)
}
