//! Finite POMDP models with sparse row-stochastic transition and observation
//! matrices, plus the environment simulator used by episode runners.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::belief::BeliefState;
use crate::error::{PomdpError, Result};

/// Tolerance on row-stochasticity and belief normalization checks.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-9;

/// Compressed sparse rows of `(column, value)` pairs, columns sorted per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    cols: usize,
    offsets: Vec<usize>,
    entries: Vec<(u32, f64)>,
}

impl SparseRows {
    /// Builds from one entry list per row; zero entries are skipped, duplicate
    /// columns summed.
    pub fn from_rows(cols: usize, rows: impl IntoIterator<Item = Vec<(u32, f64)>>) -> Self {
        let mut offsets = vec![0];
        let mut entries = Vec::new();
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            row.dedup_by(|later, earlier| {
                if later.0 == earlier.0 {
                    earlier.1 += later.1;
                    true
                } else {
                    false
                }
            });
            entries.extend(row.into_iter().filter(|&(_, v)| v != 0.0));
            offsets.push(entries.len());
        }
        SparseRows {
            cols,
            offsets,
            entries,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[(u32, f64)] {
        &self.entries[self.offsets[r]..self.offsets[r + 1]]
    }

    pub fn value(&self, r: usize, c: usize) -> f64 {
        let row = self.row(r);
        match row.binary_search_by_key(&(c as u32), |e| e.0) {
            Ok(i) => row[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.row(r).iter().map(|&(_, v)| v).sum()
    }

    /// Column-major view: `transposed().row(c)` lists `(row, value)` pairs.
    pub fn transposed(&self) -> SparseRows {
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); self.cols];
        for r in 0..self.num_rows() {
            for &(c, v) in self.row(r) {
                rows[c as usize].push((r as u32, v));
            }
        }
        SparseRows::from_rows(self.num_rows(), rows)
    }
}

/// A finite discounted POMDP: (S, A, Z, T, R, O, γ, b₀) with an optional set
/// of absorbing zero-reward terminal states.
#[derive(Debug, Clone, PartialEq)]
pub struct PomdpModel {
    num_states: usize,
    num_actions: usize,
    num_observations: usize,
    /// One S×S row-stochastic matrix per action; `transitions[a].row(s)` is
    /// the distribution over successor states.
    transitions: Vec<SparseRows>,
    /// One S×Z row-stochastic matrix per action; `observations[a].row(s')` is
    /// the distribution over observations emitted on arrival in `s'`.
    observations: Vec<SparseRows>,
    /// Dense R(s,a), indexed `s * num_actions + a`.
    rewards: Vec<f64>,
    discount: f64,
    initial_belief: BeliefState,
    terminal: Vec<bool>,
}

impl PomdpModel {
    pub fn new(
        transitions: Vec<SparseRows>,
        observations: Vec<SparseRows>,
        rewards: Vec<f64>,
        discount: f64,
        initial_belief: BeliefState,
        terminal_states: Option<Vec<usize>>,
    ) -> Result<Self> {
        let num_actions = transitions.len();
        if num_actions == 0 {
            return Err(PomdpError::Validation("no actions".into()));
        }
        let num_states = transitions[0].num_rows();
        let num_observations = observations
            .first()
            .map(|o| o.num_cols())
            .unwrap_or_default();
        let mut terminal = vec![false; num_states];
        if let Some(ts) = terminal_states {
            for s in ts {
                if s >= num_states {
                    return Err(PomdpError::Validation(format!(
                        "terminal state {s} out of range"
                    )));
                }
                terminal[s] = true;
            }
        }
        let model = PomdpModel {
            num_states,
            num_actions,
            num_observations,
            transitions,
            observations,
            rewards,
            discount,
            initial_belief,
            terminal,
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks row-stochasticity of T and O (within [`STOCHASTIC_TOLERANCE`]),
    /// the discount range and reward finiteness.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.discount) {
            return Err(PomdpError::Validation(format!(
                "discount {} outside [0, 1)",
                self.discount
            )));
        }
        if self.num_observations == 0 {
            return Err(PomdpError::Validation("no observations".into()));
        }
        if self.rewards.len() != self.num_states * self.num_actions {
            return Err(PomdpError::Validation(format!(
                "reward table has {} entries, expected {}",
                self.rewards.len(),
                self.num_states * self.num_actions
            )));
        }
        if let Some(bad) = self.rewards.iter().find(|r| !r.is_finite()) {
            return Err(PomdpError::Validation(format!("non-finite reward {bad}")));
        }
        for (a, t) in self.transitions.iter().enumerate() {
            if t.num_rows() != self.num_states || t.num_cols() != self.num_states {
                return Err(PomdpError::Validation(format!(
                    "transition matrix for action {a} has wrong shape"
                )));
            }
            for s in 0..self.num_states {
                let sum = t.row_sum(s);
                if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
                    return Err(PomdpError::Validation(format!(
                        "transition row (s={s}, a={a}) sums to {sum}"
                    )));
                }
            }
        }
        if self.observations.len() != self.num_actions {
            return Err(PomdpError::Validation(
                "observation matrices do not cover all actions".into(),
            ));
        }
        for (a, o) in self.observations.iter().enumerate() {
            if o.num_rows() != self.num_states || o.num_cols() != self.num_observations {
                return Err(PomdpError::Validation(format!(
                    "observation matrix for action {a} has wrong shape"
                )));
            }
            for s2 in 0..self.num_states {
                let sum = o.row_sum(s2);
                if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
                    return Err(PomdpError::Validation(format!(
                        "observation row (s'={s2}, a={a}) sums to {sum}"
                    )));
                }
            }
        }
        let mass = self.initial_belief.total_mass();
        if (mass - 1.0).abs() > STOCHASTIC_TOLERANCE {
            return Err(PomdpError::Validation(format!(
                "initial belief mass {mass}"
            )));
        }
        if let Some(&(s, _)) = self
            .initial_belief
            .entries()
            .iter()
            .find(|&&(s, _)| s as usize >= self.num_states)
        {
            return Err(PomdpError::Validation(format!(
                "initial belief state {s} out of range"
            )));
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_observations(&self) -> usize {
        self.num_observations
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn initial_belief(&self) -> &BeliefState {
        &self.initial_belief
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.rewards[state * self.num_actions + action]
    }

    pub fn transition_row(&self, action: usize, state: usize) -> &[(u32, f64)] {
        self.transitions[action].row(state)
    }

    pub fn transition_prob(&self, state: usize, action: usize, next: usize) -> f64 {
        self.transitions[action].value(state, next)
    }

    pub fn observation_row(&self, action: usize, next_state: usize) -> &[(u32, f64)] {
        self.observations[action].row(next_state)
    }

    pub fn observation_prob(&self, action: usize, next_state: usize, observation: usize) -> f64 {
        self.observations[action].value(next_state, observation)
    }

    pub fn is_terminal_state(&self, state: usize) -> bool {
        self.terminal[state]
    }

    pub fn terminal_states(&self) -> impl Iterator<Item = usize> + '_ {
        self.terminal
            .iter()
            .enumerate()
            .filter_map(|(s, &t)| t.then_some(s))
    }

    pub fn has_terminal_states(&self) -> bool {
        self.terminal.iter().any(|&t| t)
    }

    pub fn min_reward(&self) -> f64 {
        self.rewards.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_reward(&self) -> f64 {
        self.rewards
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Marks every absorbing state whose rewards are all zero as terminal.
    /// This is the inverse of how the generators define terminal states, which
    /// lets the text format round-trip them without a dedicated directive.
    pub fn infer_terminal_states(&mut self) {
        for s in 0..self.num_states {
            let absorbing = self
                .transitions
                .iter()
                .all(|t| t.row(s) == [(s as u32, 1.0)]);
            let zero_reward = (0..self.num_actions).all(|a| self.reward(s, a) == 0.0);
            self.terminal[s] = absorbing && zero_reward;
        }
    }
}

/// The simulator side of an episode: a hidden true state plus a deterministic
/// random stream.
#[derive(Debug, Clone)]
pub struct EnvironmentState {
    state: usize,
    rng: ChaCha8Rng,
}

impl EnvironmentState {
    /// Starts from an explicit true state.
    pub fn with_state(model: &PomdpModel, state: usize, seed: u64) -> Result<Self> {
        if state >= model.num_states() {
            return Err(PomdpError::Validation(format!(
                "environment state {state} out of range"
            )));
        }
        Ok(EnvironmentState {
            state,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Samples the true state from the model's initial belief.
    pub fn from_initial_belief(model: &PomdpModel, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = sample_from(model.initial_belief().entries(), &mut rng);
        EnvironmentState { state, rng }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    /// Samples `s' ~ T(s,a,·)` and `z ~ O(s',a,·)`, returns `(z, R(s,a))` and
    /// moves the true state. Deterministic given the seed.
    pub fn step(&mut self, model: &PomdpModel, action: usize) -> Result<(usize, f64)> {
        if model.is_terminal_state(self.state) {
            return Err(PomdpError::TerminalState);
        }
        let reward = model.reward(self.state, action);
        let next = sample_from(model.transition_row(action, self.state), &mut self.rng);
        let observation = sample_from(model.observation_row(action, next), &mut self.rng);
        self.state = next;
        Ok((observation, reward))
    }
}

fn sample_from(entries: &[(u32, f64)], rng: &mut ChaCha8Rng) -> usize {
    debug_assert!(!entries.is_empty());
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(idx, p) in entries {
        acc += p;
        if u < acc {
            return idx as usize;
        }
    }
    entries.last().unwrap().0 as usize
}

#[cfg(test)]
pub mod tests {
    use super::*;

    /// 2 states, 1 action, 2 observations. T swaps the states and the
    /// observation is independent of the state (uniform).
    pub fn two_state_permutation_model() -> PomdpModel {
        let t = SparseRows::from_rows(2, [vec![(1, 1.0)], vec![(0, 1.0)]]);
        let o = SparseRows::from_rows(
            2,
            [vec![(0, 0.5), (1, 0.5)], vec![(0, 0.5), (1, 0.5)]],
        );
        PomdpModel::new(
            vec![t],
            vec![o],
            vec![0.0, 0.0],
            0.95,
            BeliefState::from_dense(&[0.5, 0.5]).unwrap(),
            None,
        )
        .unwrap()
    }

    /// 2 states, 1 action, 2 observations. T swaps the states and the
    /// observation identifies the new state deterministically.
    pub fn two_state_signalling_model() -> PomdpModel {
        let t = SparseRows::from_rows(2, [vec![(1, 1.0)], vec![(0, 1.0)]]);
        let o = SparseRows::from_rows(2, [vec![(0, 1.0)], vec![(1, 1.0)]]);
        PomdpModel::new(
            vec![t],
            vec![o],
            vec![0.0, 0.0],
            0.95,
            BeliefState::from_dense(&[0.5, 0.5]).unwrap(),
            None,
        )
        .unwrap()
    }

    /// 2 states, 1 action, 2 observations. T = identity, the sensor reports
    /// the true state with the given accuracy, R(s,0) = [10, -10].
    pub fn static_two_state_model(accuracy: f64) -> PomdpModel {
        let t = SparseRows::from_rows(2, [vec![(0, 1.0)], vec![(1, 1.0)]]);
        let o = SparseRows::from_rows(
            2,
            [
                vec![(0, accuracy), (1, 1.0 - accuracy)],
                vec![(0, 1.0 - accuracy), (1, accuracy)],
            ],
        );
        PomdpModel::new(
            vec![t],
            vec![o],
            vec![10.0, -10.0],
            0.95,
            BeliefState::from_dense(&[0.5, 0.5]).unwrap(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn validation_rejects_non_stochastic_rows() {
        let t = SparseRows::from_rows(2, [vec![(0, 0.9)], vec![(1, 1.0)]]);
        let o = SparseRows::from_rows(2, [vec![(0, 1.0)], vec![(1, 1.0)]]);
        let err = PomdpModel::new(
            vec![t],
            vec![o],
            vec![0.0, 0.0],
            0.9,
            BeliefState::from_dense(&[0.5, 0.5]).unwrap(),
            None,
        )
        .unwrap_err();
        assert!(matches!(err, PomdpError::Validation(_)));
    }

    #[test]
    fn deterministic_model_steps_identically_for_any_seed() {
        let model = two_state_signalling_model();
        for seed in [0, 1, 12345] {
            let mut env = EnvironmentState::with_state(&model, 0, seed).unwrap();
            let (z, r) = env.step(&model, 0).unwrap();
            assert_eq!((z, r as i64), (1, 0));
            assert_eq!(env.state(), 1);
        }
    }

    #[test]
    fn fixed_seed_reproduces_trajectories() {
        let model = static_two_state_model(0.7);
        let run = |seed| {
            let mut env = EnvironmentState::from_initial_belief(&model, seed);
            (0..50)
                .map(|_| env.step(&model, 0).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }

    #[test]
    fn observation_frequencies_match_the_model() {
        // Empirical frequency of z over many steps stays within 3σ binomial
        // bounds of the observation row.
        let accuracy = 0.85;
        let model = static_two_state_model(accuracy);
        let mut env = EnvironmentState::with_state(&model, 0, 99).unwrap();
        let n = 100_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let (z, _) = env.step(&model, 0).unwrap();
            if z == 0 {
                hits += 1;
            }
        }
        let mean = accuracy * n as f64;
        let sigma = (n as f64 * accuracy * (1.0 - accuracy)).sqrt();
        assert!(
            (hits as f64 - mean).abs() <= 3.0 * sigma,
            "{hits} observations of z=0, expected {mean} ± {}",
            3.0 * sigma
        );
    }

    #[test]
    fn stepping_a_terminal_state_fails() {
        let t = SparseRows::from_rows(1, [vec![(0, 1.0)]]);
        let o = SparseRows::from_rows(1, [vec![(0, 1.0)]]);
        let model = PomdpModel::new(
            vec![t],
            vec![o],
            vec![0.0],
            0.9,
            BeliefState::point_mass(0),
            Some(vec![0]),
        )
        .unwrap();
        let mut env = EnvironmentState::with_state(&model, 0, 0).unwrap();
        assert!(matches!(
            env.step(&model, 0),
            Err(PomdpError::TerminalState)
        ));
    }

    #[test]
    fn inferred_terminals_match_construction() {
        let t = SparseRows::from_rows(2, [vec![(1, 1.0)], vec![(1, 1.0)]]);
        let o = SparseRows::from_rows(2, [vec![(0, 1.0)], vec![(0, 1.0)]]);
        let mut model = PomdpModel::new(
            vec![t],
            vec![o],
            vec![1.0, 0.0],
            0.9,
            BeliefState::point_mass(0),
            None,
        )
        .unwrap();
        model.infer_terminal_states();
        assert!(!model.is_terminal_state(0));
        assert!(model.is_terminal_state(1));
    }
}
