//! RockSample[n,k]: a rover on an n×n grid samples rocks of unknown value.
//!
//! State = rover position × one good/bad bit per rock, plus one absorbing
//! exit state. Motion is deterministic; moving east off the grid exits with a
//! reward. `Check_i` leaves the state alone and reads rock i through a noisy
//! sensor whose accuracy decays with distance. Sampling a good rock pays off
//! and turns it bad; sampling elsewhere is penalized. Beliefs stay supported
//! on a single known position, so the structured realization only ever
//! touches the rock-configuration part.

use std::collections::HashMap;

use crate::domains::{build_flat_model, DomainMechanics, StructuredDynamics};
use crate::error::{PomdpError, Result};
use crate::model::PomdpModel;

pub const OBS_BAD: usize = 0;
pub const OBS_GOOD: usize = 1;

const ACTION_NORTH: usize = 0;
const ACTION_SOUTH: usize = 1;
const ACTION_EAST: usize = 2;
const ACTION_WEST: usize = 3;
const ACTION_SAMPLE: usize = 4;
const CHECK_BASE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RockSampleRewards {
    pub sample_good: f64,
    pub sample_bad: f64,
    pub exit: f64,
    pub illegal_sample: f64,
}

impl Default for RockSampleRewards {
    fn default() -> Self {
        RockSampleRewards {
            sample_good: 10.0,
            sample_bad: -10.0,
            exit: 10.0,
            illegal_sample: -100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RockSampleSpec {
    pub grid_size: usize,
    pub rocks: Vec<(usize, usize)>,
    pub half_efficiency_distance: f64,
    pub rewards: RockSampleRewards,
    pub discount: f64,
}

impl RockSampleSpec {
    pub fn canonical(grid_size: usize, rocks: Vec<(usize, usize)>) -> Self {
        RockSampleSpec {
            grid_size,
            rocks,
            half_efficiency_distance: 20.0,
            rewards: RockSampleRewards::default(),
            discount: 0.95,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.grid_size;
        if n == 0 {
            return Err(PomdpError::InvalidLayout("grid size must be positive".into()));
        }
        if self.rocks.is_empty() {
            return Err(PomdpError::InvalidLayout("need at least one rock".into()));
        }
        if self.rocks.len() > 16 {
            return Err(PomdpError::InvalidLayout(
                "more than 16 rocks is unsupported".into(),
            ));
        }
        if !(self.half_efficiency_distance > 0.0) {
            return Err(PomdpError::InvalidLayout(
                "half efficiency distance must be positive".into(),
            ));
        }
        let mut seen = HashMap::new();
        for (i, &(x, y)) in self.rocks.iter().enumerate() {
            if x >= n || y >= n {
                return Err(PomdpError::InvalidLayout(format!(
                    "rock {i} at ({x}, {y}) outside the {n}x{n} grid"
                )));
            }
            if let Some(j) = seen.insert((x, y), i) {
                return Err(PomdpError::InvalidLayout(format!(
                    "rocks {j} and {i} share cell ({x}, {y})"
                )));
            }
        }
        Ok(())
    }
}

/// Sensor accuracy (1 + 2^(-d/d0)) / 2 at Euclidean distance `d`.
pub fn rock_sensor_accuracy(
    agent: (usize, usize),
    rock: (usize, usize),
    half_efficiency_distance: f64,
) -> f64 {
    let dx = agent.0 as f64 - rock.0 as f64;
    let dy = agent.1 as f64 - rock.1 as f64;
    let d = (dx * dx + dy * dy).sqrt();
    (1.0 + (-d / half_efficiency_distance).exp2()) / 2.0
}

pub struct RockSampleMechanics {
    spec: RockSampleSpec,
    num_rocks: usize,
    terminal_state: usize,
    start_position: usize,
    rock_at_cell: HashMap<usize, usize>,
    /// accuracy[pos][rock]
    accuracy: Vec<Vec<f64>>,
}

impl RockSampleMechanics {
    pub fn new(spec: RockSampleSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.grid_size;
        let num_rocks = spec.rocks.len();
        let num_positions = n * n;
        let rock_at_cell = spec
            .rocks
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| (y * n + x, i))
            .collect();
        let accuracy = (0..num_positions)
            .map(|pos| {
                let cell = (pos % n, pos / n);
                spec.rocks
                    .iter()
                    .map(|&rock| rock_sensor_accuracy(cell, rock, spec.half_efficiency_distance))
                    .collect()
            })
            .collect();
        // Start in the middle of the west edge.
        let start_position = (n / 2) * n;
        Ok(RockSampleMechanics {
            terminal_state: num_positions << num_rocks,
            spec,
            num_rocks,

            start_position,
            rock_at_cell,
            accuracy,
        })
    }

    pub fn spec(&self) -> &RockSampleSpec {
        &self.spec
    }

    fn decode(&self, state: usize) -> (usize, usize) {
        (state >> self.num_rocks, state & ((1 << self.num_rocks) - 1))
    }

    fn encode(&self, position: usize, config: usize) -> usize {
        (position << self.num_rocks) | config
    }

    /// Deterministic successor; `None` means the east exit was taken.
    fn next_state(&self, state: usize, action: usize) -> Option<usize> {
        let n = self.spec.grid_size;
        let (pos, config) = self.decode(state);
        let (x, y) = (pos % n, pos / n);
        match action {
            ACTION_NORTH => Some(self.encode(if y + 1 < n { pos + n } else { pos }, config)),
            ACTION_SOUTH => Some(self.encode(if y > 0 { pos - n } else { pos }, config)),
            ACTION_EAST => {
                if x + 1 < n {
                    Some(self.encode(pos + 1, config))
                } else {
                    None
                }
            }
            ACTION_WEST => Some(self.encode(if x > 0 { pos - 1 } else { pos }, config)),
            ACTION_SAMPLE => match self.rock_at_cell.get(&pos) {
                Some(&rock) if config & (1 << rock) != 0 => {
                    Some(self.encode(pos, config & !(1 << rock)))
                }
                _ => Some(state),
            },
            _ => Some(state), // checks leave the state alone
        }
    }
}

impl DomainMechanics for RockSampleMechanics {
    fn num_states(&self) -> usize {
        self.terminal_state + 1
    }

    fn num_actions(&self) -> usize {
        self.num_rocks + 5
    }

    fn num_observations(&self) -> usize {
        2
    }

    fn discount(&self) -> f64 {
        self.spec.discount
    }

    fn is_terminal(&self, state: usize) -> bool {
        state == self.terminal_state
    }

    fn reward(&self, state: usize, action: usize) -> f64 {
        if state == self.terminal_state {
            return 0.0;
        }
        let (pos, config) = self.decode(state);
        let n = self.spec.grid_size;
        match action {
            ACTION_EAST if pos % n == n - 1 => self.spec.rewards.exit,
            ACTION_SAMPLE => match self.rock_at_cell.get(&pos) {
                Some(&rock) if config & (1 << rock) != 0 => self.spec.rewards.sample_good,
                Some(_) => self.spec.rewards.sample_bad,
                None => self.spec.rewards.illegal_sample,
            },
            _ => 0.0,
        }
    }

    fn transitions_into(&self, state: usize, action: usize, out: &mut Vec<(usize, f64)>) {
        if state == self.terminal_state {
            out.push((state, 1.0));
            return;
        }
        match self.next_state(state, action) {
            Some(next) => out.push((next, 1.0)),
            None => out.push((self.terminal_state, 1.0)),
        }
    }

    fn observations_into(&self, next_state: usize, action: usize, out: &mut Vec<(usize, f64)>) {
        if next_state == self.terminal_state || action < CHECK_BASE {
            out.push((OBS_BAD, 1.0));
            return;
        }
        let rock = action - CHECK_BASE;
        let (pos, config) = self.decode(next_state);
        let acc = self.accuracy[pos][rock];
        let good = config & (1 << rock) != 0;
        let p_good = if good { acc } else { 1.0 - acc };
        if 1.0 - p_good > 0.0 {
            out.push((OBS_BAD, 1.0 - p_good));
        }
        if p_good > 0.0 {
            out.push((OBS_GOOD, p_good));
        }
    }

    fn observation_weight(&self, next_state: usize, action: usize, observation: usize) -> f64 {
        if next_state == self.terminal_state || action < CHECK_BASE {
            return if observation == OBS_BAD { 1.0 } else { 0.0 };
        }
        let rock = action - CHECK_BASE;
        let (pos, config) = self.decode(next_state);
        let acc = self.accuracy[pos][rock];
        let good = config & (1 << rock) != 0;
        let p_good = if good { acc } else { 1.0 - acc };
        if observation == OBS_GOOD {
            p_good
        } else {
            1.0 - p_good
        }
    }

    fn initial_states(&self) -> Vec<(usize, f64)> {
        let configs = 1usize << self.num_rocks;
        (0..configs)
            .map(|c| (self.encode(self.start_position, c), 1.0 / configs as f64))
            .collect()
    }
}

/// Builds the flat model and the factored realization for RockSample[n,k].
pub fn build_rocksample(
    n: usize,
    k: usize,
    layout: &[(usize, usize)],
) -> Result<(PomdpModel, StructuredDynamics<RockSampleMechanics>)> {
    if layout.len() != k {
        return Err(PomdpError::InvalidLayout(format!(
            "layout has {} rocks, expected {k}",
            layout.len()
        )));
    }
    let mechanics = RockSampleMechanics::new(RockSampleSpec::canonical(n, layout.to_vec()))?;
    let model = build_flat_model(&mechanics)?;
    Ok((model, StructuredDynamics::new(mechanics)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::default_layout;

    #[test]
    fn sensor_accuracy_anchor_points() {
        let d0 = 20.0;
        assert_eq!(rock_sensor_accuracy((3, 4), (3, 4), d0), 1.0);
        assert!((rock_sensor_accuracy((0, 0), (20, 0), d0) - 0.75).abs() < 1e-12);
        // Monotone decay toward 1/2.
        let far = rock_sensor_accuracy((0, 0), (0, 200), 20.0);
        assert!(far > 0.5 && far <= 0.5005);
    }

    #[test]
    fn canonical_7_8_dimensions() {
        let layout = default_layout(7, 8).unwrap();
        let (model, _) = build_rocksample(7, 8, &layout).unwrap();
        assert_eq!(model.num_states(), 12545);
        assert_eq!(model.num_actions(), 13);
        assert_eq!(model.num_observations(), 2);
    }

    #[test]
    fn invalid_layouts_are_rejected() {
        assert!(build_rocksample(4, 2, &[(0, 0), (5, 1)]).is_err());
        assert!(build_rocksample(4, 2, &[(1, 1), (1, 1)]).is_err());
        assert!(build_rocksample(4, 1, &[]).is_err());
    }

    #[test]
    fn sampling_a_good_rock_turns_it_bad() {
        let (_, dynamics) = build_rocksample(3, 1, &[(1, 1)]).unwrap();
        let m = dynamics.mechanics();
        // Position (1,1) = cell 4, rock good.
        let state = m.encode(4, 1);
        assert_eq!(m.reward(state, ACTION_SAMPLE), 10.0);
        let mut out = Vec::new();
        m.transitions_into(state, ACTION_SAMPLE, &mut out);
        assert_eq!(out, vec![(m.encode(4, 0), 1.0)]);
        // Sampling again on the now-bad rock is penalized.
        assert_eq!(m.reward(m.encode(4, 0), ACTION_SAMPLE), -10.0);
        // Sampling off-rock is illegal.
        assert_eq!(m.reward(m.encode(0, 1), ACTION_SAMPLE), -100.0);
    }

    #[test]
    fn east_exit_is_terminal_with_reward() {
        let (_, dynamics) = build_rocksample(3, 1, &[(0, 0)]).unwrap();
        let m = dynamics.mechanics();
        let state = m.encode(2, 1); // x = 2 on a 3-grid: east edge
        assert_eq!(m.reward(state, ACTION_EAST), 10.0);
        let mut out = Vec::new();
        m.transitions_into(state, ACTION_EAST, &mut out);
        assert!(m.is_terminal(out[0].0));
    }
}
