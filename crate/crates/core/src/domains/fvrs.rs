//! FieldVisionRockSample[n,k]: RockSample where every action senses all
//! rocks at once.
//!
//! Check actions disappear; instead each of the 4 moves and Sample yields a
//! k-bit observation, one independently-noisy bit per rock, read from the
//! position the rover arrives in. The observation space is 2^k. The default
//! half-efficiency distance is (n-1)·√2/4 so the far corner reads close to
//! chance.

use std::collections::HashMap;

use crate::domains::rocksample::rock_sensor_accuracy;
use crate::domains::{build_flat_model, DomainMechanics, StructuredDynamics};
use crate::error::{PomdpError, Result};
use crate::model::PomdpModel;

use super::rocksample::RockSampleRewards;

const ACTION_EAST: usize = 2;
const ACTION_SAMPLE: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct FvrsSpec {
    pub grid_size: usize,
    pub rocks: Vec<(usize, usize)>,
    pub half_efficiency_distance: f64,
    pub rewards: RockSampleRewards,
    pub discount: f64,
}

impl FvrsSpec {
    pub fn canonical(grid_size: usize, rocks: Vec<(usize, usize)>) -> Self {
        FvrsSpec {
            half_efficiency_distance: (grid_size.saturating_sub(1)) as f64
                * std::f64::consts::SQRT_2
                / 4.0,
            grid_size,
            rocks,
            rewards: RockSampleRewards::default(),
            discount: 0.95,
        }
    }
}

pub struct FvrsMechanics {
    spec: FvrsSpec,
    num_rocks: usize,
    terminal_state: usize,
    start_position: usize,
    rock_at_cell: HashMap<usize, usize>,
    /// accuracy[pos][rock]
    accuracy: Vec<Vec<f64>>,
}

impl FvrsMechanics {
    pub fn new(spec: FvrsSpec) -> Result<Self> {
        let n = spec.grid_size;
        if n < 2 {
            return Err(PomdpError::InvalidLayout(
                "grid must be at least 2x2".into(),
            ));
        }
        if spec.rocks.is_empty() {
            return Err(PomdpError::InvalidLayout("need at least one rock".into()));
        }
        if spec.rocks.len() > 12 {
            return Err(PomdpError::InvalidLayout(
                "more than 12 rocks makes the observation space unreasonable".into(),
            ));
        }
        if !(spec.half_efficiency_distance > 0.0) {
            return Err(PomdpError::InvalidLayout(
                "half efficiency distance must be positive".into(),
            ));
        }
        let mut seen = HashMap::new();
        for (i, &(x, y)) in spec.rocks.iter().enumerate() {
            if x >= n || y >= n {
                return Err(PomdpError::InvalidLayout(format!(
                    "rock {i} at ({x}, {y}) outside the {n}x{n} grid"
                )));
            }
            if seen.insert((x, y), i).is_some() {
                return Err(PomdpError::InvalidLayout(format!(
                    "duplicate rock cell ({x}, {y})"
                )));
            }
        }
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
        let start_position = (n / 2) * n;
        Ok(FvrsMechanics {
            terminal_state: num_positions << num_rocks,
            spec,
            num_rocks,
            start_position,
            rock_at_cell,
            accuracy,
        })
    }

    pub fn spec(&self) -> &FvrsSpec {
        &self.spec
    }

    fn decode(&self, state: usize) -> (usize, usize) {
        (state >> self.num_rocks, state & ((1 << self.num_rocks) - 1))
    }

    fn encode(&self, position: usize, config: usize) -> usize {
        (position << self.num_rocks) | config
    }

    /// Probability of the k-bit observation given arrival state; bit i of
    /// the observation is rock i read as good.
    fn joint_observation_weight(&self, position: usize, config: usize, observation: usize) -> f64 {
        let mut w = 1.0;
        for rock in 0..self.num_rocks {
            let acc = self.accuracy[position][rock];
            let good = config & (1 << rock) != 0;
            let read_good = observation & (1 << rock) != 0;
            w *= if read_good == good { acc } else { 1.0 - acc };
        }
        w
    }
}

impl DomainMechanics for FvrsMechanics {
    fn num_states(&self) -> usize {
        self.terminal_state + 1
    }

    fn num_actions(&self) -> usize {
        5
    }

    fn num_observations(&self) -> usize {
        1 << self.num_rocks
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
        let n = self.spec.grid_size;
        let (pos, config) = self.decode(state);
        let (x, y) = (pos % n, pos / n);
        let next = match action {
            0 => self.encode(if y + 1 < n { pos + n } else { pos }, config), // north
            1 => self.encode(if y > 0 { pos - n } else { pos }, config),    // south
            ACTION_EAST => {
                if x + 1 < n {
                    self.encode(pos + 1, config)
                } else {
                    self.terminal_state
                }
            }
            3 => self.encode(if x > 0 { pos - 1 } else { pos }, config), // west
            _ => match self.rock_at_cell.get(&pos) {
                Some(&rock) if config & (1 << rock) != 0 => {
                    self.encode(pos, config & !(1 << rock))
                }
                _ => state,
            },
        };
        out.push((next, 1.0));
    }

    fn observations_into(&self, next_state: usize, _action: usize, out: &mut Vec<(usize, f64)>) {
        if next_state == self.terminal_state {
            out.push((0, 1.0));
            return;
        }
        let (pos, config) = self.decode(next_state);
        for z in 0..self.num_observations() {
            let w = self.joint_observation_weight(pos, config, z);
            if w > 0.0 {
                out.push((z, w));
            }
        }
    }

    fn observation_weight(&self, next_state: usize, _action: usize, observation: usize) -> f64 {
        if next_state == self.terminal_state {
            return if observation == 0 { 1.0 } else { 0.0 };
        }
        let (pos, config) = self.decode(next_state);
        self.joint_observation_weight(pos, config, observation)
    }

    fn initial_states(&self) -> Vec<(usize, f64)> {
        let configs = 1usize << self.num_rocks;
        (0..configs)
            .map(|c| (self.encode(self.start_position, c), 1.0 / configs as f64))
            .collect()
    }
}

/// Builds the flat model and the factored realization for FVRS[n,k].
pub fn build_fvrs(
    n: usize,
    k: usize,
    layout: &[(usize, usize)],
) -> Result<(PomdpModel, StructuredDynamics<FvrsMechanics>)> {
    if layout.len() != k {
        return Err(PomdpError::InvalidLayout(format!(
            "layout has {} rocks, expected {k}",
            layout.len()
        )));
    }
    let mechanics = FvrsMechanics::new(FvrsSpec::canonical(n, layout.to_vec()))?;
    let model = build_flat_model(&mechanics)?;
    Ok((model, StructuredDynamics::new(mechanics)))
}
