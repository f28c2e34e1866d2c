//! Tag: chase and tag a fleeing opponent on the canonical 29-cell grid.
//!
//! The grid is a 10×2 corridor with a 3×3 block on top of columns 5-7. State
//! is the (agent, opponent) cell pair (841 joint states) plus one tagged
//! state per cell (29), for 870 states. The agent moves deterministically;
//! the opponent flees with probability 0.4 along each axis away from the
//! agent's pre-move position (split between both directions when aligned on
//! that axis) and stays with probability 0.2, with the mass of blocked moves
//! collapsing onto staying. Tag succeeds only when co-located, yielding a
//! terminal tagged state. The agent observes its own cell, collapsed to a
//! single "same cell" signal when co-located, for 30 observations.

use crate::domains::{build_flat_model, DomainMechanics, StructuredDynamics};
use crate::error::Result;
use crate::model::PomdpModel;

const ACTION_TAG: usize = 4;
pub const OBS_SAME_CELL: usize = 29;

#[derive(Debug, Clone, PartialEq)]
pub struct TagSpec {
    pub move_reward: f64,
    pub tag_reward: f64,
    pub failed_tag_reward: f64,
    pub opponent_move_away_probability: f64,
    pub discount: f64,
}

impl Default for TagSpec {
    fn default() -> Self {
        TagSpec {
            move_reward: -1.0,
            tag_reward: 10.0,
            failed_tag_reward: -10.0,
            opponent_move_away_probability: 0.8,
            discount: 0.95,
        }
    }
}

/// The canonical 29 cells as (x, y) coordinates.
fn cells() -> Vec<(i32, i32)> {
    let mut cells = Vec::with_capacity(29);
    for y in 0..2 {
        for x in 0..10 {
            cells.push((x, y));
        }
    }
    for y in 2..5 {
        for x in 5..8 {
            cells.push((x, y));
        }
    }
    cells
}

pub struct TagMechanics {
    spec: TagSpec,
    cells: Vec<(i32, i32)>,
    cell_index: std::collections::HashMap<(i32, i32), usize>,
    /// agent_move[cell][action 0..4]
    agent_move: Vec<[usize; 4]>,
    /// opponent_moves[agent][opponent] -> (cell, probability)
    opponent_moves: Vec<Vec<Vec<(usize, f64)>>>,
}

const NUM_CELLS: usize = 29;
const NUM_JOINT: usize = NUM_CELLS * NUM_CELLS;

impl TagMechanics {
    pub fn new(spec: TagSpec) -> Self {
        let cells = cells();
        let cell_index: std::collections::HashMap<(i32, i32), usize> = cells
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i))
            .collect();
        let directions = [(0, 1), (0, -1), (1, 0), (-1, 0)]; // N, S, E, W
        let agent_move: Vec<[usize; 4]> = cells
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| {
                let mut moves = [i; 4];
                for (d, &(dx, dy)) in directions.iter().enumerate() {
                    if let Some(&j) = cell_index.get(&(x + dx, y + dy)) {
                        moves[d] = j;
                    }
                }
                moves
            })
            .collect();
        // Per axis, probability 0.4 of fleeing away from the agent (split
        // between the two directions when aligned on that axis); staying
        // keeps 0.2 plus the mass of blocked moves.
        let axis_mass = spec.opponent_move_away_probability / 2.0;
        let opponent_moves = (0..NUM_CELLS)
            .map(|agent| {
                (0..NUM_CELLS)
                    .map(|opponent| {
                        let (ax, ay) = cells[agent];
                        let (ox, oy) = cells[opponent];
                        let mut mass: Vec<((i32, i32), f64)> = Vec::with_capacity(4);
                        // x axis
                        match (ox - ax).signum() {
                            0 => {
                                mass.push(((ox + 1, oy), axis_mass / 2.0));
                                mass.push(((ox - 1, oy), axis_mass / 2.0));
                            }
                            d => mass.push(((ox + d, oy), axis_mass)),
                        }
                        // y axis
                        match (oy - ay).signum() {
                            0 => {
                                mass.push(((ox, oy + 1), axis_mass / 2.0));
                                mass.push(((ox, oy - 1), axis_mass / 2.0));
                            }
                            d => mass.push(((ox, oy + d), axis_mass)),
                        }
                        let mut stay = 1.0 - 2.0 * axis_mass;
                        let mut moves: Vec<(usize, f64)> = Vec::with_capacity(5);
                        for (cell, p) in mass {
                            match cell_index.get(&cell) {
                                Some(&c) => moves.push((c, p)),
                                None => stay += p,
                            }
                        }
                        moves.push((opponent, stay));
                        moves.sort_by_key(|&(c, _)| c);
                        moves
                    })
                    .collect()
            })
            .collect();
        TagMechanics {
            spec,
            cells,
            cell_index,
            agent_move,
            opponent_moves,
        }
    }

    pub fn spec(&self) -> &TagSpec {
        &self.spec
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_coordinates(&self, cell: usize) -> (i32, i32) {
        self.cells[cell]
    }

    pub fn cell_at(&self, x: i32, y: i32) -> Option<usize> {
        self.cell_index.get(&(x, y)).copied()
    }

    pub fn joint_state(&self, agent: usize, opponent: usize) -> usize {
        agent * NUM_CELLS + opponent
    }

    fn decode(&self, state: usize) -> Option<(usize, usize)> {
        (state < NUM_JOINT).then(|| (state / NUM_CELLS, state % NUM_CELLS))
    }
}

impl DomainMechanics for TagMechanics {
    fn num_states(&self) -> usize {
        NUM_JOINT + NUM_CELLS
    }

    fn num_actions(&self) -> usize {
        5
    }

    fn num_observations(&self) -> usize {
        NUM_CELLS + 1
    }

    fn discount(&self) -> f64 {
        self.spec.discount
    }

    fn is_terminal(&self, state: usize) -> bool {
        state >= NUM_JOINT
    }

    fn reward(&self, state: usize, action: usize) -> f64 {
        let Some((agent, opponent)) = self.decode(state) else {
            return 0.0;
        };
        if action == ACTION_TAG {
            if agent == opponent {
                self.spec.tag_reward
            } else {
                self.spec.failed_tag_reward
            }
        } else {
            self.spec.move_reward
        }
    }

    fn transitions_into(&self, state: usize, action: usize, out: &mut Vec<(usize, f64)>) {
        let Some((agent, opponent)) = self.decode(state) else {
            out.push((state, 1.0));
            return;
        };
        if action == ACTION_TAG && agent == opponent {
            out.push((NUM_JOINT + agent, 1.0));
            return;
        }
        let next_agent = if action == ACTION_TAG {
            agent
        } else {
            self.agent_move[agent][action]
        };
        for &(next_opponent, p) in &self.opponent_moves[agent][opponent] {
            out.push((self.joint_state(next_agent, next_opponent), p));
        }
    }

    fn observations_into(&self, next_state: usize, _action: usize, out: &mut Vec<(usize, f64)>) {
        match self.decode(next_state) {
            None => out.push((OBS_SAME_CELL, 1.0)),
            Some((agent, opponent)) if agent == opponent => out.push((OBS_SAME_CELL, 1.0)),
            Some((agent, _)) => out.push((agent, 1.0)),
        }
    }

    fn observation_weight(&self, next_state: usize, _action: usize, observation: usize) -> f64 {
        let expected = match self.decode(next_state) {
            None => OBS_SAME_CELL,
            Some((agent, opponent)) if agent == opponent => OBS_SAME_CELL,
            Some((agent, _)) => agent,
        };
        if observation == expected {
            1.0
        } else {
            0.0
        }
    }

    fn initial_states(&self) -> Vec<(usize, f64)> {
        // Uniform over all 841 non-terminal joint positions.
        (0..NUM_JOINT).map(|s| (s, 1.0 / NUM_JOINT as f64)).collect()
    }
}

/// Builds the flat 870-state model and the structured realization.
pub fn build_tag() -> Result<(PomdpModel, StructuredDynamics<TagMechanics>)> {
    let mechanics = TagMechanics::new(TagSpec::default());
    let model = build_flat_model(&mechanics)?;
    Ok((model, StructuredDynamics::new(mechanics)))
}
