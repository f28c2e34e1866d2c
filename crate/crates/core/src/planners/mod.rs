//! Executable planning strategies: the generic anytime plan/act loop,
//! best-first heuristic search over the AND-OR tree, RTBSS depth-limited
//! branch-and-bound, sparse observation sampling, (parallel) rollout, and
//! RTDP over discretized beliefs.

mod mcallester;
mod rollout;
mod rtbss;
mod rtdp;

pub use mcallester::mcallester_expand;
pub use rollout::parallel_rollout_plan;
pub use rtbss::rtbss_expand;
pub use rtdp::{discretize, rtdp_bel_step, DiscretizedBelief, RtdpValueStore};

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::belief::BeliefDynamics;
use crate::bounds::{AlphaVectorSet, BoundFunction};
use crate::error::{PomdpError, Result};
use crate::heuristics::HeuristicKind;
use crate::model::{EnvironmentState, PomdpModel};
use crate::tree::SearchTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    HeuristicSearch,
    Rtbss,
    McAllester,
    Rollout,
    RtdpBel,
}

impl Strategy {
    pub fn from_token(token: &str) -> Result<Self> {
        match token {
            "heuristic-search" => Ok(Strategy::HeuristicSearch),
            "rtbss" => Ok(Strategy::Rtbss),
            "mcallester" => Ok(Strategy::McAllester),
            "rollout" => Ok(Strategy::Rollout),
            "rtdp-bel" => Ok(Strategy::RtdpBel),
            other => Err(PomdpError::Config(format!(
                "unknown planner `{other}` \
                 (expected heuristic-search|rtbss|mcallester|rollout|rtdp-bel)"
            ))),
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Strategy::HeuristicSearch => "heuristic-search",
            Strategy::Rtbss => "rtbss",
            Strategy::McAllester => "mcallester",
            Strategy::Rollout => "rollout",
            Strategy::RtdpBel => "rtdp-bel",
        }
    }
}

/// Everything a planning strategy needs to run one step.
#[derive(Debug, Clone)]
pub struct PlannerConfig {
    pub strategy: Strategy,
    /// Node-selection policy for `heuristic-search`.
    pub heuristic: HeuristicKind,
    /// Stop planning once the root gap is within epsilon.
    pub epsilon: f64,
    /// Search horizon for rtbss / mcallester / rollout.
    pub depth: usize,
    /// Observations sampled per action (mcallester).
    pub obs_samples: usize,
    /// Sampled trajectories per (action, policy) pair (rollout).
    pub trajectories: usize,
    /// Belief discretization resolution (rtdp-bel).
    pub resolution: usize,
    /// Wall-clock planning budget per step.
    pub time_budget_ms: u64,
    /// Optional hard cap on expansions per step; makes heuristic-search runs
    /// deterministic regardless of machine speed.
    pub max_expansions: Option<u64>,
    pub seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            strategy: Strategy::HeuristicSearch,
            heuristic: HeuristicKind::Aems2,
            epsilon: 0.01,
            depth: 2,
            obs_samples: 16,
            trajectories: 64,
            resolution: 10,
            time_budget_ms: 1000,
            max_expansions: None,
            seed: 0,
        }
    }
}

impl PlannerConfig {
    /// Applies one `key = value` assignment using the CLI flag vocabulary.
    pub fn apply_key_value(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| PomdpError::Config(format!("bad value `{value}` for {what}"));
        match key {
            "planner" | "strategy" => self.strategy = Strategy::from_token(value)?,
            "heuristic" => self.heuristic = HeuristicKind::from_token(value)?,
            "epsilon" => self.epsilon = value.parse().map_err(|_| bad("epsilon"))?,
            "depth" => self.depth = value.parse().map_err(|_| bad("depth"))?,
            "obs-samples" => self.obs_samples = value.parse().map_err(|_| bad("obs-samples"))?,
            "trajectories" => {
                self.trajectories = value.parse().map_err(|_| bad("trajectories"))?
            }
            "disc-k" => self.resolution = value.parse().map_err(|_| bad("disc-k"))?,
            "budget-ms" => self.time_budget_ms = value.parse().map_err(|_| bad("budget-ms"))?,
            "max-expansions" => {
                self.max_expansions = Some(value.parse().map_err(|_| bad("max-expansions"))?)
            }
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            other => {
                return Err(PomdpError::Config(format!("unknown config key `{other}`")));
            }
        }
        Ok(())
    }

    /// Parses a `key = value` config file body over the defaults.
    pub fn from_config_text(text: &str) -> Result<Self> {
        let mut config = PlannerConfig::default();
        config.merge_config_text(text)?;
        Ok(config)
    }

    pub fn merge_config_text(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(PomdpError::Config(format!(
                    "config line {} is not `key = value`: `{raw}`",
                    idx + 1
                )));
            };
            self.apply_key_value(key.trim(), value.trim())?;
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let positive = |value: usize, what: &str| {
            if value == 0 {
                Err(PomdpError::Config(format!("{what} must be positive")))
            } else {
                Ok(())
            }
        };
        if self.epsilon < 0.0 || self.epsilon.is_nan() {
            return Err(PomdpError::Config("epsilon must be >= 0".into()));
        }
        match self.strategy {
            Strategy::HeuristicSearch => {}
            Strategy::Rtbss => positive(self.depth, "depth")?,
            Strategy::McAllester => {
                positive(self.depth, "depth")?;
                positive(self.obs_samples, "obs-samples")?;
            }
            Strategy::Rollout => {
                positive(self.depth, "depth")?;
                positive(self.trajectories, "trajectories")?;
            }
            Strategy::RtdpBel => positive(self.resolution, "disc-k")?,
        }
        Ok(())
    }
}

/// One executed step of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub action: usize,
    pub observation: usize,
    pub reward: f64,
    pub planning_time_ms: f64,
    /// Root bounds before acting; `None` for planners that do not maintain
    /// tree bounds (mcallester, rollout, rtdp-bel; rtbss has no upper).
    pub tree_lower: Option<f64>,
    pub tree_upper: Option<f64>,
    /// Offline bounds evaluated at the current belief.
    pub offline_lower: f64,
    pub offline_upper: f64,
    pub node_count: usize,
    pub reused_count: usize,
    pub expansions: u64,
}

/// Per-step records plus the realized discounted return.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub steps: Vec<StepRecord>,
    pub discounted_return: f64,
    pub discount: f64,
}

impl EpisodeLog {
    pub fn recompute_return(&self) -> f64 {
        let mut total = 0.0;
        let mut weight = 1.0;
        for step in &self.steps {
            total += weight * step.reward;
            weight *= self.discount;
        }
        total
    }

    /// The log with timing fields zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> EpisodeLog {
        let mut log = self.clone();
        for step in &mut log.steps {
            step.planning_time_ms = 0.0;
        }
        log
    }
}

/// A bound-evolution sample emitted while planning (`--trace-bounds`).
#[derive(Debug, Clone, Copy)]
pub struct TracePoint {
    pub step: usize,
    pub elapsed_ms: f64,
    pub expansions: u64,
    pub lower: f64,
    pub upper: f64,
}

/// A configured planner bound to one model's dynamics and offline bounds.
/// Owns whatever state persists across episodes (the RTDP value store).
pub struct Session<'a> {
    dynamics: &'a dyn BeliefDynamics,
    lower: &'a AlphaVectorSet,
    upper: &'a dyn BoundFunction,
    config: PlannerConfig,
    rollout_policies: Vec<&'a AlphaVectorSet>,
    rtdp_store: RtdpValueStore<'a>,
}

impl<'a> Session<'a> {
    pub fn new(
        dynamics: &'a dyn BeliefDynamics,
        lower: &'a AlphaVectorSet,
        upper: &'a dyn BoundFunction,
        config: PlannerConfig,
    ) -> Result<Self> {
        config.validate()?;
        Ok(Session {
            dynamics,
            lower,
            upper,
            config,
            rollout_policies: vec![lower],
            rtdp_store: RtdpValueStore::new(upper),
        })
    }

    /// Replaces the rollout policy set Π (defaults to the lower bound alone,
    /// which is plain rollout).
    pub fn with_rollout_policies(mut self, policies: Vec<&'a AlphaVectorSet>) -> Result<Self> {
        if policies.is_empty() {
            return Err(PomdpError::Config("rollout needs at least one policy".into()));
        }
        self.rollout_policies = policies;
        Ok(self)
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn rtdp_store(&self) -> &RtdpValueStore<'a> {
        &self.rtdp_store
    }

    /// Runs one episode: alternate planning and execution until a terminal
    /// belief or `max_steps`. Deterministic given `episode_seed` (for
    /// heuristic search this additionally requires `max_expansions`, since
    /// wall-clock budgets are machine-dependent).
    pub fn run_episode(
        &mut self,
        model: &PomdpModel,
        env: &mut EnvironmentState,
        max_steps: usize,
        episode_seed: u64,
        mut trace: Option<&mut dyn FnMut(TracePoint)>,
    ) -> Result<EpisodeLog> {
        let discount = self.dynamics.discount();
        let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
        let mut belief = self.dynamics.initial_belief();
        let mut tree = (self.config.strategy == Strategy::HeuristicSearch).then(|| {
            SearchTree::new(
                self.dynamics,
                self.lower,
                self.upper,
                self.config.heuristic.selector(),
                belief.clone(),
            )
        });
        let mut steps = Vec::new();

        for step_index in 0..max_steps {
            if self.dynamics.is_terminal(&belief) {
                break;
            }
            let offline_lower = self.lower.evaluate(&belief);
            let offline_upper = self.upper.evaluate(&belief);
            let start = Instant::now();
            let mut expansions = 0u64;
            let mut node_counter = 0u64;

            let (action, tree_lower, tree_upper, node_count, reused_count) =
                match self.config.strategy {
                    Strategy::HeuristicSearch => {
                        let t = tree.as_mut().expect("tree exists for heuristic search");
                        let budget = Duration::from_millis(self.config.time_budget_ms);
                        loop {
                            if t.is_epsilon_optimal(self.config.epsilon) {
                                break;
                            }
                            if start.elapsed() >= budget {
                                break;
                            }
                            if self
                                .config
                                .max_expansions
                                .is_some_and(|cap| expansions >= cap)
                            {
                                break;
                            }
                            let Some(next) = t.choose_next_node() else {
                                break;
                            };
                            t.expand(next)?;
                            t.update_ancestors(next);
                            expansions += 1;
                            if let Some(f) = trace.as_deref_mut() {
                                let root = t.root_node();
                                f(TracePoint {
                                    step: step_index,
                                    elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
                                    expansions,
                                    lower: root.lower(),
                                    upper: root.upper(),
                                });
                            }
                        }
                        let action = t
                            .best_lower_action()
                            .unwrap_or_else(|| self.lower.evaluate_with_action(&belief).1);
                        let root = t.root_node();
                        (
                            action,
                            Some(root.lower()),
                            Some(root.upper()),
                            t.node_count(),
                            t.reused_count(),
                        )
                    }
                    Strategy::Rtbss => {
                        let (action, value) = rtbss::plan(
                            self.dynamics,
                            self.lower,
                            self.upper,
                            &belief,
                            self.config.depth,
                            &mut node_counter,
                        );
                        (action, Some(value), None, 1 + node_counter as usize, 0)
                    }
                    Strategy::McAllester => {
                        let (action, _) = mcallester::plan(
                            self.dynamics,
                            &belief,
                            self.config.depth,
                            self.config.obs_samples,
                            None,
                            &mut rng,
                            &mut node_counter,
                        );
                        (action, None, None, 1 + node_counter as usize, 0)
                    }
                    Strategy::Rollout => {
                        let (action, _) = parallel_rollout_plan(
                            self.dynamics,
                            &belief,
                            &self.rollout_policies,
                            self.config.trajectories,
                            self.config.depth,
                            &mut rng,
                            &mut node_counter,
                        );
                        (action, None, None, 1 + node_counter as usize, 0)
                    }
                    Strategy::RtdpBel => {
                        let action = rtdp_bel_step(
                            self.dynamics,
                            &belief,
                            &mut self.rtdp_store,
                            self.config.resolution,
                            &mut node_counter,
                        );
                        (action, None, None, 1 + node_counter as usize, 0)
                    }
                };

            let planning_time_ms = start.elapsed().as_secs_f64() * 1e3;
            let (observation, reward) = env.step(model, action)?;

            match self.config.strategy {
                Strategy::HeuristicSearch => {
                    let t = tree.take().expect("tree exists for heuristic search");
                    let next = t.reuse_subtree(action, observation)?;
                    belief = next.root_node().belief().clone();
                    tree = Some(next);
                }
                _ => {
                    belief = self.dynamics.update(&belief, action, observation)?;
                }
            }

            steps.push(StepRecord {
                action,
                observation,
                reward,
                planning_time_ms,
                tree_lower,
                tree_upper,
                offline_lower,
                offline_upper,
                node_count,
                reused_count,
                expansions,
            });
        }

        let mut log = EpisodeLog {
            steps,
            discounted_return: 0.0,
            discount,
        };
        log.discounted_return = log.recompute_return();
        Ok(log)
    }
}
