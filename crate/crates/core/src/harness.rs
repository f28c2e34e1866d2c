//! Experiment runner: seeded batches of episodes across planners, domains
//! and budgets, aggregating the benchmark metrics (discounted return, error
//! bound reduction, lower bound improvement, node counts, reuse, online
//! time) and writing per-episode plus summary CSV files.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::bounds::{
    blind_bound, fib_bound, mdp_bound, pbvi_bound, qmdp_bound, AlphaVectorSet, BoundFunction,
    SolverParams,
};
use crate::domains::{build_domain, DomainSpecifier, GeneratedDomain};
use crate::error::{PomdpError, Result};
use crate::model::EnvironmentState;
use crate::planners::{EpisodeLog, PlannerConfig, Session, StepRecord, Strategy, TracePoint};

/// Error bound reduction and lower bound improvement for one executed step.
/// EBR needs both tree bounds; LBI needs the tree lower bound. A vanishing
/// offline gap counts as fully reduced.
pub fn compute_step_metrics(step: &StepRecord) -> (Option<f64>, Option<f64>) {
    let lbi = step.tree_lower.map(|l| l - step.offline_lower);
    let ebr = match (step.tree_lower, step.tree_upper) {
        (Some(lower), Some(upper)) => {
            let denom = step.offline_upper - step.offline_lower;
            if denom <= 1e-12 {
                Some(1.0)
            } else {
                Some(1.0 - (upper - lower) / denom)
            }
        }
        _ => None,
    };
    (ebr, lbi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowerBoundKind {
    Blind,
    Pbvi,
}

impl LowerBoundKind {
    pub fn from_token(token: &str) -> Result<Self> {
        match token {
            "blind" => Ok(LowerBoundKind::Blind),
            "pbvi" => Ok(LowerBoundKind::Pbvi),
            other => Err(PomdpError::Config(format!(
                "unknown lower bound `{other}` (expected blind|pbvi)"
            ))),
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            LowerBoundKind::Blind => "blind",
            LowerBoundKind::Pbvi => "pbvi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpperBoundKind {
    Mdp,
    Qmdp,
    Fib,
}

impl UpperBoundKind {
    pub fn from_token(token: &str) -> Result<Self> {
        match token {
            "mdp" => Ok(UpperBoundKind::Mdp),
            "qmdp" => Ok(UpperBoundKind::Qmdp),
            "fib" => Ok(UpperBoundKind::Fib),
            other => Err(PomdpError::Config(format!(
                "unknown upper bound `{other}` (expected mdp|qmdp|fib)"
            ))),
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            UpperBoundKind::Mdp => "mdp",
            UpperBoundKind::Qmdp => "qmdp",
            UpperBoundKind::Fib => "fib",
        }
    }
}

/// A batch of seeded episodes for one (domain, planner, bounds) tuple.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    /// Domain selector: `tag`, `rocksample:<n>,<k>`, `fvrs:<n>,<k>`.
    pub domain: String,
    /// Rock layout override for the rock domains.
    pub layout: Option<Vec<(usize, usize)>>,
    pub planner: PlannerConfig,
    pub lower: LowerBoundKind,
    pub upper: UpperBoundKind,
    pub pbvi_beliefs: usize,
    pub pbvi_iterations: usize,
    /// Episodes per start configuration.
    pub episodes_per_start: usize,
    pub max_steps: usize,
    /// Cap on total episodes; start configurations are subsampled with a
    /// fixed seed when the cross product exceeds it.
    pub episode_cap: usize,
    pub seed: u64,
    /// Per-episode CSV path; a `.summary.csv` sibling is written next to it.
    pub out: Option<PathBuf>,
    /// Optional bound-evolution trace (heuristic search only).
    pub trace_bounds: Option<PathBuf>,
}

impl ExperimentPlan {
    pub fn new(domain: &str) -> Self {
        ExperimentPlan {
            domain: domain.to_string(),
            layout: None,
            planner: PlannerConfig::default(),
            lower: LowerBoundKind::Blind,
            upper: UpperBoundKind::Fib,
            pbvi_beliefs: 64,
            pbvi_iterations: 30,
            episodes_per_start: 1,
            max_steps: 100,
            episode_cap: 200,
            seed: 0,
            out: None,
            trace_bounds: None,
        }
    }
}

/// Per-episode digest backing one CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRow {
    pub episode: usize,
    pub seed: u64,
    pub discounted_return: f64,
    pub mean_ebr: Option<f64>,
    pub mean_lbi: Option<f64>,
    pub mean_nodes: f64,
    pub mean_reuse_pct: f64,
    pub mean_online_ms: f64,
    pub steps: usize,
}

/// Batch aggregate across episodes. Step-level metrics are pooled uniformly
/// over all executed steps.
#[derive(Debug, Clone)]
pub struct MetricsRecord {
    pub episodes: usize,
    pub mean_return: f64,
    /// 1.96 standard errors of the mean return.
    pub return_ci95: f64,
    pub mean_ebr: Option<f64>,
    pub mean_lbi: Option<f64>,
    pub mean_nodes: f64,
    pub mean_reuse_pct: f64,
    pub mean_online_ms: f64,
}

pub struct ExperimentOutcome {
    pub metrics: MetricsRecord,
    pub rows: Vec<EpisodeRow>,
    pub logs: Vec<EpisodeLog>,
}

/// Runs the plan: enumerates start configurations (the support of the
/// initial belief), subsamples to the episode cap with a fixed seed, runs
/// every episode sequentially and deterministically, aggregates the metrics
/// and writes the CSV files when an output path is set.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentOutcome> {
    let spec = DomainSpecifier::parse(&plan.domain)?;
    let domain = build_domain(&spec, plan.layout.clone())?;
    run_experiment_on(plan, &domain)
}

/// Same as [`run_experiment`] for an already-built domain.
pub fn run_experiment_on(
    plan: &ExperimentPlan,
    domain: &GeneratedDomain,
) -> Result<ExperimentOutcome> {
    let model = &domain.model;
    let params = SolverParams::default();
    let lower: AlphaVectorSet = match plan.lower {
        LowerBoundKind::Blind => blind_bound(model, &params),
        LowerBoundKind::Pbvi => {
            pbvi_bound(model, plan.pbvi_beliefs, plan.pbvi_iterations, plan.seed)
        }
    };
    // RTDP's value table falls back to the MDP approximation regardless of
    // the configured upper bound.
    let upper: Box<dyn BoundFunction> =
        if plan.planner.strategy == Strategy::RtdpBel {
            Box::new(mdp_bound(model, &params))
        } else {
            match plan.upper {
                UpperBoundKind::Mdp => Box::new(mdp_bound(model, &params)),
                UpperBoundKind::Qmdp => Box::new(qmdp_bound(model, &params)),
                UpperBoundKind::Fib => Box::new(fib_bound(model, &params)),
            }
        };

    // Start configurations = support of the initial belief (joint positions
    // for Tag, rock assignments for the rock domains).
    let starts: Vec<usize> = model
        .initial_belief()
        .entries()
        .iter()
        .map(|&(s, _)| s as usize)
        .collect();
    let mut pairs: Vec<(usize, usize)> = starts
        .iter()
        .flat_map(|&s| (0..plan.episodes_per_start).map(move |rep| (s, rep)))
        .collect();
    if pairs.len() > plan.episode_cap {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(mix(plan.seed, 0x5354_4152));
        pairs.shuffle(&mut rng);
        pairs.truncate(plan.episode_cap);
        pairs.sort_unstable();
    }

    let mut session = Session::new(
        domain.factored.as_ref(),
        &lower,
        upper.as_ref(),
        plan.planner.clone(),
    )?;

    let mut trace_file = match &plan.trace_bounds {
        Some(path) => {
            let mut f = fs::File::create(path)?;
            writeln!(f, "episode,step,elapsed_ms,expansions,lower,upper")?;
            Some(f)
        }
        None => None,
    };

    let mut rows = Vec::with_capacity(pairs.len());
    let mut logs = Vec::with_capacity(pairs.len());
    for (episode, &(start, rep)) in pairs.iter().enumerate() {
        let episode_seed = mix(plan.seed, ((start as u64) << 20) ^ rep as u64 ^ 0x45_50);
        let mut env = EnvironmentState::with_state(model, start, mix(episode_seed, 1))?;
        let log = match trace_file.as_mut() {
            Some(file) => {
                let mut sink = |p: TracePoint| {
                    let _ = writeln!(
                        file,
                        "{episode},{},{},{},{},{}",
                        p.step,
                        format_sig6(p.elapsed_ms),
                        p.expansions,
                        format_sig6(p.lower),
                        format_sig6(p.upper)
                    );
                };
                session.run_episode(
                    model,
                    &mut env,
                    plan.max_steps,
                    mix(episode_seed, 2),
                    Some(&mut sink),
                )?
            }
            None => session.run_episode(
                model,
                &mut env,
                plan.max_steps,
                mix(episode_seed, 2),
                None,
            )?,
        };
        rows.push(summarize_episode(episode, episode_seed, &log));
        logs.push(log);
    }

    let metrics = aggregate(&rows, &logs);
    if let Some(out) = &plan.out {
        write_episode_csv(out, plan, domain, &rows)?;
        write_summary_csv(&summary_path(out), plan, domain, &metrics)?;
    }
    Ok(ExperimentOutcome {
        metrics,
        rows,
        logs,
    })
}

fn summarize_episode(episode: usize, seed: u64, log: &EpisodeLog) -> EpisodeRow {
    let n = log.steps.len().max(1) as f64;
    let mut ebr_sum = 0.0;
    let mut ebr_n = 0usize;
    let mut lbi_sum = 0.0;
    let mut lbi_n = 0usize;
    let mut nodes = 0.0;
    let mut reuse = 0.0;
    let mut online = 0.0;
    for step in &log.steps {
        let (ebr, lbi) = compute_step_metrics(step);
        if let Some(e) = ebr {
            ebr_sum += e;
            ebr_n += 1;
        }
        if let Some(l) = lbi {
            lbi_sum += l;
            lbi_n += 1;
        }
        nodes += step.node_count as f64;
        if step.node_count > 0 {
            reuse += 100.0 * step.reused_count as f64 / step.node_count as f64;
        }
        online += step.planning_time_ms;
    }
    EpisodeRow {
        episode,
        seed,
        discounted_return: log.discounted_return,
        mean_ebr: (ebr_n > 0).then(|| ebr_sum / ebr_n as f64),
        mean_lbi: (lbi_n > 0).then(|| lbi_sum / lbi_n as f64),
        mean_nodes: nodes / n,
        mean_reuse_pct: reuse / n,
        mean_online_ms: online / n,
        steps: log.steps.len(),
    }
}

fn aggregate(rows: &[EpisodeRow], logs: &[EpisodeLog]) -> MetricsRecord {
    let n = rows.len();
    let mean_return = rows.iter().map(|r| r.discounted_return).sum::<f64>() / n.max(1) as f64;
    let ci = if n > 1 {
        let var = rows
            .iter()
            .map(|r| (r.discounted_return - mean_return).powi(2))
            .sum::<f64>()
            / (n - 1) as f64;
        1.96 * (var / n as f64).sqrt()
    } else {
        0.0
    };
    let mut ebr_sum = 0.0;
    let mut ebr_n = 0usize;
    let mut lbi_sum = 0.0;
    let mut lbi_n = 0usize;
    let mut nodes = 0.0;
    let mut reuse = 0.0;
    let mut online = 0.0;
    let mut steps = 0usize;
    for log in logs {
        for step in &log.steps {
            let (ebr, lbi) = compute_step_metrics(step);
            if let Some(e) = ebr {
                ebr_sum += e;
                ebr_n += 1;
            }
            if let Some(l) = lbi {
                lbi_sum += l;
                lbi_n += 1;
            }
            nodes += step.node_count as f64;
            if step.node_count > 0 {
                reuse += 100.0 * step.reused_count as f64 / step.node_count as f64;
            }
            online += step.planning_time_ms;
            steps += 1;
        }
    }
    let steps_f = steps.max(1) as f64;
    MetricsRecord {
        episodes: n,
        mean_return,
        return_ci95: ci,
        mean_ebr: (ebr_n > 0).then(|| ebr_sum / ebr_n as f64),
        mean_lbi: (lbi_n > 0).then(|| lbi_sum / lbi_n as f64),
        mean_nodes: nodes / steps_f,
        mean_reuse_pct: reuse / steps_f,
        mean_online_ms: online / steps_f,
    }
}

pub fn summary_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "results".into());
    out.with_file_name(format!("{stem}.summary.csv"))
}

pub const EPISODE_CSV_HEADER: &str =
    "domain,planner,heuristic,lower,upper,budget_ms,seed,episode,return,ebr,lbi,nodes,reuse_pct,online_ms";

fn config_fields(plan: &ExperimentPlan, domain: &GeneratedDomain) -> String {
    format!(
        "{},{},{},{},{},{}",
        csv_field(&domain.name),
        plan.planner.strategy.token(),
        plan.planner.heuristic.token(),
        plan.lower.token(),
        plan.upper.token(),
        plan.planner.time_budget_ms
    )
}

/// Writes one row per episode, RFC-4180 quoting, 6 significant digits.
pub fn write_episode_csv(
    path: &Path,
    plan: &ExperimentPlan,
    domain: &GeneratedDomain,
    rows: &[EpisodeRow],
) -> Result<()> {
    let mut out = String::new();
    out.push_str(EPISODE_CSV_HEADER);
    out.push('\n');
    let prefix = config_fields(plan, domain);
    for row in rows {
        out.push_str(&format!(
            "{prefix},{},{},{},{},{},{},{},{}\n",
            row.seed,
            row.episode,
            format_sig6(row.discounted_return),
            format_opt6(row.mean_ebr),
            format_opt6(row.mean_lbi),
            format_sig6(row.mean_nodes),
            format_sig6(row.mean_reuse_pct),
            format_sig6(row.mean_online_ms),
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub const SUMMARY_CSV_HEADER: &str = "domain,planner,heuristic,lower,upper,budget_ms,seed,episodes,return_mean,return_ci95,ebr_mean,lbi_mean,nodes_mean,reuse_pct_mean,online_ms_mean";

pub fn write_summary_csv(
    path: &Path,
    plan: &ExperimentPlan,
    domain: &GeneratedDomain,
    metrics: &MetricsRecord,
) -> Result<()> {
    let mut out = String::new();
    out.push_str(SUMMARY_CSV_HEADER);
    out.push('\n');
    out.push_str(&format!(
        "{},{},{},{},{},{},{},{},{},{}\n",
        config_fields(plan, domain),
        plan.seed,
        metrics.episodes,
        format_sig6(metrics.mean_return),
        format_sig6(metrics.return_ci95),
        format_opt6(metrics.mean_ebr),
        format_opt6(metrics.mean_lbi),
        format_sig6(metrics.mean_nodes),
        format_sig6(metrics.mean_reuse_pct),
        format_sig6(metrics.mean_online_ms),
    ));
    fs::write(path, out)?;
    Ok(())
}

/// Six significant digits, scientific notation.
pub fn format_sig6(value: f64) -> String {
    if value == 0.0 {
        "0".to_string()
    } else {
        format!("{value:.5e}")
    }
}

fn format_opt6(value: Option<f64>) -> String {
    value.map(format_sig6).unwrap_or_else(|| "na".to_string())
}

/// RFC-4180: quote fields containing commas, quotes or newlines.
pub fn csv_field(raw: &str) -> String {
    if raw.contains([',', '"', '\n']) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}

/// splitmix64-style seed mixing for per-episode streams.
pub fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
