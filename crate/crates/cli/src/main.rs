//! `pomdp`: run online planning experiments, export models and solve
//! offline bounds from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use pomdp_core::bounds::{
    alpha_set_to_text, blind_bound, fib_bound, pbvi_bound, qmdp_bound, SolverParams,
};
use pomdp_core::domains::{build_domain, parse_layout, DomainSpecifier};
use pomdp_core::harness::{run_experiment, ExperimentPlan, LowerBoundKind, UpperBoundKind};
use pomdp_core::parser::model_to_text;
use pomdp_core::planners::PlannerConfig;
use pomdp_core::PomdpError;

#[derive(Parser)]
#[command(name = "pomdp", version, about = "Anytime online POMDP planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of seeded planning episodes and write CSV metrics.
    Plan(PlanArgs),
    /// Write a generated domain in the `.pomdp` text format.
    ExportModel(ExportArgs),
    /// Solve an offline bound and write the α-vector set.
    SolveBounds(SolveArgs),
}

#[derive(Args)]
struct PlanArgs {
    /// Domain selector: tag, rocksample:<n>,<k> or fvrs:<n>,<k>.
    #[arg(long)]
    domain: String,
    /// Rock layout file: one `x y` pair per line.
    #[arg(long)]
    layout: Option<PathBuf>,
    /// Planner config file (`key = value` lines); CLI flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// heuristic-search | rtbss | mcallester | rollout | rtdp-bel.
    #[arg(long)]
    planner: Option<String>,
    /// satia | bipomdp | aems1 | aems2 | hsvi-bfs.
    #[arg(long)]
    heuristic: Option<String>,
    /// blind | pbvi.
    #[arg(long)]
    lower: Option<String>,
    /// mdp | qmdp | fib.
    #[arg(long)]
    upper: Option<String>,
    /// Planning budget per action in milliseconds.
    #[arg(long)]
    budget_ms: Option<u64>,
    /// Stop planning a step once the root gap is within this value.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Search horizon for rtbss / mcallester / rollout.
    #[arg(long)]
    depth: Option<usize>,
    /// Observations sampled per action (mcallester).
    #[arg(long)]
    obs_samples: Option<usize>,
    /// Sampled trajectories per action and policy (rollout).
    #[arg(long)]
    trajectories: Option<usize>,
    /// Belief discretization resolution (rtdp-bel).
    #[arg(long)]
    disc_k: Option<usize>,
    /// Cap on expansions per step; makes heuristic search deterministic.
    #[arg(long)]
    max_expansions: Option<u64>,
    /// PBVI belief-set size.
    #[arg(long, default_value_t = 64)]
    pbvi_beliefs: usize,
    /// PBVI iteration count.
    #[arg(long, default_value_t = 30)]
    pbvi_iters: usize,
    /// Episodes per start configuration.
    #[arg(long, default_value_t = 1)]
    episodes: usize,
    #[arg(long, default_value_t = 100)]
    max_steps: usize,
    /// Cap on total episodes (start configurations are subsampled).
    #[arg(long, default_value_t = 200)]
    episode_cap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-episode CSV output path (a `.summary.csv` sibling is written too).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write time-stamped root bounds while planning (heuristic search).
    #[arg(long)]
    trace_bounds: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    domain: String,
    #[arg(long)]
    layout: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    domain: String,
    #[arg(long)]
    layout: Option<PathBuf>,
    /// blind | pbvi | qmdp | fib.
    #[arg(long)]
    bound: String,
    #[arg(long, default_value_t = 64)]
    pbvi_beliefs: usize,
    #[arg(long, default_value_t = 30)]
    pbvi_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan(args) => run_plan(args),
        Command::ExportModel(args) => run_export(args),
        Command::SolveBounds(args) => run_solve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            // Configuration problems exit 2, runtime problems exit 1.
            let config_error = err
                .downcast_ref::<PomdpError>()
                .map(|e| {
                    matches!(
                        e,
                        PomdpError::Config(_)
                            | PomdpError::InvalidLayout(_)
                            | PomdpError::Validation(_)
                            | PomdpError::Parse { .. }
                    )
                })
                .unwrap_or(false);
            if config_error {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn load_layout(path: &Option<PathBuf>) -> anyhow::Result<Option<Vec<(usize, usize)>>> {
    match path {
        None => Ok(None),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading layout {}", p.display()))?;
            Ok(Some(parse_layout(&text)?))
        }
    }
}

fn run_plan(args: PlanArgs) -> anyhow::Result<()> {
    let mut planner = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            PlannerConfig::from_config_text(&text)?
        }
        None => PlannerConfig::default(),
    };
    if let Some(p) = &args.planner {
        planner.apply_key_value("planner", p)?;
    }
    if let Some(h) = &args.heuristic {
        planner.apply_key_value("heuristic", h)?;
    }
    if let Some(e) = args.epsilon {
        planner.epsilon = e;
    }
    if let Some(d) = args.depth {
        planner.depth = d;
    }
    if let Some(c) = args.obs_samples {
        planner.obs_samples = c;
    }
    if let Some(m) = args.trajectories {
        planner.trajectories = m;
    }
    if let Some(k) = args.disc_k {
        planner.resolution = k;
    }
    if let Some(b) = args.budget_ms {
        planner.time_budget_ms = b;
    }
    if let Some(cap) = args.max_expansions {
        planner.max_expansions = Some(cap);
    }
    planner.seed = args.seed;

    let mut plan = ExperimentPlan::new(&args.domain);
    plan.layout = load_layout(&args.layout)?;
    plan.planner = planner;
    if let Some(l) = &args.lower {
        plan.lower = LowerBoundKind::from_token(l)?;
    }
    if let Some(u) = &args.upper {
        plan.upper = UpperBoundKind::from_token(u)?;
    }
    plan.pbvi_beliefs = args.pbvi_beliefs;
    plan.pbvi_iterations = args.pbvi_iters;
    plan.episodes_per_start = args.episodes;
    plan.max_steps = args.max_steps;
    plan.episode_cap = args.episode_cap;
    plan.seed = args.seed;
    plan.out = args.out.clone();
    plan.trace_bounds = args.trace_bounds.clone();

    let outcome = run_experiment(&plan)?;
    let m = &outcome.metrics;
    println!(
        "{}: {} episodes, return {:.3} ± {:.3}, EBR {}, LBI {}, nodes {:.1}, reuse {:.1}%, online {:.1} ms",
        args.domain,
        m.episodes,
        m.mean_return,
        m.return_ci95,
        m.mean_ebr
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "na".into()),
        m.mean_lbi
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "na".into()),
        m.mean_nodes,
        m.mean_reuse_pct,
        m.mean_online_ms
    );
    Ok(())
}

fn run_export(args: ExportArgs) -> anyhow::Result<()> {
    let spec = DomainSpecifier::parse(&args.domain)?;
    let layout = load_layout(&args.layout)?;
    let domain = build_domain(&spec, layout)?;
    std::fs::write(&args.out, model_to_text(&domain.model))
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "{}: {} states, {} actions, {} observations -> {}",
        domain.name,
        domain.model.num_states(),
        domain.model.num_actions(),
        domain.model.num_observations(),
        args.out.display()
    );
    Ok(())
}

fn run_solve(args: SolveArgs) -> anyhow::Result<()> {
    let spec = DomainSpecifier::parse(&args.domain)?;
    let layout = load_layout(&args.layout)?;
    let domain = build_domain(&spec, layout)?;
    let params = SolverParams::default();
    let set = match args.bound.as_str() {
        "blind" => blind_bound(&domain.model, &params),
        "pbvi" => pbvi_bound(&domain.model, args.pbvi_beliefs, args.pbvi_iters, args.seed),
        "qmdp" => qmdp_bound(&domain.model, &params),
        "fib" => fib_bound(&domain.model, &params),
        other => {
            return Err(PomdpError::Config(format!(
                "unknown bound `{other}` (expected blind|pbvi|qmdp|fib)"
            ))
            .into())
        }
    };
    std::fs::write(&args.out, alpha_set_to_text(&set))
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "{}: {} {} vectors -> {}",
        domain.name,
        set.vectors().len(),
        set.kind.as_str(),
        args.out.display()
    );
    Ok(())
}
