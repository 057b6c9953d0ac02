//! The `decq` command line.
//!
//! Exit status: 0 on success, 2 on configuration errors (including usage errors and a
//! missing equilibrium cache), 1 on runtime errors.

use super::{
    parse_grid, run_experiment, write_long, write_summary, Algo, EquilibriumSet, ExperimentConfig, ExperimentResult,
    HarnessError, Learner,
};
use crate::bounds::{
    prop2_bounds, theorem1_schedule, theorem2_schedule, theorem3_schedule, BoundInputs, LinearInputs, Prop2Inputs,
    ScheduleBundle,
};
use crate::brpi::brpi_bounds;
use crate::features::{polynomial_basis, FeatureBasis};
use crate::game::{build_gridworld, parse_game_spec, reachability, validate_game_with, PolicySpace, StochasticGame};
use crate::graph::{BestReplyGraph, GraphMode, DEFAULT_NODE_BUDGET};
use crate::learner::{Restart, StepSize};
use crate::oracle::{game_constants, ConstantsConfig, GameConstants, LinearSetup, ThetaBall};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

const BUILTIN_GRIDWORLD: &str = "builtin:gridworld";
const DEFAULT_BASIS: &str = "3,18";

#[derive(Parser, Debug)]
#[command(name = "decq", version, about = "Decentralized Q-learning experiments on finite stochastic games")]
struct Cli {
    /// Worker threads for trial parallelism (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a game file and report reachability.
    Validate {
        #[command(flatten)]
        game: GameArgs,
        /// Largest horizon tried for the reachability constant.
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Enumerate the equilibria of the best-reply graph and write the cache file.
    Equilibria {
        #[command(flatten)]
        game: GameArgs,
        #[command(flatten)]
        eq: EqArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Certify weak acyclicity and report the longest path to an equilibrium.
    Acyclicity {
        #[command(flatten)]
        game: GameArgs,
        #[command(flatten)]
        eq: EqArgs,
    },
    /// Game constants and the closed-form schedules, as JSON.
    Bounds(BoundsArgs),
    /// Best reply process with inertia.
    Brpi(RunArgs),
    /// Decentralized Q-learning with Q-tables.
    LearnTabular(RunArgs),
    /// Decentralized Q-learning with linear features.
    LearnLinear(RunArgs),
    /// Every (K, T) cell of a grid, one summary row per trial.
    Sweep {
        #[arg(long, value_enum)]
        algo: AlgoArg,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args, Debug)]
struct GameArgs {
    /// Path to a game file, or `builtin:gridworld`.
    #[arg(long, default_value = BUILTIN_GRIDWORLD)]
    game: String,
    /// Replace every agent's discount factor.
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args, Debug)]
struct EqArgs {
    #[arg(long = "eq-set", value_enum, default_value = "tabular")]
    eq_set: EqMode,
    #[command(flatten)]
    linear: LinearArgs,
}

#[derive(Args, Debug, Clone)]
struct LinearArgs {
    /// Polynomial basis `order,d` (linear learner and linear equilibrium set).
    #[arg(long, default_value = DEFAULT_BASIS)]
    basis: String,
    /// Parameter ball: `value` (radius max|r|/(1-γ)), `contain` (every realizable table
    /// projects to an interior point) or an explicit radius.
    #[arg(long = "theta-radius", default_value = "value")]
    theta_radius: String,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    game: GameArgs,
    /// Number of phases: `v`, `a,b,c` or `a:b` (1-2-5 grid).
    #[arg(long = "K")]
    k: String,
    /// Phase length, same syntax as `--K`; ignored by `brpi`.
    #[arg(long = "T", default_value = "200")]
    t: String,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.4)]
    rho: f64,
    #[arg(long, default_value_t = 0.3)]
    lambda: f64,
    /// Greedy tolerance; defaults to half the minimum separation of the game.
    #[arg(long)]
    zeta: Option<f64>,
    /// `invsqrt` or `const:v`.
    #[arg(long = "step-size", default_value = "invsqrt")]
    step_size: String,
    #[arg(long, value_enum, default_value = "on-absorbing")]
    restart: RestartArg,
    #[command(flatten)]
    linear: LinearArgs,
    /// Equilibrium set to score against; defaults to the learner's own mode.
    #[arg(long = "eq-set", value_enum)]
    eq_set: Option<EqMode>,
    /// Precomputed equilibrium cache (see `decq equilibria`); computed in-process when absent.
    #[arg(long = "eq-cache")]
    eq_cache: Option<PathBuf>,
    /// Summary CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-phase indicator CSV (single-cell runs only).
    #[arg(long)]
    long: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[command(flatten)]
    game: GameArgs,
    #[arg(long, default_value_t = 0.4)]
    rho: f64,
    #[arg(long, default_value_t = 0.3)]
    lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    c0: f64,
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    /// Override the reachability constant (requires `--horizon`).
    #[arg(long, requires = "horizon")]
    kappa: Option<f64>,
    #[arg(long, requires = "kappa")]
    horizon: Option<usize>,
    /// Polynomial basis `order,d`; enables the linear constants and schedules.
    #[arg(long)]
    basis: Option<String>,
    /// Parameter ball, as for the learners.
    #[arg(long = "theta-radius", default_value = "value")]
    theta_radius: String,
    /// Curvature constants, one value for all agents or one per agent.
    #[arg(long, value_delimiter = ',')]
    xi: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum EqMode {
    Tabular,
    Linear,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AlgoArg {
    Tabular,
    Linear,
    Brpi,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum RestartArg {
    Never,
    OnAbsorbing,
}

impl From<RestartArg> for Restart {
    fn from(r: RestartArg) -> Self {
        match r {
            RestartArg::Never => Restart::Never,
            RestartArg::OnAbsorbing => Restart::OnAbsorbing,
        }
    }
}

fn config(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

/// Parse `argv` (program name first), run, and return the exit status.
pub fn run_cli<I, T>(argv: I, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.threads {
        Some(0) => Err(config("--threads must be at least 1")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command, stdout, stderr)),
            Err(e) => Err(HarnessError::Config(format!("cannot start thread pool: {e}"))),
        },
        None => dispatch(cli.command, stdout, stderr),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> Result<i32, HarnessError> {
    match cmd {
        Command::Validate { game, horizon } => validate(&game, horizon, stdout),
        Command::Equilibria { game, eq, out } => {
            let game = load_game(&game)?;
            let (set, graph) = equilibrium_set(&game, eq.eq_set, &eq.linear)?;
            set.save(&out)?;
            writeln!(stderr, "{} equilibria among {} joint policies written to {}", set.len(), graph.num_nodes(), out.display())
                .map_err(|e| HarnessError::io("stderr", e))?;
            Ok(0)
        }
        Command::Acyclicity { game, eq } => {
            let game = load_game(&game)?;
            let (_, graph) = equilibrium_set(&game, eq.eq_set, &eq.linear)?;
            let acyc = graph.certify_weak_acyclicity();
            let mut report = json!({
                "mode": graph.mode(),
                "nodes": graph.num_nodes(),
                "equilibria": graph.equilibria().len(),
                "weakly_acyclic": acyc.weakly_acyclic,
                "l": acyc.l,
                "witness": acyc.witness,
            });
            if graph.mode() == GraphMode::Tabular {
                let optimal = graph.optimal_equilibria();
                report["optimal_equilibria"] = json!(optimal.len());
                report["optimal_modulo_inert"] = json!(graph.count_modulo_inert(&optimal));
            }
            emit_json(&report, None, stdout)?;
            Ok(0)
        }
        Command::Bounds(args) => bounds(&args, stdout),
        Command::Brpi(run) => experiment(Algo::Brpi, &run, stdout, stderr),
        Command::LearnTabular(run) => experiment(Algo::Tabular, &run, stdout, stderr),
        Command::LearnLinear(run) => experiment(Algo::Linear, &run, stdout, stderr),
        Command::Sweep { algo, run } => {
            let algo = match algo {
                AlgoArg::Tabular => Algo::Tabular,
                AlgoArg::Linear => Algo::Linear,
                AlgoArg::Brpi => Algo::Brpi,
            };
            experiment(algo, &run, stdout, stderr)
        }
    }
}

fn load_game(args: &GameArgs) -> Result<StochasticGame, HarnessError> {
    let game = if args.game == BUILTIN_GRIDWORLD {
        build_gridworld()
    } else if let Some(name) = args.game.strip_prefix("builtin:") {
        return Err(config(format!("unknown builtin game `{name}`; available: gridworld")));
    } else {
        let text = fs::read_to_string(&args.game).map_err(|e| HarnessError::io(&args.game, e))?;
        parse_game_spec(&text)?
    };
    match args.gamma {
        Some(g) => {
            if !(g > 0.0 && g < 1.0) {
                return Err(config("--gamma must lie in (0,1)"));
            }
            Ok(game.with_discounts(vec![g; game.num_agents()])?)
        }
        None => Ok(game),
    }
}

fn parse_basis(spec: &str) -> Result<(u32, usize), HarnessError> {
    let bad = || config(format!("--basis expects `order,d`, got `{spec}`"));
    let (o, d) = spec.split_once(',').ok_or_else(bad)?;
    Ok((o.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?))
}

fn parse_step(spec: &str) -> Result<StepSize, HarnessError> {
    if spec == "invsqrt" {
        return Ok(StepSize::InvSqrt);
    }
    spec.strip_prefix("const:")
        .and_then(|v| v.parse().ok())
        .map(StepSize::Constant)
        .ok_or_else(|| config(format!("--step-size expects `invsqrt` or `const:v`, got `{spec}`")))
}

/// Features and parameter balls, with the cache label `linear:<order>,<d>:<radius>`.
fn linear_setup(game: &StochasticGame, args: &LinearArgs) -> Result<(String, LinearSetup), HarnessError> {
    let (order, d) = parse_basis(&args.basis)?;
    let bases = (0..game.num_agents())
        .map(|i| polynomial_basis(game, i, order, d))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| config(e.to_string()))?;
    let setup = match args.theta_radius.as_str() {
        "value" => LinearSetup::with_value_balls(game, bases),
        "contain" => LinearSetup::with_default_balls(game, bases),
        r => match r.parse::<f64>() {
            Ok(r) if r > 0.0 && r.is_finite() => LinearSetup { balls: vec![ThetaBall::new(r); bases.len()], bases },
            _ => return Err(config(format!("--theta-radius expects `value`, `contain` or a positive number, got `{r}`"))),
        },
    };
    Ok((format!("linear:{order},{d}:{}", args.theta_radius), setup))
}

fn equilibrium_set(
    game: &StochasticGame,
    mode: EqMode,
    linear: &LinearArgs,
) -> Result<(EquilibriumSet, BestReplyGraph), HarnessError> {
    let (label, graph) = match mode {
        EqMode::Tabular => ("tabular".to_string(), BestReplyGraph::build(game, GraphMode::Tabular, None, DEFAULT_NODE_BUDGET)?),
        EqMode::Linear => {
            let (label, setup) = linear_setup(game, linear)?;
            (label, BestReplyGraph::build(game, GraphMode::Linear, Some(&setup), DEFAULT_NODE_BUDGET)?)
        }
    };
    Ok((EquilibriumSet::new(game, &label, graph.equilibria().to_vec()), graph))
}

fn mode_label(game: &StochasticGame, mode: EqMode, linear: &LinearArgs) -> Result<String, HarnessError> {
    Ok(match mode {
        EqMode::Tabular => "tabular".into(),
        EqMode::Linear => linear_setup(game, linear)?.0,
    })
}

fn constants(game: &StochasticGame, rho: f64, linear: Option<&LinearSetup>) -> Result<GameConstants, HarnessError> {
    Ok(game_constants(game, &ConstantsConfig::new(vec![rho; game.num_agents()]), linear)?)
}

fn validate(args: &GameArgs, horizon: Option<usize>, stdout: &mut (dyn Write + Send)) -> Result<i32, HarnessError> {
    let game = load_game(args)?;
    let report = validate_game_with(&game, horizon.unwrap_or((2 * game.num_states()).max(4)));
    let io = |e| HarnessError::io("stdout", e);
    for issue in &report.issues {
        writeln!(stdout, "{issue}").map_err(io)?;
    }
    match report.reachability {
        Some(r) => writeln!(stdout, "reachability: horizon {} kappa {}", r.horizon, r.kappa),
        None => writeln!(stdout, "reachability: no horizon up to {} reaches every state from every state", report.max_horizon),
    }
    .map_err(io)?;
    writeln!(stdout, "{}", if report.ok { "ok" } else { "invalid" }).map_err(io)?;
    Ok(if report.ok { 0 } else { 2 })
}

fn emit_json(value: &Value, out: Option<&Path>, stdout: &mut (dyn Write + Send)) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value).expect("JSON values serialize") + "\n";
    match out {
        Some(path) => fs::write(path, text).map_err(|e| HarnessError::io(path, e)),
        None => stdout.write_all(text.as_bytes()).map_err(|e| HarnessError::io("stdout", e)),
    }
}

fn schedule_json(r: Result<ScheduleBundle, String>) -> Value {
    match r {
        Ok(b) => serde_json::to_value(b).expect("bundle serializes"),
        Err(e) => json!({ "error": e }),
    }
}

fn bounds(args: &BoundsArgs, stdout: &mut (dyn Write + Send)) -> Result<i32, HarnessError> {
    let game = load_game(&args.game)?;
    let n = game.num_agents();
    let space = PolicySpace::new(&game);
    let policy_counts: Vec<f64> = (0..n).map(|i| space.agent_count(i) as f64).collect();
    let action_counts: Vec<usize> = (0..n).map(|i| game.max_actions(i)).collect();
    let lambdas = vec![args.lambda; n];

    let reach = match (args.kappa, args.horizon) {
        (Some(kappa), Some(horizon)) => Some((kappa, horizon)),
        _ => reachability(&game, (2 * game.num_states()).max(4)).map(|r| (r.kappa, r.horizon)),
    };
    let setup = match &args.basis {
        Some(spec) => {
            Some(linear_setup(&game, &LinearArgs { basis: spec.clone(), theta_radius: args.theta_radius.clone() })?.1)
        }
        None => None,
    };
    let xi = match args.xi.len() {
        0 => None,
        1 => Some(vec![args.xi[0]; n]),
        m if m == n => Some(args.xi.clone()),
        m => return Err(config(format!("--xi takes one value or {n}, got {m}"))),
    };
    let consts = constants(&game, args.rho, setup.as_ref())?;
    let tab_graph = BestReplyGraph::build(&game, GraphMode::Tabular, None, DEFAULT_NODE_BUDGET)?;
    let l = tab_graph.certify_weak_acyclicity().l;
    let lin_graph = match &setup {
        Some(s) => Some(BestReplyGraph::build(&game, GraphMode::Linear, Some(s), DEFAULT_NODE_BUDGET)?),
        None => None,
    };
    let l_tilde = lin_graph.as_ref().and_then(|g| g.certify_weak_acyclicity().l);

    let linear_inputs: Result<LinearInputs, String> = match (&setup, &consts.linear) {
        (Some(s), Some(lc)) => (|| {
            let zeta_bar_theta = lc.zeta_bar_theta.ok_or("every projected Q-function is flat across actions")?;
            let xi = xi.clone().ok_or("pass --xi for the linear schedules")?;
            let l_tilde = l_tilde.ok_or("the linear best-reply graph is not weakly acyclic")?;
            Ok(LinearInputs {
                zeta_bar_theta,
                gamma_cap_tilde: lc.gamma_cap_tilde,
                b: lc.bellman_error_bound,
                l_tilde,
                xi,
                diameters: s.balls.iter().map(|b| b.diameter()).collect(),
                r_max: consts.r_min.iter().zip(&consts.r_max).map(|(lo, hi)| lo.abs().max(hi.abs())).collect(),
            })
        })()
        .map_err(|e: &str| e.to_string()),
        _ => Err("pass --basis for the linear schedules".into()),
    };
    let inputs: Result<BoundInputs, String> = match (reach, l) {
        (None, _) => Err("no horizon reaches every state from every state; pass --kappa and --horizon".into()),
        (_, None) => Err("the best-reply graph is not weakly acyclic".into()),
        (Some((kappa, horizon)), Some(l)) => Ok(BoundInputs {
            kappa,
            horizon,
            num_states: game.num_states(),
            action_counts: action_counts.clone(),
            gammas: game.discounts().to_vec(),
            zeta_bar: consts.zeta_bar,
            gamma_cap: consts.gamma_cap,
            l,
            policy_counts: policy_counts.clone(),
            lambdas: lambdas.clone(),
            delta: args.delta,
            rho: args.rho,
            c0: args.c0,
            c1: args.c1,
            linear: linear_inputs.clone().ok(),
        }),
    };
    let with_linear = |f: fn(&BoundInputs, Option<&dyn Fn(f64) -> f64>) -> Result<ScheduleBundle, crate::bounds::BoundsError>| {
        let inp = inputs.as_ref().map_err(|e| e.clone())?;
        linear_inputs.as_ref().map_err(|e| e.clone())?;
        f(inp, None).map_err(|e| e.to_string())
    };
    let t1 = inputs.as_ref().map_err(|e| e.clone()).and_then(|i| theorem1_schedule(i).map_err(|e| e.to_string()));
    let t2 = with_linear(theorem2_schedule);
    let t3 = with_linear(theorem3_schedule);
    let prop2 = match reach {
        Some((kappa, horizon)) => {
            let p = Prop2Inputs { kappa, horizon, num_states: game.num_states(), action_counts, rhos: vec![args.rho; n] };
            match prop2_bounds(&p) {
                Ok(b) => json!({
                    "bounds": b,
                    "t_mix_quarter_upper": p.t_mix_upper(0.25),
                    "t_mix_quarter_upper_tight": p.t_mix_upper_tight(0.25),
                }),
                Err(e) => json!({ "error": e.to_string() }),
            }
        }
        None => json!({ "error": "no horizon reaches every state from every state; pass --kappa and --horizon" }),
    };
    let features = setup.as_ref().map(|st| {
        st.bases
            .iter()
            .zip(&st.balls)
            .map(|(b, ball)| {
                json!({
                    "agent": b.agent(),
                    "basis": b.kind(),
                    "normalization": b.scale(),
                    "sigma_min": b.sigma_min(),
                    "theta_radius": ball.radius,
                })
            })
            .collect::<Vec<_>>()
    });
    let report = json!({
        "features": features,
        "constants": consts,
        "reachability": reach.map(|(kappa, horizon)| json!({ "kappa": kappa, "horizon": horizon })),
        "policy_counts": policy_counts,
        "l": l,
        "l_tilde": l_tilde,
        "brpi": l.map(|l| brpi_bounds(args.delta, &lambdas, &policy_counts, l)),
        "prop2": prop2,
        "theorem1": schedule_json(t1),
        "theorem2": schedule_json(t2),
        "theorem3": schedule_json(t3),
    });
    emit_json(&report, args.out.as_deref(), stdout)?;
    Ok(0)
}

fn experiment(algo: Algo, run: &RunArgs, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> Result<i32, HarnessError> {
    let ks = parse_grid(&run.k)?;
    let ts = if algo == Algo::Brpi { vec![1] } else { parse_grid(&run.t)? };
    let cells: Vec<(u64, u64)> = ks.iter().flat_map(|&k| ts.iter().map(move |&t| (k, t))).collect();
    if cells.len() > 1 && run.long.is_some() {
        return Err(config("--long needs a single (K, T) cell"));
    }
    let step = parse_step(&run.step_size)?;
    let game = load_game(&run.game)?;
    let eq_mode = run.eq_set.unwrap_or(if algo == Algo::Linear { EqMode::Linear } else { EqMode::Tabular });
    // Validate the numeric configuration before any expensive precomputation.
    let probe = ExperimentConfig {
        k: cells[0].0 as usize,
        t: cells[0].1,
        trials: run.trials,
        master_seed: run.seed,
        rho: run.rho,
        lambda: run.lambda,
        zeta: run.zeta.unwrap_or(1.0),
        step,
        restart: run.restart.into(),
    };
    probe.validate()?;

    let eq = match &run.eq_cache {
        Some(path) => EquilibriumSet::load(path, &game, &mode_label(&game, eq_mode, &run.linear)?)?,
        None => equilibrium_set(&game, eq_mode, &run.linear)?.0,
    };
    let setup = match algo {
        Algo::Linear => Some(linear_setup(&game, &run.linear)?.1),
        _ => None,
    };
    let zeta = match (run.zeta, algo) {
        (Some(z), _) => z,
        (None, Algo::Brpi) => 1.0,
        (None, Algo::Tabular) => constants(&game, run.rho, None)?.zeta_bar / 2.0,
        (None, Algo::Linear) => {
            let lc = constants(&game, run.rho, setup.as_ref())?.linear.expect("linear constants requested");
            lc.zeta_bar_theta.ok_or_else(|| config("every projected Q-function is flat; pass --zeta"))? / 2.0
        }
    };
    let linear_bases: Option<Vec<Arc<FeatureBasis>>> = setup.as_ref().map(|s| s.bases.iter().cloned().map(Arc::new).collect());
    let table_graph = match algo {
        Algo::Brpi => Some(BestReplyGraph::build(&game, GraphMode::Tabular, None, DEFAULT_NODE_BUDGET)?),
        _ => None,
    };
    let learner = match algo {
        Algo::Tabular => Learner::Tabular,
        Algo::Linear => Learner::Linear {
            bases: linear_bases.as_deref().expect("linear bases"),
            balls: &setup.as_ref().expect("linear setup").balls,
        },
        Algo::Brpi => Learner::Brpi { table: table_graph.as_ref().expect("table").table() },
    };

    let mut results: Vec<ExperimentResult> = Vec::with_capacity(cells.len());
    for &(k, t) in &cells {
        let cfg = ExperimentConfig { k: k as usize, t, zeta, ..probe.clone() };
        let r = run_experiment(&game, &cfg, learner, &eq)?;
        writeln!(
            stderr,
            "{} K={} T={} trials={} mean={} min={} max={} final={}",
            algo.label(),
            k,
            t,
            r.trials.len(),
            r.mean_fraction(),
            r.min_fraction(),
            r.max_fraction(),
            r.final_rate()
        )
        .map_err(|e| HarnessError::io("stderr", e))?;
        results.push(r);
    }

    let mut buf = Vec::new();
    write_summary(&mut buf, &results).expect("writing to memory");
    match &run.out {
        Some(path) => fs::write(path, &buf).map_err(|e| HarnessError::io(path, e))?,
        None => stdout.write_all(&buf).map_err(|e| HarnessError::io("stdout", e))?,
    }
    if let Some(path) = &run.long {
        let mut buf = Vec::new();
        write_long(&mut buf, &results[0]).expect("writing to memory");
        fs::write(path, &buf).map_err(|e| HarnessError::io(path, e))?;
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_cli(std::iter::once("decq").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_and_config_errors_exit_2() {
        assert_eq!(run(&["learn-tabular", "--K", "0"]).0, 2);
        assert_eq!(run(&["learn-tabular", "--K", "5", "--bogus"]).0, 2);
        assert_eq!(run(&["learn-tabular", "--K", "5", "--step-size", "fast"]).0, 2);
        assert_eq!(run(&["learn-tabular", "--K", "5", "--game", "builtin:nothing"]).0, 2);
        assert_eq!(run(&["sweep", "--algo", "tabular", "--K", "5:10", "--long", "x.csv"]).0, 2);
        let (code, _, err) = run(&["learn-tabular", "--K", "5", "--eq-cache", "/nonexistent/eq.txt"]);
        assert_eq!(code, 2);
        assert!(err.contains("decq equilibria"), "{err}");
        assert_eq!(run(&["--help"]).0, 0);
    }

    #[test]
    fn missing_game_file_is_a_runtime_error() {
        assert_eq!(run(&["validate", "--game", "/nonexistent/game.txt"]).0, 1);
    }

    #[test]
    fn parsers() {
        assert_eq!(parse_basis("3,18").unwrap(), (3, 18));
        assert!(parse_basis("3").is_err());
        assert_eq!(parse_step("const:0.5").unwrap(), StepSize::Constant(0.5));
        assert_eq!(parse_step("invsqrt").unwrap(), StepSize::InvSqrt);
        assert!(parse_step("const:x").is_err());
    }
}
