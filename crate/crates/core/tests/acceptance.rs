//! Acceptance checks, one line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so that every criterion reports even when an
//! earlier one fails. Set `ACCEPTANCE_ONLY=4,7` to run a subset.

mod common;

use common::{matrix_game, random_game};
use decq::bounds::{delta_tilde_map, prop2_bounds, solve_delta_tilde, t_k_tabular, Prop2Inputs};
use decq::brpi::{brpi_step, brpi_step_bound, p_hat, BrpiState};
use decq::features::{polynomial_basis, FeatureBasis};
use decq::game::reachability;
use decq::graph::{BestReplyGraph, GraphMode, DEFAULT_NODE_BUDGET};
use decq::harness::{run_experiment, spearman, EquilibriumSet, ExperimentConfig, ExperimentResult, Learner};
use decq::learner::{run, run_linear, AgentParams, PhaseConfig, Restart, StepSize};
use decq::oracle::{
    game_constants, mixing_time, optimal_q, stationary_distribution, ConstantsConfig, LinearSetup, OpponentPolicy,
    ThetaBall,
};
use decq::{build_gridworld, BehaviorPolicy, PolicySpace, StochasticGame};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

type Outcome = Result<String, String>;
type Criterion<'a> = (usize, &'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn tabular_graph(game: &StochasticGame) -> BestReplyGraph {
    BestReplyGraph::build(game, GraphMode::Tabular, None, DEFAULT_NODE_BUDGET).unwrap()
}

// 1. Policy-space size of the grid world.
fn policy_counts() -> Outcome {
    let space = PolicySpace::new(&build_gridworld());
    let counts = [space.agent_count(0), space.agent_count(1)];
    check(counts == [1728, 1728], format!("|Pi^1| = {}, |Pi^2| = {}", counts[0], counts[1]))
}

// 2. Down-right is an equilibrium; 16 optimal equilibria up to actions at the absorbing corner.
fn gridworld_equilibria(g: &BestReplyGraph) -> Outcome {
    let game = build_gridworld();
    let pick = |i: usize, want: &str| -> Vec<usize> {
        (0..game.num_states())
            .map(|s| {
                let names: Vec<&str> = (0..game.num_actions(i, s)).map(|p| game.action_name(i, s, p)).collect();
                names.iter().position(|&n| n == want).unwrap_or_else(|| names.iter().position(|&n| n == "stay").unwrap())
            })
            .collect()
    };
    let down_right = decq::DeterministicJointPolicy::new(&game, vec![pick(0, "down"), pick(1, "right")]).unwrap();
    let u = g.space().encode(&down_right);
    let optimal = g.optimal_equilibria();
    let modulo = g.count_modulo_inert(&optimal);
    check(
        g.is_equilibrium(u) && modulo == 16,
        format!(
            "down-right equilibrium: {}, equilibria: {}, optimal: {} ({} modulo the absorbing corner)",
            g.is_equilibrium(u),
            g.equilibria().len(),
            optimal.len(),
            modulo
        ),
    )
}

// 3. Weak acyclicity of the grid-world best-reply graph.
fn gridworld_acyclic(g: &BestReplyGraph) -> Outcome {
    let a = g.certify_weak_acyclicity();
    check(a.weakly_acyclic, format!("weakly acyclic: {}, L = {:?}", a.weakly_acyclic, a.l))
}

/// Trial-level Spearman trend of equilibrium fractions against the swept parameter, and
/// whether the cell means never decrease.
fn trend(cells: &[(f64, ExperimentResult)]) -> (f64, f64, bool) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (v, r) in cells {
        for t in &r.trials {
            x.push(*v);
            y.push(t.fraction());
        }
    }
    let s = spearman(&x, &y);
    let means: Vec<f64> = cells.iter().map(|(_, r)| r.mean_fraction()).collect();
    (s.rho, s.p_increasing, means.windows(2).all(|w| w[1] >= w[0]))
}

fn describe(cells: &[(f64, ExperimentResult)], name: &str) -> String {
    cells
        .iter()
        .map(|(v, r)| format!("{name}={v}: mean {:.3} min {:.3}", r.mean_fraction(), r.min_fraction()))
        .collect::<Vec<_>>()
        .join("; ")
}

fn sweep(
    game: &StochasticGame,
    base: &ExperimentConfig,
    learner: Learner<'_>,
    eq: &EquilibriumSet,
    cells: &[(usize, u64)],
) -> Vec<ExperimentResult> {
    cells
        .iter()
        .map(|&(k, t)| run_experiment(game, &ExperimentConfig { k, t, ..*base }, learner, eq).unwrap())
        .collect()
}

/// Shared check for the tabular and linear sweeps. The minimum fraction must be positive
/// wherever `min_positive` says so; with `trend_required`, both sweeps must also show a
/// positive trial-level Spearman trend (p < 0.05) and nondecreasing cell means. Cells
/// rejected by `in_trend` only feed the minimum check.
fn sweep_verdict(
    by_k: Vec<(f64, ExperimentResult)>,
    by_t: Vec<(f64, ExperimentResult)>,
    min_positive: impl Fn(usize, u64) -> bool,
    in_trend: impl Fn(usize) -> bool,
    trend_required: bool,
) -> Outcome {
    let trend_k: Vec<(f64, ExperimentResult)> = by_k.iter().filter(|(_, r)| in_trend(r.k)).cloned().collect();
    let (rk, pk, mk) = trend(&trend_k);
    let (rt, pt, mt) = trend(&by_t);
    let min_ok = by_k.iter().chain(&by_t).all(|(_, r)| !min_positive(r.k, r.t) || r.min_fraction() > 0.0);
    let trend_ok = rk > 0.0 && pk < 0.05 && mk && rt > 0.0 && pt < 0.05 && mt;
    check(
        min_ok && (trend_ok || !trend_required),
        format!(
            "K sweep [{}] spearman {rk:.3} (p {pk:.2e}) means nondecreasing {mk}; T sweep [{}] spearman {rt:.3} (p {pt:.2e}) means nondecreasing {mt}; minima positive where required {min_ok}",
            describe(&by_k, "K"),
            describe(&by_t, "T")
        ),
    )
}

fn base_config(zeta: f64) -> ExperimentConfig {
    ExperimentConfig {
        k: 1,
        t: 1,
        trials: 50,
        master_seed: 0,
        rho: 0.4,
        lambda: 0.3,
        zeta,
        step: StepSize::InvSqrt,
        restart: Restart::OnAbsorbing,
    }
}

// 4. Tabular learner on the grid world.
fn tabular_sweep(g: &BestReplyGraph) -> Outcome {
    let game = build_gridworld();
    let zeta = game_constants(&game, &ConstantsConfig::new(vec![0.4; 2]), None).unwrap().zeta_bar / 2.0;
    let eq = EquilibriumSet::from_graph(&game, g);
    let base = base_config(zeta);
    let ks = [10usize, 20, 50, 200, 1000];
    let ts = [10u64, 100, 500, 2000];
    let cells_k: Vec<(usize, u64)> = ks.iter().map(|&k| (k, 200)).collect();
    let cells_t: Vec<(usize, u64)> = ts.iter().map(|&t| (200, t)).collect();
    let by_k = sweep(&game, &base, Learner::Tabular, &eq, &cells_k).into_iter().map(|r| (r.k as f64, r)).collect();
    let by_t = sweep(&game, &base, Learner::Tabular, &eq, &cells_t).into_iter().map(|r| (r.t as f64, r)).collect();
    sweep_verdict(by_k, by_t, |k, _| k >= 20, |k| k != 20, true)
}

// 5. Linear learner with the cubic 18-feature basis on the grid world.
fn linear_sweep() -> Outcome {
    let game = build_gridworld();
    let bases: Vec<FeatureBasis> = (0..2).map(|i| polynomial_basis(&game, i, 3, 18).unwrap()).collect();
    let setup = LinearSetup::with_value_balls(&game, bases);
    let graph = BestReplyGraph::build(&game, GraphMode::Linear, Some(&setup), DEFAULT_NODE_BUDGET).unwrap();
    let zeta_theta = game_constants(&game, &ConstantsConfig::new(vec![0.4; 2]), Some(&setup))
        .unwrap()
        .linear
        .and_then(|l| l.zeta_bar_theta)
        .ok_or("every projected Q-function is flat")?;
    let eq = EquilibriumSet::new(&game, "linear", graph.equilibria().to_vec());
    let arcs: Vec<Arc<FeatureBasis>> = setup.bases.iter().cloned().map(Arc::new).collect();
    let learner = Learner::Linear { bases: &arcs, balls: &setup.balls };
    let base = base_config(zeta_theta / 2.0);
    let ks = [10usize, 50, 100, 500, 1000];
    let ts = [10u64, 100, 200, 1000, 2000];
    let cells_k: Vec<(usize, u64)> = ks.iter().map(|&k| (k, 1000)).collect();
    let cells_t: Vec<(usize, u64)> = ts.iter().map(|&t| (500, t)).collect();
    let by_k: Vec<_> = sweep(&game, &base, learner, &eq, &cells_k).into_iter().map(|r| (r.k as f64, r)).collect();
    let by_t: Vec<_> = sweep(&game, &base, learner, &eq, &cells_t).into_iter().map(|r| (r.t as f64, r)).collect();
    let verdict = sweep_verdict(by_k, by_t, |k, t| k >= 100 && t >= 200, |_| true, false);
    let prefix = format!("{} linear equilibria; ", eq.len());
    verdict.map(|d| prefix.clone() + &d).map_err(|d| prefix + &d)
}

/// Random game whose every state is reachable from every other.
fn reachable_game(rng: &mut ChaCha8Rng, states: usize, actions: usize, sparse: bool, gammas: (f64, f64)) -> StochasticGame {
    loop {
        let g = random_game(rng, 2, states, actions, sparse, gammas);
        if reachability(&g, 2 * states).is_some() {
            return g;
        }
    }
}

// 6. One long phase with frozen baselines: every agent's Q-table approaches the optimal
// Q-function against the others' exploring behavior policy.
fn frozen_opponents() -> Outcome {
    const GAMES: usize = 6;
    const T: u64 = 100_000;
    const ETA: f64 = 0.002;
    const RHO: f64 = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut errors = Vec::new();
    for g in 0..GAMES {
        let game = reachable_game(&mut rng, 4, 3, g % 2 == 1, (0.3, 0.7));
        let params = vec![AgentParams { rho: RHO, lambda: 0.5, zeta: 0.01, gamma: 0.0, step: StepSize::Constant(ETA) }; 2];
        let seed = 100 + g as u64;
        let (traj, agents) = run(&game, &params, None, &PhaseConfig::uniform(T, 1), seed, Restart::Never).unwrap();
        let behavior = BehaviorPolicy::new(traj.baselines[0].clone(), vec![RHO; 2]);
        for (i, agent) in agents.iter().enumerate() {
            let target = optimal_q(&game, i, &OpponentPolicy::Behavior(behavior.clone()), 1e-12).unwrap();
            let err = agent.model.q.sup_distance(&target);
            worst = worst.max(err);
            errors.push(format!("{err:.3}"));
        }
    }
    check(
        worst <= 0.05,
        format!("{GAMES} games, T = {T}, eta = {ETA}: sup errors [{}], worst {worst:.4} (tolerance 0.05)", errors.join(", ")),
    )
}

/// Weakly acyclic fixtures for the best reply process.
fn brpi_fixtures() -> Vec<(&'static str, StochasticGame)> {
    let mut out = vec![
        ("2x2 coordination", matrix_game(&[2, 2], 0.5, |a| {
            let u = if a[0] != a[1] { 0.0 } else if a[0] == 0 { 1.0 } else { 0.5 };
            vec![u, u]
        })),
        ("3-action coordination", matrix_game(&[3, 3], 0.5, |a| {
            let u = if a[0] == a[1] { [1.0, 0.7, 0.4][a[0]] } else { 0.1 * (a[0] + 2 * a[1]) as f64 };
            vec![u, u]
        })),
    ];
    // A two-state team game: identical rewards make it a potential game, hence weakly acyclic.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let team = random_game(&mut rng, 2, 2, 2, false, (0.6, 0.6));
    let shared = {
        let t = team.clone();
        StochasticGame::from_fn(
            t.states().to_vec(),
            (0..2).map(|i| t.action_names(i).to_vec()).collect(),
            (0..2).map(|i| (0..2).map(|s| t.actions(i, s).to_vec()).collect()).collect(),
            t.discounts().to_vec(),
            |s, joint| {
                let ja = t.joint_index(s, joint).unwrap();
                let r = t.reward(0, s, ja);
                (t.row(s, ja).to_vec(), vec![r, r])
            },
        )
        .unwrap()
    };
    out.push(("two-state team game", shared));
    out
}

// 7. The best reply process reaches an equilibrium within the step bound.
fn brpi_absorption() -> Outcome {
    const RUNS: u64 = 1000;
    const DELTA: f64 = 0.1;
    const LAMBDA: f64 = 0.5;
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, game) in brpi_fixtures() {
        let g = tabular_graph(&game);
        let acyc = g.certify_weak_acyclicity();
        if !acyc.weakly_acyclic {
            return Err(format!("{name} is not weakly acyclic"));
        }
        let l = acyc.l.expect("weakly acyclic graphs have a finite L");
        let counts: Vec<f64> = (0..2).map(|i| g.space().agent_count(i) as f64).collect();
        let p = p_hat(&[LAMBDA; 2], &counts, l);
        let steps = brpi_step_bound(DELTA, p, l);
        let start = (0..g.num_nodes()).max_by_key(|&u| g.path_len(u)).unwrap();
        let init = BrpiState::new(g.space().decode(start), vec![LAMBDA; 2]);
        let hits = (0..RUNS)
            .filter(|&seed| {
                let mut state = init.clone();
                for _ in 0..steps {
                    state = brpi_step(&state, g.table(), seed).unwrap();
                }
                g.is_equilibrium(g.space().encode(&state.joint))
            })
            .count();
        let rate = hits as f64 / RUNS as f64;
        ok &= rate >= 1.0 - DELTA && l >= 1;
        lines.push(format!("{name}: L = {l}, k = {steps}, rate {rate:.3}"));
    }
    check(ok, lines.join("; "))
}

// 8. Stationary mass and mixing-time bounds on random games.
fn chain_bounds() -> Outcome {
    const GAMES: usize = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures = Vec::new();
    let mut max_ratio: f64 = 0.0;
    for g in 0..GAMES {
        let states = 1 + g % 4;
        let game = loop {
            let candidate = random_game(&mut rng, 2, states, 3, g % 2 == 0, (0.5, 0.9));
            if reachability(&candidate, 2 * states).is_some() {
                break candidate;
            }
        };
        let reach = reachability(&game, 2 * states).unwrap();
        let rhos: Vec<f64> = (0..2).map(|_| rand::Rng::gen_range(&mut rng, 0.1..0.9)).collect();
        let baseline = PolicySpace::new(&game).sample(&mut rng);
        let behavior = BehaviorPolicy::new(baseline, rhos.clone());
        let mu = stationary_distribution(&game, &behavior).unwrap().mu_min;
        let tmix = mixing_time(&game, &behavior, 0.25).unwrap() as f64;
        let inputs = Prop2Inputs {
            kappa: reach.kappa,
            horizon: reach.horizon,
            num_states: states,
            action_counts: (0..2).map(|i| game.max_actions(i)).collect(),
            rhos,
        };
        let b = prop2_bounds(&inputs).unwrap();
        let upper_t = inputs.t_mix_upper_tight(0.25);
        let tol = 1e-12;
        if !(b.mu_min_lower <= mu + tol && mu <= b.mu_min_upper + tol && tmix <= upper_t) {
            failures.push(format!(
                "game {g}: {} <= {mu} <= {}, t_mix {tmix} <= {upper_t}",
                b.mu_min_lower, b.mu_min_upper
            ));
        }
        max_ratio = max_ratio.max(tmix / upper_t);
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{GAMES} games; largest t_mix / bound = {max_ratio:.3}")
        } else {
            failures.join("; ")
        },
    )
}

// 9. Root solvers behind the schedules.
fn solvers() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for &delta in &[0.01, 0.05, 0.1, 0.2, 0.5, 0.9] {
        for &p in &[1e-6, 1e-3, 0.01, 0.1, 0.5, 0.9, 1.0] {
            let d = solve_delta_tilde(delta, p);
            let err = (delta_tilde_map(d, p) - (1.0 - delta)).abs();
            worst = worst.max(err);
            if !(err <= 1e-12 && d > 0.0 && d < delta) {
                bad.push(format!("delta {delta}, p {p}: delta~ {d}, residual {err:e}"));
            }
        }
    }
    let mut cases = 0;
    for &mu in &[1e-3, 0.05] {
        for &tmix in &[2.0, 20.0] {
            for &gbar in &[0.5, 0.8] {
                for &eps in &[0.01, 0.1] {
                    for &l in &[1usize, 3] {
                        let (dt, n, s, a) = (0.01, 2usize, 9usize, 5usize);
                        let t = t_k_tabular(mu, tmix, gbar, eps, dt, n, l, s, a, 1.0);
                        let g = 1.0 - gbar;
                        let c = (1.0 / (g.powi(5) * eps * eps) + tmix / g) * (1.0 / (g * g * eps)).ln() / mu;
                        let b = (n * l * s * a) as f64 / dt;
                        let holds = |t: f64| t >= c * (b * t).ln();
                        cases += 1;
                        if !(t.fract() == 0.0 && holds(t) && (t <= 1.0 || !holds(t - 1.0))) {
                            bad.push(format!("T_k = {t} for c = {c}, b = {b}"));
                        }
                    }
                }
            }
        }
    }
    check(
        bad.is_empty(),
        if bad.is_empty() {
            format!("42 (delta, p) pairs, worst residual {worst:.1e}; {cases} T_k cases minimal")
        } else {
            bad.join("; ")
        },
    )
}

// 10. Indicator features reproduce the tabular objects exactly.
fn indicator_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut details = Vec::new();
    for f in 0..3 {
        let game = reachable_game(&mut rng, 2, 3, f == 1, (0.5, 0.8));
        let bases: Vec<FeatureBasis> = (0..2).map(|i| FeatureBasis::indicator(&game, i)).collect();
        let setup = LinearSetup::with_default_balls(&game, bases);
        let tab = tabular_graph(&game);
        let lin = BestReplyGraph::build(&game, GraphMode::Linear, Some(&setup), DEFAULT_NODE_BUDGET).unwrap();
        let same_sets = (0..2).all(|i| {
            (0..g_opponents(&tab, i)).all(|opp| tab.table().set(i, opp) == lin.table().set(i, opp))
        });
        let (at, al) = (tab.certify_weak_acyclicity(), lin.certify_weak_acyclicity());
        if !(same_sets && tab.equilibria() == lin.equilibria() && at.l == al.l) {
            return Err(format!("fixture {f}: best-reply graphs differ"));
        }
        let params = vec![AgentParams { rho: 0.3, lambda: 0.4, zeta: 0.02, gamma: 0.0, step: StepSize::InvSqrt }; 2];
        let arcs: Vec<Arc<FeatureBasis>> = setup.bases.iter().cloned().map(Arc::new).collect();
        let balls: Vec<ThetaBall> = setup.balls.clone();
        let phases = PhaseConfig::uniform(300, 40);
        for seed in 0..5 {
            let (a, _) = run(&game, &params, None, &phases, seed, Restart::OnAbsorbing).unwrap();
            let (b, _) = run_linear(&game, &arcs, Some(&balls), &params, None, &phases, seed, Restart::OnAbsorbing).unwrap();
            if a != b {
                return Err(format!("fixture {f}, seed {seed}: learner trajectories differ"));
            }
        }
        details.push(format!("fixture {f}: {} equilibria, L = {:?}", tab.equilibria().len(), at.l));
    }
    Ok(details.join("; ") + "; 15 learner trajectories identical")
}

fn g_opponents(g: &BestReplyGraph, i: usize) -> usize {
    g.space().opponent_count(i) as usize
}

// 11. CLI output is byte-identical across runs and worker-thread counts.
fn cli_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_decq");
    let runs: [&[&str]; 3] = [
        &["learn-tabular", "--K", "20", "--T", "100", "--trials", "8", "--seed", "11"],
        &["learn-linear", "--K", "10", "--T", "100", "--trials", "4", "--seed", "11"],
        &["brpi", "--K", "30", "--trials", "8", "--seed", "11"],
    ];
    let mut sizes = Vec::new();
    for args in runs {
        let mut outputs = Vec::new();
        for threads in ["1", "4", "4"] {
            let out = Command::new(bin).arg("--threads").arg(threads).args(args).output().map_err(|e| e.to_string())?;
            if !out.status.success() {
                return Err(format!("{} failed: {}", args[0], String::from_utf8_lossy(&out.stderr)));
            }
            outputs.push(out.stdout);
        }
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            return Err(format!("{} output differs between runs", args[0]));
        }
        sizes.push(format!("{} {} bytes", args[0], outputs[0].len()));
    }
    Ok(format!("identical with 1 and 4 threads and on repeat: {}", sizes.join(", ")))
}

fn main() {
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |n: usize| only.as_ref().is_none_or(|o| o.contains(&n));
    let grid = (wanted(2) || wanted(3) || wanted(4)).then(|| tabular_graph(&build_gridworld()));
    let criteria: Vec<Criterion<'_>> = vec![
        (1, "policy counts", Box::new(policy_counts)),
        (2, "grid-world equilibria", Box::new(|| gridworld_equilibria(grid.as_ref().unwrap()))),
        (3, "weak acyclicity", Box::new(|| gridworld_acyclic(grid.as_ref().unwrap()))),
        (4, "tabular learner sweep", Box::new(|| tabular_sweep(grid.as_ref().unwrap()))),
        (5, "linear learner sweep", Box::new(linear_sweep)),
        (6, "frozen-opponent Q convergence", Box::new(frozen_opponents)),
        (7, "best reply process absorption", Box::new(brpi_absorption)),
        (8, "stationary mass and mixing bounds", Box::new(chain_bounds)),
        (9, "root solvers", Box::new(solvers)),
        (10, "indicator features match tabular", Box::new(indicator_consistency)),
        (11, "CLI determinism", Box::new(cli_determinism)),
    ];
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !wanted(n) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {n} ({name}): PASS [{secs:.1}s] {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL [{secs:.1}s] {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
