//! Closed-form sample-complexity schedules: exploration-phase lengths `T_k`, phase counts
//! `K`, step sizes, exploration rates, and the stationary-mass / mixing-time bounds they
//! are built from.
//!
//! The absolute constants `c0` and `c1` are not pinned down by the theory; they default
//! to 1 and every schedule produced here is only meaningful up to them.

use crate::brpi::p_hat;
use serde::Serialize;
use thiserror::Error;

/// Fixed-point iterations allowed for self-referential inequalities.
pub const MAX_FIXED_POINT_ITERS: usize = 1_000_000;
/// Target accuracy of the `δ̃` root solve.
pub const DELTA_TILDE_TOL: f64 = 1e-12;
/// Beyond 2^53 consecutive integers collide in `f64`.
const EXACT_INTEGER_LIMIT: f64 = 9_007_199_254_740_992.0;
/// Grid points used by the `ε̂` diagnostic.
pub const EPS_HAT_GRID: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("minimum Bellman error too large: b = {b} must be below (1-γ̄)ζ̄_θ/8 = {limit}")]
    BellmanErrorTooLarge { b: f64, limit: f64 },
    #[error("the prescribed accuracy ε = {0} is not positive")]
    NonPositiveEpsilon(f64),
}

fn invalid(msg: impl Into<String>) -> BoundsError {
    BoundsError::Invalid(msg.into())
}

/// Which gap the accuracy `ε` is carved out of.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting {
    Tabular { zeta_bar: f64 },
    Linear { zeta_bar_theta: f64, b: f64 },
}

/// `ε = min{ζ̄/16, 1/(2(1−γ̲))}`, or `min{ζ̄_θ/16 − b/(1−γ̄), 1/(2(1−γ̲))}` with features.
pub fn epsilon_choice(setting: Setting, gamma_max: f64, gamma_min: f64) -> Result<f64, BoundsError> {
    let cap = 1.0 / (2.0 * (1.0 - gamma_min));
    let eps = match setting {
        Setting::Tabular { zeta_bar } => {
            if !(zeta_bar > 0.0) {
                return Err(invalid("zeta_bar must be positive"));
            }
            (zeta_bar / 16.0).min(cap)
        }
        Setting::Linear { zeta_bar_theta, b } => {
            let limit = (1.0 - gamma_max) * zeta_bar_theta / 8.0;
            if !(b < limit) {
                return Err(BoundsError::BellmanErrorTooLarge { b, limit });
            }
            (zeta_bar_theta / 16.0 - b / (1.0 - gamma_max)).min(cap)
        }
    };
    if eps > 0.0 {
        Ok(eps)
    } else {
        Err(BoundsError::NonPositiveEpsilon(eps))
    }
}

/// Whether `ε` lies in the range `0 < ε < min{ζ̄/8, 1/(1−γ_min)}` used by the per-phase
/// approximation lemmas.
pub fn lemma_range_ok(eps: f64, zeta_bar: f64, gamma_min: f64) -> bool {
    eps > 0.0 && eps < (zeta_bar / 8.0).min(1.0 / (1.0 - gamma_min))
}

/// `f(δ̃) = ((1−δ̃)p/(δ̃+(1−δ̃)p) − δ̃)(1−δ̃)`, decreasing from `f(0) = 1`.
pub fn delta_tilde_map(delta_tilde: f64, p: f64) -> f64 {
    let d = delta_tilde;
    ((1.0 - d) * p / (d + (1.0 - d) * p) - d) * (1.0 - d)
}

/// The `δ̃ ∈ (0, δ)` with `f(δ̃) = 1 − δ`, by bisection.
pub fn solve_delta_tilde(delta: f64, p: f64) -> f64 {
    assert!(delta > 0.0 && delta < 1.0, "delta must lie in (0,1)");
    assert!(p > 0.0 && p <= 1.0, "p must lie in (0,1]");
    let target = 1.0 - delta;
    let (mut lo, mut hi) = (0.0f64, delta);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = delta_tilde_map(mid, p);
        if (f - target).abs() <= DELTA_TILDE_TOL {
            return mid;
        }
        if f > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // `f` is flat to within rounding here; the midpoint is as good as the arithmetic allows.
    let mid = 0.5 * (lo + hi);
    if mid > 0.0 {
        mid
    } else {
        hi
    }
}

/// `[(1−δ̃)²p − δ̃²]L / ([δ̃+(1−δ̃)p]²δ̃)`.
pub fn k_formula(delta_tilde: f64, p: f64, l: usize) -> f64 {
    let d = delta_tilde;
    ((1.0 - d).powi(2) * p - d * d) * l as f64 / ((d + (1.0 - d) * p).powi(2) * d)
}

/// Smallest admissible integer phase count: `max(⌈formula⌉, L)`.
pub fn k_required(delta_tilde: f64, p: f64, l: usize) -> u64 {
    let raw = k_formula(delta_tilde, p, l).max(0.0).ceil();
    let k = if raw >= u64::MAX as f64 { u64::MAX } else { raw as u64 };
    k.max(l as u64)
}

/// Smallest integer `T ≥ 1` such that every integer `t ≥ T` satisfies `t ≥ c·log(b·t)`.
///
/// `h(t) = t − c·log(bt)` is convex with its minimum at `t = c`, so the admissible set is
/// everything above the larger root, which the iteration `t ← c·log(bt)` approaches
/// monotonically from `max(2, c)`.
pub fn solve_t_log(c: f64, b: f64) -> f64 {
    assert!(c >= 0.0 && b > 0.0, "need c ≥ 0 and b > 0");
    let h = |t: f64| t - c * (b * t).ln();
    let start = c.max(1.0);
    if h(start) >= 0.0 {
        return 1.0;
    }
    let mut t = c.max(2.0);
    for _ in 0..MAX_FIXED_POINT_ITERS {
        let next = c * (b * t).ln();
        if (next - t).abs() <= 1e-9 * t {
            t = next;
            break;
        }
        t = next;
    }
    let mut n = t.ceil();
    if n < EXACT_INTEGER_LIMIT {
        while h(n) < 0.0 {
            n += 1.0;
        }
        while n - 1.0 >= start && h(n - 1.0) >= 0.0 {
            n -= 1.0;
        }
    } else {
        // Integers are no longer exactly representable; settle for the smallest float found.
        while h(n) < 0.0 {
            n *= 1.0 + f64::EPSILON;
        }
    }
    n
}

/// Inputs to the stationary-mass and mixing-time bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prop2Inputs {
    /// Reachability probability `κ` at horizon `H`.
    pub kappa: f64,
    pub horizon: usize,
    pub num_states: usize,
    /// `|A^i|` per agent.
    pub action_counts: Vec<usize>,
    pub rhos: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prop2Bounds {
    /// `q = ∏_i ρ^i/|A^i|`.
    pub q: f64,
    pub mu_min_lower: f64,
    pub mu_min_upper: f64,
    /// Same bounds with a common `ρ` and `A = max_i |A^i|`.
    pub mu_min_lower_uniform: f64,
    pub mu_min_upper_uniform: f64,
    /// Coupling constant of the `(H+1)`-step chain.
    pub doeblin_c: f64,
}

impl Prop2Inputs {
    fn check(&self) -> Result<(), BoundsError> {
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(invalid("kappa must lie in (0,1]"));
        }
        if self.rhos.len() != self.action_counts.len() || self.rhos.is_empty() {
            return Err(invalid("one rho and one action count per agent"));
        }
        if self.rhos.iter().any(|&r| !(r > 0.0 && r <= 1.0)) || self.action_counts.contains(&0) {
            return Err(invalid("rho must lie in (0,1] and action counts must be positive"));
        }
        if self.num_states == 0 {
            return Err(invalid("no states"));
        }
        Ok(())
    }

    fn n(&self) -> usize {
        self.rhos.len()
    }

    fn a_max(&self) -> f64 {
        *self.action_counts.iter().max().unwrap() as f64
    }

    fn rho_min(&self) -> f64 {
        self.rhos.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `κ q^H`, the per-block probability of hitting any fixed state.
    fn block(&self) -> f64 {
        let q: f64 = self.rhos.iter().zip(&self.action_counts).map(|(r, &a)| r / a as f64).product();
        self.kappa * q.powi(self.horizon as i32)
    }

    /// `(H+1)((−log α) A^{NH}/(κρ^{NH}) + 1)` with the smallest `ρ^i`.
    pub fn t_mix_upper(&self, alpha: f64) -> f64 {
        let nh = (self.n() * self.horizon) as i32;
        let ratio = (self.a_max() / self.rho_min()).powi(nh) / self.kappa;
        (self.horizon as f64 + 1.0) * (-alpha.ln() * ratio + 1.0)
    }

    /// `(H+1)(−log α / log[(1−(|S|−1)κq^H)/(1−|S|κq^H)] + 1)`; equals `H+1` once a single
    /// block couples every pair of chains.
    pub fn t_mix_upper_tight(&self, alpha: f64) -> f64 {
        let c = self.block();
        let s = self.num_states as f64;
        let h1 = self.horizon as f64 + 1.0;
        let den = 1.0 - s * c;
        if den <= 0.0 {
            return h1;
        }
        let rate = ((1.0 - (s - 1.0) * c) / den).ln();
        h1 * (-alpha.ln() / rate + 1.0)
    }
}

pub fn prop2_bounds(inputs: &Prop2Inputs) -> Result<Prop2Bounds, BoundsError> {
    inputs.check()?;
    let h = inputs.horizon as i32;
    let q: f64 = inputs.rhos.iter().zip(&inputs.action_counts).map(|(r, &a)| r / a as f64).product();
    let block = inputs.kappa * q.powi(h);
    let s = inputs.num_states as f64;
    let own = |i: usize| inputs.rhos[i] / inputs.action_counts[i] as f64;
    let n = inputs.n();
    let mu_min_lower = (0..n).map(|i| block * own(i)).fold(f64::INFINITY, f64::min);
    // An agent with a single action plays it with probability one.
    let own_upper = |i: usize| if inputs.action_counts[i] == 1 { 1.0 } else { own(i) };
    let mu_min_upper = (0..n).map(|i| (1.0 - (s - 1.0) * block) * own_upper(i)).fold(f64::INFINITY, f64::min);
    let ra = inputs.rho_min() / inputs.a_max();
    let nh = (n as i32) * h;
    Ok(Prop2Bounds {
        q,
        mu_min_lower,
        mu_min_upper,
        mu_min_lower_uniform: inputs.kappa * ra.powi(nh + 1),
        mu_min_upper_uniform: (1.0 - (s - 1.0) * inputs.kappa * ra.powi(nh)) * ra,
        doeblin_c: block / (1.0 - (s - 1.0) * block),
    })
}

/// Exploration rate prescribed by a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum RhoChoice {
    Value(f64),
    /// The exponent `1/(N−1)` is undefined for one agent; opponents do not exist.
    NotApplicableSingleAgent,
    /// The perturbation constant is small enough that any `ρ ∈ (0,1)` qualifies.
    Unconstrained,
}

impl RhoChoice {
    pub fn value(&self) -> Option<f64> {
        match *self {
            RhoChoice::Value(r) => Some(r),
            _ => None,
        }
    }
}

/// `1 − (1 − margin/Γ)^{1/(N−1)}`.
pub fn rho_from_margin(margin: f64, gamma_cap: f64, n: usize) -> Result<RhoChoice, BoundsError> {
    if n == 1 {
        return Ok(RhoChoice::NotApplicableSingleAgent);
    }
    if !(margin > 0.0) {
        return Err(invalid(format!("exploration margin {margin} is not positive")));
    }
    if gamma_cap <= margin {
        return Ok(RhoChoice::Unconstrained);
    }
    let inner = 1.0 - margin / gamma_cap;
    Ok(RhoChoice::Value(1.0 - inner.powf(1.0 / (n as f64 - 1.0))))
}

/// Game and algorithm quantities the schedules consume.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundInputs {
    pub kappa: f64,
    pub horizon: usize,
    pub num_states: usize,
    /// `|A^i|` per agent (largest per-state action set).
    pub action_counts: Vec<usize>,
    pub gammas: Vec<f64>,
    pub zeta_bar: f64,
    pub gamma_cap: f64,
    pub l: usize,
    pub policy_counts: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub delta: f64,
    /// Fallback exploration rate when the schedule leaves `ρ` open.
    pub rho: f64,
    pub c0: f64,
    pub c1: f64,
    pub linear: Option<LinearInputs>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearInputs {
    pub zeta_bar_theta: f64,
    pub gamma_cap_tilde: f64,
    pub b: f64,
    pub l_tilde: usize,
    /// Per-agent curvature constants `ξ^i`.
    pub xi: Vec<f64>,
    /// Per-agent parameter-set diameters `D^i`.
    pub diameters: Vec<f64>,
    pub r_max: Vec<f64>,
}

impl BoundInputs {
    fn n(&self) -> usize {
        self.gammas.len()
    }

    fn gamma_max(&self) -> f64 {
        self.gammas.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    fn gamma_min(&self) -> f64 {
        self.gammas.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    fn a_max(&self) -> usize {
        *self.action_counts.iter().max().unwrap()
    }

    fn check(&self) -> Result<(), BoundsError> {
        let n = self.n();
        if n == 0 || [self.action_counts.len(), self.policy_counts.len(), self.lambdas.len()].iter().any(|&m| m != n) {
            return Err(invalid("per-agent vectors must all have one entry per agent"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta must lie in (0,1)"));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(invalid("rho must lie in (0,1)"));
        }
        if self.gammas.iter().any(|&g| !(g > 0.0 && g < 1.0)) {
            return Err(invalid("discount factors must lie in (0,1)"));
        }
        if self.lambdas.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
            return Err(invalid("lambda must lie in (0,1)"));
        }
        if !(self.c0 > 0.0 && self.c1 > 0.0) {
            return Err(invalid("c0 and c1 must be positive"));
        }
        Ok(())
    }

    fn prop2(&self, rho: f64) -> Prop2Inputs {
        Prop2Inputs {
            kappa: self.kappa,
            horizon: self.horizon,
            num_states: self.num_states,
            action_counts: self.action_counts.clone(),
            rhos: vec![rho; self.n()],
        }
    }

    fn linear(&self) -> Result<&LinearInputs, BoundsError> {
        let lin = self.linear.as_ref().ok_or_else(|| invalid("linear constants are required"))?;
        let n = self.n();
        if lin.xi.len() != n || lin.diameters.len() != n || lin.r_max.len() != n {
            return Err(invalid("linear per-agent vectors must have one entry per agent"));
        }
        if lin.xi.iter().any(|&x| !(x > 0.0)) {
            return Err(invalid("xi must be positive"));
        }
        Ok(lin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleBundle {
    pub theorem: u8,
    pub epsilon: f64,
    /// `ε` satisfies the per-phase lemmas' range.
    pub epsilon_in_lemma_range: bool,
    /// The `ε` minimizing the phase-length objective, when `ρ` depends on `ε`.
    pub epsilon_hat: Option<f64>,
    /// Success probability per `L`-block transition (`p̂`, or `p̃` with features).
    pub p: f64,
    pub delta_tilde: f64,
    pub rho: RhoChoice,
    /// `ρ` used in the stationary-mass and mixing bounds.
    pub rho_used: f64,
    pub zeta: f64,
    pub eta: Vec<f64>,
    /// Integer-valued; kept in floating point because the bounds routinely exceed `u64`.
    pub t_k: f64,
    /// Phase length with the bounds of [`prop2_bounds`] and `ε̂` substituted.
    pub t_k_corollary: Option<f64>,
    pub k: u64,
    pub k_formula: f64,
    pub mu_min_bounds: (f64, f64),
    /// Upper bound on `t_mix(1/4)`.
    pub t_mix_quarter: f64,
    pub doeblin_c: f64,
    pub c0: f64,
    pub c1: f64,
    pub note: String,
}

fn constants_note(c0: f64, c1: f64) -> String {
    format!("up to the unspecified absolute constants (c0 = {c0}, c1 = {c1})")
}

/// Tabular phase-length bound with explicit `μ_min`, `t_mix(1/4)`.
#[allow(clippy::too_many_arguments)]
pub fn t_k_tabular(
    mu_min: f64,
    t_mix_quarter: f64,
    gamma_bar: f64,
    eps: f64,
    delta_tilde: f64,
    n: usize,
    l: usize,
    num_states: usize,
    a: usize,
    c0: f64,
) -> f64 {
    let g = 1.0 - gamma_bar;
    let c = c0 / mu_min * (1.0 / (g.powi(5) * eps * eps) + t_mix_quarter / g) * (1.0 / (g * g * eps)).ln();
    let b = (n * l.max(1) * num_states * a) as f64 / delta_tilde;
    solve_t_log(c.max(0.0), b)
}

/// Grid search of `(1/μ)(1/((1−γ̄)⁴ε²) + t_mix(1/4))` over `ε ∈ (0, min{ζ̄/8, 1/(1−γ_min)})`,
/// with `μ` and `t_mix` replaced by their bounds at `ρ(ε)`.
pub fn epsilon_hat(inputs: &BoundInputs, grid: usize) -> Option<f64> {
    let n = inputs.n();
    let gbar = inputs.gamma_max();
    let hi = (inputs.zeta_bar / 8.0).min(1.0 / (1.0 - inputs.gamma_min()));
    let objective = |eps: f64| -> Option<f64> {
        let margin = (inputs.zeta_bar / 8.0 - eps) * (1.0 - gbar);
        let rho = rho_from_margin(margin, inputs.gamma_cap, n).ok()?.value()?;
        let p2 = inputs.prop2(rho);
        let mu = prop2_bounds(&p2).ok()?.mu_min_lower_uniform;
        let v = (1.0 / ((1.0 - gbar).powi(4) * eps * eps) + p2.t_mix_upper_tight(0.25)) / mu;
        v.is_finite().then_some(v)
    };
    (1..=grid)
        .map(|j| hi * j as f64 / (grid + 1) as f64)
        .filter_map(|eps| objective(eps).map(|v| (eps, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(eps, _)| eps)
}

/// Tabular decentralized Q-learning.
pub fn theorem1_schedule(inputs: &BoundInputs) -> Result<ScheduleBundle, BoundsError> {
    inputs.check()?;
    let n = inputs.n();
    let gbar = inputs.gamma_max();
    let eps = epsilon_choice(Setting::Tabular { zeta_bar: inputs.zeta_bar }, gbar, inputs.gamma_min())?;
    let rho = rho_from_margin((inputs.zeta_bar / 8.0 - eps) * (1.0 - gbar), inputs.gamma_cap, n)?;
    let rho_used = rho.value().unwrap_or(inputs.rho);
    let p = p_hat(&inputs.lambdas, &inputs.policy_counts, inputs.l);
    let delta_tilde = solve_delta_tilde(inputs.delta, p);
    let p2 = inputs.prop2(rho_used);
    let b2 = prop2_bounds(&p2)?;
    let mu = b2.mu_min_lower_uniform;
    let t_mix = p2.t_mix_upper(0.25);
    let a = inputs.a_max();
    let t_k = t_k_tabular(mu, t_mix, gbar, eps, delta_tilde, n, inputs.l, inputs.num_states, a, inputs.c0);
    let eta = inputs
        .action_counts
        .iter()
        .map(|&ai| {
            let log = ((n * inputs.l.max(1) * inputs.num_states * ai) as f64 * t_k / delta_tilde).ln();
            inputs.c1 / log * ((1.0 - gbar).powi(4) * eps * eps / (gbar * gbar)).min(1.0 / t_mix)
        })
        .collect();
    let eps_hat = rho.value().and_then(|_| epsilon_hat(inputs, EPS_HAT_GRID));
    let t_k_corollary = {
        let e_log = eps_hat.unwrap_or(eps);
        let g = 1.0 - gbar;
        let c = inputs.c0 / mu
            * (1.0 / (g.powi(5) * eps * eps) + t_mix / g)
            * (1.0 / (g * g * e_log)).ln();
        let b = (n * inputs.l.max(1) * inputs.num_states * a) as f64 / delta_tilde;
        Some(solve_t_log(c.max(0.0), b))
    };
    Ok(ScheduleBundle {
        theorem: 1,
        epsilon: eps,
        epsilon_in_lemma_range: lemma_range_ok(eps, inputs.zeta_bar, inputs.gamma_min()),
        epsilon_hat: eps_hat,
        p,
        delta_tilde,
        rho,
        rho_used,
        zeta: inputs.zeta_bar / 2.0,
        eta,
        t_k,
        t_k_corollary,
        k: k_required(delta_tilde, p, inputs.l),
        k_formula: k_formula(delta_tilde, p, inputs.l),
        mu_min_bounds: (mu, b2.mu_min_upper_uniform),
        t_mix_quarter: t_mix,
        doeblin_c: b2.doeblin_c,
        c0: inputs.c0,
        c1: inputs.c1,
        note: constants_note(inputs.c0, inputs.c1),
    })
}

/// Largest `η ≤ c / t_mix(η)`: iterate `η ← c / t_mix(η)` downward from `η = c`.
///
/// `t_mix` is nonincreasing, so the iterates decrease monotonically to the fixed point; a
/// final relative shave keeps the returned value on the admissible side.
pub fn solve_eta(c: f64, t_mix: impl Fn(f64) -> f64) -> f64 {
    let mut eta = c.min(0.5);
    for _ in 0..MAX_FIXED_POINT_ITERS {
        let next = (c / t_mix(eta)).min(eta);
        if eta - next <= 1e-15 * eta {
            eta = next;
            break;
        }
        eta = next;
    }
    let mut shave = 1e-12;
    while eta * t_mix(eta) > c {
        eta *= 1.0 - shave;
        shave = (shave * 2.0).min(0.5);
    }
    eta
}

struct LinearSchedule {
    eta: Vec<f64>,
    t_k: f64,
}

/// Step sizes and phase length shared by the two linear-approximation theorems.
fn linear_schedule(
    inputs: &BoundInputs,
    lin: &LinearInputs,
    eps: f64,
    delta_tilde: f64,
    path: usize,
    t_mix: &dyn Fn(f64) -> f64,
) -> LinearSchedule {
    let n = inputs.n() as f64;
    let path = path.max(1) as f64;
    let eta: Vec<f64> = (0..inputs.n())
        .map(|i| {
            let scale = 1.0 + inputs.gammas[i] + lin.r_max[i];
            let c = eps * eps * delta_tilde * lin.xi[i]
                / (456.0 * n * path * scale * scale * (lin.diameters[i] + 1.0).powi(2));
            solve_eta(c, t_mix)
        })
        .collect();
    let eta_min = eta.iter().cloned().fold(f64::INFINITY, f64::min);
    let xi_min = lin.xi.iter().cloned().fold(f64::INFINITY, f64::min);
    let d = lin.diameters.iter().cloned().fold(0.0, f64::max);
    let num = (eps * eps * delta_tilde / (2.0 * n * path * (2.0 * d + 1.0).powi(2))).ln();
    let den = (-xi_min * eta_min / 2.0).ln_1p();
    let t = (t_mix(eta_min) + (num / den).max(0.0)).ceil();
    LinearSchedule { eta, t_k: t }
}

/// Decentralized Q-learning with linear function approximation, converging to
/// approximate equilibria. `t_mix` overrides the default mixing-time bound.
pub fn theorem2_schedule(
    inputs: &BoundInputs,
    t_mix: Option<&dyn Fn(f64) -> f64>,
) -> Result<ScheduleBundle, BoundsError> {
    inputs.check()?;
    let lin = inputs.linear()?;
    let n = inputs.n();
    let gbar = inputs.gamma_max();
    let eps = epsilon_choice(Setting::Linear { zeta_bar_theta: lin.zeta_bar_theta, b: lin.b }, gbar, inputs.gamma_min())?;
    let margin = (lin.zeta_bar_theta / 8.0 - eps) * (1.0 - gbar) - 2.0 * lin.b;
    let rho = rho_from_margin(margin, lin.gamma_cap_tilde, n)?;
    let rho_used = rho.value().unwrap_or(inputs.rho);
    let p = p_hat(&inputs.lambdas, &inputs.policy_counts, lin.l_tilde);
    let delta_tilde = solve_delta_tilde(inputs.delta, p);
    let p2 = inputs.prop2(rho_used);
    let b2 = prop2_bounds(&p2)?;
    let default_mix = |alpha: f64| p2.t_mix_upper(alpha);
    let mix: &dyn Fn(f64) -> f64 = t_mix.unwrap_or(&default_mix);
    let sched = linear_schedule(inputs, lin, eps, delta_tilde, lin.l_tilde, mix);
    Ok(ScheduleBundle {
        theorem: 2,
        epsilon: eps,
        epsilon_in_lemma_range: lemma_range_ok(eps, lin.zeta_bar_theta, inputs.gamma_min()),
        epsilon_hat: None,
        p,
        delta_tilde,
        rho,
        rho_used,
        zeta: lin.zeta_bar_theta / 2.0,
        eta: sched.eta,
        t_k: sched.t_k,
        t_k_corollary: None,
        k: k_required(delta_tilde, p, lin.l_tilde),
        k_formula: k_formula(delta_tilde, p, lin.l_tilde),
        mu_min_bounds: (b2.mu_min_lower_uniform, b2.mu_min_upper_uniform),
        t_mix_quarter: mix(0.25),
        doeblin_c: b2.doeblin_c,
        c0: inputs.c0,
        c1: inputs.c1,
        note: constants_note(inputs.c0, inputs.c1),
    })
}

/// Linear function approximation under realizability, converging to exact equilibria.
/// Uses the tabular constants `ζ̄`, `Γ`, `L` and `p̂`; the exploration margin is
/// `(ζ̄/2 − ε)(1−γ̄)`.
pub fn theorem3_schedule(
    inputs: &BoundInputs,
    t_mix: Option<&dyn Fn(f64) -> f64>,
) -> Result<ScheduleBundle, BoundsError> {
    inputs.check()?;
    let lin = inputs.linear()?;
    let n = inputs.n();
    let gbar = inputs.gamma_max();
    let eps = epsilon_choice(Setting::Tabular { zeta_bar: inputs.zeta_bar }, gbar, inputs.gamma_min())?;
    let rho = rho_from_margin((inputs.zeta_bar / 2.0 - eps) * (1.0 - gbar), inputs.gamma_cap, n)?;
    let rho_used = rho.value().unwrap_or(inputs.rho);
    let p = p_hat(&inputs.lambdas, &inputs.policy_counts, inputs.l);
    let delta_tilde = solve_delta_tilde(inputs.delta, p);
    let p2 = inputs.prop2(rho_used);
    let b2 = prop2_bounds(&p2)?;
    let default_mix = |alpha: f64| p2.t_mix_upper(alpha);
    let mix: &dyn Fn(f64) -> f64 = t_mix.unwrap_or(&default_mix);
    let sched = linear_schedule(inputs, lin, eps, delta_tilde, inputs.l, mix);
    Ok(ScheduleBundle {
        theorem: 3,
        epsilon: eps,
        epsilon_in_lemma_range: lemma_range_ok(eps, inputs.zeta_bar, inputs.gamma_min()),
        epsilon_hat: None,
        p,
        delta_tilde,
        rho,
        rho_used,
        zeta: inputs.zeta_bar / 2.0,
        eta: sched.eta,
        t_k: sched.t_k,
        t_k_corollary: None,
        k: k_required(delta_tilde, p, inputs.l),
        k_formula: k_formula(delta_tilde, p, inputs.l),
        mu_min_bounds: (b2.mu_min_lower_uniform, b2.mu_min_upper_uniform),
        t_mix_quarter: mix(0.25),
        doeblin_c: b2.doeblin_c,
        c0: inputs.c0,
        c1: inputs.c1,
        note: constants_note(inputs.c0, inputs.c1),
    })
}
