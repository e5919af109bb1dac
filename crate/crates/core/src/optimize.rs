//! Particle swarm optimization, the warden's threshold choice and the
//! Nash-bargaining power allocation (joint PPA and alternating JTPA).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covert_metrics::{covert_rate, detection_error_probability, optimal_threshold, WardenChannel};
use crate::error::{Error, Result};
use crate::scenario::{PsoDoc, Scenario};
use crate::sinr_stats::UserChannel;

/// Base of the penalty given to infeasible particles.
pub const SENTINEL: f64 = -1e9;

/// Covertness constraints are enforced with this margin so that an
/// independent grid search of the warden's threshold cannot undercut them.
pub const XI_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub max_iters: usize,
    pub inertia: f64,
    pub c1: f64,
    pub c2: f64,
    /// Velocity cap as a fraction of each dimension's width.
    pub v_max_fraction: f64,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        PsoConfig { swarm_size: 30, max_iters: 60, inertia: 0.72, c1: 1.49, c2: 1.49, v_max_fraction: 0.2, seed: 1 }
    }
}

impl PsoConfig {
    pub fn from_doc(d: &PsoDoc, seed: u64) -> Self {
        PsoConfig {
            swarm_size: d.swarm,
            max_iters: d.iters,
            inertia: d.inertia,
            c1: d.c1,
            c2: d.c2,
            v_max_fraction: d.vmax_fraction,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.swarm_size < 4 {
            return Err(Error::param(format!("swarm needs at least 4 particles, got {}", self.swarm_size)));
        }
        if !(self.inertia > 0.0 && self.inertia < 1.0) {
            return Err(Error::param(format!("inertia must lie in (0, 1), got {}", self.inertia)));
        }
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return Err(Error::param("acceleration constants must be positive"));
        }
        if !(self.v_max_fraction > 0.0 && self.v_max_fraction.is_finite()) {
            return Err(Error::param("velocity cap must be positive"));
        }
        Ok(())
    }

    fn with_seed(&self, seed: u64) -> Self {
        PsoConfig { seed, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoResult {
    pub point: Vec<f64>,
    pub value: f64,
    /// Best value after initialization and after each iteration.
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

struct Particle<S> {
    x: Vec<f64>,
    v: Vec<f64>,
    best_x: Vec<f64>,
    best: f64,
    rng: ChaCha12Rng,
    state: S,
}

fn check_bounds(bounds: &[(f64, f64)]) -> Result<()> {
    if bounds.is_empty() {
        return Err(Error::param("search box has no dimensions"));
    }
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::param(format!("bad bounds [{lo}, {hi}] in dimension {i}")));
        }
    }
    Ok(())
}

/// Plain global-best PSO.
pub fn pso_optimize<F>(fitness: F, bounds: &[(f64, f64)], cfg: &PsoConfig, sense: Sense) -> Result<PsoResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pso_optimize_with_state(|_| (), |x, _: &mut ()| fitness(x), bounds, &[], cfg, sense)
}

/// PSO where every particle carries its own state `S` into the fitness
/// (used for warm starts). `seeds` replace the first random positions.
///
/// Each particle draws from its own RNG stream and owns its state, so the
/// result does not depend on how evaluations are scheduled across threads.
pub fn pso_optimize_with_state<S, I, F>(
    init: I,
    fitness: F,
    bounds: &[(f64, f64)],
    seeds: &[Vec<f64>],
    cfg: &PsoConfig,
    sense: Sense,
) -> Result<PsoResult>
where
    S: Send,
    I: Fn(usize) -> S,
    F: Fn(&[f64], &mut S) -> f64 + Sync,
{
    cfg.validate()?;
    check_bounds(bounds)?;
    let sign = match sense {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };
    // internally everything is maximized; NaN counts as worst
    let score = |x: &[f64], s: &mut S| {
        let v = sign * fitness(x, s);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let vmax: Vec<f64> = bounds.iter().map(|(lo, hi)| cfg.v_max_fraction * (hi - lo)).collect();
    let mut swarm: Vec<Particle<S>> = (0..cfg.swarm_size)
        .map(|i| {
            let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let x: Vec<f64> = match seeds.get(i) {
                Some(s) if s.len() == bounds.len() => {
                    s.iter().zip(bounds).map(|(v, (lo, hi))| v.clamp(*lo, *hi)).collect()
                }
                _ => bounds.iter().map(|&(lo, hi)| if hi > lo { rng.random_range(lo..hi) } else { lo }).collect(),
            };
            let v = vmax.iter().map(|&m| if m > 0.0 { rng.random_range(-m..m) } else { 0.0 }).collect();
            Particle { best_x: x.clone(), x, v, best: f64::NEG_INFINITY, rng, state: init(i) }
        })
        .collect();
    swarm.par_iter_mut().for_each(|p| {
        p.best = score(&p.x, &mut p.state);
    });
    let mut evaluations = cfg.swarm_size;
    let pick = |swarm: &[Particle<S>]| {
        let mut g = 0;
        for (i, p) in swarm.iter().enumerate() {
            if p.best > swarm[g].best {
                g = i;
            }
        }
        (swarm[g].best_x.clone(), swarm[g].best)
    };
    let (mut g_x, mut g_best) = pick(&swarm);
    let mut trace = vec![sign * g_best];
    for _ in 0..cfg.max_iters {
        let gx = &g_x;
        swarm.par_iter_mut().for_each(|p| {
            for d in 0..bounds.len() {
                let (r1, r2): (f64, f64) = (p.rng.random(), p.rng.random());
                let v = cfg.inertia * p.v[d] + cfg.c1 * r1 * (p.best_x[d] - p.x[d]) + cfg.c2 * r2 * (gx[d] - p.x[d]);
                p.v[d] = v.clamp(-vmax[d], vmax[d]);
                p.x[d] = (p.x[d] + p.v[d]).clamp(bounds[d].0, bounds[d].1);
            }
            let f = score(&p.x, &mut p.state);
            if f > p.best {
                p.best = f;
                p.best_x.clone_from(&p.x);
            }
        });
        evaluations += cfg.swarm_size;
        let (x, v) = pick(&swarm);
        if v > g_best {
            g_x = x;
            g_best = v;
        }
        trace.push(sign * g_best);
    }
    Ok(PsoResult { point: g_x, value: sign * g_best, trace, evaluations })
}

/// Search interval for `ln(ε - κ²)`.
fn threshold_box(w: &WardenChannel) -> (f64, f64) {
    let s = w.excess_scale();
    ((s * 1e-4).ln(), (s * 1e4).ln())
}

/// Warden's detection threshold by PSO over `ε`.
///
/// Particles move in `ln(ε - κ²)`, which keeps every candidate above the
/// noise floor. Returns `(ε*, ξ(ε*))`.
pub fn warden_optimal_threshold(w: &WardenChannel, cfg: &PsoConfig) -> Result<(f64, f64)> {
    let k2 = w.link_w.kappa2;
    if w.link_w.c1 == 0.0 {
        // ξ = 1 for every threshold above the floor
        let eps = k2 * (1.0 + 1e-9) + f64::MIN_POSITIVE;
        return Ok((eps, detection_error_probability(w, eps)?));
    }
    let (lo, hi) = threshold_box(w);
    let r = pso_optimize(
        |x| detection_error_probability(w, k2 + x[0].exp()).unwrap_or(f64::NAN),
        &[(lo, hi)],
        cfg,
        Sense::Minimize,
    )?;
    let eps = k2 + r.point[0].exp();
    Ok((eps, detection_error_probability(w, eps)?))
}

/// Grid search over `n` log-spaced thresholds, polished locally.
/// The independent reference for the warden's best response.
pub fn grid_optimal_threshold(w: &WardenChannel, n: usize) -> Result<(f64, f64)> {
    let k2 = w.link_w.kappa2;
    if w.link_w.c1 == 0.0 {
        return Ok((k2, 1.0));
    }
    let n = n.max(3);
    let (lo, hi) = threshold_box(w);
    let mut best = (lo, f64::INFINITY);
    for i in 0..n {
        let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let v = detection_error_probability(w, k2 + x.exp())?;
        if v < best.1 {
            best = (x, v);
        }
    }
    let h = (hi - lo) / (n - 1) as f64;
    let mut err = None;
    let (x, v) = crate::covert_metrics::brent_min(
        |x| match detection_error_probability(w, k2 + x.exp()) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                f64::INFINITY
            }
        },
        best.0 - h,
        best.0 + h,
        1e-8,
    );
    if let Some(e) = err {
        return Err(e);
    }
    Ok(if v < best.1 { (k2 + x.exp(), v) } else { (k2 + best.0.exp(), best.1) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub p_a: Vec<f64>,
    pub p_j: Vec<f64>,
}

impl PowerAllocation {
    /// `P_T/K` and `P_J/K` to every user.
    pub fn equal_split(k: usize, p_t: f64, p_j: f64) -> Self {
        PowerAllocation { p_a: vec![p_t / k as f64; k], p_j: vec![p_j / k as f64; k] }
    }

    pub fn k(&self) -> usize {
        self.p_a.len()
    }
}

/// Bargaining game: per-user channels at unit power and the common warden.
#[derive(Debug, Clone)]
pub struct GameSpec {
    pub users: Vec<UserChannel>,
    /// Path gains `D_a^{-α_a}`, `D_j^{-α_j}` of each user link.
    pub user_gains: Vec<(f64, f64)>,
    /// The warden; every user's view of it differs only through that
    /// user's powers.
    pub warden: WardenChannel,
    pub warden_gains: (f64, f64),
    pub r_th: Vec<f64>,
    pub xi_th: Vec<f64>,
    pub p_t: f64,
    pub p_j: f64,
    /// Positive factors `a_k` on each surplus, `a_k (R_k - R_k^th)`. All ones
    /// by default; rescaling must not move the bargaining solution.
    pub utility_scale: Vec<f64>,
}

/// One user's outcome under an allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserOutcome {
    pub rate: f64,
    pub epsilon: f64,
    pub xi: f64,
}

impl GameSpec {
    pub fn from_scenario(s: &Scenario) -> Result<Self> {
        let users = (0..s.k()).map(|k| s.user_channel(k, 1.0, 1.0)).collect::<Result<Vec<_>>>()?;
        let g = GameSpec {
            users,
            user_gains: s.users.iter().map(|u| (u.gain_a, u.gain_j)).collect(),
            warden: s.warden_channel(1.0, 1.0)?,
            warden_gains: (s.warden.gain_a, s.warden.gain_j),
            r_th: s.r_th.clone(),
            xi_th: s.xi_th.clone(),
            p_t: s.p_t,
            p_j: s.p_j,
            utility_scale: vec![1.0; s.k()],
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.users.len();
        if k == 0 {
            return Err(Error::param("game needs at least one user"));
        }
        if self.user_gains.len() != k
            || self.r_th.len() != k
            || self.xi_th.len() != k
            || self.utility_scale.len() != k
        {
            return Err(Error::param("per-user vectors disagree in length"));
        }
        if self.xi_th.iter().any(|x| !(*x < 1.0)) || self.r_th.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::param("need xi_th < 1 and r_th >= 0"));
        }
        if self.utility_scale.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::param("utility scales must be positive"));
        }
        if !(self.p_t >= 0.0 && self.p_j >= 0.0) {
            return Err(Error::param("budgets must be nonnegative"));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.users.len()
    }

    pub fn with_budgets(&self, p_t: f64, p_j: f64) -> Self {
        GameSpec { p_t, p_j, ..self.clone() }
    }

    pub fn user_channel(&self, k: usize, p_a: f64, p_j: f64) -> Result<UserChannel> {
        let (ga, gj) = self.user_gains[k];
        self.users[k].with_link(ga * p_a, gj * p_j)
    }

    pub fn warden_view(&self, p_a: f64, p_j: f64) -> Result<WardenChannel> {
        let (ga, gj) = self.warden_gains;
        self.warden.with_link(ga * p_a, gj * p_j)
    }

    /// Rate and warden best response for user `k`, warm-started from `hint`.
    pub fn outcome(&self, k: usize, p_a: f64, p_j: f64, hint: Option<f64>) -> Result<UserOutcome> {
        let (epsilon, xi) = optimal_threshold(&self.warden_view(p_a, p_j)?, hint)?;
        let rate = covert_rate(&self.user_channel(k, p_a, p_j)?)?;
        Ok(UserOutcome { rate, epsilon, xi })
    }

    /// Relative budget overdraw, zero when within budget.
    fn budget_violation(&self, p_a: &[f64], p_j: &[f64]) -> f64 {
        let over = |sum: f64, cap: f64| {
            let ex = sum - cap;
            if ex <= cap * 1e-12 {
                0.0
            } else {
                ex / cap.max(1e-300)
            }
        };
        over(p_a.iter().sum(), self.p_t) + over(p_j.iter().sum(), self.p_j)
    }

    /// Penalized log-utility used inside the optimizers. `hints` holds the
    /// warden's last threshold per user and is updated in place.
    fn penalized(&self, p_a: &[f64], p_j: &[f64], hints: &mut [Option<f64>]) -> f64 {
        if p_a.iter().chain(p_j).any(|p| !(*p >= 0.0)) {
            return SENTINEL - 1e3;
        }
        let vb = self.budget_violation(p_a, p_j);
        if vb > 0.0 {
            return SENTINEL - vb;
        }
        let mut shortfall = 0.0;
        for k in 0..self.k() {
            let w = match self.warden_view(p_a[k], p_j[k]) {
                Ok(w) => w,
                Err(_) => return SENTINEL - 1e3,
            };
            match optimal_threshold(&w, hints[k]) {
                Ok((eps, xi)) => {
                    hints[k] = Some(eps);
                    shortfall += (self.xi_th[k] + XI_MARGIN - xi).max(0.0);
                }
                Err(_) => return SENTINEL - 1e3,
            }
        }
        if shortfall > 0.0 {
            return SENTINEL - shortfall;
        }
        let mut obj = 0.0;
        let mut deficit = 0.0;
        for k in 0..self.k() {
            let r = match self.user_channel(k, p_a[k], p_j[k]).and_then(|c| covert_rate(&c)) {
                Ok(r) => r,
                Err(_) => return SENTINEL - 1e3,
            };
            let gain = r - self.r_th[k];
            if gain > 0.0 {
                obj += (self.utility_scale[k] * gain).ln();
            } else {
                deficit += -gain + 1e-12;
            }
        }
        if deficit > 0.0 {
            SENTINEL - deficit
        } else {
            obj
        }
    }
}

/// `Σ ln(a_k (R_k - R_k^th))`; `-∞` when some user does not beat its disagreement
/// rate. Errors on a budget overdraw.
pub fn nbs_objective(g: &GameSpec, alloc: &PowerAllocation) -> Result<f64> {
    check_alloc(g, alloc)?;
    if g.budget_violation(&alloc.p_a, &alloc.p_j) > 0.0 {
        return Err(Error::Infeasible("allocation exceeds a power budget".into()));
    }
    let mut obj = 0.0;
    for k in 0..g.k() {
        let r = covert_rate(&g.user_channel(k, alloc.p_a[k], alloc.p_j[k])?)?;
        let gain = r - g.r_th[k];
        if gain <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        obj += (g.utility_scale[k] * gain).ln();
    }
    Ok(obj)
}

fn check_alloc(g: &GameSpec, alloc: &PowerAllocation) -> Result<()> {
    if alloc.p_a.len() != g.k() || alloc.p_j.len() != g.k() {
        return Err(Error::param(format!("allocation must have {} entries per vector", g.k())));
    }
    if alloc.p_a.iter().chain(&alloc.p_j).any(|p| !(*p >= 0.0 && p.is_finite())) {
        return Err(Error::param("powers must be finite and nonnegative"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserFeasibility {
    pub rate: f64,
    /// `R_k - R_k^th`.
    pub rate_slack: f64,
    pub epsilon: f64,
    pub xi: f64,
    /// `ξ_k - ξ_k^th`.
    pub xi_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// `P_T - Σ p_a` and `P_J - Σ p_j`.
    pub transmit_slack: f64,
    pub jamming_slack: f64,
    pub users: Vec<UserFeasibility>,
    /// Budgets and covertness floors all hold.
    pub feasible: bool,
    /// Every user beats its disagreement rate.
    pub individually_rational: bool,
}

/// Grid points used by the independent threshold check.
pub const CHECK_GRID: usize = 2001;

/// Checks the budgets and, per user, `ξ_k ≥ ξ_k^th` at a grid-searched
/// warden threshold.
pub fn feasibility_check(g: &GameSpec, alloc: &PowerAllocation) -> Result<FeasibilityReport> {
    check_alloc(g, alloc)?;
    let transmit_slack = g.p_t - alloc.p_a.iter().sum::<f64>();
    let jamming_slack = g.p_j - alloc.p_j.iter().sum::<f64>();
    let users = (0..g.k())
        .map(|k| {
            let (pa, pj) = (alloc.p_a[k], alloc.p_j[k]);
            let (epsilon, xi) = grid_optimal_threshold(&g.warden_view(pa, pj)?, CHECK_GRID)?;
            let rate = covert_rate(&g.user_channel(k, pa, pj)?)?;
            Ok(UserFeasibility { rate, rate_slack: rate - g.r_th[k], epsilon, xi, xi_slack: xi - g.xi_th[k] })
        })
        .collect::<Result<Vec<_>>>()?;
    let tol_t = 1e-12 * g.p_t.max(1.0);
    let tol_j = 1e-12 * g.p_j.max(1.0);
    let feasible = transmit_slack >= -tol_t && jamming_slack >= -tol_j && users.iter().all(|u| u.xi_slack >= 0.0);
    let individually_rational = users.iter().all(|u| u.rate_slack > 0.0);
    Ok(FeasibilityReport { transmit_slack, jamming_slack, users, feasible, individually_rational })
}

/// Result of an allocation algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub alloc: PowerAllocation,
    /// Log-utility `Σ ln(R_k - R_k^th)`.
    pub value: f64,
    pub outcomes: Vec<UserOutcome>,
    /// JTPA: objective after initialization and after each round.
    pub round_trace: Vec<f64>,
    pub rounds: usize,
    pub converged: bool,
    pub evaluations: usize,
}

impl AllocationResult {
    /// Product form `∏ (R_k - R_k^th)`.
    pub fn utility(&self) -> f64 {
        self.value.exp()
    }
}

fn finish(g: &GameSpec, alloc: PowerAllocation, value: f64) -> Result<(Vec<UserOutcome>, f64)> {
    if value <= SENTINEL {
        return Err(Error::Infeasible(format!("best allocation still violates a constraint (fitness {value:e})")));
    }
    let outcomes = (0..g.k()).map(|k| g.outcome(k, alloc.p_a[k], alloc.p_j[k], None)).collect::<Result<Vec<_>>>()?;
    let v = nbs_objective(g, &alloc)?;
    Ok((outcomes, v))
}

/// Largest `p_a ≤ cap` keeping user `k` covert at jamming `p_j`, by
/// bisection in `ln p_a` (`ξ*` falls as the transmit power grows).
fn covert_transmit_cap(g: &GameSpec, k: usize, p_j: f64, cap: f64) -> Result<f64> {
    let ok = |pa: f64| -> Result<bool> {
        let (_, xi) = optimal_threshold(&g.warden_view(pa, p_j)?, None)?;
        Ok(xi >= g.xi_th[k] + 2.0 * XI_MARGIN)
    };
    if cap <= 0.0 || ok(cap)? {
        return Ok(cap.max(0.0));
    }
    let mut lo = cap * 1e-12;
    if !ok(lo)? {
        return Ok(0.0);
    }
    let mut hi = cap;
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-10 {
            break;
        }
    }
    Ok(lo)
}

/// Equal jamming split with each transmit power cut back until covert.
pub fn minimum_power_start(g: &GameSpec) -> Result<PowerAllocation> {
    let mut a = PowerAllocation::equal_split(g.k(), g.p_t, g.p_j);
    for k in 0..g.k() {
        a.p_a[k] = covert_transmit_cap(g, k, a.p_j[k], a.p_a[k])?;
    }
    Ok(a)
}

/// Starting allocation: the equal split if it is feasible, else the
/// minimum-power fallback.
fn start_point(g: &GameSpec) -> Result<(PowerAllocation, f64)> {
    let eq = PowerAllocation::equal_split(g.k(), g.p_t, g.p_j);
    let v = g.penalized(&eq.p_a, &eq.p_j, &mut vec![None; g.k()]);
    if v > SENTINEL {
        return Ok((eq, v));
    }
    let a = minimum_power_start(g)?;
    let v = g.penalized(&a.p_a, &a.p_j, &mut vec![None; g.k()]);
    Ok((a, v))
}

/// Joint allocation: one PSO over all `2K` powers.
pub fn ppa_allocate(g: &GameSpec, cfg: &PsoConfig) -> Result<AllocationResult> {
    g.validate()?;
    let k = g.k();
    let (start, _) = start_point(g)?;
    let mut bounds = vec![(0.0, g.p_t); k];
    bounds.extend(vec![(0.0, g.p_j); k]);
    let seed_pt: Vec<f64> = start.p_a.iter().chain(&start.p_j).copied().collect();
    let r = pso_optimize_with_state(
        |_| vec![None; k],
        |x, hints: &mut Vec<Option<f64>>| g.penalized(&x[..k], &x[k..], hints),
        &bounds,
        &[seed_pt],
        cfg,
        Sense::Maximize,
    )?;
    let alloc = PowerAllocation { p_a: r.point[..k].to_vec(), p_j: r.point[k..].to_vec() };
    let (outcomes, value) = finish(g, alloc.clone(), r.value)?;
    Ok(AllocationResult {
        alloc,
        value,
        outcomes,
        round_trace: r.trace,
        rounds: 1,
        converged: true,
        evaluations: r.evaluations,
    })
}

/// Alternating two-stage allocation: jamming at fixed transmit powers, then
/// transmit at fixed jamming, until the objective moves less than `rho`.
///
/// A stage result that lowers the objective is discarded, so the round
/// trace never decreases.
pub fn jtpa_allocate(g: &GameSpec, cfg: &PsoConfig, rho: f64, max_rounds: usize) -> Result<AllocationResult> {
    g.validate()?;
    if !(rho > 0.0) {
        return Err(Error::param(format!("rho must be positive, got {rho}")));
    }
    let k = g.k();
    let (mut alloc, mut value) = start_point(g)?;
    let mut trace = vec![value];
    let mut evaluations = 0;
    let mut converged = false;
    let mut rounds = 0;
    for round in 0..max_rounds {
        rounds = round + 1;
        for stage in 0..2 {
            let seed = cfg.seed.wrapping_add(((round as u64) << 1 | stage as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let (cap, fixed) = if stage == 0 { (g.p_j, &alloc.p_a) } else { (g.p_t, &alloc.p_j) };
            let current = if stage == 0 { alloc.p_j.clone() } else { alloc.p_a.clone() };
            let r = pso_optimize_with_state(
                |_| vec![None; k],
                |x, hints: &mut Vec<Option<f64>>| {
                    if stage == 0 {
                        g.penalized(fixed, x, hints)
                    } else {
                        g.penalized(x, fixed, hints)
                    }
                },
                &vec![(0.0, cap); k],
                &[current],
                &cfg.with_seed(seed),
                Sense::Maximize,
            )?;
            evaluations += r.evaluations;
            if r.value > value {
                value = r.value;
                if stage == 0 {
                    alloc.p_j = r.point;
                } else {
                    alloc.p_a = r.point;
                }
            }
        }
        let prev = trace[trace.len() - 1];
        trace.push(value);
        if (value - prev).abs() < rho {
            converged = true;
            break;
        }
    }
    let (outcomes, v) = finish(g, alloc.clone(), value)?;
    Ok(AllocationResult { alloc, value: v, outcomes, round_trace: trace, rounds, converged, evaluations })
}
