//! Reproduction experiments and their CSV output.
//!
//! Every experiment writes `<name>.csv` (some also `<name>_summary.csv`)
//! with a fixed header whose first column is the swept variable. Columns:
//!
//! - `table2`: `row, m, m_f, p_a, sigma2, k, delta, tol, selected_m,
//!   residual, printed_m, printed_error, residual_at_printed_m`.
//! - `fig2`: `p_a_dbw, p_j_dbw, gamma_th, op_exact, op_prop1, op_prop2,
//!   op_prop3, op_mc, op_mc_se`; an approximation outside its validity
//!   conditions leaves its cell empty.
//! - `fig5`: `epsilon, user, xi_equal_split, xi_jtpa`; summary
//!   `user, p_a, p_j, epsilon_equal_split, xi_equal_split, epsilon_jtpa,
//!   xi_jtpa, increase_pct` at grid-searched warden thresholds.
//! - `fig6`: `p_j_dbw, xi_th, p_t_dbw, utility_jtpa, log_utility_jtpa,
//!   rounds, converged, utility_ppa, log_utility_ppa`.
//! - `fig7`: `p_t_dbw, p_j_dbw, xi_th, utility_jtpa, log_utility_jtpa,
//!   rounds, converged`; the jammer-free series has an empty `p_j_dbw`.
//! - `fig8`: `x, y, utility_jtpa, log_utility_jtpa`; summary `best_x,
//!   best_y, best_utility, worst_x, worst_y, worst_utility, gain_pct`.
//!
//! Utilities are `∏(R_k - R_k^th)` in (bit/s/Hz)^K; an allocation problem
//! with no covert feasible point reports utility 0.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::covert_metrics::detection_error_probability;
use crate::error::{Error, Result};
use crate::fading::{ftr_coefficients, select_truncation_capped, FtrParams};
use crate::montecarlo::{estimate_sinr_cdf, McConfig};
use crate::optimize::{
    grid_optimal_threshold, jtpa_allocate, ppa_allocate, AllocationResult, GameSpec, PowerAllocation, PsoConfig,
    CHECK_GRID,
};
use crate::scenario::{db_to_linear, linear_to_db, Scenario};
use crate::sinr_stats::{
    outage_probability, sinr_cdf_high_power, sinr_cdf_high_power_low_jamming, sinr_cdf_low_jamming,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    Table2,
    Fig2,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
}

impl Experiment {
    pub const ALL: [Experiment; 6] =
        [Experiment::Table2, Experiment::Fig2, Experiment::Fig5, Experiment::Fig6, Experiment::Fig7, Experiment::Fig8];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Table2 => "table2",
            Experiment::Fig2 => "fig2",
            Experiment::Fig5 => "fig5",
            Experiment::Fig6 => "fig6",
            Experiment::Fig7 => "fig7",
            Experiment::Fig8 => "fig8",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::param(format!("unknown experiment `{s}`")))
    }
}

/// Command-line overrides of the scenario's evaluation policy.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub tol: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, s: &Scenario) -> Result<Scenario> {
        let mut doc = s.to_doc();
        if let Some(seed) = self.seed {
            doc.eval_policy.mc.seed = seed;
        }
        if let Some(n) = self.samples {
            doc.eval_policy.mc.samples = n;
        }
        if let Some(t) = self.tol {
            doc.eval_policy.truncation_tol = t;
        }
        doc.into_scenario()
    }
}

fn pso(s: &Scenario) -> PsoConfig {
    PsoConfig::from_doc(&s.policy.pso, s.policy.mc.seed)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn or_default(v: &[f64], d: Vec<f64>) -> Vec<f64> {
    if v.is_empty() {
        d
    } else {
        v.to_vec()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2Row {
    pub row: usize,
    pub m: f64,
    pub m_f: f64,
    pub p_a: f64,
    pub sigma2: f64,
    pub k: f64,
    pub delta: f64,
    pub tol: f64,
    pub selected_m: usize,
    pub residual: f64,
    pub printed_m: Option<usize>,
    pub printed_error: Option<f64>,
    pub residual_at_printed_m: Option<f64>,
}

/// Truncation sweep: smallest `M` reaching the tolerance, and the residual
/// `1 - Σ_{j≤M} w_j` at the printed `M`.
pub fn table2(s: &Scenario) -> Result<Vec<Table2Row>> {
    let tol = s.experiments.table2_tol.unwrap_or(1e-5);
    let cap = s.policy.truncation_cap.max(400);
    s.experiments
        .table2
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let p = FtrParams::new(r.m, r.k, r.sigma2, r.delta)?;
            let m = select_truncation_capped(&p, tol, cap)?;
            let residual = ftr_coefficients(&p, m)?.residual;
            let at_printed = match r.printed_m {
                Some(pm) => Some(ftr_coefficients(&p, pm)?.residual),
                None => None,
            };
            Ok(Table2Row {
                row: i + 1,
                m: r.m,
                m_f: r.m_f,
                p_a: r.p_a,
                sigma2: r.sigma2,
                k: r.k,
                delta: r.delta,
                tol,
                selected_m: m,
                residual,
                printed_m: r.printed_m,
                printed_error: r.printed_error,
                residual_at_printed_m: at_printed,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig2Row {
    pub p_a_dbw: f64,
    pub p_j_dbw: f64,
    pub gamma_th: f64,
    pub op_exact: f64,
    pub op_prop1: Option<f64>,
    pub op_prop2: Option<f64>,
    pub op_prop3: Option<f64>,
    pub op_mc: Option<f64>,
    pub op_mc_se: Option<f64>,
}

/// Outage probability of user 0 versus transmit power, per jamming power.
/// Monte Carlo runs when `samples > 0`.
pub fn fig2(s: &Scenario) -> Result<Vec<Fig2Row>> {
    let e = &s.experiments;
    let p_a = or_default(&e.fig2_p_a_dbw, linspace(-10.0, 50.0, 13));
    let p_j = or_default(&e.fig2_p_j_dbw, vec![10.0, 25.0, 40.0]);
    let gamma = e.fig2_gamma_th.unwrap_or(1.0);
    let points: Vec<(f64, f64)> = p_j.iter().flat_map(|&j| p_a.iter().map(move |&a| (a, j))).collect();
    let base = s.user_channel(0, 1.0, 1.0)?;
    let (ga, gj) = (s.users[0].gain_a, s.users[0].gain_j);
    let mc = s.policy.mc;
    points
        .par_iter()
        .enumerate()
        .map(|(i, &(a, j))| {
            let ch = base.with_link(ga * db_to_linear(a), gj * db_to_linear(j))?;
            let op_exact = outage_probability(&ch, gamma)?;
            let (op_mc, op_mc_se) = if mc.samples > 0 {
                let cfg = McConfig { seed: mc.seed.wrapping_add(i as u64), ..mc };
                let est = estimate_sinr_cdf(&ch, &[gamma], &cfg)?.cdf[0];
                (Some(est.value), Some(est.std_err))
            } else {
                (None, None)
            };
            Ok(Fig2Row {
                p_a_dbw: a,
                p_j_dbw: j,
                gamma_th: gamma,
                op_exact,
                op_prop1: sinr_cdf_low_jamming(&ch, gamma).ok().map(|v| v.value),
                op_prop2: sinr_cdf_high_power(&ch, gamma).ok().map(|v| v.value),
                op_prop3: sinr_cdf_high_power_low_jamming(&ch, gamma).ok().map(|v| v.value),
                op_mc,
                op_mc_se,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig5Row {
    pub epsilon: f64,
    pub user: usize,
    pub xi_equal_split: f64,
    pub xi_jtpa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig5Summary {
    pub user: usize,
    pub p_a: f64,
    pub p_j: f64,
    pub epsilon_equal_split: f64,
    pub xi_equal_split: f64,
    pub epsilon_jtpa: f64,
    pub xi_jtpa: f64,
    pub increase_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig5 {
    pub curves: Vec<Fig5Row>,
    pub summary: Vec<Fig5Summary>,
    pub jtpa: AllocationResult,
}

/// Detection error versus threshold, before (equal split) and after JTPA.
pub fn fig5(s: &Scenario) -> Result<Fig5> {
    let g = GameSpec::from_scenario(s)?;
    let base = PowerAllocation::equal_split(g.k(), g.p_t, g.p_j);
    let jtpa = jtpa_allocate(&g, &pso(s), s.policy.rho, s.policy.max_rounds)?;
    let n = s.experiments.fig5_points.unwrap_or(60).max(2);
    let k2 = s.kappa2;
    let mut curves = Vec::new();
    let mut summary = Vec::new();
    for k in 0..g.k() {
        let wb = g.warden_view(base.p_a[k], base.p_j[k])?;
        let wj = g.warden_view(jtpa.alloc.p_a[k], jtpa.alloc.p_j[k])?;
        // one grid per user, wide enough for both optima
        let lo = wj.excess_scale().min(wb.excess_scale()) * 1e-3;
        let hi = wj.excess_scale().max(wb.excess_scale()) * 1e2;
        let eps: Vec<f64> = linspace(lo.ln(), hi.ln(), n).into_iter().map(|x| k2 + x.exp()).collect();
        let rows = eps
            .par_iter()
            .map(|&e| {
                Ok(Fig5Row {
                    epsilon: e,
                    user: k + 1,
                    xi_equal_split: detection_error_probability(&wb, e)?,
                    xi_jtpa: detection_error_probability(&wj, e)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        curves.extend(rows);
        let (eb, xb) = grid_optimal_threshold(&wb, CHECK_GRID)?;
        let (ej, xj) = grid_optimal_threshold(&wj, CHECK_GRID)?;
        summary.push(Fig5Summary {
            user: k + 1,
            p_a: jtpa.alloc.p_a[k],
            p_j: jtpa.alloc.p_j[k],
            epsilon_equal_split: eb,
            xi_equal_split: xb,
            epsilon_jtpa: ej,
            xi_jtpa: xj,
            increase_pct: 100.0 * (xj / xb - 1.0),
        });
    }
    Ok(Fig5 { curves, summary, jtpa })
}

/// Outcome of one allocation run in a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub utility: f64,
    pub log_utility: f64,
    pub rounds: usize,
    pub converged: bool,
}

fn sweep_point(r: Result<AllocationResult>) -> Result<SweepPoint> {
    match r {
        Ok(a) => Ok(SweepPoint { utility: a.utility(), log_utility: a.value, rounds: a.rounds, converged: a.converged }),
        Err(Error::Infeasible(_)) => {
            Ok(SweepPoint { utility: 0.0, log_utility: f64::NEG_INFINITY, rounds: 0, converged: false })
        }
        Err(e) => Err(e),
    }
}

fn game_at(g: &GameSpec, p_t: f64, p_j: f64, xi: Option<f64>) -> GameSpec {
    let mut g = g.with_budgets(p_t, p_j);
    if let Some(x) = xi {
        g.xi_th = vec![x; g.k()];
    }
    g
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig6Row {
    pub p_j_dbw: f64,
    pub xi_th: f64,
    pub p_t_dbw: f64,
    pub utility_jtpa: f64,
    pub log_utility_jtpa: f64,
    pub rounds: usize,
    pub converged: bool,
    pub utility_ppa: f64,
    pub log_utility_ppa: f64,
}

/// Utility versus jamming budget for several covertness floors.
pub fn fig6(s: &Scenario) -> Result<Vec<Fig6Row>> {
    let e = &s.experiments;
    let g = GameSpec::from_scenario(s)?;
    let p_j = or_default(&e.fig6_p_j_dbw, linspace(10.0, 30.0, 5));
    let xis = or_default(&e.fig6_xi_th, vec![0.5, 0.75, 0.9]);
    let p_t_dbw = e.fig6_p_t_dbw.unwrap_or_else(|| linear_to_db(s.p_t));
    let cfg = pso(s);
    let points: Vec<(f64, f64)> = xis.iter().flat_map(|&x| p_j.iter().map(move |&j| (j, x))).collect();
    points
        .par_iter()
        .map(|&(j, xi)| {
            let gm = game_at(&g, db_to_linear(p_t_dbw), db_to_linear(j), Some(xi));
            let jt = sweep_point(jtpa_allocate(&gm, &cfg, s.policy.rho, s.policy.max_rounds))?;
            let pp = sweep_point(ppa_allocate(&gm, &cfg))?;
            Ok(Fig6Row {
                p_j_dbw: j,
                xi_th: xi,
                p_t_dbw,
                utility_jtpa: jt.utility,
                log_utility_jtpa: jt.log_utility,
                rounds: jt.rounds,
                converged: jt.converged,
                utility_ppa: pp.utility,
                log_utility_ppa: pp.log_utility,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig7Row {
    pub p_t_dbw: f64,
    pub p_j_dbw: Option<f64>,
    pub xi_th: f64,
    pub utility_jtpa: f64,
    pub log_utility_jtpa: f64,
    pub rounds: usize,
    pub converged: bool,
}

/// Utility versus transmit budget, one series per jamming budget plus a
/// jammer-free series.
pub fn fig7(s: &Scenario) -> Result<Vec<Fig7Row>> {
    let e = &s.experiments;
    let g = GameSpec::from_scenario(s)?;
    let p_t = or_default(&e.fig7_p_t_dbw, linspace(10.0, 30.0, 5));
    let mut p_j: Vec<Option<f64>> = or_default(&e.fig7_p_j_dbw, vec![10.0, 20.0, 30.0]).into_iter().map(Some).collect();
    p_j.push(None);
    let xi = e.fig7_xi_th.unwrap_or(0.9);
    let cfg = pso(s);
    let points: Vec<(f64, Option<f64>)> = p_j.iter().flat_map(|&j| p_t.iter().map(move |&t| (t, j))).collect();
    points
        .par_iter()
        .map(|&(t, j)| {
            let gm = game_at(&g, db_to_linear(t), j.map_or(0.0, db_to_linear), Some(xi));
            let r = sweep_point(jtpa_allocate(&gm, &cfg, s.policy.rho, s.policy.max_rounds))?;
            Ok(Fig7Row {
                p_t_dbw: t,
                p_j_dbw: j,
                xi_th: xi,
                utility_jtpa: r.utility,
                log_utility_jtpa: r.log_utility,
                rounds: r.rounds,
                converged: r.converged,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig8Row {
    pub x: f64,
    pub y: f64,
    pub utility_jtpa: f64,
    pub log_utility_jtpa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig8Summary {
    pub best_x: f64,
    pub best_y: f64,
    pub best_utility: f64,
    pub worst_x: f64,
    pub worst_y: f64,
    pub worst_utility: f64,
    pub gain_pct: f64,
}

/// Utility over a grid of UAV horizontal positions at fixed height.
pub fn fig8(s: &Scenario) -> Result<(Vec<Fig8Row>, Fig8Summary)> {
    let e = &s.experiments;
    let xs = or_default(&e.fig8_x, linspace(0.0, 10.0, 5));
    let ys = or_default(&e.fig8_y, linspace(10.0, 25.0, 5));
    let cfg = pso(s);
    let points: Vec<(f64, f64)> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).collect();
    let rows = points
        .par_iter()
        .map(|&(x, y)| {
            let moved = s.with_uav([x, y, s.uav[2]])?;
            let g = GameSpec::from_scenario(&moved)?;
            let r = sweep_point(jtpa_allocate(&g, &cfg, s.policy.rho, s.policy.max_rounds))?;
            Ok(Fig8Row { x, y, utility_jtpa: r.utility, log_utility_jtpa: r.log_utility })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = rows.iter().max_by(|a, b| a.utility_jtpa.total_cmp(&b.utility_jtpa)).expect("grid is nonempty");
    let worst = rows.iter().min_by(|a, b| a.utility_jtpa.total_cmp(&b.utility_jtpa)).expect("grid is nonempty");
    let summary = Fig8Summary {
        best_x: best.x,
        best_y: best.y,
        best_utility: best.utility_jtpa,
        worst_x: worst.x,
        worst_y: worst.y,
        worst_utility: worst.utility_jtpa,
        gain_pct: 100.0 * (best.utility_jtpa / worst.utility_jtpa - 1.0),
    };
    Ok((rows, summary))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let io = |e: csv::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Runs one experiment and writes its CSV files under `out`.
pub fn run_experiment(name: Experiment, s: &Scenario, out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    let main = out.join(format!("{name}.csv"));
    let summary = out.join(format!("{name}_summary.csv"));
    match name {
        Experiment::Table2 => {
            if s.experiments.table2.is_empty() {
                return Err(Error::Schema { path: "experiments.table2".into(), msg: "no rows to evaluate".into() });
            }
            write_csv(&main, &table2(s)?)?;
            Ok(vec![main])
        }
        Experiment::Fig2 => {
            write_csv(&main, &fig2(s)?)?;
            Ok(vec![main])
        }
        Experiment::Fig5 => {
            let r = fig5(s)?;
            write_csv(&main, &r.curves)?;
            write_csv(&summary, &r.summary)?;
            Ok(vec![main, summary])
        }
        Experiment::Fig6 => {
            write_csv(&main, &fig6(s)?)?;
            Ok(vec![main])
        }
        Experiment::Fig7 => {
            write_csv(&main, &fig7(s)?)?;
            Ok(vec![main])
        }
        Experiment::Fig8 => {
            let (rows, sm) = fig8(s)?;
            write_csv(&main, &rows)?;
            write_csv(&summary, &[sm])?;
            Ok(vec![main, summary])
        }
    }
}
