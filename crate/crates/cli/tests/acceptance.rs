//! Acceptance suite. Every criterion prints one `criterion NN: PASS|FAIL`
//! line to stdout (bypassing the test harness capture) and then asserts.
//! Criteria run one at a time so their wall-clock limits are not shared.

use std::collections::HashMap;
use std::io::Write;
use std::os::fd::AsFd;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use covertlink_core::covert_metrics::{
    covert_rate, covert_rate_quadrature, dep_threshold_convexity_probe, detection_error_probability, lemma_integral,
    lemma_integral_asymptotic, LemmaBranch, LemmaIntegralCase, Limit, WardenChannel,
};
use covertlink_core::experiments::{fig2, fig5, table2, Fig5, Overrides};
use covertlink_core::fading::{FisherFParams, FtrParams};
use covertlink_core::montecarlo::{estimate_dep, estimate_rate, estimate_sinr_cdf, sample_sinr, McConfig};
use covertlink_core::optimize::{
    feasibility_check, jtpa_allocate, ppa_allocate, warden_optimal_threshold, AllocationResult, GameSpec,
    PowerAllocation, PsoConfig,
};
use covertlink_core::scenario::{load_scenario, Scenario};
use covertlink_core::sinr_stats::{sinr_cdf, LinkCoefficients, TruncationPolicy, UserChannel};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// criterion 1
const T2_TOL: f64 = 1e-5;
const T2_MAX_M: usize = 30;
const T2_PRINTED_ROW1: f64 = 7.34e-6;
const T2_FACTOR: f64 = 3.0;
const T2_LIMIT: Duration = Duration::from_secs(1);
// criterion 2
const CDF_SETS: usize = 20;
const CDF_SAMPLES: usize = 1_000_000;
const CDF_SE: f64 = 4.0;
const CDF_LIMIT: Duration = Duration::from_secs(300);
// criterion 3
const PROP1_REL: f64 = 0.02;
const PROP23_REL: f64 = 0.05;
const PROP_HIGH_PA_DBW: f64 = 35.0;
const PROP_LOW_PJ_DBW: f64 = 10.0;
const PROP_LIMIT: Duration = Duration::from_secs(120);
// criterion 4
const DEP_SAMPLES: usize = 1_000_000;
const DEP_ABS: f64 = 0.01;
const DEP_LIMIT_ABS: f64 = 1e-3;
// criterion 5
const RATE_SETS: usize = 10;
const RATE_REL: f64 = 0.01;
// criterion 6
const LEMMA_DRAWS: usize = 50;
const LEMMA_REL: f64 = 1e-6;
const LEMMA_APPROX_REL: f64 = 0.02;
// criterion 7
const CONVEX_FLOOR: f64 = -1e-6;
const CONVEX_POINTS: usize = 400;
// criterion 8
const GRID_POINTS: usize = 10_000;
const PSO_XI_ABS: f64 = 1e-3;
const PSO_LIMIT: Duration = Duration::from_secs(30);
// criterion 9
const XI_TH: f64 = 0.95;
// criterion 10
const TREND_REL: f64 = 1e-6;
const FIG6_GAIN_PCT: f64 = 78.0;
const FIG7_GAIN_PCT: f64 = 22.0;
const GAIN_PP: f64 = 15.0;
const SWEEP_LIMIT: Duration = Duration::from_secs(30 * 60);
// criterion 11
const RHO: f64 = 1e-3;
const MAX_ROUNDS: usize = 20;
const PPA_SLACK: f64 = 0.02;
// criterion 12
const ALLOC_TOL: f64 = 0.02;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: u32, pass: bool, detail: &str) {
    let line = format!("\ncriterion {id:2}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    // the harness captures the std handles; a duplicate of fd 1 shares its offset
    match std::io::stdout().as_fd().try_clone_to_owned() {
        Ok(fd) => {
            let _ = std::fs::File::from(fd).write_all(line.as_bytes());
        }
        Err(_) => eprint!("{line}"),
    }
}

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn scenario(name: &str) -> Scenario {
    load_scenario(&std::fs::read_to_string(scenario_path(name)).unwrap()).unwrap()
}

fn pso(s: &Scenario) -> PsoConfig {
    PsoConfig::from_doc(&s.policy.pso, s.policy.mc.seed)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn sec6_fig5() -> &'static Fig5 {
    static F: OnceLock<Fig5> = OnceLock::new();
    F.get_or_init(|| fig5(&scenario("paper_sec6.json")).unwrap())
}

/// JTPA and PPA on every shipped scenario.
fn allocations() -> &'static Vec<(String, GameSpec, AllocationResult, AllocationResult)> {
    static A: OnceLock<Vec<(String, GameSpec, AllocationResult, AllocationResult)>> = OnceLock::new();
    A.get_or_init(|| {
        ["paper_sec6.json", "fig2.json", "fig8.json"]
            .iter()
            .map(|name| {
                let s = scenario(name);
                let g = GameSpec::from_scenario(&s).unwrap();
                let cfg = pso(&s);
                let j = jtpa_allocate(&g, &cfg, RHO, MAX_ROUNDS).unwrap();
                let p = ppa_allocate(&g, &cfg).unwrap();
                (name.to_string(), g, j, p)
            })
            .collect()
    })
}

fn random_channel(rng: &mut ChaCha8Rng) -> UserChannel {
    let ftr = FtrParams::from_average_power(
        rng.random_range(1.0..6.0),
        rng.random_range(0.0..15.0),
        rng.random_range(0.0..0.9),
        1.0,
    )
    .unwrap();
    let fisher = FisherFParams::new(rng.random_range(1.5..6.0), rng.random_range(2.5..6.0), 1.0).unwrap();
    let c1 = 10f64.powf(rng.random_range(0.0..1.5));
    let c2 = 10f64.powf(rng.random_range(-2.0..0.7));
    let kappa2 = rng.random_range(0.5..2.0);
    let link = LinkCoefficients::new(c1, c2, kappa2, &fisher).unwrap();
    UserChannel::new(ftr, fisher, link, TruncationPolicy::default()).unwrap()
}

#[test]
fn criterion_01_truncation_table() {
    let _g = serial();
    let s = scenario("paper_sec6.json");
    let t0 = Instant::now();
    let rows = table2(&s).unwrap();
    let elapsed = t0.elapsed();
    let mut pass = elapsed < T2_LIMIT;
    let mut detail = format!("{:.3}s;", elapsed.as_secs_f64());
    for r in &rows {
        let ok = r.selected_m <= T2_MAX_M && r.residual < T2_TOL;
        pass &= ok;
        detail += &format!(" row{} M={} residual={:.2e}", r.row, r.selected_m, r.residual);
    }
    let r1 = rows[0].residual;
    let ratio = (r1 / T2_PRINTED_ROW1).max(T2_PRINTED_ROW1 / r1);
    pass &= ratio <= T2_FACTOR;
    detail += &format!("; row1 residual/printed factor {ratio:.2}");
    report(1, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_02_cdf_vs_monte_carlo() {
    let _g = serial();
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for set in 0..CDF_SETS {
        let ch = random_channel(&mut rng);
        // grid points at quantiles of an independent pilot run
        let mut pilot = sample_sinr(&ch, &McConfig { samples: 10_000, seed: 1000 + set as u64, workers: 0 }).unwrap();
        pilot.sort_by(f64::total_cmp);
        let grid: Vec<f64> = [0.05, 0.25, 0.5, 0.75, 0.95].iter().map(|q| pilot[(q * 10_000.0) as usize]).collect();
        let mc = estimate_sinr_cdf(&ch, &grid, &McConfig { samples: CDF_SAMPLES, seed: set as u64, workers: 0 }).unwrap();
        for (g, e) in grid.iter().zip(&mc.cdf) {
            let p = sinr_cdf(&ch, *g).unwrap();
            let se = (p * (1.0 - p) / CDF_SAMPLES as f64).sqrt();
            let z = (e.value - p).abs() / se;
            worst = worst.max(z);
            if z > CDF_SE {
                bad.push(format!("set {set} gamma {g:.4}: exact {p:.6} mc {:.6} ({z:.1} SE)", e.value));
            }
        }
    }
    let elapsed = t0.elapsed();
    let pass = bad.is_empty() && elapsed < CDF_LIMIT;
    let detail = format!("{} points, worst {worst:.2} SE, {:.0}s {}", CDF_SETS * 5, elapsed.as_secs_f64(), bad.join("; "));
    report(2, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_03_propositions() {
    let _g = serial();
    let t0 = Instant::now();
    let s = Overrides { seed: None, samples: Some(0), tol: None }.apply(&scenario("fig2.json")).unwrap();
    let rows = fig2(&s).unwrap();
    let elapsed = t0.elapsed();
    let (mut p1, mut p2, mut p3) = (0.0f64, 0.0f64, 0.0f64);
    let mut missing = Vec::new();
    for r in &rows {
        if r.p_j_dbw == PROP_LOW_PJ_DBW {
            match r.op_prop1 {
                Some(v) => p1 = p1.max(rel(v, r.op_exact)),
                None => missing.push(format!("prop1 at {} dBW", r.p_a_dbw)),
            }
        }
        if r.p_a_dbw >= PROP_HIGH_PA_DBW {
            match r.op_prop2 {
                Some(v) => p2 = p2.max(rel(v, r.op_exact)),
                None => missing.push(format!("prop2 at {}/{} dBW", r.p_a_dbw, r.p_j_dbw)),
            }
            // the weak-jamming form is checked in the weak-jamming series
            if r.p_j_dbw == PROP_LOW_PJ_DBW {
                match r.op_prop3 {
                    Some(v) => p3 = p3.max(rel(v, r.op_exact)),
                    None => missing.push(format!("prop3 at {} dBW", r.p_a_dbw)),
                }
            }
        }
    }
    let pass = p1 < PROP1_REL && p2 < PROP23_REL && p3 < PROP23_REL && missing.is_empty() && elapsed < PROP_LIMIT;
    let detail = format!(
        "max rel err prop1 {p1:.4} prop2 {p2:.4} prop3 {p3:.4}, {:.1}s {}",
        elapsed.as_secs_f64(),
        missing.join(", ")
    );
    report(3, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_04_dep_vs_monte_carlo() {
    let _g = serial();
    let s = scenario("paper_sec6.json");
    let f = sec6_fig5();
    let g = GameSpec::from_scenario(&s).unwrap();
    let base = PowerAllocation::equal_split(g.k(), g.p_t, g.p_j);
    let views = [
        g.warden_view(base.p_a[0], base.p_j[0]).unwrap(),
        g.warden_view(f.jtpa.alloc.p_a[0], f.jtpa.alloc.p_j[0]).unwrap(),
    ];
    let mut worst = 0.0f64;
    let mut limits = Vec::new();
    for (i, w) in views.iter().enumerate() {
        let k2 = w.link_w.kappa2;
        let scale = w.excess_scale();
        for j in 0..10 {
            let eps = k2 + scale * 10f64.powf(-2.0 + 3.0 * j as f64 / 9.0);
            let exact = detection_error_probability(w, eps).unwrap();
            let mc = estimate_dep(w, eps, &McConfig { samples: DEP_SAMPLES, seed: (10 * i + j) as u64, workers: 0 })
                .unwrap();
            worst = worst.max((mc.xi.value - exact).abs());
        }
        limits.push(detection_error_probability(w, k2 + scale * 1e-9).unwrap());
        limits.push(detection_error_probability(w, k2 + scale * 1e6).unwrap());
    }
    let worst_limit = limits.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
    let pass = worst < DEP_ABS && worst_limit < DEP_LIMIT_ABS;
    let detail = format!("20 thresholds, worst |xi - mc| {worst:.4}; boundary limits {limits:.6?}");
    report(4, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_05_rate_oracles() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut wq, mut wm) = (0.0f64, 0.0f64);
    for set in 0..RATE_SETS {
        let ch = random_channel(&mut rng);
        let r = covert_rate(&ch).unwrap();
        let q = covert_rate_quadrature(&ch).unwrap();
        let mc = estimate_rate(&ch, &McConfig { samples: 1_000_000, seed: 50 + set as u64, workers: 0 }).unwrap();
        wq = wq.max(rel(r, q));
        wm = wm.max(rel(r, mc.value));
    }
    let pass = wq < RATE_REL && wm < RATE_REL;
    let detail = format!("{RATE_SETS} scenarios, worst rel vs quadrature {wq:.2e}, vs MC mean {wm:.2e}");
    report(5, pass, &detail);
    assert!(pass, "{detail}");
}

/// Double-exponential quadrature, refined to a relative target.
fn de(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let rough = quadrature::integrate(f, a, b, 1e-6).integral.abs();
    quadrature::integrate(f, a, b, (rough * 1e-13).max(1e-300)).integral
}

fn de_half_line(f: &dyn Fn(f64) -> f64, s: f64, h: f64) -> f64 {
    let mut total = 0.0;
    let mut lo = s;
    let mut width = h;
    for _ in 0..80 {
        let piece = de(f, lo, lo + width);
        total += piece;
        if piece.abs() <= 1e-17 * total.abs() {
            break;
        }
        lo += width;
        width *= 2.0;
    }
    total
}

/// `∫ |t - x0|^e g(t) dt` over the `h`-long side of `x0` given by `dir`,
/// with the endpoint singularity mapped away by `|t - x0| = w^{1/(1+e)}`.
fn singular_piece(g: &dyn Fn(f64) -> f64, e: f64, x0: f64, h: f64, dir: f64) -> f64 {
    let p = 1.0 / (1.0 + e);
    de(&|w: f64| g(x0 + dir * w.powf(p)), 0.0, h.powf(1.0 + e)) * p
}

/// Independent oracle for `∫ t^A (B - t)^C e^{-Dt} dt` on the principal
/// branch.
fn lemma_oracle(a: f64, b: f64, c: f64, d: f64, lo: f64, hi: f64) -> Complex64 {
    let below = |t: f64| t.powf(a) * (b - t).powf(c) * (-d * t).exp();
    let above = |t: f64| t.powf(a) * (t - b).powf(c) * (-d * t).exp();
    let mut re = 0.0;
    if lo < b {
        let top = hi.min(b);
        let mid = 0.5 * (lo + top);
        re += if lo == 0.0 {
            singular_piece(&|t: f64| (b - t).powf(c) * (-d * t).exp(), a, 0.0, mid, 1.0)
        } else {
            de(&below, lo, mid)
        };
        re += if top == b {
            singular_piece(&|t: f64| t.powf(a) * (-d * t).exp(), c, b, b - mid, -1.0)
        } else {
            de(&below, mid, top)
        };
    }
    let mut up = 0.0;
    if hi > b {
        let s = lo.max(b);
        let h = ((1.0 + a.max(0.0) + c.max(0.0)) / d).max(b);
        let first = if hi.is_infinite() { h } else { (hi - s).min(h) };
        up = if s == b {
            singular_piece(&|t: f64| t.powf(a) * (-d * t).exp(), c, b, first, 1.0)
        } else {
            de(&above, s, s + first)
        };
        if hi.is_infinite() {
            up += de_half_line(&above, s + first, h);
        } else if s + first < hi {
            up += de(&above, s + first, hi);
        }
    }
    Complex64::new(re, 0.0) + Complex64::from_polar(up, std::f64::consts::PI * c)
}

fn limit_value(l: Limit, b: f64) -> f64 {
    match l {
        Limit::Zero => 0.0,
        Limit::Finite(t) => t,
        Limit::Branch => b,
        Limit::Infinity => f64::INFINITY,
    }
}

#[test]
fn criterion_06_power_exponential_integrals() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let draw = |rng: &mut ChaCha8Rng| {
        (
            rng.random_range(-0.9..5.0),
            rng.random_range(0.1..8.0),
            rng.random_range(-0.9..6.0),
            rng.random_range(0.05..4.0),
            rng.random_range(0.05..2.0),
        )
    };
    let shapes: [fn(f64, f64) -> (Limit, Limit); 4] = [
        |b, u| (Limit::Zero, Limit::Finite(b * u.min(0.95))),
        |b, u| (Limit::Finite(b * u), Limit::Infinity),
        |_, _| (Limit::Zero, Limit::Infinity),
        |_, _| (Limit::Zero, Limit::Branch),
    ];
    let mut worst_case = [0.0f64; 4];
    let mut worst_add = 0.0f64;
    for (i, shape) in shapes.iter().enumerate() {
        let mut valid = 0;
        while valid < LEMMA_DRAWS {
            let (a, b, c, d, u) = draw(&mut rng);
            let (t1, t2) = shape(b, u);
            let Ok(case) = LemmaIntegralCase::new(t1, t2, a, b, c, d) else { continue };
            valid += 1;
            let v = lemma_integral(&case).unwrap();
            let o = lemma_oracle(a, b, c, d, limit_value(t1, b), limit_value(t2, b));
            worst_case[i] = worst_case[i].max((v - o).norm() / o.norm());
            if i == 0 {
                let t = limit_value(t2, b);
                let right = lemma_integral(&LemmaIntegralCase::new(Limit::Finite(t), Limit::Infinity, a, b, c, d).unwrap());
                let whole = lemma_integral(&LemmaIntegralCase::new(Limit::Zero, Limit::Infinity, a, b, c, d).unwrap());
                let (right, whole) = (right.unwrap(), whole.unwrap());
                worst_add = worst_add.max((v + right - whole).norm() / whole.norm());
            }
        }
    }
    let exact_ok = worst_case.iter().all(|e| *e < LEMMA_REL);
    let add_ok = worst_add < LEMMA_REL;
    let (mut large, mut small) = (0.0f64, 0.0f64);
    for _ in 0..LEMMA_DRAWS {
        let (a, _, c, d, _) = draw(&mut rng);
        let c = c.abs();
        let large_bd = 10f64.powf(rng.random_range(1.7..3.0));
        let small_bd = 10f64.powf(rng.random_range(-4.0..-1.7));
        for (bd, slot) in [(large_bd, 0), (small_bd, 1)] {
            let case = LemmaIntegralCase::new(Limit::Zero, Limit::Infinity, a, bd / d, c, d).unwrap();
            let exact = lemma_integral(&case).unwrap();
            let (approx, branch) = lemma_integral_asymptotic(&case).unwrap();
            let e = (approx - exact).norm() / exact.norm();
            match (slot, branch) {
                (0, LemmaBranch::LargeArgument) => large = large.max(e),
                (1, LemmaBranch::SmallArgument) => small = small.max(e),
                _ => panic!("wrong branch {branch:?} at BD={bd}"),
            }
        }
    }
    let large_ok = large < LEMMA_APPROX_REL;
    let small_ok = small < LEMMA_APPROX_REL;
    let pass = exact_ok && add_ok && large_ok && small_ok;
    let detail = format!(
        "cases (0,T) (T,inf) (0,inf) (0,B) worst rel [{}]; additivity {worst_add:.1e}; \
         |BD|>50 approx worst {large:.3} ({}); |BD|<0.02 approx worst {small:.2e} ({})",
        worst_case.iter().map(|e| format!("{e:.1e}")).collect::<Vec<_>>().join(", "),
        if large_ok { "ok" } else { "over 2%" },
        if small_ok { "ok" } else { "over 2%" },
    );
    report(6, pass, &detail);
    assert!(pass, "{detail}");
}

fn fig5_views() -> Vec<(String, WardenChannel)> {
    let s = scenario("paper_sec6.json");
    let g = GameSpec::from_scenario(&s).unwrap();
    let base = PowerAllocation::equal_split(g.k(), g.p_t, g.p_j);
    let jtpa = &sec6_fig5().jtpa.alloc;
    let mut out = Vec::new();
    for k in 0..g.k() {
        out.push((format!("U{} equal split", k + 1), g.warden_view(base.p_a[k], base.p_j[k]).unwrap()));
        out.push((format!("U{} JTPA", k + 1), g.warden_view(jtpa.p_a[k], jtpa.p_j[k]).unwrap()));
    }
    out
}

#[test]
fn criterion_07_dep_convexity() {
    let _g = serial();
    let mut worst = f64::INFINITY;
    let mut unimodal = true;
    let mut rise = (1.0f64, 0.0f64);
    for (_, w) in fig5_views() {
        let k2 = w.link_w.kappa2;
        // log-spaced in ε - κ² so the region next to κ² is resolved
        let grid: Vec<f64> = (0..CONVEX_POINTS)
            .map(|i| k2 + 19.0 * k2 * 10f64.powf(-5.0 + 5.0 * i as f64 / (CONVEX_POINTS - 1) as f64))
            .collect();
        let r = dep_threshold_convexity_probe(&w, &grid).unwrap();
        worst = worst.min(r.min_second_difference);
        unimodal &= r.unimodal;
        rise = (rise.0.min(r.xi[r.argmin]), rise.1.max(r.xi[r.xi.len() - 1]));
    }
    let pass = worst >= CONVEX_FLOOR;
    let detail = format!(
        "min second difference {worst:.3e} over (k2, 20 k2); unimodal {unimodal}; xi rises from {:.4} to {:.8} \
         past its minimum",
        rise.0, rise.1
    );
    report(7, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_08_pso_threshold() {
    let _g = serial();
    let s = scenario("paper_sec6.json");
    let cfg = pso(&s);
    let views = fig5_views();
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for (_, w) in &views {
        let (_, xi_pso) = warden_optimal_threshold(w, &cfg).unwrap();
        let k2 = w.link_w.kappa2;
        let scale = w.excess_scale();
        let xi_grid = (0..GRID_POINTS)
            .map(|i| {
                let e = k2 + scale * 10f64.powf(-4.0 + 8.0 * i as f64 / (GRID_POINTS - 1) as f64);
                detection_error_probability(w, e).unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        worst = worst.max((xi_pso - xi_grid).abs());
    }
    let elapsed = t0.elapsed();
    let pass = worst < PSO_XI_ABS && elapsed < PSO_LIMIT;
    let detail = format!("{} warden views, worst |xi_pso - xi_grid| {worst:.2e}, {:.1}s", views.len(), elapsed.as_secs_f64());
    report(8, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_09_allocation_covertness() {
    let _g = serial();
    let s = scenario("paper_sec6.json");
    let g = GameSpec::from_scenario(&s).unwrap();
    let f = sec6_fig5();
    let check = feasibility_check(&g, &f.jtpa.alloc).unwrap();
    let xis: Vec<f64> = check.users.iter().map(|u| u.xi).collect();
    let covert = xis.iter().all(|x| *x >= XI_TH);
    let inc: Vec<f64> = f.summary.iter().map(|r| r.increase_pct).collect();
    let positive = inc.iter().all(|p| *p > 0.0);
    let ordered = inc[0] > inc[2] && inc[2] > inc[1];
    let pass = covert && positive && ordered;
    let detail = format!(
        "grid-searched xi {xis:.7?} (>= {XI_TH}: {covert}); increases vs equal split {inc:.2?}% \
         (positive: {positive}, U1 > U3 > U2: {ordered})"
    );
    report(9, pass, &detail);
    assert!(pass, "{detail}");
}

/// One CLI pass over every experiment, with per-experiment wall time.
struct CliRun {
    dir: tempfile::TempDir,
    times: HashMap<&'static str, Duration>,
}

const EXPERIMENTS: [(&str, &str); 6] = [
    ("table2", "paper_sec6.json"),
    ("fig2", "fig2.json"),
    ("fig5", "paper_sec6.json"),
    ("fig6", "paper_sec6.json"),
    ("fig7", "paper_sec6.json"),
    ("fig8", "fig8.json"),
];

fn cli_run() -> CliRun {
    let dir = tempfile::tempdir().unwrap();
    let mut times = HashMap::new();
    for (exp, scen) in EXPERIMENTS {
        let t0 = Instant::now();
        let out = Command::new(env!("CARGO_BIN_EXE_covertlink"))
            .args([exp, "--scenario"])
            .arg(scenario_path(scen))
            .args(["--seed", "1", "--out"])
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(out.status.success(), "{exp}: {}", String::from_utf8_lossy(&out.stderr));
        times.insert(exp, t0.elapsed());
    }
    CliRun { dir, times }
}

fn first_cli_run() -> &'static CliRun {
    static R: OnceLock<CliRun> = OnceLock::new();
    R.get_or_init(cli_run)
}

fn read_csv(path: &Path) -> Vec<HashMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    r.records().map(|rec| headers.iter().map(String::from).zip(rec.unwrap().iter().map(String::from)).collect()).collect()
}

fn num(row: &HashMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap()
}

/// `(x, utility)` series keyed by the series label, sorted by `x`.
fn series(rows: &[HashMap<String, String>], key: &str, x: &str) -> Vec<(String, Vec<(f64, f64)>)> {
    let mut m: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for r in rows {
        let label = r[key].clone();
        let pt = (num(r, x), num(r, "utility_jtpa"));
        match m.iter_mut().find(|(l, _)| *l == label) {
            Some((_, v)) => v.push(pt),
            None => m.push((label, vec![pt])),
        }
    }
    for (_, v) in &mut m {
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    m
}

fn nondecreasing(v: &[(f64, f64)]) -> bool {
    v.windows(2).all(|p| p[1].1 >= p[0].1 * (1.0 - TREND_REL))
}

fn utility_at(v: &[(f64, f64)], x: f64) -> f64 {
    v.iter().find(|p| p.0 == x).unwrap().1
}

#[test]
fn criterion_10_budget_trends() {
    let _g = serial();
    let run = first_cli_run();
    let elapsed = run.times["fig6"] + run.times["fig7"];
    let f6 = read_csv(&run.dir.path().join("fig6.csv"));
    let f7 = read_csv(&run.dir.path().join("fig7.csv"));
    let s6 = series(&f6, "xi_th", "p_j_dbw");
    let s7 = series(&f7, "p_j_dbw", "p_t_dbw");
    let trend6 = s6.iter().all(|(_, v)| nondecreasing(v));
    let trend7 = s7.iter().all(|(_, v)| nondecreasing(v));
    let xi75 = &s6.iter().find(|(l, _)| l.parse::<f64>() == Ok(0.75)).unwrap().1;
    let gain6 = 100.0 * (utility_at(xi75, 30.0) / utility_at(xi75, 10.0) - 1.0);
    let at_pt30 = |pj: f64| {
        let v = &s7.iter().find(|(l, _)| l.parse::<f64>() == Ok(pj)).unwrap().1;
        utility_at(v, 30.0)
    };
    let gain7 = 100.0 * (at_pt30(20.0) / at_pt30(10.0) - 1.0);
    let g6_ok = (gain6 - FIG6_GAIN_PCT).abs() <= GAIN_PP;
    let g7_ok = (gain7 - FIG7_GAIN_PCT).abs() <= GAIN_PP;
    let pass = trend6 && trend7 && g6_ok && g7_ok && elapsed < SWEEP_LIMIT;
    let detail = format!(
        "nondecreasing in P_J: {trend6}, in P_T: {trend7}; gain P_J 10->30 at xi 0.75 {gain6:.4e}% \
         (target {FIG6_GAIN_PCT}+-{GAIN_PP}); gain P_J 10->20 at P_T 30 {gain7:.4e}% \
         (target {FIG7_GAIN_PCT}+-{GAIN_PP}); {:.0}s",
        elapsed.as_secs_f64()
    );
    report(10, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_11_jtpa_convergence() {
    let _g = serial();
    let mut pass = true;
    let mut detail = String::new();
    for (name, _, j, p) in allocations() {
        let mono = j.round_trace.windows(2).all(|w| w[1] >= w[0]);
        let conv = j.converged && j.rounds <= MAX_ROUNDS;
        let ppa_ok = p.utility() >= j.utility() * (1.0 - PPA_SLACK);
        pass &= mono && conv && ppa_ok;
        detail += &format!(
            " {name}: monotone {mono}, converged in {} rounds {conv}, PPA/JTPA utility {:.4};",
            j.rounds,
            p.utility() / j.utility()
        );
    }
    report(11, pass, detail.trim());
    assert!(pass, "{detail}");
}

fn symmetric_scenario() -> Scenario {
    let text = std::fs::read_to_string(scenario_path("paper_sec6.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let mut user = v["users"][0].clone();
    v["name"] = "symmetric".into();
    v["uav"] = serde_json::json!([0.0, 0.0, 20.0]);
    v["jammer"] = serde_json::json!([0.0, 12.0, 0.0]);
    v["warden"]["position"] = serde_json::json!([0.0, -6.0, 0.0]);
    user["position"] = serde_json::json!([-5.0, 4.0, 0.0]);
    let mut mirror = user.clone();
    mirror["position"] = serde_json::json!([5.0, 4.0, 0.0]);
    v["users"] = serde_json::json!([user, mirror]);
    v["game"] = serde_json::json!({ "r_th": [0.0, 0.0], "xi_th": [0.95, 0.95] });
    load_scenario(&v.to_string()).unwrap()
}

fn max_gap(a: &PowerAllocation, b: &PowerAllocation, g: &GameSpec) -> f64 {
    let ga = a.p_a.iter().zip(&b.p_a).map(|(x, y)| (x - y).abs() / g.p_t).fold(0.0, f64::max);
    let gj = a.p_j.iter().zip(&b.p_j).map(|(x, y)| (x - y).abs() / g.p_j).fold(0.0, f64::max);
    ga.max(gj)
}

#[test]
fn criterion_12_bargaining_axioms() {
    let _g = serial();
    // individual rationality
    let mut ir = true;
    for (_, g, j, p) in allocations() {
        for r in [j, p] {
            ir &= r.outcomes.iter().zip(&g.r_th).all(|(o, t)| o.rate > *t);
        }
    }
    // symmetry
    let s = symmetric_scenario();
    let g = GameSpec::from_scenario(&s).unwrap();
    let cfg = pso(&s);
    let mut sym = 0.0f64;
    for r in [jtpa_allocate(&g, &cfg, RHO, MAX_ROUNDS).unwrap(), ppa_allocate(&g, &cfg).unwrap()] {
        let a = &r.alloc;
        sym = sym.max(((a.p_a[0] - a.p_a[1]).abs() / g.p_t).max((a.p_j[0] - a.p_j[1]).abs() / g.p_j));
    }
    let sym_ok = sym < ALLOC_TOL;
    // invariance of the argmax under positive rescaling of the surpluses
    let s6 = scenario("paper_sec6.json");
    let g6 = GameSpec::from_scenario(&s6).unwrap();
    let scaled = GameSpec { utility_scale: vec![0.37, 4.2, 19.0], ..g6.clone() };
    let cfg6 = pso(&s6);
    let (_, _, j6, p6) = &allocations()[0];
    let js = jtpa_allocate(&scaled, &cfg6, RHO, MAX_ROUNDS).unwrap();
    let ps = ppa_allocate(&scaled, &cfg6).unwrap();
    let inv = max_gap(&j6.alloc, &js.alloc, &g6).max(max_gap(&p6.alloc, &ps.alloc, &g6));
    let inv_ok = inv < ALLOC_TOL;
    let pass = ir && sym_ok && inv_ok;
    let detail = format!(
        "IR {ir}; SYM max asymmetry {sym:.2e} of budget; INV max allocation shift {inv:.2e} of budget"
    );
    report(12, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_13_cli_determinism() {
    let _g = serial();
    let first = first_cli_run();
    let second = cli_run();
    let mut files: Vec<_> = std::fs::read_dir(first.dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    files.sort();
    let differing: Vec<String> = files
        .iter()
        .filter(|f| std::fs::read(first.dir.path().join(f)).ok() != std::fs::read(second.dir.path().join(f)).ok())
        .map(|f| f.to_string_lossy().into_owned())
        .collect();
    let pass = differing.is_empty() && files.len() >= EXPERIMENTS.len();
    let detail = format!("{} CSV files compared, differing: {differing:?}", files.len());
    report(13, pass, &detail);
    assert!(pass, "{detail}");
}
