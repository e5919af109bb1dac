use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use covertlink_core::covert_metrics::{covert_rate, detection_error_components, optimal_threshold};
use covertlink_core::experiments::{run_experiment, Experiment, Overrides};
use covertlink_core::optimize::{feasibility_check, jtpa_allocate, ppa_allocate, GameSpec, PowerAllocation, PsoConfig};
use covertlink_core::scenario::{db_to_linear, load_scenario, Scenario};
use covertlink_core::sinr_stats::{sinr_cdf, sinr_pdf};
use covertlink_core::Error;
use serde_json::json;

/// Covert-link metrics, power allocation and figure reproduction.
#[derive(Parser)]
#[command(name = "covertlink", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Truncation terms and residuals.
    Table2(ExperimentArgs),
    /// Outage probability versus transmit power.
    Fig2(ExperimentArgs),
    /// Detection error versus threshold, before and after allocation.
    Fig5(ExperimentArgs),
    /// Utility versus jamming budget.
    Fig6(ExperimentArgs),
    /// Utility versus transmit budget.
    Fig7(ExperimentArgs),
    /// Utility over UAV positions.
    Fig8(ExperimentArgs),
    /// Evaluate one metric for one user.
    Eval(EvalArgs),
    /// Run a power allocation algorithm.
    Optimize(OptimizeArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Seed for Monte Carlo and the swarms.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo sample count (0 disables Monte Carlo columns).
    #[arg(long)]
    samples: Option<usize>,
    /// Series truncation tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Output directory for the CSV files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Cdf,
    Pdf,
    Dep,
    Rate,
}

#[derive(Args)]
struct EvalArgs {
    metric: Metric,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// User index, starting at 1.
    #[arg(long)]
    user: usize,
    /// SINR point for `cdf` and `pdf`.
    #[arg(long, conflicts_with = "epsilon")]
    gamma: Option<f64>,
    /// Warden threshold for `dep`; the warden's optimum when omitted.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Transmit power for the user in dBW (default: equal split of P_T).
    #[arg(long, allow_hyphen_values = true)]
    p_a_dbw: Option<f64>,
    /// Jamming power for the user in dBW (default: equal split of P_J).
    #[arg(long, allow_hyphen_values = true)]
    p_j_dbw: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    Ppa,
    Jtpa,
}

#[derive(Args)]
struct OptimizeArgs {
    algorithm: Algorithm,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Stopping gap between successive rounds.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    max_rounds: Option<usize>,
}

fn load(a: &ScenarioArgs) -> Result<Scenario, Error> {
    let text = std::fs::read_to_string(&a.scenario)
        .map_err(|e| Error::Io(format!("{}: {e}", a.scenario.display())))?;
    let s = load_scenario(&text)?;
    Overrides { seed: a.seed, samples: a.samples, tol: a.tol }.apply(&s)
}

fn experiment(name: Experiment, a: &ExperimentArgs) -> Result<(), Error> {
    let s = load(&a.scenario)?;
    for p in run_experiment(name, &s, &a.out)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<(), Error> {
    let s = load(&a.scenario)?;
    if a.user == 0 || a.user > s.k() {
        return Err(Error::InvalidParameter(format!("--user must lie in 1..={}", s.k())));
    }
    let k = a.user - 1;
    let n = s.k() as f64;
    let p_a = a.p_a_dbw.map_or(s.p_t / n, db_to_linear);
    let p_j = a.p_j_dbw.map_or(s.p_j / n, db_to_linear);
    let need_gamma = || a.gamma.ok_or_else(|| Error::InvalidParameter("--gamma is required".into()));
    let out = match a.metric {
        Metric::Cdf => {
            let g = need_gamma()?;
            json!({ "user": a.user, "gamma": g, "cdf": sinr_cdf(&s.user_channel(k, p_a, p_j)?, g)? })
        }
        Metric::Pdf => {
            let g = need_gamma()?;
            json!({ "user": a.user, "gamma": g, "pdf": sinr_pdf(&s.user_channel(k, p_a, p_j)?, g)? })
        }
        Metric::Dep => {
            let w = s.warden_channel(p_a, p_j)?;
            let eps = match a.epsilon {
                Some(e) => e,
                None => optimal_threshold(&w, None)?.0,
            };
            let d = detection_error_components(&w, eps)?;
            json!({ "user": a.user, "epsilon": d.epsilon, "p_fa": d.p_fa, "p_md": d.p_md, "xi": d.xi })
        }
        Metric::Rate => {
            json!({ "user": a.user, "rate": covert_rate(&s.user_channel(k, p_a, p_j)?)? })
        }
    };
    println!("{out}");
    Ok(())
}

fn optimize(a: &OptimizeArgs) -> Result<(), Error> {
    let s = load(&a.scenario)?;
    let g = GameSpec::from_scenario(&s)?;
    let cfg = PsoConfig::from_doc(&s.policy.pso, s.policy.mc.seed);
    let r = match a.algorithm {
        Algorithm::Ppa => ppa_allocate(&g, &cfg)?,
        Algorithm::Jtpa => {
            jtpa_allocate(&g, &cfg, a.rho.unwrap_or(s.policy.rho), a.max_rounds.unwrap_or(s.policy.max_rounds))?
        }
    };
    let report = feasibility_check(&g, &r.alloc)?;
    let baseline = PowerAllocation::equal_split(g.k(), g.p_t, g.p_j);
    let out = json!({
        "allocation": r.alloc,
        "log_utility": r.value,
        "utility": r.utility(),
        "outcomes": r.outcomes,
        "round_trace": r.round_trace,
        "rounds": r.rounds,
        "converged": r.converged,
        "feasibility": report,
        "equal_split": baseline,
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("result serializes"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match &cli.cmd {
        Cmd::Table2(a) => experiment(Experiment::Table2, a),
        Cmd::Fig2(a) => experiment(Experiment::Fig2, a),
        Cmd::Fig5(a) => experiment(Experiment::Fig5, a),
        Cmd::Fig6(a) => experiment(Experiment::Fig6, a),
        Cmd::Fig7(a) => experiment(Experiment::Fig7, a),
        Cmd::Fig8(a) => experiment(Experiment::Fig8, a),
        Cmd::Eval(a) => eval(a),
        Cmd::Optimize(a) => optimize(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Schema { .. } | Error::InvalidParameter(_) => 2,
                Error::Io(_) => 1,
                _ => 3,
            })
        }
    }
}
