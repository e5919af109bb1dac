//! Scenario documents: geometry, fading, budgets and game settings.
//!
//! Power-like fields accept either a dB value (`*_db`, `*_dbw`) or a linear
//! value; exactly one of the pair must be present. Everything is converted to
//! linear units once, at load.

use serde::{Deserialize, Serialize};

use crate::covert_metrics::WardenChannel;
use crate::error::{Error, Result};
use crate::fading::{FisherFParams, FtrParams};
use crate::montecarlo::McConfig;
use crate::sinr_stats::{LinkCoefficients, TruncationPolicy, UserChannel};

pub type Point = [f64; 3];

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// A value given either in dB or linearly.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Level {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<f64>,
}

impl Level {
    pub fn linear(v: f64) -> Self {
        Level { db: None, linear: Some(v) }
    }

    pub fn db(v: f64) -> Self {
        Level { db: Some(v), linear: None }
    }

    fn resolve(&self, path: &str) -> Result<f64> {
        match (self.db, self.linear) {
            (Some(d), None) if d.is_finite() => Ok(db_to_linear(d)),
            (None, Some(l)) if l.is_finite() && l >= 0.0 => Ok(l),
            (Some(_), Some(_)) => Err(schema(path, "give either `db` or `linear`, not both")),
            (None, None) => Err(schema(path, "missing `db` or `linear` value")),
            _ => Err(schema(path, "value must be finite (and nonnegative when linear)")),
        }
    }
}

fn schema(path: &str, msg: &str) -> Error {
    Error::Schema { path: path.to_string(), msg: msg.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FtrDoc {
    pub m: f64,
    pub k: f64,
    pub delta: f64,
    /// Average power `2σ²(1+K)`.
    pub mean_power: Level,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FisherDoc {
    pub m_f: f64,
    pub m_s: f64,
    pub z_bar: Level,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub position: Point,
    /// Path-loss exponent of the UAV link to this node.
    pub alpha_a: f64,
    /// Path-loss exponent of the jammer link to this node.
    pub alpha_j: f64,
    pub ftr: FtrDoc,
    pub fisher: FisherDoc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetDoc {
    pub p_t: Level,
    pub p_j: Level,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameDoc {
    pub r_th: Vec<f64>,
    pub xi_th: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsoDoc {
    pub swarm: usize,
    pub iters: usize,
    pub inertia: f64,
    pub c1: f64,
    pub c2: f64,
    pub vmax_fraction: f64,
}

impl Default for PsoDoc {
    fn default() -> Self {
        PsoDoc { swarm: 30, iters: 60, inertia: 0.72, c1: 1.49, c2: 1.49, vmax_fraction: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalPolicy {
    pub truncation_tol: f64,
    pub truncation_cap: usize,
    pub mc: McConfig,
    pub pso: PsoDoc,
    /// JTPA stopping gap and round cap.
    pub rho: f64,
    pub max_rounds: usize,
}

impl Default for EvalPolicy {
    fn default() -> Self {
        EvalPolicy {
            truncation_tol: 1e-8,
            truncation_cap: 200,
            mc: McConfig { samples: 1_000_000, seed: 1, workers: 0 },
            pso: PsoDoc::default(),
            rho: 1e-3,
            max_rounds: 20,
        }
    }
}

/// One row of the truncation-error table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationRow {
    pub m: f64,
    pub m_f: f64,
    pub p_a: f64,
    pub sigma2: f64,
    pub k: f64,
    pub delta: f64,
    /// Value printed for comparison, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub printed_m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub printed_error: Option<f64>,
}

/// Sweep settings for the experiments; every field is optional and the
/// runner falls back to the scenario values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Experiments {
    pub table2: Vec<TruncationRow>,
    pub table2_tol: Option<f64>,
    /// Transmit powers (dBW) and jamming powers (dBW) of the outage sweep.
    pub fig2_p_a_dbw: Vec<f64>,
    pub fig2_p_j_dbw: Vec<f64>,
    pub fig2_gamma_th: Option<f64>,
    /// Threshold grid points per user for the detection curves.
    pub fig5_points: Option<usize>,
    pub fig6_p_j_dbw: Vec<f64>,
    pub fig6_xi_th: Vec<f64>,
    pub fig6_p_t_dbw: Option<f64>,
    pub fig7_p_t_dbw: Vec<f64>,
    pub fig7_p_j_dbw: Vec<f64>,
    pub fig7_xi_th: Option<f64>,
    /// UAV horizontal grid for the location map; the height stays fixed.
    pub fig8_x: Vec<f64>,
    pub fig8_y: Vec<f64>,
}

/// Scenario document as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(default)]
    pub name: String,
    pub uav: Point,
    pub jammer: Point,
    pub users: Vec<NodeDoc>,
    pub warden: NodeDoc,
    pub kappa2: Level,
    pub budgets: BudgetDoc,
    pub game: GameDoc,
    #[serde(default)]
    pub eval_policy: EvalPolicy,
    #[serde(default)]
    pub experiments: Experiments,
}

/// A receiving node in linear units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub position: Point,
    pub alpha_a: f64,
    pub alpha_j: f64,
    pub ftr: FtrParams,
    pub fisher: FisherFParams,
    /// `D_a^{-α_a}` and `D_j^{-α_j}`.
    pub gain_a: f64,
    pub gain_j: f64,
}

/// Validated scenario, all values linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub uav: Point,
    pub jammer: Point,
    pub users: Vec<Node>,
    pub warden: Node,
    pub kappa2: f64,
    pub p_t: f64,
    pub p_j: f64,
    pub r_th: Vec<f64>,
    pub xi_th: Vec<f64>,
    pub policy: EvalPolicy,
    pub experiments: Experiments,
    source: ScenarioDoc,
}

/// Which receiver a link budget is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkEnd {
    User(usize),
    Warden,
}

pub fn distance(a: Point, b: Point) -> f64 {
    a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn node(doc: &NodeDoc, uav: Point, jammer: Point, path: &str) -> Result<Node> {
    if !doc.position.iter().all(|v| v.is_finite()) {
        return Err(schema(&format!("{path}.position"), "coordinates must be finite"));
    }
    let d_a = distance(uav, doc.position);
    let d_j = distance(jammer, doc.position);
    if !(d_a > 0.0) {
        return Err(schema(&format!("{path}.position"), "distance to the UAV must be positive"));
    }
    if !(d_j > 0.0) {
        return Err(schema(&format!("{path}.position"), "distance to the jammer must be positive"));
    }
    if d_a < 1.0 || d_j < 1.0 {
        eprintln!("warning: {path} is closer than 1 m to a transmitter; path loss amplifies");
    }
    for (name, a) in [("alpha_a", doc.alpha_a), ("alpha_j", doc.alpha_j)] {
        if !(a > 0.0 && a.is_finite()) {
            return Err(schema(&format!("{path}.{name}"), "path-loss exponent must be positive"));
        }
    }
    let mean = doc.ftr.mean_power.resolve(&format!("{path}.ftr.mean_power"))?;
    let ftr = FtrParams::from_average_power(doc.ftr.m, doc.ftr.k, doc.ftr.delta, mean)
        .map_err(|e| schema(&format!("{path}.ftr"), &e.to_string()))?;
    let z_bar = doc.fisher.z_bar.resolve(&format!("{path}.fisher.z_bar"))?;
    let fisher = FisherFParams::new(doc.fisher.m_f, doc.fisher.m_s, z_bar)
        .map_err(|e| schema(&format!("{path}.fisher"), &e.to_string()))?;
    Ok(Node {
        position: doc.position,
        alpha_a: doc.alpha_a,
        alpha_j: doc.alpha_j,
        ftr,
        fisher,
        gain_a: d_a.powf(-doc.alpha_a),
        gain_j: d_j.powf(-doc.alpha_j),
    })
}

impl ScenarioDoc {
    pub fn into_scenario(self) -> Result<Scenario> {
        if self.users.is_empty() {
            return Err(schema("users", "at least one user is required"));
        }
        let k = self.users.len();
        let users = self
            .users
            .iter()
            .enumerate()
            .map(|(i, u)| node(u, self.uav, self.jammer, &format!("users[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let warden = node(&self.warden, self.uav, self.jammer, "warden")?;
        let kappa2 = self.kappa2.resolve("kappa2")?;
        if !(kappa2 > 0.0) {
            return Err(schema("kappa2", "noise power must be positive"));
        }
        let p_t = self.budgets.p_t.resolve("budgets.p_t")?;
        let p_j = self.budgets.p_j.resolve("budgets.p_j")?;
        if self.game.r_th.len() != k {
            return Err(schema("game.r_th", &format!("expected {k} entries")));
        }
        if self.game.xi_th.len() != k {
            return Err(schema("game.xi_th", &format!("expected {k} entries")));
        }
        if self.game.r_th.iter().any(|r| !(*r >= 0.0)) {
            return Err(schema("game.r_th", "disagreement rates must be nonnegative"));
        }
        if self.game.xi_th.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
            return Err(schema("game.xi_th", "covertness floors must lie in (0, 1)"));
        }
        let source = self.clone();
        let p = &self.eval_policy;
        if !(p.truncation_tol > 0.0) || p.truncation_cap == 0 {
            return Err(schema("eval_policy", "truncation tolerance and cap must be positive"));
        }
        Ok(Scenario {
            name: self.name,
            uav: self.uav,
            jammer: self.jammer,
            users,
            warden,
            kappa2,
            p_t,
            p_j,
            r_th: self.game.r_th,
            xi_th: self.game.xi_th,
            policy: self.eval_policy,
            experiments: self.experiments,
            source,
        })
    }
}

/// Parses and validates a scenario document.
pub fn load_scenario(text: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: ScenarioDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Schema { path, msg: e.into_inner().to_string() }
    })?;
    doc.into_scenario()
}

impl Scenario {
    pub fn k(&self) -> usize {
        self.users.len()
    }

    /// Document the scenario was loaded from, with any later edits applied.
    pub fn to_doc(&self) -> ScenarioDoc {
        self.source.clone()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("scenario serializes")
    }

    /// Same scenario with the UAV moved; path gains are recomputed.
    pub fn with_uav(&self, uav: Point) -> Result<Scenario> {
        let mut doc = self.to_doc();
        doc.uav = uav;
        doc.into_scenario()
    }

    pub fn truncation(&self) -> TruncationPolicy {
        TruncationPolicy { tol: self.policy.truncation_tol, cap: self.policy.truncation_cap }
    }

    fn node(&self, end: LinkEnd) -> Result<&Node> {
        match end {
            LinkEnd::User(k) => self.users.get(k).ok_or_else(|| Error::param(format!("no user {k}"))),
            LinkEnd::Warden => Ok(&self.warden),
        }
    }

    /// `C₁ = D_a^{-α_a} P_a`, `C₂ = D_j^{-α_j} P_j` for one receiver.
    pub fn link_budget(&self, end: LinkEnd, p_a: f64, p_j: f64) -> Result<LinkCoefficients> {
        let n = self.node(end)?;
        LinkCoefficients::new(n.gain_a * p_a, n.gain_j * p_j, self.kappa2, &n.fisher)
    }

    pub fn user_channel(&self, k: usize, p_a: f64, p_j: f64) -> Result<UserChannel> {
        let n = self.node(LinkEnd::User(k))?;
        UserChannel::new(n.ftr, n.fisher, self.link_budget(LinkEnd::User(k), p_a, p_j)?, self.truncation())
    }

    /// Warden view of user `k`'s antenna at powers `(p_a, p_j)`.
    pub fn warden_channel(&self, p_a: f64, p_j: f64) -> Result<WardenChannel> {
        let n = &self.warden;
        WardenChannel::new(n.ftr, n.fisher, self.link_budget(LinkEnd::Warden, p_a, p_j)?, self.truncation())
    }
}
