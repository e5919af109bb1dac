//! Warden-side detection error probability, covert rate, the truncated
//! power-exponential integral family, and numeric convexity probes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fading::{
    f_cdf, f_expectation, ftr_coefficients, select_truncation_capped, FisherFParams, FtrCoefficients, FtrParams,
};
use crate::quad;
use crate::sinr_stats::{jamming_argument, sinr_cdf_quadrature, LinkCoefficients, MbKernel, TruncationPolicy, UserChannel};
use crate::special_fn::foxh::{mellin_barnes_1d, mellin_barnes_2d, ContourPolicy};
use crate::special_fn::gamma::{
    expint_n, gamma_p, ln_gamma_abs, ln_gamma_mod_2pi, upper_gamma, upper_gamma_cf_scaled,
};
use crate::special_fn::hyper::{beta_fn, kummer_1f1, tricomi_u_negative};

const LN2: f64 = std::f64::consts::LN_2;
const QUAD_ABS: f64 = 1e-13;
const QUAD_REL: f64 = 1e-10;
// Above this the detection error is indistinguishable from the flat tails.
const PLATEAU: f64 = 1.0 - 1e-6;

/// Channel seen by the warden: signal from the UAV, jamming from the jammer.
#[derive(Debug, Clone, PartialEq)]
pub struct WardenChannel {
    pub ftr_w: FtrParams,
    pub fisher_w: FisherFParams,
    pub link_w: LinkCoefficients,
    pub truncation: usize,
    coeffs: FtrCoefficients,
}

impl WardenChannel {
    pub fn new(ftr_w: FtrParams, fisher_w: FisherFParams, link_w: LinkCoefficients, policy: TruncationPolicy) -> Result<Self> {
        let m = select_truncation_capped(&ftr_w, policy.tol, policy.cap)?;
        Self::with_truncation(ftr_w, fisher_w, link_w, m)
    }

    pub fn with_truncation(ftr_w: FtrParams, fisher_w: FisherFParams, link_w: LinkCoefficients, m_terms: usize) -> Result<Self> {
        fisher_w.validate()?;
        let coeffs = ftr_coefficients(&ftr_w, m_terms)?;
        let mut link_w = link_w;
        link_w.omega = link_w.omega_for(&fisher_w);
        Ok(WardenChannel { ftr_w, fisher_w, link_w, truncation: m_terms, coeffs })
    }

    pub fn with_link(&self, c1w: f64, c2w: f64) -> Result<Self> {
        let link_w = LinkCoefficients::new(c1w, c2w, self.link_w.kappa2, &self.fisher_w)?;
        Ok(WardenChannel { link_w, ..self.clone() })
    }

    pub fn coefficients(&self) -> &FtrCoefficients {
        &self.coeffs
    }

    /// Rough scale of `Y_w - κ²` used to place threshold searches.
    pub fn excess_scale(&self) -> f64 {
        self.link_w.c1 * self.ftr_w.mean() + self.link_w.c2 * self.fisher_w.z_bar
    }
}

/// `P_FA = Pr(κ² + C₂w Z_w > ε)`.
pub fn false_alarm_prob(w: &WardenChannel, epsilon: f64) -> f64 {
    let l = &w.link_w;
    let e = epsilon - l.kappa2;
    if e <= 0.0 {
        return 1.0;
    }
    if l.c2 == 0.0 {
        return 0.0;
    }
    (1.0 - f_cdf(&w.fisher_w, e / l.c2).unwrap_or(1.0)).clamp(0.0, 1.0)
}

/// `P_MD = Pr(C₁w X_w + κ² + C₂w Z_w ≤ ε)` by conditioning on the jamming
/// power.
pub fn missed_detection_prob(w: &WardenChannel, epsilon: f64) -> Result<f64> {
    let l = &w.link_w;
    let e = epsilon - l.kappa2;
    if e <= 0.0 {
        return Ok(0.0);
    }
    if !e.is_finite() {
        return Ok(1.0);
    }
    let c = &w.coeffs;
    let b = 2.0 * w.ftr_w.sigma2 * l.c1;
    let v = match (l.c1 == 0.0, l.c2 == 0.0) {
        (true, true) => 1.0,
        (true, false) => f_cdf(&w.fisher_w, e / l.c2)?,
        (false, true) => c.cdf_scaled(e / b),
        (false, false) => {
            f_expectation(&w.fisher_w, |z| c.cdf_scaled(((e - l.c2 * z) / b).max(0.0)), e / l.c2, QUAD_ABS, QUAD_REL)
        }
    };
    if !v.is_finite() || !(-1e-6..=1.0 + 1e-6).contains(&v) {
        return Err(Error::OutOfRange { value: v });
    }
    Ok(v.clamp(0.0, 1.0))
}

/// `P_MD` through its two-variable Mellin-Barnes representation.
///
/// Needs both link coefficients positive.
pub fn missed_detection_prob_mellin(w: &WardenChannel, epsilon: f64) -> Result<f64> {
    let l = &w.link_w;
    let e = epsilon - l.kappa2;
    if e <= 0.0 {
        return Ok(0.0);
    }
    if l.c1 == 0.0 || l.c2 == 0.0 {
        return Err(Error::param("Mellin-Barnes detection form needs C1w, C2w > 0"));
    }
    let (m_f, m_s) = (w.fisher_w.m_f, w.fisher_w.m_s);
    let b = 2.0 * w.ftr_w.sigma2 * l.c1;
    let lr = (l.omega / (m_f * e)).ln();
    let lq = (e / b).ln();
    let weights = &w.coeffs.weights;
    let joint = |s: Complex64, u: Complex64| {
        // Σ_j w_j q^{j+1} Γ(j+1+u) / (Γ(j+1) Γ(j+2-s+u)) by ratio recursion
        let mut term = (lq + ln_gamma_mod_2pi(1.0 + u) - ln_gamma_mod_2pi(2.0 - s + u)).exp();
        let mut sum = term * weights[0];
        let q = lq.exp();
        for (j, wj) in weights.iter().enumerate().skip(1) {
            let jf = j as f64;
            term *= q * (jf + u) / (jf * (jf + 1.0 - s + u));
            sum += term * *wj;
        }
        sum
    };
    let cs = 0.5 * m_f.min(2.0);
    let v = mellin_barnes_2d(
        |s| {
            let s = -s;
            (ln_gamma_mod_2pi(m_f + s) + ln_gamma_mod_2pi(m_s - s) + ln_gamma_mod_2pi(-s) + s * lr).exp()
        },
        |u| (ln_gamma_mod_2pi(-u) + u * lq).exp(),
        |s, u| joint(-s, u),
        [cs, -0.5],
        [cs, 0.5],
        &ContourPolicy { rel_tol: 1e-7, ..ContourPolicy::default() },
    )?;
    let raw = v.value * (-ln_gamma_abs(m_f) - ln_gamma_abs(m_s)).exp();
    if !raw.is_finite() || !(-1e-6..=1.0 + 1e-6).contains(&raw) {
        return Err(Error::OutOfRange { value: raw });
    }
    Ok(raw.clamp(0.0, 1.0))
}

/// Components of the detection error probability at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepValue {
    pub epsilon: f64,
    pub p_fa: f64,
    pub p_md: f64,
    pub xi: f64,
}

pub fn detection_error_components(w: &WardenChannel, epsilon: f64) -> Result<DepValue> {
    if epsilon <= w.link_w.kappa2 {
        return Ok(DepValue { epsilon, p_fa: 1.0, p_md: 0.0, xi: 1.0 });
    }
    let p_fa = false_alarm_prob(w, epsilon);
    let p_md = missed_detection_prob(w, epsilon)?;
    Ok(DepValue { epsilon, p_fa, p_md, xi: p_fa + p_md })
}

/// `ξ(ε) = P_FA + P_MD`.
pub fn detection_error_probability(w: &WardenChannel, epsilon: f64) -> Result<f64> {
    detection_error_components(w, epsilon).map(|d| d.xi)
}

/// Warden best response: `(ε*, ξ(ε*))`.
///
/// A geometric scan in `ε - κ²` brackets the minimum and Brent's method
/// polishes it. With a `hint` (a previous optimum) the bracket is instead
/// grown downhill from the hint, which takes a dozen evaluations when the
/// optimum has moved little.
pub fn optimal_threshold(w: &WardenChannel, hint: Option<f64>) -> Result<(f64, f64)> {
    let k2 = w.link_w.kappa2;
    if w.link_w.c1 == 0.0 {
        // the signal adds nothing: ξ = 1 for every threshold
        return Ok((k2, 1.0));
    }
    let f = |le: f64| detection_error_probability(w, k2 + le.exp());
    if let Some(eps) = hint.filter(|e| *e > k2 && e.is_finite()) {
        if let Some((x, v)) = warm_threshold(&f, (eps - k2).ln())? {
            return Ok((k2 + x.exp(), v));
        }
    }
    let scale = w.excess_scale();
    let (lo, hi, n) = ((scale * 1e-4).ln(), (scale * 1e4).ln(), 49);
    let mut best = (0usize, f64::INFINITY);
    let mut xs = Vec::with_capacity(n);
    for i in 0..n {
        let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let v = f(x)?;
        if v < best.1 {
            best = (i, v);
        }
        xs.push(x);
    }
    let a = xs[best.0.saturating_sub(1)];
    let b = xs[(best.0 + 1).min(n - 1)];
    let (x, v) = polish(&f, a, b, 1e-7)?;
    if v <= best.1 {
        Ok((k2 + x.exp(), v))
    } else {
        Ok((k2 + xs[best.0].exp(), best.1))
    }
}

fn polish<F: Fn(f64) -> Result<f64>>(f: &F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    let mut err = None;
    let r = brent_min(
        |x| match f(x) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                f64::INFINITY
            }
        },
        a,
        b,
        tol,
    );
    match err {
        Some(e) => Err(e),
        None => Ok(r),
    }
}

// Downhill bracket from `c` (log excess threshold); None if no bracket turns
// up within a few doublings, leaving the caller to scan.
fn warm_threshold<F: Fn(f64) -> Result<f64>>(f: &F, c: f64) -> Result<Option<(f64, f64)>> {
    let mut step = 0.25;
    let (mut a, mut b, mut d) = (c - step, c, c + step);
    let (mut fa, mut fb, mut fd) = (f(a)?, f(b)?, f(d)?);
    let mut bracketed = false;
    for _ in 0..10 {
        if fb < fa && fb < fd {
            bracketed = true;
            break;
        }
        step *= 2.0;
        if fa < fd {
            (d, fd, b, fb) = (b, fb, a, fa);
            a = b - step;
            fa = f(a)?;
        } else {
            (a, fa, b, fb) = (b, fb, d, fd);
            d = b + step;
            fd = f(d)?;
        }
    }
    // a bracket on the ξ ≈ 1 shoulder is numerical noise, not the minimum
    if !bracketed || fb > PLATEAU {
        return Ok(None);
    }
    let (x, v) = polish(f, a, d, 1e-5)?;
    Ok(Some(if v <= fb { (x, v) } else { (b, fb) }))
}

/// Brent's parabolic-interpolation minimizer on `[a, b]`.
pub fn brent_min<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const CG: f64 = 0.381_966_011_250_105_1;
    let mut x = a + CG * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e): (f64, f64) = (0.0, 0.0);
    for _ in 0..200 {
        let xm = 0.5 * (a + b);
        let tol1 = tol * (x.abs() + 1.0);
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CG * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            (v, fv, w, fw, x, fx) = (w, fw, x, fx, u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv, w, fw) = (w, fw, u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    (x, fx)
}

// J_n(μ) = μ^n e^μ Γ(-n, μ) = ∫_0^∞ (μg)^n e^{-μg} / (n! (1+g)) dg · n!/... for n = 0..=m.
fn rate_kernels(mu: f64, m: usize) -> Result<Vec<f64>> {
    let mut j = vec![0.0; m + 1];
    if mu <= 1.0 {
        j[0] = mu.exp() * expint_n(1, mu)?;
        for n in 1..=m {
            j[n] = (1.0 - mu * j[n - 1]) / n as f64;
        }
        return Ok(j);
    }
    let k0 = m.min(mu.floor() as usize);
    j[k0] = upper_gamma_cf_scaled(-(k0 as f64), mu)?;
    for k in (1..=k0).rev() {
        j[k - 1] = (1.0 - k as f64 * j[k]) / mu;
    }
    for n in k0 + 1..=m {
        j[n] = (1.0 - mu * j[n - 1]) / n as f64;
    }
    Ok(j)
}

/// Rate given the interference-plus-noise `τ = (κ² + C₂z)/C₁`, in nats:
/// `∫ (1 - F_X(γτ))/(1+γ) dγ`.
fn conditional_rate_nats(c: &FtrCoefficients, mu: f64) -> Result<f64> {
    let m = c.m_used;
    let total = c.cumulative[m];
    let j = rate_kernels(mu, m)?;
    let mut sum = 0.0;
    for n in 0..=m {
        let below = if n == 0 { 0.0 } else { c.cumulative[n - 1] };
        sum += j[n] * (total - below);
    }
    Ok(sum)
}

/// Ergodic covert rate `E[log₂(1+γ)]` in bits/s/Hz.
///
/// Evaluated in closed form conditionally on the jamming power, then
/// averaged over the F-distributed jamming gain.
pub fn covert_rate(ch: &UserChannel) -> Result<f64> {
    let l = &ch.link;
    if l.c1 == 0.0 {
        return Ok(0.0);
    }
    let c = ch.coefficients();
    let s = 2.0 * ch.ftr.sigma2 * l.c1;
    let v = if l.c2 == 0.0 {
        conditional_rate_nats(c, l.kappa2 / s)?
    } else {
        let mut err = None;
        let v = f_expectation(
            &ch.fisher,
            |z| match conditional_rate_nats(c, (l.kappa2 + l.c2 * z) / s) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            },
            f64::INFINITY,
            QUAD_ABS,
            QUAD_REL,
        );
        if let Some(e) = err {
            return Err(e);
        }
        v
    };
    let r = v / LN2;
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::OutOfRange { value: r });
    }
    Ok(r)
}

/// Covert rate through the two-variable Mellin-Barnes representation.
pub fn covert_rate_mellin(ch: &UserChannel) -> Result<f64> {
    let l = &ch.link;
    if l.c1 == 0.0 {
        return Ok(0.0);
    }
    let y = jamming_argument(l.omega, ch.fisher.m_f, l.kappa2)
        .ok_or_else(|| Error::param("Mellin-Barnes form needs 0 < Ω < m_f κ²"))?;
    let x = l.kappa2 / (2.0 * ch.ftr.sigma2 * l.c1);
    let k = MbKernel { weights: &ch.coefficients().weights, m_f: ch.fisher.m_f, m_s: ch.fisher.m_s };
    let (lx, ly) = (x.ln(), y.ln());
    let c2 = 0.5 * k.m_f;
    let v = mellin_barnes_2d(
        |s| {
            (s * lx + ln_gamma_mod_2pi(k.m_s - s) + ln_gamma_mod_2pi(-s) + ln_gamma_mod_2pi(s)).exp() * k.series(s)
        },
        |s| k.second(s, ly),
        |a, b| k.joint(a, b),
        [-0.5, c2],
        [0.5, c2],
        &ContourPolicy { rel_tol: 1e-7, ..ContourPolicy::default() },
    )?;
    let omega = y * ch.fisher.m_f * l.kappa2 / (1.0 + y);
    let r = -k.ln_prefactor(l.kappa2, omega).exp() * v.value / LN2;
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::OutOfRange { value: r });
    }
    Ok(r)
}

/// Covert rate from its definition, `∫ (1 - F(γ)) / ((1+γ) ln 2) dγ`, by
/// adaptive quadrature over the SINR CDF (itself from its conditional
/// integral, so no closed form is shared with [`covert_rate`]).
pub fn covert_rate_quadrature(ch: &UserChannel) -> Result<f64> {
    if ch.link.c1 == 0.0 {
        return Ok(0.0);
    }
    let mut err = None;
    // γ = u/(1-u) maps the half line onto [0, 1)
    let r = quad::integrate(
        |u| {
            if u >= 1.0 {
                return 0.0;
            }
            let g = u / (1.0 - u);
            match sinr_cdf_quadrature(ch, g) {
                Ok(f) => (1.0 - f) / ((1.0 + g) * (1.0 - u) * (1.0 - u)),
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        1.0,
        1e-9,
        1e-7,
    );
    if let Some(e) = err {
        return Err(e);
    }
    Ok(r.value / LN2)
}

/// Rate from the Mellin-Barnes form, checked against the conditional closed
/// form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckedRate {
    pub value: f64,
    pub mellin: Option<f64>,
    pub reference: f64,
    /// True when the two disagreed by more than 1% and the reference won.
    pub fallback: bool,
}

/// Mellin-Barnes rate with an automatic cross-check; the reference value is
/// preferred (and the disagreement reported) when they differ by over 1%
/// or the contour evaluation fails.
pub fn covert_rate_checked(ch: &UserChannel) -> Result<CheckedRate> {
    let reference = covert_rate(ch)?;
    let mellin = covert_rate_mellin(ch).ok();
    let ok = matches!(mellin, Some(v) if (v - reference).abs() <= 0.01 * reference.abs());
    Ok(CheckedRate { value: if ok { mellin.unwrap_or(reference) } else { reference }, mellin, reference, fallback: !ok })
}

/// Integration limit of the power-exponential integral family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Limit {
    Zero,
    Finite(f64),
    /// The branch point `B` itself.
    Branch,
    Infinity,
}

/// `∫_{T₁}^{T₂} t^A (B - t)^C e^{-Dt} dt` with `(B - t)^C` taken on the
/// principal branch, `|B - t|^C e^{iπC}` for `t > B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaIntegralCase {
    pub t1: Limit,
    pub t2: Limit,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

fn is_nonpos_int(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

impl LemmaIntegralCase {
    pub fn new(t1: Limit, t2: Limit, a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let case = LemmaIntegralCase { t1, t2, a, b, c, d };
        case.validate()?;
        Ok(case)
    }

    /// Checks the case shape and its parameter conditions.
    pub fn validate(&self) -> Result<()> {
        let &LemmaIntegralCase { a, b, c, d, .. } = self;
        if ![a, b, c, d].iter().all(|v| v.is_finite()) {
            return Err(Error::param("integral parameters must be finite"));
        }
        if !(b > 0.0) || !(d > 0.0) {
            return Err(Error::param(format!("need B > 0 and D > 0, got B={b}, D={d}")));
        }
        let need = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::param(msg.to_string())) };
        match (self.t1, self.t2) {
            (Limit::Zero, Limit::Finite(t)) => {
                need(t > 0.0 && t.is_finite(), "upper limit T must be positive")?;
                need(b / t > 1.0, "case (0,T) needs B/T > 1")?;
                need(!is_nonpos_int(c), "case (0,T) needs C off the non-positive integers")?;
                need(a > -1.0, "case (0,T) needs A > -1")
            }
            (Limit::Finite(t), Limit::Infinity) => {
                need(t > 0.0 && t.is_finite(), "lower limit T must be positive")?;
                need(t >= b || c > -1.0, "case (T,∞) with T < B needs C > -1")
            }
            (Limit::Zero, Limit::Infinity) => {
                need(a > -1.0, "case (0,∞) needs A > -1")?;
                need(c > -1.0, "case (0,∞) needs C > -1")
            }
            (Limit::Zero, Limit::Branch) => {
                need(a > -1.0, "case (0,B) needs A > -1")?;
                need(c > -1.0, "case (0,B) needs C > -1")
            }
            _ => Err(Error::param("limits must be (0,T), (T,∞), (0,∞) or (0,B)")),
        }
    }
}

// ∫_0^u t^p e^{-Dt} dt, p > -1.
fn lower_int(p: f64, u: f64, d: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    let s = p + 1.0;
    let x = d * u;
    if x < s + 20.0 {
        let mut term = 1.0 / s;
        let mut sum = term;
        for n in 1..5000 {
            term *= x / (s + n as f64);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        (s * u.ln() - x).exp() * sum
    } else {
        (ln_gamma_abs(s) - s * d.ln()).exp() * gamma_p(s, x)
    }
}

// ∫_v^∞ t^p e^{-Dt} dt, v > 0.
fn upper_int(p: f64, v: f64, d: f64) -> Result<f64> {
    if v.is_infinite() {
        return Ok(0.0);
    }
    let s = p + 1.0;
    let x = d * v;
    // the continued fraction stalls for small x whatever the sign of s
    if x > 0.5 && (x > s + 1.0 || s <= 0.0) {
        Ok((s * v.ln() - x).exp() * upper_gamma_cf_scaled(s, x)?)
    } else {
        Ok(upper_gamma(s, x)? * (-s * d.ln()).exp())
    }
}

// ∫_lo^hi t^p e^{-Dt} dt for 0 ≤ lo ≤ hi ≤ ∞.
fn pow_exp_int(p: f64, lo: f64, hi: f64, d: f64) -> Result<f64> {
    if hi <= lo {
        return Ok(0.0);
    }
    if lo == 0.0 {
        if hi.is_infinite() {
            return Ok((ln_gamma_abs(p + 1.0) - (p + 1.0) * d.ln()).exp());
        }
        return Ok(lower_int(p, hi, d));
    }
    // small intervals away from zero: the series of the lower integral
    // differenced would cancel less than two upper tails
    if hi.is_finite() && p > -1.0 && d * hi < p + 21.0 {
        return Ok(lower_int(p, hi, d) - lower_int(p, lo, d));
    }
    Ok(upper_int(p, lo, d)? - upper_int(p, hi, d)?)
}

// e^{-D·shift} ∫_0^w s^{a-1} e^{Ds} ds, a > 0, summed in log space.
fn growing_int(a: f64, w: f64, d: f64, shift: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let x = d * w;
    let base = -d * shift + a * w.ln();
    let lx = x.ln();
    let n_max = (x + 40.0 * x.sqrt() + 60.0) as usize;
    let mut terms = Vec::with_capacity(n_max);
    let mut peak = f64::NEG_INFINITY;
    for n in 0..=n_max {
        let nf = n as f64;
        let lt = base + nf * lx - ln_gamma_abs(nf + 1.0) - (a + nf).ln();
        peak = peak.max(lt);
        terms.push(lt);
    }
    peak.exp() * terms.iter().map(|t| (t - peak).exp()).sum::<f64>()
}

// Sums Σ_k coef_k f_k with coef_k = binom(e, k) r^k, until the tail is
// negligible.
fn binomial_series<F: FnMut(usize) -> Result<f64>>(e: f64, r: f64, mut f: F) -> Result<f64> {
    let mut coef = 1.0;
    let mut sum = 0.0;
    let mut small = 0;
    for k in 0..4000 {
        if coef == 0.0 {
            return Ok(sum);
        }
        let term = coef * f(k)?;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() || term == 0.0 {
            small += 1;
            if small >= 4 {
                return Ok(sum);
            }
        } else {
            small = 0;
        }
        coef *= (e - k as f64) / (k as f64 + 1.0) * r;
    }
    Err(Error::NonConvergence("binomial expansion of the integral".into()))
}

/// Exact value by convergent expansions on `[0,B/2]`, `[B/2,B]`, `[B,3B/2]`
/// and `[3B/2,∞)`, each intersected with `[lo, hi]`.
fn segment_integral(a: f64, b: f64, c: f64, d: f64, lo: f64, hi: f64) -> Result<Complex64> {
    let clip = |x0: f64, x1: f64| (lo.max(x0), hi.min(x1));
    let mut real = 0.0;
    // t ∈ [0, B/2]: (B-t)^C = B^C Σ binom(C,k) (-t/B)^k
    let (p, q) = clip(0.0, 0.5 * b);
    if q > p {
        real += b.powf(c) * binomial_series(c, -1.0 / b, |k| pow_exp_int(a + k as f64, p, q, d))?;
    }
    // t ∈ [B/2, B]: s = B - t, t^A = B^A Σ binom(A,k) (-s/B)^k
    let (p, q) = clip(0.5 * b, b);
    if q > p {
        let (s1, s2) = (b - q, b - p);
        if c > -1.0 {
            real += b.powf(a)
                * binomial_series(a, -1.0 / b, |k| {
                    let e = c + k as f64 + 1.0;
                    Ok(growing_int(e, s2, d, b) - growing_int(e, s1, d, b))
                })?;
        } else {
            // s1 > 0 here, so the piece is smooth
            real += quad::integrate(|t| t.powf(a) * (b - t).powf(c) * (-d * t).exp(), p, q, 1e-300, 1e-13).value;
        }
    }
    let mut above = 0.0;
    // t ∈ [B, 3B/2]: s = t - B, t^A = B^A Σ binom(A,k) (s/B)^k
    let (p, q) = clip(b, 1.5 * b);
    if q > p {
        let damp = (-d * b).exp();
        if damp > 0.0 {
            above += damp
                * b.powf(a)
                * binomial_series(a, 1.0 / b, |k| pow_exp_int(c + k as f64, p - b, q - b, d))?;
        }
    }
    // t ∈ [3B/2, ∞): (t-B)^C = t^C Σ binom(C,k) (-B/t)^k
    let (p, q) = clip(1.5 * b, f64::INFINITY);
    if q > p {
        above += binomial_series(c, -b, |k| pow_exp_int(a + c - k as f64, p, q, d))?;
    }
    Ok(Complex64::new(real, 0.0) + Complex64::from_polar(above, std::f64::consts::PI * c))
}

fn limit_value(l: Limit, b: f64) -> f64 {
    match l {
        Limit::Zero => 0.0,
        Limit::Finite(t) => t,
        Limit::Branch => b,
        Limit::Infinity => f64::INFINITY,
    }
}

/// Closed form of the half-line case,
/// `Γ(1+A) B^C (-B)^{1+A} U(1+A, 2+A+C, -BD)`, on the branch matching the
/// principal `(B-t)^C`.
pub fn lemma_half_line_closed_form(a: f64, b: f64, c: f64, d: f64) -> Result<Complex64> {
    let u = tricomi_u_negative(1.0 + a, 2.0 + a + c, b * d, false)?;
    let pow = Complex64::from_polar(b.powf(1.0 + a), -std::f64::consts::PI * (1.0 + a));
    let g = ln_gamma_abs(1.0 + a).exp();
    Ok(pow * u * g * b.powf(c))
}

/// Exact value of the integral for a validated case.
pub fn lemma_integral(case: &LemmaIntegralCase) -> Result<Complex64> {
    case.validate()?;
    let &LemmaIntegralCase { a, b, c, d, .. } = case;
    match (case.t1, case.t2) {
        (Limit::Zero, Limit::Branch) => {
            // B^{1+A+C} B(1+A, 1+C) ₁F₁(1+A; 2+A+C; -BD)
            let v = b.powf(1.0 + a + c) * beta_fn(1.0 + a, 1.0 + c) * kummer_1f1(1.0 + a, 2.0 + a + c, -b * d)?;
            Ok(Complex64::new(v, 0.0))
        }
        (Limit::Zero, Limit::Infinity) => {
            let engine = segment_integral(a, b, c, d, 0.0, f64::INFINITY)?;
            // the U closed form loses digits to cancellation at larger BD;
            // keep it only while it reproduces the expansion
            if let Ok(v) = lemma_half_line_closed_form(a, b, c, d) {
                if (v - engine).norm() <= 1e-9 * engine.norm() {
                    return Ok(v);
                }
            }
            Ok(engine)
        }
        (t1, t2) => segment_integral(a, b, c, d, limit_value(t1, b), limit_value(t2, b)),
    }
}

/// Which form [`lemma_integral_asymptotic`] used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LemmaBranch {
    LargeArgument,
    SmallArgument,
    Exact,
}

pub const LEMMA_LARGE_BD: f64 = 50.0;
pub const LEMMA_SMALL_BD: f64 = 0.02;

/// Leading-order form for large `BD`: `Γ(1+A) B^C D^{-1-A}`.
pub fn lemma_large_argument(a: f64, b: f64, c: f64, d: f64) -> f64 {
    (ln_gamma_abs(1.0 + a) + c * b.ln() - (1.0 + a) * d.ln()).exp()
}

/// Two-term small-`BD` form of the half-line integral.
pub fn lemma_small_argument(a: f64, b: f64, c: f64, d: f64) -> Result<Complex64> {
    let z = Complex64::from_polar(b * d, -std::f64::consts::PI);
    let u = crate::special_fn::hyper::tricomi_u_small(1.0 + a, 2.0 + a + c, z);
    let pow = Complex64::from_polar(b.powf(1.0 + a), -std::f64::consts::PI * (1.0 + a));
    Ok(pow * u * ln_gamma_abs(1.0 + a).exp() * b.powf(c))
}

/// Half-line case with the large/small-argument switch at `|BD| > 50` and
/// `|BD| < 0.02`; exact in between.
pub fn lemma_integral_asymptotic(case: &LemmaIntegralCase) -> Result<(Complex64, LemmaBranch)> {
    case.validate()?;
    if (case.t1, case.t2) != (Limit::Zero, Limit::Infinity) {
        return Ok((lemma_integral(case)?, LemmaBranch::Exact));
    }
    let &LemmaIntegralCase { a, b, c, d, .. } = case;
    let bd = b * d;
    if bd > LEMMA_LARGE_BD {
        Ok((Complex64::new(lemma_large_argument(a, b, c, d), 0.0), LemmaBranch::LargeArgument))
    } else if bd < LEMMA_SMALL_BD {
        Ok((lemma_small_argument(a, b, c, d)?, LemmaBranch::SmallArgument))
    } else {
        Ok((lemma_integral(case)?, LemmaBranch::Exact))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub epsilon: Vec<f64>,
    pub xi: Vec<f64>,
    /// Central second differences at the interior grid points.
    pub second_differences: Vec<f64>,
    pub min_second_difference: f64,
    pub min_location: f64,
    /// Grid index of the smallest ξ.
    pub argmin: usize,
    /// ξ decreases up to `argmin` and increases after it.
    pub unimodal: bool,
}

/// Second differences of `ξ(ε)` over the given grid.
pub fn dep_threshold_convexity_probe(w: &WardenChannel, epsilon_grid: &[f64]) -> Result<ConvexityReport> {
    if epsilon_grid.len() < 3 {
        return Err(Error::param("convexity probe needs at least 3 grid points"));
    }
    if epsilon_grid.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(Error::param("threshold grid must be strictly increasing"));
    }
    let xi: Vec<f64> = epsilon_grid.iter().map(|&e| detection_error_probability(w, e)).collect::<Result<_>>()?;
    let mut second = Vec::with_capacity(xi.len() - 2);
    let (mut min_v, mut min_at) = (f64::INFINITY, epsilon_grid[1]);
    for i in 1..xi.len() - 1 {
        let (h0, h1) = (epsilon_grid[i] - epsilon_grid[i - 1], epsilon_grid[i + 1] - epsilon_grid[i]);
        // non-uniform three-point form, scaled to a plain difference on the mean step
        let h = 0.5 * (h0 + h1);
        let d2 = 2.0 * ((xi[i + 1] - xi[i]) / h1 - (xi[i] - xi[i - 1]) / h0) / (h0 + h1) * h * h;
        if d2 < min_v {
            min_v = d2;
            min_at = epsilon_grid[i];
        }
        second.push(d2);
    }
    let argmin = xi.iter().enumerate().fold(0, |b, (i, v)| if *v < xi[b] { i } else { b });
    let slack = 1e-9;
    let unimodal = xi[..=argmin].windows(2).all(|p| p[1] <= p[0] + slack)
        && xi[argmin..].windows(2).all(|p| p[1] >= p[0] - slack);
    Ok(ConvexityReport {
        epsilon: epsilon_grid.to_vec(),
        xi,
        second_differences: second,
        min_second_difference: min_v,
        min_location: min_at,
        argmin,
        unimodal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianPoint {
    pub c1w: f64,
    pub c2w: f64,
    pub epsilon: f64,
    /// `[[ξ₁₁, ξ₁₂], [ξ₁₂, ξ₂₂]]`.
    pub hessian: [[f64; 2]; 2],
    pub determinant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianReport {
    pub points: Vec<HessianPoint>,
    pub max_determinant: f64,
    pub min_d11: f64,
}

/// Finite-difference Hessian of `ξ` in `(C₁w, C₂w)`, with the threshold held
/// at the warden's optimum for each grid point. Steps are relative (1e-3)
/// with one Richardson extrapolation.
pub fn dep_hessian_probe(w: &WardenChannel, c1_grid: &[f64], c2_grid: &[f64]) -> Result<HessianReport> {
    if c1_grid.is_empty() || c2_grid.is_empty() {
        return Err(Error::param("Hessian probe needs nonempty grids"));
    }
    let mut points = Vec::new();
    for &c1 in c1_grid {
        for &c2 in c2_grid {
            if !(c1 > 0.0 && c2 > 0.0) {
                return Err(Error::param(format!("Hessian probe needs positive powers, got ({c1}, {c2})")));
            }
            let (eps, _) = optimal_threshold(&w.with_link(c1, c2)?, None)?;
            let xi = |x: f64, y: f64| -> Result<f64> { detection_error_probability(&w.with_link(x, y)?, eps) };
            let hess = |s: f64| -> Result<[[f64; 2]; 2]> {
                let (h1, h2) = (s * c1, s * c2);
                let f0 = xi(c1, c2)?;
                let d11 = (xi(c1 + h1, c2)? - 2.0 * f0 + xi(c1 - h1, c2)?) / (h1 * h1);
                let d22 = (xi(c1, c2 + h2)? - 2.0 * f0 + xi(c1, c2 - h2)?) / (h2 * h2);
                let d12 = (xi(c1 + h1, c2 + h2)? - xi(c1 + h1, c2 - h2)? - xi(c1 - h1, c2 + h2)?
                    + xi(c1 - h1, c2 - h2)?)
                    / (4.0 * h1 * h2);
                Ok([[d11, d12], [d12, d22]])
            };
            let (coarse, fine) = (hess(2e-3)?, hess(1e-3)?);
            let mut h = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    h[i][j] = (4.0 * fine[i][j] - coarse[i][j]) / 3.0;
                }
            }
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            points.push(HessianPoint { c1w: c1, c2w: c2, epsilon: eps, hessian: h, determinant: det });
        }
    }
    let max_determinant = points.iter().map(|p| p.determinant).fold(f64::NEG_INFINITY, f64::max);
    let min_d11 = points.iter().map(|p| p.hessian[0][0]).fold(f64::INFINITY, f64::min);
    Ok(HessianReport { points, max_determinant, min_d11 })
}

/// Single-variable Mellin-Barnes check of the jamming-free missed detection
/// probability, `F_X(E/C₁w)`, used to validate contour orientation.
pub fn missed_detection_no_jamming_mellin(w: &WardenChannel, epsilon: f64) -> Result<f64> {
    let e = epsilon - w.link_w.kappa2;
    if e <= 0.0 {
        return Ok(0.0);
    }
    let lq = (e / (2.0 * w.ftr_w.sigma2 * w.link_w.c1)).ln();
    let weights = &w.coeffs.weights;
    // P(j+1, q) = 1/(2πi) ∫ Γ(-u) Γ(j+1+u) q^{j+1+u} / (Γ(j+1) Γ(j+2+u)) du
    let v = mellin_barnes_1d(
        |u| {
            let mut term = (lq + ln_gamma_mod_2pi(1.0 + u) - ln_gamma_mod_2pi(2.0 + u)).exp();
            let mut sum = term * weights[0];
            let q = lq.exp();
            for (j, wj) in weights.iter().enumerate().skip(1) {
                let jf = j as f64;
                term *= q * (jf + u) / (jf * (jf + 1.0 + u));
                sum += term * *wj;
            }
            sum * (ln_gamma_mod_2pi(-u) + u * lq).exp()
        },
        -0.5,
        0.5,
        &ContourPolicy { rel_tol: 1e-9, ..ContourPolicy::default() },
    )?;
    Ok(v.value)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn db(x: f64) -> f64 {
        10f64.powf(x / 10.0)
    }

    // warden view from the worked setup at P_T = P_J = 20 dBW with an equal split
    pub(crate) fn warden() -> WardenChannel {
        let ftr = FtrParams::from_average_power(4.0, 3.0, 0.4, 1.0).unwrap();
        let fisher = FisherFParams::new(3.0, 4.0, db(-11.0)).unwrap();
        let link = LinkCoefficients::new(0.3, 0.2, db(3.0), &fisher).unwrap();
        WardenChannel::new(ftr, fisher, link, TruncationPolicy::default()).unwrap()
    }

    fn user() -> UserChannel {
        crate::sinr_stats::tests::fig2_channel(30.0, 10.0)
    }

    #[test]
    fn boundary_rules() {
        let w = warden();
        let k2 = w.link_w.kappa2;
        assert_eq!(false_alarm_prob(&w, k2), 1.0);
        assert_eq!(missed_detection_prob(&w, k2).unwrap(), 0.0);
        assert_eq!(detection_error_probability(&w, 0.5 * k2).unwrap(), 1.0);
        let far = k2 + 1e9;
        assert!(false_alarm_prob(&w, far) < 1e-9);
        // the truncated series sums to 1 - residual
        let top = missed_detection_prob(&w, far).unwrap();
        assert!((top - 1.0).abs() < w.coefficients().residual + 1e-9, "{top}");
    }

    #[test]
    fn missed_detection_mellin_matches_quadrature() {
        let w = warden();
        for &e in &[0.1, 0.3, 0.8] {
            let eps = w.link_w.kappa2 + e;
            let q = missed_detection_prob(&w, eps).unwrap();
            let m = missed_detection_prob_mellin(&w, eps).unwrap();
            assert!((q - m).abs() < 1e-6, "E={e}: {q} vs {m}");
        }
    }

    #[test]
    fn no_jamming_contour_orientation() {
        let w = warden();
        let eps = w.link_w.kappa2 + 0.4;
        let direct = w.coeffs.cdf_scaled(0.4 / (2.0 * w.ftr_w.sigma2 * w.link_w.c1));
        let m = missed_detection_no_jamming_mellin(&w, eps).unwrap();
        assert!((direct - m).abs() < 1e-9, "{direct} vs {m}");
    }

    #[test]
    fn missed_detection_monte_carlo() {
        let w = warden();
        let l = w.link_w;
        let eps = l.kappa2 + 0.35;
        let xs = crate::fading::FtrSampler::new(&w.ftr_w).unwrap();
        let zs = crate::fading::FisherSampler::new(&w.fisher_w).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 400_000;
        let hits = (0..n).filter(|_| l.c1 * xs.sample(&mut rng) + l.kappa2 + l.c2 * zs.sample(&mut rng) <= eps).count();
        let mc = hits as f64 / n as f64;
        let v = missed_detection_prob(&w, eps).unwrap();
        assert!((mc - v).abs() < 4e-3, "{mc} vs {v}");
    }

    #[test]
    fn threshold_has_interior_minimum() {
        let w = warden();
        let (eps, xi) = optimal_threshold(&w, None).unwrap();
        assert!(eps > w.link_w.kappa2);
        assert!(xi < 1.0);
        let near = detection_error_probability(&w, w.link_w.kappa2 + 1e-6).unwrap();
        let far = detection_error_probability(&w, w.link_w.kappa2 + 1e6).unwrap();
        assert!(xi < near && xi < far);
        for f in [0.9, 1.1] {
            assert!(detection_error_probability(&w, w.link_w.kappa2 + f * (eps - w.link_w.kappa2)).unwrap() >= xi - 1e-12);
        }
        // warm start lands on the same point
        let (e2, x2) = optimal_threshold(&w, Some(eps * 1.05)).unwrap();
        assert!((x2 - xi).abs() < 1e-9 && (e2 - eps).abs() < 1e-3 * eps, "{e2} vs {eps}");
    }

    #[test]
    fn brent_quadratic() {
        let (x, v) = brent_min(|x| (x - 1.3) * (x - 1.3) + 2.0, -4.0, 5.0, 1e-10);
        assert!((x - 1.3).abs() < 1e-7 && (v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rate_kernels_match_quadrature() {
        for &mu in &[0.05, 0.9, 1.7, 12.5, 80.0] {
            let j = rate_kernels(mu, 30).unwrap();
            for &n in &[0usize, 1, 5, 13, 30] {
                let nf = n as f64;
                // J_n = (1/n!) ∫ (μg)^n e^{-μg} / (1+g) dg
                let direct = quad::integrate_to_inf(
                    |g| if g == 0.0 { if n == 0 { 1.0 } else { 0.0 } } else { (nf * (mu * g).ln() - mu * g - ln_gamma_abs(nf + 1.0)).exp() / (1.0 + g) },
                    0.0,
                    1e-300,
                    1e-12,
                )
                .value;
                assert!((j[n] - direct).abs() < 1e-9 * direct, "mu={mu} n={n}: {} vs {direct}", j[n]);
            }
        }
    }

    #[test]
    fn rate_forms_agree() {
        let ch = user();
        let fast = covert_rate(&ch).unwrap();
        let quadr = covert_rate_quadrature(&ch).unwrap();
        assert!((fast - quadr).abs() < 1e-6 * fast, "{fast} vs {quadr}");
        let mb = covert_rate_mellin(&ch).unwrap();
        assert!((fast - mb).abs() < 1e-6 * fast, "{fast} vs {mb}");
        let checked = covert_rate_checked(&ch).unwrap();
        assert!(!checked.fallback);
    }

    #[test]
    fn rate_zero_without_signal_and_monotone() {
        let ch = user();
        assert_eq!(covert_rate(&ch.with_link(0.0, ch.link.c2).unwrap()).unwrap(), 0.0);
        let mut prev = 0.0;
        for &c1 in &[0.1, 1.0, 10.0, 100.0] {
            let r = covert_rate(&ch.with_link(c1, ch.link.c2).unwrap()).unwrap();
            assert!(r > prev);
            prev = r;
        }
        let mut prev = f64::INFINITY;
        for &c2 in &[0.0, 0.01, 0.1, 1.0] {
            let r = covert_rate(&ch.with_link(ch.link.c1, c2).unwrap()).unwrap();
            assert!(r < prev);
            prev = r;
        }
    }

    fn oracle(a: f64, b: f64, c: f64, d: f64, lo: f64, hi: f64) -> Complex64 {
        let f_in = |t: f64| t.powf(a) * (b - t).powf(c) * (-d * t).exp();
        let f_out = |t: f64| t.powf(a) * (t - b).powf(c) * (-d * t).exp();
        let mut re = 0.0;
        let mut above = 0.0;
        if lo < b {
            re = quad::integrate(f_in, lo, hi.min(b), 1e-300, 1e-12).value;
        }
        if hi > b {
            let s = lo.max(b);
            above = if hi.is_infinite() {
                quad::integrate(f_out, s, s + b.max(1.0), 1e-300, 1e-12).value
                    + quad::integrate_to_inf(f_out, s + b.max(1.0), 1e-300, 1e-12).value
            } else {
                quad::integrate(f_out, s, hi, 1e-300, 1e-12).value
            };
        }
        Complex64::new(re, 0.0) + Complex64::from_polar(above, std::f64::consts::PI * c)
    }

    fn close(x: Complex64, y: Complex64, tol: f64) -> bool {
        (x - y).norm() <= tol * y.norm().max(1e-300)
    }

    #[test]
    fn lemma_cases_match_quadrature() {
        let (a, b, c, d) = (1.3, 2.0, 0.7, 0.8);
        let cases = [
            (Limit::Zero, Limit::Finite(1.5)),
            (Limit::Finite(1.5), Limit::Infinity),
            (Limit::Finite(3.5), Limit::Infinity),
            (Limit::Zero, Limit::Infinity),
            (Limit::Zero, Limit::Branch),
        ];
        for (t1, t2) in cases {
            let case = LemmaIntegralCase::new(t1, t2, a, b, c, d).unwrap();
            let v = lemma_integral(&case).unwrap();
            let o = oracle(a, b, c, d, limit_value(t1, b), limit_value(t2, b));
            assert!(close(v, o, 1e-8), "{t1:?},{t2:?}: {v} vs {o}");
        }
    }

    #[test]
    fn lemma_half_line_closed_form_matches_expansion() {
        for &(a, b, c, d) in &[(1.3, 2.0, 0.9, 0.8), (3.2, 0.5, 8.2, 2.0), (0.4, 3.0, 2.3, 1.5)] {
            let u = lemma_half_line_closed_form(a, b, c, d).unwrap();
            let e = segment_integral(a, b, c, d, 0.0, f64::INFINITY).unwrap();
            assert!(close(u, e, 1e-8), "{a} {b} {c} {d}: {u} vs {e}");
        }
    }

    #[test]
    fn lemma_conditions_enforced() {
        assert!(LemmaIntegralCase::new(Limit::Zero, Limit::Finite(3.0), 1.0, 2.0, 0.5, 1.0).is_err());
        assert!(LemmaIntegralCase::new(Limit::Zero, Limit::Finite(1.0), 1.0, 2.0, -2.0, 1.0).is_err());
        assert!(LemmaIntegralCase::new(Limit::Zero, Limit::Branch, -1.5, 2.0, 0.5, 1.0).is_err());
        assert!(LemmaIntegralCase::new(Limit::Zero, Limit::Infinity, 1.0, 2.0, 0.5, -1.0).is_err());
        assert!(LemmaIntegralCase::new(Limit::Finite(1.0), Limit::Branch, 1.0, 2.0, 0.5, 1.0).is_err());
        assert!(LemmaIntegralCase::new(Limit::Finite(1.0), Limit::Infinity, 1.0, 2.0, -1.5, 1.0).is_err());
        assert!(LemmaIntegralCase::new(Limit::Finite(3.0), Limit::Infinity, 1.0, 2.0, -1.5, 1.0).is_ok());
    }

    #[test]
    fn lemma_additivity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let a = rng.random_range(-0.5..4.0);
            let b = rng.random_range(0.2..6.0);
            let c = rng.random_range(-0.5..9.0);
            let d = rng.random_range(0.1..3.0);
            let t = b * rng.random_range(0.05..0.95);
            let left = lemma_integral(&LemmaIntegralCase::new(Limit::Zero, Limit::Finite(t), a, b, c, d).unwrap()).unwrap();
            let right =
                lemma_integral(&LemmaIntegralCase::new(Limit::Finite(t), Limit::Infinity, a, b, c, d).unwrap()).unwrap();
            let whole = lemma_integral(&LemmaIntegralCase::new(Limit::Zero, Limit::Infinity, a, b, c, d).unwrap()).unwrap();
            assert!(close(left + right, whole, 1e-6), "{a} {b} {c} {d} {t}");
            let o = oracle(a, b, c, d, 0.0, t);
            assert!(close(left, o, 1e-6), "{a} {b} {c} {d} {t}: {left} vs {o}");
        }
    }

    #[test]
    fn lemma_asymptotic_regimes() {
        let (a, c, d) = (3.2, 8.2, 2.0);
        // leading-order form: relative error close to C(1+A)/(BD)
        let mut prev = f64::INFINITY;
        for &b in &[30.0, 100.0, 1000.0, 5000.0] {
            let case = LemmaIntegralCase::new(Limit::Zero, Limit::Infinity, a, b, c, d).unwrap();
            let exact = lemma_integral(&case).unwrap();
            let (approx, br) = lemma_integral_asymptotic(&case).unwrap();
            assert_eq!(br, LemmaBranch::LargeArgument);
            let rel = (approx.re - exact.re).abs() / exact.re.abs();
            assert!(rel < 1.5 * c * (1.0 + a) / (b * d) && rel < prev, "B={b}: {} vs {}", approx.re, exact.re);
            prev = rel;
        }
        for &b in &[1e-4, 1e-3, 5e-3] {
            let case = LemmaIntegralCase::new(Limit::Zero, Limit::Infinity, a, b, c, d).unwrap();
            let exact = lemma_integral(&case).unwrap();
            let (approx, br) = lemma_integral_asymptotic(&case).unwrap();
            assert_eq!(br, LemmaBranch::SmallArgument);
            assert!((approx.re - exact.re).abs() < 1e-2 * exact.re.abs(), "B={b}: {approx} vs {exact}");
        }
    }

    #[test]
    fn convexity_probe_rejects_short_grid() {
        let w = warden();
        assert!(dep_threshold_convexity_probe(&w, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn hessian_probe_rejects_zero_power() {
        let w = warden();
        assert!(dep_hessian_probe(&w, &[0.0, 0.3], &[0.2]).is_err());
    }

    #[test]
    fn false_alarm_monte_carlo() {
        let w = warden();
        let l = w.link_w;
        let eps = l.kappa2 * 2.0;
        let zs = crate::fading::FisherSampler::new(&w.fisher_w).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 400_000;
        let hits = (0..n).filter(|_| l.kappa2 + l.c2 * zs.sample(&mut rng) > eps).count();
        let mc = hits as f64 / n as f64;
        assert!((mc - false_alarm_prob(&w, eps)).abs() < 3e-3);
    }
}
