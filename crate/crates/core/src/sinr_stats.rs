//! Distribution of the per-user SINR `γ = C₁X / (κ² + C₂Z)` with FTR-faded
//! signal and F-faded jamming, plus its regime approximations.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fading::{
    f_expectation, select_truncation_capped, ftr_coefficients, FisherFParams, FtrCoefficients, FtrParams,
    TRUNCATION_CAP,
};
use crate::special_fn::foxh::{mellin_barnes_2d, ContourPolicy};
use crate::special_fn::gamma::{ln_gamma_abs, ln_gamma_mod_2pi};
use crate::special_fn::hyper::{beta_fn, gauss_2f1, kummer_1f1};

// Tolerances of the conditional-expectation quadrature.
const QUAD_ABS: f64 = 1e-13;
const QUAD_REL: f64 = 1e-10;

// H-function arguments outside this band go to the quadrature path.
const MB_ARG_MIN: f64 = 1e-3;
const MB_ARG_MAX: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkCoefficients {
    pub c1: f64,
    pub c2: f64,
    pub kappa2: f64,
    pub omega: f64,
}

impl LinkCoefficients {
    pub fn new(c1: f64, c2: f64, kappa2: f64, fisher: &FisherFParams) -> Result<Self> {
        if !(c1 >= 0.0 && c1.is_finite()) || !(c2 >= 0.0 && c2.is_finite()) {
            return Err(Error::param(format!("link coefficients must be nonnegative, got C1={c1}, C2={c2}")));
        }
        if !(kappa2 > 0.0 && kappa2.is_finite()) {
            return Err(Error::param(format!("noise power must be positive, got {kappa2}")));
        }
        Ok(LinkCoefficients { c1, c2, kappa2, omega: (fisher.m_s - 1.0) * fisher.z_bar * c2 })
    }

    /// `Ω = (m_s-1) z̄ C₂` recomputed from the fading parameters.
    pub fn omega_for(&self, fisher: &FisherFParams) -> f64 {
        (fisher.m_s - 1.0) * fisher.z_bar * self.c2
    }
}

/// Truncation settings for building channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub tol: f64,
    pub cap: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy { tol: 1e-8, cap: TRUNCATION_CAP }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserChannel {
    pub ftr: FtrParams,
    pub fisher: FisherFParams,
    pub link: LinkCoefficients,
    pub truncation: usize,
    coeffs: FtrCoefficients,
}

impl UserChannel {
    pub fn new(ftr: FtrParams, fisher: FisherFParams, link: LinkCoefficients, policy: TruncationPolicy) -> Result<Self> {
        let m = select_truncation_capped(&ftr, policy.tol, policy.cap)?;
        Self::with_truncation(ftr, fisher, link, m)
    }

    pub fn with_truncation(ftr: FtrParams, fisher: FisherFParams, link: LinkCoefficients, m_terms: usize) -> Result<Self> {
        fisher.validate()?;
        let coeffs = ftr_coefficients(&ftr, m_terms)?;
        let mut link = link;
        link.omega = link.omega_for(&fisher);
        Ok(UserChannel { ftr, fisher, link, truncation: m_terms, coeffs })
    }

    /// Same fading, new link coefficients; reuses the series coefficients.
    pub fn with_link(&self, c1: f64, c2: f64) -> Result<Self> {
        let link = LinkCoefficients::new(c1, c2, self.link.kappa2, &self.fisher)?;
        Ok(UserChannel { link, ..self.clone() })
    }

    pub fn coefficients(&self) -> &FtrCoefficients {
        &self.coeffs
    }

    fn two_sigma2(&self) -> f64 {
        2.0 * self.ftr.sigma2
    }

    /// Regime parameters `(Ω/(m_f κ²), κ²γ/(2σ²C₁))`.
    pub fn regime(&self, gamma: f64) -> RegimeEstimate {
        RegimeEstimate {
            jamming_ratio: self.link.omega / (self.fisher.m_f * self.link.kappa2),
            power_ratio: self.link.kappa2 * gamma / (self.two_sigma2() * self.link.c1),
        }
    }
}

/// Dimensionless regime parameters for the approximations; both small means
/// the approximation is in its stated regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeEstimate {
    pub jamming_ratio: f64,
    pub power_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Approximation {
    pub value: f64,
    pub regime: RegimeEstimate,
}

fn check_range(raw: f64) -> Result<f64> {
    if !raw.is_finite() || !(-1e-6..=1.0 + 1e-6).contains(&raw) {
        return Err(Error::OutOfRange { value: raw });
    }
    Ok(raw.clamp(0.0, 1.0))
}

/// CDF by conditioning on the jamming power:
/// `F(γ) = E_Z[F_X(γ(κ² + C₂Z)/C₁)]`.
pub fn sinr_cdf_quadrature(ch: &UserChannel, gamma: f64) -> Result<f64> {
    if gamma <= 0.0 {
        return Ok(0.0);
    }
    let l = &ch.link;
    if l.c1 == 0.0 {
        return Ok(1.0);
    }
    let s = ch.two_sigma2() * l.c1;
    let c = &ch.coeffs;
    if l.c2 == 0.0 {
        return check_range(c.cdf_scaled(gamma * l.kappa2 / s));
    }
    let v = f_expectation(&ch.fisher, |z| c.cdf_scaled(gamma * (l.kappa2 + l.c2 * z) / s), f64::INFINITY, QUAD_ABS, QUAD_REL);
    check_range(v)
}

/// PDF by conditioning on the jamming power.
pub fn sinr_pdf_quadrature(ch: &UserChannel, gamma: f64) -> Result<f64> {
    if gamma < 0.0 {
        return Ok(0.0);
    }
    let l = &ch.link;
    if l.c1 == 0.0 {
        return Err(Error::param("SINR density is degenerate when C1 = 0"));
    }
    let s = ch.two_sigma2() * l.c1;
    let c = &ch.coeffs;
    if l.c2 == 0.0 {
        return Ok(c.pdf_scaled(gamma * l.kappa2 / s) * l.kappa2 / s);
    }
    Ok(f_expectation(
        &ch.fisher,
        |z| {
            let t = (l.kappa2 + l.c2 * z) / s;
            c.pdf_scaled(gamma * t) * t
        },
        f64::INFINITY,
        QUAD_ABS * 1e-3,
        QUAD_REL,
    ))
}

/// Pieces of the j-summed two-variable Mellin-Barnes kernel shared by the
/// SINR distribution and the rate.
pub(crate) struct MbKernel<'a> {
    pub weights: &'a [f64],
    pub m_f: f64,
    pub m_s: f64,
}

impl MbKernel<'_> {
    /// `Σ_j w_j Γ(1+j-s)/Γ(1+j)`.
    pub fn series(&self, s: Complex64) -> Complex64 {
        let mut prod = Complex64::new(1.0, 0.0);
        let mut sum = Complex64::new(self.weights[0], 0.0);
        for (i, w) in self.weights.iter().enumerate().skip(1) {
            prod *= 1.0 - s / i as f64;
            sum += prod * *w;
        }
        sum * ln_gamma_mod_2pi(1.0 - s).exp()
    }

    /// Second-variable factor `y^{s} Γ(m_f - s) Γ(m_s + m_f - s) Γ(s)`.
    pub fn second(&self, s: Complex64, ln_y: f64) -> Complex64 {
        (s * ln_y + ln_gamma_mod_2pi(self.m_f - s) + ln_gamma_mod_2pi(self.m_s + self.m_f - s) + ln_gamma_mod_2pi(s))
            .exp()
    }

    pub fn joint(&self, s1: Complex64, s2: Complex64) -> Complex64 {
        (-ln_gamma_mod_2pi(self.m_f + self.m_s - s1 - s2)).exp()
    }

    /// `ln[(m_f κ²/Ω)^{m_f} / (Γ(m_f) Γ(m_s))]`.
    pub fn ln_prefactor(&self, kappa2: f64, omega: f64) -> f64 {
        self.m_f * (self.m_f * kappa2 / omega).ln() - ln_gamma_abs(self.m_f) - ln_gamma_abs(self.m_s)
    }
}

/// Jamming argument `Ω/(m_f κ² - Ω)` with the singular configuration nudged.
pub(crate) fn jamming_argument(omega: f64, m_f: f64, kappa2: f64) -> Option<f64> {
    let mk = m_f * kappa2;
    let mut om = omega;
    if (mk - om).abs() < 1e-9 * mk {
        om *= 1.0 - 1e-6;
    }
    if om <= 0.0 || om >= mk {
        return None;
    }
    Some(om / (mk - om))
}

fn mb_policy() -> ContourPolicy {
    ContourPolicy { rel_tol: 1e-7, ..ContourPolicy::default() }
}

/// CDF through the two-variable Mellin-Barnes representation.
pub fn sinr_cdf_mellin(ch: &UserChannel, gamma: f64) -> Result<f64> {
    if gamma <= 0.0 {
        return Ok(0.0);
    }
    let l = &ch.link;
    let y = jamming_argument(l.omega, ch.fisher.m_f, l.kappa2)
        .ok_or_else(|| Error::param("Mellin-Barnes form needs 0 < Ω < m_f κ²"))?;
    let x = gamma * l.kappa2 / (ch.two_sigma2() * l.c1);
    let k = MbKernel { weights: &ch.coeffs.weights, m_f: ch.fisher.m_f, m_s: ch.fisher.m_s };
    let (lx, ly) = (x.ln(), y.ln());
    // first strip bounded by the 1/s pole at 0 and Γ(1-s), Γ(m_s-s) on the right
    let c1 = 0.5 * 1f64.min(k.m_s);
    let c2 = 0.5 * k.m_f;
    let v = mellin_barnes_2d(
        |s| (s * lx + ln_gamma_mod_2pi(k.m_s - s)).exp() / s * k.series(s),
        |s| k.second(s, ly),
        |a, b| k.joint(a, b),
        [c1, c2],
        [c1, c2],
        &mb_policy(),
    )?;
    let omega = y * ch.fisher.m_f * l.kappa2 / (1.0 + y);
    let raw = k.ln_prefactor(l.kappa2, omega).exp() * v.value;
    check_range(raw)
}

/// PDF through the two-variable Mellin-Barnes representation.
pub fn sinr_pdf_mellin(ch: &UserChannel, gamma: f64) -> Result<f64> {
    if gamma <= 0.0 {
        return Err(Error::param("sinr_pdf needs gamma > 0"));
    }
    let l = &ch.link;
    let y = jamming_argument(l.omega, ch.fisher.m_f, l.kappa2)
        .ok_or_else(|| Error::param("Mellin-Barnes form needs 0 < Ω < m_f κ²"))?;
    let x = gamma * l.kappa2 / (ch.two_sigma2() * l.c1);
    let k = MbKernel { weights: &ch.coeffs.weights, m_f: ch.fisher.m_f, m_s: ch.fisher.m_s };
    let (lx, ly) = (x.ln(), y.ln());
    let c1 = 0.5 * 1f64.min(k.m_s);
    let v = mellin_barnes_2d(
        |s| (s * lx + ln_gamma_mod_2pi(k.m_s - s)).exp() * k.series(s),
        |s| k.second(s, ly),
        |a, b| k.joint(a, b),
        [c1, 0.5 * k.m_f],
        [c1, 0.5 * k.m_f],
        &mb_policy(),
    )?;
    let omega = y * ch.fisher.m_f * l.kappa2 / (1.0 + y);
    Ok((k.ln_prefactor(l.kappa2, omega).exp() * v.value / gamma).max(0.0))
}

fn mellin_applicable(ch: &UserChannel, gamma: f64) -> bool {
    let l = &ch.link;
    if l.c1 == 0.0 || l.c2 == 0.0 {
        return false;
    }
    let x = gamma * l.kappa2 / (ch.two_sigma2() * l.c1);
    match jamming_argument(l.omega, ch.fisher.m_f, l.kappa2) {
        Some(y) => (MB_ARG_MIN..=MB_ARG_MAX).contains(&y) && (MB_ARG_MIN..=MB_ARG_MAX).contains(&x),
        None => false,
    }
}

/// SINR CDF. Uses the Mellin-Barnes form when both H-function arguments sit
/// in a moderate band and the conditional quadrature otherwise.
pub fn sinr_cdf(ch: &UserChannel, gamma: f64) -> Result<f64> {
    if gamma <= 0.0 {
        return Ok(0.0);
    }
    if mellin_applicable(ch, gamma) {
        match sinr_cdf_mellin(ch, gamma) {
            Ok(v) => return Ok(v),
            Err(Error::OutOfRange { value }) => return Err(Error::OutOfRange { value }),
            Err(_) => {}
        }
    }
    sinr_cdf_quadrature(ch, gamma)
}

/// SINR PDF with the same path selection as [`sinr_cdf`].
pub fn sinr_pdf(ch: &UserChannel, gamma: f64) -> Result<f64> {
    if gamma <= 0.0 {
        return Err(Error::param("sinr_pdf needs gamma > 0"));
    }
    if mellin_applicable(ch, gamma) {
        if let Ok(v) = sinr_pdf_mellin(ch, gamma) {
            return Ok(v);
        }
    }
    sinr_pdf_quadrature(ch, gamma)
}

fn weak_jamming_prefactor(ch: &UserChannel) -> Result<f64> {
    let mk = ch.fisher.m_f * ch.link.kappa2;
    if ch.link.omega >= mk {
        return Err(Error::param("weak-jamming form needs Ω < m_f κ²"));
    }
    Ok((mk / (mk - ch.link.omega)).powf(ch.fisher.m_f))
}

/// Weak-jamming approximation: Kummer-function series.
pub fn sinr_cdf_low_jamming(ch: &UserChannel, gamma: f64) -> Result<Approximation> {
    let regime = ch.regime(gamma);
    if gamma <= 0.0 {
        return Ok(Approximation { value: 0.0, regime });
    }
    let pre = weak_jamming_prefactor(ch)?;
    let u = regime.power_ratio;
    let mut sum = 0.0;
    for (j, w) in ch.coeffs.weights.iter().enumerate() {
        let jf = j as f64;
        let lt = (jf + 1.0) * u.ln() - ln_gamma_abs(jf + 2.0);
        sum += w * lt.exp() * kummer_1f1(1.0 + jf, 2.0 + jf, -u)?;
    }
    Ok(Approximation { value: pre * sum, regime })
}

/// High-transmit-power approximation: the regular power-series part up to
/// `j_s` plus the `γ^{m_s}` term contributed by the jamming tail.
pub fn sinr_cdf_high_power(ch: &UserChannel, gamma: f64) -> Result<Approximation> {
    let regime = ch.regime(gamma);
    if gamma <= 0.0 {
        return Ok(Approximation { value: 0.0, regime });
    }
    let (mf, ms) = (ch.fisher.m_f, ch.fisher.m_s);
    let (k2, om) = (ch.link.kappa2, ch.link.omega);
    if om <= 0.0 {
        return Err(Error::param("high-power form needs Ω > 0"));
    }
    let w = &ch.coeffs.weights;
    let integer_ms = ms == ms.round();
    let js = if integer_ms { ms as usize - 1 } else { ms.floor() as usize - 1 };
    let s2 = ch.two_sigma2();
    let c1 = ch.link.c1;

    // tail term
    let mut tail = 0.0;
    for (j, wj) in w.iter().enumerate().skip(js + 1) {
        let jf = j as f64;
        tail += wj * (ln_gamma_abs(1.0 + jf - ms) - ln_gamma_abs(jf + 1.0)).exp();
    }
    let lead = (ms * (om / mf * gamma / (s2 * c1)).ln()).exp() / (ms * beta_fn(ms, mf));
    let first = lead * tail;

    // regular part
    let u = regime.power_ratio;
    let ln_pre = mf * (mf * k2 / om).ln() - ln_gamma_abs(ms);
    let z = (om - mf * k2) / om;
    let mut second = 0.0;
    for (j, wj) in w.iter().enumerate().take(js + 1) {
        let jf = j as f64;
        // Ξ(j) per term in the normalized weights; the Γ factor is dropped at
        // j = j_s for integer m_s
        let lg_xi = if integer_ms && j == js { 0.0 } else { ln_gamma_abs(ms - 1.0 - jf) };
        let ln_term = ln_pre + lg_xi + ln_gamma_abs(jf + 1.0) - beta_fn(mf + ms - jf - 1.0, jf + 1.0).ln()
            - ln_gamma_abs(jf + 2.0)
            + (jf + 1.0) * u.ln();
        second += wj * ln_term.exp() * gauss_2f1(mf, ms + mf, mf + ms - jf - 1.0, z)?;
    }
    Ok(Approximation { value: first + second, regime })
}

/// High-power, weak-jamming approximation: leading power series.
pub fn sinr_cdf_high_power_low_jamming(ch: &UserChannel, gamma: f64) -> Result<Approximation> {
    let regime = ch.regime(gamma);
    if gamma <= 0.0 {
        return Ok(Approximation { value: 0.0, regime });
    }
    let pre = weak_jamming_prefactor(ch)?;
    let u = regime.power_ratio;
    let mut sum = 0.0;
    for (j, w) in ch.coeffs.weights.iter().enumerate() {
        let jf = j as f64;
        sum += w * ((jf + 1.0) * u.ln() - ln_gamma_abs(jf + 2.0)).exp();
    }
    Ok(Approximation { value: pre * sum, regime })
}

/// Outage probability at threshold `gamma_th`.
pub fn outage_probability(ch: &UserChannel, gamma_th: f64) -> Result<f64> {
    sinr_cdf(ch, gamma_th)
}
