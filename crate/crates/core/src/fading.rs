//! FTR and Fisher-Snedecor F fading: parameters, series coefficients,
//! distribution functions and samplers.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special_fn::gamma::{gamma_p, ln_gamma_abs};
use crate::special_fn::hyper::{beta_fn, gauss_2f1};

/// Default hard cap on the number of FTR series terms.
pub const TRUNCATION_CAP: usize = 200;

/// Largest admissible `(KΔ/(m+K))²`; the R-function series stalls near 1.
pub const MAX_R_ARGUMENT: f64 = 0.999;

// Nodes of the periodic trapezoid over the phase-difference mixture.
const MIXTURE_NODES: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FtrParams {
    pub m: f64,
    pub k_ratio: f64,
    pub sigma2: f64,
    pub delta: f64,
}

impl FtrParams {
    pub fn new(m: f64, k_ratio: f64, sigma2: f64, delta: f64) -> Result<Self> {
        let p = FtrParams { m, k_ratio, sigma2, delta };
        p.validate()?;
        Ok(p)
    }

    /// Parameters from the average power `υ = 2σ²(1+K)` (linear units).
    pub fn from_average_power(m: f64, k_ratio: f64, delta: f64, mean: f64) -> Result<Self> {
        Self::new(m, k_ratio, mean / (2.0 * (1.0 + k_ratio)), delta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(Error::param(format!("FTR m must be positive, got {}", self.m)));
        }
        if !(self.k_ratio >= 0.0 && self.k_ratio.is_finite()) {
            return Err(Error::param(format!("FTR K must be nonnegative, got {}", self.k_ratio)));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::param(format!("FTR sigma2 must be positive, got {}", self.sigma2)));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::param(format!("FTR delta must lie in [0, 1], got {}", self.delta)));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        2.0 * self.sigma2 * (1.0 + self.k_ratio)
    }

    /// Argument `(KΔ/(m+K))²` of the R-functions in the coefficient sum.
    pub fn r_argument(&self) -> f64 {
        (self.k_ratio * self.delta / (self.m + self.k_ratio)).powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherFParams {
    pub m_f: f64,
    pub m_s: f64,
    pub z_bar: f64,
}

impl FisherFParams {
    pub fn new(m_f: f64, m_s: f64, z_bar: f64) -> Result<Self> {
        let p = FisherFParams { m_f, m_s, z_bar };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m_f > 0.0 && self.m_f.is_finite()) {
            return Err(Error::param(format!("F m_f must be positive, got {}", self.m_f)));
        }
        if !(self.m_s > 1.0 && self.m_s.is_finite()) {
            return Err(Error::param(format!("F m_s must exceed 1, got {}", self.m_s)));
        }
        if !(self.z_bar > 0.0 && self.z_bar.is_finite()) {
            return Err(Error::param(format!("F z_bar must be positive, got {}", self.z_bar)));
        }
        Ok(())
    }

    /// Scale `c` of the ratio construction `Z = c · G_f / G_s`.
    pub fn ratio_scale(&self) -> f64 {
        (self.m_s - 1.0) * self.z_bar / self.m_f
    }
}

/// Truncated FTR series: raw coefficients `α_j`, normalized weights
/// `w_j = m^m/Γ(m) · K^j α_j / j!` and their cumulative sums.
#[derive(Debug, Clone, PartialEq)]
pub struct FtrCoefficients {
    pub terms: Vec<f64>,
    pub weights: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub m_used: usize,
    pub residual: f64,
}

impl FtrCoefficients {
    fn from_weights(p: &FtrParams, weights: Vec<f64>) -> Result<Self> {
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cumulative.push(acc);
        }
        let residual = 1.0 - acc;
        if residual < -1e-9 {
            return Err(Error::CoefficientInstability(residual));
        }
        let lm = p.m * p.m.ln() - ln_gamma_abs(p.m);
        let terms = weights
            .iter()
            .enumerate()
            .map(|(j, &w)| {
                if w == 0.0 {
                    0.0
                } else {
                    (w.ln() + ln_gamma_abs(j as f64 + 1.0) - lm - j as f64 * p.k_ratio.ln()).exp()
                }
            })
            .collect();
        Ok(FtrCoefficients { terms, m_used: weights.len() - 1, weights, cumulative, residual: residual.max(0.0) })
    }

    /// Sum of the retained weights, `F_X(∞)` of the truncated series.
    pub fn total(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    /// CDF of the truncated series at `y = x/(2σ²)`.
    ///
    /// Swapping the order of summation turns `Σ_j w_j P(j+1, y)` into a
    /// positive sum of Poisson masses weighted by cumulative weights.
    pub fn cdf_scaled(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        let m = self.m_used;
        let ly = y.ln();
        let mut sum = 0.0;
        let mut lp = -y; // ln pois(0; y)
        for n in 1..=m {
            lp += ly - (n as f64).ln();
            sum += lp.exp() * self.cumulative[n - 1];
        }
        sum + self.cumulative[m] * gamma_p(m as f64 + 1.0, y)
    }

    /// `F_X(∞) - F_X` at scaled argument `y`, accurate in the upper tail.
    pub fn ccdf_scaled(&self, y: f64) -> f64 {
        let m = self.m_used;
        let total = self.cumulative[m];
        if y <= 0.0 {
            return total;
        }
        let ly = y.ln();
        let mut lp = -y;
        let mut sum = 0.0;
        for n in 0..=m {
            if n > 0 {
                lp += ly - (n as f64).ln();
            }
            let below = if n == 0 { 0.0 } else { self.cumulative[n - 1] };
            sum += lp.exp() * (total - below);
        }
        sum
    }

    /// PDF of the truncated series times `2σ²`, at scaled argument `y`.
    pub fn pdf_scaled(&self, y: f64) -> f64 {
        if y < 0.0 {
            return 0.0;
        }
        if y == 0.0 {
            return self.weights[0];
        }
        let ly = y.ln();
        let mut lp = -y;
        let mut sum = 0.0;
        for (j, w) in self.weights.iter().enumerate() {
            if j > 0 {
                lp += ly - (j as f64).ln();
            }
            sum += w * lp.exp();
        }
        sum
    }
}

fn check_r_argument(p: &FtrParams) -> Result<()> {
    let r = p.r_argument();
    if r > MAX_R_ARGUMENT {
        return Err(Error::param(format!(
            "(K·Δ/(m+K))² = {r:.6} exceeds {MAX_R_ARGUMENT}; the coefficient series is not trusted this close to 1"
        )));
    }
    Ok(())
}

/// Normalized weights `w_0..=w_M`.
///
/// The FTR power is a Poisson mixture of Gamma(j+1) laws whose mixing weights
/// are negative-binomial masses averaged over the phase difference of the two
/// specular rays:
/// `w_j = (1/π) ∫_0^π NB(j; m, λ(θ)/(m+λ(θ))) dθ`, `λ(θ) = K(1 + Δ cos θ)`.
/// The integrand is smooth and periodic, so a midpoint rule converges
/// geometrically. Unlike the alternating binomial double sum, every term is
/// positive, so the weights stay accurate for large j.
fn mixture_weights(p: &FtrParams, m_terms: usize) -> Vec<f64> {
    let mut w = vec![0.0; m_terms + 1];
    if p.k_ratio == 0.0 {
        w[0] = 1.0;
        return w;
    }
    let n = MIXTURE_NODES;
    let lnj: Vec<f64> = (1..=m_terms).map(|j| ((j as f64 - 1.0 + p.m) / j as f64).ln()).collect();
    for i in 0..n {
        let theta = std::f64::consts::PI * (i as f64 + 0.5) / n as f64;
        let lambda = p.k_ratio * (1.0 + p.delta * theta.cos());
        let lq = (lambda / (p.m + lambda)).ln();
        let mut lp = p.m * (p.m / (p.m + lambda)).ln();
        w[0] += lp.exp();
        for j in 1..=m_terms {
            lp += lnj[j - 1] + lq;
            w[j] += lp.exp();
        }
    }
    for v in &mut w {
        *v /= n as f64;
    }
    w
}

/// Coefficients `α_0..=α_M` with their normalized weights and residual.
pub fn ftr_coefficients(p: &FtrParams, m_terms: usize) -> Result<FtrCoefficients> {
    p.validate()?;
    check_r_argument(p)?;
    FtrCoefficients::from_weights(p, mixture_weights(p, m_terms))
}

fn rising(a: f64, n: usize) -> f64 {
    (0..n).fold(1.0, |acc, i| acc * (a + i as f64))
}

/// `R^μ_ν(x)` for integer `μ`.
pub fn r_function(mu: i64, nu: f64, x: f64) -> Result<f64> {
    if mu >= 0 {
        let mu_u = mu as usize;
        let muf = mu as f64;
        let pre = rising((nu - muf) / 2.0, mu_u) * rising((nu - muf + 1.0) / 2.0, mu_u) * x.powi(mu as i32)
            / ln_gamma_abs(muf + 1.0).exp();
        if pre == 0.0 {
            return Ok(0.0);
        }
        Ok(pre * gauss_2f1((nu + muf) / 2.0, (nu + muf + 1.0) / 2.0, 1.0 + muf, x)?)
    } else {
        let muf = mu as f64;
        let g = ln_gamma_abs(1.0 - muf).exp();
        Ok(gauss_2f1((nu - muf) / 2.0, (nu - muf + 1.0) / 2.0, 1.0 - muf, x)? / g)
    }
}

/// Coefficients from the closed-form binomial double sum. Exact in exact
/// arithmetic but the alternating terms cancel catastrophically in double
/// precision once `j` grows past a few dozen; kept as a cross-check.
pub fn ftr_alpha_double_sum(p: &FtrParams, j: usize) -> Result<f64> {
    p.validate()?;
    check_r_argument(p)?;
    let (m, k, d) = (p.m, p.k_ratio, p.delta);
    if k == 0.0 {
        return Err(Error::param("double-sum coefficients need K > 0"));
    }
    let x = p.r_argument();
    let lnfact = |n: usize| ln_gamma_abs(n as f64 + 1.0);
    let mut sum = 0.0;
    for kk in 0..=j {
        let cjk = (lnfact(j) - lnfact(kk) - lnfact(j - kk)).exp();
        for l in 0..=kk {
            let ckl = (lnfact(kk) - lnfact(l) - lnfact(kk - l)).exp();
            let mu = kk as i64 - 2 * l as i64;
            let arg = j as f64 + m + 2.0 * l as f64 - kk as f64;
            let lg = ln_gamma_abs(arg);
            let powmk = (kk as f64 - j as f64 - m - 2.0 * l as f64) * (m + k).ln();
            let powk = (2.0 * l as f64 - kk as f64) * k.ln();
            let powd = if l == 0 { 0.0 } else { 2.0 * l as f64 * (d / 2.0).ln() };
            let sign = if (2 * l + kk) % 2 == 0 { 1.0 } else { -1.0 };
            let r = r_function(mu, j as f64 + m, x)?;
            let mag = (lg + powmk + powk + powd).exp();
            if mag == 0.0 || r == 0.0 {
                continue;
            }
            sum += cjk * ckl * sign * mag * r;
        }
    }
    Ok(sum)
}

/// Normalized weight of term `j` from the double sum (cross-check path).
pub fn ftr_weight_double_sum(p: &FtrParams, j: usize) -> Result<f64> {
    if p.k_ratio == 0.0 {
        return Ok(if j == 0 { 1.0 } else { 0.0 });
    }
    let a = ftr_alpha_double_sum(p, j)?;
    let lm = p.m * p.m.ln() - ln_gamma_abs(p.m);
    Ok(a * (lm + j as f64 * p.k_ratio.ln() - ln_gamma_abs(j as f64 + 1.0)).exp())
}

/// Smallest `M` whose residual drops below `tol`, searching up to `cap`.
pub fn select_truncation_capped(p: &FtrParams, tol: f64, cap: usize) -> Result<usize> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::param(format!("truncation tolerance must lie in (0, 1), got {tol}")));
    }
    p.validate()?;
    check_r_argument(p)?;
    let w = mixture_weights(p, cap);
    let mut acc = 0.0;
    for (j, wj) in w.iter().enumerate() {
        acc += wj;
        if 1.0 - acc < tol {
            return Ok(j);
        }
    }
    Err(Error::TruncationCap { cap, residual: 1.0 - acc })
}

pub fn select_truncation(p: &FtrParams, tol: f64) -> Result<usize> {
    select_truncation_capped(p, tol, TRUNCATION_CAP)
}

/// Truncated-series PDF of the FTR power.
pub fn ftr_pdf(p: &FtrParams, x: f64, m_terms: usize) -> Result<f64> {
    if x < 0.0 {
        return Err(Error::param("ftr_pdf needs x >= 0"));
    }
    let c = ftr_coefficients(p, m_terms)?;
    Ok(c.pdf_scaled(x / (2.0 * p.sigma2)) / (2.0 * p.sigma2))
}

/// Truncated-series CDF of the FTR power.
pub fn ftr_cdf(p: &FtrParams, x: f64, m_terms: usize) -> Result<f64> {
    if x < 0.0 {
        return Err(Error::param("ftr_cdf needs x >= 0"));
    }
    let c = ftr_coefficients(p, m_terms)?;
    Ok(c.cdf_scaled(x / (2.0 * p.sigma2)))
}

/// PDF of the F-distributed power.
pub fn f_pdf(p: &FisherFParams, z: f64) -> f64 {
    if z <= 0.0 {
        if z == 0.0 && p.m_f < 1.0 {
            return f64::INFINITY;
        }
        if z == 0.0 && p.m_f == 1.0 {
            return p.m_f / ((p.m_s - 1.0) * p.z_bar) * p.m_s;
        }
        return 0.0;
    }
    let (mf, ms) = (p.m_f, p.m_s);
    let c = (ms - 1.0) * p.z_bar;
    let ln = mf * mf.ln() + ms * c.ln() + (mf - 1.0) * z.ln() - beta_fn(mf, ms).ln() - (mf + ms) * (mf * z + c).ln();
    ln.exp()
}

/// CDF of the F-distributed power through the Gauss hypergeometric form.
pub fn f_cdf(p: &FisherFParams, z: f64) -> Result<f64> {
    if z <= 0.0 {
        return Ok(0.0);
    }
    if z.is_infinite() {
        return Ok(1.0);
    }
    let (mf, ms) = (p.m_f, p.m_s);
    let c = (ms - 1.0) * p.z_bar;
    let arg = -mf * z / c;
    let h = gauss_2f1(mf, mf + ms, mf + 1.0, arg)?;
    let ln_pre = (mf - 1.0) * mf.ln() + mf * z.ln() - beta_fn(mf, ms).ln() - mf * c.ln();
    Ok((ln_pre.exp() * h).clamp(0.0, 1.0))
}

/// `E[g(Z)]` over `Z ~ F(m_f, m_s, z̄)` restricted to `Z < z_max`.
///
/// Uses `Z = c·b/(1-b)` with `b ~ Beta(m_f, m_s)`, which maps the heavy
/// right tail onto a finite interval.
pub fn f_expectation<G: FnMut(f64) -> f64>(p: &FisherFParams, mut g: G, z_max: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    let c = p.ratio_scale();
    let b_hi = if z_max.is_finite() { z_max / (z_max + c) } else { 1.0 };
    if b_hi <= 0.0 {
        return 0.0;
    }
    let ln_b = beta_fn(p.m_f, p.m_s).ln();
    let (a1, a2) = (p.m_f - 1.0, p.m_s - 1.0);
    crate::quad::integrate(
        |b| {
            if b <= 0.0 || b >= 1.0 {
                return 0.0;
            }
            let dens = (a1 * b.ln() + a2 * (1.0 - b).ln() - ln_b).exp();
            if dens == 0.0 {
                return 0.0;
            }
            dens * g(c * b / (1.0 - b))
        },
        0.0,
        b_hi,
        abs_tol,
        rel_tol,
    )
    .value
}

/// Precomputed FTR sampler.
#[derive(Debug, Clone)]
pub struct FtrSampler {
    shadow: Gamma<f64>,
    v1: f64,
    v2: f64,
    diffuse_sd: f64,
}

impl FtrSampler {
    pub fn new(p: &FtrParams) -> Result<Self> {
        p.validate()?;
        let shadow = Gamma::new(p.m, 1.0 / p.m).map_err(|e| Error::param(e.to_string()))?;
        // V1² + V2² = 2σ²K and 2V1V2/(V1²+V2²) = Δ
        let s = p.sigma2 * p.k_ratio;
        let root = (1.0 - p.delta * p.delta).max(0.0).sqrt();
        let v1 = (s * (1.0 + root)).sqrt();
        let v2 = (s * (1.0 - root)).max(0.0).sqrt();
        Ok(FtrSampler { shadow, v1, v2, diffuse_sd: p.sigma2.sqrt() })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let zeta = self.shadow.sample(rng);
        let two_pi = 2.0 * std::f64::consts::PI;
        let p1 = two_pi * rng.random::<f64>();
        let p2 = two_pi * rng.random::<f64>();
        let amp = zeta.sqrt();
        let n1: f64 = rng.sample(StandardNormal);
        let n2: f64 = rng.sample(StandardNormal);
        let re = amp * (self.v1 * p1.cos() + self.v2 * p2.cos()) + self.diffuse_sd * n1;
        let im = amp * (self.v1 * p1.sin() + self.v2 * p2.sin()) + self.diffuse_sd * n2;
        re * re + im * im
    }
}

/// Precomputed F sampler.
#[derive(Debug, Clone)]
pub struct FisherSampler {
    gf: Gamma<f64>,
    gs: Gamma<f64>,
    scale: f64,
}

impl FisherSampler {
    pub fn new(p: &FisherFParams) -> Result<Self> {
        p.validate()?;
        let gf = Gamma::new(p.m_f, 1.0).map_err(|e| Error::param(e.to_string()))?;
        let gs = Gamma::new(p.m_s, 1.0).map_err(|e| Error::param(e.to_string()))?;
        Ok(FisherSampler { gf, gs, scale: p.ratio_scale() })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.scale * self.gf.sample(rng) / self.gs.sample(rng)
    }
}

/// One draw of the FTR power.
pub fn sample_ftr<R: Rng + ?Sized>(p: &FtrParams, rng: &mut R) -> Result<f64> {
    Ok(FtrSampler::new(p)?.sample(rng))
}

/// One draw of the F power.
pub fn sample_f<R: Rng + ?Sized>(p: &FisherFParams, rng: &mut R) -> Result<f64> {
    Ok(FisherSampler::new(p)?.sample(rng))
}
