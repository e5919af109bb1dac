//! Mellin-Barnes contour quadrature for one- and two-variable Fox H-functions.
//!
//! Kernel convention: the integrand is
//! `Π Γ(num) / Π Γ(den) · Π x_i^{σ_i s_i}` integrated along vertical lines
//! `Re s_i = c_i`, with the `(2πi)^{-n}` normalisation. Each gamma factor is
//! `Γ(offset + Σ coefficients[i] · s_i)`.

use num_complex::Complex64;
use rayon::prelude::*;

use super::gamma::ln_gamma_mod_2pi;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GammaFactor {
    pub offset: f64,
    pub coefficients: Vec<f64>,
}

impl GammaFactor {
    pub fn new(offset: f64, coefficients: &[f64]) -> Self {
        GammaFactor { offset, coefficients: coefficients.to_vec() }
    }

    /// Single-variable factor `Γ(offset + coef · s_var)`.
    pub fn single(arity: usize, var: usize, offset: f64, coef: f64) -> Self {
        let mut c = vec![0.0; arity];
        c[var] = coef;
        GammaFactor { offset, coefficients: c }
    }

    fn arg(&self, s: &[Complex64]) -> Complex64 {
        let mut z = Complex64::new(self.offset, 0.0);
        for (c, si) in self.coefficients.iter().zip(s) {
            if *c != 0.0 {
                z += si * *c;
            }
        }
        z
    }

    fn var(&self) -> Option<usize> {
        let nz: Vec<usize> = (0..self.coefficients.len()).filter(|&i| self.coefficients[i] != 0.0).collect();
        if nz.len() == 1 {
            Some(nz[0])
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoxHSpec {
    pub arity: usize,
    pub numerator_joint: Vec<GammaFactor>,
    pub denominator_joint: Vec<GammaFactor>,
    pub numerator_per_var: Vec<GammaFactor>,
    pub denominator_per_var: Vec<GammaFactor>,
    /// Exponent sign per variable: kernel carries `x_i^{sign_i · s_i}`.
    pub sign_convention: Vec<f64>,
}

impl FoxHSpec {
    pub fn validate(&self) -> Result<()> {
        if self.arity == 0 || self.arity > 2 {
            return Err(Error::param(format!("arity {} not supported", self.arity)));
        }
        if self.sign_convention.len() != self.arity {
            return Err(Error::param("sign_convention length differs from arity"));
        }
        let all = self
            .numerator_joint
            .iter()
            .chain(&self.denominator_joint)
            .chain(&self.numerator_per_var)
            .chain(&self.denominator_per_var);
        for g in all {
            if g.coefficients.len() != self.arity {
                return Err(Error::param("gamma factor coefficient count differs from arity"));
            }
        }
        for g in self.numerator_per_var.iter().chain(&self.denominator_per_var) {
            if g.var().is_none() {
                return Err(Error::param("per-variable factor must have exactly one nonzero coefficient"));
            }
        }
        Ok(())
    }

    fn log_kernel(&self, s: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for g in self.numerator_joint.iter().chain(&self.numerator_per_var) {
            acc += ln_gamma_mod_2pi(g.arg(s));
        }
        for g in self.denominator_joint.iter().chain(&self.denominator_per_var) {
            acc -= ln_gamma_mod_2pi(g.arg(s));
        }
        acc
    }

    /// Open interval of admissible abscissae for each variable from the
    /// per-variable numerator poles.
    pub fn pole_gaps(&self) -> Vec<(f64, f64)> {
        let mut gaps = vec![(f64::NEG_INFINITY, f64::INFINITY); self.arity];
        for g in &self.numerator_per_var {
            let v = g.var().unwrap_or(0);
            let c = g.coefficients[v];
            let edge = -g.offset / c;
            if c > 0.0 {
                gaps[v].0 = gaps[v].0.max(edge);
            } else {
                gaps[v].1 = gaps[v].1.min(edge);
            }
        }
        gaps
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourPolicy {
    /// Explicit abscissae; chosen from the pole gaps when `None`.
    pub abscissa: Option<Vec<f64>>,
    pub half_length: f64,
    pub nodes: usize,
    pub pole_margin: f64,
    pub rel_tol: f64,
    /// Cap on total kernel evaluations across refinements.
    pub max_evals: usize,
}

impl Default for ContourPolicy {
    fn default() -> Self {
        ContourPolicy {
            abscissa: None,
            half_length: 60.0,
            nodes: 128,
            pole_margin: 1e-3,
            rel_tol: 1e-6,
            max_evals: 1 << 20,
        }
    }
}

impl ContourPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 64 {
            return Err(Error::param("contour policy needs at least 64 nodes"));
        }
        if !(self.half_length > 0.0) {
            return Err(Error::param("contour half_length must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MellinValue {
    pub value: f64,
    /// Imaginary part of the quadrature; should vanish for real H-functions.
    pub imag: f64,
    pub error_estimate: f64,
    pub abscissa: Vec<f64>,
    pub nodes: Vec<usize>,
    pub half_length: Vec<f64>,
}

/// Midpoint of the gap between the rightmost left pole and the leftmost right
/// pole; one unit inside when a side is unbounded.
pub fn choose_abscissa(lo: f64, hi: f64, margin: f64) -> Result<f64> {
    if hi - lo < 2.0 * margin {
        return Err(Error::PoleSeparation(format!("gap ({lo}, {hi}) narrower than 2*{margin}")));
    }
    Ok(match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo + 1.0,
        (false, true) => hi - 1.0,
        (false, false) => 0.0,
    })
}

// Relative size below which the kernel counts as decayed.
const DECAY_EPS: f64 = 1e-17;

/// Largest |t| at which `mag(t)` still exceeds `DECAY_EPS` times its peak,
/// scanned on a coarse grid up to `t_max`.
fn decay_length<F: Fn(f64) -> f64>(mag: F, t_max: f64) -> Result<f64> {
    let step = 0.25;
    let n = (t_max / step).ceil() as usize;
    let vals: Vec<f64> = (0..=n)
        .map(|i| {
            let t = i as f64 * step;
            mag(t).max(mag(-t))
        })
        .collect();
    let peak = vals.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 || !peak.is_finite() {
        return Err(Error::DivergentKernel(format!("kernel peak {peak} on the contour")));
    }
    if vals[n] > DECAY_EPS * peak {
        return Err(Error::DivergentKernel(format!(
            "kernel still at {:.3e} of its peak at |t| = {t_max}",
            vals[n] / peak
        )));
    }
    let last = vals.iter().rposition(|&v| v > DECAY_EPS * peak).unwrap_or(0);
    Ok(((last + 1) as f64 * step).max(1.0))
}

/// Initial trapezoid step for a strip of half-width `d`: the discretisation
/// error of the trapezoid rule on a line decays like `exp(-2πd/h)`.
fn initial_step(d: f64, rel_tol: f64) -> f64 {
    let d = d.clamp(1e-3, 2.0);
    // start one halving coarser than the estimate so refinement confirms it
    2.0 * 2.0 * std::f64::consts::PI * d / (-(rel_tol * 1e-4).ln())
}

fn grid(half: f64, h: f64, min_nodes: usize) -> (Vec<f64>, f64) {
    let k = ((half / h).ceil() as usize).max(min_nodes / 2);
    let h = half / k as f64;
    ((0..=2 * k).map(|i| (i as f64 - k as f64) * h).collect(), h)
}

/// Generic two-variable Mellin-Barnes quadrature with separable parts.
///
/// `per1(s1)`, `per2(s2)` and `joint(s1, s2)` multiply to the kernel. The
/// per-variable factors are evaluated once per node; only `joint` runs on
/// the tensor grid. `strip[i]` is the distance from `abscissa[i]` to the
/// nearest pole of variable `i`; it sets the step. Each variable's
/// truncation length comes from the decay of the kernel along its axis.
/// Steps are halved until successive results agree to `policy.rel_tol`.
pub fn mellin_barnes_2d<P1, P2, J>(
    per1: P1,
    per2: P2,
    joint: J,
    abscissa: [f64; 2],
    strip: [f64; 2],
    policy: &ContourPolicy,
) -> Result<MellinValue>
where
    P1: Fn(Complex64) -> Complex64 + Sync,
    P2: Fn(Complex64) -> Complex64 + Sync,
    J: Fn(Complex64, Complex64) -> Complex64 + Sync,
{
    policy.validate()?;
    let s1c = Complex64::new(abscissa[0], 0.0);
    let s2c = Complex64::new(abscissa[1], 0.0);
    let p1c = per1(s1c);
    let p2c = per2(s2c);
    let half1 = decay_length(
        |t| {
            let s = Complex64::new(abscissa[0], t);
            (per1(s) * p2c * joint(s, s2c)).norm()
        },
        policy.half_length,
    )?;
    let half2 = decay_length(
        |t| {
            let s = Complex64::new(abscissa[1], t);
            (p1c * per2(s) * joint(s1c, s)).norm()
        },
        policy.half_length,
    )?;
    let mut h1 = initial_step(strip[0], policy.rel_tol);
    let mut h2 = initial_step(strip[1], policy.rel_tol);
    let min_nodes = policy.nodes / 2;
    let mut evals = 0usize;
    let mut prev: Option<Complex64> = None;
    loop {
        let (t1, g1) = grid(half1, h1, min_nodes);
        let (t2, g2) = grid(half2, h2, min_nodes);
        let cost = t1.len() * t2.len();
        if evals + cost > policy.max_evals {
            return match prev {
                Some(p) => Err(Error::NonConvergence(format!(
                    "Mellin-Barnes node cap reached; last value {:.6e}",
                    p.re
                ))),
                None => Err(Error::NonConvergence("Mellin-Barnes node cap reached before refinement".into())),
            };
        }
        let a1: Vec<Complex64> = t1.iter().map(|&t| per1(Complex64::new(abscissa[0], t))).collect();
        let a2: Vec<Complex64> = t2.iter().map(|&t| per2(Complex64::new(abscissa[1], t))).collect();
        let (sum, abs_sum) = (0..t1.len())
            .into_par_iter()
            .map(|i| {
                let s1 = Complex64::new(abscissa[0], t1[i]);
                let mut row = Complex64::new(0.0, 0.0);
                let mut mag = 0.0;
                for (k, &t) in t2.iter().enumerate() {
                    let v = a1[i] * a2[k];
                    if v.norm_sqr() == 0.0 {
                        continue;
                    }
                    let term = v * joint(s1, Complex64::new(abscissa[1], t));
                    row += term;
                    mag += term.norm();
                }
                (row, mag)
            })
            .reduce(|| (Complex64::new(0.0, 0.0), 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        evals += cost;
        let scale = g1 * g2 / (4.0 * std::f64::consts::PI * std::f64::consts::PI);
        let val = sum * scale;
        if let Some(p) = prev {
            let diff = (val - p).norm();
            // the absolute floor covers values that cancel to near zero
            if diff <= policy.rel_tol * val.norm() || diff <= 1e-15 * abs_sum * scale {
                return Ok(MellinValue {
                    value: val.re,
                    imag: val.im,
                    error_estimate: diff,
                    abscissa: abscissa.to_vec(),
                    nodes: vec![t1.len(), t2.len()],
                    half_length: vec![half1, half2],
                });
            }
        }
        prev = Some(val);
        h1 *= 0.5;
        h2 *= 0.5;
    }
}

/// One-variable Mellin-Barnes quadrature, same conventions.
pub fn mellin_barnes_1d<P>(per: P, abscissa: f64, strip: f64, policy: &ContourPolicy) -> Result<MellinValue>
where
    P: Fn(Complex64) -> Complex64,
{
    policy.validate()?;
    let half = decay_length(|t| per(Complex64::new(abscissa, t)).norm(), policy.half_length)?;
    let mut h = initial_step(strip, policy.rel_tol);
    let mut prev: Option<Complex64> = None;
    let mut evals = 0;
    loop {
        let (t, g) = grid(half, h, policy.nodes);
        if evals + t.len() > policy.max_evals {
            return Err(Error::NonConvergence("Mellin-Barnes node cap reached".into()));
        }
        evals += t.len();
        let val: Complex64 =
            t.iter().map(|&ti| per(Complex64::new(abscissa, ti))).sum::<Complex64>() * (g / (2.0 * std::f64::consts::PI));
        if let Some(p) = prev {
            let diff = (val - p).norm();
            if diff <= policy.rel_tol * val.norm() {
                return Ok(MellinValue {
                    value: val.re,
                    imag: val.im,
                    error_estimate: diff,
                    abscissa: vec![abscissa],
                    nodes: vec![t.len()],
                    half_length: vec![half],
                });
            }
        }
        prev = Some(val);
        h *= 0.5;
    }
}

/// Distance from each chosen abscissa to the nearest per-variable pole.
fn strip_widths(spec: &FoxHSpec, c: &[f64]) -> Vec<f64> {
    spec.pole_gaps()
        .iter()
        .zip(c)
        .map(|(&(lo, hi), &ci)| {
            let d = (ci - lo).min(hi - ci);
            if d.is_finite() {
                d
            } else {
                1.0
            }
        })
        .collect()
}

fn resolve_abscissa(spec: &FoxHSpec, policy: &ContourPolicy) -> Result<Vec<f64>> {
    let c = match &policy.abscissa {
        Some(c) => {
            if c.len() != spec.arity {
                return Err(Error::param("abscissa count differs from arity"));
            }
            c.clone()
        }
        None => spec
            .pole_gaps()
            .into_iter()
            .map(|(lo, hi)| choose_abscissa(lo, hi, policy.pole_margin))
            .collect::<Result<Vec<_>>>()?,
    };
    // joint numerator factors must also sit right of their poles
    for g in &spec.numerator_joint {
        let re: f64 = g.offset + g.coefficients.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
        if re < policy.pole_margin {
            return Err(Error::PoleSeparation(format!(
                "joint factor Γ({} + ...) has real part {re} on the chosen contour",
                g.offset
            )));
        }
    }
    Ok(c)
}

/// Bivariate Fox H-function evaluated along two truncated vertical contours.
pub fn fox_h_bivariate(spec: &FoxHSpec, x1: f64, x2: f64, policy: &ContourPolicy) -> Result<MellinValue> {
    spec.validate()?;
    if spec.arity != 2 {
        return Err(Error::param("fox_h_bivariate needs arity 2"));
    }
    if !(x1 > 0.0 && x2 > 0.0) {
        return Err(Error::param("fox_h_bivariate arguments must be positive"));
    }
    let c = resolve_abscissa(spec, policy)?;
    let (l1, l2) = (x1.ln(), x2.ln());
    let sg = spec.sign_convention.clone();
    let zero = Complex64::new(0.0, 0.0);
    let per = |var: usize, s: Complex64| -> Complex64 {
        let mut args = [zero, zero];
        args[var] = s;
        let mut acc = s * sg[var] * if var == 0 { l1 } else { l2 };
        for g in &spec.numerator_per_var {
            if g.var() == Some(var) {
                acc += ln_gamma_mod_2pi(g.arg(&args));
            }
        }
        for g in &spec.denominator_per_var {
            if g.var() == Some(var) {
                acc -= ln_gamma_mod_2pi(g.arg(&args));
            }
        }
        acc.exp()
    };
    let joint = |s1: Complex64, s2: Complex64| -> Complex64 {
        let args = [s1, s2];
        let mut acc = zero;
        for g in &spec.numerator_joint {
            acc += ln_gamma_mod_2pi(g.arg(&args));
        }
        for g in &spec.denominator_joint {
            acc -= ln_gamma_mod_2pi(g.arg(&args));
        }
        acc.exp()
    };
    let d = strip_widths(spec, &c);
    mellin_barnes_2d(|s| per(0, s), |s| per(1, s), joint, [c[0], c[1]], [d[0], d[1]], policy)
}

/// One-variable Fox H-function with the same spec layout (arity 1).
pub fn fox_h_univariate(spec: &FoxHSpec, x: f64, policy: &ContourPolicy) -> Result<MellinValue> {
    spec.validate()?;
    if spec.arity != 1 {
        return Err(Error::param("fox_h_univariate needs arity 1"));
    }
    if !(x > 0.0) {
        return Err(Error::param("fox_h_univariate argument must be positive"));
    }
    let c = resolve_abscissa(spec, policy)?;
    let lx = x.ln();
    let sg = spec.sign_convention[0];
    let d = strip_widths(spec, &c);
    mellin_barnes_1d(|s| (spec.log_kernel(&[s]) + s * sg * lx).exp(), c[0], d[0], policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_pair(arity: usize, var: usize) -> GammaFactor {
        GammaFactor::single(arity, var, 0.0, 1.0)
    }

    #[test]
    fn separable_exponentials() {
        // Γ(s) x^{-s} is the Mellin pair of e^{-x}
        let spec = FoxHSpec {
            arity: 2,
            numerator_joint: vec![],
            denominator_joint: vec![],
            numerator_per_var: vec![exp_pair(2, 0), exp_pair(2, 1)],
            denominator_per_var: vec![],
            sign_convention: vec![-1.0, -1.0],
        };
        let v = fox_h_bivariate(&spec, 1.0, 2.0, &ContourPolicy::default()).unwrap();
        assert!((v.value - (-3.0f64).exp()).abs() < 1e-9, "{:?}", v);
        assert!(v.imag.abs() < 1e-9);
    }

    #[test]
    fn pole_separation_failure() {
        // Γ(s) and Γ(-s-1) leave no gap between the families
        let spec = FoxHSpec {
            arity: 1,
            numerator_joint: vec![],
            denominator_joint: vec![],
            numerator_per_var: vec![GammaFactor::single(1, 0, 0.0, 1.0), GammaFactor::single(1, 0, -1.0, -1.0)],
            denominator_per_var: vec![],
            sign_convention: vec![-1.0],
        };
        let r = fox_h_univariate(&spec, 1.0, &ContourPolicy::default());
        assert!(matches!(r, Err(Error::PoleSeparation(_))));
    }

    #[test]
    fn abscissa_midpoint() {
        assert_eq!(choose_abscissa(-1.0, 3.0, 0.1).unwrap(), 1.0);
        assert!(choose_abscissa(0.0, 0.1, 0.1).is_err());
    }
}
