//! Log-gamma on the complex plane and real incomplete gamma helpers.

use num_complex::Complex64;

use crate::error::{Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

// B_{2k} / (2k (2k-1)) for the Stirling tail.
const STIRLING: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
    43867.0 / 244_188.0,
    -174_611.0 / 125_400.0,
];

/// Principal-branch `ln Γ(z)`.
///
/// The argument is shifted right with `ln Γ(z) = ln Γ(z+n) - Σ ln(z+k)` until
/// `|z+n|` is large enough for the Stirling series. Summing principal logs
/// term by term keeps the branch continuous away from the negative real axis.
pub fn ln_gamma_complex(z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() {
        return Err(Error::GammaPole(z.re));
    }
    Ok(ln_gamma_unchecked(z))
}

/// Same as [`ln_gamma_complex`] without the pole check; used in hot loops
/// where the contour is known to avoid poles.
#[inline]
pub fn ln_gamma_unchecked(mut z: Complex64) -> Complex64 {
    let mut shift = Complex64::new(0.0, 0.0);
    while z.norm_sqr() < 15.0 * 15.0 || z.re < 0.0 {
        shift += z.ln();
        z += 1.0;
    }
    let inv = z.inv();
    let inv2 = inv * inv;
    let mut series = Complex64::new(0.0, 0.0);
    let mut p = inv;
    for c in STIRLING {
        series += p * c;
        p *= inv2;
    }
    (z - 0.5) * z.ln() - z + HALF_LN_2PI + series - shift
}

/// `ln Γ(z)` up to an additive multiple of 2πi; cheaper than the principal
/// branch because the recurrence shift takes one logarithm of a product.
/// Only its exponential is meaningful.
#[inline]
pub fn ln_gamma_mod_2pi(mut z: Complex64) -> Complex64 {
    let mut prod = Complex64::new(1.0, 0.0);
    let mut shifted = false;
    while z.norm_sqr() < 100.0 || z.re < 0.0 {
        prod *= z;
        z += 1.0;
        shifted = true;
    }
    let inv = z.inv();
    let inv2 = inv * inv;
    let mut series = Complex64::new(0.0, 0.0);
    let mut p = inv;
    for c in STIRLING {
        series += p * c;
        p *= inv2;
    }
    let base = (z - 0.5) * z.ln() - z + HALF_LN_2PI + series;
    if shifted {
        base - prod.ln()
    } else {
        base
    }
}

/// `Γ(z)` for complex argument.
pub fn gamma_complex(z: Complex64) -> Result<Complex64> {
    ln_gamma_complex(z).map(|v| v.exp())
}

/// `ln |Γ(x)|` for real `x`, any sign.
pub fn ln_gamma_abs(x: f64) -> f64 {
    if x > 0.0 {
        statrs::function::gamma::ln_gamma(x)
    } else {
        // reflection: Γ(x)Γ(1-x) = π / sin(πx)
        let s = (std::f64::consts::PI * x).sin().abs();
        std::f64::consts::PI.ln() - s.ln() - statrs::function::gamma::ln_gamma(1.0 - x)
    }
}

/// `Γ(x)` for real `x`, finite away from non-positive integers.
pub fn gamma_real(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// `1/Γ(x)`, zero at the poles.
pub fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.round() {
        0.0
    } else if x > 170.0 {
        (-ln_gamma_abs(x)).exp()
    } else {
        1.0 / gamma_real(x)
    }
}

/// Regularized lower incomplete gamma `P(a, x)`, `a > 0`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    statrs::function::gamma::gamma_lr(a, x)
}

/// Upper incomplete gamma `Γ(s, x)` for any real `s` and `x > 0`.
pub fn upper_gamma(s: f64, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Err(Error::param(format!("upper_gamma needs x > 0, got {x}")));
    }
    if s > 0.0 && x < s + 1.0 {
        // the continued fraction converges poorly here; γ is the small part
        return Ok(gamma_real(s) - lower_gamma_series(s, x));
    }
    if x > 1.0 || (s <= 0.0 && x > 0.5) {
        return upper_gamma_cf(s, x);
    }
    if s > 0.0 {
        let g = gamma_real(s);
        return Ok(g * (1.0 - gamma_p(s, x)));
    }
    if s == s.round() {
        // integer s <= 0: E_n relation Γ(-n, x) = x^{-n} E_{n+1}(x)
        let n = (-s) as i32;
        return Ok(x.powi(-n) * expint_n(n as usize + 1, x)?);
    }
    // Γ(s) - γ(s, x) with the convergent power series of γ for non-integer s
    let mut sum = 0.0;
    let mut term = 1.0;
    let mut k = 0usize;
    loop {
        let add = term / (s + k as f64);
        sum += add;
        if add.abs() < 1e-17 * sum.abs() && k > 2 {
            break;
        }
        k += 1;
        term *= -x / k as f64;
        if k > 500 {
            return Err(Error::NonConvergence("upper_gamma series".into()));
        }
    }
    Ok(gamma_real(s) - x.powf(s) * sum)
}

/// Lower incomplete gamma `γ(s, x)` by its positive series, `s > 0`;
/// efficient for `x` up to about `s`.
pub fn lower_gamma_series(s: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut term = 1.0 / s;
    let mut sum = term;
    for n in 1..10_000 {
        term *= x / (s + n as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    (s * x.ln() - x).exp() * sum
}

// Modified Lentz evaluation of the Legendre continued fraction.
fn upper_gamma_cf(s: f64, x: f64) -> Result<f64> {
    Ok((s * x.ln() - x).exp() * upper_gamma_cf_scaled(s, x)?)
}

/// `Γ(s, x) · x^{-s} e^{x}` by continued fraction; converges for any real
/// `s` once `x` is not small.
pub fn upper_gamma_cf_scaled(s: f64, x: f64) -> Result<f64> {
    let tiny = 1e-300;
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            return Ok(h);
        }
    }
    Err(Error::NonConvergence("upper_gamma continued fraction".into()))
}

/// Generalized exponential integral `E_n(x)`, `x > 0`.
pub fn expint_n(n: usize, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Err(Error::param("expint_n needs x > 0"));
    }
    if x > 1.0 {
        let s = 1.0 - n as f64;
        return Ok(x.powf(n as f64 - 1.0) * upper_gamma_cf(s, x)?);
    }
    // E_1 series then the upward recurrence E_{k+1} = (e^{-x} - x E_k)/k,
    // stable for x <= 1
    let euler = 0.577_215_664_901_532_9;
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..200 {
        term *= -x / k as f64;
        let add = term / k as f64;
        sum += add;
        if add.abs() < 1e-18 {
            break;
        }
    }
    let mut e = -euler - x.ln() - sum;
    let ex = (-x).exp();
    for k in 1..n {
        e = (ex - x * e) / k as f64;
    }
    Ok(e)
}
