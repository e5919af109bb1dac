//! Monte-Carlo oracle for the SINR distribution, detection error and rate.
//!
//! Draws are split into fixed-size blocks; block `b` uses the ChaCha stream
//! `b` of the configured seed, and block results are combined in block
//! order. Estimates therefore do not depend on the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covert_metrics::WardenChannel;
use crate::error::{Error, Result};
use crate::fading::{FisherSampler, FtrSampler};
use crate::sinr_stats::UserChannel;

pub const BLOCK: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { samples: 1_000_000, seed: 1, workers: 0 }
    }
}

impl McConfig {
    fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::param("Monte Carlo needs at least one sample"));
        }
        Ok(())
    }
}

/// Estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

impl Estimate {
    fn proportion(hits: u64, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        Estimate { value: p, std_err: (p * (1.0 - p) / n as f64).sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfEstimate {
    pub gamma: Vec<f64>,
    pub cdf: Vec<Estimate>,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepEstimate {
    pub p_fa: Estimate,
    pub p_md: Estimate,
    pub xi: Estimate,
}

fn block_rng(seed: u64, block: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    rng
}

/// Runs `f(rng, count)` on every block and returns the block results in
/// order.
fn run_blocks<T, F>(cfg: &McConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha12Rng, usize) -> T + Sync,
{
    cfg.validate()?;
    let blocks = cfg.samples.div_ceil(BLOCK);
    let work = || {
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let n = BLOCK.min(cfg.samples - b * BLOCK);
                f(&mut block_rng(cfg.seed, b), n)
            })
            .collect::<Vec<T>>()
    };
    if cfg.workers == 0 {
        return Ok(work());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::param(format!("thread pool: {e}")))?;
    Ok(pool.install(work))
}

/// Draws of `γ = C₁X/(κ² + C₂Z)`.
pub fn sample_sinr(ch: &UserChannel, cfg: &McConfig) -> Result<Vec<f64>> {
    let xs = FtrSampler::new(&ch.ftr)?;
    let zs = FisherSampler::new(&ch.fisher)?;
    let l = ch.link;
    let blocks = run_blocks(cfg, |rng, n| {
        (0..n).map(|_| l.c1 * xs.sample(rng) / (l.kappa2 + l.c2 * zs.sample(rng))).collect::<Vec<f64>>()
    })?;
    Ok(blocks.concat())
}

/// Empirical SINR CDF on a grid with binomial standard errors.
pub fn estimate_sinr_cdf(ch: &UserChannel, gamma_grid: &[f64], cfg: &McConfig) -> Result<CdfEstimate> {
    let xs = FtrSampler::new(&ch.ftr)?;
    let zs = FisherSampler::new(&ch.fisher)?;
    let l = ch.link;
    let counts = run_blocks(cfg, |rng, n| {
        let mut draws: Vec<f64> =
            (0..n).map(|_| l.c1 * xs.sample(rng) / (l.kappa2 + l.c2 * zs.sample(rng))).collect();
        draws.sort_by(f64::total_cmp);
        gamma_grid.iter().map(|&g| draws.partition_point(|&d| d <= g) as u64).collect::<Vec<u64>>()
    })?;
    let cdf = (0..gamma_grid.len())
        .map(|i| {
            let hits: u64 = counts.iter().map(|c| c[i]).sum();
            if gamma_grid[i] <= 0.0 {
                Estimate { value: 0.0, std_err: 0.0 }
            } else {
                Estimate::proportion(hits, cfg.samples)
            }
        })
        .collect();
    Ok(CdfEstimate { gamma: gamma_grid.to_vec(), cdf, samples: cfg.samples })
}

/// Empirical false-alarm, missed-detection and detection error probabilities.
/// The two hypotheses use independent draws.
pub fn estimate_dep(w: &WardenChannel, epsilon: f64, cfg: &McConfig) -> Result<DepEstimate> {
    let xs = FtrSampler::new(&w.ftr_w)?;
    let zs = FisherSampler::new(&w.fisher_w)?;
    let l = w.link_w;
    let counts = run_blocks(cfg, |rng, n| {
        let (mut fa, mut md) = (0u64, 0u64);
        for _ in 0..n {
            // H0: noise plus jamming only
            if l.kappa2 + l.c2 * zs.sample(rng) > epsilon {
                fa += 1;
            }
            // H1: the transmission is present
            if l.c1 * xs.sample(rng) + l.kappa2 + l.c2 * zs.sample(rng) <= epsilon {
                md += 1;
            }
        }
        (fa, md)
    })?;
    let fa: u64 = counts.iter().map(|c| c.0).sum();
    let md: u64 = counts.iter().map(|c| c.1).sum();
    let p_fa = Estimate::proportion(fa, cfg.samples);
    let p_md = Estimate::proportion(md, cfg.samples);
    let xi = Estimate { value: p_fa.value + p_md.value, std_err: p_fa.std_err.hypot(p_md.std_err) };
    Ok(DepEstimate { p_fa, p_md, xi })
}

/// Sample mean of `log₂(1 + γ)`.
pub fn estimate_rate(ch: &UserChannel, cfg: &McConfig) -> Result<Estimate> {
    if ch.link.c1 == 0.0 {
        return Ok(Estimate { value: 0.0, std_err: 0.0 });
    }
    let xs = FtrSampler::new(&ch.ftr)?;
    let zs = FisherSampler::new(&ch.fisher)?;
    let l = ch.link;
    let sums = run_blocks(cfg, |rng, n| {
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let r = (l.c1 * xs.sample(rng) / (l.kappa2 + l.c2 * zs.sample(rng))).ln_1p() / std::f64::consts::LN_2;
            s += r;
            s2 += r * r;
        }
        (s, s2)
    })?;
    let n = cfg.samples as f64;
    let (s, s2) = sums.iter().fold((0.0, 0.0), |acc, b| (acc.0 + b.0, acc.1 + b.1));
    let mean = s / n;
    let var = ((s2 / n - mean * mean) * n / (n - 1.0).max(1.0)).max(0.0);
    Ok(Estimate { value: mean, std_err: (var / n).sqrt() })
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `samples` and
/// `cdf`.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    d
}
