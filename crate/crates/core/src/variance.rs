//! Asymptotic variance of Birkhoff sums: Green–Kubo and batch-means
//! estimators, variance growth, and coboundary detection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs_markov::correlation::{correlation_sequence, CorrelationSequence, NOISE_FLOOR_SE};
use crate::gibbs_markov::transfer::{sup_norm, TransferDisc};
use crate::inducing::Dynamics;
use crate::numeric::{mean_and_se, variance};
use crate::rng::split_seed;
use crate::systems::{MapSystem, Observable, SystemKind};

/// Largest truncation lag chosen automatically.
pub const MAX_AUTO_LAG: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMethod {
    GreenKubo,
    BatchMeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    /// Estimate after projection onto `[0, ∞)`.
    pub sigma2: f64,
    /// Estimate before projection.
    pub raw_sigma2: f64,
    pub method: VarianceMethod,
    pub truncation_lag: Option<usize>,
    pub block_length: Option<usize>,
    pub standard_error: f64,
    /// Raw estimate within three standard errors of zero.
    pub degenerate: bool,
}

impl VarianceEstimate {
    fn new(raw: f64, se: f64, method: VarianceMethod) -> Self {
        Self {
            sigma2: raw.max(0.0),
            raw_sigma2: raw,
            method,
            truncation_lag: None,
            block_length: None,
            standard_error: se,
            degenerate: raw < 3.0 * se || (raw <= 0.0 && se == 0.0),
        }
    }
}

/// Truncation lag for the Green–Kubo sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    /// First lag whose correlation drops below the noise floor, capped at
    /// [`MAX_AUTO_LAG`].
    Auto,
    Fixed(usize),
}

/// Green–Kubo estimate together with the correlations it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenKubo {
    pub estimate: VarianceEstimate,
    pub correlations: CorrelationSequence,
    /// `|C(K)|` at the truncation lag and its noise floor.
    pub last_lag: f64,
    pub last_lag_floor: f64,
}

fn truncated_sum(c: &[f64], k: usize) -> f64 {
    c[0] + 2.0 * c[1..=k].iter().sum::<f64>()
}

/// `σ̂² = C(0) + 2 Σ_{k=1}^{K} C(k)` along one orbit of length `budget`.
pub fn green_kubo(
    dynamics: &dyn Dynamics,
    v: &Observable,
    truncation: Truncation,
    budget: usize,
    seed: u64,
) -> Result<GreenKubo> {
    let n_max = match truncation {
        Truncation::Fixed(0) => {
            return Err(Error::Parameter("truncation lag must be at least 1".into()))
        }
        Truncation::Fixed(k) => {
            if k * crate::gibbs_markov::correlation::BLOCKS >= budget {
                return Err(Error::Parameter(format!(
                    "truncation lag {k} exceeds the lags available from budget {budget}"
                )));
            }
            k
        }
        Truncation::Auto => MAX_AUTO_LAG,
    };
    let seq = correlation_sequence(dynamics, v, v, n_max, budget, seed)?;
    let k = match truncation {
        Truncation::Fixed(k) => k,
        Truncation::Auto => (1..=MAX_AUTO_LAG)
            .find(|&n| !seq.above_floor(n))
            .unwrap_or(MAX_AUTO_LAG),
    };
    let raw = truncated_sum(&seq.values, k);
    let per_block: Vec<f64> = seq
        .block_values
        .iter()
        .map(|b| truncated_sum(b, k))
        .collect();
    let (_, se) = mean_and_se(&per_block);
    let mut estimate = VarianceEstimate::new(raw, se, VarianceMethod::GreenKubo);
    estimate.truncation_lag = Some(k);
    Ok(GreenKubo {
        estimate,
        last_lag: seq.values[k].abs(),
        last_lag_floor: NOISE_FLOOR_SE * seq.standard_errors[k],
        correlations: seq,
    })
}

/// Batch-means estimate from increments `xs`: the sample variance of block
/// sums of length `block` divided by `block`.
pub fn batch_means(xs: &[f64], block: usize) -> Result<VarianceEstimate> {
    if block == 0 {
        return Err(Error::Parameter("block length must be positive".into()));
    }
    if xs.len() < 100 * block {
        return Err(Error::InsufficientData {
            needed: 100 * block,
            got: xs.len(),
        });
    }
    let sums: Vec<f64> = xs.chunks_exact(block).map(|c| c.iter().sum()).collect();
    Ok(batch_means_from_sums(&sums, block))
}

/// Batch-means estimate from precomputed block sums.
pub fn batch_means_from_sums(sums: &[f64], block: usize) -> VarianceEstimate {
    let raw = variance(sums) / block as f64;
    let se = raw * (2.0 / (sums.len() as f64 - 1.0)).sqrt();
    let mut e = VarianceEstimate::new(raw, se, VarianceMethod::BatchMeans);
    e.block_length = Some(block);
    e
}

/// Batch means along one orbit of `n_blocks · block` points, streamed.
pub fn batch_means_orbit(
    dynamics: &dyn Dynamics,
    v: &Observable,
    block: usize,
    n_blocks: usize,
    seed: u64,
) -> Result<VarianceEstimate> {
    if block == 0 || n_blocks < 100 {
        return Err(Error::InsufficientData {
            needed: 100,
            got: n_blocks,
        });
    }
    let mut points = dynamics.stationary_points(seed);
    let mut sums = Vec::with_capacity(n_blocks);
    for _ in 0..n_blocks {
        let mut s = 0.0;
        for _ in 0..block {
            let x = points.next().expect("orbits are infinite")?;
            s += v.eval(x);
        }
        sums.push(s);
    }
    Ok(batch_means_from_sums(&sums, block))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub n: usize,
    /// Monte Carlo `E[v_N²]`.
    pub mean_square: f64,
    pub mean_square_se: f64,
    /// `E[v_N²] / N`.
    pub ratio: f64,
    pub ratio_se: f64,
}

/// `E[v_N²]/N` on a grid of horizons over independent stationary replicas.
pub fn variance_growth(
    dynamics: &dyn Dynamics,
    v: &Observable,
    grid: &[usize],
    replicas: usize,
    seed: u64,
) -> Result<Vec<GrowthRow>> {
    if grid.is_empty() || grid.iter().any(|&n| n == 0) {
        return Err(Error::Parameter(
            "horizon grid must hold positive values".into(),
        ));
    }
    if replicas < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: replicas,
        });
    }
    let mut sorted = grid.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let horizon = *sorted.last().expect("nonempty");
    let squares: Vec<Vec<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(sorted.len());
            let mut s = 0.0;
            let mut next = 0;
            for (i, x) in dynamics
                .stationary_points(split_seed(seed, r as u64))
                .take(horizon)
                .enumerate()
            {
                s += v.eval(x?);
                if i + 1 == sorted[next] {
                    out.push(s * s);
                    next += 1;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let col: Vec<f64> = squares.iter().map(|s| s[j]).collect();
            let (m, se) = mean_and_se(&col);
            GrowthRow {
                n,
                mean_square: m,
                mean_square_se: se,
                ratio: m / n as f64,
                ratio_se: se / n as f64,
            }
        })
        .collect())
}

/// `E[v_N²] − σ² N` per row.
pub fn growth_residuals(rows: &[GrowthRow], sigma2: f64) -> Vec<f64> {
    rows.iter()
        .map(|r| r.mean_square - sigma2 * r.n as f64)
        .collect()
}

/// Nonzero Birkhoff sum of `v` over a periodic orbit of the doubling map
/// with period at most `max_period`, which certifies `σ² > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicWitness {
    pub period: u32,
    pub point: f64,
    pub sum: f64,
}

/// Search periodic points `m/(2^k − 1)` of the doubling map for a nonzero
/// orbit sum of `v`.
pub fn periodic_precheck(v: &Observable, max_period: u32, tol: f64) -> Option<PeriodicWitness> {
    for k in 1..=max_period.min(20) {
        let q = (1u64 << k) - 1;
        for m in 0..q {
            let mut num = m;
            let mut sum = 0.0;
            for _ in 0..k {
                sum += v.eval(num as f64 / q as f64);
                num = (2 * num) % q;
            }
            if sum.abs() > tol {
                return Some(PeriodicWitness {
                    period: k,
                    point: m as f64 / q as f64,
                    sum,
                });
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoboundaryVerdict {
    pub degenerate: bool,
    pub witness: Option<PeriodicWitness>,
    pub sigma2_hat: Option<VarianceEstimate>,
    /// `∫ v̂²` and `∫ v²` on the grid.
    pub hat_l2_sq: f64,
    pub v_l2_sq: f64,
}

/// Decomposition `v = v̂ + w∘f − w` with `w = Σ_{j=1}^{J} P^j v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoboundarySolution {
    pub grid: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub v_hat: Vec<f64>,
    /// Grid sup norm of `P v̂`, which vanishes for an exact solution.
    pub residual: f64,
    /// Grid sup norm of `v − v̂ − (w∘f − w)`.
    pub decomposition_error: f64,
    pub verdict: CoboundaryVerdict,
}

/// Relative `L²` size of `v̂` below which it is treated as discretization
/// noise.
pub const HAT_RELATIVE_FLOOR: f64 = 1e-3;

/// Options for the orbit-based variance check on `v̂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerdictOptions {
    pub budget: usize,
    pub seed: u64,
    pub max_period: u32,
}

impl Default for VerdictOptions {
    fn default() -> Self {
        Self {
            budget: 1_000_000,
            seed: 0,
            max_period: 8,
        }
    }
}

pub fn coboundary_solve(
    op: &TransferDisc,
    v: &Observable,
    terms: usize,
    opts: VerdictOptions,
) -> Result<CoboundarySolution> {
    let system: MapSystem = *op.system().ok_or_else(|| {
        Error::Parameter("coboundary solve needs an exact-branch operator".into())
    })?;
    let grid = op.grid().expect("exact-branch grid");
    let vg: Vec<f64> = grid.iter().map(|&x| v.eval(x)).collect();
    let limit = 1e3 * sup_norm(&vg).max(f64::MIN_POSITIVE);
    let mut w = vec![0.0; vg.len()];
    let mut term = vg.clone();
    for _ in 0..terms {
        term = op.apply(&term)?;
        for (a, b) in w.iter_mut().zip(&term) {
            *a += b;
        }
        let reached = sup_norm(&w);
        if reached > limit {
            return Err(Error::NoGap { reached, limit });
        }
    }
    let wf = op.compose_with_map(&w)?;
    let v_hat: Vec<f64> = vg
        .iter()
        .zip(wf.iter().zip(&w))
        .map(|(a, (b, c))| a - (b - c))
        .collect();
    let residual = sup_norm(&op.apply(&v_hat)?);
    let decomposition_error = vg
        .iter()
        .zip(&v_hat)
        .zip(wf.iter().zip(&w))
        .map(|((a, h), (b, c))| (a - h - (b - c)).abs())
        .fold(0.0, f64::max);

    let hat_l2_sq = op.integrate(&v_hat.iter().map(|x| x * x).collect::<Vec<_>>());
    let v_l2_sq = op.integrate(&vg.iter().map(|x| x * x).collect::<Vec<_>>());
    let witness = if system.kind() == SystemKind::Doubling {
        periodic_precheck(v, opts.max_period, 1e-8)
    } else {
        None
    };
    let verdict = if witness.is_some() {
        CoboundaryVerdict {
            degenerate: false,
            witness,
            sigma2_hat: None,
            hat_l2_sq,
            v_l2_sq,
        }
    } else if hat_l2_sq <= HAT_RELATIVE_FLOOR.powi(2) * v_l2_sq {
        CoboundaryVerdict {
            degenerate: true,
            witness,
            sigma2_hat: None,
            hat_l2_sq,
            v_l2_sq,
        }
    } else {
        let table = v_hat.clone();
        let op_c = op.clone();
        let hat_obs = Observable::new(
            format!("{}-hat", v.name()),
            move |x| op_c.interpolate(&table, x).expect("exact-branch grid"),
            v.holder_exponent,
            v.holder_constant,
            sup_norm(&v_hat),
        )?;
        let gk = green_kubo(&system, &hat_obs, Truncation::Auto, opts.budget, opts.seed)?;
        CoboundaryVerdict {
            degenerate: gk.estimate.degenerate,
            witness,
            sigma2_hat: Some(gk.estimate),
            hat_l2_sq,
            v_l2_sq,
        }
    };
    Ok(CoboundarySolution {
        grid,
        v: vg,
        w,
        v_hat,
        residual,
        decomposition_error,
        verdict,
    })
}
