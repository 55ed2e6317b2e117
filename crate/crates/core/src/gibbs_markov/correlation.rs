//! Correlation sequences along stationary orbits and geometric decay fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inducing::Dynamics;
use crate::numeric::{fit_line, mean_and_se};
use crate::systems::Observable;

/// Smallest orbit length accepted by [`correlation_sequence`].
pub const MIN_BUDGET: usize = 1_000_000;
/// Number of contiguous blocks used for per-lag standard errors.
pub const BLOCKS: usize = 50;
/// Lags whose correlation is below this many standard errors are noise.
pub const NOISE_FLOOR_SE: f64 = 3.0;

/// `C(n) = E[v · w∘f^n] − E[v]E[w]` for `n = 0..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSequence {
    pub values: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub mean_v: f64,
    pub mean_w: f64,
    pub budget: usize,
    /// Per-block correlation estimates, `[block][lag]`.
    #[serde(skip)]
    pub block_values: Vec<Vec<f64>>,
}

impl CorrelationSequence {
    pub fn n_max(&self) -> usize {
        self.values.len() - 1
    }

    /// Whether lag `n` clears the noise floor.
    pub fn above_floor(&self, n: usize) -> bool {
        self.values[n].abs() > NOISE_FLOOR_SE * self.standard_errors[n]
    }
}

#[derive(Default, Clone)]
struct Accumulator {
    sum_v: f64,
    sum_w: f64,
    count: usize,
    products: Vec<f64>,
    pairs: Vec<usize>,
}

impl Accumulator {
    fn new(lags: usize) -> Self {
        Self {
            products: vec![0.0; lags],
            pairs: vec![0; lags],
            ..Default::default()
        }
    }

    fn estimate(&self) -> Vec<f64> {
        let mv = self.sum_v / self.count as f64;
        let mw = self.sum_w / self.count as f64;
        self.products
            .iter()
            .zip(&self.pairs)
            .map(|(&p, &c)| {
                if c == 0 {
                    f64::NAN
                } else {
                    p / c as f64 - mv * mw
                }
            })
            .collect()
    }
}

/// Empirical correlations along one stationary orbit of length `budget`,
/// with standard errors from [`BLOCKS`] contiguous blocks.
pub fn correlation_sequence(
    dynamics: &dyn Dynamics,
    v: &Observable,
    w: &Observable,
    n_max: usize,
    budget: usize,
    seed: u64,
) -> Result<CorrelationSequence> {
    if budget < MIN_BUDGET {
        return Err(Error::Parameter(format!(
            "correlation budget must be at least {MIN_BUDGET}, got {budget}"
        )));
    }
    if n_max * BLOCKS >= budget {
        return Err(Error::Parameter(format!(
            "lag {n_max} too large for budget {budget}"
        )));
    }
    let lags = n_max + 1;
    let block_len = budget / BLOCKS;
    let mut total = Accumulator::new(lags);
    let mut blocks = vec![Accumulator::new(lags); BLOCKS];
    // ring buffer of the last `lags` values of v
    let mut ring = vec![0.0; lags];
    for (i, x) in dynamics
        .stationary_points(seed)
        .take(block_len * BLOCKS)
        .enumerate()
    {
        let x = x?;
        let vx = v.eval(x);
        let wx = w.eval(x);
        ring[i % lags] = vx;
        let block = &mut blocks[i / block_len];
        for n in 0..lags.min(i + 1) {
            let p = ring[(i - n) % lags] * wx;
            total.products[n] += p;
            total.pairs[n] += 1;
            block.products[n] += p;
            block.pairs[n] += 1;
        }
        total.sum_v += vx;
        total.sum_w += wx;
        total.count += 1;
        block.sum_v += vx;
        block.sum_w += wx;
        block.count += 1;
    }
    let values = total.estimate();
    let per_block: Vec<Vec<f64>> = blocks.iter().map(Accumulator::estimate).collect();
    let standard_errors = (0..lags)
        .map(|n| {
            let col: Vec<f64> = per_block.iter().map(|b| b[n]).collect();
            mean_and_se(&col).1
        })
        .collect();
    Ok(CorrelationSequence {
        values,
        standard_errors,
        mean_v: total.sum_v / total.count as f64,
        mean_w: total.sum_w / total.count as f64,
        budget: total.count,
        block_values: per_block,
    })
}

/// Result of fitting `|C(n)| ≈ C τ^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayFit {
    Geometric {
        constant: f64,
        constant_ci: (f64, f64),
        rate: f64,
        rate_ci: (f64, f64),
        slope: f64,
        r_squared: f64,
        lags: Vec<usize>,
    },
    /// Fewer than five lags clear the noise floor: correlations vanish
    /// faster than the orbit can resolve.
    Degenerate { lags_above_floor: usize },
}

impl DecayFit {
    pub fn is_degenerate(&self) -> bool {
        matches!(self, DecayFit::Degenerate { .. })
    }
}

/// Least-squares fit of `log|C(n)|` over the run of lags `1, 2, …` that
/// clear `3 × SE`.
pub fn fit_decay(values: &[f64], standard_errors: &[f64]) -> Result<DecayFit> {
    if values.len() != standard_errors.len() {
        return Err(Error::Parameter("fit_decay: length mismatch".into()));
    }
    let mut lags = Vec::new();
    for n in 1..values.len() {
        let c = values[n].abs();
        if c > 0.0 && c > NOISE_FLOOR_SE * standard_errors[n] {
            lags.push(n);
        } else {
            break;
        }
    }
    if lags.len() < 5 {
        return Ok(DecayFit::Degenerate {
            lags_above_floor: lags.len(),
        });
    }
    let x: Vec<f64> = lags.iter().map(|&n| n as f64).collect();
    let y: Vec<f64> = lags.iter().map(|&n| values[n].abs().ln()).collect();
    let fit = fit_line(&x, &y)?;
    let z = 1.96;
    Ok(DecayFit::Geometric {
        constant: fit.intercept.exp(),
        constant_ci: (
            (fit.intercept - z * fit.intercept_se).exp(),
            (fit.intercept + z * fit.intercept_se).exp(),
        ),
        rate: fit.slope.exp(),
        rate_ci: (
            (fit.slope - z * fit.slope_se).exp(),
            (fit.slope + z * fit.slope_se).exp(),
        ),
        slope: fit.slope,
        r_squared: fit.r_squared,
        lags,
    })
}
