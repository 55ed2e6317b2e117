//! Limit-law battery: central limit theorem, functional invariance
//! principle, iterated-logarithm diagnostic and degeneracy detection.
//!
//! Partial sums are scaled by [`scaled_sum`] everywhere so that identical
//! inputs give bit-identical statistics across tests.

use std::collections::BTreeMap;

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inducing::Dynamics;
use crate::rng::{rng_from_seed, split_seed};
use crate::systems::Observable;

/// Significance level of every pass/fail decision.
pub const LEVEL: f64 = 0.01;
pub const MIN_CLT_REPLICAS: usize = 200;
pub const MIN_WIP_GRID: usize = 50;
pub const MIN_DEGENERATE_REPLICAS: usize = 100;
pub const MIN_LIL_LENGTH: u64 = 10_000_000;
pub const BROWNIAN_REFERENCE_PATHS: usize = 100_000;
pub const BROWNIAN_REFERENCE_SEED: u64 = 0x5EED_B0B0_CAFE_F00D;
pub const LIL_BAND: (f64, f64) = (0.5, 1.5);
/// Largest `max|S_N|` growth over the horizon range still called bounded.
pub const DEGENERATE_GROWTH: f64 = 2.0;
/// Paths whose largest value stays below this multiple of `σ` are flagged
/// degenerate by the invariance-principle test.
pub const WIP_DEGENERATE_SCALE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitLaw {
    Clt,
    Wip,
    Lil,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Degenerate,
    NonDegenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitLawReport {
    pub test: LimitLaw,
    pub statistics: BTreeMap<String, f64>,
    pub p_values: BTreeMap<String, f64>,
    /// `(n, value)` pairs for diagnostics that evolve with the horizon.
    pub trajectory: Vec<(f64, f64)>,
    pub replicas: usize,
    pub horizon: u64,
    pub sigma2: Option<f64>,
    pub verdict: Verdict,
    pub note: Option<String>,
}

impl LimitLawReport {
    fn new(test: LimitLaw, replicas: usize, horizon: u64, sigma2: Option<f64>) -> Self {
        Self {
            test,
            statistics: BTreeMap::new(),
            p_values: BTreeMap::new(),
            trajectory: Vec::new(),
            replicas,
            horizon,
            sigma2,
            verdict: Verdict::Fail,
            note: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn p_value(&self) -> Option<f64> {
        self.p_values.values().copied().reduce(f64::min)
    }
}

/// `S / √N`.
#[inline]
pub fn scaled_sum(sum: f64, n: u64) -> f64 {
    sum / (n as f64).sqrt()
}

fn check_sigma2(sigma2: f64) -> Result<f64> {
    if sigma2 == 0.0 {
        return Err(Error::Degenerate(
            "σ² = 0; use the degeneracy test instead".into(),
        ));
    }
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::Parameter(format!(
            "σ² must be positive, got {sigma2}"
        )));
    }
    Ok(sigma2.sqrt())
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda < 1.18 {
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let y = (-pi2 / (8.0 * lambda * lambda)).exp();
        let mut s = 0.0;
        let mut k = 1;
        loop {
            let term = y.powi(k * k);
            s += term;
            if term < 1e-17 * s || k > 100 {
                break;
            }
            k += 2;
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s
    } else {
        let mut s = 0.0;
        for k in 1..=100i32 {
            let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-17 {
                break;
            }
        }
        2.0 * s
    };
    p.clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> (f64, f64) {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    (d, kolmogorov_survival(n.sqrt() * d))
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    (d, kolmogorov_survival(ne.sqrt() * d))
}

/// KS test of `S_N / (σ √N)` against the standard normal.
pub fn clt_test(sums: &[f64], n: u64, sigma2: f64) -> Result<LimitLawReport> {
    let sigma = check_sigma2(sigma2)?;
    if sums.len() < MIN_CLT_REPLICAS {
        return Err(Error::InsufficientData {
            needed: MIN_CLT_REPLICAS,
            got: sums.len(),
        });
    }
    if n == 0 {
        return Err(Error::Parameter("horizon must be positive".into()));
    }
    let z: Vec<f64> = sums.iter().map(|&s| scaled_sum(s, n) / sigma).collect();
    let (d, p) = ks_one_sample(&z, normal_cdf);
    let mut r = LimitLawReport::new(LimitLaw::Clt, sums.len(), n, Some(sigma2));
    r.statistics.insert("ks".into(), d);
    r.p_values.insert("ks".into(), p);
    r.verdict = if p >= LEVEL {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(r)
}

/// `S_{⌊t_k N⌋} / √N` at `t_k = k / grid`, `k = 1..=grid`, from the running
/// sums `partial[i] = S_{i+1}`.
pub fn scaled_path(partial: &[f64], grid: usize) -> Vec<f64> {
    let n = partial.len() as u64;
    (1..=grid)
        .map(|k| {
            let m = (k as u64 * n) / grid as u64;
            if m == 0 {
                0.0
            } else {
                scaled_sum(partial[m as usize - 1], n)
            }
        })
        .collect()
}

fn path_sup(path: &[f64]) -> f64 {
    path.iter().copied().fold(0.0, f64::max)
}

fn path_integral(path: &[f64]) -> f64 {
    path.iter().sum::<f64>() / path.len() as f64
}

/// Sup and integral of Brownian paths sampled at `k / grid`.
pub fn brownian_reference(grid: usize, paths: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let step = (1.0 / grid as f64).sqrt();
    (0..paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(split_seed(seed, i as u64));
            let mut w = 0.0;
            let mut sup = 0.0f64;
            let mut int = 0.0;
            for _ in 0..grid {
                w += step * rng.sample::<f64, _>(StandardNormal);
                sup = sup.max(w);
                int += w;
            }
            (sup, int / grid as f64)
        })
        .unzip()
}

/// Invariance-principle test on scaled paths (see [`scaled_path`]).
/// Marginals at `t ∈ {1/4, 1/2, 1}` and the sup and integral functionals
/// are each tested at the Bonferroni level `LEVEL / 5`.
pub fn wip_test(paths: &[Vec<f64>], sigma2: f64) -> Result<LimitLawReport> {
    let sigma = check_sigma2(sigma2)?;
    if paths.len() < MIN_CLT_REPLICAS {
        return Err(Error::InsufficientData {
            needed: MIN_CLT_REPLICAS,
            got: paths.len(),
        });
    }
    let grid = paths[0].len();
    if grid < MIN_WIP_GRID {
        return Err(Error::InsufficientData {
            needed: MIN_WIP_GRID,
            got: grid,
        });
    }
    if paths.iter().any(|p| p.len() != grid) {
        return Err(Error::Parameter("paths must share one grid".into()));
    }
    let mut r = LimitLawReport::new(LimitLaw::Wip, paths.len(), grid as u64, Some(sigma2));
    let largest = paths
        .iter()
        .flat_map(|p| p.iter())
        .map(|x| x.abs())
        .fold(0.0, f64::max);
    r.statistics.insert("max_abs_path".into(), largest / sigma);
    if largest < WIP_DEGENERATE_SCALE * sigma {
        r.verdict = Verdict::Degenerate;
        r.note = Some("scaled paths collapse to zero".into());
        return Ok(r);
    }
    let level = LEVEL / 5.0;
    let mut pass = true;
    for (label, t) in [("t=0.25", 0.25), ("t=0.5", 0.5), ("t=1", 1.0)] {
        let k = ((t * grid as f64).round() as usize).clamp(1, grid);
        let tk = k as f64 / grid as f64;
        let s = tk.sqrt();
        let z: Vec<f64> = paths.iter().map(|p| p[k - 1] / sigma).collect();
        let (d, p) = if k == grid {
            ks_one_sample(&z, normal_cdf)
        } else {
            ks_one_sample(&z, |x| normal_cdf(x / s))
        };
        r.statistics.insert(format!("ks {label}"), d);
        r.p_values.insert(format!("ks {label}"), p);
        pass &= p >= level;
    }
    let (ref_sup, ref_int) =
        brownian_reference(grid, BROWNIAN_REFERENCE_PATHS, BROWNIAN_REFERENCE_SEED);
    let sups: Vec<f64> = paths.iter().map(|p| path_sup(p) / sigma).collect();
    let ints: Vec<f64> = paths.iter().map(|p| path_integral(p) / sigma).collect();
    for (label, xs, reference) in [("sup", &sups, &ref_sup), ("integral", &ints, &ref_int)] {
        let (d, p) = ks_two_sample(xs, reference);
        r.statistics.insert(format!("ks {label}"), d);
        r.p_values.insert(format!("ks {label}"), p);
        pass &= p >= level;
    }
    r.verdict = if pass { Verdict::Pass } else { Verdict::Fail };
    Ok(r)
}

/// Streaming iterated-logarithm diagnostic.
///
/// Tracks `|S_n| / √(2σ² n log log n)` at every `n` in the final two decades
/// of a run of known length, and records it at geometrically spaced `n`.
/// This is a slow-convergence diagnostic, not a sharp test.
#[derive(Debug, Clone)]
pub struct LilTracker {
    total: u64,
    sigma2: f64,
    sigma: f64,
    n: u64,
    sum: f64,
    window_start: u64,
    sup: f64,
    next_record: u64,
    ratio: f64,
    trajectory: Vec<(f64, f64)>,
}

impl LilTracker {
    pub fn new(total: u64, sigma2: f64) -> Result<Self> {
        let sigma = check_sigma2(sigma2)?;
        if total < 1000 {
            return Err(Error::InsufficientData {
                needed: 1000,
                got: total as usize,
            });
        }
        Ok(Self {
            total,
            sigma2,
            sigma,
            n: 0,
            sum: 0.0,
            window_start: (total / 100).max(16),
            sup: 0.0,
            next_record: 16,
            ratio: 10f64.powf(0.1),
            trajectory: Vec::new(),
        })
    }

    #[inline]
    fn normalized(&self) -> f64 {
        let n = self.n as f64;
        self.sum.abs() / (self.sigma * (2.0 * n * n.ln().ln()).sqrt())
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.sum += x;
        self.n += 1;
        if self.n >= self.window_start {
            let v = self.normalized();
            if v > self.sup {
                self.sup = v;
            }
        }
        if self.n == self.next_record {
            self.trajectory.push((self.n as f64, self.normalized()));
            self.next_record =
                ((self.next_record as f64 * self.ratio).ceil() as u64).max(self.next_record + 1);
        }
    }

    /// Band verdict; the run length must be at least `min_length`.
    pub fn finish_with_min(self, min_length: u64) -> Result<LimitLawReport> {
        if self.n != self.total {
            return Err(Error::Parameter(format!(
                "tracker expected {} increments, got {}",
                self.total, self.n
            )));
        }
        if self.n < min_length {
            return Err(Error::InsufficientData {
                needed: min_length as usize,
                got: self.n as usize,
            });
        }
        let mut r = LimitLawReport::new(LimitLaw::Lil, 1, self.n, Some(self.sigma2));
        r.statistics.insert("running_sup".into(), self.sup);
        r.statistics.insert("final_ratio".into(), self.normalized());
        r.trajectory = self.trajectory;
        r.verdict = if (LIL_BAND.0..=LIL_BAND.1).contains(&self.sup) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        r.note = Some("diagnostic: log log convergence is very slow".into());
        Ok(r)
    }

    pub fn finish(self) -> Result<LimitLawReport> {
        self.finish_with_min(MIN_LIL_LENGTH)
    }
}

/// Iterated-logarithm diagnostic on a sequence of increments.
pub fn lil_diagnostic<I: IntoIterator<Item = f64>>(
    increments: I,
    total: u64,
    sigma2: f64,
) -> Result<LimitLawReport> {
    let mut t = LilTracker::new(total, sigma2)?;
    for x in increments.into_iter().take(total as usize) {
        t.push(x);
    }
    t.finish()
}

/// Degeneracy test from `sums[i][j] = S_{N_j}` of replica `i`. Degenerate
/// when `max_i |S_{N_j}|` does not grow across the horizons, which must
/// span at least two decades, and stays below `bound_hint` when given.
pub fn degenerate_test(
    sums: &[Vec<f64>],
    horizons: &[u64],
    bound_hint: Option<f64>,
) -> Result<LimitLawReport> {
    if sums.len() < MIN_DEGENERATE_REPLICAS {
        return Err(Error::InsufficientData {
            needed: MIN_DEGENERATE_REPLICAS,
            got: sums.len(),
        });
    }
    if horizons.len() < 2 || horizons.windows(2).any(|w| w[1] <= w[0]) || horizons[0] == 0 {
        return Err(Error::Parameter(
            "horizons must be increasing and positive".into(),
        ));
    }
    let (first, last) = (horizons[0], *horizons.last().expect("nonempty"));
    if last < 100 * first {
        return Err(Error::Parameter(format!(
            "horizons must span two decades, got {first}..{last}"
        )));
    }
    if sums.iter().any(|s| s.len() != horizons.len()) {
        return Err(Error::Parameter("one sum per horizon per replica".into()));
    }
    let maxima: Vec<f64> = (0..horizons.len())
        .map(|j| sums.iter().map(|s| s[j].abs()).fold(0.0, f64::max))
        .collect();
    let overall = maxima.iter().copied().fold(0.0, f64::max);
    let growth = if maxima[0] > 0.0 {
        maxima.last().expect("nonempty") / maxima[0]
    } else if overall == 0.0 {
        1.0
    } else {
        f64::INFINITY
    };
    let mut r = LimitLawReport::new(LimitLaw::Degenerate, sums.len(), last, None);
    r.statistics.insert("max_abs_sum".into(), overall);
    r.statistics.insert("growth".into(), growth);
    if let Some(h) = bound_hint {
        r.statistics.insert("bound_hint".into(), h);
    }
    r.trajectory = horizons
        .iter()
        .zip(&maxima)
        .map(|(&n, &m)| (n as f64, m))
        .collect();
    let bounded = growth <= DEGENERATE_GROWTH && bound_hint.map_or(true, |h| overall <= h);
    r.verdict = if bounded {
        Verdict::Degenerate
    } else {
        Verdict::NonDegenerate
    };
    Ok(r)
}

/// Birkhoff sums `S_{N_j}` of `v` for independent stationary replicas.
pub fn replica_sums(
    dynamics: &dyn Dynamics,
    v: &Observable,
    horizons: &[u64],
    replicas: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if horizons.is_empty() || horizons.windows(2).any(|w| w[1] <= w[0]) || horizons[0] == 0 {
        return Err(Error::Parameter(
            "horizons must be increasing and positive".into(),
        ));
    }
    let last = *horizons.last().expect("nonempty");
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut out = Vec::with_capacity(horizons.len());
            let mut s = 0.0;
            let mut next = 0;
            for (i, x) in dynamics
                .stationary_points(split_seed(seed, r as u64))
                .take(last as usize)
                .enumerate()
            {
                s += v.eval(x?);
                if i as u64 + 1 == horizons[next] {
                    out.push(s);
                    next += 1;
                }
            }
            Ok(out)
        })
        .collect()
}

/// Scaled partial-sum paths of length `n` on a grid of `grid` points.
pub fn replica_paths(
    dynamics: &dyn Dynamics,
    v: &Observable,
    n: u64,
    grid: usize,
    replicas: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut partial = Vec::with_capacity(n as usize);
            let mut s = 0.0;
            for x in dynamics
                .stationary_points(split_seed(seed, r as u64))
                .take(n as usize)
            {
                s += v.eval(x?);
                partial.push(s);
            }
            Ok(scaled_path(&partial, grid))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::MapSystem;
    use proptest::prelude::*;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn kolmogorov_tail_values() {
        // tabulated critical values of the Kolmogorov distribution
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_survival(0.8276) - 0.5).abs() < 1e-3);
        // both series agree where they meet
        let a = kolmogorov_survival(1.18 - 1e-12);
        let b = kolmogorov_survival(1.18);
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        let d = normal_cdf(1.959963984540054) - 0.975;
        assert!(d.abs() < 1e-10, "{d:e}");
    }

    #[test]
    fn clt_calibration() {
        let batches = 100;
        let rejections = (0..batches)
            .filter(|&b| !clt_test(&normals(10_000, b), 1, 1.0).unwrap().passed())
            .count();
        assert!(rejections <= 5, "{rejections}");
    }

    #[test]
    fn clt_rejects_point_mass() {
        let r = clt_test(&vec![0.3; 500], 1, 1.0).unwrap();
        assert!(r.p_value().unwrap() < 1e-6);
        assert!(!r.passed());
    }

    #[test]
    fn zero_variance_is_signaled() {
        assert!(matches!(
            clt_test(&normals(300, 0), 1, 0.0),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            wip_test(&vec![vec![0.0; 60]; 300], 0.0),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            LilTracker::new(10_000, 0.0),
            Err(Error::Degenerate(_))
        ));
    }

    fn donsker(replicas: usize, n: usize, grid: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut paths = Vec::new();
        let mut finals = Vec::new();
        for r in 0..replicas {
            let xs = normals(n, split_seed(seed, r as u64));
            let mut s = 0.0;
            let partial: Vec<f64> = xs
                .iter()
                .map(|x| {
                    s += x;
                    s
                })
                .collect();
            finals.push(s);
            paths.push(scaled_path(&partial, grid));
        }
        (paths, finals)
    }

    #[test]
    fn wip_on_donsker_paths() {
        let (paths, finals) = donsker(1000, 400, 100, 11);
        let r = wip_test(&paths, 1.0).unwrap();
        assert!(r.passed(), "{r:?}");
        let c = clt_test(&finals, 400, 1.0).unwrap();
        assert_eq!(r.statistics["ks t=1"], c.statistics["ks"]);
        assert_eq!(r.p_values["ks t=1"], c.p_values["ks"]);
    }

    #[test]
    fn wip_rejects_wrong_scale() {
        let (paths, _) = donsker(1000, 400, 100, 12);
        let r = wip_test(&paths, 2.0).unwrap();
        assert!(!r.passed());
    }

    #[test]
    fn wip_flags_coboundary_paths() {
        let doubling = MapSystem::doubling();
        let v = Observable::doubling_coboundary();
        let paths = replica_paths(&doubling, &v, 100_000, 50, 200, 3).unwrap();
        let r = wip_test(&paths, 0.5).unwrap();
        assert_eq!(r.verdict, Verdict::Degenerate);
    }

    #[test]
    fn degenerate_examples() {
        let doubling = MapSystem::doubling();
        let horizons = [100, 1000, 10_000];
        let cob = Observable::doubling_coboundary();
        let s = replica_sums(&doubling, &cob, &horizons, 100, 1).unwrap();
        let r = degenerate_test(&s, &horizons, Some(2.0 * 2.0)).unwrap();
        assert_eq!(r.verdict, Verdict::Degenerate);
        assert!(r.statistics["max_abs_sum"] <= 4.0);

        let cos = Observable::cos_2pi(1);
        let s = replica_sums(&doubling, &cos, &horizons, 100, 1).unwrap();
        let r = degenerate_test(&s, &horizons, None).unwrap();
        assert_eq!(r.verdict, Verdict::NonDegenerate);

        let zero = Observable::constant(0.0);
        let s = replica_sums(&doubling, &zero, &horizons, 100, 1).unwrap();
        let r = degenerate_test(&s, &horizons, Some(0.0)).unwrap();
        assert_eq!(r.verdict, Verdict::Degenerate);
        assert_eq!(r.statistics["max_abs_sum"], 0.0);

        assert!(degenerate_test(&s, &[100, 1000], None).is_err());
    }

    #[test]
    fn lil_on_bounded_sums_vanishes() {
        let mut t = LilTracker::new(1_000_000, 1.0).unwrap();
        for k in 0..1_000_000u64 {
            t.push(if k % 2 == 0 { 1.0 } else { -1.0 });
        }
        let r = t.finish_with_min(0).unwrap();
        assert!(r.statistics["running_sup"] < 1e-2);
        assert!(r.statistics["final_ratio"] < 1e-3);
        assert!(!r.passed());
    }

    #[test]
    fn lil_requires_full_length() {
        let t = LilTracker::new(1_000_000, 1.0).unwrap();
        assert!(t.finish().is_err());
        assert!(lil_diagnostic(std::iter::repeat(0.0), 1000, 1.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn clt_is_scale_equivariant(seed in 0u64..1000, c in 0.01f64..100.0) {
            let xs = normals(300, seed);
            let scaled: Vec<f64> = xs.iter().map(|x| c * x).collect();
            let a = clt_test(&xs, 7, 1.3).unwrap();
            let b = clt_test(&scaled, 7, 1.3 * c * c).unwrap();
            prop_assert!((a.statistics["ks"] - b.statistics["ks"]).abs() < 1e-12);
            prop_assert!((a.p_values["ks"] - b.p_values["ks"]).abs() < 1e-10);
        }

        #[test]
        fn degenerate_is_scale_equivariant(seed in 0u64..1000, c in 0.01f64..100.0) {
            let rows: Vec<Vec<f64>> = (0..100)
                .map(|r| normals(3, split_seed(seed, r)).iter().zip([1.0, 10.0, 100.0]).map(|(x, s)| x * s).collect())
                .collect();
            let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| c * x).collect()).collect();
            let a = degenerate_test(&rows, &[1, 100, 10_000], None).unwrap();
            let b = degenerate_test(&scaled, &[1, 100, 10_000], None).unwrap();
            prop_assert!((a.statistics["growth"] - b.statistics["growth"]).abs() < 1e-9 * a.statistics["growth"]);
            prop_assert_eq!(a.verdict, b.verdict);
        }

        #[test]
        fn p_values_are_probabilities(lambda in 0.0f64..10.0) {
            let p = kolmogorov_survival(lambda);
            prop_assert!((0.0..=1.0).contains(&p));
        }

        #[test]
        fn survival_is_monotone(a in 0.01f64..4.0, b in 0.01f64..4.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(kolmogorov_survival(lo) >= kolmogorov_survival(hi) - 1e-12);
        }
    }
}
