//! First-return inducing schemes, return-time sampling and tail/moment
//! estimation for the return-time function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{fit_line, quantile_sorted, LineFit};
use crate::rng::mix64;
use crate::systems::{MapSystem, Observable, Orbit};

/// Default guard on the number of iterates before a nonreturn is declared.
pub const DEFAULT_RETURN_CAP: u64 = 1_000_000_000;

/// First-return map `f = T^R` on a base interval `Y = [lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InducedSystem {
    parent: MapSystem,
    lo: f64,
    hi: f64,
    cap: u64,
}

impl InducedSystem {
    pub fn new(parent: MapSystem, base: (f64, f64)) -> Result<Self> {
        let (lo, hi) = base;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::Parameter(format!(
                "base set [{lo}, {hi}) must be a nonempty subinterval of [0, 1]"
            )));
        }
        Ok(Self {
            parent,
            lo,
            hi,
            cap: DEFAULT_RETURN_CAP,
        })
    }

    /// Induce on the system's default base set.
    pub fn on_default_base(parent: MapSystem) -> Self {
        Self::new(parent, parent.default_base_set()).expect("default base set is valid")
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap.max(1);
        self
    }

    pub fn parent(&self) -> &MapSystem {
        &self.parent
    }

    pub fn base_set(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Lebesgue length of `Y`.
    pub fn base_length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x < self.hi
    }

    fn check_base(&self, x: f64) -> Result<()> {
        if self.parent.contains(x) && self.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain {
                system: format!("base set [{}, {})", self.lo, self.hi),
                x,
            })
        }
    }

    /// `(R(x), f(x))` with `R(x) = min{n ≥ 1 : T^n x ∈ Y}`.
    pub fn first_return(&self, x: f64) -> Result<(u64, f64)> {
        self.check_base(x)?;
        let mut y = x;
        for n in 1..=self.cap {
            let next = self.parent.apply(y);
            if self.contains(next) {
                return Ok((n, next));
            }
            if next == y {
                // stuck on a fixed point outside Y
                return Err(Error::NonReturn { iterates: n });
            }
            y = next;
        }
        Err(Error::NonReturn { iterates: self.cap })
    }

    pub fn return_time(&self, x: f64) -> Result<u64> {
        self.first_return(x).map(|(r, _)| r)
    }

    pub fn induced_map(&self, x: f64) -> Result<f64> {
        self.first_return(x).map(|(_, y)| y)
    }

    /// `f'(x) = ∏_{j<R} T'(T^j x)`, together with `R` and `f(x)`.
    pub fn induced_derivative(&self, x: f64) -> Result<(f64, u64, f64)> {
        let (r, fx) = self.first_return(x)?;
        let mut y = x;
        let mut d = 1.0;
        for _ in 0..r {
            d *= self.parent.derivative(y);
            y = self.parent.apply(y);
        }
        Ok((d, r, fx))
    }

    /// Whether `Y` is exactly the domain of the second branch, in which
    /// case the pieces `Y_j` are the level sets `{R = j}`.
    fn base_is_branch_domain(&self) -> bool {
        (self.lo, self.hi) == self.parent.branches()[1]
    }

    /// Label of the piece `Y_j` containing `x`: the return time when `Y` is a
    /// branch domain, otherwise a hash of the branch itinerary over the
    /// excursion.
    pub fn piece_label(&self, x: f64) -> Result<u64> {
        self.label_and_image(x).map(|(l, _)| l)
    }

    /// Piece label of `x` together with `f(x)`.
    pub fn label_and_image(&self, x: f64) -> Result<(u64, f64)> {
        let (r, fx) = self.first_return(x)?;
        if self.base_is_branch_domain() {
            return Ok((r, fx));
        }
        let mut y = x;
        let mut h = mix64(r);
        for _ in 0..r {
            h = mix64(h ^ self.parent.branch_index(y) as u64);
            y = self.parent.apply(y);
        }
        Ok((h, fx))
    }

    /// Labels of the pieces visited by `x, f x, …, f^{depth-1} x`, i.e. the
    /// depth-`depth` cylinder containing `x`.
    pub fn cylinder_word(&self, x: f64, depth: usize) -> Result<Vec<u64>> {
        let mut word = Vec::with_capacity(depth);
        let mut y = x;
        for _ in 0..depth {
            let (l, fy) = self.label_and_image(y)?;
            word.push(l);
            y = fy;
        }
        Ok(word)
    }

    /// Inverse of `f` on the piece with label `label`, when pieces are
    /// labelled by return time (`Y` a branch domain). The piece `{R = n}`
    /// has itinerary: branch 1, then `n - 1` times branch 0.
    pub fn inverse_piece(&self, label: u64, z: f64) -> Option<f64> {
        if !self.base_is_branch_domain() || label == 0 {
            return None;
        }
        let mut y = z;
        for _ in 1..label {
            y = self.parent.inverse_branch(0, y);
        }
        Some(self.parent.inverse_branch(1, y))
    }

    /// Whether pieces are labelled by return time.
    pub fn labels_are_return_times(&self) -> bool {
        self.base_is_branch_domain()
    }

    /// Stationary excursions along a single orbit of the parent map.
    pub fn excursions(&self, seed: u64) -> Excursions<'static> {
        Excursions::new(*self, self.parent.orbit(seed), None)
    }

    /// Stationary excursions that also accumulate `Φ(y) = Σ_{j<R} φ(T^j y)`.
    pub fn excursions_with<'a>(&self, seed: u64, phi: &'a Observable) -> Excursions<'a> {
        Excursions::new(*self, self.parent.orbit(seed), Some(phi))
    }
}

/// A source of stationary orbits: a map under its invariant measure, or an
/// induced map sampled along excursions of the parent.
pub trait Dynamics: Send + Sync {
    fn stationary_points(&self, seed: u64) -> Box<dyn Iterator<Item = Result<f64>> + '_>;

    fn describe(&self) -> String;
}

impl Dynamics for MapSystem {
    fn stationary_points(&self, seed: u64) -> Box<dyn Iterator<Item = Result<f64>> + '_> {
        Box::new(self.orbit(seed).map(Ok))
    }

    fn describe(&self) -> String {
        self.name()
    }
}

impl Dynamics for InducedSystem {
    fn stationary_points(&self, seed: u64) -> Box<dyn Iterator<Item = Result<f64>> + '_> {
        Box::new(self.excursions(seed).map(|e| e.map(|e| e.base_point)))
    }

    fn describe(&self) -> String {
        let (lo, hi) = self.base_set();
        format!("{} induced on [{lo}, {hi})", self.parent.name())
    }
}

/// One excursion from the base set: start point, return time and (when an
/// observable was supplied) the sum of the observable along the excursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Excursion {
    pub base_point: f64,
    pub return_time: u64,
    pub sum: f64,
}

/// Iterator over successive excursions of a stationary orbit.
pub struct Excursions<'a> {
    induced: InducedSystem,
    orbit: Orbit,
    phi: Option<&'a Observable>,
    started: bool,
}

impl<'a> Excursions<'a> {
    fn new(induced: InducedSystem, orbit: Orbit, phi: Option<&'a Observable>) -> Self {
        Self {
            induced,
            orbit,
            phi,
            started: false,
        }
    }

    fn enter_base(&mut self) -> Result<()> {
        let mut steps = 0u64;
        while !self.induced.contains(self.orbit.current()) {
            self.orbit.next();
            steps += 1;
            if steps > self.induced.cap {
                return Err(Error::NonReturn { iterates: steps });
            }
        }
        self.started = true;
        Ok(())
    }
}

impl Iterator for Excursions<'_> {
    type Item = Result<Excursion>;

    fn next(&mut self) -> Option<Self::Item> {
        if !self.started {
            if let Err(e) = self.enter_base() {
                return Some(Err(e));
            }
        }
        let start = self.orbit.current();
        let mut sum = 0.0;
        let mut r = 0u64;
        loop {
            let x = self.orbit.next().expect("orbits are infinite");
            if let Some(phi) = self.phi {
                sum += phi.eval(x);
            }
            r += 1;
            let next = self.orbit.current();
            if self.induced.contains(next) {
                break;
            }
            if next == x || r >= self.induced.cap {
                return Some(Err(Error::NonReturn { iterates: r }));
            }
        }
        Some(Ok(Excursion {
            base_point: start,
            return_time: r,
            sum,
        }))
    }
}

/// `n` return times along one stationary `f`-orbit.
pub fn sample_returns(induced: &InducedSystem, n: usize, seed: u64) -> Result<Vec<u64>> {
    induced
        .excursions(seed)
        .take(n)
        .map(|e| e.map(|e| e.return_time))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailKind {
    Polynomial,
    ExponentialOrFaster,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub tail_kind: TailKind,
    /// `γ̂` with a 95% confidence interval; present only for polynomial tails.
    pub exponent_estimate: Option<(f64, (f64, f64))>,
    pub sample_count: usize,
    /// Fit window `[lower, upper]` in units of the samples.
    pub fit_range: (f64, f64),
    /// `R²` of the log–log survival fit.
    pub loglog_r_squared: f64,
    /// `R²` of the semi-log (exponential) survival fit.
    pub semilog_r_squared: f64,
}

/// Minimum sample count for tail and moment estimation.
pub const MIN_TAIL_SAMPLES: usize = 10_000;
/// Thresholds whose exceedance count falls below this are outside the fit.
pub const MIN_EXCEEDANCES: usize = 100;

/// Empirical survival function `P(X ≥ t)` at the given thresholds.
pub fn survival(sorted: &[f64], thresholds: &[f64]) -> Vec<f64> {
    let n = sorted.len() as f64;
    thresholds
        .iter()
        .map(|&t| {
            let below = sorted.partition_point(|&x| x < t);
            (sorted.len() - below) as f64 / n
        })
        .collect()
}

/// Tail exponent of `P(X ≥ t) ~ t^{-γ}` by log–log regression.
///
/// The fit window starts one decade above the smallest sample and ends at
/// the largest threshold that still has `MIN_EXCEEDANCES` exceedances.
/// Thresholds are spaced geometrically. The log–log fit is compared with a
/// semi-log fit over the same window: a better exponential fit means the
/// survival function decays super-polynomially.
pub fn tail_exponent(samples: &[f64]) -> Result<TailReport> {
    if samples.len() < MIN_TAIL_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_TAIL_SAMPLES,
            got: samples.len(),
        });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let min = sorted[0];
    if !(min > 0.0) {
        return Err(Error::Parameter("tail samples must be positive".into()));
    }
    let lower = 10.0 * min;
    let upper = sorted[n - MIN_EXCEEDANCES];
    let undetermined = |lo: f64, hi: f64, ll: f64, sl: f64| TailReport {
        tail_kind: TailKind::Undetermined,
        exponent_estimate: None,
        sample_count: n,
        fit_range: (lo, hi),
        loglog_r_squared: ll,
        semilog_r_squared: sl,
    };
    if upper <= lower {
        // fewer than MIN_EXCEEDANCES samples beyond the first decade
        let frac = survival(&sorted, &[lower])[0];
        let kind = if frac * (n as f64) < MIN_EXCEEDANCES as f64 && frac < 1e-3 {
            TailKind::ExponentialOrFaster
        } else {
            TailKind::Undetermined
        };
        return Ok(TailReport {
            tail_kind: kind,
            ..undetermined(lower, upper, f64::NAN, f64::NAN)
        });
    }
    let integer_valued = sorted.iter().all(|x| x.fract() == 0.0);
    let points = 30usize;
    let mut thresholds: Vec<f64> = (0..points)
        .map(|i| lower * (upper / lower).powf(i as f64 / (points - 1) as f64))
        .map(|t| if integer_valued { t.round() } else { t })
        .collect();
    thresholds.dedup();
    if thresholds.len() < 3 {
        return Ok(undetermined(lower, upper, f64::NAN, f64::NAN));
    }
    let surv = survival(&sorted, &thresholds);
    let log_s: Vec<f64> = surv.iter().map(|s| s.ln()).collect();
    let log_t: Vec<f64> = thresholds.iter().map(|t| t.ln()).collect();
    let loglog: LineFit = fit_line(&log_t, &log_s)?;
    let semilog: LineFit = fit_line(&thresholds, &log_s)?;
    let report = |kind: TailKind, est: Option<(f64, (f64, f64))>| TailReport {
        tail_kind: kind,
        exponent_estimate: est,
        sample_count: n,
        fit_range: (thresholds[0], *thresholds.last().unwrap()),
        loglog_r_squared: loglog.r_squared,
        semilog_r_squared: semilog.r_squared,
    };
    if semilog.r_squared > loglog.r_squared && semilog.slope < 0.0 {
        return Ok(report(TailKind::ExponentialOrFaster, None));
    }
    if loglog.r_squared >= 0.95 && loglog.slope < 0.0 {
        let gamma = -loglog.slope;
        let half = 1.96 * loglog.slope_se.max(f64::EPSILON);
        return Ok(report(
            TailKind::Polynomial,
            Some((gamma, (gamma - half, gamma + half))),
        ));
    }
    Ok(report(TailKind::Undetermined, None))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    /// `(E|X|^p)^{1/p}` over the full sample.
    pub norm: f64,
    pub p: f64,
    pub finite: bool,
    /// Largest relative growth of the moment between a nested subsample
    /// and the full sample.
    pub max_growth: f64,
}

/// Estimate `|X|_p` and decide whether it is finite.
///
/// For nested subsample sizes `n/2^j`, `j = 1..=4`, the `p`-th moment is
/// estimated as the median over the `2^j` disjoint blocks of that size. A
/// finite moment stabilises: every subsample estimate lies within 10% of the
/// full-sample estimate. An infinite moment keeps growing with sample size.
pub fn moment_norm(samples: &[f64], p: f64) -> Result<MomentReport> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::Parameter(format!(
            "moment order must be finite and ≥ 1, got {p}"
        )));
    }
    if samples.len() < MIN_TAIL_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_TAIL_SAMPLES,
            got: samples.len(),
        });
    }
    let powered: Vec<f64> = samples.iter().map(|x| x.abs().powf(p)).collect();
    let moment = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let full = moment(&powered);
    let mut max_growth: f64 = 0.0;
    for j in 1..=4u32 {
        let blocks = 1usize << j;
        let len = powered.len() / blocks;
        let mut ests: Vec<f64> = (0..blocks)
            .map(|b| moment(&powered[b * len..(b + 1) * len]))
            .collect();
        ests.sort_by(f64::total_cmp);
        let med = quantile_sorted(&ests, 0.5);
        max_growth = max_growth.max((full / med - 1.0).abs());
    }
    Ok(MomentReport {
        norm: full.powf(1.0 / p),
        p,
        finite: max_growth < 0.10,
        max_growth,
    })
}

/// Return times as `f64` for the generic estimators.
pub fn as_f64(times: &[u64]) -> Vec<f64> {
    times.iter().map(|&t| t as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::mean_and_se;
    use rand::Rng;
    use rand_distr::{Distribution, Pareto};

    fn doubling_induced() -> InducedSystem {
        InducedSystem::on_default_base(MapSystem::doubling())
    }

    fn pareto(shape: f64, n: usize, seed: u64) -> Vec<f64> {
        let d = Pareto::new(1.0, shape).unwrap();
        let mut rng = crate::rng::rng_from_seed(seed);
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn first_return_examples() {
        let ind = doubling_induced();
        assert_eq!(ind.first_return(0.75).unwrap(), (1, 0.5));
        assert_eq!(ind.first_return(33.0 / 64.0).unwrap(), (5, 0.5));
    }

    #[test]
    fn first_return_rejects_points_outside_base() {
        let ind = doubling_induced();
        assert!(matches!(ind.first_return(0.25), Err(Error::Domain { .. })));
    }

    #[test]
    fn nonreturn_is_reported() {
        // x = 1/2 goes to the fixed point 0
        let ind = doubling_induced().with_cap(1000);
        assert!(matches!(
            ind.first_return(0.5),
            Err(Error::NonReturn { .. })
        ));
        let lsv = InducedSystem::on_default_base(MapSystem::lsv(0.25).unwrap()).with_cap(5);
        // a point very close to 1/2 lands near 0 and needs many iterates
        assert!(matches!(
            lsv.first_return(0.5 + 1e-9),
            Err(Error::NonReturn { iterates: 5 })
        ));
    }

    #[test]
    fn lsv_return_time_is_monotone() {
        let ind = InducedSystem::on_default_base(MapSystem::lsv(0.25).unwrap());
        let mut prev = u64::MAX;
        for i in 1..2000 {
            let x = 0.5 + 0.5 * i as f64 / 2000.0;
            let r = ind.return_time(x).unwrap();
            assert!(r <= prev, "R not nonincreasing at {x}");
            prev = r;
        }
    }

    #[test]
    fn first_return_identity_and_base_invariance() {
        for parent in [MapSystem::doubling(), MapSystem::lsv(0.25).unwrap()] {
            let ind = InducedSystem::on_default_base(parent);
            let mut rng = crate::rng::rng_from_seed(9);
            for _ in 0..2000 {
                let x = rng.gen_range(0.5..1.0);
                let (r, fx) = ind.first_return(x).unwrap();
                assert!(ind.contains(fx));
                assert_eq!(parent.evolve(x, r).unwrap(), fx);
                for j in 1..r {
                    assert!(!ind.contains(parent.evolve(x, j).unwrap()));
                }
            }
        }
    }

    #[test]
    fn doubling_expansion_and_intermediate_images() {
        let ind = doubling_induced();
        let mut rng = crate::rng::rng_from_seed(4);
        let mut checked = 0;
        while checked < 500 {
            let x = rng.gen_range(0.5..1.0);
            let y = x + rng.gen_range(-1e-4..1e-4);
            if !ind.contains(y) || ind.return_time(x).unwrap() != ind.return_time(y).unwrap() {
                continue;
            }
            let r = ind.return_time(x).unwrap();
            let (fx, fy) = (ind.induced_map(x).unwrap(), ind.induced_map(y).unwrap());
            assert!((fx - fy).abs() >= 2.0 * (x - y).abs() * (1.0 - 1e-9));
            let t = ind.parent();
            for k in 0..r {
                let d = (t.evolve(x, k).unwrap() - t.evolve(y, k).unwrap()).abs();
                assert!(d <= (fx - fy).abs() * (1.0 + 1e-9));
            }
            checked += 1;
        }
    }

    #[test]
    fn return_level_sets_are_disjoint_intervals() {
        let ind = InducedSystem::on_default_base(MapSystem::lsv(0.25).unwrap());
        let grid: Vec<u64> = (0..5000)
            .map(|i| {
                ind.return_time(0.5 + 0.5 * (i as f64 + 0.5) / 5000.0)
                    .unwrap()
            })
            .collect();
        // each value of R occupies one contiguous run of the grid
        let mut seen = std::collections::HashSet::new();
        for w in grid.chunk_by(|a, b| a == b) {
            assert!(seen.insert(w[0]), "R = {} appears in two runs", w[0]);
        }
    }

    #[test]
    fn doubling_return_law_is_geometric() {
        let n = 1_000_000;
        let times = sample_returns(&doubling_induced(), n, 21).unwrap();
        let mut counts = [0usize; 11];
        for &t in &times {
            if t <= 10 {
                counts[t as usize] += 1;
            }
        }
        for k in 1..=10 {
            let p = 0.5f64.powi(k as i32);
            let phat = counts[k] as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((phat - p).abs() < 3.0 * se, "k={k} {phat} vs {p}");
        }
    }

    #[test]
    fn empty_sample_request() {
        assert!(sample_returns(&doubling_induced(), 0, 1)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn sampling_is_reproducible() {
        let ind = InducedSystem::on_default_base(MapSystem::lsv(0.25).unwrap());
        assert_eq!(
            sample_returns(&ind, 1000, 5).unwrap(),
            sample_returns(&ind, 1000, 5).unwrap()
        );
    }

    #[test]
    fn excursion_sums_match_deterministic_iteration() {
        let t = MapSystem::lsv(0.25).unwrap();
        let ind = InducedSystem::on_default_base(t);
        let phi = Observable::identity();
        for e in ind.excursions_with(3, &phi).take(1000) {
            let e = e.unwrap();
            let (r, _) = ind.first_return(e.base_point).unwrap();
            assert_eq!(r, e.return_time);
            let mut x = e.base_point;
            let mut s = 0.0;
            for _ in 0..r {
                s += x;
                x = t.apply(x);
            }
            assert_eq!(s, e.sum);
        }
    }

    #[test]
    fn pareto_exponent_is_recovered() {
        let xs = pareto(3.0, 10_000_000, 1);
        let rep = tail_exponent(&xs).unwrap();
        assert_eq!(rep.tail_kind, TailKind::Polynomial);
        let (g, (lo, hi)) = rep.exponent_estimate.unwrap();
        assert!((g - 3.0).abs() < 0.1, "gamma {g}");
        assert!(lo < hi);
    }

    #[test]
    fn geometric_returns_are_exponential() {
        let times = sample_returns(&doubling_induced(), 1_000_000, 2).unwrap();
        let rep = tail_exponent(&as_f64(&times)).unwrap();
        assert_eq!(rep.tail_kind, TailKind::ExponentialOrFaster);
        assert!(rep.exponent_estimate.is_none());
    }

    #[test]
    fn tail_needs_data() {
        assert!(matches!(
            tail_exponent(&[1.0; 100]),
            Err(Error::InsufficientData { .. })
        ));
        assert!(matches!(
            moment_norm(&[1.0; 100], 2.0),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn moment_verdicts() {
        let times = sample_returns(&doubling_induced(), 1_000_000, 8).unwrap();
        let rep = moment_norm(&as_f64(&times), 2.5).unwrap();
        assert!(rep.finite, "{rep:?}");
        // E[R^2.5] = Σ 2^{-n} n^{2.5}
        let exact: f64 = (1..200)
            .map(|n| 0.5f64.powi(n) * (n as f64).powf(2.5))
            .sum();
        assert!((rep.norm - exact.powf(0.4)).abs() / exact.powf(0.4) < 0.01);

        let light = moment_norm(&pareto(4.0, 1_000_000, 3), 2.5).unwrap();
        assert!(light.finite, "{light:?}");
        let heavy = moment_norm(&pareto(2.2, 1_000_000, 3), 2.5).unwrap();
        assert!(!heavy.finite, "{heavy:?}");
    }

    #[test]
    fn moment_verdicts_are_seed_robust() {
        let mut finite_ok = 0;
        let mut infinite_ok = 0;
        for seed in 0..20 {
            finite_ok += usize::from(
                moment_norm(&pareto(4.0, 200_000, seed), 2.5)
                    .unwrap()
                    .finite,
            );
            infinite_ok += usize::from(
                !moment_norm(&pareto(2.2, 200_000, seed + 100), 2.5)
                    .unwrap()
                    .finite,
            );
        }
        assert!(finite_ok >= 18, "finite verdicts {finite_ok}/20");
        assert!(infinite_ok >= 18, "infinite verdicts {infinite_ok}/20");
    }

    #[test]
    fn kac_on_doubling() {
        let times = sample_returns(&doubling_induced(), 1_000_000, 17).unwrap();
        let (m, se) = mean_and_se(&as_f64(&times));
        assert!((m - 2.0).abs() < 3.0 * se.max(1e-3), "{m} ± {se}");
    }
}
