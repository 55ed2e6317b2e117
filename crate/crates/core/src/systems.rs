//! Concrete one-dimensional maps and observables.
//!
//! Three families are implemented, all with two increasing full branches on
//! `[0, 1)` (points are represented in `[0, 1)`; circle points by their
//! representative):
//!
//! * `Doubling`: `T x = 2x mod 1`.
//! * `Lsv`: the Liverani–Saussol–Vaienti map, `T x = x(1 + (2x)^α)` on
//!   `[0, 1/2)` and `2x - 1` on `[1/2, 1)`. Neutral fixed point at 0.
//! * `NeutralCircle`: a degree-2 circle map with a two-sided neutral fixed
//!   point. With `z` the lift of `x` to `[-1/2, 1/2)`,
//!   `T z = z(1 + 2^α |z|^α) mod 1`. The constant `2^α` is the unique choice
//!   making `T(±1/2) = ±1`, so `T` is continuous of degree 2 and `C^1` on the
//!   circle, with `T'(0) = 1`, `T' > 1` elsewhere and
//!   `-z T''(z) = α(1+α) 2^α |z|^α`.
//!
//! Orbits near the neutral point lose relative precision slowly in double
//! precision. Return-time statistics, not individual orbits, are the
//! quantities of record. Stationary doubling orbits are generated exactly by
//! shifting a 64-bit window over an i.i.d. bit stream (the binary expansion
//! of a Lebesgue-typical point), since naive floating-point doubling
//! collapses to 0 after about 53 steps.

use std::fmt;
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{batched_mean, gauss_legendre};
use crate::rng::{rng_from_seed, split_seed, Rng};

/// Iterates discarded before a stationary orbit is recorded.
pub const BURN_IN: usize = 1_000;

const TWO_POW_M53: f64 = 1.0 / 9_007_199_254_740_992.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Doubling,
    Lsv,
    NeutralCircle,
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SystemKind::Doubling => "doubling",
            SystemKind::Lsv => "lsv",
            SystemKind::NeutralCircle => "neutral_circle",
        };
        f.write_str(s)
    }
}

/// Declarative description of a system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub kind: SystemKind,
    /// Intermittency parameter; ignored for `Doubling`.
    pub alpha: Option<f64>,
}

impl SystemSpec {
    pub fn doubling() -> Self {
        Self {
            kind: SystemKind::Doubling,
            alpha: None,
        }
    }

    pub fn lsv(alpha: f64) -> Self {
        Self {
            kind: SystemKind::Lsv,
            alpha: Some(alpha),
        }
    }

    pub fn neutral_circle(alpha: f64) -> Self {
        Self {
            kind: SystemKind::NeutralCircle,
            alpha: Some(alpha),
        }
    }
}

/// A map of `[0, 1)` (or the circle) with two increasing full branches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapSystem {
    kind: SystemKind,
    alpha: f64,
    out_of_regime: bool,
}

/// Lower ends of the two branches; the second branch ends at 1.
const BRANCH_SPLIT: f64 = 0.5;

/// Reduce to the representative in `[0, 1)`; ties at 1 map to 0.
#[inline]
pub fn wrap_unit(y: f64) -> f64 {
    let r = y - y.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

pub fn make_system(spec: SystemSpec) -> Result<MapSystem> {
    match spec.kind {
        SystemKind::Doubling => Ok(MapSystem {
            kind: SystemKind::Doubling,
            alpha: 0.0,
            out_of_regime: false,
        }),
        SystemKind::Lsv | SystemKind::NeutralCircle => {
            let alpha = spec.alpha.ok_or_else(|| {
                Error::Parameter(format!("{} requires the parameter alpha", spec.kind))
            })?;
            if !alpha.is_finite() || alpha <= 0.0 {
                return Err(Error::Parameter(format!(
                    "alpha must be finite and positive, got {alpha}"
                )));
            }
            Ok(MapSystem {
                kind: spec.kind,
                alpha,
                // the almost sure invariance principle regime is 0 < alpha < 1/2
                out_of_regime: alpha >= 0.5,
            })
        }
    }
}

impl MapSystem {
    pub fn doubling() -> Self {
        make_system(SystemSpec::doubling()).expect("doubling is always valid")
    }

    pub fn lsv(alpha: f64) -> Result<Self> {
        make_system(SystemSpec::lsv(alpha))
    }

    pub fn neutral_circle(alpha: f64) -> Result<Self> {
        make_system(SystemSpec::neutral_circle(alpha))
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn spec(&self) -> SystemSpec {
        SystemSpec {
            kind: self.kind,
            alpha: (self.kind != SystemKind::Doubling).then_some(self.alpha),
        }
    }

    /// Set when the parameter lies outside `0 < α < 1/2`.
    pub fn out_of_regime(&self) -> bool {
        self.out_of_regime
    }

    pub fn is_circle(&self) -> bool {
        matches!(self.kind, SystemKind::Doubling | SystemKind::NeutralCircle)
    }

    pub fn name(&self) -> String {
        match self.kind {
            SystemKind::Doubling => "doubling".to_string(),
            k => format!("{k}(alpha={})", self.alpha),
        }
    }

    /// Default inducing set: `[1/2, 1)` for the interval maps, `[1/4, 3/4)`
    /// (the arc opposite the neutral point) for the neutral circle map.
    pub fn default_base_set(&self) -> (f64, f64) {
        match self.kind {
            SystemKind::NeutralCircle => (0.25, 0.75),
            _ => (0.5, 1.0),
        }
    }

    pub fn branch_count(&self) -> usize {
        2
    }

    /// Domain pieces `[lo, hi)` of the branches, in order.
    pub fn branches(&self) -> [(f64, f64); 2] {
        [(0.0, BRANCH_SPLIT), (BRANCH_SPLIT, 1.0)]
    }

    #[inline]
    pub fn branch_index(&self, x: f64) -> usize {
        usize::from(x >= BRANCH_SPLIT)
    }

    /// One application of the map, without a domain check.
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match self.kind {
            SystemKind::Doubling => {
                let y = 2.0 * x;
                if y >= 1.0 {
                    y - 1.0
                } else {
                    y
                }
            }
            SystemKind::Lsv => {
                if x < BRANCH_SPLIT {
                    wrap_unit(x * (1.0 + (2.0 * x).powf(self.alpha)))
                } else {
                    2.0 * x - 1.0
                }
            }
            SystemKind::NeutralCircle => {
                let z = if x < BRANCH_SPLIT { x } else { x - 1.0 };
                let c = 2f64.powf(self.alpha);
                wrap_unit(z * (1.0 + c * z.abs().powf(self.alpha)))
            }
        }
    }

    /// Derivative `T'(x)` (one-sided at branch boundaries).
    pub fn derivative(&self, x: f64) -> f64 {
        match self.kind {
            SystemKind::Doubling => 2.0,
            SystemKind::Lsv => {
                if x < BRANCH_SPLIT {
                    1.0 + (1.0 + self.alpha) * (2.0 * x).powf(self.alpha)
                } else {
                    2.0
                }
            }
            SystemKind::NeutralCircle => {
                let z = if x < BRANCH_SPLIT { x } else { x - 1.0 };
                1.0 + (1.0 + self.alpha) * 2f64.powf(self.alpha) * z.abs().powf(self.alpha)
            }
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x.is_finite() && (0.0..1.0).contains(&x)
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain {
                system: self.name(),
                x,
            })
        }
    }

    /// `T^n x`.
    pub fn evolve(&self, x: f64, n: u64) -> Result<f64> {
        self.check_domain(x)?;
        let mut y = x;
        for _ in 0..n {
            y = self.apply(y);
        }
        Ok(y)
    }

    /// Value of branch `branch` extended continuously to the right end of
    /// its domain piece (so the branch maps onto `[0, 1]`).
    fn branch_value(&self, branch: usize, x: f64) -> f64 {
        let raw = match self.kind {
            SystemKind::Doubling => 2.0 * x - branch as f64,
            SystemKind::Lsv => {
                if branch == 0 {
                    x * (1.0 + (2.0 * x).powf(self.alpha))
                } else {
                    2.0 * x - 1.0
                }
            }
            SystemKind::NeutralCircle => {
                let z = if branch == 0 { x } else { x - 1.0 };
                let c = 2f64.powf(self.alpha);
                z * (1.0 + c * z.abs().powf(self.alpha)) + branch as f64
            }
        };
        raw.clamp(0.0, 1.0)
    }

    /// Preimage of `y ∈ [0, 1)` on branch `branch`.
    pub fn inverse_branch(&self, branch: usize, y: f64) -> f64 {
        let (lo, hi) = self.branches()[branch];
        match self.kind {
            SystemKind::Doubling => (y + branch as f64) * 0.5,
            SystemKind::Lsv if branch == 1 => (y + 1.0) * 0.5,
            _ => {
                // increasing branch onto [0, 1]: bisection to full precision
                let (mut a, mut b) = (lo, hi);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if m <= a || m >= b {
                        break;
                    }
                    if self.branch_value(branch, m) < y {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                0.5 * (a + b)
            }
        }
    }

    /// Stationary orbit under the absolutely continuous invariant measure,
    /// after `BURN_IN` discarded iterates.
    pub fn orbit(&self, seed: u64) -> Orbit {
        let mut rng = rng_from_seed(seed);
        let state = match self.kind {
            SystemKind::Doubling => OrbitState::Bits {
                window: rng.gen(),
                pool: rng.gen(),
                left: 64,
            },
            _ => OrbitState::Point(rng.gen_range(f64::EPSILON..1.0)),
        };
        let mut orbit = Orbit {
            system: *self,
            state,
            rng,
        };
        for _ in 0..BURN_IN {
            orbit.advance();
        }
        orbit
    }

    /// `n` consecutive points of a stationary orbit.
    pub fn sample_invariant(&self, n: usize, seed: u64) -> Vec<f64> {
        self.orbit(seed).take(n).collect()
    }
}

enum OrbitState {
    /// `window` holds the first 64 binary digits of the current point; fresh
    /// digits are shifted in from `pool`.
    Bits {
        window: u64,
        pool: u64,
        left: u32,
    },
    Point(f64),
}

/// Stationary orbit iterator; yields the current point, then advances.
pub struct Orbit {
    system: MapSystem,
    state: OrbitState,
    rng: Rng,
}

impl Orbit {
    #[inline]
    pub fn current(&self) -> f64 {
        match self.state {
            OrbitState::Bits { window, .. } => (window >> 11) as f64 * TWO_POW_M53,
            OrbitState::Point(x) => x,
        }
    }

    #[inline]
    fn advance(&mut self) {
        match &mut self.state {
            OrbitState::Bits { window, pool, left } => {
                if *left == 0 {
                    *pool = self.rng.gen();
                    *left = 64;
                }
                *window = (*window << 1) | (*pool & 1);
                *pool >>= 1;
                *left -= 1;
            }
            OrbitState::Point(x) => *x = self.system.apply(*x),
        }
    }
}

impl Iterator for Orbit {
    type Item = f64;

    #[inline]
    fn next(&mut self) -> Option<f64> {
        let x = self.current();
        self.advance();
        Some(x)
    }
}

/// Offset subtracted from an observable to center it, with its standard
/// error (0 when computed by exact quadrature).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Centering {
    pub constant: f64,
    pub standard_error: f64,
}

/// A real-valued Hölder observable on the unit interval or circle.
#[derive(Clone)]
pub struct Observable {
    name: String,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub holder_exponent: f64,
    pub holder_constant: f64,
    pub sup_norm: f64,
    pub mean_zero: bool,
    pub centering: Option<Centering>,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("name", &self.name)
            .field("holder_exponent", &self.holder_exponent)
            .field("holder_constant", &self.holder_constant)
            .field("sup_norm", &self.sup_norm)
            .field("mean_zero", &self.mean_zero)
            .field("centering", &self.centering)
            .finish()
    }
}

impl Observable {
    pub fn new<F>(
        name: impl Into<String>,
        f: F,
        holder_exponent: f64,
        holder_constant: f64,
        sup_norm: f64,
    ) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(holder_exponent > 0.0 && holder_exponent <= 1.0) {
            return Err(Error::Parameter(format!(
                "Hölder exponent must lie in (0, 1], got {holder_exponent}"
            )));
        }
        if !(holder_constant >= 0.0 && sup_norm >= 0.0) {
            return Err(Error::Parameter(
                "Hölder constant and sup norm must be nonnegative".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            eval: Arc::new(f),
            holder_exponent,
            holder_constant,
            sup_norm,
            mean_zero: false,
            centering: None,
        })
    }

    /// `cos(2π k x)`; mean zero under Lebesgue measure for `k ≠ 0`.
    pub fn cos_2pi(k: u32) -> Self {
        let w = 2.0 * std::f64::consts::PI * k as f64;
        Self::new(
            format!("cos(2pi*{k}x)"),
            move |x| (w * x).cos(),
            1.0,
            w,
            1.0,
        )
        .expect("valid metadata")
    }

    pub fn identity() -> Self {
        Self::new("x", |x| x, 1.0, 1.0, 1.0).expect("valid metadata")
    }

    pub fn constant(c: f64) -> Self {
        let mut v = Self::new(format!("const({c})"), move |_| c, 1.0, 0.0, c.abs())
            .expect("valid metadata");
        v.mean_zero = c == 0.0;
        v
    }

    /// `cos(4πx) - cos(2πx)`, the coboundary `w∘T - w` of `w = cos(2πx)`
    /// under the doubling map.
    pub fn doubling_coboundary() -> Self {
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut v = Self::new(
            "cos(4pi x)-cos(2pi x)",
            move |x| (2.0 * two_pi * x).cos() - (two_pi * x).cos(),
            1.0,
            3.0 * two_pi,
            2.0,
        )
        .expect("valid metadata");
        v.mean_zero = true;
        v
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    /// `self - c`, flagged mean zero.
    pub fn shifted(&self, centering: Centering) -> Self {
        let inner = self.eval.clone();
        let c = centering.constant;
        Self {
            name: format!("{}-({c})", self.name),
            eval: Arc::new(move |x| inner(x) - c),
            holder_exponent: self.holder_exponent,
            holder_constant: self.holder_constant,
            sup_norm: self.sup_norm + c.abs(),
            mean_zero: true,
            centering: Some(centering),
        }
    }

    /// Largest observed `|v(x) - v(y)| / d(x, y)^γ` over `pairs` random
    /// pairs, using the circle distance on circle systems.
    pub fn empirical_holder_constant(&self, circle: bool, pairs: usize, seed: u64) -> f64 {
        let mut rng = rng_from_seed(seed);
        let mut best: f64 = 0.0;
        for _ in 0..pairs {
            let x: f64 = rng.gen();
            // mix global and local pairs
            let y = if rng.gen_bool(0.5) {
                rng.gen::<f64>()
            } else {
                wrap_unit(x + rng.gen_range(-1e-3..1e-3))
            };
            let mut d = (x - y).abs();
            if circle {
                d = d.min(1.0 - d);
            }
            if d > 0.0 {
                best = best.max((self.eval(x) - self.eval(y)).abs() / d.powf(self.holder_exponent));
            }
        }
        best
    }
}

/// Birkhoff-average mean with a batch-means standard error.
fn birkhoff_mean(system: &MapSystem, v: &Observable, n: usize, seed: u64) -> (f64, f64) {
    let values: Vec<f64> = system.orbit(seed).take(n).map(|x| v.eval(x)).collect();
    batched_mean(&values, 50)
}

/// Subtract the invariant-measure mean of `v`.
///
/// On the doubling map the invariant measure is Lebesgue and the mean is
/// computed by composite Gauss–Legendre quadrature (standard error 0). On the
/// other systems two Birkhoff averages over independent seeds are combined;
/// if they disagree by more than 6 combined standard errors the estimate is
/// rejected.
pub fn center_observable(
    v: &Observable,
    system: &MapSystem,
    n: usize,
    seed: u64,
) -> Result<Observable> {
    const MIN_BUDGET: usize = 10_000;
    if n < MIN_BUDGET {
        return Err(Error::InsufficientData {
            needed: MIN_BUDGET,
            got: n,
        });
    }
    let centering = match system.kind() {
        SystemKind::Doubling => {
            let panels = 256;
            let h = 1.0 / panels as f64;
            let mean = (0..panels)
                .map(|i| gauss_legendre(|x| v.eval(x), i as f64 * h, (i + 1) as f64 * h))
                .sum::<f64>();
            Centering {
                constant: mean,
                standard_error: 0.0,
            }
        }
        _ => {
            let half = n / 2;
            let (m1, s1) = birkhoff_mean(system, v, half, split_seed(seed, 1));
            let (m2, s2) = birkhoff_mean(system, v, n - half, split_seed(seed, 2));
            let se = (s1 * s1 + s2 * s2).sqrt();
            if (m1 - m2).abs() > 6.0 * se {
                return Err(Error::Estimation(format!(
                    "Birkhoff averages from independent seeds disagree: {m1} vs {m2} (combined SE {se})"
                )));
            }
            Centering {
                constant: 0.5 * (m1 + m2),
                standard_error: 0.5 * se,
            }
        }
    };
    Ok(v.shifted(centering))
}
