//! Discrete tower over a first-return induced map.
//!
//! Tower points are pairs `(x, ℓ)` with `x ∈ Y` and `0 ≤ ℓ < R(x)`; the tower
//! map is `F(x, ℓ) = (x, ℓ + 1)` below the roof and `F(x, R(x) − 1) = (f x, 0)`.
//! Levels are never stored: `(x, ℓ)` projects to `T^ℓ x`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs_markov::default_beta;
use crate::inducing::InducedSystem;
use crate::numeric::{batched_mean, quantile_sorted};
use crate::systems::Observable;

/// Quantile of the return time up to which level masses are tabulated.
pub const LEVEL_QUANTILE: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerModel {
    #[serde(skip)]
    base: Option<InducedSystem>,
    pub mean_return: f64,
    pub mean_return_se: f64,
    /// `m(R > ℓ) / R̄` for `ℓ = 0..level_masses.len()`.
    pub level_masses: Vec<f64>,
    /// Mass of all levels above the tabulated ones.
    pub overflow_mass: f64,
    pub max_return: u64,
    pub theta: f64,
}

impl TowerModel {
    pub fn base(&self) -> &InducedSystem {
        self.base
            .as_ref()
            .expect("tower built from an induced system")
    }

    /// `R̄ · m(Y)`, which is 1 for first-return towers.
    pub fn kac_product(&self) -> f64 {
        self.mean_return * self.base().base_length()
    }
}

/// Tower over `induced` from stationary return-time samples.
pub fn build_tower(induced: &InducedSystem, samples: &[u64]) -> Result<TowerModel> {
    if samples.len() < 1000 {
        return Err(Error::InsufficientData {
            needed: 1000,
            got: samples.len(),
        });
    }
    let xs: Vec<f64> = samples.iter().map(|&r| r as f64).collect();
    let (mean, se) = batched_mean(&xs, 50);
    let mut sorted = xs.clone();
    sorted.sort_by(f64::total_cmp);
    let horizon = quantile_sorted(&sorted, LEVEL_QUANTILE).ceil() as usize;
    let n = sorted.len() as f64;
    let mut masses = Vec::with_capacity(horizon);
    let mut idx = 0;
    for level in 0..horizon {
        // count of samples with R > level
        while idx < sorted.len() && sorted[idx] <= level as f64 {
            idx += 1;
        }
        masses.push((sorted.len() - idx) as f64 / n / mean);
    }
    let tabulated: f64 = masses.iter().sum();
    Ok(TowerModel {
        base: Some(*induced),
        mean_return: mean,
        mean_return_se: se,
        overflow_mass: (1.0 - tabulated).max(0.0),
        level_masses: masses,
        max_return: *samples.iter().max().expect("nonempty"),
        theta: default_beta(induced, 10_000, 0)?,
    })
}

/// `σ² = σ₁² / R̄`.
pub fn lift_variance(sigma1_sq: f64, mean_return: f64) -> Result<f64> {
    if !(mean_return > 0.0) {
        return Err(Error::Parameter(format!(
            "mean return time must be positive, got {mean_return}"
        )));
    }
    if !(sigma1_sq >= 0.0) {
        return Err(Error::Parameter(format!(
            "base variance must be nonnegative, got {sigma1_sq}"
        )));
    }
    Ok(sigma1_sq / mean_return)
}

#[derive(Clone)]
enum TowerFn {
    /// `φ(x, ℓ) = ψ(T^ℓ x)`.
    Projected(Observable),
    General(Arc<dyn Fn(f64, u64) -> f64 + Send + Sync>),
}

/// An observable on the tower.
#[derive(Clone)]
pub struct TowerObservable {
    name: String,
    f: TowerFn,
}

impl std::fmt::Debug for TowerObservable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TowerObservable")
            .field("name", &self.name)
            .finish()
    }
}

impl TowerObservable {
    pub fn projected(psi: Observable) -> Self {
        Self {
            name: psi.name().to_string(),
            f: TowerFn::Projected(psi),
        }
    }

    pub fn from_fn<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64, u64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            f: TowerFn::General(Arc::new(f)),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// `φ(x, ℓ)` for a base point `x`.
    pub fn eval(&self, induced: &InducedSystem, x: f64, level: u64) -> Result<f64> {
        match &self.f {
            TowerFn::Projected(psi) => Ok(psi.eval(induced.parent().evolve(x, level)?)),
            TowerFn::General(f) => Ok(f(x, level)),
        }
    }
}

/// `Φ(x) = Σ_{j<R(x)} φ(x, j)` on the base.
#[derive(Debug, Clone)]
pub struct InducedTowerObservable {
    induced: InducedSystem,
    phi: TowerObservable,
}

impl InducedTowerObservable {
    /// `(Φ(x), R(x))`.
    pub fn eval_with_return(&self, x: f64) -> Result<(f64, u64)> {
        let (r, _) = self.induced.first_return(x)?;
        let sum = match &self.phi.f {
            TowerFn::Projected(psi) => {
                let t = self.induced.parent();
                let mut y = x;
                let mut s = 0.0;
                for _ in 0..r {
                    s += psi.eval(y);
                    y = t.apply(y);
                }
                s
            }
            TowerFn::General(f) => (0..r).map(|j| f(x, j)).sum(),
        };
        Ok((sum, r))
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.eval_with_return(x).map(|(s, _)| s)
    }

    /// As an ordinary observable on `Y`; points whose orbit never returns
    /// evaluate to NaN.
    pub fn to_observable(&self, sup_norm: f64) -> Result<Observable> {
        let me = self.clone();
        Observable::new(
            format!("induced[{}]", self.phi.name),
            move |x| me.eval(x).unwrap_or(f64::NAN),
            1.0,
            0.0,
            sup_norm,
        )
    }
}

pub fn induce_observable(tower: &TowerModel, phi: &TowerObservable) -> InducedTowerObservable {
    InducedTowerObservable {
        induced: *tower.base(),
        phi: phi.clone(),
    }
}

/// Partial sums of `φ` along a tower orbit from `(x, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TowerOrbit {
    /// `sums[n]` is the sum of the first `n + 1` values.
    pub sums: Vec<f64>,
    /// Indices `n` such that step `n` ends an excursion (the next point is on
    /// level 0).
    pub excursion_ends: Vec<usize>,
    pub max_return: u64,
}

impl TowerOrbit {
    /// Sum over the first `n` values.
    pub fn sum_of_first(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.sums[n - 1]
        }
    }
}

pub fn tower_orbit(
    tower: &TowerModel,
    start: f64,
    steps: usize,
    phi: &TowerObservable,
) -> Result<TowerOrbit> {
    if steps == 0 {
        return Err(Error::Parameter(
            "tower orbit needs at least one step".into(),
        ));
    }
    let induced = tower.base();
    let parent = induced.parent();
    let mut sums = Vec::with_capacity(steps);
    let mut ends = Vec::new();
    let mut x = start;
    let (mut r, mut fx) = induced.first_return(x)?;
    let mut max_return = r;
    let mut level = 0u64;
    // position T^level x, tracked incrementally for projected observables
    let mut y = x;
    let mut s = 0.0;
    for n in 0..steps {
        s += match &phi.f {
            TowerFn::Projected(psi) => psi.eval(y),
            TowerFn::General(f) => f(x, level),
        };
        sums.push(s);
        level += 1;
        y = parent.apply(y);
        if level == r {
            ends.push(n);
            x = fx;
            y = x;
            level = 0;
            if n + 1 < steps {
                (r, fx) = induced.first_return(x)?;
                max_return = max_return.max(r);
            }
        }
    }
    Ok(TowerOrbit {
        sums,
        excursion_ends: ends,
        max_return,
    })
}
