//! Suspension semiflows `T_t(x, u) = (x, u + t)` under a roof `h`, with the
//! identification `(x, h(x)) ∼ (T x, 0)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inducing::{Dynamics, InducedSystem};
use crate::numeric::{adaptive_simpson, batched_mean};
use crate::systems::{MapSystem, Observable};

/// Relative tolerance of the per-segment quadrature.
pub const SEGMENT_TOLERANCE: f64 = 1e-8;

/// Base dynamics of a suspension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowBase {
    Map(MapSystem),
    Induced(InducedSystem),
}

impl FlowBase {
    pub fn step(&self, x: f64) -> Result<f64> {
        match self {
            FlowBase::Map(t) => Ok(t.apply(x)),
            FlowBase::Induced(f) => f.induced_map(x),
        }
    }

    pub fn dynamics(&self) -> &dyn Dynamics {
        match self {
            FlowBase::Map(t) => t,
            FlowBase::Induced(f) => f,
        }
    }
}

/// A positive roof function. Piecewise roofs need only be Hölder on the
/// pieces of the base partition.
#[derive(Clone)]
pub struct Roof {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub holder_exponent: f64,
    pub holder_constant: f64,
    pub piecewise: bool,
    constant: Option<f64>,
}

impl std::fmt::Debug for Roof {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Roof")
            .field("name", &self.name)
            .field("holder_exponent", &self.holder_exponent)
            .field("holder_constant", &self.holder_constant)
            .field("piecewise", &self.piecewise)
            .finish()
    }
}

impl Roof {
    pub fn new<F>(
        name: impl Into<String>,
        f: F,
        holder_exponent: f64,
        holder_constant: f64,
    ) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(holder_exponent > 0.0 && holder_exponent <= 1.0) || !(holder_constant >= 0.0) {
            return Err(Error::Parameter("invalid Hölder metadata for roof".into()));
        }
        Ok(Self {
            name: name.into(),
            f: Arc::new(f),
            holder_exponent,
            holder_constant,
            piecewise: false,
            constant: None,
        })
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Parameter(format!("roof must be positive, got {c}")));
        }
        let mut r = Self::new(format!("const({c})"), move |_| c, 1.0, 0.0)?;
        r.constant = Some(c);
        Ok(r)
    }

    pub fn piecewise(mut self) -> Self {
        self.piecewise = true;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

/// Suspension over `base` under `roof`.
#[derive(Debug, Clone)]
pub struct SuspensionFlow {
    base: FlowBase,
    roof: Roof,
    pub mean_roof: f64,
    pub mean_roof_se: f64,
}

/// A point `(x, u)` with `0 ≤ u < h(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub x: f64,
    pub u: f64,
}

impl SuspensionFlow {
    /// Builds the flow, estimating `h̄` from `n` stationary base points
    /// (exactly for constant roofs). Fails if a sampled roof value is not
    /// positive.
    pub fn new(base: FlowBase, roof: Roof, n: usize, seed: u64) -> Result<Self> {
        if let Some(c) = roof.constant {
            return Ok(Self {
                base,
                roof,
                mean_roof: c,
                mean_roof_se: 0.0,
            });
        }
        if n < 1000 {
            return Err(Error::InsufficientData {
                needed: 1000,
                got: n,
            });
        }
        let mut values = Vec::with_capacity(n);
        for x in base.dynamics().stationary_points(seed).take(n) {
            let x = x?;
            let h = roof.eval(x);
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Parameter(format!(
                    "roof {} is not positive at {x}: {h}",
                    roof.name
                )));
            }
            values.push(h);
        }
        let (mean, se) = batched_mean(&values, 50);
        Ok(Self {
            base,
            roof,
            mean_roof: mean,
            mean_roof_se: se,
        })
    }

    pub fn base(&self) -> &FlowBase {
        &self.base
    }

    pub fn roof(&self) -> &Roof {
        &self.roof
    }

    fn check(&self, s: FlowState) -> Result<f64> {
        let h = self.roof.eval(s.x);
        if !(s.u >= 0.0 && s.u < h) {
            return Err(Error::Parameter(format!(
                "flow state height {} outside [0, {h})",
                s.u
            )));
        }
        Ok(h)
    }
}

/// `T_t(x, u)`.
pub fn flow_evolve(flow: &SuspensionFlow, state: FlowState, t: f64) -> Result<FlowState> {
    if !(t >= 0.0) {
        return Err(Error::Parameter(format!(
            "flow time must be nonnegative, got {t}"
        )));
    }
    let mut h = flow.check(state)?;
    let FlowState { mut x, mut u } = state;
    let mut remaining = t;
    while u + remaining >= h {
        remaining -= h - u;
        x = flow.base.step(x)?;
        u = 0.0;
        h = flow.roof.eval(x);
    }
    Ok(FlowState {
        x,
        u: u + remaining,
    })
}

/// An observable on the suspension space.
#[derive(Clone)]
pub enum FlowObservable {
    /// `ψ(x, u) = ψ₀(x)`.
    BaseOnly(Observable),
    General(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for FlowObservable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FlowObservable::BaseOnly(o) => write!(f, "BaseOnly({})", o.name()),
            FlowObservable::General(_) => write!(f, "General"),
        }
    }
}

impl FlowObservable {
    pub fn general<F>(f: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        FlowObservable::General(Arc::new(f))
    }

    pub fn eval(&self, x: f64, u: f64) -> f64 {
        match self {
            FlowObservable::BaseOnly(o) => o.eval(x),
            FlowObservable::General(f) => f(x, u),
        }
    }

    /// `∫_a^b ψ(x, u) du`.
    pub fn segment(&self, x: f64, a: f64, b: f64) -> Result<f64> {
        match self {
            FlowObservable::BaseOnly(o) => Ok(o.eval(x) * (b - a)),
            FlowObservable::General(f) => adaptive_simpson(|u| f(x, u), a, b, SEGMENT_TOLERANCE),
        }
    }
}

/// `∫_0^t ψ(T_s(x, u)) ds`.
pub fn birkhoff_integral(
    flow: &SuspensionFlow,
    psi: &FlowObservable,
    state: FlowState,
    t: f64,
) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Parameter(format!(
            "flow time must be nonnegative, got {t}"
        )));
    }
    let mut h = flow.check(state)?;
    let FlowState { mut x, mut u } = state;
    let mut remaining = t;
    let mut total = 0.0;
    while u + remaining >= h {
        total += psi.segment(x, u, h)?;
        remaining -= h - u;
        x = flow.base.step(x)?;
        u = 0.0;
        h = flow.roof.eval(x);
    }
    if remaining > 0.0 {
        total += psi.segment(x, u, u + remaining)?;
    }
    Ok(total)
}

/// `φ(x) = ∫_0^{h(x)} ψ(x, u) du` on the base.
#[derive(Debug, Clone)]
pub struct InducedFlowObservable {
    roof: Roof,
    psi: FlowObservable,
}

impl InducedFlowObservable {
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.psi.segment(x, 0.0, self.roof.eval(x))
    }

    /// As an ordinary observable; quadrature failures evaluate to NaN.
    pub fn to_observable(&self, sup_norm: f64) -> Result<Observable> {
        let me = self.clone();
        Observable::new(
            "induced-flow",
            move |x| me.eval(x).unwrap_or(f64::NAN),
            1.0,
            0.0,
            sup_norm,
        )
    }
}

pub fn induce_flow_observable(
    flow: &SuspensionFlow,
    psi: &FlowObservable,
) -> InducedFlowObservable {
    InducedFlowObservable {
        roof: flow.roof.clone(),
        psi: psi.clone(),
    }
}

/// `σ² = σ₁² / h̄`.
pub fn flow_variance(sigma1_sq: f64, mean_roof: f64) -> Result<f64> {
    if !(mean_roof > 0.0) {
        return Err(Error::Parameter(format!(
            "mean roof must be positive, got {mean_roof}"
        )));
    }
    if !(sigma1_sq >= 0.0) {
        return Err(Error::Parameter(format!(
            "base variance must be nonnegative, got {sigma1_sq}"
        )));
    }
    Ok(sigma1_sq / mean_roof)
}

/// Integrals of `ψ` over consecutive windows of length `dt` from `start`.
pub fn flow_increments(
    flow: &SuspensionFlow,
    psi: &FlowObservable,
    start: FlowState,
    dt: f64,
    count: usize,
) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::Parameter(format!(
            "window must be positive, got {dt}"
        )));
    }
    let mut out = Vec::with_capacity(count);
    let mut s = start;
    for _ in 0..count {
        out.push(birkhoff_integral(flow, psi, s, dt)?);
        s = flow_evolve(flow, s, dt)?;
    }
    Ok(out)
}

/// `(Σ_{j<N} h∘T^j − N h̄) / N^{1−δ/2}` at each horizon of `grid`, along one
/// stationary base orbit. Values should shrink as `N` grows.
pub fn roof_sum_monitor(
    flow: &SuspensionFlow,
    grid: &[usize],
    delta: f64,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    let mut sorted = grid.to_vec();
    sorted.sort_unstable();
    let Some(&horizon) = sorted.last() else {
        return Ok(Vec::new());
    };
    let mut out = Vec::with_capacity(sorted.len());
    let mut s = 0.0;
    let mut next = 0;
    for (i, x) in flow
        .base
        .dynamics()
        .stationary_points(seed)
        .take(horizon)
        .enumerate()
    {
        s += flow.roof.eval(x?);
        while next < sorted.len() && sorted[next] == i + 1 {
            let n = (i + 1) as f64;
            out.push((i + 1, (s - n * flow.mean_roof) / n.powf(1.0 - delta / 2.0)));
            next += 1;
        }
    }
    Ok(out)
}
