//! Planar periodic Lorentz gas with circular scatterers on the unit torus.
//!
//! Flow states carry a position (any representative modulo `Z²`) and a unit
//! velocity. Collision states use the arclength `r = ρφ` on the hit scatterer
//! and the signed angle `θ ∈ [−π/2, π/2]` between the outgoing velocity and
//! the outward normal.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::numeric::adaptive_simpson;
use crate::rng::{rng_from_seed, split_seed, Rng};

/// Angles within this distance of `±π/2` are tangential.
pub const TANGENCY_TOLERANCE: f64 = 1e-10;
/// Default cap on the free-flight time before a horizon escape is declared.
pub const DEFAULT_FLIGHT_CAP: f64 = 1e4;

type Vec2 = [f64; 2];

#[inline]
fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub center: Vec2,
    pub radius: f64,
}

/// A validated table: disjoint closed disks on the unit torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilliardTable {
    scatterers: Vec<Scatterer>,
    max_radius: f64,
    /// Cumulative boundary lengths, for a global arclength coordinate.
    offsets: Vec<f64>,
    perimeter: f64,
}

impl BilliardTable {
    pub fn new(scatterers: Vec<Scatterer>) -> Result<Self> {
        if scatterers.is_empty() {
            return Err(Error::Table("table needs at least one scatterer".into()));
        }
        let mut wrapped = Vec::with_capacity(scatterers.len());
        for s in &scatterers {
            if !(s.radius > 0.0) || !s.center.iter().all(|c| c.is_finite()) {
                return Err(Error::Table(format!("invalid scatterer {s:?}")));
            }
            wrapped.push(Scatterer {
                center: [s.center[0].rem_euclid(1.0), s.center[1].rem_euclid(1.0)],
                radius: s.radius,
            });
        }
        for (i, a) in wrapped.iter().enumerate() {
            for (j, b) in wrapped.iter().enumerate().skip(i) {
                for dx in -1..=1 {
                    for dy in -1..=1 {
                        if i == j && dx == 0 && dy == 0 {
                            continue;
                        }
                        let d = ((b.center[0] + dx as f64 - a.center[0]).powi(2)
                            + (b.center[1] + dy as f64 - a.center[1]).powi(2))
                        .sqrt();
                        if d <= a.radius + b.radius {
                            return Err(Error::Table(format!(
                                "scatterers {i} and {j} overlap (centre distance {d:.6}, radii {} and {})",
                                a.radius, b.radius
                            )));
                        }
                    }
                }
            }
        }
        let mut offsets = Vec::with_capacity(wrapped.len());
        let mut perimeter = 0.0;
        for s in &wrapped {
            offsets.push(perimeter);
            perimeter += TAU * s.radius;
        }
        Ok(Self {
            max_radius: wrapped.iter().map(|s| s.radius).fold(0.0, f64::max),
            scatterers: wrapped,
            offsets,
            perimeter,
        })
    }

    /// One disk of radius `radius` at the centre of the cell.
    pub fn single_disk(radius: f64) -> Result<Self> {
        Self::new(vec![Scatterer {
            center: [0.5, 0.5],
            radius,
        }])
    }

    /// Disks of radius 0.4 at the corner and 0.2 at the centre of the cell;
    /// a finite-horizon table.
    pub fn two_disk() -> Self {
        Self::new(vec![
            Scatterer {
                center: [0.0, 0.0],
                radius: 0.4,
            },
            Scatterer {
                center: [0.5, 0.5],
                radius: 0.2,
            },
        ])
        .expect("valid table")
    }

    pub fn scatterers(&self) -> &[Scatterer] {
        &self.scatterers
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    /// Area of the region outside the scatterers in one cell.
    pub fn free_area(&self) -> f64 {
        1.0 - self
            .scatterers
            .iter()
            .map(|s| PI * s.radius * s.radius)
            .sum::<f64>()
    }

    /// `π |Q| / |∂Q|`, the mean free time under the invariant measure.
    pub fn mean_free_time(&self) -> f64 {
        PI * self.free_area() / self.perimeter
    }

    fn inside_any(&self, p: Vec2) -> bool {
        let q = [p[0].rem_euclid(1.0), p[1].rem_euclid(1.0)];
        self.scatterers.iter().any(|s| {
            (-1..=1).any(|dx| {
                (-1..=1).any(|dy| {
                    let d0 = q[0] - s.center[0] - dx as f64;
                    let d1 = q[1] - s.center[1] - dy as f64;
                    d0 * d0 + d1 * d1 < s.radius * s.radius
                })
            })
        })
    }
}

/// Position and unit velocity of a moving particle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub position: Vec2,
    pub direction: Vec2,
}

impl FlowState {
    pub fn from_angle(position: Vec2, angle: f64) -> Self {
        Self {
            position,
            direction: [angle.cos(), angle.sin()],
        }
    }
}

/// Outgoing state at a scatterer boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionState {
    pub scatterer: usize,
    pub r: f64,
    pub theta: f64,
}

impl CollisionState {
    /// Time-reversal involution `(r, θ) ↦ (r, −θ)`.
    pub fn reversed(self) -> Self {
        Self {
            theta: -self.theta,
            ..self
        }
    }
}

/// Result of a free flight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Impact {
    /// State at impact, with the incoming velocity.
    pub state: FlowState,
    pub free_time: f64,
    pub scatterer: usize,
    /// Outward unit normal at the impact point.
    pub normal: Vec2,
}

/// Free flight from `state` to the next scatterer. `exclude` names the
/// scatterer the particle is leaving, which a convex body cannot hit again.
pub fn next_collision_from(
    table: &BilliardTable,
    state: &FlowState,
    exclude: Option<usize>,
    cap: f64,
) -> Result<Impact> {
    let p = state.position;
    let d = state.direction;
    let shift = [p[0].floor(), p[1].floor()];
    let pw = [p[0] - shift[0], p[1] - shift[1]];
    let mut best = f64::INFINITY;
    let mut hit: Option<(usize, Vec2)> = None;
    let rmax = table.max_radius;
    let mut k: i64 = 0;
    loop {
        let reach = k as f64 - 1.0 - rmax;
        if reach > best {
            break;
        }
        if reach > cap {
            return Err(Error::HorizonEscape { cap });
        }
        for i in -k..=k {
            for j in -k..=k {
                if i.abs().max(j.abs()) != k {
                    continue;
                }
                for (id, s) in table.scatterers.iter().enumerate() {
                    let c = [s.center[0] + i as f64, s.center[1] + j as f64];
                    let oc = [pw[0] - c[0], pw[1] - c[1]];
                    let b = dot(oc, d);
                    if b >= 0.0 {
                        // moving away from this translate
                        continue;
                    }
                    let cc = dot(oc, oc) - s.radius * s.radius;
                    if exclude == Some(id) && cc.abs() < 1e-9 {
                        continue;
                    }
                    let disc = b * b - cc;
                    if disc < 0.0 {
                        continue;
                    }
                    let t = cc / (-b + disc.sqrt());
                    if t > 0.0 && t < best {
                        best = t;
                        hit = Some((id, c));
                    }
                }
            }
        }
        k += 1;
    }
    let (id, c) = hit.expect("a finite best time has a hit");
    let s = table.scatterers[id];
    let q = [pw[0] + best * d[0], pw[1] + best * d[1]];
    let mut n = [(q[0] - c[0]) / s.radius, (q[1] - c[1]) / s.radius];
    let norm = dot(n, n).sqrt();
    n = [n[0] / norm, n[1] / norm];
    Ok(Impact {
        state: FlowState {
            position: [s.center[0] + s.radius * n[0], s.center[1] + s.radius * n[1]],
            direction: d,
        },
        free_time: best,
        scatterer: id,
        normal: n,
    })
}

/// Free flight from a state off the boundary, or leaving it.
pub fn next_collision(table: &BilliardTable, state: &FlowState, cap: f64) -> Result<Impact> {
    next_collision_from(table, state, None, cap)
}

/// Specular reflection `v − 2 (v·n) n`.
pub fn reflect(v: Vec2, n: Vec2) -> Vec2 {
    let k = 2.0 * dot(v, n);
    [v[0] - k * n[0], v[1] - k * n[1]]
}

impl BilliardTable {
    /// Outgoing flow state for a collision state.
    pub fn to_flow(&self, c: &CollisionState) -> FlowState {
        let s = self.scatterers[c.scatterer];
        let phi = c.r / s.radius;
        let n = [phi.cos(), phi.sin()];
        let t = [-n[1], n[0]];
        let (st, ct) = c.theta.sin_cos();
        FlowState {
            position: [s.center[0] + s.radius * n[0], s.center[1] + s.radius * n[1]],
            direction: [ct * n[0] + st * t[0], ct * n[1] + st * t[1]],
        }
    }

    /// Collision state for an outgoing velocity at a boundary point with
    /// outward normal `n`.
    pub fn to_collision(&self, scatterer: usize, n: Vec2, v: Vec2) -> CollisionState {
        let s = self.scatterers[scatterer];
        let phi = n[1].atan2(n[0]).rem_euclid(TAU);
        let along = -n[1] * v[0] + n[0] * v[1];
        let theta = along.atan2(dot(n, v)).clamp(-FRAC_PI_2, FRAC_PI_2);
        CollisionState {
            scatterer,
            r: (s.radius * phi).min(TAU * s.radius),
            theta,
        }
    }

    /// Global arclength coordinate in `[0, perimeter)`.
    pub fn global_arclength(&self, c: &CollisionState) -> f64 {
        self.offsets[c.scatterer] + c.r
    }
}

/// One step of the billiard map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapStep {
    pub state: CollisionState,
    pub free_time: f64,
    /// Displacement over the flight.
    pub displacement: Vec2,
    pub tangency: bool,
    /// Incoming and outgoing unit velocities and the normal at impact.
    pub incoming: Vec2,
    pub outgoing: Vec2,
    pub normal: Vec2,
}

pub fn billiard_map(table: &BilliardTable, c: &CollisionState) -> Result<MapStep> {
    billiard_map_capped(table, c, DEFAULT_FLIGHT_CAP)
}

pub fn billiard_map_capped(table: &BilliardTable, c: &CollisionState, cap: f64) -> Result<MapStep> {
    let out = table.to_flow(c);
    let imp = next_collision_from(table, &out, Some(c.scatterer), cap)?;
    let v = imp.state.direction;
    let w = reflect(v, imp.normal);
    let state = table.to_collision(imp.scatterer, imp.normal, w);
    Ok(MapStep {
        state,
        free_time: imp.free_time,
        displacement: [imp.free_time * v[0], imp.free_time * v[1]],
        tangency: FRAC_PI_2 - state.theta.abs() < TANGENCY_TOLERANCE,
        incoming: v,
        outgoing: w,
        normal: imp.normal,
    })
}

/// Collision state distributed by `cos θ dr dθ` (normalized).
pub fn sample_collision(table: &BilliardTable, rng: &mut Rng) -> CollisionState {
    let u = rng.gen_range(0.0..table.perimeter);
    let id = table.offsets.iter().rposition(|&o| o <= u).unwrap_or(0);
    let r = (u - table.offsets[id]).min(TAU * table.scatterers[id].radius);
    let theta = (2.0 * rng.gen::<f64>() - 1.0).asin();
    CollisionState {
        scatterer: id,
        r,
        theta,
    }
}

/// Flow state distributed by the Liouville measure (uniform position in
/// the free region, uniform direction).
pub fn sample_flow_state(table: &BilliardTable, rng: &mut Rng) -> FlowState {
    loop {
        let p = [rng.gen::<f64>(), rng.gen::<f64>()];
        if !table.inside_any(p) {
            return FlowState::from_angle(p, rng.gen_range(0.0..TAU));
        }
    }
}

/// A collision-free strip of direction `(p, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corridor {
    pub direction: (i64, i64),
    /// Signed distance of the strip's centre line from the origin, measured
    /// along the normal `(−q, p)/|(p, q)|`.
    pub offset: f64,
    pub width: f64,
}

impl Corridor {
    /// Distance from the centre line to the nearest scatterer.
    pub fn clearance(&self) -> f64 {
        0.5 * self.width
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonOptions {
    pub max_denominator: i64,
    pub samples: usize,
    /// Free flights longer than this refute a finite-horizon verdict.
    pub bound: f64,
    pub seed: u64,
}

impl Default for HorizonOptions {
    fn default() -> Self {
        Self {
            max_denominator: 12,
            samples: 1_000_000,
            bound: 10.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonVerdict {
    pub finite: bool,
    pub witness: Option<Corridor>,
    pub max_free_flight: Option<f64>,
    pub bound: f64,
    pub directions_checked: usize,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Widest free strip of rational direction `(p, q)`, if any.
pub fn corridor(table: &BilliardTable, p: i64, q: i64) -> Option<Corridor> {
    let len = ((p * p + q * q) as f64).sqrt();
    let normal = [-(q as f64) / len, p as f64 / len];
    let spacing = 1.0 / len;
    // blocked arcs on the circle of circumference `spacing`
    let mut arcs: Vec<(f64, f64)> = Vec::new();
    for s in &table.scatterers {
        if 2.0 * s.radius >= spacing {
            return None;
        }
        let c = dot(s.center, normal).rem_euclid(spacing);
        arcs.push((c - s.radius, c + s.radius));
    }
    arcs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // merge on the circle by unrolling once
    let mut best: Option<(f64, f64)> = None;
    let n = arcs.len();
    let mut reach = arcs[0].1;
    for i in 1..=n {
        let next_start = if i < n {
            arcs[i].0
        } else {
            arcs[0].0 + spacing
        };
        if next_start > reach {
            let gap = next_start - reach;
            if best.map_or(true, |(g, _)| gap > g) {
                best = Some((gap, 0.5 * (reach + next_start)));
            }
        }
        if i < n {
            reach = reach.max(arcs[i].1);
        }
    }
    best.map(|(width, mid)| {
        let mut offset = mid.rem_euclid(spacing);
        if offset > 0.5 * spacing {
            offset -= spacing;
        }
        if offset.abs() < 1e-12 {
            offset = 0.0;
        }
        Corridor {
            direction: (p, q),
            offset,
            width,
        }
    })
}

/// Primitive directions `(p, q)` with `|p|, |q| ≤ max`, one per line
/// family, axis directions first.
pub fn rational_directions(max: i64) -> Vec<(i64, i64)> {
    let mut dirs = vec![(1, 0), (0, 1)];
    let mut rest = Vec::new();
    for q in 1..=max {
        for p in -max..=max {
            if p != 0 && gcd(p, q) == 1 {
                rest.push((p, q));
            }
        }
    }
    rest.sort_by_key(|&(p, q)| (p * p + q * q, p, q));
    dirs.extend(rest);
    dirs
}

/// Corridor search over rational directions, then an empirical check that
/// free flights stay below `opts.bound`.
pub fn finite_horizon_check(table: &BilliardTable, opts: HorizonOptions) -> Result<HorizonVerdict> {
    let dirs = rational_directions(opts.max_denominator);
    let mut witness: Option<Corridor> = None;
    for &(p, q) in &dirs {
        if let Some(c) = corridor(table, p, q) {
            if witness.map_or(true, |w| c.width > w.width) {
                witness = Some(c);
            }
        }
    }
    if witness.is_some() {
        return Ok(HorizonVerdict {
            finite: false,
            witness,
            max_free_flight: None,
            bound: opts.bound,
            directions_checked: dirs.len(),
        });
    }
    let mut rng = rng_from_seed(opts.seed);
    let mut max_flight = 0.0f64;
    for _ in 0..opts.samples {
        let c = sample_collision(table, &mut rng);
        match billiard_map_capped(table, &c, opts.bound) {
            Ok(step) => max_flight = max_flight.max(step.free_time),
            Err(Error::HorizonEscape { .. }) => {
                max_flight = f64::INFINITY;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(HorizonVerdict {
        finite: max_flight <= opts.bound,
        witness: None,
        max_free_flight: Some(max_flight),
        bound: opts.bound,
        directions_checked: dirs.len(),
    })
}

/// Observable on the flow phase space.
#[derive(Clone)]
pub enum LorentzObservable {
    Zero,
    Constant(f64),
    /// First velocity component; its integral is the displacement.
    VelocityX,
    VelocityY,
    General(Arc<dyn Fn(Vec2, Vec2) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for LorentzObservable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LorentzObservable::Zero => write!(f, "Zero"),
            LorentzObservable::Constant(c) => write!(f, "Constant({c})"),
            LorentzObservable::VelocityX => write!(f, "VelocityX"),
            LorentzObservable::VelocityY => write!(f, "VelocityY"),
            LorentzObservable::General(_) => write!(f, "General"),
        }
    }
}

impl LorentzObservable {
    /// Integral over `s ∈ [a, b]` along the ray `position + s·direction`.
    pub fn segment(&self, state: &FlowState, a: f64, b: f64) -> Result<f64> {
        let len = b - a;
        Ok(match self {
            LorentzObservable::Zero => 0.0,
            LorentzObservable::Constant(c) => c * len,
            LorentzObservable::VelocityX => state.direction[0] * len,
            LorentzObservable::VelocityY => state.direction[1] * len,
            LorentzObservable::General(f) => {
                let p = state.position;
                let d = state.direction;
                adaptive_simpson(|s| f([p[0] + s * d[0], p[1] + s * d[1]], d), a, b, 1e-8)?
            }
        })
    }
}

/// Partial integrals `∫_0^{t_k} ψ` at `t_k = k·dt`, `k = 1..`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRun {
    pub dt: f64,
    pub integrals: Vec<f64>,
    pub collisions: usize,
    pub tangencies: usize,
}

impl FlowRun {
    pub fn total(&self) -> f64 {
        self.integrals.last().copied().unwrap_or(0.0)
    }
}

/// Integrate `ψ` along a flow orbit from a Liouville-distributed start.
pub fn lorentz_flow_observable_run(
    table: &BilliardTable,
    psi: &LorentzObservable,
    t_total: f64,
    dt: f64,
    seed: u64,
) -> Result<FlowRun> {
    if !(t_total > 0.0 && dt > 0.0 && dt <= t_total) {
        return Err(Error::Parameter(format!(
            "need 0 < dt <= t_total, got dt={dt}, t_total={t_total}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let steps = (t_total / dt).floor() as usize;
    let mut integrals = Vec::with_capacity(steps);
    let mut state = sample_flow_state(table, &mut rng);
    let mut exclude = None;
    let mut elapsed = 0.0;
    let mut acc = 0.0;
    let mut collisions = 0;
    let mut tangencies = 0;
    while integrals.len() < steps {
        let imp = next_collision_from(table, &state, exclude, DEFAULT_FLIGHT_CAP)?;
        let tau = imp.free_time;
        while integrals.len() < steps {
            let g = (integrals.len() + 1) as f64 * dt;
            if g > elapsed + tau {
                break;
            }
            integrals.push(acc + psi.segment(&state, 0.0, g - elapsed)?);
        }
        acc += psi.segment(&state, 0.0, tau)?;
        elapsed += tau;
        let w = reflect(imp.state.direction, imp.normal);
        let c = table.to_collision(imp.scatterer, imp.normal, w);
        if FRAC_PI_2 - c.theta.abs() < TANGENCY_TOLERANCE {
            tangencies += 1;
        }
        state = table.to_flow(&c);
        exclude = Some(imp.scatterer);
        collisions += 1;
    }
    Ok(FlowRun {
        dt,
        integrals,
        collisions,
        tangencies,
    })
}

/// Per-flight displacement components along one billiard-map orbit from a
/// `cos θ`-distributed start; tangential collisions are counted.
pub fn map_displacements(
    table: &BilliardTable,
    n: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let mut rng = rng_from_seed(split_seed(seed, 0));
    let mut c = sample_collision(table, &mut rng);
    let mut dx = Vec::with_capacity(n);
    let mut tau = Vec::with_capacity(n);
    let mut tangencies = 0;
    for _ in 0..n {
        let step = billiard_map(table, &c)?;
        if step.tangency {
            tangencies += 1;
        }
        dx.push(step.displacement[0]);
        tau.push(step.free_time);
        c = step.state;
    }
    Ok((dx, tau, tangencies))
}

/// χ² test of `cos θ dr dθ` invariance: sample `n` states from the measure,
/// apply the map once and bin `(r, sin θ)` on a `bins × bins` grid.
/// Returns `(statistic, p_value)`.
pub fn invariance_chi_squared(
    table: &BilliardTable,
    n: usize,
    bins: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let mut rng = rng_from_seed(seed);
    let mut counts = vec![0usize; bins * bins];
    let mut used = 0usize;
    for _ in 0..n {
        let c = sample_collision(table, &mut rng);
        let step = billiard_map(table, &c)?;
        if step.tangency {
            continue;
        }
        let s = step.state;
        let u = table.global_arclength(&s) / table.perimeter;
        let v = 0.5 * (s.theta.sin() + 1.0);
        let i = ((u * bins as f64) as usize).min(bins - 1);
        let j = ((v * bins as f64) as usize).min(bins - 1);
        counts[i * bins + j] += 1;
        used += 1;
    }
    let expected = used as f64 / (bins * bins) as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dof = (bins * bins - 1) as f64;
    let chi = ChiSquared::new(dof).map_err(|e| Error::Estimation(e.to_string()))?;
    Ok((stat, 1.0 - chi.cdf(stat)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlapping_tables_are_rejected() {
        let bad = BilliardTable::new(vec![
            Scatterer {
                center: [0.5, 0.5],
                radius: 0.4,
            },
            Scatterer {
                center: [0.0, 0.0],
                radius: 0.4,
            },
        ]);
        assert!(matches!(bad, Err(Error::Table(_))));
        assert!(BilliardTable::single_disk(0.5).is_err());
        assert!(BilliardTable::single_disk(-0.1).is_err());
    }

    #[test]
    fn radial_flight() {
        let t = BilliardTable::single_disk(0.3).unwrap();
        let s = FlowState::from_angle([0.1, 0.5], 0.0);
        let imp = next_collision(&t, &s, 10.0).unwrap();
        assert!((imp.free_time - 0.1).abs() < 1e-12);
        assert!((imp.normal[0] + 1.0).abs() < 1e-12);
        let step = t.to_collision(
            imp.scatterer,
            imp.normal,
            reflect(imp.state.direction, imp.normal),
        );
        assert!(step.theta.abs() < 1e-12);
    }

    #[test]
    fn head_on_between_symmetric_disks() {
        // disks of equal radius on the diagonal: a normal bounce towards the
        // other disk returns normally
        let t = BilliardTable::new(vec![
            Scatterer {
                center: [0.25, 0.25],
                radius: 0.1,
            },
            Scatterer {
                center: [0.75, 0.75],
                radius: 0.1,
            },
        ])
        .unwrap();
        let c = CollisionState {
            scatterer: 0,
            r: 0.1 * PI / 4.0,
            theta: 0.0,
        };
        let step = billiard_map(&t, &c).unwrap();
        assert_eq!(step.state.scatterer, 1);
        assert!(step.state.theta.abs() < 1e-12);
        assert!((step.state.r - 0.1 * 5.0 * PI / 4.0).abs() < 1e-12);
        let back = billiard_map(&t, &step.state).unwrap();
        assert_eq!(back.state.scatterer, 0);
    }

    #[test]
    fn flow_reversal() {
        let t = BilliardTable::two_disk();
        let mut rng = rng_from_seed(3);
        for _ in 0..1000 {
            let s = sample_flow_state(&t, &mut rng);
            let imp = next_collision(&t, &s, 100.0).unwrap();
            let d = imp.state.direction;
            let back = FlowState {
                position: imp.state.position,
                direction: [-d[0], -d[1]],
            };
            // flow back for the same time from the impact point
            let end = [
                back.position[0] + imp.free_time * back.direction[0],
                back.position[1] + imp.free_time * back.direction[1],
            ];
            let diff = [
                (end[0] - s.position[0]).rem_euclid(1.0),
                (end[1] - s.position[1]).rem_euclid(1.0),
            ];
            let err = diff.iter().map(|x| x.min(1.0 - x)).fold(0.0, f64::max);
            assert!(err < 1e-9, "{err}");
        }
    }

    #[test]
    fn specular_and_speed() {
        let t = BilliardTable::two_disk();
        let mut rng = rng_from_seed(4);
        let mut c = sample_collision(&t, &mut rng);
        for _ in 0..10_000 {
            let s = billiard_map(&t, &c).unwrap();
            let inc = -dot(s.incoming, s.normal);
            let out = dot(s.outgoing, s.normal);
            assert!((inc - out).abs() < 1e-12);
            let tan_in = -s.normal[1] * s.incoming[0] + s.normal[0] * s.incoming[1];
            let tan_out = -s.normal[1] * s.outgoing[0] + s.normal[0] * s.outgoing[1];
            assert!((tan_in - tan_out).abs() < 1e-12);
            assert!((dot(s.outgoing, s.outgoing).sqrt() - 1.0).abs() < 1e-12);
            c = s.state;
        }
    }

    #[test]
    fn one_step_reversal() {
        let t = BilliardTable::two_disk();
        let mut rng = rng_from_seed(5);
        let mut c = sample_collision(&t, &mut rng);
        for _ in 0..1000 {
            let next = billiard_map(&t, &c).unwrap().state;
            let back = billiard_map(&t, &next.reversed()).unwrap().state.reversed();
            assert_eq!(back.scatterer, c.scatterer);
            assert!((back.r - c.r).abs() < 1e-9 && (back.theta - c.theta).abs() < 1e-9);
            c = next;
        }
    }

    #[test]
    fn corridors() {
        let single = BilliardTable::single_disk(0.3).unwrap();
        let v = finite_horizon_check(
            &single,
            HorizonOptions {
                samples: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(!v.finite);
        let w = v.witness.unwrap();
        assert_eq!(w.direction, (1, 0));
        assert_eq!(w.offset, 0.0);
        assert!((w.clearance() - 0.2).abs() < 1e-12);

        let two = BilliardTable::two_disk();
        for (p, q) in rational_directions(12) {
            assert!(corridor(&two, p, q).is_none(), "({p}, {q})");
        }
    }

    #[test]
    fn mean_free_time_identity() {
        let t = BilliardTable::two_disk();
        // area by midpoint-rule quadrature as a cross-check of the closed form
        let m = 1000;
        let free = (0..m * m)
            .filter(|k| {
                !t.inside_any([
                    ((k % m) as f64 + 0.5) / m as f64,
                    ((k / m) as f64 + 0.5) / m as f64,
                ])
            })
            .count() as f64
            / (m * m) as f64;
        assert!((free - t.free_area()).abs() < 1e-3);
        let (_, tau, _) = map_displacements(&t, 200_000, 1).unwrap();
        let mean = tau.iter().sum::<f64>() / tau.len() as f64;
        assert!(
            (mean / t.mean_free_time() - 1.0).abs() < 0.02,
            "{mean} vs {}",
            t.mean_free_time()
        );
    }

    #[test]
    fn trivial_flow_observables() {
        let t = BilliardTable::two_disk();
        let z = lorentz_flow_observable_run(&t, &LorentzObservable::Zero, 50.0, 0.5, 1).unwrap();
        assert!(z.integrals.iter().all(|&x| x == 0.0));
        let one = lorentz_flow_observable_run(&t, &LorentzObservable::Constant(1.0), 50.0, 0.5, 1)
            .unwrap();
        for (k, &x) in one.integrals.iter().enumerate() {
            assert!((x - (k + 1) as f64 * 0.5).abs() < 1e-9);
        }
        let g = LorentzObservable::General(Arc::new(|_, d| d[0]));
        let a = lorentz_flow_observable_run(&t, &g, 20.0, 1.0, 2).unwrap();
        let b =
            lorentz_flow_observable_run(&t, &LorentzObservable::VelocityX, 20.0, 1.0, 2).unwrap();
        for (x, y) in a.integrals.iter().zip(&b.integrals) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn measure_is_invariant() {
        let t = BilliardTable::two_disk();
        let (_, p) = invariance_chi_squared(&t, 200_000, 20, 7).unwrap();
        assert!(p > 0.01, "{p}");
    }
}
