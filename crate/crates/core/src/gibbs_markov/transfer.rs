//! Discretized transfer operators `(Pv)(x) = Σ_{fy=x} g(y) v(y)`.
//!
//! Two discretizations are provided:
//!
//! * [`TransferDisc::exact_branches`]: function values at the cell centres
//!   of a uniform grid on `[0, 1)`; the operator sums over the exact inverse
//!   branches of the parent map with weights `1/T'`, reading `v` at the
//!   preimages by linear interpolation. The reference measure is Lebesgue.
//! * [`TransferDisc::ulam`]: piecewise-constant functions on a finite cell
//!   partition of the induced base; transition counts along a stationary
//!   orbit give the operator with respect to the invariant measure, so
//!   `P1 = 1` and `∫ Pv·w = ∫ v·(w∘f)` hold for the empirical measure.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::inducing::InducedSystem;
use crate::systems::MapSystem;

#[derive(Debug, Clone)]
struct Tap {
    lo: usize,
    hi: usize,
    frac: f64,
}

#[derive(Debug, Clone)]
enum Kind {
    Exact {
        system: MapSystem,
        /// Per grid point: `(weight, interpolation tap)` per inverse branch.
        preimages: Vec<Vec<(f64, Tap)>>,
        /// Interpolation tap at `T(x_i)`, for `w∘T`.
        forward: Vec<Tap>,
    },
    Ulam {
        /// Sparse counts `N[i][j]` of transitions from cell `i` to cell `j`.
        rows: Vec<Vec<(usize, f64)>>,
        cols: Vec<Vec<(usize, f64)>>,
        row_sums: Vec<f64>,
        col_sums: Vec<f64>,
        total: f64,
    },
}

/// A transfer operator acting on grid or cell values.
#[derive(Debug, Clone)]
pub struct TransferDisc {
    kind: Kind,
    len: usize,
}

fn tap(x: f64, n: usize, periodic: bool) -> Tap {
    // cell centres sit at (i + 1/2)/n
    let u = x * n as f64 - 0.5;
    if periodic {
        let fl = u.floor();
        let frac = u - fl;
        let lo = (fl as i64).rem_euclid(n as i64) as usize;
        Tap {
            lo,
            hi: (lo + 1) % n,
            frac,
        }
    } else {
        let u = u.clamp(0.0, (n - 1) as f64);
        let lo = (u.floor() as usize).min(n - 2);
        Tap {
            lo,
            hi: lo + 1,
            frac: u - lo as f64,
        }
    }
}

#[inline]
fn read(v: &[f64], t: &Tap) -> f64 {
    v[t.lo] * (1.0 - t.frac) + v[t.hi] * t.frac
}

impl TransferDisc {
    /// Exact-branch operator of `system` on `n` uniform cells of `[0, 1)`.
    pub fn exact_branches(system: &MapSystem, n: usize) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::Parameter(format!(
                "grid size must be even and at least 4, got {n}"
            )));
        }
        let periodic = system.is_circle();
        let mut preimages = Vec::with_capacity(n);
        let mut forward = Vec::with_capacity(n);
        for i in 0..n {
            let x = (i as f64 + 0.5) / n as f64;
            let pre = (0..system.branch_count())
                .map(|b| {
                    let y = system.inverse_branch(b, x);
                    (1.0 / system.derivative(y), tap(y, n, periodic))
                })
                .collect();
            preimages.push(pre);
            forward.push(tap(system.apply(x), n, periodic));
        }
        Ok(Self {
            kind: Kind::Exact {
                system: *system,
                preimages,
                forward,
            },
            len: n,
        })
    }

    /// Ulam operator on `cells` cells from a stationary orbit of the induced
    /// map. `cell_of` assigns a base point to a cell in `0..cells`.
    pub fn ulam<F>(
        induced: &InducedSystem,
        cells: usize,
        cell_of: F,
        transitions: usize,
        seed: u64,
    ) -> Result<Self>
    where
        F: Fn(f64) -> usize,
    {
        if cells == 0 {
            return Err(Error::Parameter(
                "Ulam operator needs at least one cell".into(),
            ));
        }
        let mut counts: HashMap<(usize, usize), f64> = HashMap::new();
        let mut prev: Option<usize> = None;
        for e in induced.excursions(seed).take(transitions + 1) {
            let c = cell_of(e?.base_point);
            if c >= cells {
                return Err(Error::Parameter(format!("cell index {c} out of range")));
            }
            if let Some(p) = prev {
                *counts.entry((p, c)).or_insert(0.0) += 1.0;
            }
            prev = Some(c);
        }
        let mut rows = vec![Vec::new(); cells];
        let mut cols = vec![Vec::new(); cells];
        let mut row_sums = vec![0.0; cells];
        let mut col_sums = vec![0.0; cells];
        let mut entries: Vec<_> = counts.into_iter().collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        for ((i, j), c) in entries {
            rows[i].push((j, c));
            cols[j].push((i, c));
            row_sums[i] += c;
            col_sums[j] += c;
        }
        Ok(Self {
            kind: Kind::Ulam {
                rows,
                cols,
                row_sums,
                col_sums,
                total: transitions as f64,
            },
            len: cells,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Grid abscissae (cell centres) for the exact-branch operator.
    pub fn grid(&self) -> Option<Vec<f64>> {
        match &self.kind {
            Kind::Exact { .. } => Some(
                (0..self.len)
                    .map(|i| (i as f64 + 0.5) / self.len as f64)
                    .collect(),
            ),
            Kind::Ulam { .. } => None,
        }
    }

    pub fn system(&self) -> Option<&MapSystem> {
        match &self.kind {
            Kind::Exact { system, .. } => Some(system),
            Kind::Ulam { .. } => None,
        }
    }

    /// Reference-measure weight of each grid value.
    pub fn weights(&self) -> Vec<f64> {
        match &self.kind {
            Kind::Exact { .. } => vec![1.0 / self.len as f64; self.len],
            Kind::Ulam {
                col_sums, total, ..
            } => col_sums.iter().map(|c| c / total).collect(),
        }
    }

    /// `∫ v dm` for grid values `v`.
    pub fn integrate(&self, v: &[f64]) -> f64 {
        self.weights().iter().zip(v).map(|(w, x)| w * x).sum()
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.len {
            return Err(Error::Parameter(format!(
                "expected {} grid values, got {}",
                self.len,
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("grid values must be finite".into()));
        }
        Ok(())
    }

    /// `Pv`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v)?;
        Ok(match &self.kind {
            Kind::Exact { preimages, .. } => preimages
                .iter()
                .map(|pre| pre.iter().map(|(g, t)| g * read(v, t)).sum())
                .collect(),
            Kind::Ulam { cols, col_sums, .. } => cols
                .iter()
                .zip(col_sums)
                .map(|(col, &s)| {
                    if s == 0.0 {
                        0.0
                    } else {
                        col.iter().map(|&(i, c)| c * v[i]).sum::<f64>() / s
                    }
                })
                .collect(),
        })
    }

    /// `P^n v`.
    pub fn apply_n(&self, v: &[f64], n: usize) -> Result<Vec<f64>> {
        let mut out = v.to_vec();
        for _ in 0..n {
            out = self.apply(&out)?;
        }
        Ok(out)
    }

    /// Koopman operator `w ↦ w∘f` (conditional expectation for Ulam cells).
    pub fn compose_with_map(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.check(w)?;
        Ok(match &self.kind {
            Kind::Exact { forward, .. } => forward.iter().map(|t| read(w, t)).collect(),
            Kind::Ulam { rows, row_sums, .. } => rows
                .iter()
                .zip(row_sums)
                .map(|(row, &s)| {
                    if s == 0.0 {
                        0.0
                    } else {
                        row.iter().map(|&(j, c)| c * w[j]).sum::<f64>() / s
                    }
                })
                .collect(),
        })
    }

    /// Value of grid function `v` at an arbitrary point (exact-branch grids).
    pub fn interpolate(&self, v: &[f64], x: f64) -> Option<f64> {
        match &self.kind {
            Kind::Exact { system, .. } => Some(read(v, &tap(x, self.len, system.is_circle()))),
            Kind::Ulam { .. } => None,
        }
    }
}

/// Grid sup norm.
pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs_markov::cylinders::{CylinderTree, TreeOptions};
    use crate::rng::rng_from_seed;
    use rand::Rng;
    use std::f64::consts::PI;

    fn sample_on(grid: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
        grid.iter().map(|&x| f(x)).collect()
    }

    /// Random trigonometric polynomial of degree ≤ 4.
    fn random_trig(seed: u64) -> impl Fn(f64) -> f64 {
        let mut rng = rng_from_seed(seed);
        let coef: Vec<(f64, f64)> = (0..5)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        move |x| {
            coef.iter()
                .enumerate()
                .map(|(k, (a, b))| {
                    a * (2.0 * PI * k as f64 * x).cos() + b * (2.0 * PI * k as f64 * x).sin()
                })
                .sum()
        }
    }

    #[test]
    fn doubling_preserves_constants() {
        let p = TransferDisc::exact_branches(&MapSystem::doubling(), 1024).unwrap();
        let one = vec![1.0; 1024];
        for y in p.apply(&one).unwrap() {
            assert!((y - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn doubling_kills_first_harmonic() {
        let p = TransferDisc::exact_branches(&MapSystem::doubling(), 4096).unwrap();
        let grid = p.grid().unwrap();
        let v = sample_on(&grid, |x| (2.0 * PI * x).cos());
        assert!(sup_norm(&p.apply(&v).unwrap()) < 1e-12);
    }

    #[test]
    fn integral_is_preserved_for_random_functions() {
        let p = TransferDisc::exact_branches(&MapSystem::doubling(), 4096).unwrap();
        let grid = p.grid().unwrap();
        for seed in 0..10 {
            let v = sample_on(&grid, random_trig(seed));
            let pv = p.apply(&v).unwrap();
            assert!((p.integrate(&pv) - p.integrate(&v)).abs() <= 1e-6);
        }
        // arbitrary grid vectors as well
        let mut rng = rng_from_seed(99);
        let v: Vec<f64> = (0..4096).map(|_| rng.gen_range(-1.0..1.0)).collect();
        assert!((p.integrate(&p.apply(&v).unwrap()) - p.integrate(&v)).abs() <= 1e-12);
    }

    #[test]
    fn duality_for_random_pairs() {
        let p = TransferDisc::exact_branches(&MapSystem::doubling(), 4096).unwrap();
        let grid = p.grid().unwrap();
        for seed in 0..10 {
            let v = sample_on(&grid, random_trig(2 * seed));
            let w = sample_on(&grid, random_trig(2 * seed + 1));
            let lhs = p.integrate(
                &p.apply(&v)
                    .unwrap()
                    .iter()
                    .zip(&w)
                    .map(|(a, b)| a * b)
                    .collect::<Vec<_>>(),
            );
            let wf = p.compose_with_map(&w).unwrap();
            let rhs = p.integrate(&v.iter().zip(&wf).map(|(a, b)| a * b).collect::<Vec<_>>());
            assert!((lhs - rhs).abs() < 1e-4, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn positivity() {
        for sys in [MapSystem::doubling(), MapSystem::lsv(0.25).unwrap()] {
            let p = TransferDisc::exact_branches(&sys, 512).unwrap();
            let mut rng = rng_from_seed(5);
            let v: Vec<f64> = (0..512).map(|_| rng.gen_range(0.0..1.0)).collect();
            assert!(p.apply(&v).unwrap().iter().all(|&y| y >= 0.0));
        }
    }

    #[test]
    fn lsv_density_converges() {
        // P^n 1 approaches the invariant density, which blows up at 0
        let sys = MapSystem::lsv(0.25).unwrap();
        let p = TransferDisc::exact_branches(&sys, 2048).unwrap();
        let h = p.apply_n(&vec![1.0; 2048], 200).unwrap();
        // interpolation near the singular density at 0 leaks a little mass
        assert!((p.integrate(&h) - 1.0).abs() < 5e-3);
        assert!(h[0] > h[1000] && h[1000] > h[2047]);
    }

    fn lsv_ulam(depth: usize) -> (CylinderTree, TransferDisc) {
        let ind = InducedSystem::on_default_base(MapSystem::lsv(0.25).unwrap());
        let tree = CylinderTree::build(
            &ind,
            depth,
            0.5,
            TreeOptions {
                samples: 20_000,
                seed: 4,
            },
        )
        .unwrap();
        let cyl = tree.level(depth).to_vec();
        let cells = cyl.len() + 1;
        let locate = move |x: f64| cyl.iter().position(|c| c.contains(x)).unwrap_or(cyl.len());
        let p = TransferDisc::ulam(&ind, cells, locate, 200_000, 8).unwrap();
        (tree, p)
    }

    #[test]
    fn ulam_is_stochastic_and_dual() {
        let (_, p) = lsv_ulam(1);
        let n = p.len();
        let one = vec![1.0; n];
        for (y, w) in p.apply(&one).unwrap().iter().zip(p.weights()) {
            if w > 0.0 {
                assert!((y - 1.0).abs() < 1e-12);
            }
        }
        let mut rng = rng_from_seed(1);
        for _ in 0..10 {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let pv = p.apply(&v).unwrap();
            let lhs = p.integrate(&pv.iter().zip(&w).map(|(a, b)| a * b).collect::<Vec<_>>());
            let wf = p.compose_with_map(&w).unwrap();
            let rhs = p.integrate(&v.iter().zip(&wf).map(|(a, b)| a * b).collect::<Vec<_>>());
            assert!((lhs - rhs).abs() < 1e-4, "{lhs} {rhs}");
            assert!((p.integrate(&pv) - p.integrate(&v)).abs() < 1e-4);
        }
    }

    #[test]
    fn iterates_stay_bounded_and_flatten() {
        // doubling: grid sup norm and grid Lipschitz constant of P^n v stay
        // bounded, and P^n v tends to the constant ∫ v
        let p = TransferDisc::exact_branches(&MapSystem::doubling(), 2048).unwrap();
        let grid = p.grid().unwrap();
        let v = sample_on(&grid, |x| {
            (2.0 * PI * x).sin().powi(2) + (6.0 * PI * x).sin()
        });
        let mean = p.integrate(&v);
        let lip = |u: &[f64]| {
            u.windows(2)
                .map(|w| (w[1] - w[0]).abs() * 2048.0)
                .fold(0.0, f64::max)
        };
        let mut u = v.clone();
        let bound = sup_norm(&v) + lip(&v);
        let mut last_dev = f64::INFINITY;
        for n in 1..=12 {
            u = p.apply(&u).unwrap();
            assert!(sup_norm(&u) + lip(&u) <= bound * 1.001, "blow-up at n={n}");
            let dev = sup_norm(&u.iter().map(|x| x - mean).collect::<Vec<_>>());
            assert!(dev <= last_dev * 1.001);
            last_dev = dev;
        }
        assert!(last_dev < 1e-3, "{last_dev}");

        // induced lsv through the Ulam operator
        let (_, q) = lsv_ulam(1);
        let mut rng = rng_from_seed(2);
        let v: Vec<f64> = (0..q.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean = q.integrate(&v);
        let u = q.apply_n(&v, 30).unwrap();
        let dev = u
            .iter()
            .zip(q.weights())
            .filter(|(_, w)| *w > 0.0)
            .map(|(x, _)| (x - mean).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-3, "{dev}");
    }

    #[test]
    fn rejects_bad_input() {
        let p = TransferDisc::exact_branches(&MapSystem::doubling(), 64).unwrap();
        assert!(p.apply(&[1.0; 3]).is_err());
        assert!(p.apply(&[f64::NAN; 64]).is_err());
        assert!(TransferDisc::exact_branches(&MapSystem::doubling(), 7).is_err());
    }
}
