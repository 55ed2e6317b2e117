//! Empirical checks of the oscillation and mixing conditions used for the
//! almost sure invariance principle on the induced base.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs_markov::cylinders::{separation, Cylinder, CylinderTree};
use crate::inducing::MomentReport;
use crate::numeric::{batched_mean, fit_line, gauss_legendre};
use crate::rng::rng_from_seed;
use crate::systems::Observable;

/// Safety factor applied to sampled Lipschitz ratios.
pub const SEMINORM_SAFETY: f64 = 1.2;

/// Lipschitz constants of an observable in `d_β`, estimated from sampled
/// same-cylinder pairs at the deepest tree level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaSeminorm {
    /// `sup |v(x) − v(y)| / d_β(x, y)`.
    pub plain: f64,
    /// The same ratio divided by the return time of the first piece.
    pub weighted: f64,
    pub pairs: usize,
}

pub fn beta_seminorm(
    tree: &CylinderTree,
    v: &Observable,
    pairs: usize,
    seed: u64,
) -> Result<BetaSeminorm> {
    let k = tree.depth();
    let cells = tree.sample_cells(k);
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); tree.level(k).len()];
    for (&x, &c) in tree.samples().iter().zip(cells) {
        members[c].push(x);
    }
    let mut rng = rng_from_seed(seed);
    let (mut plain, mut weighted) = (0.0f64, 0.0f64);
    let mut done = 0;
    let n = tree.samples().len();
    for _ in 0..pairs {
        let pts = &members[cells[rng.gen_range(0..n)]];
        if pts.len() < 2 {
            continue;
        }
        let a = pts[rng.gen_range(0..pts.len())];
        let b = pts[rng.gen_range(0..pts.len())];
        if a == b {
            continue;
        }
        let (_, d) = separation(tree.induced(), a, b, k + 32, tree.beta())?;
        let ratio = (v.eval(a) - v.eval(b)).abs() / d;
        let r = tree.induced().return_time(a)? as f64;
        plain = plain.max(ratio);
        weighted = weighted.max(ratio / r);
        done += 1;
    }
    Ok(BetaSeminorm {
        plain: SEMINORM_SAFETY * plain,
        weighted: SEMINORM_SAFETY * weighted,
        pairs: done,
    })
}

/// Lebesgue average of `f` over a cylinder, four Gauss–Legendre panels.
fn cell_average(c: &Cylinder, f: impl Fn(f64) -> f64) -> f64 {
    let h = c.length() / 4.0;
    (0..4)
        .map(|i| {
            let a = c.lo + i as f64 * h;
            gauss_legendre(&f, a, a + h)
        })
        .sum::<f64>()
        / c.length()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillationRow {
    pub depth: usize,
    pub sum: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationReport {
    pub delta: f64,
    pub rows: Vec<OscillationRow>,
    /// Slope of `log(sum)` against depth; `None` when a sum vanishes.
    pub log_slope: Option<f64>,
    /// `(2 + δ) log β`, the geometric rate of the bound.
    pub bound_slope: f64,
    pub seminorm: BetaSeminorm,
    pub return_norm: f64,
}

impl OscillationReport {
    pub fn within_bound(&self) -> bool {
        self.rows.iter().all(|r| r.sum <= r.bound)
    }
}

/// Per-depth sums `Σ_a ∫_a |v − v̄_a|^{2+δ} dm` with the bound
/// `(‖v‖_β |R|_{2+δ} β^k)^{2+δ}`.
pub fn ps_oscillation(
    tree: &CylinderTree,
    v: &Observable,
    delta: f64,
    return_moment: &MomentReport,
    seed: u64,
) -> Result<OscillationReport> {
    if !(delta > 0.0) {
        return Err(Error::Parameter(format!(
            "delta must be positive, got {delta}"
        )));
    }
    if !return_moment.finite {
        return Err(Error::InfiniteMoment(format!(
            "return time has no finite moment of order {}",
            return_moment.p
        )));
    }
    if (return_moment.p - (2.0 + delta)).abs() > 1e-9 {
        return Err(Error::Parameter(format!(
            "return moment has order {}, expected {}",
            return_moment.p,
            2.0 + delta
        )));
    }
    let q = 2.0 + delta;
    let seminorm = beta_seminorm(tree, v, 100_000, seed)?;
    let beta = tree.beta();
    let mut rows = Vec::with_capacity(tree.depth());
    for k in 1..=tree.depth() {
        let sum: f64 = tree
            .level(k)
            .iter()
            .map(|c| {
                let mean = cell_average(c, |x| v.eval(x));
                c.best_measure() * cell_average(c, |x| (v.eval(x) - mean).abs().powf(q))
            })
            .sum();
        let bound = (seminorm.weighted * return_moment.norm * beta.powi(k as i32)).powf(q);
        rows.push(OscillationRow {
            depth: k,
            sum,
            bound,
        });
    }
    let log_slope = if rows.len() >= 2 && rows.iter().all(|r| r.sum > 0.0) {
        let x: Vec<f64> = rows.iter().map(|r| r.depth as f64).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.sum.ln()).collect();
        Some(fit_line(&x, &y)?.slope)
    } else {
        None
    };
    Ok(OscillationReport {
        delta,
        rows,
        log_slope,
        bound_slope: q * beta.ln(),
        seminorm,
        return_norm: return_moment.norm,
    })
}

/// Worst margin of `sup_a |v| ≤ mean_a |v| + β^k |v|_β` over the depth-`k`
/// cylinders; nonnegative when the inequality holds everywhere.
pub fn basic_sup_check(
    tree: &CylinderTree,
    v: &Observable,
    k: usize,
    seminorm: &BetaSeminorm,
) -> f64 {
    let slack = tree.beta().powi(k as i32) * seminorm.plain;
    let cells = tree.sample_cells(k);
    let mut sup = vec![0.0f64; tree.level(k).len()];
    for (&x, &c) in tree.samples().iter().zip(cells) {
        sup[c] = sup[c].max(v.eval(x).abs());
    }
    tree.level(k)
        .iter()
        .zip(&sup)
        .map(|(c, &s)| cell_average(c, |x| v.eval(x).abs()) + slack - s)
        .fold(f64::INFINITY, f64::min)
}

/// A finite union of intervals of `Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet(pub Vec<(f64, f64)>);

impl IntervalSet {
    pub fn contains(&self, x: f64) -> bool {
        self.0.iter().any(|&(a, b)| a <= x && x < b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingEstimate {
    pub gap: usize,
    /// `m(a ∩ f^{-(N+k)} b) − m(a) m(b)`.
    pub difference: f64,
    pub standard_error: f64,
    pub measure_a: f64,
    pub measure_b: f64,
}

/// Monte Carlo estimate of the mixing defect between a depth-`k` cylinder
/// and a set `b`, at gap `N`, along one stationary `f`-orbit of length `n`.
pub fn ps_mixing(
    tree: &CylinderTree,
    a: &Cylinder,
    b: &IntervalSet,
    gap: usize,
    n: usize,
    seed: u64,
) -> Result<MixingEstimate> {
    if n < 1000 {
        return Err(Error::InsufficientData {
            needed: 1000,
            got: n,
        });
    }
    let lag = gap + a.depth();
    let induced = tree.induced();
    let mut in_a = Vec::with_capacity(n);
    let mut in_b = Vec::with_capacity(n);
    for e in induced.excursions(seed).take(n + lag) {
        let x = e?.base_point;
        in_a.push(a.contains(x));
        in_b.push(b.contains(x));
    }
    let pa = in_a[..n].iter().filter(|&&t| t).count() as f64 / n as f64;
    let pb = in_b[lag..].iter().filter(|&&t| t).count() as f64 / n as f64;
    let joint: Vec<f64> = (0..n)
        .map(|i| if in_a[i] && in_b[i + lag] { 1.0 } else { 0.0 })
        .collect();
    let (pj, se) = batched_mean(&joint, 50);
    Ok(MixingEstimate {
        gap,
        difference: pj - pa * pb,
        standard_error: se,
        measure_a: pa,
        measure_b: pb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs_markov::cylinders::TreeOptions;
    use crate::inducing::{as_f64, moment_norm, sample_returns, InducedSystem};
    use crate::systems::MapSystem;

    fn doubling_tree(depth: usize) -> CylinderTree {
        let ind = InducedSystem::on_default_base(MapSystem::doubling());
        CylinderTree::build(
            &ind,
            depth,
            0.5,
            TreeOptions {
                samples: 50_000,
                seed: 9,
            },
        )
        .unwrap()
    }

    fn return_moment(p: f64) -> MomentReport {
        let ind = InducedSystem::on_default_base(MapSystem::doubling());
        moment_norm(&as_f64(&sample_returns(&ind, 100_000, 4).unwrap()), p).unwrap()
    }

    #[test]
    fn constant_has_no_oscillation() {
        let tree = doubling_tree(3);
        let r = ps_oscillation(
            &tree,
            &Observable::constant(1.5),
            0.5,
            &return_moment(2.5),
            1,
        )
        .unwrap();
        assert!(r.rows.iter().all(|row| row.sum < 1e-30));
    }

    #[test]
    fn doubling_sums_below_bound() {
        let tree = doubling_tree(6);
        let r =
            ps_oscillation(&tree, &Observable::identity(), 0.5, &return_moment(2.5), 1).unwrap();
        assert!(r.within_bound(), "{r:?}");
        assert!(r.log_slope.unwrap() <= r.bound_slope + 0.05);
    }

    #[test]
    fn infinite_moment_is_a_precondition_error() {
        let tree = doubling_tree(2);
        let mut m = return_moment(2.5);
        m.finite = false;
        assert!(matches!(
            ps_oscillation(&tree, &Observable::identity(), 0.5, &m, 1),
            Err(Error::InfiniteMoment(_))
        ));
    }

    #[test]
    fn sup_bounded_by_mean_plus_oscillation() {
        let tree = doubling_tree(4);
        let v = Observable::cos_2pi(1);
        let s = beta_seminorm(&tree, &v, 20_000, 3).unwrap();
        for k in 1..=4 {
            assert!(basic_sup_check(&tree, &v, k, &s) >= 0.0);
        }
    }

    #[test]
    fn doubling_dyadic_sets_are_independent() {
        let tree = doubling_tree(2);
        let a = tree.find(&[1, 2]).unwrap().clone();
        let full = IntervalSet(vec![(0.5, 1.0)]);
        let m = ps_mixing(&tree, &a, &full, 1, 200_000, 5).unwrap();
        assert!(m.difference.abs() < 1e-12);
        let dyadic = IntervalSet(vec![(0.5, 0.625), (0.75, 0.875)]);
        for gap in 1..4 {
            let m = ps_mixing(&tree, &a, &dyadic, gap, 200_000, 6 + gap as u64).unwrap();
            assert!(m.difference.abs() <= 3.5 * m.standard_error, "{m:?}");
        }
    }
}
