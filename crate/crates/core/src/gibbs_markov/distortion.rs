//! Empirical bounded-distortion constant of the induced map.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs_markov::cylinders::{separation, CylinderTree};
use crate::rng::rng_from_seed;

/// Cylinders with fewer samples than this are left out of the measure ratio.
pub const MIN_CYLINDER_COUNT: usize = 30;
/// Cap on the separation time used when measuring `d_β` of image points.
pub const SEPARATION_CAP: usize = 48;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub depth: usize,
    /// Max of `|g_k(x)/g_k(y) − 1| / d_β(f^k x, f^k y)` over sampled pairs.
    pub pair_constant: f64,
    /// Range of `m(a)/g_k(x)` over sampled cylinders and points.
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// `max(pair_constant, ratio_max, 1/ratio_min)`.
    pub d_hat: f64,
    pub pairs: usize,
    pub cylinders: usize,
}

/// `g_k(x) = 1/(f^k)'(x)` and `f^k x`.
fn jacobian(tree: &CylinderTree, x: f64, k: usize) -> Result<(f64, f64)> {
    let mut d = 1.0;
    let mut y = x;
    for _ in 0..k {
        let (dy, _, fy) = tree.induced().induced_derivative(y)?;
        d *= dy;
        y = fy;
    }
    Ok((1.0 / d, y))
}

/// Estimate the distortion constant `D` at depth `k` from `pairs` random
/// same-cylinder sample pairs.
pub fn check_distortion(
    tree: &CylinderTree,
    k: usize,
    pairs: usize,
    seed: u64,
) -> Result<DistortionReport> {
    if tree.depth() < 2 {
        return Err(Error::Parameter(
            "distortion check needs tree depth at least 2".into(),
        ));
    }
    if k < 1 || k > tree.depth() {
        return Err(Error::Parameter(format!(
            "depth {k} outside 1..={}",
            tree.depth()
        )));
    }
    let cylinders = tree.level(k);
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); cylinders.len()];
    for (&x, &c) in tree.samples().iter().zip(tree.sample_cells(k)) {
        members[c].push(x);
    }
    // base length rescales Lebesgue to the normalized reference measure
    let exact = cylinders.iter().all(|c| c.exact_measure.is_some());

    let mut ratio_min = f64::INFINITY;
    let mut ratio_max = 0.0f64;
    let mut used = 0;
    for (c, pts) in cylinders.iter().zip(&members) {
        if !exact && c.count < MIN_CYLINDER_COUNT {
            continue;
        }
        used += 1;
        for &x in pts.iter().take(8) {
            let (g, _) = jacobian(tree, x, k)?;
            let r = c.best_measure() / g;
            ratio_min = ratio_min.min(r);
            ratio_max = ratio_max.max(r);
        }
    }

    let eligible: Vec<usize> = (0..cylinders.len())
        .filter(|&i| members[i].len() >= 2)
        .collect();
    let mut rng = rng_from_seed(seed);
    let mut pair_constant = 0.0f64;
    let mut done = 0;
    if !eligible.is_empty() {
        for _ in 0..pairs {
            // pick a cylinder in proportion to its sample count via a random sample
            let i = tree.sample_cells(k)[rng.gen_range(0..tree.samples().len())];
            let pts = &members[i];
            if pts.len() < 2 {
                continue;
            }
            let a = pts[rng.gen_range(0..pts.len())];
            let b = pts[rng.gen_range(0..pts.len())];
            if a == b {
                continue;
            }
            let (ga, fa) = jacobian(tree, a, k)?;
            let (gb, fb) = jacobian(tree, b, k)?;
            let (_, d) = separation(tree.induced(), fa, fb, SEPARATION_CAP, tree.beta())?;
            pair_constant = pair_constant.max((ga / gb - 1.0).abs() / d);
            done += 1;
        }
    }
    let d_hat = pair_constant.max(ratio_max).max(1.0 / ratio_min);
    Ok(DistortionReport {
        depth: k,
        pair_constant,
        ratio_min,
        ratio_max,
        d_hat,
        pairs: done,
        cylinders: used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs_markov::cylinders::TreeOptions;
    use crate::inducing::InducedSystem;
    use crate::systems::MapSystem;

    #[test]
    fn doubling_has_no_distortion() {
        let ind = InducedSystem::on_default_base(MapSystem::doubling());
        let tree = CylinderTree::build(
            &ind,
            3,
            0.5,
            TreeOptions {
                samples: 20_000,
                seed: 1,
            },
        )
        .unwrap();
        for k in 1..=3 {
            let r = check_distortion(&tree, k, 2000, 2).unwrap();
            assert!(r.pair_constant < 1e-9, "{r:?}");
            assert!((r.d_hat - 1.0).abs() < 1e-9, "{r:?}");
        }
    }

    #[test]
    fn lsv_ratios_are_bracketed() {
        let ind = InducedSystem::on_default_base(MapSystem::lsv(0.25).unwrap());
        let tree = CylinderTree::build(
            &ind,
            2,
            0.5,
            TreeOptions {
                samples: 50_000,
                seed: 1,
            },
        )
        .unwrap();
        let r = check_distortion(&tree, 2, 2000, 2).unwrap();
        assert!(r.d_hat.is_finite() && r.d_hat >= 1.0);
        assert!(r.ratio_min >= 1.0 / r.d_hat && r.ratio_max <= r.d_hat);
    }

    #[test]
    fn shallow_trees_are_rejected() {
        let ind = InducedSystem::on_default_base(MapSystem::doubling());
        let tree = CylinderTree::build(
            &ind,
            1,
            0.5,
            TreeOptions {
                samples: 1000,
                seed: 1,
            },
        )
        .unwrap();
        assert!(check_distortion(&tree, 1, 10, 1).is_err());
    }
}
