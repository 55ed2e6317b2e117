//! Nested cylinder partitions of the induced base and the symbolic metric.

use std::collections::HashMap;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::inducing::InducedSystem;
use crate::rng::rng_from_seed;
use crate::systems::SystemKind;

/// One cylinder `[a_0, …, a_{k-1}] = ∩ f^{-i} Y_{a_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cylinder {
    pub word: Vec<u64>,
    pub lo: f64,
    pub hi: f64,
    /// Empirical measure (fraction of sampled base points), normalized on `Y`.
    pub measure: f64,
    pub measure_se: f64,
    /// Normalized Lebesgue length, when Lebesgue measure is invariant.
    pub exact_measure: Option<f64>,
    pub representative: f64,
    pub count: usize,
}

impl Cylinder {
    pub fn depth(&self) -> usize {
        self.word.len()
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    /// Exact measure when available, else the empirical one.
    pub fn best_measure(&self) -> f64 {
        self.exact_measure.unwrap_or(self.measure)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x < self.hi
    }
}

/// Sampling options for [`CylinderTree::build`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeOptions {
    pub samples: usize,
    pub seed: u64,
}

impl Default for TreeOptions {
    fn default() -> Self {
        Self {
            samples: 100_000,
            seed: 0,
        }
    }
}

/// Cylinders of depth `1..=depth` carrying positive observed measure.
#[derive(Debug, Clone)]
pub struct CylinderTree {
    induced: InducedSystem,
    depth: usize,
    beta: f64,
    /// `levels[k - 1]` holds the depth-`k` cylinders, sorted by word.
    levels: Vec<Vec<Cylinder>>,
    index: Vec<HashMap<Vec<u64>, usize>>,
    /// Sampled base points (distributed by the invariant measure on `Y`).
    samples: Vec<f64>,
    /// `sample_cells[k - 1][i]` is the depth-`k` cylinder index of sample `i`.
    sample_cells: Vec<Vec<usize>>,
    skipped: usize,
}

/// Points of `Y` distributed by the invariant measure of `f`.
///
/// When the parent preserves Lebesgue measure (doubling) the points are
/// i.i.d. uniform on `Y`. Otherwise they are base points of a stationary
/// orbit, keeping every fourth excursion.
pub fn sample_base_points(induced: &InducedSystem, n: usize, seed: u64) -> Result<Vec<f64>> {
    let (lo, hi) = induced.base_set();
    if induced.parent().kind() == SystemKind::Doubling {
        let mut rng = rng_from_seed(seed);
        return Ok((0..n).map(|_| rng.gen_range(lo..hi)).collect());
    }
    let mut out = Vec::with_capacity(n);
    for (i, e) in induced.excursions(seed).enumerate() {
        if out.len() == n {
            break;
        }
        let e = e?;
        if i % 4 == 0 {
            out.push(e.base_point);
        }
    }
    Ok(out)
}

impl CylinderTree {
    pub fn build(
        induced: &InducedSystem,
        depth: usize,
        beta: f64,
        opts: TreeOptions,
    ) -> Result<Self> {
        if depth < 1 {
            return Err(Error::Parameter("cylinder depth must be at least 1".into()));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Parameter(format!(
                "beta must lie in (0, 1), got {beta}"
            )));
        }
        let points = sample_base_points(induced, opts.samples, opts.seed)?;
        let mut samples = Vec::with_capacity(points.len());
        let mut words = Vec::with_capacity(points.len());
        let mut skipped = 0usize;
        for &x in &points {
            match induced.cylinder_word(x, depth) {
                Ok(w) => {
                    samples.push(x);
                    words.push(w);
                }
                // orbits that fall onto a fixed point in floating point
                Err(Error::NonReturn { .. }) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
        if samples.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        let m = samples.len();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| words[i].cmp(&words[j]));

        let exact = induced.parent().kind() == SystemKind::Doubling;
        let base_len = induced.base_length();
        let mut levels = Vec::with_capacity(depth);
        let mut index = Vec::with_capacity(depth);
        let mut sample_cells = Vec::with_capacity(depth);
        for k in 1..=depth {
            let mut cylinders: Vec<Cylinder> = Vec::new();
            let mut map = HashMap::new();
            let mut cells = vec![0usize; m];
            let mut start = 0;
            while start < m {
                let prefix = &words[order[start]][..k];
                let mut end = start + 1;
                while end < m && &words[order[end]][..k] == prefix {
                    end += 1;
                }
                let count = end - start;
                let (lo, hi) = cylinder_interval(induced, prefix, samples[order[start]])?;
                let p = count as f64 / m as f64;
                let id = cylinders.len();
                for &i in &order[start..end] {
                    cells[i] = id;
                }
                map.insert(prefix.to_vec(), id);
                cylinders.push(Cylinder {
                    word: prefix.to_vec(),
                    lo,
                    hi,
                    measure: p,
                    measure_se: (p * (1.0 - p) / m as f64).sqrt(),
                    exact_measure: exact.then(|| (hi - lo) / base_len),
                    representative: 0.5 * (lo + hi),
                    count,
                });
                start = end;
            }
            levels.push(cylinders);
            index.push(map);
            sample_cells.push(cells);
        }
        Ok(Self {
            induced: *induced,
            depth,
            beta,
            levels,
            index,
            samples,
            sample_cells,
            skipped,
        })
    }

    pub fn induced(&self) -> &InducedSystem {
        &self.induced
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Depth-`k` cylinders, `1 ≤ k ≤ depth`.
    pub fn level(&self, k: usize) -> &[Cylinder] {
        &self.levels[k - 1]
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Depth-`k` cylinder index of every sample.
    pub fn sample_cells(&self, k: usize) -> &[usize] {
        &self.sample_cells[k - 1]
    }

    /// Samples discarded because their orbit did not return.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn find(&self, word: &[u64]) -> Option<&Cylinder> {
        let k = word.len();
        if k == 0 || k > self.depth {
            return None;
        }
        self.index[k - 1].get(word).map(|&i| &self.levels[k - 1][i])
    }

    /// Depth-`k` cylinder containing `x`, if it was observed.
    pub fn locate(&self, x: f64, k: usize) -> Result<Option<&Cylinder>> {
        let w = self.induced.cylinder_word(x, k)?;
        Ok(self.find(&w))
    }
}

/// Interval occupied by the cylinder with word `word` (containing `seed_point`).
fn cylinder_interval(induced: &InducedSystem, word: &[u64], seed_point: f64) -> Result<(f64, f64)> {
    if induced.labels_are_return_times() {
        let (mut lo, mut hi) = induced.base_set();
        for &label in word.iter().rev() {
            lo = induced
                .inverse_piece(label, lo)
                .expect("return-time labels");
            hi = induced
                .inverse_piece(label, hi)
                .expect("return-time labels");
        }
        if !(lo <= seed_point && seed_point < hi) {
            return Err(Error::Geometry(format!(
                "cylinder {word:?} computed as [{lo}, {hi}) misses its sample {seed_point}"
            )));
        }
        return Ok((lo, hi));
    }
    bisect_interval(induced, word, seed_point)
}

/// Locate the cylinder endpoints by bisection on branch words, assuming the
/// cylinder is an interval containing `x`.
fn bisect_interval(induced: &InducedSystem, word: &[u64], x: f64) -> Result<(f64, f64)> {
    let k = word.len();
    let inside = |p: f64| -> bool {
        induced
            .cylinder_word(p, k)
            .map(|w| w == word)
            .unwrap_or(false)
    };
    if !inside(x) {
        return Err(Error::Geometry(format!(
            "point {x} is not in cylinder {word:?}"
        )));
    }
    let (blo, bhi) = induced.base_set();
    let edge = |mut a: f64, mut b: f64| -> f64 {
        // a inside, b outside (or the base end)
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            if m == a || m == b {
                break;
            }
            if inside(m) {
                a = m;
            } else {
                b = m;
            }
        }
        a
    };
    let lo = if inside(blo) { blo } else { edge(x, blo) };
    let hi = if inside(bhi - f64::EPSILON) {
        bhi
    } else {
        edge(x, bhi)
    };
    if !(lo <= x && x <= hi) {
        return Err(Error::Geometry(format!(
            "failed to bracket cylinder {word:?}"
        )));
    }
    Ok((lo, hi))
}

/// Separation time `s(x, y)` (capped at `cap`) and `d_β = β^s`.
pub fn separation(
    induced: &InducedSystem,
    x: f64,
    y: f64,
    cap: usize,
    beta: f64,
) -> Result<(usize, f64)> {
    let (mut a, mut b) = (x, y);
    let mut s = 0;
    while s < cap {
        let (la, fa) = induced.label_and_image(a)?;
        let (lb, fb) = induced.label_and_image(b)?;
        if la != lb {
            break;
        }
        s += 1;
        a = fa;
        b = fb;
    }
    Ok((s, beta.powi(s as i32)))
}

/// `s(x, y)` and `d_β(x, y)`, with `s` capped at the tree depth.
pub fn separation_and_metric(tree: &CylinderTree, x: f64, y: f64) -> Result<(usize, f64)> {
    separation(tree.induced(), x, y, tree.depth(), tree.beta())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::MapSystem;

    fn doubling_tree(depth: usize) -> CylinderTree {
        let ind = InducedSystem::on_default_base(MapSystem::doubling());
        CylinderTree::build(
            &ind,
            depth,
            0.5,
            TreeOptions {
                samples: 50_000,
                seed: 3,
            },
        )
        .unwrap()
    }

    #[test]
    fn doubling_depth_one_is_geometric() {
        let tree = doubling_tree(1);
        for c in tree.level(1) {
            let n = c.word[0] as i32;
            let exact = c.exact_measure.unwrap();
            assert!((exact - 0.5f64.powi(n - 1) * 0.5).abs() < 1e-15, "n={n}");
            // normalized measure 2^{1-n} of {R = n} within Y: 2^{-n}/(1/2)
            assert!((exact - 2f64.powi(-n)).abs() < 1e-15);
        }
    }

    #[test]
    fn measures_sum_to_one_and_refine() {
        for tree in [
            doubling_tree(4),
            CylinderTree::build(
                &InducedSystem::on_default_base(MapSystem::lsv(0.25).unwrap()),
                4,
                0.5,
                TreeOptions {
                    samples: 20_000,
                    seed: 1,
                },
            )
            .unwrap(),
        ] {
            for k in 1..=tree.depth() {
                let total: f64 = tree.level(k).iter().map(|c| c.measure).sum();
                assert!((total - 1.0).abs() < 1e-6);
                let mut prev_hi = f64::NEG_INFINITY;
                let mut sorted: Vec<_> = tree.level(k).iter().collect();
                sorted.sort_by(|a, b| a.lo.total_cmp(&b.lo));
                for c in sorted {
                    assert!(c.lo >= prev_hi, "overlap at depth {k}");
                    prev_hi = c.hi;
                    if k > 1 {
                        let parent = tree.find(&c.word[..k - 1]).unwrap();
                        assert!(parent.lo <= c.lo && c.hi <= parent.hi);
                    }
                }
            }
        }
    }

    #[test]
    fn doubling_cylinder_measures_multiply() {
        let tree = doubling_tree(2);
        for c in tree.level(2) {
            let a = 0.5f64.powi(c.word[0] as i32);
            let b = 0.5f64.powi(c.word[1] as i32);
            assert!((c.exact_measure.unwrap() - a * b).abs() < 1e-15);
        }
    }

    #[test]
    fn samples_lie_in_their_cylinders() {
        let tree = doubling_tree(3);
        for k in 1..=3 {
            for (&x, &cell) in tree.samples().iter().zip(tree.sample_cells(k)) {
                assert!(tree.level(k)[cell].contains(x));
            }
        }
    }

    #[test]
    fn bisection_matches_exact_endpoints() {
        let ind = InducedSystem::on_default_base(MapSystem::lsv(0.25).unwrap());
        let tree = CylinderTree::build(
            &ind,
            2,
            0.5,
            TreeOptions {
                samples: 2000,
                seed: 2,
            },
        )
        .unwrap();
        for c in tree.level(2).iter().take(20) {
            let (lo, hi) = bisect_interval(&ind, &c.word, c.representative).unwrap();
            assert!((lo - c.lo).abs() < 1e-12 && (hi - c.hi).abs() < 1e-12);
        }
    }

    #[test]
    fn separation_examples() {
        let tree = doubling_tree(6);
        // R(0.8) = 1, R(0.6) = 2: different 1-cylinders
        assert_eq!(separation_and_metric(&tree, 0.8, 0.6).unwrap(), (0, 1.0));
        for k in 1..5 {
            let c = tree
                .level(k)
                .iter()
                .find(|c| {
                    tree.level(k + 1)
                        .iter()
                        .filter(|d| d.word[..k] == c.word[..])
                        .count()
                        >= 2
                })
                .unwrap();
            let kids: Vec<_> = tree
                .level(k + 1)
                .iter()
                .filter(|d| d.word[..k] == c.word[..])
                .collect();
            let (s, d) =
                separation_and_metric(&tree, kids[0].representative, kids[1].representative)
                    .unwrap();
            assert_eq!(s, k);
            assert_eq!(d, 0.5f64.powi(k as i32));
        }
    }

    #[test]
    fn ultrametric_on_random_triples() {
        let tree = doubling_tree(8);
        let mut rng = rng_from_seed(12);
        for _ in 0..10_000 {
            let [x, y, z]: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.5..1.0));
            let dxz = separation_and_metric(&tree, x, z).unwrap().1;
            let dxy = separation_and_metric(&tree, x, y).unwrap().1;
            let dyz = separation_and_metric(&tree, y, z).unwrap().1;
            assert!(dxz <= dxy.max(dyz));
        }
    }

    #[test]
    fn parameter_checks() {
        let ind = InducedSystem::on_default_base(MapSystem::doubling());
        assert!(CylinderTree::build(&ind, 0, 0.5, TreeOptions::default()).is_err());
        assert!(CylinderTree::build(&ind, 2, 1.0, TreeOptions::default()).is_err());
    }
}
