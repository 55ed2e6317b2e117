//! Gibbs–Markov structure of induced maps: cylinder partitions, the
//! separation-time metric, transfer operators, distortion, decay of
//! correlations and empirical checks of the oscillation and mixing bounds.

pub mod correlation;
pub mod cylinders;
pub mod distortion;
pub mod oscillation;
pub mod transfer;

pub use correlation::{correlation_sequence, fit_decay, CorrelationSequence, DecayFit};
pub use cylinders::{separation, separation_and_metric, Cylinder, CylinderTree, TreeOptions};
pub use distortion::{check_distortion, DistortionReport};
pub use oscillation::{
    basic_sup_check, beta_seminorm, ps_mixing, ps_oscillation, BetaSeminorm, IntervalSet,
    MixingEstimate, OscillationReport, OscillationRow,
};
pub use transfer::TransferDisc;

use crate::error::Result;
use crate::inducing::InducedSystem;
use crate::systems::SystemKind;

/// Default `β` for the symbolic metric: `1/2` for doubling, otherwise
/// `1/λ` with `λ` the smallest induced expansion over `n` sampled base
/// points (Lipschitz observables, so the Hölder exponent is 1).
pub fn default_beta(induced: &InducedSystem, n: usize, seed: u64) -> Result<f64> {
    if induced.parent().kind() == SystemKind::Doubling {
        return Ok(0.5);
    }
    let mut lambda = f64::INFINITY;
    for x in cylinders::sample_base_points(induced, n, seed)? {
        lambda = lambda.min(induced.induced_derivative(x)?.0);
    }
    Ok((1.0 / lambda).clamp(1e-3, 0.999))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::MapSystem;

    #[test]
    fn default_beta_matches_branch_expansion() {
        let d = InducedSystem::on_default_base(MapSystem::doubling());
        assert_eq!(default_beta(&d, 10, 1).unwrap(), 0.5);
        // the return-time-1 piece of lsv is linear with slope 2
        let l = InducedSystem::on_default_base(MapSystem::lsv(0.25).unwrap());
        let b = default_beta(&l, 5000, 1).unwrap();
        assert!((b - 0.5).abs() < 1e-9, "{b}");
    }
}
