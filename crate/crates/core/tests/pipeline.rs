//! End-to-end checks of the inducing, Gibbs–Markov, tower and flow stages
//! at budgets too large for unit tests.

use towerlimits::flow::{
    flow_increments, induce_flow_observable, FlowBase, FlowObservable, FlowState, Roof,
    SuspensionFlow,
};
use towerlimits::gibbs_markov::{
    check_distortion, ps_mixing, CylinderTree, IntervalSet, TreeOptions,
};
use towerlimits::inducing::{as_f64, sample_returns, InducedSystem};
use towerlimits::numeric::{batched_mean, fit_line, mean};
use towerlimits::systems::{center_observable, Centering, MapSystem, Observable};
use towerlimits::tower::{build_tower, induce_observable, TowerObservable};
use towerlimits::variance::{batch_means, green_kubo, Truncation};

fn lsv() -> MapSystem {
    MapSystem::lsv(0.25).unwrap()
}

#[test]
fn lsv_mean_return_matches_kac() {
    let t = lsv();
    let ind = InducedSystem::on_default_base(t);
    let r = as_f64(&sample_returns(&ind, 1_000_000, 1).unwrap());
    let (rbar, rbar_se) = batched_mean(&r, 50);
    // m(Y) from the fraction of a stationary orbit spent in Y
    let visits: Vec<f64> = t
        .orbit(2)
        .take(10_000_000)
        .map(|x| f64::from(u8::from(ind.contains(x))))
        .collect();
    let (my, my_se) = batched_mean(&visits, 50);
    let kac = 1.0 / my;
    let kac_se = my_se / (my * my);
    let se = (rbar_se * rbar_se + kac_se * kac_se).sqrt();
    assert!(
        (rbar - kac).abs() < 3.0 * se,
        "{rbar} ± {rbar_se} vs {kac} ± {kac_se}"
    );
}

#[test]
fn lsv_distortion_is_stable_in_depth() {
    let ind = InducedSystem::on_default_base(lsv());
    let tree = CylinderTree::build(
        &ind,
        6,
        0.5,
        TreeOptions {
            samples: 400_000,
            seed: 3,
        },
    )
    .unwrap();
    let d: Vec<f64> = (2..=6)
        .map(|k| check_distortion(&tree, k, 4000, k as u64).unwrap().d_hat)
        .collect();
    let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = d.iter().copied().fold(0.0, f64::max);
    assert!(lo.is_finite() && hi / lo - 1.0 < 0.2, "{d:?}");
}

#[test]
fn lsv_mixing_defect_decays() {
    let ind = InducedSystem::on_default_base(lsv());
    let tree = CylinderTree::build(
        &ind,
        1,
        0.5,
        TreeOptions {
            samples: 100_000,
            seed: 4,
        },
    )
    .unwrap();
    let a = tree
        .level(1)
        .iter()
        .max_by(|x, y| x.best_measure().total_cmp(&y.best_measure()))
        .unwrap()
        .clone();
    let b = IntervalSet(vec![(0.5, 0.7)]);
    let mut gaps = Vec::new();
    let mut logs = Vec::new();
    for gap in 0..6 {
        let est = ps_mixing(&tree, &a, &b, gap, 20_000_000, 40 + gap as u64).unwrap();
        if est.difference.abs() > 3.0 * est.standard_error {
            gaps.push(gap as f64);
            logs.push(est.difference.abs().ln());
        }
    }
    assert!(gaps.len() >= 3, "only {} gaps above noise", gaps.len());
    let fit = fit_line(&gaps, &logs).unwrap();
    assert!(fit.slope < 0.0, "{fit:?}");
}

#[test]
fn centered_tower_observable_has_mean_zero_on_base() {
    let t = lsv();
    let ind = InducedSystem::on_default_base(t);
    let psi = center_observable(&Observable::cos_2pi(1), &t, 20_000_000, 5).unwrap();
    let tower = build_tower(&ind, &sample_returns(&ind, 100_000, 6).unwrap()).unwrap();
    let big = induce_observable(&tower, &TowerObservable::projected(psi));
    let values: Vec<f64> = ind
        .excursions(7)
        .take(2_000_000)
        .map(|e| big.eval(e.unwrap().base_point).unwrap())
        .collect();
    let (m, se) = batched_mean(&values, 50);
    assert!(m.abs() < 3.0 * se + 1e-3, "{m} ± {se}");
}

#[test]
fn flow_variance_two_routes() {
    let t = lsv();
    let roof = Roof::new("1+x/2", |x| 1.0 + 0.5 * x, 1.0, 0.5).unwrap();
    let flow = SuspensionFlow::new(FlowBase::Map(t), roof, 1_000_000, 8).unwrap();
    // shift cos(2πx) so that its flow average vanishes
    let raw = induce_flow_observable(&flow, &FlowObservable::BaseOnly(Observable::cos_2pi(1)))
        .to_observable(1.5)
        .unwrap();
    let c: f64 = mean(
        &t.orbit(9)
            .take(20_000_000)
            .map(|x| raw.eval(x))
            .collect::<Vec<_>>(),
    );
    let psi = Observable::cos_2pi(1).shifted(Centering {
        constant: c / flow.mean_roof,
        standard_error: 0.0,
    });
    let phi = induce_flow_observable(&flow, &FlowObservable::BaseOnly(psi.clone()))
        .to_observable(3.0)
        .unwrap();
    let gk = green_kubo(&t, &phi, Truncation::Auto, 20_000_000, 10)
        .unwrap()
        .estimate;
    let via_base = gk.sigma2 / flow.mean_roof;

    let x0 = t.orbit(11).next().unwrap();
    let inc = flow_increments(
        &flow,
        &FlowObservable::BaseOnly(psi),
        FlowState { x: x0, u: 0.0 },
        1.0,
        10_000_000,
    )
    .unwrap();
    let bm = batch_means(&inc, 1_000).unwrap();
    let rel = (bm.sigma2 / via_base - 1.0).abs();
    assert!(
        rel < 0.05,
        "flow batch means {bm:?} vs green-kubo/hbar {via_base} ({gk:?})"
    );
}
