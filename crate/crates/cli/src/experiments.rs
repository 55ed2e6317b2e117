//! Runners for the experiment kinds of the catalog.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use towerlimits::flow::{
    flow_increments, flow_variance, induce_flow_observable, FlowBase, FlowObservable, FlowState,
    Roof, SuspensionFlow,
};
use towerlimits::gibbs_markov::{
    basic_sup_check, check_distortion, correlation_sequence, default_beta, fit_decay,
    ps_oscillation, CorrelationSequence, CylinderTree, DecayFit, TransferDisc, TreeOptions,
};
use towerlimits::inducing::{
    as_f64, moment_norm, sample_returns, survival, tail_exponent, Dynamics, InducedSystem, TailKind,
};
use towerlimits::lorentz::{
    billiard_map, corridor, finite_horizon_check, invariance_chi_squared,
    lorentz_flow_observable_run, map_displacements, rational_directions, sample_collision,
    BilliardTable, HorizonOptions, LorentzObservable,
};
use towerlimits::numeric::{batched_mean, mean};
use towerlimits::rng::{rng_from_seed, split_seed};
use towerlimits::stats::{clt_test, replica_paths, replica_sums, wip_test, LilTracker, Verdict};
use towerlimits::systems::{center_observable, Centering, Observable, SystemKind};
use towerlimits::tower::{build_tower, induce_observable, TowerObservable};
use towerlimits::variance::{
    batch_means, batch_means_orbit, coboundary_solve, green_kubo, Truncation, VerdictOptions,
};

use crate::catalog::ExperimentKind;
use crate::config::{ExperimentConfig, ObservableKind, SystemChoice};
use crate::CliError;

/// Rows of one CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub file: &'static str,
    pub rows: Vec<Vec<String>>,
}

/// Everything an experiment produces apart from timing.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub estimates: BTreeMap<String, Value>,
    pub verdicts: BTreeMap<String, bool>,
    pub streams: BTreeMap<String, u64>,
    pub series: Vec<Series>,
    root: u64,
}

impl Outcome {
    fn new(root: u64) -> Self {
        Self {
            root,
            ..Default::default()
        }
    }

    /// A fresh seed for the named random stream.
    fn seed(&mut self, name: &str) -> u64 {
        let s = split_seed(self.root, self.streams.len() as u64);
        self.streams.insert(name.to_string(), s);
        s
    }

    fn put<T: Serialize>(&mut self, name: &str, value: T) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.estimates.insert(name.to_string(), v);
    }

    fn check(&mut self, name: &str, ok: bool) {
        self.verdicts.insert(name.to_string(), ok);
    }

    fn series(&mut self, file: &'static str, rows: Vec<Vec<String>>) {
        self.series.push(Series { file, rows });
    }
}

fn cells<const N: usize>(values: [&dyn ToString; N]) -> Vec<String> {
    values.iter().map(|v| v.to_string()).collect()
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::new(cfg.seed);
    if let SystemChoice::Map(m) = &cfg.system {
        out.put("system", m.name());
        out.put("out_of_regime", m.out_of_regime());
    }
    match cfg.experiment {
        ExperimentKind::Tails => tails(cfg, &mut out)?,
        ExperimentKind::Decay => decay(cfg, &mut out)?,
        ExperimentKind::Variance => variance(cfg, &mut out)?,
        ExperimentKind::TowerLift => tower_lift(cfg, &mut out)?,
        ExperimentKind::FlowLift => flow_lift(cfg, &mut out)?,
        ExperimentKind::Billiard => billiard(cfg, &mut out)?,
        ExperimentKind::Clt => clt(cfg, &mut out)?,
        ExperimentKind::Wip => wip(cfg, &mut out)?,
        ExperimentKind::Lil => lil(cfg, &mut out)?,
        ExperimentKind::PsConditions => ps_conditions(cfg, &mut out)?,
    }
    if let Some(e) = &cfg.expect {
        let value = out
            .estimates
            .get(&e.estimate)
            .and_then(Value::as_f64)
            .ok_or_else(|| {
                CliError::Config(format!(
                    "[expect] estimate `{}` is not a numeric estimate of {} (available: {})",
                    e.estimate,
                    cfg.experiment,
                    out.estimates
                        .iter()
                        .filter(|(_, v)| v.is_number())
                        .map(|(k, _)| k.as_str())
                        .collect::<Vec<_>>()
                        .join(", ")
                ))
            })?;
        out.check(
            &format!("expect_{}", e.estimate),
            (e.min..=e.max).contains(&value),
        );
    }
    Ok(out)
}

fn induced(cfg: &ExperimentConfig) -> Result<InducedSystem, CliError> {
    let m = *cfg.map()?;
    Ok(match cfg.base {
        Some(base) => InducedSystem::new(m, base)?,
        None => InducedSystem::on_default_base(m),
    })
}

/// The configured observable shifted to mean zero under the invariant
/// measure of the map.
fn centered(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<Observable, CliError> {
    let m = cfg.map()?;
    let v = cfg.observable.on_map()?;
    let seed = out.seed("centering");
    let c = center_observable(&v, m, cfg.count("center_orbit", 20_000_000), seed)?;
    out.put("centering", c.centering);
    Ok(c)
}

/// Configured `σ²`, or a Green–Kubo estimate on the map.
fn normalising_variance(
    cfg: &ExperimentConfig,
    v: &Observable,
    out: &mut Outcome,
) -> Result<f64, CliError> {
    if let Some(s) = cfg.sigma2 {
        out.put("sigma2", s);
        out.put("sigma2_source", "configured");
        return Ok(s);
    }
    let seed = out.seed("sigma2");
    let gk = green_kubo(
        cfg.map()?,
        v,
        Truncation::Auto,
        cfg.count("orbit", 10_000_000),
        seed,
    )?;
    out.put("sigma2", gk.estimate.sigma2);
    out.put("sigma2_standard_error", gk.estimate.standard_error);
    out.put("sigma2_source", "green_kubo");
    Ok(gk.estimate.sigma2)
}

fn correlation_rows(seq: &CorrelationSequence) -> Vec<Vec<String>> {
    seq.values
        .iter()
        .zip(&seq.standard_errors)
        .enumerate()
        .map(|(n, (c, se))| cells([&n, c, se, &seq.above_floor(n)]))
        .collect()
}

fn tails(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let m = *cfg.map()?;
    let ind = induced(cfg)?;
    let seed = out.seed("returns");
    let r = as_f64(&sample_returns(
        &ind,
        cfg.count("returns", 10_000_000),
        seed,
    )?);
    let (rbar, rbar_se) = batched_mean(&r, cfg.count("batches", 50));
    let tail = tail_exponent(&r)?;
    let moment = moment_norm(&r, cfg.real("moment_order", 2.5))?;

    out.put("base_set", ind.base_set());
    out.put("mean_return", rbar);
    out.put("mean_return_standard_error", rbar_se);
    out.put("tail", &tail);
    out.put("moment", moment);
    if let Some((gamma, ci)) = tail.exponent_estimate {
        out.put("gamma", gamma);
        out.put("gamma_ci", ci);
    }

    out.check("tail_classified", tail.tail_kind != TailKind::Undetermined);
    let r2 = match tail.tail_kind {
        TailKind::Polynomial => tail.loglog_r_squared,
        _ => tail.semilog_r_squared,
    };
    out.check("tail_fit", r2 >= 0.95);
    match m.kind() {
        // Lebesgue is invariant, so Kac gives the mean return exactly
        SystemKind::Doubling => {
            let kac = 1.0 / ind.base_length();
            out.put("kac_mean_return", kac);
            out.check("kac", (rbar - kac).abs() <= 3.0 * rbar_se);
            out.check(
                "exponential_tail",
                tail.tail_kind == TailKind::ExponentialOrFaster,
            );
        }
        _ => {
            let gamma = tail.exponent_estimate.map_or(f64::NAN, |(g, _)| g);
            out.put("expected_gamma", 1.0 / m.alpha());
            out.check(
                "gamma_near_inverse_alpha",
                (gamma - 1.0 / m.alpha()).abs() <= 0.5,
            );
        }
    }

    let mut sorted = r;
    sorted.sort_unstable_by(f64::total_cmp);
    let top = *sorted.last().expect("nonempty sample");
    let thresholds: Vec<f64> = (0..=60)
        .map(|i| top.powf(i as f64 / 60.0).floor())
        .collect();
    let mut thresholds_unique = thresholds.clone();
    thresholds_unique.dedup();
    let surv = survival(&sorted, &thresholds_unique);
    out.series(
        "survival.csv",
        thresholds_unique
            .iter()
            .zip(&surv)
            .map(|(t, s)| cells([t, s]))
            .collect(),
    );
    Ok(())
}

fn target(cfg: &ExperimentConfig, induce_default: bool) -> Result<Box<dyn Dynamics>, CliError> {
    Ok(if cfg.induce.unwrap_or(induce_default) {
        Box::new(induced(cfg)?)
    } else {
        Box::new(*cfg.map()?)
    })
}

fn decay(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let dynamics = target(cfg, true)?;
    let v = cfg.observable.on_map()?;
    let seed = out.seed("orbit");
    let seq = correlation_sequence(
        dynamics.as_ref(),
        &v,
        &v,
        cfg.count("lags", 30),
        cfg.count("orbit", 10_000_000),
        seed,
    )?;
    let fit = fit_decay(&seq.values, &seq.standard_errors)?;
    out.put("dynamics", dynamics.describe());
    let geometric = match &fit {
        DecayFit::Geometric {
            slope,
            r_squared,
            rate,
            ..
        } => {
            out.put("slope", slope);
            out.put("rate", rate);
            out.put("r_squared", r_squared);
            *slope < 0.0 && *r_squared >= 0.9
        }
        DecayFit::Degenerate { .. } => false,
    };
    out.put("fit", &fit);
    out.check("geometric_decay", geometric);
    out.series("correlations.csv", correlation_rows(&seq));
    Ok(())
}

fn variance(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let dynamics = target(cfg, false)?;
    let v = cfg.observable.on_map()?;
    let truncation = match cfg.budget.get("lags") {
        Some(&k) => Truncation::Fixed(k as usize),
        None => Truncation::Auto,
    };
    let orbit = cfg.count("orbit", 10_000_000);
    let seed = out.seed("green_kubo");
    let gk = green_kubo(dynamics.as_ref(), &v, truncation, orbit, seed)?;
    let block = cfg.count("block", 1_000);
    let seed = out.seed("batch_means");
    let bm = batch_means_orbit(dynamics.as_ref(), &v, block, orbit / block, seed)?;

    out.put("dynamics", dynamics.describe());
    out.put("sigma2", gk.estimate.sigma2);
    out.put("sigma2_standard_error", gk.estimate.standard_error);
    out.put("green_kubo", gk.estimate);
    out.put("batch_means", bm);
    let marginal = gk.correlations.values[0];
    if gk.estimate.degenerate {
        // block means of a coboundary keep an O(1/block) bias
        out.check("batch_means_small", bm.raw_sigma2 <= 0.01 * marginal);
    } else {
        let se = gk.estimate.standard_error.hypot(bm.standard_error);
        out.check(
            "estimators_agree",
            (gk.estimate.sigma2 - bm.sigma2).abs() <= 3.0 * se,
        );
    }
    out.series("correlations.csv", correlation_rows(&gk.correlations));

    let m = cfg.map()?;
    let smooth = matches!(
        cfg.observable,
        ObservableKind::Cos { .. } | ObservableKind::Coboundary | ObservableKind::Constant { .. }
    );
    if m.kind() == SystemKind::Doubling && smooth && cfg.induce != Some(true) {
        let op = TransferDisc::exact_branches(m, cfg.count("grid", 4096))?;
        let seed = out.seed("coboundary");
        let sol = coboundary_solve(
            &op,
            &v,
            cfg.count("terms", 30),
            VerdictOptions {
                seed,
                ..Default::default()
            },
        )?;
        out.put("coboundary_residual", sol.residual);
        out.put("coboundary_decomposition_error", sol.decomposition_error);
        out.put("coboundary_verdict", &sol.verdict);
        out.check(
            "coboundary_consistent",
            sol.verdict.degenerate == gk.estimate.degenerate,
        );
        out.series(
            "coboundary.csv",
            (0..sol.grid.len())
                .map(|i| cells([&sol.grid[i], &sol.v[i], &sol.w[i], &sol.v_hat[i]]))
                .collect(),
        );
    }
    Ok(())
}

fn tower_lift(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let m = *cfg.map()?;
    let ind = induced(cfg)?;
    let psi = centered(cfg, out)?;
    let seed = out.seed("returns");
    let tower = build_tower(
        &ind,
        &sample_returns(&ind, cfg.count("returns", 1_000_000), seed)?,
    )?;
    let big = induce_observable(&tower, &TowerObservable::projected(psi.clone()))
        .to_observable(psi.sup_norm * tower.max_return as f64)?;
    let seed = out.seed("green_kubo");
    let gk = green_kubo(
        &ind,
        &big,
        Truncation::Auto,
        cfg.count("orbit", 20_000_000),
        seed,
    )?
    .estimate;
    let lifted = gk.sigma2 / tower.mean_return;
    // a tower orbit projects onto a stationary orbit of the map
    let seed = out.seed("batch_means");
    let bm = batch_means_orbit(
        &m,
        &psi,
        cfg.count("block", 10_000),
        cfg.count("blocks", 10_000),
        seed,
    )?;
    let rel = (bm.sigma2 / lifted - 1.0).abs();

    out.put("mean_return", tower.mean_return);
    out.put("mean_return_standard_error", tower.mean_return_se);
    out.put("kac_product", tower.kac_product());
    out.put("overflow_mass", tower.overflow_mass);
    out.put("induced_variance", gk);
    out.put("lifted_sigma2", lifted);
    out.put("batch_means", bm);
    out.put("sigma2", bm.sigma2);
    out.put("relative_difference", rel);
    out.check("lift_agrees", rel <= 0.05);
    out.series(
        "levels.csv",
        tower
            .level_masses
            .iter()
            .enumerate()
            .map(|(l, m)| cells([&l, m]))
            .collect(),
    );
    Ok(())
}

fn flow_lift(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let m = *cfg.map()?;
    let spec = cfg.roof;
    let constant = spec.slope == 0.0;
    let roof = if constant {
        Roof::constant(spec.base)?
    } else {
        Roof::new(
            format!("{}+{}x", spec.base, spec.slope),
            move |x| spec.base + spec.slope * x,
            1.0,
            spec.slope.abs(),
        )?
    };
    let seed = out.seed("mean_roof");
    let flow = SuspensionFlow::new(
        FlowBase::Map(m),
        roof,
        cfg.count("roof_samples", 1_000_000),
        seed,
    )?;
    let psi0 = cfg.observable.on_map()?;
    let orbit = cfg.count("orbit", 20_000_000);
    out.put("mean_roof", flow.mean_roof);
    out.put("mean_roof_standard_error", flow.mean_roof_se);

    if m.kind() == SystemKind::Doubling {
        if !constant {
            return Err(towerlimits::Error::Parameter(
                "flow simulation over the doubling map needs a constant roof".into(),
            )
            .into());
        }
        // the induced observable is c·ψ, so σ² = c·σ²(ψ)
        let psi = center_observable(&psi0, &m, 10_000, 0)?;
        let phi = induce_flow_observable(&flow, &FlowObservable::BaseOnly(psi.clone()))
            .to_observable(spec.base * psi.sup_norm)?;
        let seed = out.seed("green_kubo");
        let base = green_kubo(&m, &psi, Truncation::Auto, orbit, seed)?;
        let induced = green_kubo(&m, &phi, Truncation::Auto, orbit, seed)?;
        let sigma_flow = flow_variance(induced.estimate.sigma2, flow.mean_roof)?;
        let reduced = spec.base * base.estimate.sigma2;
        out.put("base_sigma2", base.estimate.sigma2);
        out.put("induced_sigma2", induced.estimate.sigma2);
        out.put("sigma2", sigma_flow);
        out.check(
            "constant_roof_reduction",
            (sigma_flow - reduced).abs() <= 1e-12 * reduced.abs().max(1e-300),
        );
        out.series("correlations.csv", correlation_rows(&induced.correlations));
        return Ok(());
    }

    // shift ψ so that its flow average vanishes
    let raw = induce_flow_observable(&flow, &FlowObservable::BaseOnly(psi0.clone()))
        .to_observable(flow.mean_roof * psi0.sup_norm)?;
    let seed = out.seed("centering");
    let values: Vec<f64> = m
        .orbit(seed)
        .take(cfg.count("center_orbit", 20_000_000))
        .map(|x| raw.eval(x))
        .collect();
    let shift = mean(&values) / flow.mean_roof;
    out.put("centering", shift);
    let psi = psi0.shifted(Centering {
        constant: shift,
        standard_error: 0.0,
    });
    let top = (spec.base + spec.slope.max(0.0)) * psi.sup_norm;
    let phi =
        induce_flow_observable(&flow, &FlowObservable::BaseOnly(psi.clone())).to_observable(top)?;
    let seed = out.seed("green_kubo");
    let gk = green_kubo(&m, &phi, Truncation::Auto, orbit, seed)?;
    let via_base = flow_variance(gk.estimate.sigma2, flow.mean_roof)?;

    let seed = out.seed("flow_orbit");
    let x0 = m.orbit(seed).next().expect("orbits are infinite");
    let inc = flow_increments(
        &flow,
        &FlowObservable::BaseOnly(psi),
        FlowState { x: x0, u: 0.0 },
        1.0,
        cfg.count("windows", 10_000_000),
    )?;
    let bm = batch_means(&inc, cfg.count("block", 1_000))?;
    let rel = (bm.sigma2 / via_base - 1.0).abs();
    out.put("induced_variance", gk.estimate);
    out.put("sigma2", via_base);
    out.put("batch_means", bm);
    out.put("relative_difference", rel);
    out.check("flow_routes_agree", rel <= 0.05);
    out.series("correlations.csv", correlation_rows(&gk.correlations));
    Ok(())
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn billiard(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let table = cfg.table()?;
    let seed = out.seed("collisions");
    let mut rng = rng_from_seed(seed);
    let mut c = sample_collision(table, &mut rng);
    let (mut speed, mut specular, mut tangencies) = (0.0f64, 0.0f64, 0usize);
    let mut dump = Vec::new();
    for step in 0..cfg.count("collisions", 1_000_000) {
        let s = billiard_map(table, &c)?;
        speed = speed.max((dot(s.outgoing, s.outgoing).sqrt() - 1.0).abs());
        specular = specular.max((dot(s.outgoing, s.normal) + dot(s.incoming, s.normal)).abs());
        tangencies += usize::from(s.tangency);
        if step < 1000 {
            dump.push(cells([
                &step,
                &s.state.scatterer,
                &s.state.r,
                &s.state.theta,
                &s.free_time,
            ]));
        }
        c = s.state;
    }

    let seed = out.seed("reversal");
    let mut c = sample_collision(table, &mut rng_from_seed(seed));
    let mut reversal = 0.0f64;
    for _ in 0..cfg.count("reversal_steps", 1000) {
        let next = billiard_map(table, &c)?.state;
        let back = billiard_map(table, &next.reversed())?.state.reversed();
        let err = if back.scatterer == c.scatterer {
            (back.r - c.r).abs().max((back.theta - c.theta).abs())
        } else {
            f64::INFINITY
        };
        reversal = reversal.max(err);
        c = next;
    }

    let samples = cfg.count("samples", 1_000_000);
    let seed = out.seed("free_times");
    let (_, tau, _) = map_displacements(table, samples, seed)?;
    let mft = mean(&tau);
    let mft_rel = (mft / table.mean_free_time() - 1.0).abs();
    let seed = out.seed("invariance");
    let (chi2, p) = invariance_chi_squared(table, samples, cfg.count("bins", 20), seed)?;
    let max_denominator = cfg.count("max_denominator", 12) as i64;
    let seed = out.seed("horizon");
    let horizon = finite_horizon_check(
        table,
        HorizonOptions {
            max_denominator,
            samples,
            bound: cfg.real("flight_bound", 10.0),
            seed,
        },
    )?;

    out.put("speed_error", speed);
    out.put("specular_error", specular);
    out.put("reversal_error", reversal);
    out.put("tangencies", tangencies);
    out.put("mean_free_time", mft);
    out.put("mean_free_time_formula", table.mean_free_time());
    out.put("mean_free_time_relative_error", mft_rel);
    out.put("invariance_chi2", chi2);
    out.put("invariance_p_value", p);
    out.put("horizon", &horizon);
    out.put("finite_horizon", horizon.finite);
    out.check("unit_speed", speed <= 1e-12);
    out.check("specular_reflection", specular <= 1e-12);
    out.check("time_reversal", reversal <= 1e-9);
    out.check("mean_free_time", mft_rel <= 0.02);
    out.check("invariance", p > 0.01);
    out.series("collisions.csv", dump);
    let corridors = rational_directions(max_denominator)
        .into_iter()
        .filter_map(|(p, q)| corridor(table, p, q))
        .map(|w| cells([&w.direction.0, &w.direction.1, &w.offset, &w.width]))
        .collect();
    out.series("corridors.csv", corridors);
    Ok(())
}

fn lorentz_observable(kind: ObservableKind) -> Result<LorentzObservable, CliError> {
    match kind {
        ObservableKind::VelocityX => Ok(LorentzObservable::VelocityX),
        ObservableKind::VelocityY => Ok(LorentzObservable::VelocityY),
        other => Err(CliError::Config(format!(
            "observable {other:?} is not defined on the Lorentz gas"
        ))),
    }
}

fn lorentz_clt(
    cfg: &ExperimentConfig,
    table: &BilliardTable,
    out: &mut Outcome,
) -> Result<(), CliError> {
    let psi = lorentz_observable(cfg.observable)?;
    let sigma2 = match cfg.sigma2 {
        Some(s) => {
            out.put("sigma2_source", "configured");
            s
        }
        None => {
            if cfg.observable != ObservableKind::VelocityX {
                return Err(CliError::Config(
                    "[observable] sigma2 is required unless kind = velocity_x".into(),
                ));
            }
            let seed = out.seed("sigma2");
            let (dx, tau, _) = map_displacements(table, cfg.count("collisions", 10_000_000), seed)?;
            let map = batch_means(&dx, cfg.count("block", 1_000))?;
            let hbar = mean(&tau);
            out.put("map_variance", map);
            out.put("mean_free_time", hbar);
            out.put("sigma2_source", "displacements");
            flow_variance(map.sigma2, hbar)?
        }
    };
    out.put("sigma2", sigma2);
    let t = cfg.real("time", 2000.0);
    let replicas = cfg.count("replicas", 500);
    let batches = cfg.count("batches", 1);
    let mut passes = 0;
    let mut rows = Vec::new();
    let mut p_values = Vec::new();
    for b in 0..batches {
        let seed = out.seed(&format!("batch_{b}"));
        let scaled: Vec<f64> = (0..replicas)
            .into_par_iter()
            .map(|r| {
                lorentz_flow_observable_run(table, &psi, t, t, split_seed(seed, r as u64))
                    .map(|run| run.total() / t.sqrt())
            })
            .collect::<Result<_, _>>()?;
        let report = clt_test(&scaled, 1, sigma2)?;
        passes += usize::from(report.passed());
        p_values.push(report.p_value().unwrap_or(f64::NAN));
        rows.extend(scaled.iter().enumerate().map(|(r, z)| cells([&b, &r, z])));
    }
    finish_clt(out, passes, batches, p_values, rows);
    Ok(())
}

fn finish_clt(
    out: &mut Outcome,
    passes: usize,
    batches: usize,
    p_values: Vec<f64>,
    rows: Vec<Vec<String>>,
) {
    let rate = passes as f64 / batches as f64;
    out.put("batches_passed", passes);
    out.put("batches", batches);
    out.put("pass_rate", rate);
    if let [p] = p_values[..] {
        out.put("p_value", p);
    }
    out.put("p_values", p_values);
    out.check("clt", rate >= 0.95);
    out.series("scaled_sums.csv", rows);
}

fn clt(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    if let SystemChoice::Lorentz(table) = &cfg.system {
        return lorentz_clt(cfg, table, out);
    }
    let m = *cfg.map()?;
    let v = centered(cfg, out)?;
    let sigma2 = normalising_variance(cfg, &v, out)?;
    let n = cfg.count("horizon", 100_000) as u64;
    let replicas = cfg.count("replicas", 2000);
    let batches = cfg.count("batches", 1);
    let mut passes = 0;
    let mut rows = Vec::new();
    let mut p_values = Vec::new();
    for b in 0..batches {
        let seed = out.seed(&format!("batch_{b}"));
        let sums: Vec<f64> = replica_sums(&m, &v, &[n], replicas, seed)?
            .into_iter()
            .map(|s| s[0])
            .collect();
        let report = clt_test(&sums, n, sigma2)?;
        passes += usize::from(report.passed());
        p_values.push(report.p_value().unwrap_or(f64::NAN));
        rows.extend(
            sums.iter()
                .enumerate()
                .map(|(r, s)| cells([&b, &r, &(s / (n as f64).sqrt())])),
        );
    }
    finish_clt(out, passes, batches, p_values, rows);
    Ok(())
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Degenerate => "degenerate",
        Verdict::NonDegenerate => "non_degenerate",
    }
}

fn wip(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let m = *cfg.map()?;
    let v = centered(cfg, out)?;
    let sigma2 = normalising_variance(cfg, &v, out)?;
    let seed = out.seed("paths");
    let paths = replica_paths(
        &m,
        &v,
        cfg.count("horizon", 100_000) as u64,
        cfg.count("grid", 100),
        cfg.count("replicas", 1000),
        seed,
    )?;
    let report = wip_test(&paths, sigma2)?;
    out.put("verdict", verdict_name(report.verdict));
    out.put("statistics", &report.statistics);
    out.put("p_values", &report.p_values);
    if let Some(p) = report.p_value() {
        out.put("p_value", p);
    }
    if let Some(note) = &report.note {
        out.put("note", note);
    }
    out.check(
        "wip",
        matches!(report.verdict, Verdict::Pass | Verdict::Degenerate),
    );
    let rows = report
        .p_values
        .iter()
        .map(|(k, p)| {
            let stat = report.statistics.get(k).copied().unwrap_or(f64::NAN);
            cells([k, &stat, p])
        })
        .collect();
    out.series("functionals.csv", rows);
    Ok(())
}

fn lil(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let m = *cfg.map()?;
    let v = centered(cfg, out)?;
    let sigma2 = normalising_variance(cfg, &v, out)?;
    let n = cfg.count("length", 100_000_000) as u64;
    let mut tracker = LilTracker::new(n, sigma2)?;
    let seed = out.seed("orbit");
    for x in m.orbit(seed).take(n as usize) {
        tracker.push(v.eval(x));
    }
    let report = tracker.finish()?;
    out.put("statistics", &report.statistics);
    if let Some(s) = report.statistics.get("running_sup") {
        out.put("running_sup", s);
    }
    if let Some(note) = &report.note {
        out.put("note", note);
    }
    out.check("lil_band", report.passed());
    out.series(
        "trajectory.csv",
        report
            .trajectory
            .iter()
            .map(|(n, r)| cells([n, r]))
            .collect(),
    );
    Ok(())
}

fn ps_conditions(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let ind = induced(cfg)?;
    let v = cfg.observable.on_map()?;
    let depth = cfg.count("depth", 8);
    let beta = match cfg.budget.get("beta") {
        Some(&b) => b,
        None => {
            let seed = out.seed("beta");
            default_beta(&ind, 10_000, seed)?
        }
    };
    let seed = out.seed("tree");
    let tree = CylinderTree::build(
        &ind,
        depth,
        beta,
        TreeOptions {
            samples: cfg.count("samples", 100_000),
            seed,
        },
    )?;
    let delta = cfg.real("delta", 0.5);
    let seed = out.seed("returns");
    let returns = as_f64(&sample_returns(
        &ind,
        cfg.count("returns", 1_000_000),
        seed,
    )?);
    let moment = moment_norm(&returns, 2.0 + delta)?;
    let seed = out.seed("oscillation");
    let rep = ps_oscillation(&tree, &v, delta, &moment, seed)?;
    let slope = rep.log_slope.unwrap_or(f64::NAN);

    let pairs = cfg.count("pairs", 4000);
    let mut distortion = Vec::new();
    let mut rows = Vec::new();
    for k in 1..=depth.min(6) {
        let seed = out.seed(&format!("distortion_{k}"));
        let d = check_distortion(&tree, k, pairs, seed)?;
        rows.push(cells([
            &k,
            &d.d_hat,
            &d.pair_constant,
            &d.ratio_min,
            &d.ratio_max,
        ]));
        distortion.push(d.d_hat);
    }
    let margin = (1..=depth)
        .map(|k| basic_sup_check(&tree, &v, k, &rep.seminorm))
        .fold(f64::INFINITY, f64::min);

    out.put("beta", beta);
    out.put("moment", moment);
    out.put("log_slope", slope);
    out.put("bound_slope", rep.bound_slope);
    out.put("seminorm", rep.seminorm);
    out.put("distortion", &distortion);
    out.put("sup_check_margin", margin);
    out.check("oscillation_within_bound", rep.within_bound());
    out.check("oscillation_rate", slope <= rep.bound_slope + 0.05);
    out.check(
        "distortion_finite",
        distortion.iter().all(|d| d.is_finite()),
    );
    out.check("sup_inequality", margin >= 0.0);
    out.series(
        "oscillation.csv",
        rep.rows
            .iter()
            .map(|r| cells([&r.depth, &r.sum, &r.bound]))
            .collect(),
    );
    out.series("distortion.csv", rows);
    Ok(())
}
