//! Scenario implementations: each builds on the library modules and returns a
//! [`Summary`] of assertions (value, bound, pass, provenance) and measurements.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::{self, energy_expectation, initial_state, Constants};
use crate::hjb::{
    self, backward_value_propagation, doubly_stochastic_matrix, policy_iteration, value_iteration,
    BackwardMode, BackwardScheme, Improvement, SubEnsembleState,
};
use crate::lattice::{gradient, write_scalar_csv, Grid, Mask, ScalarField};
use crate::madelung::{
    self, continuity_residual, hj_residual, trajectory_snapshots, PhaseDensitySnapshot, QForm,
    ResidualReport,
};
use crate::particles::{
    cell_masses, expectation_estimator, histogram_statistical_floor, kernel_divergence_integral,
    KernelSpec, ParticleEnsemble,
};
use crate::transforms::{
    classical_transform, fokker_planck_residual, half_q_duality_check, nelson_average,
    nelson_residuals, transform_phase, transform_window, transformed_hj_residual, ClassicalFamily,
    FlowDiffusion, TransformSpec,
};

use super::config::{Scenario, ScenarioConfig};

/// One checked quantity with its bound and provenance.
#[derive(Clone, Debug, Serialize)]
pub struct AssertionEntry {
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
    pub source: String,
}

/// Deterministic scenario output. `assertions` carry pinned bounds;
/// `measurements` are reported but never gate anything.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub assertions: BTreeMap<String, AssertionEntry>,
    pub measurements: BTreeMap<String, serde_json::Value>,
    #[serde(skip)]
    exports: Vec<(String, ScalarField)>,
    #[serde(skip)]
    ensemble_export: Option<(String, Vec<f64>, usize)>,
}

impl Summary {
    fn new(scenario: Scenario) -> Self {
        Summary {
            scenario: format!("{scenario:?}"),
            assertions: BTreeMap::new(),
            measurements: BTreeMap::new(),
            exports: Vec::new(),
            ensemble_export: None,
        }
    }

    /// Record `value <= bound`.
    pub fn check(&mut self, name: &str, value: f64, bound: f64, source: &str) -> bool {
        let pass = value <= bound && value.is_finite();
        self.assertions.insert(
            name.to_string(),
            AssertionEntry {
                value,
                bound,
                pass,
                source: source.to_string(),
            },
        );
        pass
    }

    pub fn measure(&mut self, name: &str, value: impl Serialize) {
        self.measurements
            .insert(name.to_string(), serde_json::to_value(value).unwrap());
    }

    fn export_field(&mut self, name: &str, field: &ScalarField) {
        self.exports.push((name.to_string(), field.clone()));
    }

    fn export_residual(&mut self, report: &ResidualReport) {
        self.measure(&format!("residual.{}", report.name), report.summary());
        self.exports.push((
            format!("residual_{}.csv", report.name),
            report.residual.clone(),
        ));
    }

    pub fn all_assertions_pass(&self) -> bool {
        self.assertions.values().all(|a| a.pass)
    }

    pub fn table_lines(&self) -> Vec<String> {
        self.assertions
            .iter()
            .map(|(name, a)| {
                format!(
                    "  {:<44} {:>13.6e} <= {:>10.3e}  {}",
                    name,
                    a.value,
                    a.bound,
                    if a.pass { "PASS" } else { "FAIL" }
                )
            })
            .collect()
    }

    /// Write `summary.json` plus any exported CSV fields.
    pub fn write_files(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(
            dir.join("summary.json"),
            serde_json::to_string_pretty(self)?,
        )?;
        for (name, field) in &self.exports {
            write_scalar_csv(&dir.join(name), field)?;
        }
        if let Some((name, positions, ndim)) = &self.ensemble_export {
            let mut rows = vec![if *ndim == 2 {
                "particle,x1,x2".to_string()
            } else {
                "particle,x".to_string()
            }];
            for (i, chunk) in positions.chunks(*ndim).enumerate() {
                let coords: Vec<String> = chunk.iter().map(|v| format!("{v}")).collect();
                rows.push(format!("{i},{}", coords.join(",")));
            }
            std::fs::write(dir.join(name), rows.join("\n") + "\n")?;
        }
        Ok(())
    }
}

/// Dispatch a scenario, honoring the configured thread count.
pub fn run_scenario(config: &ScenarioConfig) -> Result<Summary> {
    config.validate()?;
    let body = || dispatch(config);
    match config.threads {
        Some(n) if n > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(body)
        }
        _ => body(),
    }
}

fn dispatch(config: &ScenarioConfig) -> Result<Summary> {
    match config.scenario {
        Scenario::EvolveOnly => evolve_only(config),
        Scenario::MadelungResiduals => madelung_residuals(config),
        Scenario::TransformResiduals => transform_residuals(config),
        Scenario::Equivariance => equivariance(config),
        Scenario::VanishingExpectations => vanishing_expectations(config),
        Scenario::BackwardHjb => backward_hjb(config),
        Scenario::ClassicalTransforms => classical_transforms(config),
        Scenario::Nelson => nelson(config),
        Scenario::HalfQDuality => half_q_duality(config),
        Scenario::DpSolvers => dp_solvers(config),
        Scenario::SubEnsembleDemo => sub_ensemble_demo(config),
    }
}

fn evolved_trajectory(config: &ScenarioConfig) -> Result<evolve::WavefunctionTrajectory> {
    let grid = config.grid_required()?;
    let cc = config.constants_config();
    let constants = cc.constants();
    let time = config.time_required()?;
    let psi0 = initial_state(config.state_required()?, &grid, constants.hbar)?;
    evolve::evolve(
        &psi0,
        config.potential_required()?,
        constants,
        time.horizon,
        time.dt,
        time.snapshot_every,
    )
}

fn middle_window(snaps: &[PhaseDensitySnapshot]) -> Result<&[PhaseDensitySnapshot]> {
    if snaps.len() < 3 {
        return Err(Error::Config(
            "need at least 3 recorded snapshots for centered residuals".into(),
        ));
    }
    let mid = snaps.len() / 2;
    Ok(&snaps[mid - 1..mid + 2])
}

fn evolve_only(config: &ScenarioConfig) -> Result<Summary> {
    let mut summary = Summary::new(config.scenario);
    let traj = evolved_trajectory(config)?;
    let cc = config.constants_config();
    let v = config.potential_required()?.sample(traj.grid())?;
    let e0 = energy_expectation(&traj.snapshots[0].1, v.values(), cc.constants());
    let e_drift = traj
        .snapshots
        .iter()
        .map(|(_, psi)| {
            let e = energy_expectation(psi, v.values(), cc.constants());
            ((e - e0) / e0.abs().max(1e-300)).abs()
        })
        .fold(0.0_f64, f64::max);
    summary.check(
        "norm_drift",
        traj.norm_drift(),
        1e-8,
        "norm-preserving scheme contract",
    );
    summary.measure("energy_relative_drift", e_drift);
    summary.measure("snapshots", traj.snapshots.len());
    summary.measure("final_time", traj.snapshots.last().unwrap().0);
    if let Some(dir) = &config.output_dir {
        evolve::export_trajectory(&traj, config.potential_required()?, &dir.join("trajectory"))?;
    }
    let last = traj.snapshots.last().unwrap().1.abs_sqr();
    summary.export_field("rho_final.csv", &last);
    Ok(summary)
}

fn madelung_residuals(config: &ScenarioConfig) -> Result<Summary> {
    let mut summary = Summary::new(config.scenario);
    let traj = evolved_trajectory(config)?;
    let cc = config.constants_config();
    let constants = cc.constants();
    let snaps = trajectory_snapshots(&traj)?;
    let window = middle_window(&snaps)?;
    let v = config.potential_required()?.sample(traj.grid())?;
    let mut hj = hj_residual(window, &v, constants, QForm::Sqrt)?;
    let mut cont = continuity_residual(window, constants)?;

    // companion run at half resolution fills the convergence-order estimate
    if let Some(gc) = &config.grid {
        if gc.points >= 64 && gc.ndim == 1 {
            let mut coarse_cfg = config.clone();
            coarse_cfg.grid = Some(crate::cli::GridConfig {
                points: gc.points / 2,
                ..gc.clone()
            });
            let coarse_traj = evolved_trajectory(&coarse_cfg)?;
            let coarse_snaps = trajectory_snapshots(&coarse_traj)?;
            let cwindow = middle_window(&coarse_snaps)?;
            let cv = coarse_cfg
                .potential_required()?
                .sample(coarse_traj.grid())?;
            let chj = hj_residual(cwindow, &cv, constants, QForm::Sqrt)?;
            let ccont = continuity_residual(cwindow, constants)?;
            let hj_order =
                madelung::order_estimate(chj.interior_masked_max_abs, hj.interior_masked_max_abs);
            let cont_order = madelung::order_estimate(
                ccont.interior_masked_max_abs,
                cont.interior_masked_max_abs,
            );
            hj = hj.with_order(hj_order);
            cont = cont.with_order(cont_order);
        }
    }
    summary.check(
        "hj_residual_max",
        hj.interior_masked_max_abs,
        1e-5,
        "acceptance-2: phase-equation residual",
    );
    summary.check(
        "continuity_residual_max",
        cont.interior_masked_max_abs,
        1e-5,
        "acceptance-2: continuity residual",
    );
    summary.check(
        "norm_drift",
        traj.norm_drift(),
        1e-8,
        "norm-preserving scheme contract",
    );
    summary.export_residual(&hj);
    summary.export_residual(&cont);
    Ok(summary)
}

fn transform_residuals(config: &ScenarioConfig) -> Result<Summary> {
    let mut summary = Summary::new(config.scenario);
    let traj = evolved_trajectory(config)?;
    let cc = config.constants_config();
    let constants = cc.constants();
    let k = cc.k();
    let snaps = trajectory_snapshots(&traj)?;
    let window = middle_window(&snaps)?;
    let v = config.potential_required()?.sample(traj.grid())?;

    // untransformed floor, matched log-family form
    let base_hj = hj_residual(window, &v, constants, QForm::Third)?;
    let base_cont = continuity_residual(window, constants)?;
    let floor = base_hj.interior_masked_max_abs + base_cont.interior_masked_max_abs;

    let fwd = transform_window(window, TransformSpec::forward(k))?;
    let ret = transform_window(window, TransformSpec::retro(k))?;
    let thj = transformed_hj_residual(&fwd, &v, constants)?;
    let tfp = fokker_planck_residual(&fwd, constants)?;
    summary.check(
        "transformed_hj_vs_floor",
        thj.interior_masked_max_abs,
        10.0 * floor,
        "acceptance-3: identity propagation <= 10x untransformed",
    );
    summary.check(
        "fokker_planck_vs_floor",
        tfp.interior_masked_max_abs,
        10.0 * floor,
        "acceptance-3: identity propagation <= 10x untransformed",
    );

    // exact algebraic cancellations
    let mask = &fwd.mask;
    let mid = &window[1];
    let round_trip = transform_phase(
        &transform_phase(&mid.phase, &mid.rho, mask, TransformSpec::forward(k))?,
        &mid.rho,
        mask,
        TransformSpec::retro(k),
    )?;
    let rt_err = mask.masked_max_abs(&round_trip.sub(&mid.phase));
    summary.check(
        "round_trip_exact",
        rt_err,
        1e-12,
        "acceptance-3: transform round trip",
    );
    let avg = nelson_average(&fwd, &ret)?;
    let avg_err = mask.masked_max_abs(&avg.sub(&mid.phase));
    summary.check(
        "nelson_average_exact",
        avg_err,
        1e-12,
        "acceptance-3: (S' + S'*)/2 = S",
    );
    let fp_f = fokker_planck_residual(&fwd, constants)?;
    let fp_r = fokker_planck_residual(&ret, constants)?;
    let cont = continuity_residual(window, constants)?;
    let pair_err = fp_f
        .residual
        .add(&fp_r.residual)
        .sub(&cont.residual.scale(2.0))
        .max_abs();
    summary.check(
        "fp_pair_cancellation",
        pair_err,
        1e-12,
        "acceptance-3: diffusion terms cancel",
    );

    summary.measure("untransformed_hj_max", base_hj.interior_masked_max_abs);
    summary.measure(
        "untransformed_continuity_max",
        base_cont.interior_masked_max_abs,
    );
    summary.export_residual(&thj);
    summary.export_residual(&tfp);
    Ok(summary)
}

/// Shared by the equivariance scenario and the acceptance suite: stochastic
/// ensemble under the transformed drift of a stationary state.
pub struct EquivarianceOutcome {
    pub max_distance: f64,
    pub statistical_floor: f64,
    pub distances: Vec<(f64, f64)>,
    pub frozen_total: usize,
    pub positions: Vec<f64>,
}

pub fn equivariance_run(
    psi0: &crate::lattice::ComplexField,
    constants: Constants,
    k: f64,
    n_particles: usize,
    bins: usize,
    dt: f64,
    horizon: f64,
    check_every: usize,
    master_seed: u64,
) -> Result<EquivarianceOutcome> {
    let m = madelung::MadelungFields::extract(psi0, constants)?;
    // transformed drift grad S'/m = (grad S + (k/2) grad log rho)/m
    let log_rho = madelung::log_masked(&m.rho, &m.mask);
    let grad_log = gradient(&log_rho);
    let drift = m
        .grad_s
        .add(&grad_log.scale(0.5 * k))
        .scale(1.0 / constants.mass);
    let mut ens = ParticleEnsemble::sample_from_density(&m.rho, n_particles, master_seed);
    let steps = (horizon / dt).round() as usize;
    let p = cell_masses(&m.rho, bins)?;
    let floor = histogram_statistical_floor(&p, n_particles);
    let mut distances = Vec::new();
    let mut frozen_total = 0usize;
    let d0 = ens.equivariance_distance(&m.rho, bins)?;
    distances.push((0.0, d0));
    for s in 1..=steps {
        ens.step_stochastic(&drift, &m.mask, k, constants.mass, dt);
        frozen_total += ens.frozen_last_step;
        if s % check_every == 0 || s == steps {
            let d = ens.equivariance_distance(&m.rho, bins)?;
            distances.push((s as f64 * dt, d));
        }
    }
    let max_distance = distances.iter().map(|&(_, d)| d).fold(0.0_f64, f64::max);
    Ok(EquivarianceOutcome {
        max_distance,
        statistical_floor: floor,
        distances,
        frozen_total,
        positions: ens.positions().to_vec(),
    })
}

fn equivariance(config: &ScenarioConfig) -> Result<Summary> {
    let mut summary = Summary::new(config.scenario);
    let grid = config.grid_required()?;
    let cc = config.constants_config();
    let constants = cc.constants();
    let time = config.time_required()?;
    let ens_cfg = config.ensemble.unwrap_or_default();
    let psi0 = initial_state(config.state_required()?, &grid, constants.hbar)?;
    let outcome = equivariance_run(
        &psi0,
        constants,
        cc.k(),
        ens_cfg.n_particles,
        ens_cfg.bins,
        time.dt,
        time.horizon,
        time.snapshot_every,
        config.seed_required()?,
    )?;
    summary.check(
        "equivariance_l1_max",
        outcome.max_distance,
        0.02,
        "acceptance-4: stochastic ensemble tracks the density",
    );
    summary.measure("statistical_floor", outcome.statistical_floor);
    summary.measure("distances", &outcome.distances);
    summary.measure("frozen_total", outcome.frozen_total);
    summary.ensemble_export = Some((
        "ensemble_final.csv".to_string(),
        outcome.positions,
        grid.ndim(),
    ));
    Ok(summary)
}

/// Shared delta-t sweep for the vanishing-expectation measurement.
pub struct VanishingOutcome {
    pub intercept: f64,
    pub slope: f64,
    pub oracle_base: f64,
    pub oracle_slope: f64,
    pub r_squared: f64,
    pub max_std_error: f64,
    pub divergence_integral: f64,
    pub paper_claim_value: f64,
    pub sweep: Vec<(f64, f64)>,
}

pub fn vanishing_expectation_run(
    grid: &Grid,
    k: f64,
    mass: f64,
    x0: f64,
    n_samples: usize,
    seed: u64,
) -> Result<VanishingOutcome> {
    use crate::lattice::laplacian;
    // test function f = x^4; its composed-stencil laplacian is the quadratic
    // 12 x^2 + 8 h^2, so the kernel average is exactly linear in dt:
    // E[g] = g(x0) + (k/m) (lap g / 2) dt = g(x0) + 12 (k/m) dt
    let f = ScalarField::from_fn(grid, |x, _| x.powi(4));
    let g = laplacian(&f);
    let mask = Mask::all_on(grid);
    let h = grid.spacing(0);
    let g0 = 12.0 * x0 * x0 + 8.0 * h * h;
    let sweep_dts = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1];
    let mut pts = Vec::new();
    let mut max_se = 0.0f64;
    for (i, &dt) in sweep_dts.iter().enumerate() {
        let kernel = KernelSpec {
            drift: [0.0; 2],
            k,
            mass,
            dt,
        };
        let rep =
            expectation_estimator(&g, &mask, &[x0], kernel, n_samples, seed ^ i as u64, None)?;
        max_se = max_se.max(rep.std_error);
        pts.push((dt, rep.mean));
    }
    // least-squares line through the sweep
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - sy / n) * (p.1 - sy / n)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|p| {
            let e = p.1 - (intercept + slope * p.0);
            e * e
        })
        .sum();
    let r_squared = 1.0 - ss_res / ss_tot;
    // the divergence-theorem route: integral of lap P vanishes, so the
    // claimed value f-weighted is also ~0
    let kernel = KernelSpec {
        drift: [0.0; 2],
        k,
        mass,
        dt: 1e-2,
    };
    let div_int = kernel_divergence_integral(&kernel, grid, &[x0])?;
    Ok(VanishingOutcome {
        intercept,
        slope,
        oracle_base: g0,
        oracle_slope: 12.0 * k / mass,
        r_squared,
        max_std_error: max_se,
        divergence_integral: div_int,
        paper_claim_value: g0 * div_int,
        sweep: pts,
    })
}

fn vanishing_expectations(config: &ScenarioConfig) -> Result<Summary> {
    let mut summary = Summary::new(config.scenario);
    let grid = config.grid_required()?;
    let cc = config.constants_config();
    let ens = config.ensemble.unwrap_or_default();
    let out = vanishing_expectation_run(
        &grid,
        cc.k(),
        cc.constants().mass,
        1.0,
        ens.n_particles,
        config.seed_required()?,
    )?;
    summary.check(
        "linear_fit_one_minus_r2",
        1.0 - out.r_squared,
        0.01,
        "acceptance-6: linear-in-dt Taylor behavior, R^2 >= 0.99",
    );
    summary.check(
        "intercept_matches_base_value",
        (out.intercept - out.oracle_base).abs(),
        5.0 * out.max_std_error + 1e-2,
        "acceptance-6: E[lap f] -> lap f(x0) as dt -> 0",
    );
    summary.check(
        "kernel_divergence_integral",
        out.divergence_integral.abs(),
        1e-8,
        "acceptance-5: discrete divergence theorem",
    );
    summary.measure("fitted_slope", out.slope);
    summary.measure("oracle_slope", out.oracle_slope);
    summary.measure("taylor_sweep", &out.sweep);
    summary.measure("near_zero_claim_value", out.paper_claim_value);
    summary.measure(
        "note",
        "the kernel average equals lap f(x0) + O(dt), while the divergence-theorem route \
         yields ~0; both are reported, neither is adjudicated",
    );
    Ok(summary)
}

fn backward_hjb(config: &ScenarioConfig) -> Result<Summary> {
    let mut summary = Summary::new(config.scenario);
    let traj = evolved_trajectory(config)?;
    let cc = config.constants_config();
    let constants = cc.constants();
    let ens = config.ensemble.unwrap_or_default();
    let snaps = trajectory_snapshots(&traj)?;
    let stages = transform_window(&snaps, TransformSpec::forward(cc.k()))?;
    let v = config.potential_required()?.sample(traj.grid())?;
    let seed = config.seed_required()?;
    let full = backward_value_propagation(
        &stages,
        &v,
        constants,
        BackwardScheme {
            mode: BackwardMode::FullDerivative,
            samples_per_site: ens.samples_per_site,
            master_seed: seed,
        },
    )?;
    let classical = backward_value_propagation(
        &stages,
        &v,
        constants,
        BackwardScheme {
            mode: BackwardMode::ClassicalOnly,
            samples_per_site: ens.samples_per_site,
            master_seed: seed,
        },
    )?;
    summary.check(
        "full_derivative_max_deviation",
        full.max_abs_deviation,
        backward_bound(&traj, ens.samples_per_site),
        "acceptance-7: bound pinned by the refinement study",
    );
    summary.measure("full_l2_deviation", full.l2_deviation);
    summary.measure("full_invalid_sites", full.invalid_sites);
    summary.measure("full_rejected_fraction", full.rejected_fraction);
    summary.measure("classical_only_max_deviation", classical.max_abs_deviation);
    summary.measure("classical_only_l2_deviation", classical.l2_deviation);
    summary.measure(
        "classical_vs_full_gap",
        classical.l2_deviation - full.l2_deviation,
    );
    summary.export_field("backward_deviation_full.csv", &full.deviation);
    summary.export_field("backward_deviation_classical.csv", &classical.deviation);

    // second-order residual and the kernel-averaged quantum-force measurement
    if stages.snaps.len() < 3 {
        return Ok(summary);
    }
    let mid = stages.snaps.len() / 2;
    let window3 = crate::transforms::TransformedWindow {
        spec: stages.spec,
        snaps: stages.snaps[mid - 1..mid + 2].to_vec(),
        mask: stages.mask.clone(),
    };
    let accel = hjb::stochastic_acceleration_residual(&window3, &v, constants)?;
    summary.measure("acceleration_residual_max", accel.interior_masked_max_abs);
    let gq = hjb::expected_grad_q(&window3, constants, 20_000, seed ^ 0xF00D)?;
    summary.measure("expected_grad_q", &gq);
    summary.measure(
        "note",
        "expected_grad_q reports the kernel average of the quantum force next to its          base value; the near-zero claim for it is a measurement, not an assertion",
    );
    Ok(summary)
}

/// Deviation bound from the refinement study: C (h^2 + dt + 1/sqrt(samples))
/// with C = 5 measured on the stationary-state family (see the acceptance
/// suite, which also re-verifies the dt order and the sample-count decay).
pub fn backward_bound(traj: &evolve::WavefunctionTrajectory, samples: usize) -> f64 {
    let h = traj.grid().spacing(0);
    let dt = traj.snapshots[1].0 - traj.snapshots[0].0;
    5.0 * (h * h + dt + 1.0 / (samples as f64).sqrt())
}

fn classical_transforms(config: &ScenarioConfig) -> Result<Summary> {
    let mut summary = Summary::new(config.scenario);
    let grid = config.grid_required()?;
    let cc = config.constants_config();
    let constants = cc.constants();
    let kc = cc.k_classical();
    let time = config.time_required()?;

    // deterministic pair drives cases 3/4; diffusive variants drive 1/2
    let sigma0 = grid.extent(0) / 10.0;
    let det = ClassicalFamily::UniformFlow {
        momentum: 0.5,
        sigma0,
        center0: 0.0,
        diffusion: FlowDiffusion::None,
    };
    let retro_in = ClassicalFamily::UniformFlow {
        momentum: 0.5,
        sigma0,
        center0: 0.0,
        diffusion: FlowDiffusion::Retro(kc),
    };
    let fwd_in = ClassicalFamily::UniformFlow {
        momentum: 0.5,
        sigma0,
        center0: 0.0,
        diffusion: FlowDiffusion::Forward(kc),
    };
    let v = det.potential_field(&grid, constants);
    let t0 = time.horizon.max(time.dt);
    let det_window = det.window(&grid, t0, time.dt, constants);

    for (case, fam) in [(1u8, &retro_in), (2, &fwd_in), (3, &det), (4, &det)] {
        let window = fam.window(&grid, t0, time.dt, constants);
        let out = classical_transform(&window, case, kc, &v, constants)?;
        if case >= 3 {
            summary.check(
                &format!("case{case}_hj_max"),
                out.hj_report.interior_masked_max_abs,
                1e-5,
                "acceptance-9: manufactured pair residual bound",
            );
            summary.check(
                &format!("case{case}_flow_max"),
                out.flow_report.interior_masked_max_abs,
                1e-5,
                "acceptance-9: manufactured pair residual bound",
            );
        } else {
            // diffusive-input cases close on the flow side; the phase side is
            // reported (the single-Q target does not follow for them)
            summary.check(
                &format!("case{case}_flow_max"),
                out.flow_report.interior_masked_max_abs,
                1e-5,
                "diffusive input transforms to deterministic continuity",
            );
            summary.measure(
                &format!("case{case}_hj_max"),
                out.hj_report.interior_masked_max_abs,
            );
        }
        summary.export_residual(&out.hj_report);
        summary.export_residual(&out.flow_report);
    }

    // mirror identity: case-3 and case-4 k-terms cancel pairwise
    let out3 = classical_transform(&det_window, 3, kc, &v, constants)?;
    let out4 = classical_transform(&det_window, 4, kc, &v, constants)?;
    let cont = continuity_residual(&det_window, constants)?;
    let mirror = out3
        .flow_report
        .residual
        .add(&out4.flow_report.residual)
        .sub(&cont.residual.scale(2.0))
        .max_abs();
    summary.check(
        "case4_mirrors_case3_flow",
        mirror,
        1e-12,
        "acceptance-9: sign-mirrored k-terms cancel at stencil level",
    );
    Ok(summary)
}

fn nelson(config: &ScenarioConfig) -> Result<Summary> {
    let mut summary = Summary::new(config.scenario);
    let grid = config.grid_required()?;
    let cc = config.constants_config();
    let constants = cc.constants();
    let k = cc.k();
    let traj = evolved_trajectory(config)?;
    let snaps = trajectory_snapshots(&traj)?;
    let window = middle_window(&snaps)?;
    let v = config.potential_required()?.sample(&grid)?;
    let fwd = transform_window(window, TransformSpec::forward(k))?;
    let ret = transform_window(window, TransformSpec::retro(k))?;
    let avg = nelson_average(&fwd, &ret)?;
    let avg_err = fwd.mask.masked_max_abs(&avg.sub(&window[1].phase));
    summary.check(
        "average_recovers_phase",
        avg_err,
        1e-12,
        "log-density halves cancel",
    );
    let rep = nelson_residuals(&fwd, &ret, &v, constants)?;
    let cont = continuity_residual(window, constants)?;
    let fp_identity = rep.averaged_fp.residual.sub(&cont.residual).max_abs();
    summary.check(
        "averaged_fp_equals_continuity",
        fp_identity,
        1e-12,
        "diffusion terms cancel pairwise",
    );
    summary.check(
        "bohm_acceleration_max",
        rep.acceleration_max_abs,
        1e-6,
        "stationary state: grad(Q + V) = 0",
    );
    summary.measure("averaged_hj_max", rep.averaged_hj.interior_masked_max_abs);
    summary.export_residual(&rep.averaged_fp);
    summary.export_residual(&rep.averaged_hj);
    Ok(summary)
}

fn half_q_duality(config: &ScenarioConfig) -> Result<Summary> {
    let mut summary = Summary::new(config.scenario);
    let traj = evolved_trajectory(config)?;
    let cc = config.constants_config();
    let constants = cc.constants();
    let snaps = trajectory_snapshots(&traj)?;
    let window = middle_window(&snaps)?;
    let v = config.potential_required()?.sample(traj.grid())?;
    let rep = half_q_duality_check(window, &v, constants)?;
    // predicted: classical-side residual norm tracks the norm of Q
    let rel = (rep.classical_hj_l2 - rep.q_l2).abs() / rep.q_l2.max(1e-300);
    summary.check(
        "classical_residual_tracks_q_l2",
        rel,
        0.05,
        "acceptance-9: classical side equals masked norm of Q within 5%",
    );
    summary.measure("duality_report", &rep);
    Ok(summary)
}

fn dp_solvers(config: &ScenarioConfig) -> Result<Summary> {
    let mut summary = Summary::new(config.scenario);
    let dp = config.dp.clone().unwrap_or_default();
    let seed = config.seed_required()?;

    if let Some(path) = &dp.mdp_path {
        let mdp = hjb::read_mdp_json(path)?;
        let vi = value_iteration(&mdp)?;
        let pi = policy_iteration(&mdp, Improvement::ExactGreedy)?;
        let gap = max_gap(&vi.values, &pi.values);
        summary.check(
            "vi_pi_value_gap",
            gap,
            1e-8,
            "acceptance-8: solver agreement",
        );
        summary.measure("values", &vi.values);
        summary.measure("policy", &vi.policy);
        return Ok(summary);
    }

    let mut max_value_gap = 0.0f64;
    let mut policy_mismatches = 0usize;
    let mut max_contraction_excess = 0.0f64;
    let mut max_randomized_gap = 0.0f64;
    for i in 0..dp.n_mdps {
        let mdp = hjb::mdp::random_mdp(dp.states, dp.actions, dp.discount, seed ^ (i as u64) << 8);
        let vi = value_iteration(&mdp)?;
        let pi = policy_iteration(&mdp, Improvement::ExactGreedy)?;
        max_value_gap = max_value_gap.max(max_gap(&vi.values, &pi.values));
        if vi.policy != pi.policy {
            policy_mismatches += 1;
        }
        for w in vi.sup_norm_history.windows(2) {
            if w[0] > 1e-12 && w[1] > 1e-12 {
                max_contraction_excess = max_contraction_excess.max(w[1] - dp.discount * w[0]);
            }
        }
        let rand = policy_iteration(
            &mdp,
            Improvement::RandomizedAcceptReject {
                seed: seed ^ 0xABCD ^ i as u64,
                proposals_per_state: dp.proposals_per_state,
            },
        )?;
        max_randomized_gap = max_randomized_gap.max(max_gap(&vi.values, &rand.values));
    }
    summary.check(
        "vi_pi_value_gap",
        max_value_gap,
        1e-8,
        "acceptance-8: solver agreement",
    );
    summary.check(
        "identical_greedy_policies",
        policy_mismatches as f64,
        0.0,
        "acceptance-8: identical greedy policies",
    );
    summary.check(
        "contraction_excess",
        max_contraction_excess,
        1e-12,
        "acceptance-8: gamma-contraction of value iteration",
    );
    summary.check(
        "randomized_accept_reject_gap",
        max_randomized_gap,
        1e-8,
        "acceptance-8: randomized improvement reaches the optimum",
    );

    // exhaustive enumeration oracle on small instances
    let mut max_enum_gap = 0.0f64;
    for i in 0..5 {
        let mdp = hjb::mdp::random_mdp(5, 3, dp.discount, seed ^ 0x5EED ^ i);
        let vi = value_iteration(&mdp)?;
        let mut best = vec![f64::NEG_INFINITY; 5];
        for code in 0..3usize.pow(5) {
            let mut c = code;
            let policy: Vec<usize> = (0..5)
                .map(|_| {
                    let a = c % 3;
                    c /= 3;
                    a
                })
                .collect();
            let v = mdp.evaluate_policy(&policy)?;
            for s in 0..5 {
                best[s] = best[s].max(v[s]);
            }
        }
        max_enum_gap = max_enum_gap.max(max_gap(&vi.values, &best));
    }
    summary.check(
        "exhaustive_enumeration_gap",
        max_enum_gap,
        1e-8,
        "acceptance-8: exact match with policy enumeration",
    );
    Ok(summary)
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0_f64, f64::max)
}

fn sub_ensemble_demo(config: &ScenarioConfig) -> Result<Summary> {
    use nalgebra::DVector;
    let mut summary = Summary::new(config.scenario);
    let seed = config.seed_required()?;
    let n = 8;
    let t = doubly_stochastic_matrix(n, seed);
    let state = SubEnsembleState {
        transition: t,
        positions: DVector::from_fn(n, |i, _| (i as f64 * 0.37).sin()),
        velocities: DVector::from_fn(n, |i, _| (i as f64 * 0.11).cos()),
        accelerations: DVector::from_fn(n, |i, _| 0.1 * i as f64),
    };
    let dt = 0.05;
    let cond = state.condition_number();
    // forward three steps, then roll back three steps
    let mut fwd = state.clone();
    for _ in 0..3 {
        fwd = hjb::subensemble_forward_step(&fwd, dt)?;
    }
    let mut back = fwd.clone();
    for _ in 0..3 {
        back = hjb::subensemble_backward_step(&back, dt)?.0;
    }
    let x_err = (&back.positions - &state.positions).abs().max();
    let v_err = (&back.velocities - &state.velocities).abs().max();
    summary.check(
        "round_trip_positions",
        x_err,
        1e-10,
        "matrix-form rollback identity",
    );
    summary.check(
        "round_trip_velocities",
        v_err,
        1e-10,
        "matrix-form rollback identity",
    );
    summary.measure("condition_number", cond);
    summary.measure("states", n);
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_assertion_bookkeeping() {
        let mut s = Summary::new(Scenario::EvolveOnly);
        assert!(s.check("a", 0.5, 1.0, "test"));
        assert!(!s.check("b", 2.0, 1.0, "test"));
        assert!(!s.all_assertions_pass());
        assert_eq!(s.table_lines().len(), 2);
    }
}
