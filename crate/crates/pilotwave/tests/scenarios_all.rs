//! Every scenario runs end to end at small scale and passes its own
//! assertions.

use pilotwave::cli::scenarios::run_scenario;
use pilotwave::cli::{
    ConstantsConfig, EnsembleConfig, GridConfig, Scenario, ScenarioConfig, TimeConfig,
};
use pilotwave::evolve::{Potential, StateSpec};
use pilotwave::lattice::Boundary;

fn base(scenario: Scenario) -> ScenarioConfig {
    let omega = 3e-4;
    ScenarioConfig {
        scenario,
        output_dir: None,
        master_seed: Some(11),
        threads: None,
        grid: Some(GridConfig {
            ndim: 1,
            points: 512,
            extent: 2.0 * 6.5 / (omega as f64).sqrt(),
            boundary: Boundary::Clamped,
            origin: None,
        }),
        potential: Some(Potential::Harmonic {
            mass: 1.0,
            omega,
            center: 0.0,
        }),
        state: Some(StateSpec::HarmonicGroundState { mass: 1.0, omega }),
        constants: Some(ConstantsConfig::default()),
        time: Some(TimeConfig {
            dt: 0.5,
            horizon: 50.0,
            snapshot_every: 50,
        }),
        ensemble: None,
        dp: None,
    }
}

fn assert_pass(config: &ScenarioConfig) {
    let summary = run_scenario(config).unwrap();
    for (name, a) in &summary.assertions {
        assert!(
            a.pass,
            "{:?}::{name}: {} > {}",
            config.scenario, a.value, a.bound
        );
    }
}

#[test]
fn madelung_and_transform_scenarios() {
    assert_pass(&base(Scenario::MadelungResiduals));
    assert_pass(&base(Scenario::TransformResiduals));
}

#[test]
fn nelson_scenario() {
    let omega = 0.01;
    let mut config = base(Scenario::Nelson);
    config.grid = Some(GridConfig {
        ndim: 1,
        points: 8192,
        extent: 2.0 * 6.5 / (omega as f64).sqrt(),
        boundary: Boundary::Clamped,
        origin: None,
    });
    config.potential = Some(Potential::Harmonic {
        mass: 1.0,
        omega,
        center: 0.0,
    });
    config.state = Some(StateSpec::HarmonicGroundState { mass: 1.0, omega });
    config.time = Some(TimeConfig {
        dt: 0.1,
        horizon: 10.0,
        snapshot_every: 50,
    });
    assert_pass(&config);
}

#[test]
fn backward_hjb_scenario() {
    let omega = 0.05;
    let mut config = base(Scenario::BackwardHjb);
    config.grid = Some(GridConfig {
        ndim: 1,
        points: 512,
        extent: 2.0 * 4.8 / (omega as f64).sqrt(),
        boundary: Boundary::Clamped,
        origin: None,
    });
    config.potential = Some(Potential::Harmonic {
        mass: 1.0,
        omega,
        center: 0.0,
    });
    config.state = Some(StateSpec::HarmonicGroundState { mass: 1.0, omega });
    config.time = Some(TimeConfig {
        dt: 0.1,
        horizon: 1.0,
        snapshot_every: 1,
    });
    assert_pass(&config);
}

#[test]
fn half_q_duality_scenario() {
    let mut config = base(Scenario::HalfQDuality);
    config.grid = Some(GridConfig {
        ndim: 1,
        points: 1024,
        extent: 24.0,
        boundary: Boundary::Clamped,
        origin: None,
    });
    config.potential = Some(Potential::Harmonic {
        mass: 1.0,
        omega: 1.0,
        center: 0.0,
    });
    config.state = Some(StateSpec::HarmonicGroundState {
        mass: 1.0,
        omega: 1.0,
    });
    config.time = Some(TimeConfig {
        dt: 0.002,
        horizon: 0.2,
        snapshot_every: 50,
    });
    assert_pass(&config);
}

#[test]
fn classical_transforms_scenario() {
    let mut config = base(Scenario::ClassicalTransforms);
    config.grid = Some(GridConfig {
        ndim: 1,
        points: 512,
        extent: 120.0,
        boundary: Boundary::Clamped,
        origin: None,
    });
    config.time = Some(TimeConfig {
        dt: 1e-3,
        horizon: 0.1,
        snapshot_every: 1,
    });
    assert_pass(&config);
}

#[test]
fn sub_ensemble_scenario() {
    assert_pass(&base(Scenario::SubEnsembleDemo));
}

#[test]
fn vanishing_expectations_scenario_small() {
    let mut config = base(Scenario::VanishingExpectations);
    config.grid = Some(GridConfig {
        ndim: 1,
        points: 512,
        extent: 24.0,
        boundary: Boundary::Clamped,
        origin: None,
    });
    config.ensemble = Some(EnsembleConfig {
        n_particles: 200_000,
        bins: 64,
        samples_per_site: 256,
    });
    assert_pass(&config);
}
