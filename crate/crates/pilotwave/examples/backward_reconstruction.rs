//! Reconstruct the transformed phase by backward induction over kernel
//! expectations: `cargo run --release --example backward_reconstruction`
//!
//! The full-derivative source includes the doubled quantum potential; the
//! classical-only variant drops it (and the final subtraction entirely),
//! betting on the near-zero kernel average of Q. Both deviations from the
//! stored forward phase are printed side by side.

use pilotwave::evolve::{evolve, initial_state, Constants, Potential, StateSpec};
use pilotwave::hjb::{backward_value_propagation, BackwardMode, BackwardScheme};
use pilotwave::lattice::{Boundary, Grid};
use pilotwave::madelung::trajectory_snapshots;
use pilotwave::transforms::{transform_window, TransformSpec};

fn main() -> pilotwave::Result<()> {
    let omega: f64 = 0.05;
    let grid = Grid::centered_1d(512, 2.0 * 4.8 / omega.sqrt(), Boundary::Clamped)?;
    let constants = Constants::natural();
    let psi0 = initial_state(
        &StateSpec::HarmonicGroundState { mass: 1.0, omega },
        &grid,
        constants.hbar,
    )?;
    let potential = Potential::Harmonic {
        mass: 1.0,
        omega,
        center: 0.0,
    };
    let dt = 0.1;
    let traj = evolve(&psi0, &potential, constants, 10.0 * dt, dt, 1)?;
    let snaps = trajectory_snapshots(&traj)?;
    let stages = transform_window(&snaps, TransformSpec::forward(constants.hbar))?;
    let v = potential.sample(&grid)?;

    for (label, mode) in [
        ("full derivative", BackwardMode::FullDerivative),
        ("classical only ", BackwardMode::ClassicalOnly),
    ] {
        let rep = backward_value_propagation(
            &stages,
            &v,
            constants,
            BackwardScheme {
                mode,
                samples_per_site: 512,
                master_seed: 99,
            },
        )?;
        println!(
            "{label}: max deviation {:.4e}, rms {:.4e}, invalid sites {}, rejected {:.2}%",
            rep.max_abs_deviation,
            rep.l2_deviation,
            rep.invalid_sites,
            100.0 * rep.rejected_fraction
        );
    }
    println!("(the classical-only gap is a reported measurement, not an error)");
    Ok(())
}
