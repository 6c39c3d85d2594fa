//! Extract hydrodynamic fields from an evolved wavefunction and measure the
//! phase and continuity equations as interior-masked residuals:
//! `cargo run --release --example madelung_residuals`

use pilotwave::evolve::{evolve, initial_state, Constants, Potential, StateSpec};
use pilotwave::lattice::{Boundary, Grid};
use pilotwave::madelung::{continuity_residual, hj_residual, trajectory_snapshots, QForm};

fn main() -> pilotwave::Result<()> {
    let omega: f64 = 3e-4; // soft trap keeps the density tail resolvable
    let grid = Grid::centered_1d(512, 2.0 * 6.5 / omega.sqrt(), Boundary::Clamped)?;
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
    let traj = evolve(&psi0, &potential, constants, 500.0, 0.5, 500)?;
    println!(
        "evolved {} steps, norm drift {:.2e}",
        1000,
        traj.norm_drift()
    );

    let snaps = trajectory_snapshots(&traj)?;
    let mid = snaps.len() / 2;
    let window = &snaps[mid - 1..mid + 2];
    let v = potential.sample(&grid)?;
    let hj = hj_residual(window, &v, constants, QForm::Sqrt)?;
    let cont = continuity_residual(window, constants)?;
    println!(
        "phase-equation residual: max {:.3e}, rms {:.3e} over {} sites",
        hj.interior_masked_max_abs, hj.interior_masked_l2, hj.sites_used
    );
    println!(
        "continuity residual:     max {:.3e}, rms {:.3e}",
        cont.interior_masked_max_abs, cont.interior_masked_l2
    );
    Ok(())
}
