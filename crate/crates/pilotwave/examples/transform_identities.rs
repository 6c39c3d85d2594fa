//! The log-density phase transformation and its exact cancellations:
//! `cargo run --release --example transform_identities`
//!
//! Forward transform: continuity becomes drift-diffusion and the phase
//! equation picks up a doubled quantum potential. Forward + retro recombine
//! exactly: the added terms are linear in the half log-density.

use pilotwave::evolve::{evolve, initial_state, Constants, Potential, StateSpec};
use pilotwave::lattice::{Boundary, Grid};
use pilotwave::madelung::{continuity_residual, hj_residual, trajectory_snapshots, QForm};
use pilotwave::transforms::{
    fokker_planck_residual, nelson_average, transform_window, transformed_hj_residual,
    TransformSpec,
};

fn main() -> pilotwave::Result<()> {
    let omega: f64 = 3e-4;
    let grid = Grid::centered_1d(512, 2.0 * 6.5 / omega.sqrt(), Boundary::Clamped)?;
    let constants = Constants::natural();
    let k = constants.hbar;
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
    let traj = evolve(&psi0, &potential, constants, 100.0, 0.5, 100)?;
    let snaps = trajectory_snapshots(&traj)?;
    let mid = snaps.len() / 2;
    let window = &snaps[mid - 1..mid + 2];
    let v = potential.sample(&grid)?;

    let base_hj = hj_residual(window, &v, constants, QForm::Third)?;
    let base_cont = continuity_residual(window, constants)?;
    println!(
        "untransformed floor: phase {:.3e}, continuity {:.3e}",
        base_hj.interior_masked_max_abs, base_cont.interior_masked_max_abs
    );

    let fwd = transform_window(window, TransformSpec::forward(k))?;
    let ret = transform_window(window, TransformSpec::retro(k))?;
    let thj = transformed_hj_residual(&fwd, &v, constants)?;
    let tfp = fokker_planck_residual(&fwd, constants)?;
    println!(
        "transformed:         phase {:.3e}, fokker-planck {:.3e}",
        thj.interior_masked_max_abs, tfp.interior_masked_max_abs
    );

    // exact recombinations
    let avg = nelson_average(&fwd, &ret)?;
    let avg_err = fwd.mask.masked_max_abs(&avg.sub(&window[1].phase));
    let fp_r = fokker_planck_residual(&ret, constants)?;
    let pair = tfp
        .residual
        .add(&fp_r.residual)
        .sub(&base_cont.residual.scale(2.0))
        .max_abs();
    println!("(S' + S'*)/2 - S           = {avg_err:.3e}");
    println!("fp(fwd) + fp(retro) - 2 cont = {pair:.3e}");
    Ok(())
}
