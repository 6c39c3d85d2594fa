//! A stochastic ensemble guided by the transformed drift keeps the quantum
//! density: `cargo run --release --example equivariance`

use pilotwave::cli::scenarios::equivariance_run;
use pilotwave::evolve::{initial_state, Constants, StateSpec};
use pilotwave::lattice::{Boundary, Grid};

fn main() -> pilotwave::Result<()> {
    let grid = Grid::centered_1d(512, 12.0, Boundary::Clamped)?;
    let constants = Constants::natural();
    let psi0 = initial_state(
        &StateSpec::HarmonicGroundState {
            mass: 1.0,
            omega: 1.0,
        },
        &grid,
        constants.hbar,
    )?;
    let periods = 5.0;
    let horizon = periods * 2.0 * std::f64::consts::PI;
    let outcome = equivariance_run(
        &psi0,
        constants,
        constants.hbar, // diffusion constant k = hbar
        100_000,
        64,
        0.005,
        horizon,
        1257, // check roughly once per period
        424242,
    )?;
    println!("time        L1 distance (64 bins, 1e5 particles)");
    for (t, d) in &outcome.distances {
        println!("{t:9.3}   {d:.5}");
    }
    println!("statistical floor ~ {:.5}", outcome.statistical_floor);
    println!("max distance       {:.5}", outcome.max_distance);
    println!("frozen particle events: {}", outcome.frozen_total);
    Ok(())
}
