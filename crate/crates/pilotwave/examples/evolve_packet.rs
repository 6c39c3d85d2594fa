//! Evolve a Gaussian packet in a harmonic trap and watch the conserved
//! quantities: `cargo run --release --example evolve_packet`

use pilotwave::evolve::{
    energy_expectation, evolve, initial_state, Constants, Potential, StateSpec,
};
use pilotwave::lattice::{Boundary, Grid};

fn main() -> pilotwave::Result<()> {
    let grid = Grid::centered_1d(512, 30.0, Boundary::Clamped)?;
    let constants = Constants::natural();
    let psi0 = initial_state(
        &StateSpec::GaussianPacket {
            center: -3.0,
            width: 1.0,
            k: 1.0,
        },
        &grid,
        constants.hbar,
    )?;
    let potential = Potential::Harmonic {
        mass: 1.0,
        omega: 0.5,
        center: 0.0,
    };
    let vf = potential.sample(&grid)?;

    let traj = evolve(&psi0, &potential, constants, 12.0, 0.005, 300)?;
    println!("time      norm            energy");
    for (t, psi) in &traj.snapshots {
        println!(
            "{t:8.3}  {:.12}  {:.10}",
            psi.l2_norm(),
            energy_expectation(psi, vf.values(), constants)
        );
    }
    println!("norm drift over the run: {:.3e}", traj.norm_drift());
    Ok(())
}
