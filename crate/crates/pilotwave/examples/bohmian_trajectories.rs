//! Deterministic pilot-wave trajectories in a coupled two-particle system:
//! `cargo run --release --example bohmian_trajectories`
//!
//! Particles ride the guidance velocity extracted from an entangling 2D
//! configuration-space wavefunction; a handful of trajectories are printed as
//! (x1, x2) pairs over time.

use pilotwave::evolve::{evolve, initial_state, Constants, Potential, StateSpec};
use pilotwave::lattice::{Boundary, Grid};
use pilotwave::madelung::MadelungFields;
use pilotwave::particles::ParticleEnsemble;

fn main() -> pilotwave::Result<()> {
    let grid = Grid::centered_2d(64, 16.0, Boundary::Clamped)?;
    let constants = Constants::natural();
    let spec = StateSpec::ProductOfTwo {
        first: Box::new(StateSpec::GaussianPacket {
            center: -1.5,
            width: 1.0,
            k: 0.6,
        }),
        second: Box::new(StateSpec::GaussianPacket {
            center: 1.5,
            width: 1.0,
            k: -0.6,
        }),
    };
    let psi0 = initial_state(&spec, &grid, constants.hbar)?;
    let potential = Potential::CoupledPair {
        single: Box::new(Potential::Harmonic {
            mass: 1.0,
            omega: 1.0,
            center: 0.0,
        }),
        coupling: 0.3,
    };
    let traj = evolve(&psi0, &potential, constants, 2.0, 0.005, 40)?;

    // a few particles started on the diagonal
    let starts: Vec<f64> = (0..5)
        .flat_map(|i| {
            let u = -2.0 + i as f64;
            [u - 1.5, u + 1.5]
        })
        .collect();
    let mut ens = ParticleEnsemble::from_positions(&grid, starts, 1);
    println!("time     (x1, x2) per trajectory");
    for window in traj.snapshots.windows(2) {
        let (t0, psi) = &window[0];
        let (t1, _) = &window[1];
        let m = MadelungFields::extract(psi, constants)?;
        let velocity = m.grad_s.scale(1.0 / constants.mass);
        // guidance step across the snapshot gap
        ens.step_deterministic(&velocity, &m.mask, t1 - t0);
        let coords: Vec<String> = (0..ens.len())
            .map(|i| {
                let p = ens.position(i);
                format!("({:6.3}, {:6.3})", p[0], p[1])
            })
            .collect();
        println!("{t1:6.3}  {}", coords.join(" "));
    }
    println!(
        "frozen particles in the last step: {}",
        ens.frozen_last_step
    );
    Ok(())
}
