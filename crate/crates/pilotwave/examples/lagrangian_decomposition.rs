//! Split the classical Lagrangian of a two-particle system into free and
//! interaction parts: `cargo run --release --example lagrangian_decomposition`

use pilotwave::evolve::{initial_state, Constants, Potential, StateSpec};
use pilotwave::hjb::{classical_lagrangian, lagrangian_decomposition};
use pilotwave::lattice::{Boundary, Grid};
use pilotwave::madelung::MadelungFields;
use pilotwave::transforms::{transform_window, TransformSpec};

fn main() -> pilotwave::Result<()> {
    let grid = Grid::centered_2d(48, 16.0, Boundary::Clamped)?;
    let constants = Constants::natural();
    let spec = StateSpec::ProductOfTwo {
        first: Box::new(StateSpec::GaussianPacket {
            center: -1.0,
            width: 1.2,
            k: 0.4,
        }),
        second: Box::new(StateSpec::GaussianPacket {
            center: 1.0,
            width: 0.9,
            k: -0.2,
        }),
    };
    let psi = initial_state(&spec, &grid, constants.hbar)?;
    let m = MadelungFields::extract(&psi, constants)?;
    let snap = pilotwave::madelung::PhaseDensitySnapshot {
        time: 0.0,
        rho: m.rho.clone(),
        phase: m.s.clone(),
        grad_s: Some(m.grad_s.clone()),
    };
    let window = vec![snap.clone(), snap.clone(), snap];
    let tw = transform_window(&window, TransformSpec::forward(constants.hbar))?;

    for coupling in [0.0, 0.4] {
        let potential = Potential::CoupledPair {
            single: Box::new(Potential::Harmonic {
                mass: 1.0,
                omega: 1.0,
                center: 0.0,
            }),
            coupling,
        };
        let vf = potential.sample(&grid)?;
        let total = classical_lagrangian(&tw.snaps[1].grad_s_prime, &vf, constants.mass);
        let dec =
            lagrangian_decomposition(&tw.snaps[1].grad_s_prime, &potential, &grid, constants)?;
        let recomposed = dec.free_1.add(&dec.free_2).add(&dec.interaction);
        println!("coupling g = {coupling}:");
        println!("  max |L_c|            = {:.4}", total.max_abs());
        println!("  max |L_int|          = {:.4}", dec.interaction.max_abs());
        println!(
            "  decomposition defect = {:.3e}",
            recomposed.sub(&total).max_abs()
        );
    }
    Ok(())
}
