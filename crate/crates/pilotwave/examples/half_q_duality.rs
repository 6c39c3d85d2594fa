//! Half-quantum-potential duality report:
//! `cargo run --release --example half_q_duality`
//!
//! For genuine quantum input, the acceleration equation needs the doubled
//! quantum force, and back-transforming to the classical phase equation
//! leaves a residual whose norm equals the norm of Q. For a classically
//! transformed pair the situation flips: the halved quantum force wins and
//! the classical side vanishes. The report shows both regimes.

use pilotwave::evolve::{evolve, initial_state, Constants, Potential, StateSpec};
use pilotwave::lattice::{Boundary, Grid};
use pilotwave::madelung::trajectory_snapshots;
use pilotwave::transforms::{half_q_duality_check, ClassicalFamily, FlowDiffusion};

fn main() -> pilotwave::Result<()> {
    let constants = Constants::natural();

    // quantum input: evolved harmonic ground state
    let grid = Grid::centered_1d(1024, 24.0, Boundary::Clamped)?;
    let psi0 = initial_state(
        &StateSpec::HarmonicGroundState {
            mass: 1.0,
            omega: 1.0,
        },
        &grid,
        constants.hbar,
    )?;
    let potential = Potential::Harmonic {
        mass: 1.0,
        omega: 1.0,
        center: 0.0,
    };
    let traj = evolve(&psi0, &potential, constants, 0.2, 0.002, 50)?;
    let snaps = trajectory_snapshots(&traj)?;
    let mid = snaps.len() / 2;
    let v = potential.sample(&grid)?;
    let rep = half_q_duality_check(&snaps[mid - 1..mid + 2], &v, constants)?;
    println!("quantum input (ground state):");
    println!("  full-Q acceleration residual  {:.4e}", rep.full_q_l2);
    println!("  half-Q acceleration residual  {:.4e}", rep.half_q_l2);
    println!(
        "  classical-side phase residual {:.4e}",
        rep.classical_hj_l2
    );
    println!("  norm of Q (predicted match)   {:.4e}", rep.q_l2);
    println!(
        "  classical continuity residual {:.4e}",
        rep.classical_continuity_l2
    );

    // manufactured classically-transformed pair: the mirror regime
    let grid = Grid::centered_1d(512, 120.0, Boundary::Clamped)?;
    let fam = ClassicalFamily::UniformFlow {
        momentum: 0.5,
        sigma0: 12.0,
        center0: 0.0,
        diffusion: FlowDiffusion::None,
    };
    let window = fam.window(&grid, 0.1, 1e-3, constants);
    let v = fam.potential_field(&grid, constants);
    let rep = half_q_duality_check(&window, &v, constants)?;
    println!("manufactured classical pair:");
    println!("  full-Q acceleration residual  {:.4e}", rep.full_q_l2);
    println!(
        "  half-Q acceleration residual  {:.4e}  (the single-Q law holds)",
        rep.half_q_l2
    );
    println!(
        "  classical-side phase residual {:.4e}  (vanishes)",
        rep.classical_hj_l2
    );
    Ok(())
}
