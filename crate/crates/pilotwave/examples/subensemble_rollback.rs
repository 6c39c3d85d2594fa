//! Matrix-form backward update of a sub-ensemble:
//! `cargo run --release --example subensemble_rollback`
//!
//! Positions and velocities advance through a row-stochastic transition
//! matrix and roll back exactly through its inverse (condition number
//! permitting). Updating both with the same matrix is what avoids the
//! closed-loop problem of updating them sequentially.

use nalgebra::DVector;
use pilotwave::hjb::{
    doubly_stochastic_matrix, subensemble_backward_step, subensemble_forward_step, SubEnsembleState,
};

fn main() -> pilotwave::Result<()> {
    let n = 8;
    let state = SubEnsembleState {
        transition: doubly_stochastic_matrix(n, 7),
        positions: DVector::from_fn(n, |i, _| (i as f64 * 0.37).sin()),
        velocities: DVector::from_fn(n, |i, _| (i as f64 * 0.11).cos()),
        accelerations: DVector::from_fn(n, |i, _| 0.1 * i as f64),
    };
    println!("condition number of T: {:.3}", state.condition_number());

    let dt = 0.05;
    let mut forward = state.clone();
    for _ in 0..5 {
        forward = subensemble_forward_step(&forward, dt)?;
    }
    let mut back = forward.clone();
    for _ in 0..5 {
        back = subensemble_backward_step(&back, dt)?.0;
    }
    let x_err = (&back.positions - &state.positions).abs().max();
    let v_err = (&back.velocities - &state.velocities).abs().max();
    println!("rollback error after 5 steps: positions {x_err:.3e}, velocities {v_err:.3e}");

    // an ill-conditioned matrix is rejected with a report
    let mut bad = state.clone();
    for r in 0..n {
        for c in 0..n {
            bad.transition[(r, c)] = 1.0 / n as f64; // singular: rank one
        }
    }
    match subensemble_backward_step(&bad, dt) {
        Err(e) => println!("uniform (rank-one) transition rejected: {e}"),
        Ok(_) => println!("unexpected: singular matrix accepted"),
    }
    Ok(())
}
