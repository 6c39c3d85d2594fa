//! The four classical transformation cases on an exact uniform-flow pair:
//! `cargo run --release --example classical_transforms`
//!
//! Cases 3/4 start from a deterministic classical pair and land on
//! quantum-like equations with a single quantum potential; cases 1/2 start
//! from diffusive classical pairs and land back on deterministic continuity.

use pilotwave::evolve::Constants;
use pilotwave::lattice::{Boundary, Grid};
use pilotwave::transforms::{classical_transform, ClassicalFamily, FlowDiffusion};

fn main() -> pilotwave::Result<()> {
    let grid = Grid::centered_1d(512, 120.0, Boundary::Clamped)?;
    let constants = Constants::natural();
    let k = constants.hbar;
    let sigma0 = 12.0;

    let families = [
        (1u8, "retro-diffusive input ", FlowDiffusion::Retro(k)),
        (2, "forward-diffusive input", FlowDiffusion::Forward(k)),
        (3, "deterministic input    ", FlowDiffusion::None),
        (4, "deterministic input    ", FlowDiffusion::None),
    ];
    println!("case  input                     phase-side max   flow-side max");
    for (case, label, diffusion) in families {
        let fam = ClassicalFamily::UniformFlow {
            momentum: 0.5,
            sigma0,
            center0: 0.0,
            diffusion,
        };
        let window = fam.window(&grid, 0.1, 1e-3, constants);
        let v = fam.potential_field(&grid, constants);
        let out = classical_transform(&window, case, k, &v, constants)?;
        println!(
            "  {case}   {label}   {:.6e}     {:.6e}",
            out.hj_report.interior_masked_max_abs, out.flow_report.interior_masked_max_abs
        );
    }
    println!();
    println!("the harmonic classical flow works too (within its focusing window):");
    let fam = ClassicalFamily::HarmonicFlow {
        omega: 0.05,
        a0: 0.2,
        x0: 1.0,
        sigma0: 14.0,
    };
    let grid = Grid::centered_1d(512, 160.0, Boundary::Clamped)?;
    let window = fam.window(&grid, 0.5, 1e-3, constants);
    let v = fam.potential_field(&grid, constants);
    let out = classical_transform(&window, 3, constants.hbar, &v, constants)?;
    println!(
        "  3   harmonic flow             {:.6e}     {:.6e}",
        out.hj_report.interior_masked_max_abs, out.flow_report.interior_masked_max_abs
    );
    Ok(())
}
