//! The three quantum-potential discretizations agree at second order:
//! `cargo run --release --example quantum_potential_forms`

use pilotwave::evolve::Constants;
use pilotwave::lattice::{integrate, Boundary, Grid, Mask, ScalarField};
use pilotwave::madelung::{order_estimate, quantum_potential, QForm, DEFAULT_EPS_RHO, EDGE_BAND};

fn main() -> pilotwave::Result<()> {
    let constants = Constants::natural();
    let a: f64 = 0.2; // rho ~ exp(-a x^2)
    let mut last: Option<(f64, f64)> = None;
    for n in [128usize, 256, 512, 1024] {
        let grid = Grid::centered_1d(n, 2.0 * 0.8 / a.sqrt(), Boundary::Clamped)?;
        let rho0 = ScalarField::from_fn(&grid, |x, _| (-a * x * x).exp());
        let rho = rho0.scale(1.0 / integrate(&rho0));
        let mask = Mask::density_support(&rho, DEFAULT_EPS_RHO);
        let interior = mask.interior(EDGE_BAND);
        let q_sqrt = quantum_potential(&rho, QForm::Sqrt, &mask, constants)?;
        let q_loggrad = quantum_potential(&rho, QForm::LogGrad, &mask, constants)?;
        let q_third = quantum_potential(&rho, QForm::Third, &mask, constants)?;
        let d1 = interior.masked_max_abs(&q_sqrt.sub(&q_loggrad));
        let d2 = interior.masked_max_abs(&q_sqrt.sub(&q_third));
        print!("n = {n:4}: |sqrt - loggrad| = {d1:.3e}, |sqrt - third| = {d2:.3e}");
        if let Some((p1, p2)) = last {
            print!(
                "   orders {:.2}, {:.2}",
                order_estimate(p1, d1),
                order_estimate(p2, d2)
            );
        }
        println!();
        last = Some((d1, d2));

        // the third form is the exact mean of the two log forms
        let q_loglap = quantum_potential(&rho, QForm::LogLaplacian, &mask, constants)?;
        let identity = q_loggrad.add(&q_loglap).scale(0.5).sub(&q_third).max_abs();
        if n == 512 {
            println!("   (loggrad + loglaplacian)/2 - third = {identity:.3e} (roundoff)");
        }
    }
    Ok(())
}
