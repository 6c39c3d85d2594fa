//! Independent-integrator oracle: a split-step Fourier reference (exact in
//! time for free evolution) cross-checks the implicit scheme's packet
//! spreading against the analytic width law.

use num_complex::Complex64;
use pilotwave::evolve::{evolve, initial_state, Constants, Potential, StateSpec};
use pilotwave::lattice::{integrate, Boundary, ComplexField, Grid, ScalarField};
use rustfft::FftPlanner;

/// Split-step Fourier evolution on a periodic grid (1D). For `V = 0` the
/// kinetic phase is applied in one exact step per call.
fn split_step_free(psi0: &ComplexField, constants: Constants, t: f64) -> ComplexField {
    let grid = psi0.grid().clone();
    assert_eq!(grid.boundary(), Boundary::Periodic);
    let n = grid.points(0);
    let l = grid.extent(0);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = psi0.values().to_vec();
    fft.process(&mut buf);
    for (j, v) in buf.iter_mut().enumerate() {
        let j_signed = if j <= n / 2 {
            j as f64
        } else {
            j as f64 - n as f64
        };
        let k = 2.0 * std::f64::consts::PI * j_signed / l;
        let phase = -constants.hbar * k * k * t / (2.0 * constants.mass);
        *v *= Complex64::from_polar(1.0, phase);
    }
    ifft.process(&mut buf);
    for v in &mut buf {
        *v /= n as f64; // rustfft leaves the inverse unnormalized
    }
    ComplexField::from_values(&grid, buf)
}

fn density_variance(psi: &ComplexField) -> f64 {
    let rho = psi.abs_sqr();
    let total = integrate(&rho);
    let grid = psi.grid();
    let x_rho = ScalarField::from_fn(grid, |x, _| x).zip_with(&rho, |x, r| x * r);
    let mean = integrate(&x_rho) / total;
    let xx_rho = ScalarField::from_fn(grid, |x, _| x * x).zip_with(&rho, |x2, r| x2 * r);
    integrate(&xx_rho) / total - mean * mean
}

#[test]
fn free_packet_width_matches_reference_and_analytic_law() {
    let grid = Grid::centered_1d(512, 40.0, Boundary::Periodic).unwrap();
    let c = Constants::natural();
    let sigma0 = 1.0;
    let psi0 = initial_state(
        &StateSpec::GaussianPacket {
            center: 0.0,
            width: sigma0,
            k: 0.0,
        },
        &grid,
        c.hbar,
    )
    .unwrap();
    let t_final = 2.0;

    // independent split-step reference (exact in time for V = 0)
    let reference = split_step_free(&psi0, c, t_final);
    let var_ref = density_variance(&reference);
    let analytic = sigma0 * sigma0 + (c.hbar * t_final / (2.0 * c.mass * sigma0)).powi(2);
    assert!(
        (var_ref - analytic).abs() < 1e-9,
        "split-step width {var_ref} vs analytic {analytic}"
    );

    // the implicit scheme converges to the same spreading law
    let traj = evolve(&psi0, &Potential::Free, c, t_final, 0.005, usize::MAX).unwrap();
    let var_cn = density_variance(&traj.snapshots.last().unwrap().1);
    assert!(
        (var_cn - var_ref).abs() < 2e-3,
        "implicit width {var_cn} vs reference {var_ref}"
    );

    // and the wavefunctions themselves agree pointwise at the same order
    let max_err: f64 = traj
        .snapshots
        .last()
        .unwrap()
        .1
        .values()
        .iter()
        .zip(reference.values())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    assert!(max_err < 5e-3, "pointwise gap {max_err}");
}

#[test]
fn plane_wave_modulus_is_translation_invariant() {
    let l = 2.0 * std::f64::consts::PI;
    let grid = Grid::new_1d(128, l, 0.0, Boundary::Periodic).unwrap();
    let c = Constants::natural();
    let psi0 = initial_state(&StateSpec::PlaneWave { k: 3.0 }, &grid, c.hbar).unwrap();
    let traj = evolve(&psi0, &Potential::Free, c, 1.0, 0.01, 25).unwrap();
    for (_, psi) in &traj.snapshots {
        let rho = psi.abs_sqr();
        let lo = rho.values().iter().cloned().fold(f64::MAX, f64::min);
        let hi = rho.values().iter().cloned().fold(f64::MIN, f64::max);
        assert!(hi - lo < 1e-12, "modulus not uniform: spread {}", hi - lo);
    }
}
