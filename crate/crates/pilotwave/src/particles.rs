//! Deterministic and stochastic pilot-wave ensembles plus the Monte-Carlo
//! estimators behind the vanishing-expectation measurements.
//!
//! Every particle owns a counter-based stream seeded from
//! `(master_seed, particle_index)`, so trajectories are bitwise reproducible
//! no matter how the per-particle loop is scheduled across threads. Histogram
//! accumulation uses integer counts and pairwise summation, keeping the
//! equivariance distance order-independent as well.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{
    integrate, laplacian, pairwise_sum, Boundary, Grid, Mask, ScalarField, VectorField,
};

/// splitmix64; the standard avalanche mixer for seed derivation.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a 32-byte stream seed from `(master_seed, index)`.
pub fn derive_stream_seed(master_seed: u64, index: u64) -> [u8; 32] {
    let mut state = master_seed ^ index.wrapping_mul(0xA076_1D64_78BD_642F);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    seed
}

/// One counter-based generator for a derived stream.
pub fn stream_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_stream_seed(master_seed, index))
}

/// Linear (1D) / bilinear (2D) interpolation of a per-site array.
/// Returns the value and whether all participating sites are masked in.
fn interp_sites(
    grid: &Grid,
    values: impl Fn(usize) -> f64,
    mask: &Mask,
    pos: &[f64],
) -> (f64, bool) {
    let mut idxs = [[0usize; 2]; 2];
    let mut frac = [0.0f64; 2];
    for axis in 0..grid.ndim() {
        let h = grid.spacing(axis);
        let n = grid.points(axis);
        let u = (pos[axis] - grid.origin(axis)) / h;
        match grid.boundary() {
            Boundary::Periodic => {
                let uw = u.rem_euclid(n as f64);
                let i0 = uw.floor() as usize % n;
                idxs[axis] = [i0, (i0 + 1) % n];
                frac[axis] = uw - uw.floor();
            }
            Boundary::Clamped => {
                let uc = u.clamp(0.0, (n - 1) as f64);
                let i0 = (uc.floor() as usize).min(n - 2);
                idxs[axis] = [i0, i0 + 1];
                frac[axis] = uc - i0 as f64;
            }
        }
    }
    if grid.ndim() == 1 {
        let (a, b) = (idxs[0][0], idxs[0][1]);
        let ok = mask.is_on(a) && mask.is_on(b);
        let t = frac[0];
        (values(a) * (1.0 - t) + values(b) * t, ok)
    } else {
        let (tx, ty) = (frac[0], frac[1]);
        let mut acc = 0.0;
        let mut ok = true;
        for (jy, wy) in [(idxs[1][0], 1.0 - ty), (idxs[1][1], ty)] {
            for (jx, wx) in [(idxs[0][0], 1.0 - tx), (idxs[0][1], tx)] {
                let site = grid.idx(jx, jy);
                ok &= mask.is_on(site);
                acc += wx * wy * values(site);
            }
        }
        (acc, ok)
    }
}

/// Interpolate a scalar field (mask-aware).
pub fn interp_scalar(f: &ScalarField, mask: &Mask, pos: &[f64]) -> (f64, bool) {
    interp_sites(f.grid(), |i| f.get(i), mask, pos)
}

/// Interpolate one component of a vector field (mask-aware).
pub fn interp_component(v: &VectorField, mask: &Mask, axis: usize, pos: &[f64]) -> (f64, bool) {
    interp_sites(v.grid(), |i| v.component(axis)[i], mask, pos)
}

fn apply_boundary(grid: &Grid, pos: &mut [f64]) {
    for axis in 0..grid.ndim() {
        let lo = grid.origin(axis);
        let ext = grid.extent(axis);
        match grid.boundary() {
            Boundary::Periodic => {
                pos[axis] = lo + (pos[axis] - lo).rem_euclid(ext);
            }
            Boundary::Clamped => {
                // reflecting walls
                let hi = lo + ext;
                let mut x = pos[axis];
                for _ in 0..64 {
                    if x < lo {
                        x = 2.0 * lo - x;
                    } else if x > hi {
                        x = 2.0 * hi - x;
                    } else {
                        break;
                    }
                }
                pos[axis] = x.clamp(lo, hi);
            }
        }
    }
}

/// N configuration-space points with one derived RNG stream per particle.
pub struct ParticleEnsemble {
    grid: Grid,
    positions: Vec<f64>,
    rngs: Vec<ChaCha8Rng>,
    time: f64,
    master_seed: u64,
    /// Particles skipped in the last step because their interpolation stencil
    /// touched a masked-out (nodal) site.
    pub frozen_last_step: usize,
}

impl ParticleEnsemble {
    /// Build from explicit positions (flattened, `n * ndim`).
    pub fn from_positions(grid: &Grid, positions: Vec<f64>, master_seed: u64) -> Self {
        assert_eq!(
            positions.len() % grid.ndim(),
            0,
            "positions must be n * ndim"
        );
        let n = positions.len() / grid.ndim();
        let rngs = (0..n as u64).map(|i| stream_rng(master_seed, i)).collect();
        ParticleEnsemble {
            grid: grid.clone(),
            positions,
            rngs,
            time: 0.0,
            master_seed,
            frozen_last_step: 0,
        }
    }

    /// Sample positions from a density by inverse CDF over grid cells, with a
    /// uniform jitter inside each cell. Consumes the per-particle streams.
    pub fn sample_from_density(rho: &ScalarField, n: usize, master_seed: u64) -> Self {
        let grid = rho.grid().clone();
        let ndim = grid.ndim();
        let weights: Vec<f64> = rho.values().iter().map(|&v| v.max(0.0)).collect();
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in &weights {
            acc += w;
            cdf.push(acc);
        }
        let total = acc;
        assert!(total > 0.0, "density has no mass");
        let mut positions = vec![0.0; n * ndim];
        let mut rngs: Vec<ChaCha8Rng> = (0..n as u64).map(|i| stream_rng(master_seed, i)).collect();
        positions
            .par_chunks_mut(ndim)
            .zip(rngs.par_iter_mut())
            .for_each(|(pos, rng)| {
                let u: f64 = rng.gen::<f64>() * total;
                let site = match cdf.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
                    Ok(i) => (i + 1).min(cdf.len() - 1),
                    Err(i) => i.min(cdf.len() - 1),
                };
                let c = grid.site_coords(site);
                for axis in 0..ndim {
                    let h = grid.spacing(axis);
                    let jitter: f64 = rng.gen::<f64>() - 0.5;
                    pos[axis] = c[axis] + jitter * h;
                }
                apply_boundary(&grid, pos);
            });
        ParticleEnsemble {
            grid,
            positions,
            rngs,
            time: 0.0,
            master_seed,
            frozen_last_step: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.grid.ndim()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Flattened positions, `n * ndim`.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn position(&self, i: usize) -> &[f64] {
        let nd = self.grid.ndim();
        &self.positions[i * nd..(i + 1) * nd]
    }

    /// Euler step along an interpolated velocity field. Particles whose
    /// stencil touches a masked-out site freeze; their count is recorded.
    pub fn step_deterministic(&mut self, velocity: &VectorField, mask: &Mask, dt: f64) {
        assert_eq!(velocity.grid(), &self.grid, "field grid mismatch");
        let ndim = self.grid.ndim();
        let grid = &self.grid;
        let frozen: usize = self
            .positions
            .par_chunks_mut(ndim)
            .map(|pos| {
                let mut v = [0.0f64; 2];
                let mut ok = true;
                for axis in 0..ndim {
                    let (val, in_mask) = interp_component(velocity, mask, axis, pos);
                    v[axis] = val;
                    ok &= in_mask;
                }
                if !ok {
                    return 1usize;
                }
                for axis in 0..ndim {
                    pos[axis] += v[axis] * dt;
                }
                apply_boundary(grid, pos);
                0usize
            })
            .sum();
        self.frozen_last_step = frozen;
        self.time += dt;
    }

    /// Euler-Maruyama step `x += drift dt + sqrt(k/m) sqrt(dt) xi` with one
    /// standard normal per axis drawn from the particle's own stream. With
    /// `k = 0` the noise branch is skipped entirely, reproducing
    /// `step_deterministic` bitwise (streams untouched).
    pub fn step_stochastic(
        &mut self,
        drift: &VectorField,
        mask: &Mask,
        k: f64,
        mass: f64,
        dt: f64,
    ) {
        assert_eq!(drift.grid(), &self.grid, "field grid mismatch");
        if k == 0.0 {
            self.step_deterministic(drift, mask, dt);
            return;
        }
        let ndim = self.grid.ndim();
        let grid = &self.grid;
        let amp = (k / mass).sqrt() * dt.abs().sqrt();
        let frozen: usize = self
            .positions
            .par_chunks_mut(ndim)
            .zip(self.rngs.par_iter_mut())
            .map(|(pos, rng)| {
                let mut v = [0.0f64; 2];
                let mut ok = true;
                for axis in 0..ndim {
                    let (val, in_mask) = interp_component(drift, mask, axis, pos);
                    v[axis] = val;
                    ok &= in_mask;
                }
                if !ok {
                    // keep the stream in lockstep even for frozen particles
                    for _ in 0..ndim {
                        let _: f64 = rng.sample(StandardNormal);
                    }
                    return 1usize;
                }
                for axis in 0..ndim {
                    let xi: f64 = rng.sample(StandardNormal);
                    pos[axis] += v[axis] * dt + amp * xi;
                }
                apply_boundary(grid, pos);
                0usize
            })
            .sum();
        self.frozen_last_step = frozen;
        self.time += dt;
    }

    /// Histogram counts over `bins` equal cells per axis.
    pub fn histogram(&self, bins: usize) -> Result<Vec<u64>> {
        let grid = &self.grid;
        for axis in 0..grid.ndim() {
            if bins > grid.points(axis) {
                return Err(Error::Ensemble(format!(
                    "bins = {bins} exceeds grid resolution {}",
                    grid.points(axis)
                )));
            }
        }
        let ncells = bins.pow(grid.ndim() as u32);
        let mut counts = vec![0u64; ncells];
        let ndim = grid.ndim();
        for i in 0..self.len() {
            let pos = self.position(i);
            let mut cell = 0usize;
            for axis in (0..ndim).rev() {
                let w = grid.extent(axis) / bins as f64;
                let b = (((pos[axis] - grid.origin(axis)) / w).floor() as isize)
                    .clamp(0, bins as isize - 1) as usize;
                cell = cell * bins + b;
            }
            counts[cell] += 1;
        }
        Ok(counts)
    }

    /// L1 distance between the ensemble histogram and the cell masses of a
    /// density: `sum_i |count_i / N - integral_cell_i rho|`.
    pub fn equivariance_distance(&self, rho: &ScalarField, bins: usize) -> Result<f64> {
        let counts = self.histogram(bins)?;
        let p = cell_masses(rho, bins)?;
        let n = self.len() as f64;
        let diffs: Vec<f64> = counts
            .iter()
            .zip(&p)
            .map(|(&c, &pi)| (c as f64 / n - pi).abs())
            .collect();
        Ok(pairwise_sum(&diffs))
    }
}

/// Normalized mass of each histogram cell under `rho` (cells are `bins`
/// equal slabs per axis, sites assigned by position).
pub fn cell_masses(rho: &ScalarField, bins: usize) -> Result<Vec<f64>> {
    let grid = rho.grid();
    for axis in 0..grid.ndim() {
        if bins > grid.points(axis) {
            return Err(Error::Ensemble(format!(
                "bins = {bins} exceeds grid resolution {}",
                grid.points(axis)
            )));
        }
    }
    let ncells = bins.pow(grid.ndim() as u32);
    let mut mass = vec![0.0f64; ncells];
    let ndim = grid.ndim();
    for idx in 0..grid.len() {
        let c = grid.site_coords(idx);
        let mut cell = 0usize;
        for axis in (0..ndim).rev() {
            let w = grid.extent(axis) / bins as f64;
            let b = (((c[axis] - grid.origin(axis)) / w).floor() as isize)
                .clamp(0, bins as isize - 1) as usize;
            cell = cell * bins + b;
        }
        mass[cell] += rho.get(idx).max(0.0);
    }
    let total = pairwise_sum(&mass);
    if total <= 0.0 {
        return Err(Error::Ensemble("density has no mass".into()));
    }
    for m in &mut mass {
        *m /= total;
    }
    Ok(mass)
}

/// Expected L1 statistical floor of the histogram distance for N samples:
/// `sqrt(2/pi) sum_i sqrt(p_i (1 - p_i) / N)` (half-normal mean per cell).
pub fn histogram_statistical_floor(p: &[f64], n: usize) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let terms: Vec<f64> = p
        .iter()
        .map(|&pi| c * (pi * (1.0 - pi) / n as f64).sqrt())
        .collect();
    pairwise_sum(&terms)
}

/// Gaussian one-step transition kernel: mean `drift * dt`, per-axis variance
/// `(k/m) dt`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct KernelSpec {
    pub drift: [f64; 2],
    pub k: f64,
    pub mass: f64,
    pub dt: f64,
}

impl KernelSpec {
    pub fn zero_drift(k: f64, mass: f64, dt: f64) -> Self {
        KernelSpec {
            drift: [0.0; 2],
            k,
            mass,
            dt,
        }
    }

    pub fn variance(&self) -> f64 {
        self.k / self.mass * self.dt
    }

    fn validate(&self) -> Result<()> {
        if !(self.variance() > 0.0) {
            return Err(Error::Ensemble(format!(
                "kernel variance must be positive, got {}",
                self.variance()
            )));
        }
        Ok(())
    }
}

/// Monte-Carlo estimate of `E[f(x0 + dx)]` with `dx` from the kernel.
#[derive(Clone, Debug, Serialize)]
pub struct EstimatorReport {
    /// Normalized conditional mean over accepted samples.
    pub mean: f64,
    pub std_error: f64,
    /// The mean weighted by the supplied base-point density, i.e. the
    /// integral form `P(x0) E[f]`; absent when no weight is given.
    pub weighted_mean: Option<f64>,
    pub n_samples: usize,
    pub n_rejected: usize,
    pub rejected_fraction: f64,
    pub kernel: KernelSpec,
}

/// Sample the kernel around `x0` and average interpolated values of `f`.
/// Samples landing outside the mask (or the clamped domain) are rejected and
/// counted. `weight` is typically `rho(x0)`; it turns the conditional mean
/// into the weighted-integral form.
pub fn expectation_estimator(
    f: &ScalarField,
    mask: &Mask,
    x0: &[f64],
    kernel: KernelSpec,
    n_samples: usize,
    seed: u64,
    weight: Option<f64>,
) -> Result<EstimatorReport> {
    kernel.validate()?;
    if n_samples == 0 {
        return Err(Error::Ensemble("need at least one sample".into()));
    }
    let grid = f.grid();
    let ndim = grid.ndim();
    let sigma = kernel.variance().sqrt();
    let mut rng = stream_rng(seed, 0);
    let mut vals = Vec::with_capacity(n_samples);
    let mut rejected = 0usize;
    for _ in 0..n_samples {
        let mut pos = [0.0f64; 2];
        let mut inside = true;
        for axis in 0..ndim {
            let xi: f64 = rng.sample(StandardNormal);
            pos[axis] = x0[axis] + kernel.drift[axis] * kernel.dt + sigma * xi;
            if grid.boundary() == Boundary::Clamped {
                let lo = grid.origin(axis);
                if pos[axis] < lo || pos[axis] > lo + grid.extent(axis) {
                    inside = false;
                }
            }
        }
        if !inside {
            rejected += 1;
            continue;
        }
        let (v, ok) = interp_scalar(f, mask, &pos[..ndim]);
        if ok {
            vals.push(v);
        } else {
            rejected += 1;
        }
    }
    if vals.is_empty() {
        return Err(Error::Ensemble("all kernel samples were rejected".into()));
    }
    let n = vals.len() as f64;
    let mean = pairwise_sum(&vals) / n;
    let sq: Vec<f64> = vals.iter().map(|&v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0).max(1.0);
    Ok(EstimatorReport {
        mean,
        std_error: (var / n).sqrt(),
        weighted_mean: weight.map(|w| w * mean),
        n_samples,
        n_rejected: rejected,
        rejected_fraction: rejected as f64 / n_samples as f64,
        kernel,
    })
}

/// Sample the kernel density on the grid as an analytic Gaussian.
pub fn kernel_density(kernel: &KernelSpec, grid: &Grid, center: &[f64]) -> ScalarField {
    let var = kernel.variance();
    let norm = 1.0 / (2.0 * std::f64::consts::PI * var).sqrt();
    ScalarField::from_fn(grid, |x, y| {
        let mut acc = 1.0;
        let pos = [x, y];
        for axis in 0..grid.ndim() {
            let mu = center[axis] + kernel.drift[axis] * kernel.dt;
            let d = pos[axis] - mu;
            acc *= norm * (-0.5 * d * d / var).exp();
        }
        acc
    })
}

/// `integrate(laplacian(P))` for the sampled kernel density: the discrete
/// divergence theorem makes this vanish when the kernel is supported inside
/// the grid (mass outside < 1e-12 is required, ~7.1 sigma from every wall).
pub fn kernel_divergence_integral(kernel: &KernelSpec, grid: &Grid, center: &[f64]) -> Result<f64> {
    kernel.validate()?;
    let sigma = kernel.variance().sqrt();
    for axis in 0..grid.ndim() {
        let mu = center[axis] + kernel.drift[axis] * kernel.dt;
        let lo = grid.origin(axis);
        let hi = lo + grid.extent(axis);
        let margin = 7.1 * sigma; // erfc(7.1/sqrt 2)/2 < 1e-12 per side
        if mu - lo < margin || hi - mu < margin {
            return Err(Error::Ensemble(format!(
                "kernel support leaves the grid on axis {axis}: need {margin:.3} clearance"
            )));
        }
    }
    let p = kernel_density(kernel, grid, center);
    Ok(integrate(&laplacian(&p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::gradient;

    fn flat_grid(n: usize, l: f64) -> Grid {
        Grid::centered_1d(n, l, Boundary::Clamped).unwrap()
    }

    #[test]
    fn deterministic_step_uniform_velocity() {
        let grid = flat_grid(64, 16.0);
        let mask = Mask::all_on(&grid);
        let v = VectorField::from_components(&grid, vec![vec![1.0; grid.len()]]);
        let mut ens = ParticleEnsemble::from_positions(&grid, vec![-1.0, 0.0, 2.5], 7);
        ens.step_deterministic(&v, &mask, 0.1);
        assert_eq!(ens.positions(), &[-0.9, 0.1, 2.6]);
        assert_eq!(ens.frozen_last_step, 0);
        // zero velocity leaves positions unchanged
        let z = VectorField::zeros(&grid);
        let before = ens.positions().to_vec();
        ens.step_deterministic(&z, &mask, 0.1);
        assert_eq!(ens.positions(), &before[..]);
    }

    #[test]
    fn stochastic_k_zero_matches_deterministic_bitwise() {
        let grid = flat_grid(64, 16.0);
        let mask = Mask::all_on(&grid);
        let v = VectorField::from_components(
            &grid,
            vec![(0..grid.len())
                .map(|i| grid.site_coords(i)[0] * 0.1)
                .collect()],
        );
        let pos0: Vec<f64> = vec![-3.0, -1.0, 0.5, 4.0];
        let mut a = ParticleEnsemble::from_positions(&grid, pos0.clone(), 11);
        let mut b = ParticleEnsemble::from_positions(&grid, pos0, 11);
        for _ in 0..25 {
            a.step_deterministic(&v, &mask, 0.05);
            b.step_stochastic(&v, &mask, 0.0, 1.0, 0.05);
        }
        for (x, y) in a.positions().iter().zip(b.positions()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn euler_maruyama_moments() {
        // zero drift: mean displacement ~ 0 within 3 sigma / sqrt(N);
        // variance = (k/m) dt within 5 standard errors, N = 1e5
        let grid = flat_grid(256, 400.0);
        let mask = Mask::all_on(&grid);
        let drift = VectorField::zeros(&grid);
        let n = 100_000usize;
        let (k, m, dt) = (0.8, 1.3, 0.04);
        let mut ens = ParticleEnsemble::from_positions(&grid, vec![0.0; n], 2024);
        ens.step_stochastic(&drift, &mask, k, m, dt);
        let var_true = k / m * dt;
        let mean = pairwise_sum(ens.positions()) / n as f64;
        let sq: Vec<f64> = ens.positions().iter().map(|&x| x * x).collect();
        let var = pairwise_sum(&sq) / n as f64;
        let mean_tol = 3.0 * var_true.sqrt() / (n as f64).sqrt();
        assert!(mean.abs() < mean_tol, "mean {mean} vs tol {mean_tol}");
        // SE of variance estimate for normal data ~ var * sqrt(2/n)
        let se_var = var_true * (2.0 / n as f64).sqrt();
        assert!(
            (var - var_true).abs() < 5.0 * se_var,
            "var {var} vs {var_true} +- {se_var}"
        );
    }

    #[test]
    fn thread_count_does_not_change_trajectories() {
        let grid = flat_grid(128, 20.0);
        let mask = Mask::all_on(&grid);
        let v = VectorField::from_components(
            &grid,
            vec![(0..grid.len())
                .map(|i| -0.3 * grid.site_coords(i)[0])
                .collect()],
        );
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                let mut ens = ParticleEnsemble::from_positions(
                    &grid,
                    (0..500).map(|i| -8.0 + i as f64 * 0.032).collect(),
                    99,
                );
                for _ in 0..50 {
                    ens.step_stochastic(&v, &mask, 0.5, 1.0, 0.02);
                }
                ens.positions().to_vec()
            })
        };
        let p1 = run(1);
        let p4 = run(4);
        for (a, b) in p1.iter().zip(&p4) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn frozen_particles_are_counted_and_static() {
        let grid = flat_grid(64, 16.0);
        let mut on = vec![true; grid.len()];
        for (i, flag) in on.iter_mut().enumerate() {
            // mask out the right half
            if grid.site_coords(i)[0] > 0.0 {
                *flag = false;
            }
        }
        let mask = Mask::from_values(&grid, on);
        let v = VectorField::from_components(&grid, vec![vec![1.0; grid.len()]]);
        let mut ens = ParticleEnsemble::from_positions(&grid, vec![-4.0, 4.0], 5);
        ens.step_deterministic(&v, &mask, 0.1);
        assert_eq!(ens.frozen_last_step, 1);
        assert_eq!(ens.position(1)[0], 4.0);
    }

    #[test]
    fn sampled_ensemble_matches_density_within_floor() {
        let grid = flat_grid(256, 16.0);
        let rho0 = ScalarField::from_fn(&grid, |x, _| (-0.5 * x * x).exp());
        let total = integrate(&rho0);
        let rho = rho0.scale(1.0 / total);
        let n = 50_000;
        let bins = 32;
        let p = cell_masses(&rho, bins).unwrap();
        let floor = histogram_statistical_floor(&p, n);
        // average over replicates stays under twice the analytic floor
        let mut dsum = 0.0;
        let reps = 20;
        for seed in 0..reps {
            let ens = ParticleEnsemble::sample_from_density(&rho, n, 1000 + seed);
            dsum += ens.equivariance_distance(&rho, bins).unwrap();
        }
        let avg = dsum / reps as f64;
        assert!(avg < 2.0 * floor, "avg distance {avg} vs floor {floor}");
        // single bin: everything in one cell
        let ens = ParticleEnsemble::sample_from_density(&rho, 1000, 3);
        let d = ens.equivariance_distance(&rho, 1).unwrap();
        assert!(d < 1e-12);
        // more bins than grid sites is rejected
        assert!(ens.equivariance_distance(&rho, 512).is_err());
    }

    #[test]
    fn estimator_linear_function_and_gaussian_moment() {
        let grid = flat_grid(512, 40.0);
        let mask = Mask::all_on(&grid);
        let kernel = KernelSpec::zero_drift(1.0, 1.0, 0.25); // sigma^2 = 0.25
                                                             // f linear: mean = f(x0) within 3 SE
        let f = ScalarField::from_fn(&grid, |x, _| 2.0 * x + 1.0);
        let rep = expectation_estimator(&f, &mask, &[1.0], kernel, 40_000, 42, None).unwrap();
        assert!(
            (rep.mean - 3.0).abs() < 3.0 * rep.std_error + 1e-9,
            "mean {} se {}",
            rep.mean,
            rep.std_error
        );
        // f = x^2: mean = x0^2 + sigma^2 within 3 SE (+ O(h^2) interpolation bias)
        let f2 = ScalarField::from_fn(&grid, |x, _| x * x);
        let rep2 = expectation_estimator(&f2, &mask, &[1.0], kernel, 40_000, 43, None).unwrap();
        let want = 1.0 + 0.25;
        assert!(
            (rep2.mean - want).abs() < 3.0 * rep2.std_error + 1e-2,
            "mean {} want {want} se {}",
            rep2.mean,
            rep2.std_error
        );
        // weighted form scales by the supplied weight
        let rep3 = expectation_estimator(&f, &mask, &[1.0], kernel, 1000, 44, Some(0.5)).unwrap();
        assert!((rep3.weighted_mean.unwrap() - 0.5 * rep3.mean).abs() < 1e-15);
    }

    #[test]
    fn kernel_divergence_theorem() {
        let grid = Grid::new_1d(256, 20.0, 0.0, Boundary::Periodic).unwrap();
        let kernel = KernelSpec::zero_drift(1.0, 1.0, 1.0); // sigma = 1 = L/20
        let total = kernel_divergence_integral(&kernel, &grid, &[10.0]).unwrap();
        assert!(total.abs() < 1e-10, "divergence integral {total}");
        // support leaving the box is rejected
        assert!(kernel_divergence_integral(&kernel, &grid, &[1.0]).is_err());
    }

    #[test]
    fn summation_by_parts_pairing() {
        // weighted integral of f lap P equals integral of P lap f when the
        // kernel vanishes at the boundary; with f = x^2, lap f = 2
        let grid = flat_grid(512, 24.0);
        let kernel = KernelSpec::zero_drift(1.0, 1.0, 0.81);
        let p = kernel_density(&kernel, &grid, &[0.0]);
        let f = ScalarField::from_fn(&grid, |x, _| x * x);
        let lhs = integrate(&f.zip_with(&laplacian(&p), |a, b| a * b));
        let rhs = integrate(&p.zip_with(&laplacian(&f), |a, b| a * b));
        assert!((lhs - rhs).abs() < 1e-8, "lhs {lhs} rhs {rhs}");
        let mass = integrate(&p);
        assert!((rhs - 2.0 * mass).abs() < 1e-8);
        // constant f: integral of f lap P is f times the divergence integral
        let c = ScalarField::from_fn(&grid, |_, _| 3.0);
        let lhs_c = integrate(&c.zip_with(&laplacian(&p), |a, b| a * b));
        assert!(lhs_c.abs() < 1e-8);
    }

    #[test]
    fn strong_noise_respects_reflecting_walls() {
        let grid = flat_grid(64, 4.0); // clamped box [-2, 2]
        let mask = Mask::all_on(&grid);
        let drift = VectorField::zeros(&grid);
        let mut ens = ParticleEnsemble::from_positions(&grid, vec![0.0; 2000], 88);
        for _ in 0..50 {
            ens.step_stochastic(&drift, &mask, 4.0, 1.0, 0.1);
            for i in 0..ens.len() {
                let x = ens.position(i)[0];
                assert!((-2.0..=2.0).contains(&x), "particle escaped to {x}");
            }
        }
        // periodic wrap keeps positions in the box as well
        let pgrid = Grid::new_1d(64, 4.0, 0.0, Boundary::Periodic).unwrap();
        let pmask = Mask::all_on(&pgrid);
        let pdrift = VectorField::zeros(&pgrid);
        let mut ens = ParticleEnsemble::from_positions(&pgrid, vec![2.0; 500], 89);
        for _ in 0..20 {
            ens.step_stochastic(&pdrift, &pmask, 4.0, 1.0, 0.1);
            for i in 0..ens.len() {
                let x = ens.position(i)[0];
                assert!((0.0..4.0).contains(&x), "particle escaped to {x}");
            }
        }
    }

    #[test]
    fn gradient_interpolation_consistency() {
        // smoke test: interpolation at exact sites returns site values
        let grid = flat_grid(64, 8.0);
        let mask = Mask::all_on(&grid);
        let f = ScalarField::from_fn(&grid, |x, _| (x * 0.7).sin());
        let g = gradient(&f);
        for i in [3usize, 17, 40] {
            let x = grid.site_coords(i)[0];
            let (v, ok) = interp_scalar(&f, &mask, &[x]);
            assert!(ok);
            assert!((v - f.get(i)).abs() < 1e-12);
            let (gv, _) = interp_component(&g, &mask, 0, &[x]);
            assert!((gv - g.component(0)[i]).abs() < 1e-12);
        }
    }
}
