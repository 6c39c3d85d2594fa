//! Norm-preserving wavefunction evolution on 1D and 2D grids.
//!
//! Produces the ground-truth `(rho, S)` trajectories every transformation
//! check consumes. The stepper is the implicit Cayley scheme in
//! [`scheme`]; see that module for the stability and splitting notes.

mod scheme;

pub use scheme::{apply_hamiltonian, cayley_step, energy_expectation};

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{write_complex_csv, Boundary, ComplexField, Grid, ScalarField};

/// Physical constants used by the dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub hbar: f64,
    pub mass: f64,
}

impl Constants {
    /// Natural units `hbar = m = 1`.
    pub fn natural() -> Self {
        Constants {
            hbar: 1.0,
            mass: 1.0,
        }
    }
}

impl Default for Constants {
    fn default() -> Self {
        Constants::natural()
    }
}

/// Time-independent external potential.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    Free,
    Harmonic {
        mass: f64,
        omega: f64,
        center: f64,
    },
    Barrier {
        height: f64,
        width: f64,
        center: f64,
    },
    /// Two identical 1D particles on a 2D configuration grid:
    /// `V(x1, x2) = V1(x1) + V1(x2) + g (x1 - x2)^2`.
    CoupledPair {
        single: Box<Potential>,
        coupling: f64,
    },
}

impl Potential {
    fn eval_single(&self, x: f64) -> f64 {
        match self {
            Potential::Free => 0.0,
            Potential::Harmonic {
                mass,
                omega,
                center,
            } => {
                let u = x - center;
                0.5 * mass * omega * omega * u * u
            }
            Potential::Barrier {
                height,
                width,
                center,
            } => {
                if (x - center).abs() <= 0.5 * width {
                    *height
                } else {
                    0.0
                }
            }
            Potential::CoupledPair { .. } => unreachable!("coupled pair is not a single-axis kind"),
        }
    }

    /// Validate against a grid dimension.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        match self {
            Potential::CoupledPair { single, .. } => {
                if grid.ndim() != 2 {
                    return Err(Error::State(
                        "coupled_pair potential requires a 2D grid".into(),
                    ));
                }
                if matches!(**single, Potential::CoupledPair { .. }) {
                    return Err(Error::State("coupled_pair cannot nest".into()));
                }
                Ok(())
            }
            _ => {
                if grid.ndim() != 1 {
                    return Err(Error::State(
                        "single-particle potentials require a 1D grid; use coupled_pair on 2D"
                            .into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Sample V at every site.
    pub fn sample(&self, grid: &Grid) -> Result<ScalarField> {
        self.validate(grid)?;
        let f = match self {
            Potential::CoupledPair { single, coupling } => ScalarField::from_fn(grid, |x1, x2| {
                single.eval_single(x1) + single.eval_single(x2) + coupling * (x1 - x2) * (x1 - x2)
            }),
            _ => ScalarField::from_fn(grid, |x, _| self.eval_single(x)),
        };
        if !f.is_finite() {
            return Err(Error::Numerical(
                "potential evaluated to non-finite values".into(),
            ));
        }
        Ok(f)
    }

    /// For a coupled pair, the `(V1(x1), V1(x2), g (x1-x2)^2)` parts sampled on the grid.
    pub fn pair_parts(&self, grid: &Grid) -> Result<(ScalarField, ScalarField, ScalarField)> {
        match self {
            Potential::CoupledPair { single, coupling } => {
                self.validate(grid)?;
                let v1 = ScalarField::from_fn(grid, |x1, _| single.eval_single(x1));
                let v2 = ScalarField::from_fn(grid, |_, x2| single.eval_single(x2));
                let vi = ScalarField::from_fn(grid, |x1, x2| coupling * (x1 - x2) * (x1 - x2));
                Ok((v1, v2, vi))
            }
            _ => Err(Error::State(
                "pair_parts requires a coupled_pair potential".into(),
            )),
        }
    }
}

/// Initial wavefunction families.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    /// `exp(i k x)`; on periodic grids k must be commensurate with the box.
    PlaneWave { k: f64 },
    /// Envelope `exp(-(x-center)^2 / (4 width^2)) * exp(i k x)`; `width` is the
    /// standard deviation of the resulting density.
    GaussianPacket { center: f64, width: f64, k: f64 },
    /// Ground state of `1/2 m omega^2 x^2` centered at the origin.
    HarmonicGroundState { mass: f64, omega: f64 },
    /// 2D product of two 1D specs (x1 from the first, x2 from the second).
    ProductOfTwo {
        first: Box<StateSpec>,
        second: Box<StateSpec>,
    },
}

fn check_commensurate(k: f64, grid: &Grid, axis: usize) -> Result<()> {
    if grid.boundary() != Boundary::Periodic {
        return Ok(());
    }
    let cycles = k * grid.extent(axis) / (2.0 * std::f64::consts::PI);
    if (cycles - cycles.round()).abs() > 1e-9 {
        return Err(Error::State(format!(
            "plane wave k = {k} is not commensurate with a periodic box of length {}",
            grid.extent(axis)
        )));
    }
    Ok(())
}

fn eval_1d(spec: &StateSpec, x: f64, hbar: f64) -> Complex64 {
    match spec {
        StateSpec::PlaneWave { k } => Complex64::from_polar(1.0, k * x),
        StateSpec::GaussianPacket { center, width, k } => {
            let u = x - center;
            let env = (-(u * u) / (4.0 * width * width)).exp();
            env * Complex64::from_polar(1.0, k * x)
        }
        StateSpec::HarmonicGroundState { mass, omega } => {
            Complex64::new((-(mass * omega) * x * x / (2.0 * hbar)).exp(), 0.0)
        }
        StateSpec::ProductOfTwo { .. } => unreachable!("product handled at top level"),
    }
}

/// Construct and L2-normalize an initial wavefunction.
pub fn initial_state(spec: &StateSpec, grid: &Grid, hbar: f64) -> Result<ComplexField> {
    let field = match spec {
        StateSpec::ProductOfTwo { first, second } => {
            if grid.ndim() != 2 {
                return Err(Error::State("product_of_two requires a 2D grid".into()));
            }
            if matches!(**first, StateSpec::ProductOfTwo { .. })
                || matches!(**second, StateSpec::ProductOfTwo { .. })
            {
                return Err(Error::State("product_of_two cannot nest".into()));
            }
            if let StateSpec::PlaneWave { k } = **first {
                check_commensurate(k, grid, 0)?;
            }
            if let StateSpec::PlaneWave { k } = **second {
                check_commensurate(k, grid, 1)?;
            }
            ComplexField::from_fn(grid, |x1, x2| {
                eval_1d(first, x1, hbar) * eval_1d(second, x2, hbar)
            })
        }
        other => {
            if grid.ndim() != 1 {
                return Err(Error::State("this state spec requires a 1D grid".into()));
            }
            if let StateSpec::PlaneWave { k } = other {
                check_commensurate(*k, grid, 0)?;
            }
            ComplexField::from_fn(grid, |x, _| eval_1d(other, x, hbar))
        }
    };
    if !field.is_finite() {
        return Err(Error::Numerical(
            "initial state evaluated to non-finite values".into(),
        ));
    }
    Ok(field.normalized())
}

/// Ordered wavefunction snapshots with the evolution metadata.
#[derive(Clone, Debug)]
pub struct WavefunctionTrajectory {
    pub constants: Constants,
    pub dt: f64,
    pub snapshots: Vec<(f64, ComplexField)>,
    /// L2 norm recorded at every snapshot.
    pub norm_log: Vec<f64>,
    pub scheme: &'static str,
}

impl WavefunctionTrajectory {
    pub fn grid(&self) -> &Grid {
        self.snapshots[0].1.grid()
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|(t, _)| *t).collect()
    }

    /// Largest deviation of any snapshot norm from the initial norm.
    pub fn norm_drift(&self) -> f64 {
        let n0 = self.norm_log[0];
        self.norm_log
            .iter()
            .fold(0.0_f64, |m, &n| m.max((n - n0).abs()))
    }
}

/// One implicit step; `dt` may be negative to step backward.
pub fn step(
    psi: &ComplexField,
    potential: &ScalarField,
    dt: f64,
    constants: Constants,
) -> Result<ComplexField> {
    assert_eq!(
        psi.grid(),
        potential.grid(),
        "psi and potential grids differ"
    );
    if dt == 0.0 {
        return Err(Error::Evolve("dt must be nonzero".into()));
    }
    let next = cayley_step(psi, potential.values(), dt, constants);
    if !next.is_finite() {
        return Err(Error::Numerical(
            "wavefunction became non-finite during a step".into(),
        ));
    }
    Ok(next)
}

/// Evolve to horizon `T` recording every `snapshot_every`-th state (plus the
/// initial and final states). The final time lands within `dt` of `T`.
pub fn evolve(
    psi0: &ComplexField,
    potential: &Potential,
    constants: Constants,
    horizon: f64,
    dt: f64,
    snapshot_every: usize,
) -> Result<WavefunctionTrajectory> {
    if !(horizon >= 0.0) {
        return Err(Error::Evolve(format!(
            "horizon must be >= 0, got {horizon}"
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::Evolve(format!("dt must be > 0, got {dt}")));
    }
    if snapshot_every == 0 {
        return Err(Error::Evolve("snapshot_every must be >= 1".into()));
    }
    let v = potential.sample(psi0.grid())?;
    let steps = (horizon / dt).round() as usize;
    let mut snapshots = Vec::with_capacity(steps / snapshot_every + 2);
    let mut norm_log = Vec::with_capacity(steps / snapshot_every + 2);
    let mut psi = psi0.clone();
    snapshots.push((0.0, psi.clone()));
    norm_log.push(psi.l2_norm());
    for s in 1..=steps {
        psi = step(&psi, &v, dt, constants)?;
        if s % snapshot_every == 0 || s == steps {
            snapshots.push((s as f64 * dt, psi.clone()));
            norm_log.push(psi.l2_norm());
        }
    }
    Ok(WavefunctionTrajectory {
        constants,
        dt,
        snapshots,
        norm_log,
        scheme: "cayley-implicit-midpoint (2D: palindromic axis sweeps)",
    })
}

/// Manifest written next to exported trajectory snapshots.
#[derive(Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub dt: f64,
    pub horizon: f64,
    pub potential: Potential,
    pub constants: Constants,
    pub scheme: String,
    pub times: Vec<f64>,
    pub norm_log: Vec<f64>,
    pub snapshot_files: Vec<String>,
}

/// Export one CSV per snapshot plus `trajectory.json`.
pub fn export_trajectory(
    traj: &WavefunctionTrajectory,
    potential: &Potential,
    dir: &Path,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for (i, (_, psi)) in traj.snapshots.iter().enumerate() {
        let name = format!("psi_{i:05}.csv");
        write_complex_csv(&dir.join(&name), psi)?;
        files.push(name);
    }
    let manifest = TrajectoryManifest {
        dt: traj.dt,
        horizon: traj.snapshots.last().unwrap().0,
        potential: potential.clone(),
        constants: traj.constants,
        scheme: traj.scheme.to_string(),
        times: traj.times(),
        norm_log: traj.norm_log.clone(),
        snapshot_files: files,
    };
    fs::write(
        dir.join("trajectory.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}
