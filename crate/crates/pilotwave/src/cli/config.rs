//! Scenario configuration: strict parsing (unknown keys rejected) from TOML,
//! with JSON accepted as an alternative encoding of the same schema.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{Constants, Potential, StateSpec};
use crate::lattice::{Boundary, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    EvolveOnly,
    MadelungResiduals,
    TransformResiduals,
    Equivariance,
    VanishingExpectations,
    BackwardHjb,
    ClassicalTransforms,
    Nelson,
    HalfQDuality,
    DpSolvers,
    SubEnsembleDemo,
}

impl Scenario {
    /// Scenarios that draw random numbers and therefore demand a seed.
    pub fn is_stochastic(self) -> bool {
        matches!(
            self,
            Scenario::Equivariance
                | Scenario::VanishingExpectations
                | Scenario::BackwardHjb
                | Scenario::DpSolvers
                | Scenario::SubEnsembleDemo
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// 1 or 2; 2D grids are square.
    #[serde(default = "default_ndim")]
    pub ndim: usize,
    pub points: usize,
    pub extent: f64,
    pub boundary: Boundary,
    /// Lower domain edge; defaults to `-extent/2` (centered).
    #[serde(default)]
    pub origin: Option<f64>,
}

fn default_ndim() -> usize {
    1
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        let origin = self.origin.unwrap_or(-0.5 * self.extent);
        match self.ndim {
            1 => Grid::new_1d(self.points, self.extent, origin, self.boundary),
            2 => Grid::new_2d(
                [self.points, self.points],
                [self.extent, self.extent],
                [origin, origin],
                self.boundary,
            ),
            n => Err(Error::Config(format!("ndim must be 1 or 2, got {n}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub mass: f64,
    /// Diffusion constant for the phase transformations; defaults to hbar.
    #[serde(default)]
    pub k: Option<f64>,
    /// Diffusion constant for the classical transformations; defaults to hbar.
    #[serde(default)]
    pub k_classical: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        ConstantsConfig {
            hbar: 1.0,
            mass: 1.0,
            k: None,
            k_classical: None,
        }
    }
}

impl ConstantsConfig {
    pub fn constants(&self) -> Constants {
        Constants {
            hbar: self.hbar,
            mass: self.mass,
        }
    }

    pub fn k(&self) -> f64 {
        self.k.unwrap_or(self.hbar)
    }

    pub fn k_classical(&self) -> f64 {
        self.k_classical.unwrap_or(self.hbar)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
}

fn default_snapshot_every() -> usize {
    1
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    #[serde(default = "default_particles")]
    pub n_particles: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Kernel samples per site for backward propagation / estimators.
    #[serde(default = "default_samples")]
    pub samples_per_site: usize,
}

fn default_particles() -> usize {
    100_000
}
fn default_bins() -> usize {
    64
}
fn default_samples() -> usize {
    256
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_particles: default_particles(),
            bins: default_bins(),
            samples_per_site: default_samples(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpConfig {
    #[serde(default = "default_mdps")]
    pub n_mdps: usize,
    #[serde(default = "default_states")]
    pub states: usize,
    #[serde(default = "default_actions")]
    pub actions: usize,
    #[serde(default = "default_gamma")]
    pub discount: f64,
    #[serde(default = "default_proposals")]
    pub proposals_per_state: usize,
    /// Optional path to an MDP JSON file solved instead of random instances.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mdp_path: Option<PathBuf>,
}

fn default_mdps() -> usize {
    50
}
fn default_states() -> usize {
    20
}
fn default_actions() -> usize {
    4
}
fn default_gamma() -> f64 {
    0.9
}
fn default_proposals() -> usize {
    8
}

impl Default for DpConfig {
    fn default() -> Self {
        DpConfig {
            n_mdps: default_mdps(),
            states: default_states(),
            actions: default_actions(),
            discount: default_gamma(),
            proposals_per_state: default_proposals(),
            mdp_path: None,
        }
    }
}

/// One scenario run, fully described.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub master_seed: Option<u64>,
    /// Worker threads; 0 or absent uses the process default.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub potential: Option<Potential>,
    #[serde(default)]
    pub state: Option<StateSpec>,
    #[serde(default)]
    pub constants: Option<ConstantsConfig>,
    #[serde(default)]
    pub time: Option<TimeConfig>,
    #[serde(default)]
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default)]
    pub dp: Option<DpConfig>,
}

impl ScenarioConfig {
    /// Parse from TOML (default) or JSON (`.json` extension), rejecting
    /// unknown keys in either encoding.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: ScenarioConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{e}")))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{e}")))?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenario.is_stochastic() && self.master_seed.is_none() {
            return Err(Error::Config(format!(
                "scenario {:?} is stochastic: master_seed is mandatory",
                self.scenario
            )));
        }
        if let Some(t) = &self.time {
            if !(t.dt > 0.0) || !(t.horizon >= 0.0) || t.snapshot_every == 0 {
                return Err(Error::Config(
                    "time section must have dt > 0, horizon >= 0, snapshot_every >= 1".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn constants_config(&self) -> ConstantsConfig {
        self.constants.unwrap_or_default()
    }

    pub fn grid_required(&self) -> Result<Grid> {
        self.grid
            .as_ref()
            .ok_or_else(|| Error::Config("this scenario needs a [grid] section".into()))?
            .build()
    }

    pub fn time_required(&self) -> Result<TimeConfig> {
        self.time
            .ok_or_else(|| Error::Config("this scenario needs a [time] section".into()))
    }

    pub fn state_required(&self) -> Result<&StateSpec> {
        self.state
            .as_ref()
            .ok_or_else(|| Error::Config("this scenario needs a [state] section".into()))
    }

    pub fn potential_required(&self) -> Result<&Potential> {
        self.potential
            .as_ref()
            .ok_or_else(|| Error::Config("this scenario needs a [potential] section".into()))
    }

    pub fn seed_required(&self) -> Result<u64> {
        self.master_seed
            .ok_or_else(|| Error::Config("master_seed is required".into()))
    }

    /// Output directory: explicit, else `$PILOTWAVE_OUT/<scenario>`, else
    /// `./pilotwave-out/<scenario>`.
    pub fn resolved_output_dir(&self) -> Result<PathBuf> {
        if let Some(dir) = &self.output_dir {
            return Ok(dir.clone());
        }
        let root = std::env::var_os(super::OUTPUT_ROOT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("pilotwave-out"));
        let name = format!("{:?}", self.scenario).to_lowercase();
        Ok(root.join(name))
    }

    /// Write `manifest.json`: resolved config, versions, seed, wall time.
    pub fn write_manifest(&self, dir: &Path, wall_secs: f64) -> Result<()> {
        let manifest = serde_json::json!({
            "config": self,
            "crate_version": env!("CARGO_PKG_VERSION"),
            "seed": self.master_seed,
            "wall_time_secs": wall_secs,
            "unix_time": std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        });
        fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        Ok(())
    }
}
