//! JSON file formats (MDP, observation model, policy, grid, experiment
//! config), the shipped presets, and trace CSV writing.
//!
//! The `paper-10x10-*` presets reconstruct the published 10×10 patrol
//! layout; the sensor coverage areas and terrain placement are a
//! reconstruction, so their long-run reference targets are recorded on the
//! preset rather than asserted by fast tests. `mini-5x5` scales the same
//! shape down for desk-scale runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::detection::DetectionParams;
use crate::gridworld::{
    build_gridworld, build_nominal_gridworld, build_sensor_obs_model, Cell, GridSpec, Sensor,
};
use crate::mdp::{soft_value_iteration, Mdp, PolicyParams};
use crate::obs::ObsModel;
use crate::trainer::{HyperParams, TraceRow};
use crate::{Error, Result};

pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// On-disk MDP: named states/actions, sparse (s, a, s', p) transition
/// records, sparse (s, a, r) rewards. Probabilities are validated on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MdpFile {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub transitions: Vec<(usize, usize, usize, f64)>,
    pub initial_state: usize,
    pub rewards: Vec<(usize, usize, f64)>,
    pub gamma: f64,
    #[serde(default)]
    pub absorbing: Vec<usize>,
}

impl MdpFile {
    pub fn to_mdp(&self) -> Result<Mdp> {
        let n_states = self.states.len();
        let n_actions = self.actions.len();
        let mut merged: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n_states * n_actions];
        for &(s, a, s2, p) in &self.transitions {
            if s >= n_states || a >= n_actions {
                return Err(Error::InvalidModel(format!(
                    "transition record ({s}, {a}, {s2}) out of range"
                )));
            }
            *merged[s * n_actions + a].entry(s2).or_insert(0.0) += p;
        }
        let transitions = merged
            .into_iter()
            .map(|row| row.into_iter().collect())
            .collect();
        let mut rewards = Array2::zeros((n_states, n_actions));
        for &(s, a, r) in &self.rewards {
            if s >= n_states || a >= n_actions {
                return Err(Error::InvalidModel(format!(
                    "reward record ({s}, {a}) out of range"
                )));
            }
            rewards[(s, a)] = r;
        }
        let mut mdp = Mdp::new(
            n_states,
            n_actions,
            transitions,
            self.initial_state,
            rewards,
            self.gamma,
            self.absorbing.clone(),
        )?;
        mdp.state_names = self.states.clone();
        mdp.action_names = self.actions.clone();
        Ok(mdp)
    }

    pub fn from_mdp(mdp: &Mdp) -> MdpFile {
        let mut transitions = Vec::new();
        for s in 0..mdp.n_states {
            for a in 0..mdp.n_actions {
                for &(s2, p) in mdp.successors(s, a) {
                    transitions.push((s, a, s2, p));
                }
            }
        }
        let mut rewards = Vec::new();
        for ((s, a), &r) in mdp.rewards.indexed_iter() {
            if r != 0.0 {
                rewards.push((s, a, r));
            }
        }
        MdpFile {
            states: mdp.state_names.clone(),
            actions: mdp.action_names.clone(),
            transitions,
            initial_state: mdp.initial_state,
            rewards,
            gamma: mdp.gamma,
            absorbing: (0..mdp.n_states).filter(|&s| mdp.is_absorbing(s)).collect(),
        }
    }
}

/// On-disk observation model. When `action_emission` is omitted, a "null"
/// symbol is appended and every nature state emits it with probability one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObsFile {
    pub alphabet: Vec<String>,
    pub n_states: usize,
    pub n_actions: usize,
    pub state_emission: Vec<Vec<f64>>,
    #[serde(default)]
    pub action_emission: Option<Vec<Vec<f64>>>,
}

impl ObsFile {
    pub fn to_obs_model(&self) -> Result<ObsModel> {
        let state = rows_to_array(&self.state_emission)?;
        match &self.action_emission {
            Some(rows) => ObsModel::new(
                self.n_states,
                self.n_actions,
                self.alphabet.clone(),
                state,
                rows_to_array(rows)?,
            ),
            None => ObsModel::with_null_actions(
                self.n_states,
                self.n_actions,
                self.alphabet.clone(),
                state,
            ),
        }
    }
}

fn rows_to_array(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    if rows.is_empty() {
        return Err(Error::InvalidModel("empty emission table".into()));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidModel("ragged emission table".into()));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), cols), flat)
        .map_err(|e| Error::InvalidModel(e.to_string()))
}

/// On-disk policy: the θ table with shape metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyFile {
    pub n_states: usize,
    pub n_actions: usize,
    pub theta: Vec<Vec<f64>>,
    #[serde(default)]
    pub meta: PolicyMeta,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PolicyMeta {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub slip_beta: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl PolicyFile {
    pub fn from_params(theta: &PolicyParams, meta: PolicyMeta) -> PolicyFile {
        PolicyFile {
            n_states: theta.n_states(),
            n_actions: theta.n_actions(),
            theta: theta
                .theta
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect(),
            meta,
        }
    }

    pub fn to_params(&self) -> Result<PolicyParams> {
        if self.theta.len() != self.n_states
            || self.theta.iter().any(|row| row.len() != self.n_actions)
        {
            return Err(Error::InvalidModel(format!(
                "policy table does not match declared shape {}x{}",
                self.n_states, self.n_actions
            )));
        }
        PolicyParams::from_table(rows_to_array(&self.theta)?)
    }
}

/// Sensor record: coverage given either as an explicit cell list or a
/// Manhattan radius around the location.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SensorConfig {
    pub location: Cell,
    #[serde(default)]
    pub radius: Option<usize>,
    #[serde(default)]
    pub cells: Option<Vec<Cell>>,
    #[serde(default = "default_base_probability")]
    pub base_probability: f64,
}

fn default_base_probability() -> f64 {
    0.8
}

impl SensorConfig {
    pub fn to_sensor(&self, spec: &GridSpec) -> Result<Sensor> {
        let mut sensor = match (&self.cells, self.radius) {
            (Some(cells), _) => Sensor {
                location: self.location,
                range_cells: cells.iter().copied().collect(),
                base_probability: self.base_probability,
            },
            (None, Some(radius)) => Sensor::with_radius(self.location, radius, spec),
            (None, None) => {
                return Err(Error::InvalidConfig(format!(
                    "sensor at {:?} needs either a radius or an explicit cell list",
                    self.location
                )))
            }
        };
        sensor.base_probability = self.base_probability;
        Ok(sensor)
    }
}

/// Grid environment: ASCII map plus reward constants and sensors.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridConfig {
    pub map: Vec<String>,
    pub slip_beta: f64,
    #[serde(default = "default_action_cost")]
    pub action_cost: f64,
    #[serde(default = "default_penalty")]
    pub penalty: f64,
    #[serde(default = "default_goal_reward")]
    pub goal_reward: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub sensors: Vec<SensorConfig>,
}

fn default_action_cost() -> f64 {
    0.2
}
fn default_penalty() -> f64 {
    2.0
}
fn default_goal_reward() -> f64 {
    20.0
}
fn default_gamma() -> f64 {
    0.95
}

impl GridConfig {
    pub fn to_spec(&self) -> Result<(GridSpec, Vec<Sensor>)> {
        let rows: Vec<&str> = self.map.iter().map(|s| s.as_str()).collect();
        let spec = GridSpec::from_ascii(
            &rows,
            self.slip_beta,
            self.action_cost,
            self.penalty,
            self.goal_reward,
            self.gamma,
        )?;
        let sensors = self
            .sensors
            .iter()
            .map(|s| s.to_sensor(&spec))
            .collect::<Result<Vec<_>>>()?;
        Ok((spec, sensors))
    }
}

/// Where the environment comes from: an inline grid, a grid file, or raw
/// MDP + observation-model tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvironmentSource {
    Grid { grid: GridConfig },
    GridFile { grid_file: PathBuf },
    Tables { mdp_file: PathBuf, obs_file: PathBuf },
}

/// Long-run reference targets recorded on the paper-10x10 presets.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ReferenceTargets {
    pub detection: f64,
    pub value: f64,
}

/// Everything one experiment needs: environment, nominal-policy settings,
/// detection thresholds, trainer hyperparameters, and the seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub environment: EnvironmentSource,
    #[serde(default = "default_temperature")]
    pub nominal_temperature: f64,
    /// Explicit nominal policy; overrides the soft-value-iteration default.
    #[serde(default)]
    pub nominal_policy_file: Option<PathBuf>,
    pub detection: DetectionParams,
    #[serde(default)]
    pub hyper: HyperParams,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub reference: Option<ReferenceTargets>,
}

fn default_temperature() -> f64 {
    1.0
}

/// A fully constructed experiment.
#[derive(Debug, Clone)]
pub struct LoadedExperiment {
    pub mdp: Mdp,
    pub obs: ObsModel,
    /// θ table whose softmax is the nominal policy.
    pub nominal_theta: PolicyParams,
    /// θ the trainer starts from (entropy-regularized optimum of the
    /// agent's own reward).
    pub initial_theta: PolicyParams,
    /// Present for grid environments; cross-evaluation rebuilds from it.
    pub grid: Option<(GridSpec, Vec<Sensor>)>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.detection.validate()?;
        self.hyper.validate()?;
        if !(self.nominal_temperature > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "nominal_temperature must be positive, got {}",
                self.nominal_temperature
            )));
        }
        Ok(())
    }

    /// Builds the MDP, observation model, nominal policy, and initial θ.
    /// Relative file paths are resolved against `base_dir`.
    pub fn load(&self, base_dir: &Path) -> Result<LoadedExperiment> {
        self.validate()?;
        match &self.environment {
            EnvironmentSource::Grid { grid } => self.load_grid(grid),
            EnvironmentSource::GridFile { grid_file } => {
                let grid: GridConfig = load_json(&base_dir.join(grid_file))?;
                self.load_grid(&grid)
            }
            EnvironmentSource::Tables { mdp_file, obs_file } => {
                let mdp_file: MdpFile = load_json(&base_dir.join(mdp_file))?;
                let obs_file: ObsFile = load_json(&base_dir.join(obs_file))?;
                let mdp = mdp_file.to_mdp()?;
                let obs = obs_file.to_obs_model()?;
                let nominal_theta = match &self.nominal_policy_file {
                    Some(path) => load_json::<PolicyFile>(&base_dir.join(path))?.to_params()?,
                    None => soft_value_iteration(&mdp, self.nominal_temperature)?,
                };
                let initial_theta = soft_value_iteration(&mdp, self.nominal_temperature)?;
                Ok(LoadedExperiment {
                    mdp,
                    obs,
                    nominal_theta,
                    initial_theta,
                    grid: None,
                })
            }
        }
    }

    fn load_grid(&self, grid: &GridConfig) -> Result<LoadedExperiment> {
        let (spec, sensors) = grid.to_spec()?;
        let mdp = build_gridworld(&spec)?;
        let obs = build_sensor_obs_model(&sensors, &spec)?;
        let nominal_theta = match &self.nominal_policy_file {
            Some(path) => load_json::<PolicyFile>(path)?.to_params()?,
            None => {
                let user_mdp = build_nominal_gridworld(&spec)?;
                soft_value_iteration(&user_mdp, self.nominal_temperature)?
            }
        };
        let initial_theta = soft_value_iteration(&mdp, self.nominal_temperature)?;
        Ok(LoadedExperiment {
            mdp,
            obs,
            nominal_theta,
            initial_theta,
            grid: Some((spec, sensors)),
        })
    }
}

/// Names of the shipped presets.
pub fn preset_names() -> Vec<&'static str> {
    vec![
        "mini-5x5",
        "paper-10x10-b005",
        "paper-10x10-b010",
        "paper-10x10-b015",
    ]
}

/// Returns a shipped preset by name.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    match name {
        "mini-5x5" => Ok(mini_5x5()),
        "paper-10x10-b005" => Ok(paper_10x10(0.05, 40.0, ReferenceTargets {
            detection: 0.168,
            value: 6.3,
        })),
        "paper-10x10-b010" => Ok(paper_10x10(0.10, 10.0, ReferenceTargets {
            detection: 0.089,
            value: 5.1,
        })),
        "paper-10x10-b015" => Ok(paper_10x10(0.15, 10.0, ReferenceTargets {
            detection: 0.088,
            value: 3.47,
        })),
        other => Err(Error::InvalidConfig(format!(
            "unknown preset '{other}' (available: {})",
            preset_names().join(", ")
        ))),
    }
}

/// Desk-scale 5×5 world with two sensors. The straight route from the start
/// to the agent goal crosses both coverage areas; the detour along the
/// bottom row and left column stays outside them.
fn mini_5x5() -> ExperimentConfig {
    ExperimentConfig {
        environment: EnvironmentSource::Grid {
            grid: GridConfig {
                map: vec![
                    "A.g..".into(),
                    ".....".into(),
                    "....X".into(),
                    "...G.".into(),
                    "U..S.".into(),
                ],
                slip_beta: 0.1,
                action_cost: 0.2,
                penalty: 2.0,
                goal_reward: 20.0,
                gamma: 0.95,
                sensors: vec![
                    SensorConfig {
                        location: (1, 3),
                        radius: Some(2),
                        cells: None,
                        base_probability: 0.8,
                    },
                    SensorConfig {
                        location: (2, 2),
                        radius: Some(1),
                        cells: None,
                        base_probability: 0.8,
                    },
                ],
            },
        },
        nominal_temperature: 0.2,
        nominal_policy_file: None,
        detection: DetectionParams {
            epsilon: 3.0,
            beta_threshold: f64::INFINITY,
            alpha: 0.2,
        },
        hyper: HyperParams {
            eta: 0.02,
            kappa: 0.01,
            lambda_init: 10.0,
            beta_init: 1.0,
            d: 0.02,
            delta0: 1e-3,
            batches_m: 10,
            trajectories_per_batch: 40,
            horizon: 25,
            max_outer_iterations: 150,
            weight_clip: 1e3,
        },
        seed: 7,
        reference: None,
    }
}

/// The 10×10 patrol layout. Sensor locations and hyperparameters are the
/// published ones; coverage radii, walls, and terrain placement are a
/// reconstruction, so treat the reference targets as long-run guides rather
/// than test gates.
fn paper_10x10(slip_beta: f64, lambda_init: f64, reference: ReferenceTargets) -> ExperimentConfig {
    ExperimentConfig {
        environment: EnvironmentSource::Grid {
            grid: GridConfig {
                map: vec![
                    "A.g.......".into(),
                    "Gg....##..".into(),
                    "Gg##......".into(),
                    "Gg##...X..".into(),
                    "Gg.......g".into(),
                    "Gg...g....".into(),
                    "Gg.G......".into(),
                    "Ug....##..".into(),
                    "G.X...##..".into(),
                    "G.....S...".into(),
                ],
                slip_beta,
                action_cost: 0.2,
                penalty: 2.0,
                goal_reward: 20.0,
                gamma: 0.95,
                sensors: vec![
                    SensorConfig {
                        location: (4, 0),
                        radius: Some(4),
                        cells: None,
                        base_probability: 0.8,
                    },
                    SensorConfig {
                        location: (6, 4),
                        radius: Some(4),
                        cells: None,
                        base_probability: 0.8,
                    },
                    SensorConfig {
                        location: (1, 4),
                        radius: Some(3),
                        cells: None,
                        base_probability: 0.8,
                    },
                ],
            },
        },
        nominal_temperature: 0.2,
        nominal_policy_file: None,
        detection: DetectionParams {
            epsilon: 3.0,
            beta_threshold: f64::INFINITY,
            alpha: 0.2,
        },
        hyper: HyperParams {
            eta: 0.005,
            kappa: 0.01,
            lambda_init,
            beta_init: 1.0,
            d: 0.01,
            delta0: 1e-4,
            batches_m: 20,
            trajectories_per_batch: 40,
            horizon: 100,
            max_outer_iterations: 400,
            weight_clip: 1e3,
        },
        seed: 7,
        reference: Some(reference),
    }
}

/// Writes the training trace with the documented header.
pub fn write_trace_csv(path: &Path, trace: &[TraceRow]) -> Result<()> {
    let mut out = String::from("iter,lagrangian,value,detection,kl,lambda,beta\n");
    for row in trace {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.iter, row.lagrangian, row.value, row.detection, row.kl, row.lambda, row.beta
        ));
    }
    fs::write(path, out)?;
    Ok(())
}
