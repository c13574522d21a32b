//! Scenario file schema, parsing, and compilation into runnable form.
//!
//! Scenarios are JSON documents. Agent and edge indices are 1-based in
//! files and converted internally. A minimal protocol-1 scenario:
//!
//! ```json
//! {
//!   "name": "pair",
//!   "protocol": 1,
//!   "agents": [
//!     { "init": [0.3, 0.0, 0.0] },
//!     { "init": [-0.3, 0.0, 0.0], "controller": { "kind": "lipschitz", "gain": 2.0 } }
//!   ],
//!   "edges": [[1, 2, 1.0]]
//! }
//! ```
//!
//! `init` accepts an axis-angle triple, a row-major rotation matrix
//! (9 numbers, converted through the matrix logarithm), or the string
//! `"random(C)"` for a seeded draw with norm at most `C`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{ControllerKind, Protocol, ProtocolConfig};
use crate::graph::Topology;
use crate::scenario::rng::SplitMix64;
use crate::sim::{IntegratorConfig, Mode, SimError, SlidingTrajectory, StackedState};
use crate::so3::{self, TRANSITION_DOMAIN};

use std::path::Path;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("unknown builtin scenario '{0}'")]
    UnknownBuiltin(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub protocol: u8,
    pub agents: Vec<AgentSpec>,
    /// `[i, j, weight]` with 1-based endpoints.
    pub edges: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub seed: u64,
    /// Replaces forward integration by the closed-form drifting-consensus
    /// trajectory; only meaningful for all-sign protocol-1 scenarios.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sliding: Option<SlidingSpec>,
}

fn default_tolerance() -> f64 {
    1e-6
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub init: InitSpec,
    /// Feedback law under protocol 1; must be omitted under protocol 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerSpec>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(untagged)]
pub enum InitSpec {
    /// 3 numbers: axis-angle; 9 numbers: row-major rotation matrix.
    Components(Vec<f64>),
    /// `"random(C)"`: seeded uniform direction times uniform radius in (0, C].
    Random(String),
}

#[derive(Serialize, Deserialize, Debug, Clone, Copy, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControllerSpec {
    Sign,
    SignC,
    Lipschitz {
        #[serde(default = "default_gain")]
        gain: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        saturation: Option<f64>,
    },
}

fn default_gain() -> f64 {
    1.0
}

#[derive(Serialize, Deserialize, Debug, Clone, Copy, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum ModeSpec {
    Deadband,
    Smoothed(f64),
}

#[derive(Serialize, Deserialize, Debug, Clone, Copy, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSpec {
    pub h: f64,
    pub t_max: f64,
    pub mode: ModeSpec,
    pub record_every: usize,
    pub reorthonormalize_rotations: bool,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        IntegratorSpec {
            h: 1e-3,
            t_max: 10.0,
            mode: ModeSpec::Deadband,
            record_every: 1,
            reorthonormalize_rotations: false,
        }
    }
}

#[derive(Serialize, Deserialize, Debug, Clone, Copy, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SlidingSpec {
    pub xbar: [f64; 3],
    pub eps1: f64,
    #[serde(default)]
    pub t0: f64,
}

pub fn parse_scenario(text: &str) -> Result<ScenarioFile, ScenarioError> {
    serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn load_scenario(path: &Path) -> Result<ScenarioFile, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

/// A scenario resolved into validated runtime structures.
#[derive(Debug, Clone)]
pub struct CompiledScenario {
    pub name: String,
    pub protocol_id: u8,
    pub config: ProtocolConfig,
    pub initial: StackedState,
    pub integrator: IntegratorConfig,
    pub tolerance: f64,
    pub seed: u64,
    pub sliding: Option<SlidingTrajectory>,
}

fn invalid(msg: String) -> ScenarioError {
    ScenarioError::Invalid(msg)
}

fn compile_topology(file: &ScenarioFile) -> Result<Topology, ScenarioError> {
    let n = file.agents.len();
    let mut edges = Vec::with_capacity(file.edges.len());
    for &(i, j, w) in &file.edges {
        if i == 0 || j == 0 {
            return Err(invalid(format!(
                "edge [{i}, {j}] uses 0; agent indices are 1-based"
            )));
        }
        edges.push((i - 1, j - 1, w));
    }
    Topology::new(n, &edges).map_err(|e| invalid(format!("edges: {e}")))
}

fn compile_protocol(
    file: &ScenarioFile,
    topology: Topology,
) -> Result<ProtocolConfig, ScenarioError> {
    let protocol = match file.protocol {
        1 => {
            let kinds = file
                .agents
                .iter()
                .map(|a| match a.controller.unwrap_or(ControllerSpec::Sign) {
                    ControllerSpec::Sign => ControllerKind::SignDirectional,
                    ControllerSpec::SignC => ControllerKind::SignComponentwise,
                    ControllerSpec::Lipschitz { gain, saturation } => {
                        ControllerKind::LipschitzDirectional { gain, saturation }
                    }
                })
                .collect();
            Protocol::NeighborSum { kinds }
        }
        2 => {
            if let Some(k) = file.agents.iter().position(|a| a.controller.is_some()) {
                return Err(invalid(format!(
                    "agent {}: protocol 2 applies edge signs and takes no per-agent controller",
                    k + 1
                )));
            }
            Protocol::EdgeSign
        }
        p => return Err(invalid(format!("protocol must be 1 or 2, got {p}"))),
    };
    ProtocolConfig::new(topology, protocol).map_err(|e| invalid(e.to_string()))
}

fn parse_random_spec(s: &str) -> Option<f64> {
    let inner = s.trim().strip_prefix("random(")?.strip_suffix(')')?;
    inner.trim().parse().ok()
}

fn compile_initial(
    file: &ScenarioFile,
    rng: &mut SplitMix64,
) -> Result<Vec<Vector3<f64>>, ScenarioError> {
    let mut x0 = Vec::with_capacity(file.agents.len());
    for (idx, agent) in file.agents.iter().enumerate() {
        let label = idx + 1;
        let xi = match &agent.init {
            InitSpec::Components(v) if v.len() == 3 => Vector3::new(v[0], v[1], v[2]),
            InitSpec::Components(v) if v.len() == 9 => {
                let m = Matrix3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]);
                let r = so3::Rotation::try_from_matrix(m)
                    .map_err(|e| invalid(format!("agent {label}: init matrix: {e}")))?;
                so3::log_map(&r).map_err(|e| invalid(format!("agent {label}: init matrix: {e}")))?
            }
            InitSpec::Components(v) => return Err(invalid(format!(
                "agent {label}: init needs 3 numbers (axis-angle) or 9 (rotation matrix), got {}",
                v.len()
            ))),
            InitSpec::Random(s) => {
                let max_norm = parse_random_spec(s).ok_or_else(|| {
                    invalid(format!(
                        "agent {label}: init string must look like \"random(1.5)\", got {s:?}"
                    ))
                })?;
                if !(max_norm > 0.0 && max_norm < TRANSITION_DOMAIN) {
                    return Err(invalid(format!(
                        "agent {label}: random radius {max_norm} must lie in (0, 2*pi)"
                    )));
                }
                draw_initial(rng, max_norm)
            }
        };
        if !xi.iter().all(|c| c.is_finite()) {
            return Err(invalid(format!("agent {label}: init must be finite")));
        }
        if xi.norm() >= TRANSITION_DOMAIN {
            return Err(invalid(format!(
                "agent {label}: init norm {:.6} must be below 2*pi",
                xi.norm()
            )));
        }
        x0.push(xi);
    }
    Ok(x0)
}

/// One seeded initial-condition draw: uniform direction scaled by a uniform
/// radius in (0, C]. Consumes a fixed number of generator outputs so draw
/// sequences line up across implementations.
pub fn draw_initial(rng: &mut SplitMix64, max_norm: f64) -> Vector3<f64> {
    let dir = rng.direction();
    dir * (max_norm * rng.uniform())
}

fn compile_integrator(spec: &IntegratorSpec) -> Result<IntegratorConfig, ScenarioError> {
    if !(spec.h > 0.0) || !spec.h.is_finite() {
        return Err(invalid(format!(
            "integrator.h {} must be positive and finite",
            spec.h
        )));
    }
    if !(spec.t_max > 0.0) || !spec.t_max.is_finite() {
        return Err(invalid(format!(
            "integrator.t_max {} must be positive and finite",
            spec.t_max
        )));
    }
    if spec.record_every == 0 {
        return Err(invalid("integrator.record_every must be at least 1".into()));
    }
    let mode = match spec.mode {
        ModeSpec::Deadband => Mode::Deadband,
        ModeSpec::Smoothed(eps) => {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(invalid(format!(
                    "integrator.mode smoothing width {eps} must be positive and finite"
                )));
            }
            Mode::Smoothed { eps }
        }
    };
    Ok(IntegratorConfig {
        h: spec.h,
        t_max: spec.t_max,
        mode,
        record_every: spec.record_every,
        reorthonormalize_rotations: spec.reorthonormalize_rotations,
    })
}

/// Validates a parsed scenario and resolves it into runtime structures,
/// drawing any randomized initial conditions from the scenario seed.
pub fn compile(file: &ScenarioFile) -> Result<CompiledScenario, ScenarioError> {
    let topology = compile_topology(file)?;
    let config = compile_protocol(file, topology)?;
    if !(file.tolerance > 0.0) || !file.tolerance.is_finite() {
        return Err(invalid(format!(
            "tolerance {} must be positive and finite",
            file.tolerance
        )));
    }
    let mut rng = SplitMix64::new(file.seed);
    let x0 = compile_initial(file, &mut rng)?;
    let integrator = compile_integrator(&file.integrator)?;
    let sliding = match &file.sliding {
        None => None,
        Some(s) => {
            let all_sign = matches!(
                &config.protocol,
                Protocol::NeighborSum { kinds }
                    if kinds.iter().all(|k| matches!(k, ControllerKind::SignDirectional))
            );
            if !all_sign {
                return Err(invalid(
                    "sliding: the closed-form drifting run requires protocol 1 with every \
                     agent under the directional sign controller"
                        .into(),
                ));
            }
            let xbar = Vector3::new(s.xbar[0], s.xbar[1], s.xbar[2]);
            Some(
                SlidingTrajectory::new(xbar, s.eps1, s.t0, file.agents.len())
                    .map_err(|e| invalid(format!("sliding: {e}")))?,
            )
        }
    };
    Ok(CompiledScenario {
        name: file.name.clone(),
        protocol_id: file.protocol,
        config,
        initial: StackedState::new(0.0, x0),
        integrator,
        tolerance: file.tolerance,
        seed: file.seed,
        sliding,
    })
}
