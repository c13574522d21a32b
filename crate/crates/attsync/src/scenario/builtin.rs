//! Compiled-in example scenarios, runnable with `--builtin NAME`.

use crate::scenario::config::{
    AgentSpec, ControllerSpec, InitSpec, IntegratorSpec, ModeSpec, ScenarioFile, SlidingSpec,
};
use crate::scenario::ScenarioError;

pub const EXAMPLE2_FTC: &str = "example2-ftc";
pub const EXAMPLE2_ASYMPTOTIC: &str = "example2-asymptotic";
pub const EXAMPLE1_SLIDING: &str = "example1-sliding";
pub const EXAMPLE1_SLIDING_ANALYTIC: &str = "example1-sliding-analytic";

pub fn builtin_names() -> &'static [&'static str] {
    &[
        EXAMPLE2_FTC,
        EXAMPLE2_ASYMPTOTIC,
        EXAMPLE1_SLIDING,
        EXAMPLE1_SLIDING_ANALYTIC,
    ]
}

fn agent(init: [f64; 3], controller: Option<ControllerSpec>) -> AgentSpec {
    AgentSpec {
        init: InitSpec::Components(init.to_vec()),
        controller,
    }
}

fn path3_edges() -> Vec<(usize, usize, f64)> {
    vec![(1, 2, 1.0), (2, 3, 1.0)]
}

fn triangle_edges() -> Vec<(usize, usize, f64)> {
    vec![(1, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)]
}

/// Three-agent path: a unit-gain Lipschitz agent and two sign agents.
/// Reaches consensus in finite time, within the guaranteed settling bound.
fn example2_ftc() -> ScenarioFile {
    ScenarioFile {
        name: EXAMPLE2_FTC.to_string(),
        protocol: 1,
        agents: vec![
            agent(
                [1.2, 0.4, -0.5],
                Some(ControllerSpec::Lipschitz {
                    gain: 1.0,
                    saturation: None,
                }),
            ),
            agent([-0.8, 0.9, 0.3], Some(ControllerSpec::Sign)),
            agent([0.2, -1.1, 0.7], Some(ControllerSpec::Sign)),
        ],
        edges: path3_edges(),
        integrator: IntegratorSpec {
            h: 1e-3,
            t_max: 10.0,
            mode: ModeSpec::Deadband,
            record_every: 10,
            reorthonormalize_rotations: false,
        },
        tolerance: 1e-6,
        seed: 1,
        sliding: None,
    }
}

/// Three-agent path whose two Lipschitz ends start antipodally while the
/// sign agent sits at the origin; by symmetry the middle never moves and
/// the ends decay like exp(-t), so consensus is only asymptotic.
fn example2_asymptotic() -> ScenarioFile {
    ScenarioFile {
        name: EXAMPLE2_ASYMPTOTIC.to_string(),
        protocol: 1,
        agents: vec![
            agent(
                [1.0, 0.0, 0.0],
                Some(ControllerSpec::Lipschitz {
                    gain: 1.0,
                    saturation: None,
                }),
            ),
            agent([0.0, 0.0, 0.0], Some(ControllerSpec::Sign)),
            agent(
                [-1.0, 0.0, 0.0],
                Some(ControllerSpec::Lipschitz {
                    gain: 1.0,
                    saturation: None,
                }),
            ),
        ],
        edges: path3_edges(),
        integrator: IntegratorSpec {
            h: 2e-5,
            t_max: 5.0,
            mode: ModeSpec::Deadband,
            record_every: 2500,
            reorthonormalize_rotations: false,
        },
        tolerance: 1e-6,
        seed: 1,
        sliding: None,
    }
}

/// All-sign triangle integrated forward. The guarantee check flags the
/// sliding risk; the forward run from these particular initial conditions
/// still converges.
fn example1_sliding() -> ScenarioFile {
    ScenarioFile {
        name: EXAMPLE1_SLIDING.to_string(),
        protocol: 1,
        agents: vec![
            agent([1.2, 0.4, -0.5], Some(ControllerSpec::Sign)),
            agent([-0.8, 0.9, 0.3], Some(ControllerSpec::Sign)),
            agent([0.2, -1.1, 0.7], Some(ControllerSpec::Sign)),
        ],
        edges: triangle_edges(),
        integrator: IntegratorSpec {
            h: 1e-3,
            t_max: 10.0,
            mode: ModeSpec::Deadband,
            record_every: 10,
            reorthonormalize_rotations: false,
        },
        tolerance: 1e-6,
        seed: 1,
        sliding: None,
    }
}

/// The drifting-consensus solution itself: all three sign agents share one
/// attitude whose norm grows linearly from 3 at rate 0.5, crossing pi at
/// t = 2*(pi - 3). Evaluated in closed form and certified pointwise as a
/// Filippov solution.
fn example1_sliding_analytic() -> ScenarioFile {
    ScenarioFile {
        name: EXAMPLE1_SLIDING_ANALYTIC.to_string(),
        protocol: 1,
        agents: vec![
            agent([3.0, 0.0, 0.0], Some(ControllerSpec::Sign)),
            agent([3.0, 0.0, 0.0], Some(ControllerSpec::Sign)),
            agent([3.0, 0.0, 0.0], Some(ControllerSpec::Sign)),
        ],
        edges: triangle_edges(),
        integrator: IntegratorSpec {
            h: 0.01,
            t_max: 1.0,
            mode: ModeSpec::Deadband,
            record_every: 1,
            reorthonormalize_rotations: false,
        },
        tolerance: 1e-12,
        seed: 1,
        sliding: Some(SlidingSpec {
            xbar: [3.0, 0.0, 0.0],
            eps1: 0.5,
            t0: 0.0,
        }),
    }
}

pub fn builtin(name: &str) -> Result<ScenarioFile, ScenarioError> {
    match name {
        EXAMPLE2_FTC => Ok(example2_ftc()),
        EXAMPLE2_ASYMPTOTIC => Ok(example2_asymptotic()),
        EXAMPLE1_SLIDING => Ok(example1_sliding()),
        EXAMPLE1_SLIDING_ANALYTIC => Ok(example1_sliding_analytic()),
        other => Err(ScenarioError::UnknownBuiltin(other.to_string())),
    }
}
