//! Executes a compiled scenario and renders its artifacts.
//!
//! Forward scenarios integrate the closed loop; scenarios with a `sliding`
//! section instead evaluate the closed-form drifting-consensus trajectory
//! on the same time grid and certify it pointwise against the differential
//! inclusion. Both paths produce the same artifact set: two CSVs
//! (per-agent trajectory, monitor channels) and two JSON documents
//! (diagnostics, guarantee report), all written atomically.

use serde::Serialize;

use crate::analysis::{self, Convergence, RateConstants};
use crate::control::{self, GuaranteeReport, Protocol};
use crate::scenario::config::CompiledScenario;
use crate::scenario::ScenarioError;
use crate::sim::{self, ChannelSeries, Event, EventKind, SimResult};
use crate::so3::TRANSITION_DOMAIN;

use std::f64::consts::PI;
use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    /// `finite_time`, `asymptotic`, or `none`.
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consensus_time: Option<f64>,
}

impl Classification {
    fn from(c: Convergence) -> Self {
        match c {
            Convergence::FiniteTime { time } => Classification {
                label: "finite_time".to_string(),
                consensus_time: Some(time),
            },
            Convergence::Asymptotic => Classification {
                label: "asymptotic".to_string(),
                consensus_time: None,
            },
            Convergence::None => Classification {
                label: "none".to_string(),
                consensus_time: None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRecord {
    pub t: f64,
    pub kind: String,
    /// 1-based, present only for domain exits.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agent: Option<usize>,
}

impl EventRecord {
    fn from(e: &Event) -> Self {
        match e.kind {
            EventKind::PiCrossing => EventRecord {
                t: e.t,
                kind: "pi_crossing".to_string(),
                agent: None,
            },
            EventKind::OutOfDomain { agent } => EventRecord {
                t: e.t,
                kind: "out_of_domain".to_string(),
                agent: Some(agent + 1),
            },
            EventKind::Consensus => EventRecord {
                t: e.t,
                kind: "consensus".to_string(),
                agent: None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipCheck {
    /// Largest distance from the recorded velocities to the set-valued
    /// closed loop over all certified samples.
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainExit {
    pub t: f64,
    /// 1-based.
    pub agent: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub scenario: String,
    pub protocol: u8,
    pub classification: Classification,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_constants: Option<RateConstants>,
    /// Whether the observed consensus time respected the settling bound;
    /// absent when no finite-time guarantee applies.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub settling_bound_met: Option<bool>,
    pub caveats: Vec<String>,
    pub events: Vec<EventRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub membership: Option<MembershipCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rotation_drift_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_of_domain: Option<DomainExit>,
    pub samples: usize,
    pub end_time: f64,
    pub final_disagreement: f64,
    pub final_max_norm: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub name: String,
    pub result: SimResult,
    pub guarantees: GuaranteeReport,
    pub diagnostics: Diagnostics,
}

impl RunOutput {
    /// 0 when the guaranteed (or certified) outcome was observed, 1 when
    /// the run completed with caveats, 3 when the state left the domain.
    pub fn exit_code(&self) -> i32 {
        if self.result.out_of_domain.is_some() {
            3
        } else if self.diagnostics.caveats.is_empty() {
            0
        } else {
            1
        }
    }
}

/// Evaluates the closed-form trajectory on the scenario's time grid.
fn evaluate_sliding(sc: &CompiledScenario) -> (SimResult, MembershipCheck) {
    let s = sc.sliding.as_ref().expect("analytic scenario");
    let h = sc.integrator.h;
    let steps = (sc.integrator.t_max / h).round().max(1.0) as usize;
    let nu = s.velocities();

    let mut result = SimResult {
        times: Vec::new(),
        states: Vec::new(),
        channels: ChannelSeries::default(),
        events: Vec::new(),
        out_of_domain: None,
        peak_max_norm: 0.0,
        peak_sum_squares: 0.0,
        rotation_drift_max: None,
    };
    let mut max_residual = 0.0f64;
    let mut certified = 0usize;
    let mut prev_max = f64::NAN;

    for k in 0..=steps {
        let t = s.t0() + (k as f64) * h;
        let state = s.state_at(t);
        let ch = analysis::lyapunov_channels(&state.x, &sc.config.topology);
        let escaped = ch.max_norm >= TRANSITION_DOMAIN;
        if !escaped {
            let r = sim::filippov_residual(&state, &nu, &sc.config).expect("in-domain sample");
            max_residual = max_residual.max(r);
            certified += 1;
        }
        if k > 0 && prev_max < PI && ch.max_norm >= PI {
            let frac = (PI - prev_max) / (ch.max_norm - prev_max);
            result.events.push(Event {
                t: t - h + frac * h,
                kind: EventKind::PiCrossing,
            });
        }
        prev_max = ch.max_norm;
        result.times.push(t);
        result.states.push(state.x.clone());
        result.channels.v1.push(ch.v1);
        result.channels.v2.push(ch.v2);
        result.channels.v3.push(ch.v3);
        result.channels.disagreement.push(ch.disagreement);
        result.channels.max_norm.push(ch.max_norm);
        result
            .channels
            .agent_norms
            .push(state.x.iter().map(|v| v.norm()).collect());
        result.peak_max_norm = result.peak_max_norm.max(ch.max_norm);
        result.peak_sum_squares = result
            .peak_sum_squares
            .max(state.x.iter().map(|v| v.norm_squared()).sum());
        if escaped {
            result.events.push(Event {
                t,
                kind: EventKind::OutOfDomain { agent: 0 },
            });
            result.out_of_domain = Some((t, 0));
            break;
        }
    }

    let membership = MembershipCheck {
        max_residual,
        tolerance: sc.tolerance,
        pass: max_residual <= sc.tolerance,
        samples: certified,
    };
    (result, membership)
}

/// Runs a compiled scenario and assembles its diagnostics.
pub fn run_scenario(sc: &CompiledScenario) -> Result<RunOutput, ScenarioError> {
    let guarantees = control::validate_guarantees(&sc.config)
        .map_err(|e| ScenarioError::Invalid(e.to_string()))?;

    let (mut result, membership) = if sc.sliding.is_some() {
        let (result, membership) = evaluate_sliding(sc);
        (result, Some(membership))
    } else {
        (
            sim::simulate(&sc.initial, &sc.config, &sc.integrator)?,
            None,
        )
    };

    let classification = analysis::classify_convergence(&result, sc.tolerance, None)
        .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    if let Convergence::FiniteTime { time } = classification {
        result.events.push(Event {
            t: time,
            kind: EventKind::Consensus,
        });
        result.events.sort_by(|a, b| a.t.total_cmp(&b.t));
    }

    let rate_constants = match &sc.config.protocol {
        Protocol::NeighborSum { .. } => {
            analysis::rate_constants(&sc.initial.x, &sc.config.topology).ok()
        }
        Protocol::EdgeSign => None,
    };

    let settling_bound_met = match (&classification, &rate_constants) {
        _ if !guarantees.finite_time => None,
        (Convergence::FiniteTime { time }, Some(rc)) => Some(*time <= rc.settling_bound),
        (_, Some(_)) => Some(false),
        (_, None) => None,
    };

    let mut caveats = Vec::new();
    if let Some(m) = &membership {
        if !m.pass {
            caveats.push(format!(
                "closed-form trajectory failed the inclusion check (residual {:.3e} > {:.3e})",
                m.max_residual, m.tolerance
            ));
        }
    } else if guarantees.finite_time {
        match settling_bound_met {
            Some(true) => {}
            _ => caveats.push(
                "guaranteed finite-time consensus was not observed within the settling bound"
                    .to_string(),
            ),
        }
    } else if guarantees.sliding_risk {
        caveats.push(
            "no convergence guarantee: all-sign network admits drifting consensus".to_string(),
        );
    } else if guarantees.asymptotic_only {
        caveats.push("convergence is asymptotic only; no finite settling time".to_string());
    } else {
        caveats.push("finite-time consensus is not guaranteed for this configuration".to_string());
    }

    let diagnostics = Diagnostics {
        scenario: sc.name.clone(),
        protocol: sc.protocol_id,
        classification: Classification::from(classification),
        rate_constants,
        settling_bound_met,
        caveats,
        events: result.events.iter().map(EventRecord::from).collect(),
        membership,
        rotation_drift_max: result.rotation_drift_max,
        out_of_domain: result.out_of_domain.map(|(t, agent)| DomainExit {
            t,
            agent: agent + 1,
        }),
        samples: result.times.len(),
        end_time: result.end_time(),
        final_disagreement: *result.channels.disagreement.last().unwrap(),
        final_max_norm: *result.channels.max_norm.last().unwrap(),
    };

    Ok(RunOutput {
        name: sc.name.clone(),
        result,
        guarantees,
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub trajectory: PathBuf,
    pub channels: PathBuf,
    pub diagnostics: PathBuf,
    pub guarantees: PathBuf,
}

/// Writes a file through a temporary sibling so readers never observe a
/// partial artifact.
fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

pub fn trajectory_csv(result: &SimResult) -> String {
    let mut out = String::from("t,agent,x1,x2,x3,norm\n");
    for (k, t) in result.times.iter().enumerate() {
        for (i, xi) in result.states[k].iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                t,
                i + 1,
                xi.x,
                xi.y,
                xi.z,
                xi.norm()
            ));
        }
    }
    out
}

pub fn channels_csv(result: &SimResult) -> String {
    let mut out = String::from("t,V1,V2,V3,disagreement,max_norm\n");
    let ch = &result.channels;
    for (k, t) in result.times.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            t, ch.v1[k], ch.v2[k], ch.v3[k], ch.disagreement[k], ch.max_norm[k]
        ));
    }
    out
}

pub fn write_artifacts(out_dir: &Path, output: &RunOutput) -> io::Result<RunArtifacts> {
    std::fs::create_dir_all(out_dir)?;
    let paths = RunArtifacts {
        trajectory: out_dir.join("trajectory.csv"),
        channels: out_dir.join("channels.csv"),
        diagnostics: out_dir.join("diagnostics.json"),
        guarantees: out_dir.join("guarantees.json"),
    };
    atomic_write(&paths.trajectory, trajectory_csv(&output.result).as_bytes())?;
    atomic_write(&paths.channels, channels_csv(&output.result).as_bytes())?;
    let mut diag = serde_json::to_string_pretty(&output.diagnostics).expect("serializable");
    diag.push('\n');
    atomic_write(&paths.diagnostics, diag.as_bytes())?;
    let mut report = serde_json::to_string_pretty(&output.guarantees).expect("serializable");
    report.push('\n');
    atomic_write(&paths.guarantees, report.as_bytes())?;
    Ok(paths)
}
