//! Discrete-time integration of the closed-loop attitude dynamics and
//! differential-inclusion certificates.
//!
//! Each agent's attitude is an axis-angle vector advanced by explicit Euler
//! steps of `dx/dt = L_x omega`, where `L_x` maps body angular velocity to
//! the axis-angle rate and `omega` comes from the configured protocol. The
//! discontinuous signs are realized either with a deadband plus a narrow
//! linear band (width proportional to the step size, which suppresses
//! chattering near consensus) or with an explicit smoothing parameter.

use nalgebra::Vector3;
use thiserror::Error;

use crate::analysis;
use crate::control::{
    self, ControllerKind, Protocol, ProtocolConfig, SignRealization, SIGN_DEADBAND,
};
use crate::so3::{self, RotationTrack, TRANSITION_DOMAIN};

use std::f64::consts::PI;

/// Width of the linear band around the sign discontinuity, in units of the
/// step size. Arguments smaller than this scale the sign output linearly,
/// which turns the one-step limit cycle around consensus into a contraction.
pub const CHATTER_BAND_STEPS: f64 = 10.0;

/// Stacked axis-angle state of all agents at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedState {
    pub t: f64,
    pub x: Vec<Vector3<f64>>,
}

impl StackedState {
    pub fn new(t: f64, x: Vec<Vector3<f64>>) -> Self {
        StackedState { t, x }
    }

    pub fn max_norm(&self) -> f64 {
        max_norm(&self.x)
    }

    pub fn sum_squared_norms(&self) -> f64 {
        self.x.iter().map(|v| v.norm_squared()).sum()
    }
}

fn max_norm(x: &[Vector3<f64>]) -> f64 {
    x.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Numerical treatment of the sign discontinuities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Exact signs away from consensus, linear scaling inside a band of
    /// width `CHATTER_BAND_STEPS * h`.
    Deadband,
    /// Signs replaced by `w / max(|w|, eps)` everywhere.
    Smoothed { eps: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub h: f64,
    pub t_max: f64,
    pub mode: Mode,
    /// Keep every k-th step in the recorded output (the initial and final
    /// states are always kept).
    pub record_every: usize,
    /// Co-integrate rotation matrices geometrically and report the largest
    /// divergence from the axis-angle trajectory.
    pub reorthonormalize_rotations: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            h: 1e-3,
            t_max: 10.0,
            mode: Mode::Deadband,
            record_every: 1,
            reorthonormalize_rotations: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("agent {agent} reached attitude norm {norm:.6} (limit 2*pi) at t = {t:.6}")]
    OutOfDomain { agent: usize, t: f64, norm: f64 },
    #[error("invalid integrator configuration: {reason}")]
    InvalidConfig { reason: String },
    #[error("state has {got} agents, protocol expects {expected}")]
    AgentCountMismatch { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    /// Largest attitude norm crossed pi from below; time is interpolated
    /// linearly within the step.
    PiCrossing,
    /// An agent left the valid region; the run stops here.
    OutOfDomain { agent: usize },
    /// Disagreement first dropped below the scenario tolerance and stayed
    /// there (attached after classification).
    Consensus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
}

/// Per-sample monitor channels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelSeries {
    /// Largest squared attitude norm.
    pub v1: Vec<f64>,
    /// Square root of the weighted sum of squared edge disagreements.
    pub v2: Vec<f64>,
    /// Half the squared stacked-state norm.
    pub v3: Vec<f64>,
    /// Largest edge disagreement norm.
    pub disagreement: Vec<f64>,
    pub max_norm: Vec<f64>,
    /// Per-agent attitude norms, one row per sample.
    pub agent_norms: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Vector3<f64>>>,
    pub channels: ChannelSeries,
    pub events: Vec<Event>,
    /// Set when the run stopped early because an agent left the domain.
    pub out_of_domain: Option<(f64, usize)>,
    /// Largest attitude norm seen at any step, not just recorded samples.
    pub peak_max_norm: f64,
    /// Largest squared-norm sum seen at any step.
    pub peak_sum_squares: f64,
    /// Largest distance between the axis-angle trajectory and the
    /// geometrically integrated rotations, when enabled.
    pub rotation_drift_max: Option<f64>,
}

impl SimResult {
    pub fn end_time(&self) -> f64 {
        *self
            .times
            .last()
            .expect("runs record at least the initial sample")
    }
}

fn realization_for(icfg: &IntegratorConfig) -> SignRealization {
    match icfg.mode {
        Mode::Deadband => SignRealization::Deadband {
            band: CHATTER_BAND_STEPS * icfg.h,
        },
        Mode::Smoothed { eps } => SignRealization::Smoothed { eps },
    }
}

/// Closed-loop state velocities `nu_i = L_{x_i} omega_i` at one state.
pub fn closed_loop_velocities(
    state: &StackedState,
    cfg: &ProtocolConfig,
    realization: SignRealization,
) -> Result<Vec<Vector3<f64>>, SimError> {
    if state.x.len() != cfg.n() {
        return Err(SimError::AgentCountMismatch {
            got: state.x.len(),
            expected: cfg.n(),
        });
    }
    let omega = control::control_with(&state.x, cfg, realization);
    state
        .x
        .iter()
        .zip(omega.iter())
        .enumerate()
        .map(|(i, (xi, wi))| {
            let l = so3::transition_matrix(xi).map_err(|_| SimError::OutOfDomain {
                agent: i,
                t: state.t,
                norm: xi.norm(),
            })?;
            Ok(l * wi)
        })
        .collect()
}

/// One explicit Euler step of the closed loop.
pub fn step(
    state: &StackedState,
    cfg: &ProtocolConfig,
    icfg: &IntegratorConfig,
) -> Result<StackedState, SimError> {
    if !(icfg.h > 0.0) || !icfg.h.is_finite() {
        return Err(SimError::InvalidConfig {
            reason: format!("step size {} must be positive and finite", icfg.h),
        });
    }
    let nu = closed_loop_velocities(state, cfg, realization_for(icfg))?;
    let x = state
        .x
        .iter()
        .zip(nu.iter())
        .map(|(xi, ni)| xi + icfg.h * ni)
        .collect();
    Ok(StackedState::new(state.t + icfg.h, x))
}

fn validate_config(icfg: &IntegratorConfig) -> Result<(), SimError> {
    let fail = |reason: String| Err(SimError::InvalidConfig { reason });
    if !(icfg.h > 0.0) || !icfg.h.is_finite() {
        return fail(format!("step size {} must be positive and finite", icfg.h));
    }
    if !(icfg.t_max > 0.0) || !icfg.t_max.is_finite() {
        return fail(format!(
            "horizon {} must be positive and finite",
            icfg.t_max
        ));
    }
    if icfg.record_every == 0 {
        return fail("record_every must be at least 1".to_string());
    }
    if let Mode::Smoothed { eps } = icfg.mode {
        if !(eps > 0.0) || !eps.is_finite() {
            return fail(format!("smoothing width {eps} must be positive and finite"));
        }
    }
    Ok(())
}

fn step_count(icfg: &IntegratorConfig) -> usize {
    let ratio = icfg.t_max / icfg.h;
    let steps = if (ratio - ratio.round()).abs() < 1e-9 {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    };
    steps.max(1)
}

/// Integrates the closed loop from `initial` for a duration of `t_max`.
///
/// The run stops early if an agent reaches attitude norm 2*pi; that is
/// reported as an event plus `out_of_domain`, not an error. Errors are
/// reserved for invalid configurations and initial states.
pub fn simulate(
    initial: &StackedState,
    cfg: &ProtocolConfig,
    icfg: &IntegratorConfig,
) -> Result<SimResult, SimError> {
    validate_config(icfg)?;
    if initial.x.len() != cfg.n() {
        return Err(SimError::AgentCountMismatch {
            got: initial.x.len(),
            expected: cfg.n(),
        });
    }
    for (i, xi) in initial.x.iter().enumerate() {
        if !(xi.norm() < TRANSITION_DOMAIN) {
            return Err(SimError::OutOfDomain {
                agent: i,
                t: initial.t,
                norm: xi.norm(),
            });
        }
    }

    let realization = realization_for(icfg);
    let n_steps = step_count(icfg);
    let t0 = initial.t;
    let time_at = |k: usize| t0 + (k as f64) * icfg.h;

    let mut x = initial.x.clone();
    let mut result = SimResult {
        times: Vec::new(),
        states: Vec::new(),
        channels: ChannelSeries::default(),
        events: Vec::new(),
        out_of_domain: None,
        peak_max_norm: max_norm(&x),
        peak_sum_squares: x.iter().map(|v| v.norm_squared()).sum(),
        rotation_drift_max: None,
    };

    let mut tracks: Option<Vec<RotationTrack>> = if icfg.reorthonormalize_rotations {
        Some(
            x.iter()
                .map(|xi| RotationTrack::new(so3::exp_map(xi)))
                .collect(),
        )
    } else {
        None
    };
    let mut drift_max = 0.0f64;

    let record = |result: &mut SimResult,
                  t: f64,
                  x: &[Vector3<f64>],
                  tracks: &Option<Vec<RotationTrack>>,
                  drift_max: &mut f64| {
        let ch = analysis::lyapunov_channels(x, &cfg.topology);
        result.times.push(t);
        result.states.push(x.to_vec());
        result.channels.v1.push(ch.v1);
        result.channels.v2.push(ch.v2);
        result.channels.v3.push(ch.v3);
        result.channels.disagreement.push(ch.disagreement);
        result.channels.max_norm.push(ch.max_norm);
        result
            .channels
            .agent_norms
            .push(x.iter().map(|v| v.norm()).collect());
        if let Some(tracks) = tracks {
            for (xi, track) in x.iter().zip(tracks.iter()) {
                // the two integrations stay close, so the relative rotation
                // is far from the log-map singularity
                if let Ok(d) = so3::riemannian_distance(&so3::exp_map(xi), &track.rotation) {
                    if d > *drift_max {
                        *drift_max = d;
                    }
                }
            }
        }
    };

    record(&mut result, t0, &x, &tracks, &mut drift_max);

    for k in 0..n_steps {
        let t = time_at(k);
        let omega = control::control_with(&x, cfg, realization);
        let mut nu = Vec::with_capacity(x.len());
        let mut escaped: Option<usize> = None;
        for (i, (xi, wi)) in x.iter().zip(omega.iter()).enumerate() {
            match so3::transition_matrix(xi) {
                Ok(l) => nu.push(l * wi),
                Err(_) => {
                    escaped = Some(i);
                    break;
                }
            }
        }
        if let Some(agent) = escaped {
            result.events.push(Event {
                t,
                kind: EventKind::OutOfDomain { agent },
            });
            result.out_of_domain = Some((t, agent));
            if result.times.last() != Some(&t) {
                record(&mut result, t, &x, &tracks, &mut drift_max);
            }
            break;
        }

        let prev_max = max_norm(&x);
        for (xi, ni) in x.iter_mut().zip(nu.iter()) {
            *xi += icfg.h * ni;
        }
        let next_max = max_norm(&x);
        result.peak_max_norm = result.peak_max_norm.max(next_max);
        result.peak_sum_squares = result
            .peak_sum_squares
            .max(x.iter().map(|v| v.norm_squared()).sum());
        if prev_max < PI && next_max >= PI {
            let frac = (PI - prev_max) / (next_max - prev_max);
            result.events.push(Event {
                t: t + frac * icfg.h,
                kind: EventKind::PiCrossing,
            });
        }

        if let Some(tracks) = tracks.as_mut() {
            for (track, wi) in tracks.iter_mut().zip(omega.iter()) {
                track.step(wi, icfg.h);
            }
        }

        let done = k + 1 == n_steps;
        if (k + 1) % icfg.record_every == 0 || done {
            record(&mut result, time_at(k + 1), &x, &tracks, &mut drift_max);
        }
    }

    if tracks.is_some() {
        result.rotation_drift_max = Some(drift_max);
    }
    Ok(result)
}

fn interval_distance(w: f64, lo: f64, hi: f64) -> f64 {
    if w < lo {
        lo - w
    } else if w > hi {
        w - hi
    } else {
        0.0
    }
}

/// Per-component selection interval of the scalar sign at argument `d`,
/// optionally widened along the banded realization's segment.
fn scalar_sign_interval(d: f64, band: f64) -> (f64, f64) {
    if d.abs() <= SIGN_DEADBAND {
        (-1.0, 1.0)
    } else if d.abs() < band {
        if d > 0.0 {
            (0.0, 1.0)
        } else {
            (-1.0, 0.0)
        }
    } else {
        (d.signum(), d.signum())
    }
}

/// Distance from the observed state velocities to the set-valued closed
/// loop at `state`; zero (up to round-off) certifies a Filippov solution.
///
/// Sign feedback near its discontinuity admits any output in the unit ball
/// (directional) or the per-component interval `[-1, 1]` (componentwise).
/// With `band > 0` the linearly scaled outputs of the banded realization
/// are also accepted. Lipschitz feedback is single-valued and checked by
/// equality.
pub fn filippov_residual_with_band(
    state: &StackedState,
    nu: &[Vector3<f64>],
    cfg: &ProtocolConfig,
    band: f64,
) -> Result<f64, SimError> {
    if state.x.len() != cfg.n() || nu.len() != cfg.n() {
        return Err(SimError::AgentCountMismatch {
            got: state.x.len().max(nu.len()),
            expected: cfg.n(),
        });
    }
    let mut worst = 0.0f64;
    let solve =
        |xi: &Vector3<f64>, ni: &Vector3<f64>, agent: usize| -> Result<Vector3<f64>, SimError> {
            let l = so3::transition_matrix(xi).map_err(|_| SimError::OutOfDomain {
                agent,
                t: state.t,
                norm: xi.norm(),
            })?;
            Ok(l.lu()
                .solve(ni)
                .unwrap_or_else(|| Vector3::repeat(f64::INFINITY)))
        };
    match &cfg.protocol {
        Protocol::NeighborSum { kinds } => {
            let y = control::disagreement_sums(&state.x, &cfg.topology);
            for (i, kind) in kinds.iter().enumerate() {
                let r = match kind {
                    ControllerKind::LipschitzDirectional { .. } => {
                        let l = so3::transition_matrix(&state.x[i]).map_err(|_| {
                            SimError::OutOfDomain {
                                agent: i,
                                t: state.t,
                                norm: state.x[i].norm(),
                            }
                        })?;
                        let f = control::apply_kind(kind, &y[i], SignRealization::exact());
                        (nu[i] - l * f).norm()
                    }
                    ControllerKind::SignDirectional => {
                        let w = solve(&state.x[i], &nu[i], i)?;
                        let ny = y[i].norm();
                        if ny <= SIGN_DEADBAND {
                            (w.norm() - 1.0).max(0.0)
                        } else if ny < band {
                            let u = y[i] / ny;
                            let a = w.dot(&u).clamp(0.0, 1.0);
                            (w - a * u).norm()
                        } else {
                            (w - y[i] / ny).norm()
                        }
                    }
                    ControllerKind::SignComponentwise => {
                        let w = solve(&state.x[i], &nu[i], i)?;
                        (0..3)
                            .map(|k| {
                                let (lo, hi) = scalar_sign_interval(y[i][k], band);
                                interval_distance(w[k], lo, hi)
                            })
                            .fold(0.0, f64::max)
                    }
                };
                worst = worst.max(r);
            }
        }
        Protocol::EdgeSign => {
            let n = cfg.n();
            let mut lo = vec![Vector3::zeros(); n];
            let mut hi = vec![Vector3::zeros(); n];
            for e in cfg.topology.edges() {
                for k in 0..3 {
                    // omega_i sums sign(x_j - x_i) over incident edges
                    let d = state.x[e.j][k] - state.x[e.i][k];
                    let (l, h) = scalar_sign_interval(d, band);
                    lo[e.i][k] += l;
                    hi[e.i][k] += h;
                    let (l, h) = scalar_sign_interval(-d, band);
                    lo[e.j][k] += l;
                    hi[e.j][k] += h;
                }
            }
            for i in 0..n {
                let w = solve(&state.x[i], &nu[i], i)?;
                let r = (0..3)
                    .map(|k| interval_distance(w[k], lo[i][k], hi[i][k]))
                    .fold(0.0, f64::max);
                worst = worst.max(r);
            }
        }
    }
    Ok(worst)
}

/// Strict residual: signs may only take their exact set values.
pub fn filippov_residual(
    state: &StackedState,
    nu: &[Vector3<f64>],
    cfg: &ProtocolConfig,
) -> Result<f64, SimError> {
    filippov_residual_with_band(state, nu, cfg, 0.0)
}

/// Whether the observed velocities are a Filippov selection within `tol`.
pub fn filippov_membership(
    state: &StackedState,
    nu: &[Vector3<f64>],
    cfg: &ProtocolConfig,
    tol: f64,
) -> Result<bool, SimError> {
    Ok(filippov_residual(state, nu, cfg)? <= tol)
}

/// Closed-form drifting-consensus solution for all-sign networks: every
/// agent shares the attitude `xbar + (t - t0) * eps1 * xbar / |xbar|`, so
/// the common attitude norm grows linearly at rate `eps1 < 1` while all
/// disagreements stay exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SlidingTrajectory {
    xbar: Vector3<f64>,
    eps1: f64,
    t0: f64,
    n: usize,
    unit: Vector3<f64>,
}

impl SlidingTrajectory {
    pub fn new(xbar: Vector3<f64>, eps1: f64, t0: f64, n: usize) -> Result<Self, SimError> {
        let fail = |reason: String| Err(SimError::InvalidConfig { reason });
        if n < 2 {
            return fail(format!("need at least two agents, got {n}"));
        }
        let norm = xbar.norm();
        if !(norm > 0.0) {
            return fail("drift anchor must be nonzero".to_string());
        }
        if norm >= TRANSITION_DOMAIN {
            return fail(format!("drift anchor norm {norm:.6} must be below 2*pi"));
        }
        if !(eps1 > 0.0 && eps1 < 1.0) {
            return fail(format!("drift rate {eps1} must lie in (0, 1)"));
        }
        Ok(SlidingTrajectory {
            xbar,
            eps1,
            t0,
            n,
            unit: xbar / norm,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn common_attitude(&self, t: f64) -> Vector3<f64> {
        self.xbar + (t - self.t0) * self.eps1 * self.unit
    }

    pub fn state_at(&self, t: f64) -> StackedState {
        StackedState::new(t, vec![self.common_attitude(t); self.n])
    }

    /// Per-agent state velocity, constant in time and shared by all agents.
    pub fn velocity(&self) -> Vector3<f64> {
        self.eps1 * self.unit
    }

    pub fn velocities(&self) -> Vec<Vector3<f64>> {
        vec![self.velocity(); self.n]
    }

    /// When the common attitude norm reaches pi, if it starts below.
    pub fn pi_crossing_time(&self) -> Option<f64> {
        let norm = self.xbar.norm();
        (norm < PI).then(|| self.t0 + (PI - norm) / self.eps1)
    }

    /// When the common attitude norm reaches 2*pi and the state leaves the
    /// valid region.
    pub fn domain_exit_time(&self) -> f64 {
        self.t0 + (TRANSITION_DOMAIN - self.xbar.norm()) / self.eps1
    }
}
