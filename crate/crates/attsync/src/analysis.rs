//! Monitor channels, convergence-rate bounds, and run classification.

use nalgebra::Vector3;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{GraphError, Topology};
use crate::sim::SimResult;
use crate::so3;

use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("radius {value:.6} outside the supported range [0, {limit:.6})")]
    OutOfDomain { value: f64, limit: f64 },
    #[error("graph is not connected")]
    Disconnected,
    #[error("run ends at t = {have:.6} but the requested check needs t = {need:.6}")]
    InsufficientHorizon { have: f64, need: f64 },
    #[error("tolerance {0} must be positive")]
    BadTolerance(f64),
}

/// Scalar monitors evaluated at one stacked state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovChannels {
    /// Largest squared attitude norm.
    pub v1: f64,
    /// Square root of the weighted sum of squared edge disagreements.
    pub v2: f64,
    /// Half the squared norm of the stacked state.
    pub v3: f64,
    /// Largest edge disagreement norm.
    pub disagreement: f64,
    pub max_norm: f64,
}

pub fn lyapunov_channels(x: &[Vector3<f64>], topology: &Topology) -> LyapunovChannels {
    let mut v2_sq = 0.0;
    let mut disagreement = 0.0f64;
    for e in topology.edges() {
        let d = (x[e.i] - x[e.j]).norm_squared();
        v2_sq += e.weight * d;
        disagreement = disagreement.max(d.sqrt());
    }
    let max_norm = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
    LyapunovChannels {
        v1: max_norm * max_norm,
        v2: v2_sq.sqrt(),
        v3: 0.5 * x.iter().map(|v| v.norm_squared()).sum::<f64>(),
        disagreement,
        max_norm,
    }
}

/// Smallest eigenvalue that the symmetric part of the transition matrix can
/// take anywhere in the closed attitude ball of the given radius.
///
/// The symmetric part has eigenvalues 1 (along the axis, twice degenerate
/// at zero) and a radially decreasing pair, so the minimum over the ball is
/// attained on its boundary and equals the paired eigenvalue there. The
/// bound is positive for radii below pi and tends to 1 at zero.
pub fn transition_eigenvalue_floor(radius: f64) -> Result<f64, AnalysisError> {
    if !(0.0..PI).contains(&radius) {
        return Err(AnalysisError::OutOfDomain {
            value: radius,
            limit: PI,
        });
    }
    Ok(so3::sinc_ratio(radius))
}

/// Worst-case decay constants for configurations whose disagreement energy
/// is guaranteed to shrink.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateConstants {
    /// Eigenvalue floor of the transition matrices over the initial ball.
    pub transition_floor: f64,
    pub algebraic_connectivity: f64,
    /// Initial value of the disagreement-energy channel.
    pub v2_initial: f64,
    /// Guaranteed upper bound on dV2/dt while away from consensus.
    pub slope_bound: f64,
    /// Time by which V2 must reach zero if the slope bound held throughout.
    pub settling_bound: f64,
}

/// Derives the decay constants from the initial state and the graph.
///
/// Requires every initial attitude norm strictly below pi; the two-agent
/// case has a tighter bound that skips the connectivity factor.
pub fn rate_constants(
    x0: &[Vector3<f64>],
    topology: &Topology,
) -> Result<RateConstants, AnalysisError> {
    let radius = x0.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let floor = transition_eigenvalue_floor(radius)?;
    let lambda2 = topology.algebraic_connectivity().map_err(|e| match e {
        GraphError::Disconnected => AnalysisError::Disconnected,
        other => panic!("unexpected eigenvalue failure: {other}"),
    })?;
    let v2_initial = lyapunov_channels(x0, topology).v2;
    let (slope_bound, settling_bound) = if topology.n() == 2 {
        (-floor, v2_initial / floor)
    } else {
        let rate = floor * lambda2.sqrt() / 2.0;
        (-rate, v2_initial / rate)
    };
    Ok(RateConstants {
        transition_floor: floor,
        algebraic_connectivity: lambda2,
        v2_initial,
        slope_bound,
        settling_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Convergence {
    /// Disagreement dropped below tolerance and stayed there; `time` is the
    /// first recorded instant of the consensus tail.
    FiniteTime { time: f64 },
    /// Disagreement energy decays exponentially without reaching tolerance.
    Asymptotic,
    /// Neither finite-time nor clean exponential decay.
    None,
}

/// Least-squares line fit of `ln(values)` against `times`.
///
/// Returns `(slope, intercept, rmse)`, or `None` when a log-linear fit is
/// meaningless (non-positive values or fewer than three samples).
pub fn log_linear_fit(times: &[f64], values: &[f64]) -> Option<(f64, f64, f64)> {
    if times.len() != values.len() || times.len() < 3 {
        return None;
    }
    if values.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let n = times.len() as f64;
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let mean_t = times.iter().sum::<f64>() / n;
    let mean_l = logs.iter().sum::<f64>() / n;
    let mut stt = 0.0;
    let mut stl = 0.0;
    for (t, l) in times.iter().zip(logs.iter()) {
        stt += (t - mean_t) * (t - mean_t);
        stl += (t - mean_t) * (l - mean_l);
    }
    if stt == 0.0 {
        return None;
    }
    let slope = stl / stt;
    let intercept = mean_l - slope * mean_t;
    let rmse = (times
        .iter()
        .zip(logs.iter())
        .map(|(t, l)| {
            let r = l - (intercept + slope * t);
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Some((slope, intercept, rmse))
}

/// Largest rise between consecutive samples; zero for a non-increasing
/// series.
pub fn max_sample_increase(series: &[f64]) -> f64 {
    series.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

const FIT_RMSE_LIMIT: f64 = 0.1;

/// Classifies a recorded run.
///
/// Finite time means the largest edge disagreement fell below `tol` and
/// never rose back above it. Otherwise the run is asymptotic when the
/// disagreement-energy channel is well fit by a decaying exponential
/// (log-linear RMSE below 0.1) while still above tolerance at the end.
/// `required_horizon` guards against classifying a run that simply stopped
/// too early to contain the answer.
pub fn classify_convergence(
    result: &SimResult,
    tol: f64,
    required_horizon: Option<f64>,
) -> Result<Convergence, AnalysisError> {
    if !(tol > 0.0) {
        return Err(AnalysisError::BadTolerance(tol));
    }
    let have = result.end_time();
    if let Some(need) = required_horizon {
        if have + 1e-12 < need {
            return Err(AnalysisError::InsufficientHorizon { have, need });
        }
    }
    let d = &result.channels.disagreement;
    let mut consensus_from = None;
    let mut suffix_ok = true;
    for k in (0..d.len()).rev() {
        suffix_ok &= d[k] < tol;
        if suffix_ok {
            consensus_from = Some(k);
        } else {
            break;
        }
    }
    if let Some(k) = consensus_from {
        return Ok(Convergence::FiniteTime {
            time: result.times[k],
        });
    }
    let v2 = &result.channels.v2;
    if let Some((slope, _, rmse)) = log_linear_fit(&result.times, v2) {
        let still_positive = *v2.last().unwrap() > tol;
        if slope < 0.0 && rmse < FIT_RMSE_LIMIT && still_positive {
            return Ok(Convergence::Asymptotic);
        }
    }
    Ok(Convergence::None)
}
