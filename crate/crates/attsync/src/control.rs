//! Consensus controllers over the communication graph.
//!
//! Two families are supported and are mutually exclusive per scenario:
//!
//! * neighbor-sum control: each agent applies its own feedback function to
//!   the weighted sum of neighbor disagreements. The feedback is either a
//!   directional sign (unit vector along the argument), a componentwise
//!   sign, or a direction-preserving Lipschitz law (pure gain with optional
//!   norm saturation);
//! * edge-sign control: each agent sums componentwise signs of the
//!   disagreement along each incident edge. Edge weights are ignored since
//!   the sign discards magnitudes.
//!
//! The discontinuous signs use a small deadband so that exact consensus is
//! a fixed point in floating point, and optionally a linear band just above
//! the deadband that the integrator uses to suppress chattering near
//! consensus.

use nalgebra::Vector3;
use serde::Serialize;
use thiserror::Error;

use crate::graph::Topology;

/// Arguments with norm (or component magnitude) at or below this are
/// treated as exactly at the discontinuity and map to zero.
pub const SIGN_DEADBAND: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("{kinds} controller kinds configured for {n} agents")]
    KindCountMismatch { kinds: usize, n: usize },
    #[error("controller gain {gain} must be strictly positive")]
    BadGain { gain: f64 },
    #[error("controller saturation {saturation} must be strictly positive")]
    BadSaturation { saturation: f64 },
    #[error("graph is not connected")]
    Disconnected,
}

/// Per-agent feedback law for neighbor-sum control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControllerKind {
    /// `w / |w|` away from the deadband, zero inside it.
    SignDirectional,
    /// Scalar sign applied to each component.
    SignComponentwise,
    /// `gain * w`, optionally saturated to a maximum output norm. Preserves
    /// the argument direction and vanishes only at zero.
    LipschitzDirectional { gain: f64, saturation: Option<f64> },
}

impl ControllerKind {
    pub fn is_lipschitz(&self) -> bool {
        matches!(self, ControllerKind::LipschitzDirectional { .. })
    }
}

/// How discontinuous signs are realized numerically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignRealization {
    /// Exact deadbanded sign. With `band > 0`, outputs whose argument norm
    /// lies between the deadband and `band` are scaled linearly
    /// (`w / band`), which removes integrator chattering near consensus.
    Deadband { band: f64 },
    /// `w / max(|w|, eps)`: exact sign outside an `eps` ball, linear inside.
    Smoothed { eps: f64 },
}

impl SignRealization {
    pub fn exact() -> Self {
        SignRealization::Deadband { band: 0.0 }
    }

    pub fn directional(&self, w: &Vector3<f64>) -> Vector3<f64> {
        let n = w.norm();
        match *self {
            SignRealization::Deadband { band } => {
                if n <= SIGN_DEADBAND {
                    Vector3::zeros()
                } else if n < band {
                    w / band
                } else {
                    w / n
                }
            }
            SignRealization::Smoothed { eps } => w / n.max(eps),
        }
    }

    pub fn scalar(&self, s: f64) -> f64 {
        match *self {
            SignRealization::Deadband { band } => {
                if s.abs() <= SIGN_DEADBAND {
                    0.0
                } else if s.abs() < band {
                    s / band
                } else {
                    s.signum()
                }
            }
            SignRealization::Smoothed { eps } => s / s.abs().max(eps),
        }
    }

    pub fn componentwise(&self, w: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(self.scalar(w.x), self.scalar(w.y), self.scalar(w.z))
    }
}

/// Unit vector along `w`, or zero inside the deadband.
pub fn sign_directional(w: &Vector3<f64>) -> Vector3<f64> {
    SignRealization::exact().directional(w)
}

/// Scalar sign with deadband; coincides with the directional sign in one
/// dimension.
pub fn sign_scalar(s: f64) -> f64 {
    SignRealization::exact().scalar(s)
}

/// Componentwise sign with deadband.
pub fn sign_componentwise(w: &Vector3<f64>) -> Vector3<f64> {
    SignRealization::exact().componentwise(w)
}

/// Protocol selection: exactly one control family per scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum Protocol {
    /// Per-agent feedback on the weighted neighbor-disagreement sum.
    NeighborSum { kinds: Vec<ControllerKind> },
    /// Per-edge componentwise signs, summed at each endpoint.
    EdgeSign,
}

/// Validated pairing of a communication graph with a protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub topology: Topology,
    pub protocol: Protocol,
}

impl ProtocolConfig {
    pub fn new(topology: Topology, protocol: Protocol) -> Result<Self, ControlError> {
        if let Protocol::NeighborSum { kinds } = &protocol {
            if kinds.len() != topology.n() {
                return Err(ControlError::KindCountMismatch {
                    kinds: kinds.len(),
                    n: topology.n(),
                });
            }
            for kind in kinds {
                if let ControllerKind::LipschitzDirectional { gain, saturation } = kind {
                    if !(*gain > 0.0) {
                        return Err(ControlError::BadGain { gain: *gain });
                    }
                    if let Some(s) = saturation {
                        if !(*s > 0.0) {
                            return Err(ControlError::BadSaturation { saturation: *s });
                        }
                    }
                }
            }
        }
        Ok(ProtocolConfig { topology, protocol })
    }

    pub fn n(&self) -> usize {
        self.topology.n()
    }

    /// Number of Lipschitz agents (zero under edge-sign control).
    pub fn lipschitz_count(&self) -> usize {
        match &self.protocol {
            Protocol::NeighborSum { kinds } => kinds.iter().filter(|k| k.is_lipschitz()).count(),
            Protocol::EdgeSign => 0,
        }
    }
}

/// Weighted neighbor-disagreement sums `y_i = sum_j w_ij (x_j - x_i)`,
/// equal to minus the i-th block of the stacked Laplacian product.
pub fn disagreement_sums(x: &[Vector3<f64>], topology: &Topology) -> Vec<Vector3<f64>> {
    let mut y = vec![Vector3::zeros(); topology.n()];
    for e in topology.edges() {
        let d = e.weight * (x[e.j] - x[e.i]);
        y[e.i] += d;
        y[e.j] -= d;
    }
    y
}

/// Applies one feedback kind to its argument.
pub fn apply_kind(
    kind: &ControllerKind,
    y: &Vector3<f64>,
    realization: SignRealization,
) -> Vector3<f64> {
    match kind {
        ControllerKind::SignDirectional => realization.directional(y),
        ControllerKind::SignComponentwise => realization.componentwise(y),
        ControllerKind::LipschitzDirectional { gain, saturation } => {
            let v = *gain * y;
            match saturation {
                Some(s) if v.norm() > *s => v * (*s / v.norm()),
                _ => v,
            }
        }
    }
}

/// Angular velocity commands for the configured protocol.
///
/// Panics if the state length does not match the configured agent count;
/// configurations are validated at construction.
pub fn control_with(
    x: &[Vector3<f64>],
    cfg: &ProtocolConfig,
    realization: SignRealization,
) -> Vec<Vector3<f64>> {
    assert_eq!(x.len(), cfg.n(), "state/agent count mismatch");
    match &cfg.protocol {
        Protocol::NeighborSum { kinds } => {
            let y = disagreement_sums(x, &cfg.topology);
            kinds
                .iter()
                .zip(y.iter())
                .map(|(kind, yi)| apply_kind(kind, yi, realization))
                .collect()
        }
        Protocol::EdgeSign => {
            let mut omega = vec![Vector3::zeros(); cfg.n()];
            for e in cfg.topology.edges() {
                // shared per-edge selection keeps the two endpoints exactly
                // opposite, matching the incidence form
                let s = realization.componentwise(&(x[e.i] - x[e.j]));
                omega[e.i] -= s;
                omega[e.j] += s;
            }
            omega
        }
    }
}

/// Neighbor-sum commands with the exact deadbanded signs.
pub fn neighbor_sum_control(x: &[Vector3<f64>], cfg: &ProtocolConfig) -> Vec<Vector3<f64>> {
    debug_assert!(matches!(cfg.protocol, Protocol::NeighborSum { .. }));
    control_with(x, cfg, SignRealization::exact())
}

/// Edge-sign commands with the exact deadbanded signs.
pub fn edge_sign_control(x: &[Vector3<f64>], topology: &Topology) -> Vec<Vector3<f64>> {
    let cfg = ProtocolConfig {
        topology: topology.clone(),
        protocol: Protocol::EdgeSign,
    };
    control_with(x, &cfg, SignRealization::exact())
}

/// What the theory guarantees for a given configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuaranteeReport {
    /// Sub-pi attitude balls that contain the initial state remain
    /// invariant along every solution.
    pub invariance_s1: bool,
    /// Consensus is reached in finite time (for edge-sign control, locally:
    /// from initial states whose squared norms sum below pi^2).
    pub finite_time: bool,
    /// Convergence is guaranteed but cannot be finite-time because every
    /// feedback law is Lipschitz.
    pub asymptotic_only: bool,
    /// All-sign networks of three or more agents admit drifting consensus
    /// solutions that can escape the valid attitude region.
    pub sliding_risk: bool,
    pub notes: Vec<String>,
}

/// Derives the guarantee report from the agent count, the number of
/// Lipschitz agents, the protocol, and connectivity.
pub fn validate_guarantees(cfg: &ProtocolConfig) -> Result<GuaranteeReport, ControlError> {
    if !cfg.topology.is_connected() {
        return Err(ControlError::Disconnected);
    }
    let n = cfg.n();
    let mut notes = Vec::new();
    let report = match &cfg.protocol {
        Protocol::EdgeSign => {
            notes.push(
                "finite-time consensus holds when the squared initial norms sum below pi^2; \
                 the sum of squared norms never increases from any start below (2*pi)^2"
                    .to_string(),
            );
            GuaranteeReport {
                invariance_s1: true,
                finite_time: true,
                asymptotic_only: false,
                sliding_risk: false,
                notes,
            }
        }
        Protocol::NeighborSum { kinds } => {
            let lipschitz = kinds.iter().filter(|k| k.is_lipschitz()).count();
            let componentwise = kinds
                .iter()
                .filter(|k| matches!(k, ControllerKind::SignComponentwise))
                .count();
            if componentwise > 0 {
                notes.push(
                    "componentwise sign feedback under neighbor-sum control is outside the \
                     analyzed controller family; no guarantees are derived"
                        .to_string(),
                );
                GuaranteeReport {
                    invariance_s1: false,
                    finite_time: false,
                    asymptotic_only: false,
                    sliding_risk: false,
                    notes,
                }
            } else {
                let finite_time = (n > 2 && lipschitz == 1) || (n == 2 && lipschitz <= 1);
                let invariance_s1 = (n == 2 && lipschitz == 0) || lipschitz >= 1;
                let sliding_risk = n > 2 && lipschitz == 0;
                let asymptotic_only = lipschitz == n;
                if finite_time {
                    notes.push(
                        "finite-time consensus guaranteed from initial attitudes strictly \
                         inside a ball of radius pi"
                            .to_string(),
                    );
                }
                if invariance_s1 {
                    notes.push(
                        "attitude-norm balls of radius below pi containing the initial state \
                         are invariant"
                            .to_string(),
                    );
                }
                if sliding_risk {
                    notes.push(
                        "all-sign network with more than two agents: sliding consensus \
                         solutions drift at constant speed and can leave the valid region"
                            .to_string(),
                    );
                }
                if asymptotic_only {
                    notes.push(
                        "every feedback law is Lipschitz, so consensus is asymptotic, not \
                         finite-time"
                            .to_string(),
                    );
                }
                if !finite_time && !asymptotic_only && !sliding_risk {
                    notes.push(
                        "finite-time consensus is not guaranteed for this mix of sign and \
                         Lipschitz agents; trajectories that converge only asymptotically exist"
                            .to_string(),
                    );
                }
                GuaranteeReport {
                    invariance_s1,
                    finite_time,
                    asymptotic_only,
                    sliding_risk,
                    notes,
                }
            }
        }
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::rng::SplitMix64;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector, Matrix3};
    use proptest::prelude::*;

    fn all_sign(n: usize) -> Vec<ControllerKind> {
        vec![ControllerKind::SignDirectional; n]
    }

    fn lipschitz(gain: f64) -> ControllerKind {
        ControllerKind::LipschitzDirectional {
            gain,
            saturation: None,
        }
    }

    fn random_vec(rng: &mut SplitMix64, scale: f64) -> Vector3<f64> {
        rng.direction() * (rng.uniform() * scale)
    }

    #[test]
    fn scalar_sign_values() {
        assert_eq!(sign_scalar(0.7), 1.0);
        assert_eq!(sign_scalar(-0.2), -1.0);
        assert_eq!(sign_scalar(0.0), 0.0);
        assert_eq!(sign_scalar(5e-10), 0.0);
    }

    #[test]
    fn directional_sign_deadband_and_unit_norm() {
        assert_eq!(sign_directional(&Vector3::zeros()), Vector3::zeros());
        assert_eq!(
            sign_directional(&Vector3::new(1e-10, 0.0, 0.0)),
            Vector3::zeros()
        );
        let w = Vector3::new(3.0, -4.0, 0.0);
        let s = sign_directional(&w);
        assert_abs_diff_eq!(s, Vector3::new(0.6, -0.8, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn componentwise_sign_example() {
        let s = sign_componentwise(&Vector3::new(-1.0, 1.0, 0.0));
        assert_eq!(s, Vector3::new(-1.0, 1.0, 0.0));
    }

    #[test]
    fn smoothed_sign_is_linear_inside_eps() {
        let r = SignRealization::Smoothed { eps: 1e-3 };
        let w = Vector3::new(2e-4, 0.0, 0.0);
        assert_abs_diff_eq!(
            r.directional(&w),
            Vector3::new(0.2, 0.0, 0.0),
            epsilon = 1e-15
        );
        let big = Vector3::new(0.0, -2.0, 0.0);
        assert_abs_diff_eq!(
            r.directional(&big),
            Vector3::new(0.0, -1.0, 0.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn banded_deadband_scales_linearly() {
        let r = SignRealization::Deadband { band: 0.01 };
        let w = Vector3::new(0.004, 0.0, 0.003);
        assert_abs_diff_eq!(r.directional(&w), w / 0.01, epsilon = 1e-15);
        assert_eq!(
            r.directional(&Vector3::new(1e-10, 0.0, 0.0)),
            Vector3::zeros()
        );
        let big = Vector3::new(0.02, 0.0, 0.0);
        assert_eq!(r.directional(&big), Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(r.scalar(0.004), 0.4);
    }

    #[test]
    fn saturated_lipschitz_kind_caps_output_norm() {
        let kind = ControllerKind::LipschitzDirectional {
            gain: 2.0,
            saturation: Some(1.0),
        };
        let y = Vector3::new(3.0, 0.0, 0.0);
        let out = apply_kind(&kind, &y, SignRealization::exact());
        assert_abs_diff_eq!(out, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
        let small = Vector3::new(0.1, 0.0, 0.0);
        let out = apply_kind(&kind, &small, SignRealization::exact());
        assert_abs_diff_eq!(out, Vector3::new(0.2, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn two_agent_neighbor_sum_signs() {
        let topo = Topology::path(2);
        let cfg = ProtocolConfig::new(topo, Protocol::NeighborSum { kinds: all_sign(2) }).unwrap();
        let x = [Vector3::new(1.0, 0.0, 0.0), Vector3::zeros()];
        let omega = neighbor_sum_control(&x, &cfg);
        assert_eq!(omega[0], Vector3::new(-1.0, 0.0, 0.0));
        assert_eq!(omega[1], Vector3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn lipschitz_agent_outputs_raw_disagreement_sum() {
        let topo = Topology::path(3);
        let cfg = ProtocolConfig::new(
            topo,
            Protocol::NeighborSum {
                kinds: vec![
                    lipschitz(1.0),
                    ControllerKind::SignDirectional,
                    ControllerKind::SignDirectional,
                ],
            },
        )
        .unwrap();
        let x = [
            Vector3::new(0.4, -0.2, 0.1),
            Vector3::new(-0.1, 0.3, 0.5),
            Vector3::new(0.2, 0.2, -0.3),
        ];
        let omega = neighbor_sum_control(&x, &cfg);
        assert_abs_diff_eq!(omega[0], x[1] - x[0], epsilon = 1e-15);
        let y1 = (x[0] - x[1]) + (x[2] - x[1]);
        assert_abs_diff_eq!(omega[1], y1 / y1.norm(), epsilon = 1e-15);
    }

    #[test]
    fn two_agent_edge_sign_example() {
        let topo = Topology::path(2);
        let x = [Vector3::new(1.0, -1.0, 0.0), Vector3::zeros()];
        let omega = edge_sign_control(&x, &topo);
        assert_eq!(omega[0], Vector3::new(-1.0, 1.0, 0.0));
        assert_eq!(omega[1], Vector3::new(1.0, -1.0, 0.0));
    }

    #[test]
    fn disagreement_sums_match_stacked_laplacian_product() {
        let mut rng = SplitMix64::new(41);
        for _ in 0..20 {
            let n = 2 + (rng.next_u64() % 5) as usize;
            let topo = Topology::random_connected(n, 2, &mut rng);
            let x: Vec<Vector3<f64>> = (0..n).map(|_| random_vec(&mut rng, 2.0)).collect();
            let y = disagreement_sums(&x, &topo);
            let lhat = topo.laplacian().kronecker(&Matrix3::identity());
            let stacked = DVector::from_iterator(3 * n, x.iter().flat_map(|v| [v.x, v.y, v.z]));
            let product = lhat * stacked;
            for i in 0..n {
                let expected =
                    -Vector3::new(product[3 * i], product[3 * i + 1], product[3 * i + 2]);
                assert_abs_diff_eq!(y[i], expected, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn edge_sign_matches_incidence_form() {
        let mut rng = SplitMix64::new(42);
        for _ in 0..30 {
            let n = 2 + (rng.next_u64() % 5) as usize;
            let topo = Topology::random_connected(n, 3, &mut rng);
            let x: Vec<Vector3<f64>> = (0..n).map(|_| random_vec(&mut rng, 2.0)).collect();
            let omega = edge_sign_control(&x, &topo);

            let b = topo.incidence();
            let m = topo.edges().len();
            let bhat = b.kronecker(&Matrix3::identity());
            let stacked = DVector::from_iterator(3 * n, x.iter().flat_map(|v| [v.x, v.y, v.z]));
            let edge_diffs = bhat.transpose() * stacked;
            let signs = DVector::from_iterator(3 * m, edge_diffs.iter().map(|&d| sign_scalar(d)));
            let expected = -DMatrix::from(bhat) * signs;
            for i in 0..n {
                let e = Vector3::new(expected[3 * i], expected[3 * i + 1], expected[3 * i + 2]);
                assert_abs_diff_eq!(omega[i], e, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn edge_sign_component_bound_is_incident_edge_count() {
        let mut rng = SplitMix64::new(43);
        for _ in 0..30 {
            let n = 2 + (rng.next_u64() % 6) as usize;
            let topo = Topology::random_connected(n, 4, &mut rng);
            let x: Vec<Vector3<f64>> = (0..n).map(|_| random_vec(&mut rng, 2.0)).collect();
            for (i, w) in edge_sign_control(&x, &topo).iter().enumerate() {
                let bound = topo.degree_count(i) as f64;
                for k in 0..3 {
                    assert!(w[k].abs() <= bound + 1e-12);
                }
            }
        }
    }

    #[test]
    fn config_validation_errors() {
        let topo = Topology::path(3);
        assert!(matches!(
            ProtocolConfig::new(topo.clone(), Protocol::NeighborSum { kinds: all_sign(2) }),
            Err(ControlError::KindCountMismatch { .. })
        ));
        assert!(matches!(
            ProtocolConfig::new(
                topo.clone(),
                Protocol::NeighborSum {
                    kinds: vec![lipschitz(0.0), lipschitz(1.0), lipschitz(1.0)],
                },
            ),
            Err(ControlError::BadGain { .. })
        ));
        assert!(matches!(
            ProtocolConfig::new(
                topo,
                Protocol::NeighborSum {
                    kinds: vec![
                        ControllerKind::LipschitzDirectional {
                            gain: 1.0,
                            saturation: Some(-1.0)
                        },
                        lipschitz(1.0),
                        lipschitz(1.0),
                    ],
                },
            ),
            Err(ControlError::BadSaturation { .. })
        ));
    }

    #[test]
    fn guarantees_for_reference_configurations() {
        // one Lipschitz agent in a 3-path: finite time
        let ftc = ProtocolConfig::new(
            Topology::path(3),
            Protocol::NeighborSum {
                kinds: vec![
                    lipschitz(1.0),
                    ControllerKind::SignDirectional,
                    ControllerKind::SignDirectional,
                ],
            },
        )
        .unwrap();
        let report = validate_guarantees(&ftc).unwrap();
        assert!(report.finite_time && report.invariance_s1);
        assert!(!report.sliding_risk && !report.asymptotic_only);

        // two sign agents: finite time
        let pair = ProtocolConfig::new(
            Topology::path(2),
            Protocol::NeighborSum { kinds: all_sign(2) },
        )
        .unwrap();
        let report = validate_guarantees(&pair).unwrap();
        assert!(report.finite_time && report.invariance_s1);

        // two Lipschitz agents: asymptotic only
        let pair_l = ProtocolConfig::new(
            Topology::path(2),
            Protocol::NeighborSum {
                kinds: vec![lipschitz(1.0), lipschitz(1.0)],
            },
        )
        .unwrap();
        let report = validate_guarantees(&pair_l).unwrap();
        assert!(report.asymptotic_only && !report.finite_time && report.invariance_s1);

        // all-sign triangle: sliding risk, no invariance guarantee
        let triangle = ProtocolConfig::new(
            Topology::complete(3),
            Protocol::NeighborSum { kinds: all_sign(3) },
        )
        .unwrap();
        let report = validate_guarantees(&triangle).unwrap();
        assert!(report.sliding_risk && !report.finite_time && !report.invariance_s1);

        // two Lipschitz ends and a sign middle: no finite-time guarantee
        let mixed = ProtocolConfig::new(
            Topology::path(3),
            Protocol::NeighborSum {
                kinds: vec![
                    lipschitz(1.0),
                    ControllerKind::SignDirectional,
                    lipschitz(1.0),
                ],
            },
        )
        .unwrap();
        let report = validate_guarantees(&mixed).unwrap();
        assert!(!report.finite_time && report.invariance_s1 && !report.asymptotic_only);

        // edge-sign control: locally finite time
        let edge = ProtocolConfig::new(Topology::complete(3), Protocol::EdgeSign).unwrap();
        let report = validate_guarantees(&edge).unwrap();
        assert!(report.finite_time && report.invariance_s1 && !report.sliding_risk);
    }

    #[test]
    fn guarantee_implications_hold_exhaustively() {
        for n in 2..=5usize {
            for lipschitz_count in 0..=n {
                let kinds: Vec<ControllerKind> = (0..n)
                    .map(|i| {
                        if i < lipschitz_count {
                            lipschitz(1.0)
                        } else {
                            ControllerKind::SignDirectional
                        }
                    })
                    .collect();
                let cfg =
                    ProtocolConfig::new(Topology::complete(n), Protocol::NeighborSum { kinds })
                        .unwrap();
                let r = validate_guarantees(&cfg).unwrap();
                assert!(
                    !r.finite_time || r.invariance_s1,
                    "n={n} k={lipschitz_count}"
                );
                assert!(
                    !r.sliding_risk || !r.invariance_s1,
                    "n={n} k={lipschitz_count}"
                );
                assert!(
                    !(r.finite_time && r.asymptotic_only),
                    "n={n} k={lipschitz_count}"
                );
                assert_eq!(r.sliding_risk, n > 2 && lipschitz_count == 0);
                assert_eq!(
                    r.finite_time,
                    (n > 2 && lipschitz_count == 1) || (n == 2 && lipschitz_count <= 1)
                );
            }
        }
    }

    #[test]
    fn disconnected_graph_rejected() {
        let topo = Topology::new(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        let cfg = ProtocolConfig::new(topo, Protocol::EdgeSign).unwrap();
        assert_eq!(validate_guarantees(&cfg), Err(ControlError::Disconnected));
    }

    proptest! {
        #[test]
        fn signs_preserve_direction(
            wx in -3.0f64..3.0, wy in -3.0f64..3.0, wz in -3.0f64..3.0,
            gain in 0.1f64..5.0,
        ) {
            let w = Vector3::new(wx, wy, wz);
            for kind in [
                ControllerKind::SignDirectional,
                ControllerKind::LipschitzDirectional { gain, saturation: Some(1.5) },
            ] {
                let f = apply_kind(&kind, &w, SignRealization::exact());
                // f(w) is nonnegative along w and vanishes only near zero
                prop_assert!((f.dot(&w) - f.norm() * w.norm()).abs() < 1e-9);
                if w.norm() > 1e-6 {
                    if kind.is_lipschitz() {
                        prop_assert!(f.norm() > 0.0);
                    }
                } else if kind.is_lipschitz() {
                    prop_assert!(f.norm() <= gain * w.norm() + 1e-15);
                }
            }
        }

        #[test]
        fn signs_are_odd(
            wx in -3.0f64..3.0, wy in -3.0f64..3.0, wz in -3.0f64..3.0,
            band in 0.0f64..0.1,
        ) {
            let w = Vector3::new(wx, wy, wz);
            let r = SignRealization::Deadband { band };
            prop_assert_eq!(r.directional(&-w), -r.directional(&w));
            prop_assert_eq!(r.componentwise(&-w), -r.componentwise(&w));
            let s = SignRealization::Smoothed { eps: 1e-6 };
            prop_assert_eq!(s.directional(&-w), -s.directional(&w));
        }
    }

    #[test]
    fn directional_sign_is_rotation_equivariant() {
        let mut rng = SplitMix64::new(44);
        for _ in 0..50 {
            let w = random_vec(&mut rng, 2.0);
            let r = crate::so3::exp_map(&random_vec(&mut rng, 3.0));
            let lhs = sign_directional(&(r.0 * w));
            let rhs = r.0 * sign_directional(&w);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }
}
