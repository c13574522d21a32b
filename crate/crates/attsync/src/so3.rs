//! Axis-angle kinematics on SO(3).
//!
//! A rotation is parameterized by `x` in R^3 with rotation angle `theta =
//! |x|` about the unit axis `x / |x|`. The module provides the exponential
//! and logarithm maps between axis-angle vectors and rotation matrices, the
//! Riemannian (geodesic) distance, and the transition matrix `L_x` that maps
//! body angular velocity to the axis-angle rate: `xdot = L_x * omega`.
//!
//! Domain conventions used throughout the crate:
//! * the logarithm rejects angles within [`LOG_ANGLE_MARGIN`] of pi, where
//!   the axis is not recoverable from the skew part;
//! * the transition matrix is defined for `|x| < 2*pi` and blows up at the
//!   `2*pi` pole.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Axis-angle representation of a rotation; the norm is the angle in radians.
pub type AxisAngle = Vector3<f64>;

/// Angles closer to pi than this margin are rejected by [`log_map`].
pub const LOG_ANGLE_MARGIN: f64 = 1e-7;

/// Upper end of the transition-matrix domain.
pub const TRANSITION_DOMAIN: f64 = 2.0 * PI;

/// Below this angle, closed-form trigonometric coefficients switch to their
/// fourth-order Taylor expansions.
const TAYLOR_SWITCH: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum So3Error {
    #[error("rotation angle {angle:.9} is within {margin:e} of pi; the logarithm is ill-conditioned there")]
    AngleNearPi { angle: f64, margin: f64 },
    #[error("axis-angle norm {norm:.9} is outside the transition-matrix domain [0, 2*pi)")]
    OutOfDomain { norm: f64 },
    #[error("matrix is not a rotation (orthonormality defect {defect:e})")]
    NotOrthonormal { defect: f64 },
}

/// Rotation matrix in SO(3).
///
/// Values produced by [`exp_map`] or [`Rotation::try_from_matrix`] are
/// orthonormal with determinant +1 up to floating-point error; long
/// multiplicative integrations should be re-projected periodically with
/// [`project_to_rotation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(pub Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Validates orthonormality (`|m m^T - I|_F <= 1e-9`) and `det m > 0`.
    pub fn try_from_matrix(m: Matrix3<f64>) -> Result<Self, So3Error> {
        let defect = orthonormality_defect(&m);
        if defect > 1e-9 || m.determinant() < 0.0 {
            return Err(So3Error::NotOrthonormal { defect });
        }
        Ok(Rotation(m))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }
}

/// Frobenius distance of `m m^T` from the identity.
pub fn orthonormality_defect(m: &Matrix3<f64>) -> f64 {
    (m * m.transpose() - Matrix3::identity()).norm()
}

/// Skew-symmetric cross-product matrix: `hat(p) * v = p x v`.
pub fn hat(p: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -p.z, p.y, p.z, 0.0, -p.x, -p.y, p.x, 0.0)
}

/// Inverse of [`hat`] for skew-symmetric matrices (reads the lower triangle).
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// `sin(a) / a`, continued with 1 at zero.
pub fn sinc(a: f64) -> f64 {
    if a.abs() < TAYLOR_SWITCH {
        let a2 = a * a;
        1.0 - a2 / 6.0 + a2 * a2 / 120.0
    } else {
        a.sin() / a
    }
}

/// `sinc(theta) / sinc(theta / 2)^2`, which simplifies to
/// `(theta / 2) * cot(theta / 2)`.
///
/// This is the radial coefficient of the transition matrix and the smallest
/// eigenvalue of its symmetric part at angle `theta` (the other eigenvalue,
/// along the axis, is exactly 1). It decreases from 1 at zero through 0 at
/// pi and diverges to minus infinity at `2*pi`.
pub fn sinc_ratio(theta: f64) -> f64 {
    if theta.abs() < TAYLOR_SWITCH {
        let t2 = theta * theta;
        1.0 - t2 / 12.0 - t2 * t2 / 720.0
    } else {
        let half = sinc(0.5 * theta);
        sinc(theta) / (half * half)
    }
}

/// Rotation about `p / |p|` by angle `|p|` (Rodrigues' formula).
pub fn exp_map(p: &AxisAngle) -> Rotation {
    let theta = p.norm();
    let (a, b) = if theta < TAYLOR_SWITCH {
        let t2 = theta * theta;
        (
            1.0 - t2 / 6.0 + t2 * t2 / 120.0,
            0.5 - t2 / 24.0 + t2 * t2 / 720.0,
        )
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
    };
    let ph = hat(p);
    Rotation(Matrix3::identity() + a * ph + b * (ph * ph))
}

/// Axis-angle vector of `r` with angle in `[0, pi)`, using the default
/// [`LOG_ANGLE_MARGIN`] around the pi singularity.
pub fn log_map(r: &Rotation) -> Result<AxisAngle, So3Error> {
    log_map_with_margin(r, LOG_ANGLE_MARGIN)
}

/// Axis-angle vector of `r`; rejects angles in `[pi - margin, pi]`.
///
/// The identity maps to the zero vector. The angle comes from
/// `atan2(|vee(R - R^T)| / 2, (trace(R) - 1) / 2)`, which equals
/// `arccos((trace(R) - 1) / 2)` but stays accurate where the arccosine's
/// conditioning degenerates, so round trips through [`exp_map`] hold to
/// about 1e-9 across the accepted angle range.
pub fn log_map_with_margin(r: &Rotation, margin: f64) -> Result<AxisAngle, So3Error> {
    // v = 2 sin(theta) * axis
    let v = vee(&(r.0 - r.0.transpose()));
    let s = 0.5 * v.norm();
    let c = 0.5 * (r.0.trace() - 1.0);
    let theta = s.atan2(c);
    if theta >= PI - margin {
        return Err(So3Error::AngleNearPi {
            angle: theta,
            margin,
        });
    }
    if s == 0.0 {
        return Ok(Vector3::zeros());
    }
    Ok((theta / (2.0 * s)) * v)
}

/// Geodesic distance between two rotations: the relative rotation angle.
///
/// Equal to the Frobenius norm of the matrix logarithm of `r1^T r2` divided
/// by `sqrt(2)`, since `|hat(x)|_F = sqrt(2) |x|`. Undefined (error) when
/// the relative angle is within [`LOG_ANGLE_MARGIN`] of pi.
pub fn riemannian_distance(r1: &Rotation, r2: &Rotation) -> Result<f64, So3Error> {
    let rel = Rotation(r1.0.transpose() * r2.0);
    Ok(log_map(&rel)?.norm())
}

/// Transition matrix `L_x` of the axis-angle kinematics `xdot = L_x omega`.
///
/// Built from the singularity-free form `s*I + (1 - s)/theta^2 * x x^T +
/// hat(x)/2` with `s = sinc_ratio(theta)`, so `L_x -> I` as `x -> 0`.
/// Satisfies `L_x x = x` and `x^T L_x = x^T` on the whole domain.
/// Errors with [`So3Error::OutOfDomain`] for `|x| >= 2*pi`.
pub fn transition_matrix(x: &AxisAngle) -> Result<Matrix3<f64>, So3Error> {
    let theta = x.norm();
    if theta >= TRANSITION_DOMAIN {
        return Err(So3Error::OutOfDomain { norm: theta });
    }
    let s = sinc_ratio(theta);
    let q = if theta < TAYLOR_SWITCH {
        let t2 = theta * theta;
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    } else {
        (1.0 - s) / (theta * theta)
    };
    Ok(s * Matrix3::identity() + q * (x * x.transpose()) + 0.5 * hat(x))
}

/// One multiplicative integration step of `Rdot = R hat(omega)` with the
/// angular velocity held constant over the step: `R * exp_map(h * omega)`.
pub fn rotation_kinematics_step(r: &Rotation, omega: &Vector3<f64>, h: f64) -> Rotation {
    Rotation(r.0 * exp_map(&(h * omega)).0)
}

/// Projects a near-rotation matrix onto SO(3) by the Newton polar iteration
/// `R <- (R + R^-T) / 2`, run to convergence.
pub fn project_to_rotation(m: &Matrix3<f64>) -> Rotation {
    let mut r = *m;
    for _ in 0..40 {
        let Some(inv) = r.try_inverse() else { break };
        let next = 0.5 * (r + inv.transpose());
        let delta = (next - r).norm();
        r = next;
        if delta < 1e-15 {
            break;
        }
    }
    Rotation(r)
}

/// Multiplicative rotation integrator that re-projects onto SO(3) every
/// `reproject_every` steps to cap orthonormality drift.
#[derive(Debug, Clone)]
pub struct RotationTrack {
    pub rotation: Rotation,
    steps: usize,
    reproject_every: usize,
}

impl RotationTrack {
    pub fn new(rotation: Rotation) -> Self {
        RotationTrack {
            rotation,
            steps: 0,
            reproject_every: 1000,
        }
    }

    pub fn step(&mut self, omega: &Vector3<f64>, h: f64) {
        self.rotation = rotation_kinematics_step(&self.rotation, omega, h);
        self.steps += 1;
        if self.steps.is_multiple_of(self.reproject_every) {
            self.rotation = project_to_rotation(&self.rotation.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use nalgebra::SymmetricEigen;

    use crate::scenario::rng::SplitMix64;

    fn random_axis_angle(rng: &mut SplitMix64, max_norm: f64) -> AxisAngle {
        rng.direction() * (rng.uniform() * max_norm)
    }

    /// Independent oracle: truncated power series of the matrix exponential.
    fn series_exp(p: &AxisAngle) -> Matrix3<f64> {
        let x = hat(p);
        let mut sum = Matrix3::identity();
        let mut term = Matrix3::identity();
        for k in 1..=50 {
            term = term * x / k as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn hat_of_unit_z() {
        let m = hat(&Vector3::new(0.0, 0.0, 1.0));
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(m, expected);
    }

    #[test]
    fn hat_matches_cross_product() {
        let mut rng = SplitMix64::new(11);
        for _ in 0..200 {
            let p = random_axis_angle(&mut rng, 5.0);
            let v = random_axis_angle(&mut rng, 5.0);
            assert_abs_diff_eq!(hat(&p) * v, p.cross(&v), epsilon = 1e-14);
        }
    }

    #[test]
    fn hat_is_linear_and_antisymmetric() {
        let mut rng = SplitMix64::new(12);
        for _ in 0..100 {
            let p = random_axis_angle(&mut rng, 3.0);
            let q = random_axis_angle(&mut rng, 3.0);
            let a = rng.uniform() * 4.0 - 2.0;
            assert_abs_diff_eq!(hat(&(a * p + q)), a * hat(&p) + hat(&q), epsilon = 1e-13);
            assert_eq!(hat(&p).transpose(), -hat(&p));
            assert_eq!(vee(&hat(&p)), p);
        }
    }

    #[test]
    fn hat_frobenius_norm_is_sqrt2_times_vector_norm() {
        let mut rng = SplitMix64::new(13);
        for _ in 0..100 {
            let p = random_axis_angle(&mut rng, 4.0);
            assert_relative_eq!(hat(&p).norm(), 2f64.sqrt() * p.norm(), epsilon = 1e-13);
        }
    }

    #[test]
    fn exp_of_zero_is_identity() {
        assert_eq!(exp_map(&Vector3::zeros()).0, Matrix3::identity());
    }

    #[test]
    fn exp_quarter_turn_about_z() {
        let r = exp_map(&Vector3::new(0.0, 0.0, PI / 2.0));
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_abs_diff_eq!(r.0, expected, epsilon = 1e-15);
    }

    #[test]
    fn exp_matches_series_oracle() {
        let mut rng = SplitMix64::new(14);
        for _ in 0..500 {
            let p = random_axis_angle(&mut rng, 3.0);
            assert_abs_diff_eq!(exp_map(&p).0, series_exp(&p), epsilon = 1e-12);
        }
    }

    #[test]
    fn exp_produces_orthonormal_matrices() {
        let mut rng = SplitMix64::new(15);
        for _ in 0..200 {
            let r = exp_map(&random_axis_angle(&mut rng, 6.2));
            assert!(orthonormality_defect(&r.0) < 1e-13);
            assert_relative_eq!(r.0.determinant(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn log_of_identity_is_zero() {
        assert_eq!(log_map(&Rotation::identity()).unwrap(), Vector3::zeros());
    }

    #[test]
    fn log_exp_round_trip() {
        let mut rng = SplitMix64::new(16);
        for _ in 0..1000 {
            let p = random_axis_angle(&mut rng, PI - 1e-3);
            let back = log_map(&exp_map(&p)).unwrap();
            assert!(
                (back - p).norm() < 1e-9,
                "round trip error {:e}",
                (back - p).norm()
            );
        }
    }

    #[test]
    fn log_exp_round_trip_close_to_pi() {
        let p = Vector3::new(PI - 1e-6, 0.0, 0.0);
        let back = log_map(&exp_map(&p)).unwrap();
        assert!((back - p).norm() < 1e-6);
    }

    #[test]
    fn log_rejects_angles_near_pi() {
        let r = exp_map(&Vector3::new(0.0, 0.0, PI));
        match log_map(&r) {
            Err(So3Error::AngleNearPi { .. }) => {}
            other => panic!("expected AngleNearPi, got {other:?}"),
        }
        let r = exp_map(&Vector3::new(0.0, 0.0, PI - 1e-8));
        assert!(log_map(&r).is_err());
        let r = exp_map(&Vector3::new(0.0, 0.0, PI - 1e-6));
        assert!(log_map(&r).is_ok());
    }

    #[test]
    fn small_angle_round_trip_is_exact_to_working_precision() {
        let p = Vector3::new(1e-6, -2e-6, 5e-7);
        let back = log_map(&exp_map(&p)).unwrap();
        assert!((back - p).norm() < 1e-18);
    }

    #[test]
    fn distance_between_identity_and_quarter_turn() {
        let quarter = exp_map(&Vector3::new(0.0, 0.0, PI / 2.0));
        let d = riemannian_distance(&Rotation::identity(), &quarter).unwrap();
        assert_relative_eq!(d, PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn distance_is_bi_invariant_and_symmetric() {
        let mut rng = SplitMix64::new(17);
        for _ in 0..100 {
            let r1 = exp_map(&random_axis_angle(&mut rng, 1.5));
            let r2 = exp_map(&random_axis_angle(&mut rng, 1.5));
            let q = exp_map(&random_axis_angle(&mut rng, 3.0));
            let d = riemannian_distance(&r1, &r2).unwrap();
            let left = Rotation(q.0 * r1.0);
            let right = Rotation(q.0 * r2.0);
            assert_relative_eq!(
                riemannian_distance(&left, &right).unwrap(),
                d,
                epsilon = 1e-10
            );
            assert_relative_eq!(riemannian_distance(&r2, &r1).unwrap(), d, epsilon = 1e-12);
        }
    }

    #[test]
    fn sinc_ratio_values() {
        assert_eq!(sinc_ratio(0.0), 1.0);
        assert_relative_eq!(sinc_ratio(PI / 2.0), PI / 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sinc_ratio(PI), 0.0, epsilon = 1e-12);
        // continuity across the Taylor switch
        assert_relative_eq!(sinc_ratio(0.999e-4), sinc_ratio(1.001e-4), epsilon = 1e-10);
    }

    #[test]
    fn transition_matrix_at_zero_is_identity() {
        assert_abs_diff_eq!(
            transition_matrix(&Vector3::zeros()).unwrap(),
            Matrix3::identity(),
            epsilon = 1e-16
        );
    }

    #[test]
    fn transition_matrix_fixes_its_own_axis() {
        let mut rng = SplitMix64::new(18);
        for _ in 0..300 {
            let x = random_axis_angle(&mut rng, 0.99 * TRANSITION_DOMAIN);
            let l = transition_matrix(&x).unwrap();
            assert!(
                (l * x - x).norm() < 1e-12,
                "L_x x deviates by {:e}",
                (l * x - x).norm()
            );
            assert!((l.transpose() * x - x).norm() < 1e-12);
        }
    }

    #[test]
    fn transition_matrix_rejects_domain_boundary() {
        let x = Vector3::new(TRANSITION_DOMAIN, 0.0, 0.0);
        match transition_matrix(&x) {
            Err(So3Error::OutOfDomain { .. }) => {}
            other => panic!("expected OutOfDomain, got {other:?}"),
        }
        assert!(transition_matrix(&Vector3::new(TRANSITION_DOMAIN - 1e-3, 0.0, 0.0)).is_ok());
    }

    #[test]
    fn symmetric_part_spectrum_is_one_and_sinc_ratio_pair() {
        let mut rng = SplitMix64::new(19);
        for _ in 0..100 {
            let theta = 1e-3 + rng.uniform() * (PI - 2e-3);
            let x = rng.direction() * theta;
            let l = transition_matrix(&x).unwrap();
            let sym = 0.5 * (l + l.transpose());
            let mut eigs: Vec<f64> = SymmetricEigen::new(sym)
                .eigenvalues
                .iter()
                .copied()
                .collect();
            eigs.sort_by(f64::total_cmp);
            let s = sinc_ratio(theta);
            assert_relative_eq!(eigs[0], s, epsilon = 1e-10);
            assert_relative_eq!(eigs[1], s, epsilon = 1e-10);
            assert_relative_eq!(eigs[2], 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn symmetric_part_definiteness_over_the_angle_range() {
        // strictly positive definite below pi, a zero eigenvalue at pi,
        // indefinite beyond pi
        for (theta, expect_min) in [
            (0.5, sinc_ratio(0.5)),
            (3.0, sinc_ratio(3.0)),
            (PI, 0.0),
            (4.5, sinc_ratio(4.5)),
        ] {
            let x = Vector3::new(0.0, theta, 0.0);
            let l = transition_matrix(&x).unwrap();
            let sym = 0.5 * (l + l.transpose());
            let min = SymmetricEigen::new(sym)
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            assert_abs_diff_eq!(min, expect_min, epsilon = 1e-10);
        }
        assert!(sinc_ratio(4.5) < 0.0);
    }

    #[test]
    fn kinematics_step_matches_flow_of_constant_omega() {
        let omega = Vector3::new(0.3, -0.2, 0.9);
        let r0 = exp_map(&Vector3::new(0.1, 0.4, -0.2));
        let stepped = rotation_kinematics_step(&r0, &omega, 0.5);
        let expected = Rotation(r0.0 * exp_map(&(0.5 * omega)).0);
        assert_abs_diff_eq!(stepped.0, expected.0, epsilon = 1e-15);
    }

    #[test]
    fn projection_restores_orthonormality() {
        let r = exp_map(&Vector3::new(0.7, -0.3, 1.1));
        let drifted = r.0 + Matrix3::new(1e-3, 0.0, -2e-3, 0.0, 5e-4, 0.0, 1e-3, 0.0, 0.0);
        let projected = project_to_rotation(&drifted);
        assert!(orthonormality_defect(&projected.0) < 1e-12);
        assert!((projected.0 - r.0).norm() < 5e-3);
    }

    #[test]
    fn rotation_track_stays_orthonormal_over_many_steps() {
        let mut track = RotationTrack::new(Rotation::identity());
        let h = 1e-3;
        for k in 0..5000 {
            let t = k as f64 * h;
            track.step(&Vector3::new(t.sin(), (2.0 * t).cos(), 0.3), h);
        }
        assert!(orthonormality_defect(&track.rotation.0) < 1e-11);
    }

    #[test]
    fn rejects_non_rotation_matrix() {
        let m = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(
            Rotation::try_from_matrix(m),
            Err(So3Error::NotOrthonormal { .. })
        ));
    }
}
