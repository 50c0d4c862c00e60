//! Quaternion algebra, small-tensor operations and rotation parameterizations.

mod mat3;
mod quaternion;
mod rotation;

pub use mat3::{cross, dot, norm, Mat3, Vec3};
pub use quaternion::{hmul, Quaternion};
pub use rotation::{
    curvature_vector, eps_skew, polar_decompose, quat_from_rotation, rotation, rotation_euler,
    rotation_euler_with_jacobian, rotation_normalized, rotation_normalized_with_jacobian,
    rotation_unscaled, rotation_unscaled_jacobian, CurvatureVector, EulerAngles, SO3_TOL,
    UNIT_NORM_TOL,
};
