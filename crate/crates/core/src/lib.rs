//! Finite-strain Cosserat crystal plasticity with quaternion micro-rotations,
//! discretized by finite differences and minimized with preconditioned L-BFGS.

pub mod cli;
pub mod energy;
pub mod error;
pub mod grid;
pub mod kinematics;
pub mod optimizer;
pub mod solver;

pub use error::{Error, Result};
