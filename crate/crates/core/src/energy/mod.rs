//! Time-discrete Cosserat energy: constitutive terms, quadrature and gradient.

mod assembly;
mod constitutive;
mod params;

pub use assembly::{
    constraint_violation, curvature_density_chain_rule, curvature_energy_at_node,
    curvature_vector_norm_sq, total_energy, total_gradient, CosseratEnergy, EnergyBreakdown,
    NodalGradient,
};
pub use constitutive::{
    fp, fp_inverse, hardening_update, reg_abs, reg_abs_derivative, stretch_energy,
    stretch_energy_and_stress,
};
pub use params::{CurvatureVariant, MaterialParams, PlasticHistory};
