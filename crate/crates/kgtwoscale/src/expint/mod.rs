//! Exponential integrators: φ-functions, tableaux and the time step.

pub mod phi;
pub mod step;
pub mod tableau;

pub use phi::{phi, phis};
pub use step::{nsm_step, step, step_with, Nonlinear, StepCoefficients, StepOptions, StepStats};
pub use tableau::{
    check_symmetry, imaginary_samples, stiff_order_residuals, tableau_nsm, tableau_s2o2,
    tableau_s3o4, tableau_two_stage, StiffOrderResiduals, SymmetryResiduals, Tableau,
};
