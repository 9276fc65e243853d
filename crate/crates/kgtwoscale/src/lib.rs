//! Symmetric two-scale exponential integrators for the nonlinear
//! Klein–Gordon equation in the nonrelativistic regime
//!
//!   ε² ∂ₜₜu − Δu + u/ε² + λ f(u) = 0  on the periodic interval (−π, π).
//!
//! The solution is filtered by the exact linear flow, embedded in a
//! two-scale transport problem in (t̃, τ), discretized by Fourier
//! collocation in x and τ, and advanced with symmetric exponential
//! Runge–Kutta methods (S2O2, S3O4). Two baselines (a one-stage midpoint
//! exponential integrator and a trigonometric integrator) and an experiment
//! harness are included.

pub mod baselines;
pub mod error;
pub mod expint;
pub mod harness;
pub mod solver;
pub mod spectral;
pub mod taucalc;
pub mod twoscale;

pub use error::{Error, Result};
pub use solver::{solve, Method, RunConfig, RunResult};
pub use twoscale::ProblemSpec;
