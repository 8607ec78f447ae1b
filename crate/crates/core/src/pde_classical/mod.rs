//! High-fidelity classical reference solvers.

mod burgers;
mod cavity;

pub use burgers::{burgers_hf_solve, burgers_hf_solve_observed, burgers_hf_step, gaussian_pulse, BurgersParams};
pub use cavity::{
    apply_thom_boundary, cavity_hf_solve, poisson_gauss_seidel, poisson_residual, velocity_from_streamfunction,
    CavityParams, CavityRun, CavitySnapshot, PoissonSolution,
};
