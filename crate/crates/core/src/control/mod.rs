//! Singularly controlled diffusions: cone geometry, reduction of the control
//! cone to the orthant, Euler-Maruyama simulation, Monte Carlo costs and the
//! cost-convergence experiment along a sequence of controls.

pub mod cone;
pub mod experiment;
pub mod problem;
pub mod sim;

pub use cone::{
    cone_to_orthant, increments_in_cone, nnls, verify_halfspace, ConeSpec, IncrementReport, IncrementViolation,
};
pub use experiment::{convergence_experiment, ExperimentReport, ExperimentRow};
pub use problem::{
    reduce_to_orthant, transform_problem, AffineField, CostCase, CostPolynomial, DiffusionField, Growth, HalfSpace,
    MatrixTable, PowerTerm, ProblemSpec, StateSet,
};
pub use sim::{
    control_cost, cost_estimate, cost_estimate_keep, euler_simulate, mean_and_error, SimPath, SimResult,
    ADMISSIBILITY_TOL,
};
