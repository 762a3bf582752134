//! Process models: nonlinear rates, steady state, linearization and the
//! closed-loop state-space realization.

mod linear;
mod massaction;
mod nonlinear;
mod statespace;

pub use linear::{BufferParams, DisturbanceScales, LinearPlant, Scaling};
pub use massaction::{mass_action_jacobians, mass_action_model, MassActionParams};
pub use nonlinear::{
    fd_jacobians, linearize, model_jacobians, solve_steady_state, AnalyticJacobian, BufferRate, Jacobians,
    NonlinearModel, RemovalRate, ScalarRate, SteadyGuess, SteadyPin, SteadyState, VectorRate, DEFAULT_H_REL,
};
pub use statespace::{
    controllable_canonical, eigenvalues, is_internally_stable, realize_closed_loop, Channel, ControllerRealization,
    SpectralReport, StateSpaceCL,
};
