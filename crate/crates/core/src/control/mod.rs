//! Control constructions: the localized transport control, vorticity steering
//! through a large initial temperature, and temperature steering along the
//! return-method drift.

mod target;
mod temperature;
mod transport;
mod vorticity;

use thiserror::Error;

use crate::return_method::GeometryError;
use crate::solver::SolverError;
use crate::spectral::SpectralError;

pub use target::{ramp_kappa, ramp_kappa_d1, smooth_target};
pub use temperature::{
    linear_aux_states, steer_temperature, temperature_control_eta, AuxSnapshot, EtaDeltaControl,
    EtaMode, LinearAuxStates, SteerTemperatureOptions, TemperatureSteering,
};
pub use transport::{
    solve_transport, transport_control_g, verify_equal_integrals, FnSource, MollifiedControl,
    TransportControl, TransportSource,
};
pub use vorticity::{
    build_xi, lcst_remainders, steer_vorticity, SteerVorticityOptions, VorticitySteering,
    XiOptions, XiProfile,
};

#[derive(Debug, Error)]
pub enum ControlError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("target is under-resolved: {0}")]
    UnderResolved(String),
    #[error("target bound not met: {0}")]
    BoundNotMet(String),
}
