//! Method-of-lines discretization of the weighted harmonic map heat flow.

mod config;
mod operator;
mod run;
mod state;

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::monitors::MonitorError;

pub use config::{DomainSpec, FlowConfig, FlowParams, Problem, TimeStep, Tolerances, WeightSpec};
pub use operator::{
    step, step_with, tension_field, Integrator, NodeStats, Scheme, TensionField, CFL_SAFETY,
    CFL_SLACK, DEFAULT_BLOWUP_GUARD,
};
pub use run::{run, RunOutcome, RunVerdict};
pub use state::{initial_map, InitialMapSpec, InitialReport, MapField, MapState, PoleCondition};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid initial map: {0}")]
    Spec(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error("blow-up at t = {time}: energy density {energy_density:e}")]
    BlowupDetected { time: f64, energy_density: f64 },
    #[error(
        "time step {dt:e} exceeds the stability bound {bound:e} by more than the allowed factor"
    )]
    CflViolation { dt: f64, bound: f64 },
    #[error("state left the target manifold at t = {time}: defect {defect:e}")]
    InvariantViolation { time: f64, defect: f64 },
}
