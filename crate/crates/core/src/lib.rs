//! Weak-asymptotic pressureless Euler-Poisson solver.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod fields;
pub mod gravity;
pub mod integrate;
pub mod nbody;
pub mod scenarios;
pub mod snapshot;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
pub use fields::{
    compensated_sum, recover_velocity, split_velocity, DomainSpec, FluidState, SpeciesFields,
    Topology, VelocitySplit, VACUUM_DENSITY,
};
pub use gravity::{
    apply_gravity_source, grad_phi_1d, grad_phi_nd, ConvolutionBackend, GravityConfig,
    GravityField, GravitySolver, GreenBoundary,
};
pub use transport::{exact_transport_step_2d, rhs_1d, rhs_nd, transport_rhs, RhsOutput};
pub use integrate::{choose_dt, run, run_with, step, Integrator, RunOutput, SolverConfig, Stepper};
pub use nbody::{bodies_to_fields, extract_bodies, nbody_rhs, Body, Softening};
pub use scenarios::{build_scenario, mollify_initial, star_fraction, Scenario, ScenarioKind, ScenarioSpec};
pub use snapshot::{read_snapshot, write_snapshot, Snapshot};
pub use verify::{convergence_study, monitor, weak_residual, DiagnosticsRecord, ResidualReport, TestFunction};
