//! Command-line front end: problem files, the certification pipeline,
//! reports and a Galerkin heat-equation instance generator.

pub mod commands;
pub mod error;
pub mod heat;
pub mod problem;
pub mod report;
pub mod validation;

pub use commands::{cmd_certify, cmd_detect, cmd_simulate, cmd_steady_state, load_problem, CertifyFlags, SimulateFlags};
pub use error::CliError;
pub use heat::{generate_heat_instance, ControlProfile, HeatInstanceSpec, OutputSpec};
pub use problem::{Problem, ProblemFile};
pub use report::{CertReport, Verdict};
