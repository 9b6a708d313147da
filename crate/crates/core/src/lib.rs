//! Secure integrated sensing and communication with a legitimate RIS carried by
//! one UAV target and a malicious RIS carried by an eavesdropping UAV target.
//!
//! The crate covers scenario configuration, channel synthesis, sensing and
//! communication metrics, the two-stage SDR optimizer and a Monte Carlo
//! harness that writes CSV results.

pub mod channel;
pub mod cli;
pub mod comm;
pub mod harness;
pub mod optimizer;
pub mod rng;
pub mod scenario;
pub mod sensing;

pub use channel::{ChannelSet, RisPhases, SteeringVector};
pub use optimizer::{solve_p1, DesignOptions, P1Solution, PhaseDesign, TransmitDesign};
pub use scenario::{derive_geometry, load_config, Geometry, ScenarioConfig};
