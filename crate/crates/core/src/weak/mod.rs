//! The weak position measurement: a wide Gaussian pointer couples to the
//! particle, the record steers the conditional state, and post-selection on
//! the later position turns averaged pointer readings into velocities.

pub mod pointer;
pub mod protocol;
pub mod weak_value;

pub use pointer::{conditional_wavefunction, PointerModel};
pub use protocol::{run_protocol, ProtocolConfig, ProtocolOutput, WeakRunRecord};
pub use weak_value::{extrapolate_to_zero, weak_value_velocity, weak_velocity_limit};
