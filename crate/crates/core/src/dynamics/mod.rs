//! Time evolution: spectral propagation of the state and transport of
//! trajectory ensembles along its flow.

pub mod continuity;
pub mod split_op;
pub mod trajectory;
pub mod velocity;

pub use continuity::{continuity_residual, ContinuityReport};
pub use split_op::SplitOperator;
pub use trajectory::{transport, transport_ensemble};
pub use velocity::{velocity_field, velocity_field_with_floor, VelocityField, VelocityLaw};
