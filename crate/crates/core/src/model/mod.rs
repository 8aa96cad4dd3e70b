//! Problem instances, scenario cost families and seeded scenario streams.

mod builtin;
mod family;
mod instance;
mod stream;

pub use builtin::{builtin_instance, builtin_names};
pub use family::{evaluate_h, ActivePieces, AffinePiece, FunctionFamily};
pub use instance::{load_instance, BoxBounds, Component, DistributionSpec, InstanceSpec};
pub use stream::{draw_scenarios, Scenario, ScenarioStream};
pub(crate) use stream::position_rng;
