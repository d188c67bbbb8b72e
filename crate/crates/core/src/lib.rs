//! Impact vibration transmission through a prosthetic-socket hand model,
//! the socket-sensor signal pipeline, and a recurrent finger-contact
//! classifier.

pub mod container;
pub mod dsp;
pub mod error;
pub mod lstm;
pub mod metrics;
pub mod report;
pub mod rng;
pub mod signal;
pub mod sim;
pub mod workflow;

pub use error::{Error, Result};
