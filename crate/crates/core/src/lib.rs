pub mod bvar;
pub mod dataset;
pub mod decomposition;
pub mod elastic_net;
pub mod error;
pub mod event_study;
mod linalg;
pub mod par;
pub mod pipeline;
pub mod regression;
pub mod synth;

pub use error::{Error, ErrorCategory, Result};
