//! Quantum belief propagation for thermal states of spin models on graphs.

pub mod cap;
pub mod engine;
pub mod error;
pub mod info;
pub mod model;
pub mod operator;
pub mod oracle;
pub mod replica;
pub mod sliding;

pub use error::{Error, Result};
