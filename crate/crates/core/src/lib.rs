//! Headless engine for immersive computational notebooks.

pub mod artifact;
pub mod codegen;
pub mod kernel;
pub mod metrics;
pub mod notebook;
pub mod session;
pub mod value;
pub mod workspace;
