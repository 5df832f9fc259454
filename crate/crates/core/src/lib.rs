//! Spiking neural network with three-factor plasticity for MNIST
//! classification.

pub mod config;
pub mod data;
pub mod encoding;
pub mod engine;
pub mod evaluation;
pub mod experiment;
pub mod ga;
pub mod plasticity;
