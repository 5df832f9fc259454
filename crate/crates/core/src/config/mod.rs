//! The XML network description: parsing, serialization, generation from
//! hyperparameters, and compilation into a runnable [`Network`].

mod build;
mod document;
mod generate;
pub mod xml;

use thiserror::Error;

pub use build::{build_network, build_network_with, encoding_params, readout_section, Dynamics};
pub use document::{
    parse_config, serialize_config, ClassifierArgs, ConfigDocument, ImageArgs, LinkDecl, NetworkDecl, PlasticityDecl,
    ReadoutDecl, ReceptorDecl, ReceptorKind, SectionDecl, Structure, UniformRange,
};
pub use generate::{generate_config, Hyperparameters, INITIAL_RESOURCE_RATIO, UNIT_SCALE};

use crate::engine::EngineError;

/// The reference 150-neuron MNIST network description.
pub const REFERENCE_CONFIG: &str = include_str!("../../fixtures/reference.nnc");

/// Parsed [`REFERENCE_CONFIG`].
pub fn reference_config() -> ConfigDocument {
    parse_config(REFERENCE_CONFIG).expect("reference configuration parses")
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("syntax error: {0}")]
    Syntax(#[from] xml::XmlError),
    #[error("duplicate name {0:?}")]
    DuplicateName(String),
    #[error("link endpoint {0:?} is not declared")]
    UndeclaredEndpoint(String),
    #[error("line {line}: <{element}> value {value:?} is not a number")]
    NotNumeric { line: usize, element: String, value: String },
    #[error("line {line}: <{parent}> is missing {child}")]
    Missing { line: usize, parent: String, child: String },
    #[error("{0}")]
    Invalid(String),
    #[error("hyperparameter out of range: {0}")]
    OutOfRange(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}
