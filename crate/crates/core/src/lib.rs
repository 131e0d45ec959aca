//! Explainable food recommendation.
//!
//! A rule engine filters and ranks recipes for a user profile. Two CART
//! surrogates (user-centric and recipe-centric) mimic its decisions, exact
//! interventional Shapley values attribute their predictions to features, and
//! the top attributions are turned into prompts for a text-generation backend.

pub mod config;
pub mod domain;
pub mod eval;
pub mod explain;
pub mod gateway;
pub mod ingest;
pub mod rules;
pub mod session;
pub mod shap;
pub mod tree;

use thiserror::Error;

pub use config::{AppConfig, ConfigError};
pub use domain::{Recipe, UserProfile};
pub use explain::{ExplanationRequest, ExplanationResult};
pub use gateway::Gateway;
pub use session::Session;

/// Union of module errors, for front ends that only need to classify them.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
    #[error(transparent)]
    Rules(#[from] rules::RulesError),
    #[error(transparent)]
    Schema(#[from] domain::SchemaError),
    #[error(transparent)]
    Tree(#[from] tree::TreeError),
    #[error(transparent)]
    Shap(#[from] shap::ShapError),
    #[error(transparent)]
    Session(#[from] session::SessionError),
    #[error(transparent)]
    Explain(#[from] explain::ExplainError),
    #[error(transparent)]
    Gateway(#[from] gateway::GatewayError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
}

impl Error {
    /// True when the failure came from reading or writing a file.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Config(e) => e.is_io(),
            Error::Ingest(e) => e.is_io(),
            Error::Session(session::SessionError::Ingest(e)) => e.is_io(),
            Error::Eval(e) => e.is_io(),
            _ => false,
        }
    }
}
