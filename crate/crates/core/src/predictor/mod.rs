//! Query-only predictor contract.
//!
//! A predictor maps a scenario to a response and nothing else: no gradients,
//! no parameters, no internals. Parse failures are ordinary outcomes carried
//! in the [`Reply`]; only transport failures are errors.

mod cache;
mod log;
mod remote;
mod surrogate;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{CacheError, CacheStats, Cached};
pub use log::{QueryLog, QueryRecord};
pub use remote::{EndpointConfig, RemotePredictor, ENV_ENDPOINT, ENV_TOKEN};
pub use surrogate::{surrogate_trajectory, Surrogate, SurrogateParams, LANE_WIDTH_M};

use crate::prompt::{ParseError, PromptMode};
use crate::scenario::{DrivingScenario, PredictionResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub mode: PromptMode,
    pub max_concurrency: usize,
    pub deterministic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    /// Raw response text as returned by the model.
    pub raw: String,
    pub outcome: Result<PredictionResult, ParseError>,
    /// True when served from a cache without querying the model.
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("no response after {attempts} attempt(s): {detail}")]
    Timeout { attempts: u32, detail: String },
    #[error("endpoint returned HTTP {0}")]
    HttpStatus(u16),
    #[error("malformed endpoint reply: {0}")]
    Protocol(String),
}

pub trait Predictor: Send + Sync {
    fn capabilities(&self) -> Capabilities;
    fn predict(&self, scenario: &DrivingScenario) -> Result<Reply, TransportError>;
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }
    fn predict(&self, scenario: &DrivingScenario) -> Result<Reply, TransportError> {
        (**self).predict(scenario)
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }
    fn predict(&self, scenario: &DrivingScenario) -> Result<Reply, TransportError> {
        (**self).predict(scenario)
    }
}

impl<P: Predictor + ?Sized> Predictor for Arc<P> {
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }
    fn predict(&self, scenario: &DrivingScenario) -> Result<Reply, TransportError> {
        (**self).predict(scenario)
    }
}
