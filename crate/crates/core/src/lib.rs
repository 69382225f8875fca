//! Goal-oriented dialog pipeline: embedding intent classifier, recurrent
//! embedding dialog policy with user/system memory fusion, and
//! entrainment-based response selection, plus the corpus tooling that feeds
//! them.

pub mod featurize;
pub mod metrics;
pub mod adapt;
pub mod corpus;
pub mod nlu;
pub mod policy;
mod nn;
pub mod tensor;

pub use featurize::{tokenize, FeatureVector, Featurizer, FeaturizerConfig, TokenizedUtterance};
pub use metrics::Classification;
pub use tensor::{Graph, ParamStore, Tensor, TensorError, Var};
