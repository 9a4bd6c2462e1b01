//! Common-sense constraints on detections (size, scene, confidence) and the
//! providers that answer the underlying questions.

mod constraints;
mod kb;
pub mod llm;
mod provider;

pub use constraints::{
    confidence_constraint, constraint_vector, delta_fit, scene_constraint, size_constraint,
    ConstraintSettings, SizeConstraintConfig,
};
pub use kb::{KnowledgeBase, SceneContext, SizePrior};
pub use llm::{HttpLlmClient, LlmClient, LlmError, LlmSettings};
pub use provider::{llm_query_scene, llm_query_size, KeyedCache, KnowledgeProvider, RemoteProvider};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CommonsenseError {
    #[error("no size prior for class `{0}`")]
    MissingSizePrior(String),
    #[error("size prior must be positive, got {0:?}")]
    InvalidSizePrior([f64; 3]),
    #[error("reference size must be positive, got {0}")]
    NonPositiveReference(f64),
    #[error("invalid size config: alpha={alpha} must be >= 0 and phi_size={phi_size} in [0, 1)")]
    InvalidSizeConfig { alpha: f64, phi_size: f64 },
    #[error("detection score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("scene type must be non-empty")]
    EmptySceneType,
    #[error("invalid knowledge base: {0}")]
    InvalidKnowledgeBase(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
}
