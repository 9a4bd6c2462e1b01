//! Per-scene refinement: constraints, soft-logic decision and debate for
//! each novel-class detection, plus the AP evaluator and a synthetic scene
//! generator.

mod debate;
mod eval;
mod records;
mod refine;
mod synthetic;

pub use debate::{
    debater_prompt, find_candidate, gather_evidence, judge_prompt, top_candidates, DebateOracle,
    DebateOutcome, Evidence, OfflineDebate, RemoteDebate, Utterance, MAX_CANDIDATES,
};
pub use eval::{average_precision, eval_ap, eval_ap25, ApReport, AP_IOU_THRESHOLD};
pub use records::{
    check_scenes, read_jsonl, read_jsonl_file, read_scenes, write_ground_truth, write_jsonl,
    write_jsonl_file, write_scenes, Detection, SceneRecord,
};
pub use refine::{
    refine_scene, DebateSummary, DecisionCounts, ObjectLog, RefineConfig, Refiner, RunOutput,
    SceneLog,
};
pub use synthetic::{
    generate_synthetic_scenes, Corruption, CorruptionKind, SyntheticData, SyntheticParams,
};

use crate::commonsense::CommonsenseError;
use crate::psl::PslError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Provider(#[from] CommonsenseError),
    #[error(transparent)]
    Solver(#[from] PslError),
}

impl PipelineError {
    /// Whether the failure came from the knowledge source rather than the
    /// inputs.
    pub fn is_provider(&self) -> bool {
        matches!(self, PipelineError::Provider(_))
    }
}
