//! Training-side balancing machinery as pure functions and small state
//! machines: reflection filtering of 2D pseudo labels, per-class threshold
//! circulation, per-class loss weighting and foreground-aware proposals.

mod baol;
mod dbc;
mod rplg;
mod sbc;

pub use baol::{
    assign_foreground_labels, baol_compress, baol_loss, greedy_match, BaolParams, Compressed,
    ProposalSet, LOSS_EPS,
};
pub use dbc::{DbcParams, DbcState, DbcUpdate};
pub use rplg::{phi_plus, reflect_filter, PseudoLabel2D, PseudoLabelRecord, DEFAULT_PHI_CLIP};
pub use sbc::{offset_rates, sbc_loop, sbc_step, PseudoLabelPool, SbcOutcome, SbcParams, SbcState};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BalancerError {
    #[error("invalid pseudo label: {0}")]
    InvalidLabel(String),
    #[error("invalid proposal set: {0}")]
    InvalidProposal(String),
    #[error("class set is empty")]
    EmptyClassSet,
    #[error("counts cover {got:?} but thresholds exist for {expected:?}")]
    ClassMismatch {
        expected: Vec<String>,
        got: Vec<String>,
    },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("negative loss {loss} for class `{class}`")]
    NegativeLoss { class: String, loss: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}
