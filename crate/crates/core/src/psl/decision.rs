use serde::{Deserialize, Serialize};

use super::solver::SolverOutput;

pub const DEFAULT_PHI_KEEP: f64 = 0.01;
pub const DEFAULT_PHI_RECLS: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Keep,
    Remove,
    Reclassify,
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Decision::Keep => "keep",
            Decision::Remove => "remove",
            Decision::Reclassify => "reclassify",
        })
    }
}

/// Remove unless `yKeep` is strictly above `phi_keep`; a kept object whose
/// `yRecls` is strictly above `phi_recls` is sent to reclassification.
pub fn decide(sol: &SolverOutput, phi_keep: f64, phi_recls: f64) -> Decision {
    decide_point(sol.y_keep, sol.y_recls, phi_keep, phi_recls)
}

pub fn decide_point(y_keep: f64, y_recls: f64, phi_keep: f64, phi_recls: f64) -> Decision {
    if y_keep <= phi_keep {
        Decision::Remove
    } else if y_recls > phi_recls {
        Decision::Reclassify
    } else {
        Decision::Keep
    }
}
