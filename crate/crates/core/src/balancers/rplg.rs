use serde::{Deserialize, Serialize};

use super::BalancerError;

pub const DEFAULT_PHI_CLIP: f64 = 0.5;

/// A 2D pseudo label with the image–text similarity logits for the
/// "This is a {class}." / "This is not a {class}." templates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabel2D {
    /// `[x1, y1, x2, y2]` in pixels.
    pub bbox: [f64; 4],
    pub class: String,
    pub confidence: f64,
    #[serde(rename = "simPos")]
    pub sim_pos: f64,
    #[serde(rename = "simNeg")]
    pub sim_neg: f64,
}

/// All pseudo labels of one image, as stored one record per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelRecord {
    #[serde(rename = "imageId", default)]
    pub image_id: String,
    pub labels: Vec<PseudoLabel2D>,
}

impl PseudoLabel2D {
    pub fn validate(&self) -> Result<(), BalancerError> {
        let [x1, y1, x2, y2] = self.bbox;
        if !(x1 < x2 && y1 < y2) {
            return Err(BalancerError::InvalidLabel(format!(
                "degenerate 2D box {:?} for `{}`",
                self.bbox, self.class
            )));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(BalancerError::InvalidLabel(format!(
                "confidence {} outside [0, 1]",
                self.confidence
            )));
        }
        Ok(())
    }

    /// Positive-template probability.
    pub fn phi_plus(&self) -> f64 {
        phi_plus(self.sim_pos, self.sim_neg)
    }
}

/// Two-way softmax of the similarity logits, positive component.
pub fn phi_plus(sim_pos: f64, sim_neg: f64) -> f64 {
    // 1 / (1 + e^(neg - pos)) is the stable form of e^pos / (e^pos + e^neg)
    1.0 / (1.0 + (sim_neg - sim_pos).exp())
}

/// Keeps the labels whose positive-template probability is at least
/// `phi_clip`.
pub fn reflect_filter(labels: &[PseudoLabel2D], phi_clip: f64) -> Vec<PseudoLabel2D> {
    labels
        .iter()
        .filter(|l| l.phi_plus() >= phi_clip)
        .cloned()
        .collect()
}
