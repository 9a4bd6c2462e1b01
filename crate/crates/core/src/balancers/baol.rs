//! Foreground-aware proposal scoring, top-k compression, foreground label
//! assignment and the foreground loss.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::BalancerError;
use crate::geometry::{iou3d, Box7DoF};

pub const LOSS_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaolParams {
    pub n_pro: usize,
    pub k_pro: usize,
    pub iou_lo: f64,
    pub iou_hi: f64,
    /// Background weight of the loss. Has no default; must be configured
    /// before the loss can be computed.
    pub lambda: Option<f64>,
}

impl Default for BaolParams {
    fn default() -> Self {
        Self {
            n_pro: 1200,
            k_pro: 1000,
            iou_lo: 0.25,
            iou_hi: 0.85,
            lambda: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalSet {
    pub boxes: Vec<Box7DoF>,
    /// One row per proposal, one column per class.
    #[serde(rename = "classScores")]
    pub class_scores: Vec<Vec<f64>>,
    #[serde(rename = "fgScores")]
    pub fg_scores: Vec<f64>,
}

impl ProposalSet {
    pub fn validate(&self) -> Result<(), BalancerError> {
        let n = self.boxes.len();
        if self.class_scores.len() != n || self.fg_scores.len() != n {
            return Err(BalancerError::LengthMismatch(format!(
                "{} boxes, {} score rows, {} foreground scores",
                n,
                self.class_scores.len(),
                self.fg_scores.len()
            )));
        }
        let n_class = self.n_class();
        if let Some(row) = self.class_scores.iter().find(|r| r.len() != n_class) {
            return Err(BalancerError::LengthMismatch(format!(
                "score row of length {} where {} classes expected",
                row.len(),
                n_class
            )));
        }
        let in_unit = |v: &f64| (0.0..=1.0).contains(v);
        if !self.class_scores.iter().flatten().all(in_unit) || !self.fg_scores.iter().all(in_unit) {
            return Err(BalancerError::InvalidProposal("scores must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn n_class(&self) -> usize {
        self.class_scores.first().map_or(0, Vec::len)
    }

    /// Class scores with each row scaled by that proposal's foreground score.
    pub fn weighted_scores(&self) -> Vec<Vec<f64>> {
        self.class_scores
            .iter()
            .zip(&self.fg_scores)
            .map(|(row, o)| row.iter().map(|s| s * o).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Compressed {
    /// Indices of the kept proposals, ascending.
    #[serde(rename = "boxIndices")]
    pub box_indices: Vec<usize>,
    /// Weighted score rows of the kept proposals, aligned with `box_indices`.
    pub scores: Vec<Vec<f64>>,
    /// The selected `(proposal, class)` entries, best first.
    pub selected: Vec<(usize, usize)>,
}

/// Keeps the proposals owning at least one of the `k_pro` largest weighted
/// scores. Equal scores prefer the lower flat index.
pub fn baol_compress(p: &ProposalSet, k_pro: usize) -> Result<Compressed, BalancerError> {
    p.validate()?;
    let n_class = p.n_class();
    let total = p.boxes.len() * n_class;
    if k_pro == 0 || k_pro > total {
        return Err(BalancerError::InvalidParams(format!(
            "k_pro = {k_pro} outside [1, {total}]"
        )));
    }
    let so = p.weighted_scores();
    let mut flat: Vec<(usize, usize)> = (0..p.boxes.len())
        .flat_map(|i| (0..n_class).map(move |j| (i, j)))
        .collect();
    flat.sort_by(|a, b| so[b.0][b.1].total_cmp(&so[a.0][a.1]));
    flat.truncate(k_pro);
    let kept: BTreeSet<usize> = flat.iter().map(|(i, _)| *i).collect();
    let box_indices: Vec<usize> = kept.into_iter().collect();
    let scores = box_indices.iter().map(|i| so[*i].clone()).collect();
    Ok(Compressed {
        box_indices,
        scores,
        selected: flat,
    })
}

/// Greedy one-to-one matching on descending IoU. Only overlapping pairs
/// are matched. Returns, per proposal, the matched label and its IoU.
pub fn greedy_match(proposals: &[Box7DoF], labels: &[Box7DoF]) -> Vec<Option<(usize, f64)>> {
    let mut pairs = vec![];
    for (i, p) in proposals.iter().enumerate() {
        for (j, l) in labels.iter().enumerate() {
            let iou = iou3d(p, l);
            if iou > 0.0 {
                pairs.push((iou, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![None; proposals.len()];
    let mut label_used = vec![false; labels.len()];
    for (iou, i, j) in pairs {
        if out[i].is_none() && !label_used[j] {
            out[i] = Some((j, iou));
            label_used[j] = true;
        }
    }
    out
}

/// Foreground labels for proposals. A matched proposal stays foreground
/// unless its IoU is below `iou_lo`; any proposal whose best IoU with some
/// label exceeds `iou_hi` is foreground.
pub fn assign_foreground_labels(
    proposals: &[Box7DoF],
    labels: &[Box7DoF],
    iou_lo: f64,
    iou_hi: f64,
) -> Result<Vec<bool>, BalancerError> {
    if !(iou_lo < iou_hi) {
        return Err(BalancerError::InvalidParams(format!(
            "iou_lo = {iou_lo} must be below iou_hi = {iou_hi}"
        )));
    }
    let matches = greedy_match(proposals, labels);
    Ok(proposals
        .iter()
        .zip(matches)
        .map(|(p, m)| {
            let matched_fg = m.is_some_and(|(_, iou)| iou >= iou_lo);
            let best = labels.iter().map(|l| iou3d(p, l)).fold(0.0, f64::max);
            matched_fg || best > iou_hi
        })
        .collect())
}

/// Weighted binary cross-entropy over foreground predictions, with
/// probabilities clamped to `[LOSS_EPS, 1 - LOSS_EPS]`.
pub fn baol_loss(y: &[bool], o: &[f64], lambda: f64) -> Result<f64, BalancerError> {
    if y.len() != o.len() {
        return Err(BalancerError::LengthMismatch(format!(
            "{} labels, {} predictions",
            y.len(),
            o.len()
        )));
    }
    if !(lambda >= 0.0) {
        return Err(BalancerError::InvalidParams(format!("lambda = {lambda} must be >= 0")));
    }
    if y.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = y
        .iter()
        .zip(o)
        .map(|(&yi, &oi)| {
            let oi = oi.clamp(LOSS_EPS, 1.0 - LOSS_EPS);
            if yi {
                oi.ln()
            } else {
                lambda * (1.0 - oi).ln()
            }
        })
        .sum();
    Ok(-sum / y.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(cx: f64) -> Box7DoF {
        Box7DoF::axis_aligned([cx, 0.0, 0.0], [1.0; 3]).unwrap()
    }

    #[test]
    fn compress_hand_example() {
        let p = ProposalSet {
            boxes: vec![unit(0.0), unit(5.0)],
            class_scores: vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            fg_scores: vec![0.5, 1.0],
        };
        let c = baol_compress(&p, 2).unwrap();
        assert_eq!(c.box_indices, vec![0, 1]);
        assert_eq!(c.selected, vec![(1, 1), (0, 0)]);
        assert!((c.scores[0][0] - 0.45).abs() < 1e-12);
        assert!((c.scores[0][1] - 0.05).abs() < 1e-12);

        let c1 = baol_compress(&p, 1).unwrap();
        assert_eq!(c1.box_indices, vec![1]);
        assert!(baol_compress(&p, 0).is_err());
        assert!(baol_compress(&p, 5).is_err());
        assert_eq!(baol_compress(&p, 4).unwrap().box_indices, vec![0, 1]);
    }

    #[test]
    fn foreground_assignment_examples() {
        let label = unit(0.0);
        let same = assign_foreground_labels(&[unit(0.0)], &[label], 0.25, 0.85).unwrap();
        assert_eq!(same, vec![true]);

        // IoU of unit cubes offset by 0.8 along x: 0.2 / 1.8
        let weak = assign_foreground_labels(&[unit(0.8)], &[label], 0.25, 0.85).unwrap();
        assert_eq!(weak, vec![false]);

        // offset 0.05: IoU 0.95/1.05 > 0.85 for both, only one can be matched
        let dup = assign_foreground_labels(&[unit(0.0), unit(0.05)], &[label], 0.25, 0.85).unwrap();
        assert_eq!(dup, vec![true, true]);

        // offset 0.2: IoU 0.8/1.2 = 0.667, unmatched and not above iou_hi
        let lost = assign_foreground_labels(&[unit(0.0), unit(0.2)], &[label], 0.25, 0.85).unwrap();
        assert_eq!(lost, vec![true, false]);

        assert_eq!(assign_foreground_labels(&[unit(0.0)], &[], 0.25, 0.85).unwrap(), vec![false]);
        assert!(assign_foreground_labels(&[], &[], 0.9, 0.85).is_err());
    }

    #[test]
    fn loss_examples() {
        let l = baol_loss(&[true, false], &[0.5, 0.5], 1.0).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        let perfect = baol_loss(&[true, false], &[1.0, 0.0], 1.0).unwrap();
        assert!((0.0..1e-6).contains(&perfect));
        let no_bg = baol_loss(&[false, false], &[0.9, 0.3], 0.0).unwrap();
        assert_eq!(no_bg, 0.0);
        assert!(baol_loss(&[true], &[0.5, 0.5], 1.0).is_err());
    }
}
