use serde::{Deserialize, Serialize};

use super::bbox::{iou3d, Box7DoF};

pub const DEFAULT_SIGMA: f64 = 0.5;
pub const DEFAULT_SCORE_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredBox {
    #[serde(rename = "box")]
    pub bbox: Box7DoF,
    pub score: f64,
    #[serde(rename = "classId")]
    pub class_id: i64,
}

impl ScoredBox {
    pub fn new(bbox: Box7DoF, score: f64, class_id: i64) -> Self {
        Self {
            bbox,
            score,
            class_id,
        }
    }
}

/// Gaussian Soft-NMS, applied per class.
///
/// Repeatedly takes the highest-scoring remaining box and multiplies the score
/// of every remaining box of the same class by `exp(-iou² / sigma)`. Boxes that
/// fall below `score_floor` are dropped. The result is sorted by final score,
/// descending; equal scores keep their input order.
pub fn soft_nms(boxes: &[ScoredBox], sigma: f64, score_floor: f64) -> Vec<ScoredBox> {
    assert!(sigma > 0.0, "soft_nms: sigma must be positive");
    // (original index, box)
    let mut pending: Vec<(usize, ScoredBox)> = boxes.iter().copied().enumerate().collect();
    let mut kept: Vec<(usize, ScoredBox)> = Vec::with_capacity(boxes.len());

    while !pending.is_empty() {
        let best = pending
            .iter()
            .enumerate()
            .max_by(|(_, (ia, a)), (_, (ib, b))| {
                a.score.total_cmp(&b.score).then_with(|| ib.cmp(ia))
            })
            .map(|(pos, _)| pos)
            .expect("non-empty");
        let (idx, pick) = pending.swap_remove(best);
        kept.push((idx, pick));

        pending.retain_mut(|(_, other)| {
            if other.class_id == pick.class_id {
                let iou = iou3d(&pick.bbox, &other.bbox);
                other.score *= (-(iou * iou) / sigma).exp();
            }
            other.score >= score_floor
        });
    }

    kept.sort_by(|(ia, a), (ib, b)| b.score.total_cmp(&a.score).then_with(|| ia.cmp(ib)));
    kept.into_iter().map(|(_, b)| b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(x: f64) -> Box7DoF {
        Box7DoF::new(x, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn empty_in_empty_out() {
        assert!(soft_nms(&[], 0.5, 0.01).is_empty());
    }

    #[test]
    fn single_box_unchanged() {
        let b = ScoredBox::new(unit(0.0), 0.7, 3);
        assert_eq!(soft_nms(&[b], 0.5, 0.01), vec![b]);
    }

    #[test]
    fn duplicate_decays_by_exp_minus_two() {
        let a = ScoredBox::new(unit(0.0), 1.0, 0);
        let out = soft_nms(&[a, a], 0.5, 0.01);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].score, 1.0);
        assert!((out[1].score - (-2.0f64).exp()).abs() < 1e-12);
        assert!((out[1].score - 0.135335).abs() < 1e-6);
    }

    #[test]
    fn other_classes_untouched() {
        let a = ScoredBox::new(unit(0.0), 1.0, 0);
        let b = ScoredBox::new(unit(0.0), 0.9, 1);
        let out = soft_nms(&[a, b], 0.5, 0.01);
        assert_eq!(out, vec![a, b]);
    }

    #[test]
    fn floor_drops_boxes() {
        let a = ScoredBox::new(unit(0.0), 1.0, 0);
        let b = ScoredBox::new(unit(0.0), 0.05, 0);
        let out = soft_nms(&[b, a], 0.5, 0.01);
        assert_eq!(out, vec![a]);
    }
}
