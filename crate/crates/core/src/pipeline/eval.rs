//! Average precision at a 3D IoU threshold of 0.25.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::records::SceneRecord;
use super::PipelineError;
use crate::geometry::iou3d;

pub const AP_IOU_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    /// AP for every class that has ground truth.
    #[serde(rename = "perClass")]
    pub per_class: BTreeMap<String, f64>,
    /// Mean over `per_class`; 0 when there is no ground truth at all.
    pub mean: f64,
}

/// Area under the precision/recall curve with precision made monotone
/// (all-point interpolation).
pub fn average_precision(tp: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut precision = Vec::with_capacity(tp.len());
    let mut recall = Vec::with_capacity(tp.len());
    let mut hits = 0usize;
    for (k, &t) in tp.iter().enumerate() {
        hits += t as usize;
        precision.push(hits as f64 / (k + 1) as f64);
        recall.push(hits as f64 / n_gt as f64);
    }
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, r) in precision.iter().zip(&recall) {
        ap += (r - prev_recall) * p;
        prev_recall = *r;
    }
    ap
}

pub fn eval_ap25(predictions: &[SceneRecord], ground_truth: &[SceneRecord]) -> Result<ApReport, PipelineError> {
    eval_ap(predictions, ground_truth, AP_IOU_THRESHOLD)
}

/// Per-class AP. Predictions are ranked by score (ties by scene id, then
/// position) and each is greedily matched to the best-overlapping unmatched
/// ground truth of its class in its scene.
pub fn eval_ap(
    predictions: &[SceneRecord],
    ground_truth: &[SceneRecord],
    iou_threshold: f64,
) -> Result<ApReport, PipelineError> {
    let gt_by_scene: HashMap<&str, &SceneRecord> =
        ground_truth.iter().map(|s| (s.scene_id.as_str(), s)).collect();
    if gt_by_scene.len() != ground_truth.len() {
        return Err(PipelineError::Input("duplicate scene id in ground truth".into()));
    }
    if let Some(p) = predictions.iter().find(|p| !gt_by_scene.contains_key(p.scene_id.as_str())) {
        return Err(PipelineError::Input(format!(
            "predicted scene `{}` has no ground truth",
            p.scene_id
        )));
    }

    let mut n_gt: BTreeMap<&str, usize> = BTreeMap::new();
    for s in ground_truth {
        for d in &s.detections {
            *n_gt.entry(d.class_id.as_str()).or_default() += 1;
        }
    }

    let preds_by_scene: HashMap<&str, &SceneRecord> =
        predictions.iter().map(|s| (s.scene_id.as_str(), s)).collect();
    if preds_by_scene.len() != predictions.len() {
        return Err(PipelineError::Input("duplicate scene id in predictions".into()));
    }
    let mut per_class = BTreeMap::new();
    for (&class, &count) in &n_gt {
        // (score, scene id, index)
        let mut ranked: Vec<(f64, &str, usize)> = predictions
            .iter()
            .flat_map(|s| {
                s.detections
                    .iter()
                    .enumerate()
                    .filter(|(_, d)| d.class_id == class)
                    .map(move |(i, d)| (d.score, s.scene_id.as_str(), i))
            })
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)).then(a.2.cmp(&b.2)));

        let mut used: HashSet<(&str, usize)> = HashSet::new();
        let tp: Vec<bool> = ranked
            .iter()
            .map(|&(_, scene, i)| {
                let pred = &preds_by_scene[scene].detections[i];
                let best = gt_by_scene[scene]
                    .detections
                    .iter()
                    .enumerate()
                    .filter(|(j, g)| g.class_id == class && !used.contains(&(scene, *j)))
                    .map(|(j, g)| (j, iou3d(&pred.bbox, &g.bbox)))
                    .filter(|(_, iou)| *iou >= iou_threshold)
                    .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
                match best {
                    Some((j, _)) => {
                        used.insert((scene, j));
                        true
                    }
                    None => false,
                }
            })
            .collect();
        per_class.insert(class.to_string(), average_precision(&tp, count));
    }
    let mean = if per_class.is_empty() {
        0.0
    } else {
        per_class.values().sum::<f64>() / per_class.len() as f64
    };
    Ok(ApReport { per_class, mean })
}
