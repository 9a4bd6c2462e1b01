//! Seeded synthetic scenes with ground truth and deliberately corrupted
//! detections.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::records::{Detection, SceneRecord};
use super::PipelineError;
use crate::commonsense::{size_constraint, KnowledgeBase, SceneContext, SizeConstraintConfig};
use crate::geometry::Box7DoF;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticParams {
    pub scenes: usize,
    pub min_objects: usize,
    pub max_objects: usize,
    /// Probability that any one object is corrupted.
    pub corruption_rate: f64,
    /// Per-dimension relative size noise around the prior.
    pub size_jitter: f64,
    /// Distance between neighbouring objects along x, in meters.
    pub spacing: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            scenes: 200,
            min_objects: 3,
            max_objects: 6,
            corruption_rate: 0.2,
            size_jitter: 0.03,
            spacing: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorruptionKind {
    /// Relabeled to a novel class that does not belong in the scene.
    SceneSwap,
    /// Relabeled to a much smaller novel class; the true class stays among
    /// the detection's runner-up scores.
    SizeSwap,
    /// An extra box of a scene-incompatible novel class.
    Hallucination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corruption {
    #[serde(rename = "sceneId")]
    pub scene_id: String,
    /// Index of the affected ground-truth object.
    pub object: usize,
    /// Index of the corrupted detection in the scene's detection list.
    pub detection: usize,
    pub kind: CorruptionKind,
    #[serde(rename = "trueClass")]
    pub true_class: String,
    #[serde(rename = "detectedClass")]
    pub detected_class: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticData {
    pub ground_truth: Vec<SceneRecord>,
    pub detections: Vec<SceneRecord>,
    pub corruptions: Vec<Corruption>,
}

/// Size fit below which a relabeling counts as size-incompatible.
const SIZE_SWAP_MAX_FIT: f64 = 0.5;

struct Catalog<'a> {
    kb: &'a KnowledgeBase,
    /// Scene types with at least one class of known size.
    scenes: Vec<&'a str>,
}

impl<'a> Catalog<'a> {
    fn new(kb: &'a KnowledgeBase) -> Self {
        let scenes = kb
            .compat
            .keys()
            .map(String::as_str)
            .filter(|s| !Self::sized_members(kb, s).is_empty())
            .collect();
        Self { kb, scenes }
    }

    fn sized_members(kb: &'a KnowledgeBase, scene: &str) -> Vec<&'a str> {
        kb.compatible_classes(scene)
            .filter(|c| kb.sizes.contains_key(*c))
            .collect()
    }

    fn novel_with(&self, scene: &str, compatible: bool) -> Vec<&'a str> {
        self.kb
            .novel_classes
            .iter()
            .map(String::as_str)
            .filter(|c| self.kb.scene_compatible(scene, c) == Some(compatible))
            .collect()
    }
}

fn jittered_box(
    rng: &mut ChaCha8Rng,
    prior: [f64; 3],
    jitter: f64,
    cx: f64,
    cy: f64,
) -> Result<Box7DoF, PipelineError> {
    let mut dims = [0.0; 3];
    for (d, p) in dims.iter_mut().zip(prior) {
        *d = p * rng.gen_range(1.0 - jitter..=1.0 + jitter);
    }
    let theta = rng.gen_range(-PI..PI);
    Box7DoF::new(cx, cy, dims[2] / 2.0, dims[0], dims[1], dims[2], theta)
        .map_err(|e| PipelineError::Input(e.to_string()))
}

/// Generates `params.scenes` scenes of objects drawn from the knowledge base
/// and a detection set in which each object is corrupted with probability
/// `params.corruption_rate`. Fully determined by `seed`.
pub fn generate_synthetic_scenes(
    kb: &KnowledgeBase,
    seed: u64,
    params: &SyntheticParams,
) -> Result<SyntheticData, PipelineError> {
    if !(0.0..=1.0).contains(&params.corruption_rate) {
        return Err(PipelineError::Input(format!(
            "corruption rate {} outside [0, 1]",
            params.corruption_rate
        )));
    }
    if params.min_objects > params.max_objects || !(0.0..1.0).contains(&params.size_jitter) {
        return Err(PipelineError::Input(format!("invalid synthetic parameters {params:?}")));
    }
    let catalog = Catalog::new(kb);
    if catalog.scenes.is_empty() && params.scenes > 0 {
        return Err(PipelineError::Input(
            "knowledge base lists no scene with a class of known size".into(),
        ));
    }
    let size_cfg = SizeConstraintConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SyntheticData {
        ground_truth: vec![],
        detections: vec![],
        corruptions: vec![],
    };

    for s in 0..params.scenes {
        let scene_id = format!("synth-{s:04}");
        let scene_type = *catalog.scenes.choose(&mut rng).expect("non-empty");
        let context = SceneContext::new(scene_type, "").map_err(|e| PipelineError::Input(e.to_string()))?;
        let members = Catalog::sized_members(kb, scene_type);
        let incompatible = catalog.novel_with(scene_type, false);
        let compatible_novel = catalog.novel_with(scene_type, true);

        let n = rng.gen_range(params.min_objects..=params.max_objects);
        let mut gt = vec![];
        let mut dets = vec![];
        for j in 0..n {
            let class = *members.choose(&mut rng).expect("non-empty");
            let prior = kb.sizes[class].as_array();
            let bbox = jittered_box(&mut rng, prior, params.size_jitter, j as f64 * params.spacing, 0.0)?;
            let truth = Detection::new(bbox, class, 1.0);
            gt.push(truth.clone());

            if rng.gen::<f64>() >= params.corruption_rate {
                dets.push(truth);
                continue;
            }
            let scene_swaps: Vec<&str> = incompatible.iter().copied().filter(|c| *c != class).collect();
            let size_swaps: Vec<&str> = compatible_novel
                .iter()
                .copied()
                .filter(|c| *c != class)
                .filter(|c| {
                    size_constraint(&bbox, &kb.sizes[*c], &size_cfg).is_ok_and(|f| f < SIZE_SWAP_MAX_FIT)
                })
                .collect();
            let mut kinds = vec![];
            if !scene_swaps.is_empty() {
                kinds.push(CorruptionKind::SceneSwap);
                kinds.push(CorruptionKind::Hallucination);
            }
            if !size_swaps.is_empty() {
                kinds.push(CorruptionKind::SizeSwap);
            }
            let Some(&kind) = kinds.choose(&mut rng) else {
                dets.push(truth);
                continue;
            };
            let record = |detection: usize, detected: &str| Corruption {
                scene_id: scene_id.clone(),
                object: j,
                detection,
                kind,
                true_class: class.to_string(),
                detected_class: detected.to_string(),
            };
            match kind {
                CorruptionKind::SceneSwap => {
                    let wrong = *scene_swaps.choose(&mut rng).expect("non-empty");
                    let score = rng.gen_range(0.6..=1.0);
                    out.corruptions.push(record(dets.len(), wrong));
                    dets.push(Detection::new(bbox, wrong, score));
                }
                CorruptionKind::SizeSwap => {
                    let wrong = *size_swaps.choose(&mut rng).expect("non-empty");
                    let score: f64 = rng.gen_range(0.9..=1.0);
                    let mut scores = vec![
                        (wrong.to_string(), score),
                        (class.to_string(), score * rng.gen_range(0.7..0.95)),
                    ];
                    let others: Vec<&str> =
                        members.iter().copied().filter(|c| *c != class && *c != wrong).collect();
                    if let Some(d) = others.choose(&mut rng) {
                        scores.push((d.to_string(), score * rng.gen_range(0.05..0.3)));
                    }
                    out.corruptions.push(record(dets.len(), wrong));
                    dets.push(Detection::new(bbox, wrong, score).with_class_scores(scores));
                }
                CorruptionKind::Hallucination => {
                    dets.push(truth);
                    let fake = *scene_swaps.choose(&mut rng).expect("non-empty");
                    let fake_box = jittered_box(
                        &mut rng,
                        kb.sizes[fake].as_array(),
                        params.size_jitter,
                        j as f64 * params.spacing,
                        params.spacing * 1.5,
                    )?;
                    let score = rng.gen_range(0.3..0.9);
                    out.corruptions.push(record(dets.len(), fake));
                    dets.push(Detection::new(fake_box, fake, score));
                }
            }
        }
        out.ground_truth.push(SceneRecord {
            scene_id: scene_id.clone(),
            context: context.clone(),
            detections: gt,
        });
        out.detections.push(SceneRecord {
            scene_id,
            context,
            detections: dets,
        });
    }
    Ok(out)
}
