use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::debate::{DebateOracle, DebateOutcome, Utterance};
use super::records::SceneRecord;
use super::PipelineError;
use crate::commonsense::{constraint_vector, ConstraintSettings, KnowledgeProvider};
use crate::psl::{
    build_glrd_rules, decide, solve, ConstraintVector, Decision, RuleWeights, SelectionPolicy,
    SolverOutput, DEFAULT_PHI_KEEP, DEFAULT_PHI_RECLS,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineConfig {
    pub weights: RuleWeights,
    pub phi_keep: f64,
    pub phi_recls: f64,
    pub constraints: ConstraintSettings,
    pub policy: SelectionPolicy,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            weights: RuleWeights::default(),
            phi_keep: DEFAULT_PHI_KEEP,
            phi_recls: DEFAULT_PHI_RECLS,
            constraints: ConstraintSettings::default(),
            policy: SelectionPolicy::default(),
        }
    }
}

/// What happened to one input detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectLog {
    pub index: usize,
    pub class: String,
    /// Only novel classes go through the solver; base classes pass through.
    pub novel: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraints: Option<ConstraintVector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverOutput>,
    pub decision: Decision,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub debate: Option<DebateSummary>,
    pub transcript: Vec<Utterance>,
    /// `None` when the detection was removed.
    #[serde(rename = "finalClass")]
    pub final_class: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebateSummary {
    pub candidates: Vec<String>,
    pub winner: String,
    #[serde(rename = "perCandidateScore")]
    pub per_candidate_score: std::collections::BTreeMap<String, f64>,
}

impl From<&DebateOutcome> for DebateSummary {
    fn from(d: &DebateOutcome) -> Self {
        Self {
            candidates: d.candidates.clone(),
            winner: d.winner.clone(),
            per_candidate_score: d.per_candidate_score.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneLog {
    #[serde(rename = "sceneId")]
    pub scene_id: String,
    pub objects: Vec<ObjectLog>,
    /// Set when the scene could not be refined; it is then passed through
    /// unchanged.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionCounts {
    pub kept: usize,
    pub removed: usize,
    pub reclassified: usize,
}

impl DecisionCounts {
    pub fn add(&mut self, d: Decision) {
        match d {
            Decision::Keep => self.kept += 1,
            Decision::Remove => self.removed += 1,
            Decision::Reclassify => self.reclassified += 1,
        }
    }
}

impl std::fmt::Display for DecisionCounts {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "kept {}, removed {}, reclassified {}",
            self.kept, self.removed, self.reclassified
        )
    }
}

/// Everything a refinement run needs besides the scenes.
pub struct Refiner<'a> {
    pub provider: &'a dyn KnowledgeProvider,
    pub oracle: &'a dyn DebateOracle,
    pub novel_classes: &'a BTreeSet<String>,
    pub config: RefineConfig,
}

impl Refiner<'_> {
    /// Keeps, removes or relabels each novel-class detection. Base classes
    /// pass through. Any failure aborts the whole scene.
    pub fn refine_scene(&self, rec: &SceneRecord) -> Result<(SceneRecord, SceneLog), PipelineError> {
        let cfg = &self.config;
        let mut kept = Vec::with_capacity(rec.detections.len());
        let mut objects = Vec::with_capacity(rec.detections.len());
        for (index, det) in rec.detections.iter().enumerate() {
            if !self.novel_classes.contains(&det.class_id) {
                objects.push(ObjectLog {
                    index,
                    class: det.class_id.clone(),
                    novel: false,
                    constraints: None,
                    solver: None,
                    decision: Decision::Keep,
                    debate: None,
                    transcript: vec![],
                    final_class: Some(det.class_id.clone()),
                });
                kept.push(det.clone());
                continue;
            }
            let x = constraint_vector(
                &det.class_id,
                &det.bbox,
                det.score,
                &rec.context,
                self.provider,
                &cfg.constraints,
            )?;
            let sol = solve(&build_glrd_rules(&x, cfg.weights), cfg.policy)?;
            let decision = decide(&sol, cfg.phi_keep, cfg.phi_recls);
            let mut log = ObjectLog {
                index,
                class: det.class_id.clone(),
                novel: true,
                constraints: Some(x),
                solver: Some(sol),
                decision,
                debate: None,
                transcript: vec![],
                final_class: None,
            };
            match decision {
                Decision::Remove => {}
                Decision::Keep => {
                    log.final_class = Some(det.class_id.clone());
                    kept.push(det.clone());
                }
                Decision::Reclassify => {
                    let outcome = self
                        .oracle
                        .debate(det, &rec.context, self.provider, &cfg.constraints)?;
                    let mut relabeled = det.clone();
                    relabeled.class_id = outcome.winner.clone();
                    log.final_class = Some(outcome.winner.clone());
                    log.debate = Some(DebateSummary::from(&outcome));
                    log.transcript = outcome.transcript;
                    kept.push(relabeled);
                }
            }
            objects.push(log);
        }
        let refined = SceneRecord {
            scene_id: rec.scene_id.clone(),
            context: rec.context.clone(),
            detections: kept,
        };
        let log = SceneLog {
            scene_id: rec.scene_id.clone(),
            objects,
            error: None,
        };
        Ok((refined, log))
    }

    /// Refines every scene on a pool of `workers` threads. Output scenes keep
    /// input order; logs are sorted by scene id. Scenes that fail are passed
    /// through unchanged with the error recorded in their log.
    pub fn refine_all(&self, scenes: &[SceneRecord], workers: usize) -> Result<RunOutput, PipelineError> {
        let work = |rec: &SceneRecord| match self.refine_scene(rec) {
            Ok(pair) => (pair, None),
            Err(e) => (
                (
                    rec.clone(),
                    SceneLog {
                        scene_id: rec.scene_id.clone(),
                        objects: vec![],
                        error: Some(e.to_string()),
                    },
                ),
                Some(e),
            ),
        };
        let results: Vec<_> = if workers <= 1 {
            scenes.iter().map(work).collect()
        } else {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| PipelineError::Io(e.to_string()))?;
            pool.install(|| scenes.par_iter().map(work).collect())
        };

        let mut out = RunOutput::default();
        for ((scene, log), err) in results {
            for o in &log.objects {
                out.counts.add(o.decision);
            }
            if let Some(e) = err {
                out.errors.push((scene.scene_id.clone(), e));
            }
            out.scenes.push(scene);
            out.logs.push(log);
        }
        out.logs.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
        Ok(out)
    }
}

#[derive(Debug, Default)]
pub struct RunOutput {
    pub scenes: Vec<SceneRecord>,
    pub logs: Vec<SceneLog>,
    pub counts: DecisionCounts,
    pub errors: Vec<(String, PipelineError)>,
}

/// Single-scene convenience wrapper around [`Refiner::refine_scene`].
pub fn refine_scene(
    rec: &SceneRecord,
    provider: &dyn KnowledgeProvider,
    oracle: &dyn DebateOracle,
    novel_classes: &BTreeSet<String>,
    config: RefineConfig,
) -> Result<(SceneRecord, SceneLog), PipelineError> {
    Refiner {
        provider,
        oracle,
        novel_classes,
        config,
    }
    .refine_scene(rec)
}
