//! Arbitration among the top candidate classes of a flagged detection.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::records::Detection;
use super::PipelineError;
use crate::commonsense::{
    scene_constraint, size_constraint, CommonsenseError, ConstraintSettings, KnowledgeProvider,
    LlmClient, SceneContext,
};

pub const MAX_CANDIDATES: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    /// `debater:<class>` or `judge`.
    pub role: String,
    pub text: String,
}

impl Utterance {
    fn debater(class: &str, text: String) -> Self {
        Self {
            role: format!("debater:{class}"),
            text,
        }
    }

    fn judge(text: String) -> Self {
        Self {
            role: "judge".into(),
            text,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebateOutcome {
    pub candidates: Vec<String>,
    pub winner: String,
    #[serde(rename = "perCandidateScore")]
    pub per_candidate_score: BTreeMap<String, f64>,
    pub transcript: Vec<Utterance>,
}

pub trait DebateOracle: Send + Sync {
    fn debate(
        &self,
        det: &Detection,
        scene: &SceneContext,
        provider: &dyn KnowledgeProvider,
        settings: &ConstraintSettings,
    ) -> Result<DebateOutcome, PipelineError>;
}

/// The highest-scoring classes of the detection, best first, ties by name.
/// A detection without a score vector contributes only its own class.
pub fn top_candidates(det: &Detection) -> Vec<(String, f64)> {
    let mut all: Vec<(String, f64)> = match &det.class_scores {
        Some(scores) if !scores.is_empty() => scores.iter().map(|(c, s)| (c.clone(), *s)).collect(),
        _ => vec![(det.class_id.clone(), det.score)],
    };
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    all.truncate(MAX_CANDIDATES);
    all
}

/// Evidence a debater can cite for its class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evidence {
    pub size_fit: f64,
    pub scene_fit: f64,
    pub class_score: f64,
}

impl Evidence {
    pub fn strength(&self) -> f64 {
        self.size_fit * self.scene_fit * self.class_score
    }
}

/// Size fit of the box under the candidate's prior (1 when the class has no
/// known size), scene fit, and class score.
pub fn gather_evidence(
    det: &Detection,
    class: &str,
    class_score: f64,
    scene: &SceneContext,
    provider: &dyn KnowledgeProvider,
    settings: &ConstraintSettings,
) -> Result<Evidence, CommonsenseError> {
    let size_fit = match provider.size_prior(class) {
        Ok(prior) => size_constraint(&det.bbox, &prior, &settings.size)?,
        Err(CommonsenseError::MissingSizePrior(_)) => 1.0,
        Err(e) => return Err(e),
    };
    let scene_fit = scene_constraint(class, &scene.scene_type, provider, settings.default_scene_compatible)?;
    Ok(Evidence {
        size_fit,
        scene_fit,
        class_score,
    })
}

/// Deterministic judge: the candidate with the strongest evidence wins; ties
/// go to the higher class score, then the lexicographically smaller name.
#[derive(Debug, Clone, Copy, Default)]
pub struct OfflineDebate;

impl DebateOracle for OfflineDebate {
    fn debate(
        &self,
        det: &Detection,
        scene: &SceneContext,
        provider: &dyn KnowledgeProvider,
        settings: &ConstraintSettings,
    ) -> Result<DebateOutcome, PipelineError> {
        let candidates = top_candidates(det);
        let mut transcript = vec![];
        let mut scored = vec![];
        for (class, class_score) in &candidates {
            let ev = gather_evidence(det, class, *class_score, scene, provider, settings)?;
            transcript.push(Utterance::debater(
                class,
                format!(
                    "It is a {class}: size fit {:.4}, scene fit {:.0} in a {}, class score {:.4}; strength {:.4}.",
                    ev.size_fit,
                    ev.scene_fit,
                    scene.scene_type,
                    ev.class_score,
                    ev.strength()
                ),
            ));
            scored.push((class.clone(), ev));
        }
        let (winner, best) = scored
            .iter()
            .max_by(|a, b| {
                a.1.strength()
                    .total_cmp(&b.1.strength())
                    .then(a.1.class_score.total_cmp(&b.1.class_score))
                    .then_with(|| b.0.cmp(&a.0))
            })
            .expect("at least one candidate");
        transcript.push(Utterance::judge(format!(
            "The object is a {winner} (strength {:.4}).",
            best.strength()
        )));
        Ok(DebateOutcome {
            candidates: candidates.iter().map(|(c, _)| c.clone()).collect(),
            winner: winner.clone(),
            per_candidate_score: scored.iter().map(|(c, ev)| (c.clone(), ev.strength())).collect(),
            transcript,
        })
    }
}

/// The candidate named earliest in `reply` (case-insensitive); among names
/// starting at the same position the longest wins.
pub fn find_candidate(reply: &str, candidates: &[String]) -> Option<String> {
    let lower = reply.to_lowercase();
    candidates
        .iter()
        .filter_map(|c| lower.find(&c.to_lowercase()).map(|pos| (pos, c)))
        .min_by(|a, b| a.0.cmp(&b.0).then(b.1.len().cmp(&a.1.len())))
        .map(|(_, c)| c.clone())
}

fn describe_box(det: &Detection) -> String {
    let [l, w, h] = det.bbox.extents();
    format!("{l:.2}*{w:.2}*{h:.2} meters")
}

pub fn debater_prompt(det: &Detection, scene: &SceneContext, class: &str, rivals: &[String]) -> String {
    let mut p = format!(
        "An object of size {} (length*width*height) was detected in a {}.",
        describe_box(det),
        scene.scene_type
    );
    if !scene.description.is_empty() {
        p.push_str(&format!(" Scene description: {}", scene.description));
    }
    p.push_str(&format!(
        " You are a debater. Argue that the object is a {class} rather than {}. Keep it short.",
        rivals.join(" or ")
    ));
    p
}

pub fn judge_prompt(det: &Detection, scene: &SceneContext, arguments: &[(String, String)]) -> String {
    let mut p = format!(
        "You are the judge of a debate about an object of size {} detected in a {}.",
        describe_box(det),
        scene.scene_type
    );
    for (class, arg) in arguments {
        p.push_str(&format!("\nThe debater for {class} says: {arg}"));
    }
    let names: Vec<&str> = arguments.iter().map(|(c, _)| c.as_str()).collect();
    p.push_str(&format!(
        "\nWhich class is the object: {}? Answer with the class name only.",
        names.join(", ")
    ));
    p
}

/// Role-played debate through the remote model. A judge reply that names
/// no candidate falls back to [`OfflineDebate`].
pub struct RemoteDebate {
    client: Arc<dyn LlmClient>,
}

impl RemoteDebate {
    pub fn new(client: Arc<dyn LlmClient>) -> Self {
        Self { client }
    }
}

impl DebateOracle for RemoteDebate {
    fn debate(
        &self,
        det: &Detection,
        scene: &SceneContext,
        provider: &dyn KnowledgeProvider,
        settings: &ConstraintSettings,
    ) -> Result<DebateOutcome, PipelineError> {
        let candidates: Vec<String> = top_candidates(det).into_iter().map(|(c, _)| c).collect();
        if candidates.len() == 1 {
            return OfflineDebate.debate(det, scene, provider, settings);
        }
        let llm_err = |e| PipelineError::Provider(CommonsenseError::Llm(e));
        let mut arguments = vec![];
        for class in &candidates {
            let rivals: Vec<String> = candidates.iter().filter(|c| *c != class).cloned().collect();
            let arg = self
                .client
                .complete(&debater_prompt(det, scene, class, &rivals))
                .map_err(llm_err)?;
            arguments.push((class.clone(), arg));
        }
        let verdict = self
            .client
            .complete(&judge_prompt(det, scene, &arguments))
            .map_err(llm_err)?;
        let mut transcript: Vec<Utterance> = arguments
            .iter()
            .map(|(c, a)| Utterance::debater(c, a.clone()))
            .collect();
        transcript.push(Utterance::judge(verdict.clone()));

        let Some(winner) = find_candidate(&verdict, &candidates) else {
            let mut offline = OfflineDebate.debate(det, scene, provider, settings)?;
            transcript.append(&mut offline.transcript);
            offline.transcript = transcript;
            return Ok(offline);
        };
        let mut per_candidate_score = BTreeMap::new();
        for (class, s) in top_candidates(det) {
            let ev = gather_evidence(det, &class, s, scene, provider, settings)?;
            per_candidate_score.insert(class, ev.strength());
        }
        Ok(DebateOutcome {
            candidates,
            winner,
            per_candidate_score,
            transcript,
        })
    }
}
