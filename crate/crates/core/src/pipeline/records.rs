use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::commonsense::SceneContext;
use crate::geometry::Box7DoF;

fn default_score() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "box")]
    pub bbox: Box7DoF,
    #[serde(rename = "class")]
    pub class_id: String,
    #[serde(default = "default_score")]
    pub score: f64,
    #[serde(rename = "classScores", default, skip_serializing_if = "Option::is_none")]
    pub class_scores: Option<BTreeMap<String, f64>>,
}

impl Detection {
    pub fn new(bbox: Box7DoF, class_id: impl Into<String>, score: f64) -> Self {
        Self {
            bbox,
            class_id: class_id.into(),
            score,
            class_scores: None,
        }
    }

    pub fn with_class_scores(mut self, scores: impl IntoIterator<Item = (String, f64)>) -> Self {
        self.class_scores = Some(scores.into_iter().collect());
        self
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.score) {
            return Err(PipelineError::Input(format!(
                "score {} of `{}` outside [0, 1]",
                self.score, self.class_id
            )));
        }
        if let Some((c, v)) = self
            .class_scores
            .iter()
            .flatten()
            .find(|(_, v)| !unit(**v))
        {
            return Err(PipelineError::Input(format!(
                "class score {v} for `{c}` outside [0, 1]"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    #[serde(rename = "sceneId")]
    pub scene_id: String,
    #[serde(flatten)]
    pub context: SceneContext,
    #[serde(default)]
    pub detections: Vec<Detection>,
}

impl SceneRecord {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.context.scene_type.trim().is_empty() {
            return Err(PipelineError::Input(format!(
                "scene `{}` has an empty scene type",
                self.scene_id
            )));
        }
        for d in &self.detections {
            d.validate()
                .map_err(|e| PipelineError::Input(format!("scene `{}`: {e}", self.scene_id)))?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct GtDetection<'a> {
    #[serde(rename = "box")]
    bbox: &'a Box7DoF,
    class: &'a str,
}

#[derive(Serialize)]
struct GtScene<'a> {
    #[serde(rename = "sceneId")]
    scene_id: &'a str,
    #[serde(flatten)]
    context: &'a SceneContext,
    detections: Vec<GtDetection<'a>>,
}

/// Reads one JSON value per non-blank line. Errors name the line.
pub fn read_jsonl<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>, PipelineError> {
    let mut out = vec![];
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| PipelineError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| PipelineError::Input(format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(mut writer: impl Write, items: &[T]) -> Result<(), PipelineError> {
    for item in items {
        serde_json::to_writer(&mut writer, item).map_err(|e| PipelineError::Io(e.to_string()))?;
        writer.write_all(b"\n").map_err(|e| PipelineError::Io(e.to_string()))?;
    }
    writer.flush().map_err(|e| PipelineError::Io(e.to_string()))
}

pub fn read_jsonl_file<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, PipelineError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?;
    read_jsonl(std::io::BufReader::new(file))
        .map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))
}

pub fn write_jsonl_file<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<(), PipelineError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path)
        .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
    write_jsonl(std::io::BufWriter::new(file), items)
}

/// Loads and validates scene records, rejecting repeated scene ids.
pub fn read_scenes(path: impl AsRef<Path>) -> Result<Vec<SceneRecord>, PipelineError> {
    let scenes: Vec<SceneRecord> = read_jsonl_file(path)?;
    check_scenes(&scenes)?;
    Ok(scenes)
}

pub fn check_scenes(scenes: &[SceneRecord]) -> Result<(), PipelineError> {
    let mut seen = HashSet::new();
    for s in scenes {
        s.validate()?;
        if !seen.insert(s.scene_id.as_str()) {
            return Err(PipelineError::Input(format!("duplicate scene id `{}`", s.scene_id)));
        }
    }
    Ok(())
}

pub fn write_scenes(path: impl AsRef<Path>, scenes: &[SceneRecord]) -> Result<(), PipelineError> {
    write_jsonl_file(path, scenes)
}

/// Writes ground truth: the detection schema without scores.
pub fn write_ground_truth(path: impl AsRef<Path>, scenes: &[SceneRecord]) -> Result<(), PipelineError> {
    let rows: Vec<GtScene> = scenes
        .iter()
        .map(|s| GtScene {
            scene_id: &s.scene_id,
            context: &s.context,
            detections: s
                .detections
                .iter()
                .map(|d| GtDetection {
                    bbox: &d.bbox,
                    class: &d.class_id,
                })
                .collect(),
        })
        .collect();
    write_jsonl_file(path, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINE: &str = r#"{"sceneId":"s1","sceneType":"library","detections":[{"box":[0,0,0,1,1,1,0],"class":"book","score":0.9,"classScores":{"book":0.9,"stool":0.5}}]}"#;

    #[test]
    fn scene_round_trip() {
        let scenes: Vec<SceneRecord> = read_jsonl(format!("{LINE}\n\n").as_bytes()).unwrap();
        assert_eq!(scenes.len(), 1);
        assert_eq!(scenes[0].context.scene_type, "library");
        assert_eq!(scenes[0].detections[0].class_scores.as_ref().unwrap()["stool"], 0.5);
        let mut buf = vec![];
        write_jsonl(&mut buf, &scenes).unwrap();
        let again: Vec<SceneRecord> = read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(again, scenes);
    }

    #[test]
    fn ground_truth_score_defaults_to_one() {
        let line = r#"{"sceneId":"g","sceneType":"office","detections":[{"box":[0,0,0,1,1,1,0],"class":"desk"}]}"#;
        let scenes: Vec<SceneRecord> = read_jsonl(line.as_bytes()).unwrap();
        assert_eq!(scenes[0].detections[0].score, 1.0);
    }

    #[test]
    fn bad_lines_are_reported() {
        let err = read_jsonl::<SceneRecord>(format!("{LINE}\n{{oops\n").as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let dup: Vec<SceneRecord> = read_jsonl(format!("{LINE}\n{LINE}\n").as_bytes()).unwrap();
        assert!(check_scenes(&dup).is_err());
    }
}
