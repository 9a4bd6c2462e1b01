use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CommonsenseError;

/// Typical extents of a class, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct SizePrior {
    pub l_std: f64,
    pub w_std: f64,
    pub h_std: f64,
}

impl SizePrior {
    pub fn new(l_std: f64, w_std: f64, h_std: f64) -> Result<Self, CommonsenseError> {
        if [l_std, w_std, h_std].iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(Self { l_std, w_std, h_std })
        } else {
            Err(CommonsenseError::InvalidSizePrior([l_std, w_std, h_std]))
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.l_std, self.w_std, self.h_std]
    }
}

impl TryFrom<[f64; 3]> for SizePrior {
    type Error = CommonsenseError;

    fn try_from(v: [f64; 3]) -> Result<Self, Self::Error> {
        Self::new(v[0], v[1], v[2])
    }
}

impl From<SizePrior> for [f64; 3] {
    fn from(p: SizePrior) -> Self {
        p.as_array()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneContext {
    #[serde(rename = "sceneType")]
    pub scene_type: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

impl SceneContext {
    pub fn new(scene_type: impl Into<String>, description: impl Into<String>) -> Result<Self, CommonsenseError> {
        let scene_type = scene_type.into();
        if scene_type.trim().is_empty() {
            return Err(CommonsenseError::EmptySceneType);
        }
        Ok(Self {
            scene_type,
            description: description.into(),
        })
    }
}

/// Offline common-sense table: class sizes, scene compatibility and the
/// novel-class list.
///
/// `compat` maps a scene type to the classes that plausibly appear in it. A
/// class missing from a listed scene is incompatible; a scene that is not
/// listed at all is unknown.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KnowledgeBase {
    #[serde(default)]
    pub sizes: BTreeMap<String, SizePrior>,
    #[serde(default)]
    pub compat: BTreeMap<String, BTreeSet<String>>,
    #[serde(default)]
    pub novel_classes: BTreeSet<String>,
}

impl KnowledgeBase {
    pub fn validate(&self) -> Result<(), CommonsenseError> {
        if let Some(missing) = self.novel_classes.iter().find(|c| !self.sizes.contains_key(*c)) {
            return Err(CommonsenseError::MissingSizePrior(missing.clone()));
        }
        if let Some(scene) = self.compat.keys().find(|s| s.trim().is_empty()) {
            return Err(CommonsenseError::InvalidKnowledgeBase(format!(
                "empty scene type `{scene}`"
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, CommonsenseError> {
        let kb: KnowledgeBase = serde_json::from_str(text)
            .map_err(|e| CommonsenseError::InvalidKnowledgeBase(e.to_string()))?;
        kb.validate()?;
        Ok(kb)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CommonsenseError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            CommonsenseError::InvalidKnowledgeBase(format!("{}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    pub fn size_prior(&self, class: &str) -> Option<SizePrior> {
        self.sizes.get(class).copied()
    }

    /// `None` when the scene type is not listed.
    pub fn scene_compatible(&self, scene: &str, class: &str) -> Option<bool> {
        self.compat.get(scene).map(|classes| classes.contains(class))
    }

    pub fn is_novel(&self, class: &str) -> bool {
        self.novel_classes.contains(class)
    }

    /// Classes that are listed for `scene`.
    pub fn compatible_classes(&self, scene: &str) -> impl Iterator<Item = &str> {
        self.compat.get(scene).into_iter().flatten().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KB: &str = r#"{
        "sizes": {"toilet": [0.7, 0.45, 0.75], "sofa": [2.0, 0.9, 0.8]},
        "compat": {"bathroom": ["toilet"], "living room": ["sofa"]},
        "novel_classes": ["toilet"]
    }"#;

    #[test]
    fn parse_and_lookup() {
        let kb = KnowledgeBase::from_json(KB).unwrap();
        assert_eq!(kb.size_prior("toilet").unwrap().as_array(), [0.7, 0.45, 0.75]);
        assert_eq!(kb.scene_compatible("bathroom", "toilet"), Some(true));
        assert_eq!(kb.scene_compatible("living room", "toilet"), Some(false));
        assert_eq!(kb.scene_compatible("garage", "toilet"), None);
        assert!(kb.is_novel("toilet"));
        assert!(!kb.is_novel("sofa"));
    }

    #[test]
    fn novel_without_size_rejected() {
        let err = KnowledgeBase::from_json(r#"{"novel_classes": ["lamp"]}"#).unwrap_err();
        assert_eq!(err, CommonsenseError::MissingSizePrior("lamp".into()));
    }

    #[test]
    fn bad_sizes_rejected() {
        assert!(KnowledgeBase::from_json(r#"{"sizes": {"lamp": [0.3, 0, 1]}}"#).is_err());
        assert!(SizePrior::new(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn scene_context_requires_type() {
        assert!(SceneContext::new("  ", "").is_err());
        assert!(SceneContext::new("library", "shelves").is_ok());
    }
}
