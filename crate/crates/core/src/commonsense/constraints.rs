use serde::{Deserialize, Serialize};

use super::kb::{SceneContext, SizePrior};
use super::provider::KnowledgeProvider;
use super::CommonsenseError;
use crate::geometry::Box7DoF;
use crate::psl::ConstraintVector;

/// Decay rate and relative-error deadband of the size fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeConstraintConfig {
    pub alpha: f64,
    pub phi_size: f64,
}

impl Default for SizeConstraintConfig {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            phi_size: 0.05,
        }
    }
}

impl SizeConstraintConfig {
    pub fn new(alpha: f64, phi_size: f64) -> Result<Self, CommonsenseError> {
        let cfg = Self { alpha, phi_size };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CommonsenseError> {
        if self.alpha >= 0.0 && (0.0..1.0).contains(&self.phi_size) {
            Ok(())
        } else {
            Err(CommonsenseError::InvalidSizeConfig {
                alpha: self.alpha,
                phi_size: self.phi_size,
            })
        }
    }
}

/// `exp(-alpha · max(0, |x - y| / y - phi_size))`: 1 inside the deadband,
/// decaying with the relative error beyond it.
pub fn delta_fit(x: f64, y: f64, cfg: &SizeConstraintConfig) -> Result<f64, CommonsenseError> {
    if !(y > 0.0) {
        return Err(CommonsenseError::NonPositiveReference(y));
    }
    let excess = ((x - y).abs() / y - cfg.phi_size).max(0.0);
    Ok((-cfg.alpha * excess).exp())
}

/// Mean of the three per-dimension fits of `bbox` against `prior`.
pub fn size_constraint(
    bbox: &Box7DoF,
    prior: &SizePrior,
    cfg: &SizeConstraintConfig,
) -> Result<f64, CommonsenseError> {
    let [l, w, h] = bbox.extents();
    Ok((delta_fit(l, prior.l_std, cfg)?
        + delta_fit(w, prior.w_std, cfg)?
        + delta_fit(h, prior.h_std, cfg)?)
        / 3.0)
}

/// 1 if the provider judges `class` plausible in `scene`, else 0. Pairs the
/// provider has no opinion on resolve to `default_compatible`.
pub fn scene_constraint(
    class: &str,
    scene: &str,
    provider: &dyn KnowledgeProvider,
    default_compatible: bool,
) -> Result<f64, CommonsenseError> {
    let compatible = provider
        .scene_compatible(scene, class)?
        .unwrap_or(default_compatible);
    Ok(if compatible { 1.0 } else { 0.0 })
}

/// The detector's own score.
pub fn confidence_constraint(score: f64) -> Result<f64, CommonsenseError> {
    if (0.0..=1.0).contains(&score) {
        Ok(score)
    } else {
        Err(CommonsenseError::ScoreOutOfRange(score))
    }
}

/// Everything [`constraint_vector`] needs besides the detection and scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSettings {
    pub size: SizeConstraintConfig,
    pub default_scene_compatible: bool,
}

impl Default for ConstraintSettings {
    fn default() -> Self {
        Self {
            size: SizeConstraintConfig::default(),
            default_scene_compatible: true,
        }
    }
}

pub fn constraint_vector(
    class: &str,
    bbox: &Box7DoF,
    score: f64,
    scene: &SceneContext,
    provider: &dyn KnowledgeProvider,
    settings: &ConstraintSettings,
) -> Result<ConstraintVector, CommonsenseError> {
    let x_conf = confidence_constraint(score)?;
    let prior = provider.size_prior(class)?;
    let x_size = size_constraint(bbox, &prior, &settings.size)?;
    let x_scene = scene_constraint(
        class,
        &scene.scene_type,
        provider,
        settings.default_scene_compatible,
    )?;
    ConstraintVector::new(x_conf, x_size, x_scene)
        .map_err(|e| CommonsenseError::InvalidKnowledgeBase(e.to_string()))
}
