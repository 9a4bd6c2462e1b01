//! Run configuration, loaded from TOML. Every field has a default, so an
//! empty file is a valid config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::balancers::{BaolParams, DbcParams, SbcParams, DEFAULT_PHI_CLIP};
use crate::commonsense::{ConstraintSettings, LlmSettings, SizeConstraintConfig};
use crate::pipeline::{RefineConfig, SyntheticParams};
use crate::psl::{RuleWeights, SelectionPolicy, DEFAULT_PHI_KEEP, DEFAULT_PHI_RECLS};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub detections: Option<PathBuf>,
    pub kb: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub log: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PslConfig {
    pub weights: [f64; 3],
    pub phi_keep: f64,
    pub phi_recls: f64,
    pub policy: SelectionPolicy,
}

impl Default for PslConfig {
    fn default() -> Self {
        Self {
            weights: RuleWeights::default().0,
            phi_keep: DEFAULT_PHI_KEEP,
            phi_recls: DEFAULT_PHI_RECLS,
            policy: SelectionPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstraintConfig {
    pub alpha: f64,
    pub phi_size: f64,
    /// Scene compatibility assumed when the knowledge source has no opinion.
    pub default_scene_compatible: bool,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        let s = SizeConstraintConfig::default();
        Self {
            alpha: s.alpha,
            phi_size: s.phi_size,
            default_scene_compatible: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RplgConfig {
    pub phi_clip: f64,
}

impl Default for RplgConfig {
    fn default() -> Self {
        Self {
            phi_clip: DEFAULT_PHI_CLIP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub psl: PslConfig,
    pub constraints: ConstraintConfig,
    pub rplg: RplgConfig,
    pub sbc: SbcParams,
    pub dbc: DbcParams,
    pub baol: BaolParams,
    pub llm: LlmSettings,
    pub synthetic: SyntheticParams,
    /// Scene-level worker threads; all logical cores when unset.
    pub workers: Option<usize>,
    pub seed: u64,
}

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Invalid(what()))
    }
}

fn unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.psl;
        check(p.weights.iter().all(|w| *w >= 0.0), || format!("psl.weights {:?} must be >= 0", p.weights))?;
        check(unit(p.phi_keep) && unit(p.phi_recls), || {
            format!("psl thresholds ({}, {}) must lie in [0, 1]", p.phi_keep, p.phi_recls)
        })?;
        self.size_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        check(unit(self.rplg.phi_clip), || format!("rplg.phi_clip {} outside [0, 1]", self.rplg.phi_clip))?;

        let s = &self.sbc;
        check(
            0.0 <= s.phi_lo && s.phi_lo <= s.phi_init && s.phi_init <= s.phi_hi && s.phi_hi <= 1.0,
            || format!("sbc needs 0 <= phi_lo <= phi_init <= phi_hi <= 1, got {s:?}"),
        )?;
        check(s.delta_phi > 0.0 && s.d_bound >= 0.0 && s.max_iters > 0, || {
            format!("sbc step, bound and iteration cap must be positive, got {s:?}")
        })?;

        let d = &self.dbc;
        check(
            d.i_dbc > 0 && d.delta_w >= 0.0 && 0.0 < d.w_lo && d.w_lo <= 1.0 && 1.0 <= d.w_hi,
            || format!("dbc needs i_dbc > 0, delta_w >= 0 and 0 < w_lo <= 1 <= w_hi, got {d:?}"),
        )?;

        let b = &self.baol;
        check(
            b.k_pro >= 1 && b.n_pro >= 1 && unit(b.iou_lo) && unit(b.iou_hi) && b.iou_lo < b.iou_hi,
            || format!("baol needs k_pro, n_pro >= 1 and 0 <= iou_lo < iou_hi <= 1, got {b:?}"),
        )?;
        check(b.lambda.is_none_or(|l| l >= 0.0), || format!("baol.lambda must be >= 0, got {:?}", b.lambda))?;

        check(unit(self.synthetic.corruption_rate), || {
            format!("synthetic.corruption_rate {} outside [0, 1]", self.synthetic.corruption_rate)
        })?;
        check(self.workers != Some(0), || "workers must be at least 1".into())?;
        Ok(())
    }

    pub fn size_config(&self) -> SizeConstraintConfig {
        SizeConstraintConfig {
            alpha: self.constraints.alpha,
            phi_size: self.constraints.phi_size,
        }
    }

    pub fn refine_config(&self) -> RefineConfig {
        RefineConfig {
            weights: RuleWeights(self.psl.weights),
            phi_keep: self.psl.phi_keep,
            phi_recls: self.psl.phi_recls,
            constraints: ConstraintSettings {
                size: self.size_config(),
                default_scene_compatible: self.constraints.default_scene_compatible,
            },
            policy: self.psl.policy,
        }
    }

    pub fn worker_count(&self) -> usize {
        self.workers.unwrap_or_else(|| {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        })
    }
}
