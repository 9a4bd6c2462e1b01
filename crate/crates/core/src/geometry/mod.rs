//! Oriented 3D boxes, rotated-box IoU and Soft-NMS.

mod bbox;
mod nms;
pub mod polygon;

pub use bbox::{iou3d, normalize_angle, Box7DoF};
pub use nms::{soft_nms, ScoredBox, DEFAULT_SCORE_FLOOR, DEFAULT_SIGMA};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("box extents must be positive, got l={l}, w={w}, h={h}")]
    NonPositiveExtent { l: f64, w: f64, h: f64 },
    #[error("box parameters must be finite")]
    NonFinite,
}
