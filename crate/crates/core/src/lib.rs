//! Core library for crop-window color tracking.
//!
//! The pipeline detects a red-dominant object by color segmentation, predicts
//! its motion with a constant-velocity Kalman filter, and confines each
//! frame's detection to a square search window centered on the prediction.
//! The `sweep` module benchmarks the window-size trade-off between pixel cost
//! and center accuracy, and `analysis` fits the resulting curves to locate
//! the optimum window multiple.

pub mod analysis;
pub mod imaging;
pub mod kalman;
pub mod numfmt;
pub mod ppm;
pub mod sweep;
pub mod synth;
pub mod tracker;

pub use imaging::{BinaryImage, Blob, BoundingBox, Detection, Frame, GrayImage};
pub use kalman::{KalmanModel, KalmanState};
pub use synth::{Scene, SceneSpec};
pub use tracker::{TrackRecord, TrackResult, TrackerConfig};

/// Default red-difference threshold for the color segmentation step.
pub const DEFAULT_THRESHOLD: f64 = 0.25;

/// Default median filter radius (3x3 kernel).
pub const DEFAULT_MEDIAN_RADIUS: usize = 1;
