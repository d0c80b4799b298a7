//! Crop-window tracking: full-frame initialization, then per frame
//! predict -> crop -> detect -> correct, carrying the prediction on a miss.
//!
//! The search window is a fixed square whose side is a configured multiple
//! of the object's largest dimension at initialization, and detection runs
//! only inside that window, centered on the Kalman prediction.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{self, BoundingBox, Frame};
use crate::kalman::{self, KalmanModel, KalmanState, Vec4};
use crate::numfmt::sig6;

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("initialization failed: no detection in the first {frames_tried} frame(s)")]
    InitializationFailed { frames_tried: usize },
    #[error("tracker config: {field} must be {requirement}, got {value}")]
    InvalidConfig {
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error(transparent)]
    Kalman(#[from] kalman::KalmanError),
}

/// Kalman noise parameters; the defaults assume an uncertain initial velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanConfig {
    /// Process noise intensity (px^2 per frame^2).
    pub q: f64,
    /// Measurement noise variance (px^2).
    pub r: f64,
    /// Initial covariance diagonal for (x, y, dx, dy).
    pub p0_diag: Vec4,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        Self {
            q: 0.01,
            r: 1.0,
            p0_diag: [1.0, 1.0, 100.0, 100.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// Search window side as a multiple of the object's largest dimension.
    pub window_multiple: f64,
    /// Red-difference threshold for the detector.
    pub detect_threshold: f64,
    /// Median filter radius.
    pub median_radius: usize,
    pub kalman: KalmanConfig,
    /// Frames to try full-frame detection before giving up.
    pub max_init_frames: usize,
    /// Search the whole frame every step, ignoring `window_multiple`.
    pub full_frame: bool,
    /// Optional innovation gate: detections farther than this from the
    /// prediction are treated as misses. Off by default.
    pub gate_distance: Option<f64>,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            window_multiple: 2.0,
            detect_threshold: crate::DEFAULT_THRESHOLD,
            median_radius: crate::DEFAULT_MEDIAN_RADIUS,
            kalman: KalmanConfig::default(),
            max_init_frames: 25,
            full_frame: false,
            gate_distance: None,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackError> {
        if !(self.window_multiple > 0.0) {
            return Err(TrackError::InvalidConfig {
                field: "window_multiple",
                requirement: "> 0",
                value: self.window_multiple,
            });
        }
        if !(0.0..=1.0).contains(&self.detect_threshold) {
            return Err(TrackError::InvalidConfig {
                field: "detect_threshold",
                requirement: "in [0,1]",
                value: self.detect_threshold,
            });
        }
        if self.median_radius < 1 {
            return Err(TrackError::InvalidConfig {
                field: "median_radius",
                requirement: ">= 1",
                value: self.median_radius as f64,
            });
        }
        if self.max_init_frames < 1 {
            return Err(TrackError::InvalidConfig {
                field: "max_init_frames",
                requirement: ">= 1",
                value: self.max_init_frames as f64,
            });
        }
        Ok(())
    }
}

/// Per-frame tracking outcome. `pixels_processed` is the search-window area,
/// the deterministic cost proxy; `elapsed` is the measured wall clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub frame_index: usize,
    pub predicted_center: (f64, f64),
    pub crop_window: BoundingBox,
    /// Detected centroid in full-frame coordinates, absent on a miss.
    pub detected_center: Option<(f64, f64)>,
    pub corrected_center: (f64, f64),
    pub pixels_processed: usize,
    pub elapsed: f64,
}

/// Aggregate result of tracking one frame sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackResult {
    pub records: Vec<TrackRecord>,
    pub window_side: usize,
    pub start_index: usize,
    /// Detected frames / tracked frames (1.0 when no frame was tracked).
    pub success_rate: f64,
    pub mean_elapsed: f64,
    pub total_pixels: usize,
    /// Per-frame Euclidean error of the corrected center, when ground truth
    /// was supplied.
    pub distance_errors: Option<Vec<f64>>,
    pub mean_distance_error: Option<f64>,
}

/// Outcome of the full-frame initialization search.
#[derive(Debug, Clone, Copy)]
pub struct Initialization {
    pub state: KalmanState,
    pub window_side: usize,
    pub start_index: usize,
}

/// Search each frame in turn with the full-frame detector until the object
/// is found, then size the search window off its largest dimension.
pub fn initialize(frames: &[Frame], cfg: &TrackerConfig) -> Result<Initialization, TrackError> {
    cfg.validate()?;
    let limit = cfg.max_init_frames.min(frames.len());
    for (index, frame) in frames.iter().take(limit).enumerate() {
        if let Some(det) = imaging::detect_object(frame, cfg.detect_threshold, cfg.median_radius) {
            let largest_dim = det.bbox.w.max(det.bbox.h);
            let window_side = if cfg.full_frame {
                frame.width().max(frame.height())
            } else {
                ((cfg.window_multiple * largest_dim as f64).round() as usize).max(1)
            };
            return Ok(Initialization {
                state: KalmanState::at_position(det.centroid, cfg.kalman.p0_diag),
                window_side,
                start_index: index,
            });
        }
    }
    Err(TrackError::InitializationFailed {
        frames_tried: limit,
    })
}

/// A square sub-frame and the offset mapping it back to frame coordinates.
pub struct Crop {
    pub sub: Frame,
    pub offset: (usize, usize),
}

/// Cut the `side`-square window centered on `center` (rounded half away
/// from zero), shifted as needed to lie fully inside the frame. A side
/// larger than a frame dimension spans that whole dimension.
pub fn crop(frame: &Frame, center: (f64, f64), side: usize) -> Crop {
    debug_assert!(side >= 1);
    let eff_w = side.min(frame.width());
    let eff_h = side.min(frame.height());
    let cx = center.0.round() as i64;
    let cy = center.1.round() as i64;
    let left = (cx - (side / 2) as i64).clamp(0, (frame.width() - eff_w) as i64) as usize;
    let top = (cy - (side / 2) as i64).clamp(0, (frame.height() - eff_h) as i64) as usize;

    let mut data = Vec::with_capacity(eff_w * eff_h * 3);
    for y in top..top + eff_h {
        let row = (y * frame.width() + left) * 3;
        data.extend_from_slice(&frame.data()[row..row + eff_w * 3]);
    }
    Crop {
        sub: Frame::new(eff_w, eff_h, data).expect("crop dimensions are valid"),
        offset: (left, top),
    }
}

/// One tracking iteration: predict, crop at the prediction, detect inside
/// the crop, and correct. On a miss the predicted state is carried forward
/// unchanged and the prediction stands in for the corrected center.
pub fn track_step(
    state: &KalmanState,
    model: &KalmanModel,
    frame: &Frame,
    frame_index: usize,
    window_side: usize,
    cfg: &TrackerConfig,
) -> (KalmanState, TrackRecord) {
    let started = Instant::now();
    let predicted = kalman::predict(state, model);
    let predicted_center = predicted.position();

    let cropped = crop(frame, predicted_center, window_side);
    let crop_window = BoundingBox {
        x: cropped.offset.0,
        y: cropped.offset.1,
        w: cropped.sub.width(),
        h: cropped.sub.height(),
    };
    let pixels_processed = crop_window.w * crop_window.h;

    let mut detected_center =
        imaging::detect_object(&cropped.sub, cfg.detect_threshold, cfg.median_radius).map(|det| {
            (
                det.centroid.0 + cropped.offset.0 as f64,
                det.centroid.1 + cropped.offset.1 as f64,
            )
        });
    if let (Some(center), Some(gate)) = (detected_center, cfg.gate_distance) {
        let dx = center.0 - predicted_center.0;
        let dy = center.1 - predicted_center.1;
        if (dx * dx + dy * dy).sqrt() > gate {
            detected_center = None;
        }
    }

    let (next, corrected_center) = match detected_center {
        Some(center) => {
            // R is positive definite by config validation, so the innovation
            // covariance cannot be singular here.
            let corrected = kalman::correct(&predicted, model, [center.0, center.1])
                .expect("innovation covariance is invertible for r > 0");
            let pos = corrected.state.position();
            (corrected.state, pos)
        }
        None => (predicted, predicted_center),
    };

    let record = TrackRecord {
        frame_index,
        predicted_center,
        crop_window,
        detected_center,
        corrected_center,
        pixels_processed,
        elapsed: started.elapsed().as_secs_f64(),
    };
    (next, record)
}

/// Track a whole frame sequence. Frames before the first detection are
/// consumed by initialization; every later frame produces one record.
pub fn track_video(
    frames: &[Frame],
    cfg: &TrackerConfig,
    ground_truth: Option<&[(f64, f64)]>,
) -> Result<TrackResult, TrackError> {
    let init = initialize(frames, cfg)?;
    let model = kalman::constant_velocity_model(cfg.kalman.q, cfg.kalman.r)?;
    let mut state = init.state;
    let mut records = Vec::with_capacity(frames.len().saturating_sub(init.start_index + 1));
    for (frame_index, frame) in frames.iter().enumerate().skip(init.start_index + 1) {
        let (next, record) = track_step(&state, &model, frame, frame_index, init.window_side, cfg);
        state = next;
        records.push(record);
    }

    let tracked = records.len();
    let detected = records
        .iter()
        .filter(|r| r.detected_center.is_some())
        .count();
    let success_rate = if tracked == 0 {
        1.0
    } else {
        detected as f64 / tracked as f64
    };
    let total_pixels = records.iter().map(|r| r.pixels_processed).sum();
    let mean_elapsed = if tracked == 0 {
        0.0
    } else {
        records.iter().map(|r| r.elapsed).sum::<f64>() / tracked as f64
    };
    let distance_errors = ground_truth.map(|truth| {
        records
            .iter()
            .map(|r| {
                let t = truth[r.frame_index];
                crate::analysis::euclidean_distance(r.corrected_center, t)
            })
            .collect::<Vec<_>>()
    });
    let mean_distance_error = distance_errors.as_ref().map(|errs| {
        if errs.is_empty() {
            0.0
        } else {
            errs.iter().sum::<f64>() / errs.len() as f64
        }
    });

    Ok(TrackResult {
        records,
        window_side: init.window_side,
        start_index: init.start_index,
        success_rate,
        mean_elapsed,
        total_pixels,
        distance_errors,
        mean_distance_error,
    })
}

impl TrackResult {
    /// One row per tracked frame. Missing detections leave their fields empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "frame_index,pred_x,pred_y,det_x,det_y,corr_x,corr_y,pixels,elapsed_s"
        )?;
        for r in &self.records {
            let (det_x, det_y) = match r.detected_center {
                Some((x, y)) => (sig6(x), sig6(y)),
                None => (String::new(), String::new()),
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.frame_index,
                sig6(r.predicted_center.0),
                sig6(r.predicted_center.1),
                det_x,
                det_y,
                sig6(r.corrected_center.0),
                sig6(r.corrected_center.1),
                r.pixels_processed,
                sig6(r.elapsed),
            )?;
        }
        Ok(())
    }

    /// Full result as JSON, floats rounded to six significant digits.
    pub fn to_json(&self) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("TrackResult serializes");
        crate::numfmt::round_json_floats(&mut value);
        value
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Frame;

    const RED: [u8; 3] = [220, 20, 20];
    const BG: [u8; 3] = [70, 70, 70];

    fn frame_with_rect(w: usize, h: usize, rect: Option<(i64, i64, usize, usize)>) -> Frame {
        let mut f = Frame::filled(w, h, BG).unwrap();
        if let Some((rx, ry, rw, rh)) = rect {
            for y in ry.max(0)..(ry + rh as i64).min(h as i64) {
                for x in rx.max(0)..(rx + rw as i64).min(w as i64) {
                    f.set_rgb(x as usize, y as usize, RED);
                }
            }
        }
        f
    }

    /// Frames of a rect moving at constant velocity; returns truth centers.
    fn moving_rect_scene(
        n: usize,
        start: (f64, f64),
        vel: (f64, f64),
        size: (usize, usize),
    ) -> (Vec<Frame>, Vec<(f64, f64)>) {
        let mut frames = Vec::new();
        let mut truth = Vec::new();
        for k in 0..n {
            let cx = start.0 + vel.0 * k as f64;
            let cy = start.1 + vel.1 * k as f64;
            let rx = (cx - (size.0 as f64 - 1.0) / 2.0).round() as i64;
            let ry = (cy - (size.1 as f64 - 1.0) / 2.0).round() as i64;
            frames.push(frame_with_rect(200, 150, Some((rx, ry, size.0, size.1))));
            truth.push((cx, cy));
        }
        (frames, truth)
    }

    #[test]
    fn crop_interior() {
        let f = Frame::filled(100, 100, BG).unwrap();
        let c = crop(&f, (50.0, 50.0), 20);
        assert_eq!(c.offset, (40, 40));
        assert_eq!((c.sub.width(), c.sub.height()), (20, 20));
    }

    #[test]
    fn crop_clamps_at_edge() {
        let f = Frame::filled(100, 100, BG).unwrap();
        let c = crop(&f, (5.0, 50.0), 20);
        assert_eq!(c.offset, (0, 40));
        assert_eq!(c.sub.width(), 20);
    }

    #[test]
    fn crop_oversize_spans_frame() {
        let f = Frame::filled(100, 100, BG).unwrap();
        let c = crop(&f, (77.0, 3.0), 400);
        assert_eq!(c.offset, (0, 0));
        assert_eq!((c.sub.width(), c.sub.height()), (100, 100));
    }

    #[test]
    fn crop_copies_the_right_pixels() {
        let (frames, _) = moving_rect_scene(1, (60.0, 40.0), (0.0, 0.0), (11, 11));
        let c = crop(&frames[0], (60.0, 40.0), 21);
        assert_eq!(c.offset, (50, 30));
        for y in 0..21 {
            for x in 0..21 {
                assert_eq!(c.sub.rgb(x, y), frames[0].rgb(50 + x, 30 + y));
            }
        }
    }

    #[test]
    fn initialize_sizes_window_from_largest_dimension() {
        let f = frame_with_rect(200, 150, Some((30, 40, 40, 20)));
        let cfg = TrackerConfig {
            window_multiple: 2.0,
            ..Default::default()
        };
        let init = initialize(&[f], &cfg).unwrap();
        assert_eq!(init.window_side, 80);
        assert_eq!(init.start_index, 0);
        assert_eq!(init.state.x[2], 0.0);
        assert_eq!(init.state.x[3], 0.0);
    }

    #[test]
    fn initialize_multiple_one_equals_largest_dimension() {
        let f = frame_with_rect(200, 150, Some((30, 40, 30, 30)));
        let cfg = TrackerConfig {
            window_multiple: 1.0,
            ..Default::default()
        };
        assert_eq!(initialize(&[f], &cfg).unwrap().window_side, 30);
    }

    #[test]
    fn initialize_skips_blank_frames() {
        let blank = frame_with_rect(200, 150, None);
        let frames = vec![
            blank.clone(),
            blank.clone(),
            blank,
            frame_with_rect(200, 150, Some((60, 60, 20, 20))),
        ];
        let init = initialize(&frames, &TrackerConfig::default()).unwrap();
        assert_eq!(init.start_index, 3);
    }

    #[test]
    fn initialize_fails_after_max_frames() {
        let frames: Vec<Frame> = (0..5).map(|_| frame_with_rect(64, 64, None)).collect();
        let cfg = TrackerConfig {
            max_init_frames: 3,
            ..Default::default()
        };
        let err = initialize(&frames, &cfg).unwrap_err();
        assert!(err.to_string().contains('3'), "{err}");
    }

    #[test]
    fn config_rejects_nonpositive_multiple() {
        let cfg = TrackerConfig {
            window_multiple: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn step_detects_object_at_prediction() {
        let model = kalman::constant_velocity_model(0.01, 1.0).unwrap();
        let cfg = TrackerConfig::default();
        let f = frame_with_rect(200, 150, Some((55, 45, 11, 11)));
        // object center (60, 50); state already there with zero velocity
        let state = KalmanState::at_position((60.0, 50.0), cfg.kalman.p0_diag);
        let (next, record) = track_step(&state, &model, &f, 1, 40, &cfg);
        let det = record.detected_center.expect("object inside window");
        assert!((det.0 - 60.0).abs() < 0.5 && (det.1 - 50.0).abs() < 0.5);
        assert!((next.x[0] - 60.0).abs() < 1.0);
        assert!(record.crop_window.contains(det.0, det.1));
        assert_eq!(record.pixels_processed, 40 * 40);
    }

    #[test]
    fn step_carries_prediction_on_miss() {
        let model = kalman::constant_velocity_model(0.01, 1.0).unwrap();
        let cfg = TrackerConfig::default();
        // object far outside the 20px window around the prediction
        let f = frame_with_rect(200, 150, Some((150, 100, 11, 11)));
        let state = KalmanState {
            x: [30.0, 30.0, 2.0, 1.0],
            p: KalmanState::at_position((0.0, 0.0), cfg.kalman.p0_diag).p,
        };
        let predicted = kalman::predict(&state, &model);
        let (next, record) = track_step(&state, &model, &f, 1, 20, &cfg);
        assert!(record.detected_center.is_none());
        assert_eq!(next.x, predicted.x);
        assert_eq!(record.corrected_center, (32.0, 31.0));
    }

    #[test]
    fn step_half_covered_object_biases_centroid_inward() {
        let model = kalman::constant_velocity_model(0.01, 1.0).unwrap();
        let cfg = TrackerConfig::default();
        // object spans x 100..119; window covers only its left half
        let f = frame_with_rect(200, 150, Some((100, 50, 20, 20)));
        let state = KalmanState::at_position((100.0, 60.0), cfg.kalman.p0_diag);
        let (_, record) = track_step(&state, &model, &f, 1, 21, &cfg);
        let det = record.detected_center.expect("partial object detected");
        // true center x = 109.5; the visible half centers near 105
        assert!(det.0 < 107.0, "centroid {det:?} should lean left");
    }

    #[test]
    fn innovation_gate_rejects_distant_detection() {
        let model = kalman::constant_velocity_model(0.01, 1.0).unwrap();
        let cfg = TrackerConfig {
            gate_distance: Some(5.0),
            ..Default::default()
        };
        // object inside the window but 30px from the prediction
        let f = frame_with_rect(200, 150, Some((90, 60, 9, 9)));
        let state = KalmanState::at_position((64.0, 64.0), cfg.kalman.p0_diag);
        let (_, record) = track_step(&state, &model, &f, 1, 120, &cfg);
        assert!(record.detected_center.is_none());
    }

    #[test]
    fn video_clean_scene_full_success() {
        let (frames, truth) = moving_rect_scene(40, (40.0, 40.0), (2.0, 1.5), (15, 15));
        let cfg = TrackerConfig {
            window_multiple: 2.0,
            ..Default::default()
        };
        let result = track_video(&frames, &cfg, Some(&truth)).unwrap();
        assert_eq!(result.success_rate, 1.0);
        assert_eq!(result.records.len(), 39);
        assert!(result.mean_distance_error.unwrap() < 3.0);
    }

    #[test]
    fn video_full_frame_mode_finds_object_everywhere() {
        let (frames, _) = moving_rect_scene(20, (40.0, 40.0), (4.0, 3.0), (15, 15));
        let cfg = TrackerConfig {
            full_frame: true,
            ..Default::default()
        };
        let result = track_video(&frames, &cfg, None).unwrap();
        assert_eq!(result.success_rate, 1.0);
        assert_eq!(result.window_side, 200);
        // window spans the whole frame
        assert!(result
            .records
            .iter()
            .all(|r| r.pixels_processed == 200 * 150));
    }

    #[test]
    fn video_small_window_on_fast_object_misses() {
        // 30 px/frame with a 7px window: the object escapes immediately
        let (frames, _) = moving_rect_scene(10, (30.0, 75.0), (15.0, 0.0), (14, 14));
        let cfg = TrackerConfig {
            window_multiple: 0.25,
            ..Default::default()
        };
        let result = track_video(&frames, &cfg, None).unwrap();
        assert!(result.success_rate < 1.0);
    }

    #[test]
    fn video_reacquires_after_occlusion() {
        // object vanishes for 4 frames, reappearing on its extrapolated path
        let size = (13usize, 13usize);
        let (mut frames, _) = moving_rect_scene(40, (30.0, 30.0), (2.5, 2.0), size);
        for k in 15..19 {
            frames[k] = frame_with_rect(200, 150, None);
        }
        let cfg = TrackerConfig {
            window_multiple: 3.0,
            ..Default::default()
        };
        let result = track_video(&frames, &cfg, None).unwrap();
        let by_index: std::collections::HashMap<usize, &TrackRecord> =
            result.records.iter().map(|r| (r.frame_index, r)).collect();
        for k in 15..19 {
            assert!(by_index[&k].detected_center.is_none());
        }
        let reacquired = (19..=21).any(|k| by_index[&k].detected_center.is_some());
        assert!(reacquired, "tracker should reacquire within 2 frames");
        // no non-finite corrected centers despite the miss streak
        assert!(result
            .records
            .iter()
            .all(|r| r.corrected_center.0.is_finite() && r.corrected_center.1.is_finite()));
    }

    #[test]
    fn records_satisfy_window_invariants() {
        let (frames, _) = moving_rect_scene(30, (50.0, 50.0), (3.0, -1.0), (15, 15));
        let cfg = TrackerConfig {
            window_multiple: 1.5,
            ..Default::default()
        };
        let result = track_video(&frames, &cfg, None).unwrap();
        let area = 200 * 150;
        for r in &result.records {
            assert_eq!(r.pixels_processed, r.crop_window.w * r.crop_window.h);
            assert!(r.pixels_processed <= area);
            assert!(r.crop_window.x + r.crop_window.w <= 200);
            assert!(r.crop_window.y + r.crop_window.h <= 150);
            if let Some(det) = r.detected_center {
                assert!(r.crop_window.contains(det.0, det.1));
            }
        }
    }

    #[test]
    fn csv_has_expected_header_and_blank_miss_fields() {
        let (frames, _) = moving_rect_scene(5, (50.0, 50.0), (2.0, 0.0), (11, 11));
        let cfg = TrackerConfig::default();
        let mut result = track_video(&frames, &cfg, None).unwrap();
        result.records[0].detected_center = None;
        let mut buf = Vec::new();
        result.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "frame_index,pred_x,pred_y,det_x,det_y,corr_x,corr_y,pixels,elapsed_s"
        );
        let first = lines.next().unwrap();
        let fields: Vec<&str> = first.split(',').collect();
        assert_eq!(fields.len(), 9);
        assert_eq!(fields[3], "");
        assert_eq!(fields[4], "");
    }

    #[test]
    fn json_round_trips_records() {
        let (frames, truth) = moving_rect_scene(6, (50.0, 50.0), (2.0, 1.0), (11, 11));
        let result = track_video(&frames, &TrackerConfig::default(), Some(&truth)).unwrap();
        let value = result.to_json();
        assert_eq!(
            value["records"].as_array().unwrap().len(),
            result.records.len()
        );
        assert!(value["success_rate"].as_f64().unwrap() >= 0.0);
    }
}
