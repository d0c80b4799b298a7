//! Deterministic synthetic scenes: a red-dominant object moving over a
//! cluttered background, with per-frame ground-truth centers.
//!
//! Scenes replace filmed footage for benchmarking; generation is seeded and
//! bit-reproducible, and scenes round-trip through numbered PPM frames plus
//! a truth CSV so external footage can be used the same way.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::imaging::{red_difference, Frame};
use crate::numfmt::sig6;
use crate::ppm;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene spec field `{field}` invalid: {reason}")]
    InvalidSpec { field: &'static str, reason: String },
    #[error("scene i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("scene i/o: {0}")]
    Ppm(#[from] ppm::PpmError),
    #[error("truth csv line {line}: {reason}")]
    BadTruth { line: usize, reason: String },
    #[error("no frames found in {0}")]
    NoFrames(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Rect,
    Ellipse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    pub shape: Shape,
    /// Width and height in pixels.
    pub size: (usize, usize),
    /// Must be red-dominant: its red difference has to clear the detector
    /// threshold.
    pub color: [u8; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionSpec {
    pub start: (f64, f64),
    /// Pixels per frame.
    pub velocity: (f64, f64),
    /// Standard deviation of the per-frame position jitter (random walk).
    pub jitter_sigma: f64,
    /// Reflect the velocity when the object touches a frame border.
    pub bounce: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClutterSpec {
    pub n_distractors: usize,
    /// Cycled over the distractors; none may clear the detector threshold.
    pub distractor_colors: Vec<[u8; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub name: String,
    pub frame_size: (usize, usize),
    pub n_frames: usize,
    pub object: ObjectSpec,
    pub motion: MotionSpec,
    pub clutter: ClutterSpec,
    /// Per-channel Gaussian pixel noise, in [0,1] intensity units.
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Generated frames plus the object's true center for each frame.
#[derive(Debug, Clone)]
pub struct Scene {
    pub frames: Vec<Frame>,
    pub truth: Vec<(f64, f64)>,
}

const BACKGROUND: [u8; 3] = [60, 60, 60];

fn red_diff_of_color(color: [u8; 3]) -> f64 {
    let f = Frame::filled(1, 1, color).expect("1x1 frame");
    red_difference(&f).get(0, 0)
}

impl SceneSpec {
    /// Validate against the detector threshold the tracker defaults to.
    pub fn validate(&self) -> Result<(), SceneError> {
        let (w, h) = self.frame_size;
        if w == 0 || h == 0 {
            return Err(SceneError::InvalidSpec {
                field: "frame_size",
                reason: format!("must be at least 1x1, got {w}x{h}"),
            });
        }
        if self.n_frames == 0 {
            return Err(SceneError::InvalidSpec {
                field: "n_frames",
                reason: "must be >= 1".into(),
            });
        }
        let (ow, oh) = self.object.size;
        if ow == 0 || oh == 0 {
            return Err(SceneError::InvalidSpec {
                field: "object.size",
                reason: "must be at least 1x1".into(),
            });
        }
        if ow >= w || oh >= h {
            return Err(SceneError::InvalidSpec {
                field: "object.size",
                reason: format!("object {ow}x{oh} does not fit in frame {w}x{h}"),
            });
        }
        let diff = red_diff_of_color(self.object.color);
        if diff <= crate::DEFAULT_THRESHOLD {
            return Err(SceneError::InvalidSpec {
                field: "object.color",
                reason: format!(
                    "red difference {} does not clear the detection threshold {}",
                    sig6(diff),
                    crate::DEFAULT_THRESHOLD
                ),
            });
        }
        for &c in &self.clutter.distractor_colors {
            let diff = red_diff_of_color(c);
            if diff > crate::DEFAULT_THRESHOLD {
                return Err(SceneError::InvalidSpec {
                    field: "clutter.distractor_colors",
                    reason: format!(
                        "color {c:?} has red difference {} above the detection threshold",
                        sig6(diff)
                    ),
                });
            }
        }
        if self.clutter.n_distractors > 0 && self.clutter.distractor_colors.is_empty() {
            return Err(SceneError::InvalidSpec {
                field: "clutter.distractor_colors",
                reason: "at least one color required when n_distractors > 0".into(),
            });
        }
        if !(self.motion.jitter_sigma >= 0.0) {
            return Err(SceneError::InvalidSpec {
                field: "motion.jitter_sigma",
                reason: "must be >= 0".into(),
            });
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(SceneError::InvalidSpec {
                field: "noise_sigma",
                reason: "must be >= 0".into(),
            });
        }
        let (lo_x, hi_x, lo_y, hi_y) = self.center_bounds();
        let inside = |p: (f64, f64)| p.0 >= lo_x && p.0 <= hi_x && p.1 >= lo_y && p.1 <= hi_y;
        if !inside(self.motion.start) {
            return Err(SceneError::InvalidSpec {
                field: "motion.start",
                reason: format!(
                    "object at {:?} does not fit inside the frame",
                    self.motion.start
                ),
            });
        }
        if !self.motion.bounce {
            let end = (
                self.motion.start.0 + self.motion.velocity.0 * (self.n_frames - 1) as f64,
                self.motion.start.1 + self.motion.velocity.1 * (self.n_frames - 1) as f64,
            );
            if !inside(end) {
                return Err(SceneError::InvalidSpec {
                    field: "motion.velocity",
                    reason: format!(
                        "with bounce off the object leaves the frame (final center {:?})",
                        end
                    ),
                });
            }
        }
        Ok(())
    }

    /// Range the object's center may occupy with the object fully inside.
    fn center_bounds(&self) -> (f64, f64, f64, f64) {
        let half_w = self.object.size.0 as f64 / 2.0;
        let half_h = self.object.size.1 as f64 / 2.0;
        (
            half_w,
            self.frame_size.0 as f64 - half_w,
            half_h,
            self.frame_size.1 as f64 - half_h,
        )
    }
}

struct Distractor {
    shape: Shape,
    center: (f64, f64),
    size: (usize, usize),
    color: [u8; 3],
}

/// Paint a shape into the frame. Pixels whose centers fall inside the shape
/// take the color; everything stays within the frame bounds.
fn paint(
    frame: &mut Frame,
    shape: Shape,
    center: (f64, f64),
    size: (usize, usize),
    color: [u8; 3],
) {
    let (w, h) = (frame.width() as i64, frame.height() as i64);
    let half_w = size.0 as f64 / 2.0;
    let half_h = size.1 as f64 / 2.0;
    let x0 = ((center.0 - half_w).floor() as i64).max(0);
    let x1 = ((center.0 + half_w).ceil() as i64).min(w - 1);
    let y0 = ((center.1 - half_h).floor() as i64).max(0);
    let y1 = ((center.1 + half_h).ceil() as i64).min(h - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let px = x as f64;
            let py = y as f64;
            let inside = match shape {
                Shape::Rect => {
                    px >= center.0 - half_w
                        && px < center.0 + half_w
                        && py >= center.1 - half_h
                        && py < center.1 + half_h
                }
                Shape::Ellipse => {
                    let nx = (px - center.0) / half_w;
                    let ny = (py - center.1) / half_h;
                    nx * nx + ny * ny <= 1.0
                }
            };
            if inside {
                frame.set_rgb(x as usize, y as usize, color);
            }
        }
    }
}

/// Generate a scene. Deterministic for a given spec (including seed).
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene, SceneError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h) = spec.frame_size;
    let (lo_x, hi_x, lo_y, hi_y) = spec.center_bounds();

    // Static distractors, placed once up front.
    let distractors: Vec<Distractor> = (0..spec.clutter.n_distractors)
        .map(|i| {
            let size = (
                rng.gen_range(24..=64).min(w - 1),
                rng.gen_range(24..=64).min(h - 1),
            );
            let center = (
                rng.gen_range(size.0 as f64 / 2.0..=(w as f64 - size.0 as f64 / 2.0)),
                rng.gen_range(size.1 as f64 / 2.0..=(h as f64 - size.1 as f64 / 2.0)),
            );
            Distractor {
                shape: if i % 2 == 0 {
                    Shape::Rect
                } else {
                    Shape::Ellipse
                },
                center,
                size,
                color: spec.clutter.distractor_colors[i % spec.clutter.distractor_colors.len()],
            }
        })
        .collect();

    let mut backdrop = Frame::filled(w, h, BACKGROUND).expect("validated frame size");
    for d in &distractors {
        paint(&mut backdrop, d.shape, d.center, d.size, d.color);
    }

    let jitter = Normal::new(0.0, spec.motion.jitter_sigma.max(f64::MIN_POSITIVE))
        .expect("finite jitter sigma");

    // Pass 1: integrate the trajectory (sequential by nature).
    let mut pos = spec.motion.start;
    let mut vel = spec.motion.velocity;
    let mut truth = Vec::with_capacity(spec.n_frames);
    for _ in 0..spec.n_frames {
        truth.push(pos);

        // advance: constant velocity plus an optional position random walk
        pos.0 += vel.0;
        pos.1 += vel.1;
        if spec.motion.jitter_sigma > 0.0 {
            pos.0 += jitter.sample(&mut rng);
            pos.1 += jitter.sample(&mut rng);
        }
        if spec.motion.bounce {
            // reflect until the object sits fully inside again
            for _ in 0..4 {
                let mut reflected = false;
                if pos.0 < lo_x {
                    pos.0 = 2.0 * lo_x - pos.0;
                    vel.0 = -vel.0;
                    reflected = true;
                } else if pos.0 > hi_x {
                    pos.0 = 2.0 * hi_x - pos.0;
                    vel.0 = -vel.0;
                    reflected = true;
                }
                if pos.1 < lo_y {
                    pos.1 = 2.0 * lo_y - pos.1;
                    vel.1 = -vel.1;
                    reflected = true;
                } else if pos.1 > hi_y {
                    pos.1 = 2.0 * hi_y - pos.1;
                    vel.1 = -vel.1;
                    reflected = true;
                }
                if !reflected {
                    break;
                }
            }
            pos.0 = pos.0.clamp(lo_x, hi_x);
            pos.1 = pos.1.clamp(lo_y, hi_y);
        }
    }

    // Pass 2: render. Each frame draws its pixel noise from its own stream
    // seeded by (scene seed, frame index), so frames are independent and
    // the result stays bit-reproducible.
    let frames: Vec<Frame> = truth
        .par_iter()
        .enumerate()
        .map(|(k, &center)| {
            let mut frame = backdrop.clone();
            paint(
                &mut frame,
                spec.object.shape,
                center,
                spec.object.size,
                spec.object.color,
            );
            if spec.noise_sigma > 0.0 {
                let noise =
                    Normal::<f32>::new(0.0, spec.noise_sigma as f32).expect("finite noise sigma");
                let mut frame_rng = ChaCha8Rng::seed_from_u64(
                    spec.seed ^ (k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                );
                let mut data = frame.data().to_vec();
                for v in data.iter_mut() {
                    let n = noise.sample(&mut frame_rng) * 255.0;
                    *v = (*v as f32 + n).clamp(0.0, 255.0) as u8;
                }
                frame = Frame::new(w, h, data).expect("noise preserves dimensions");
            }
            frame
        })
        .collect();

    Ok(Scene { frames, truth })
}

/// The three benchmark objects on a 640x480 frame: a square covering about
/// 2.3% of the frame, a 2:1 rectangle covering about 3.8%, and an ellipse
/// covering about 0.7%.
pub fn standard_objects() -> Vec<SceneSpec> {
    let distractor_colors = vec![[120, 120, 120], [40, 60, 170], [40, 150, 70]];
    let base = |name: &str,
                shape: Shape,
                size: (usize, usize),
                start: (f64, f64),
                velocity: (f64, f64),
                seed: u64| SceneSpec {
        name: name.to_string(),
        frame_size: (640, 480),
        n_frames: 300,
        object: ObjectSpec {
            shape,
            size,
            color: [200, 30, 30],
        },
        motion: MotionSpec {
            start,
            velocity,
            jitter_sigma: 0.25,
            bounce: true,
        },
        clutter: ClutterSpec {
            n_distractors: 3,
            distractor_colors: distractor_colors.clone(),
        },
        noise_sigma: 0.02,
        seed,
    };
    vec![
        // 84*84 / (640*480) = 2.30% of the frame
        base(
            "object1",
            Shape::Rect,
            (84, 84),
            (150.0, 130.0),
            (3.1, 2.3),
            101,
        ),
        // 152*76 / (640*480) = 3.76%, width twice the height
        base(
            "object2",
            Shape::Rect,
            (152, 76),
            (320.0, 240.0),
            (-3.4, 2.6),
            202,
        ),
        // ellipse 52x52 rasterizes to ~0.69%
        base(
            "object3",
            Shape::Ellipse,
            (52, 52),
            (480.0, 160.0),
            (2.7, -3.3),
            303,
        ),
    ]
}

/// Look up a standard object spec by name.
pub fn preset(name: &str) -> Option<SceneSpec> {
    standard_objects().into_iter().find(|s| s.name == name)
}

/// Write frames as `frame_0000.ppm`... plus `truth.csv` into `dir`.
pub fn write_scene(scene: &Scene, dir: &Path) -> Result<(), SceneError> {
    fs::create_dir_all(dir)?;
    // pad so lexical order matches frame order, even past 9999 frames
    let width = scene
        .frames
        .len()
        .saturating_sub(1)
        .to_string()
        .len()
        .max(4);
    for (k, frame) in scene.frames.iter().enumerate() {
        ppm::write_frame(&dir.join(format!("frame_{k:0width$}.ppm")), frame)?;
    }
    let mut truth = fs::File::create(dir.join("truth.csv"))?;
    writeln!(truth, "frame_index,x,y")?;
    for (k, (x, y)) in scene.truth.iter().enumerate() {
        writeln!(truth, "{k},{},{}", sig6(*x), sig6(*y))?;
    }
    Ok(())
}

/// Read a scene directory: every `*.ppm` in name order, plus `truth.csv`
/// when present.
pub fn read_scene(dir: &Path) -> Result<(Vec<Frame>, Option<Vec<(f64, f64)>>), SceneError> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "ppm"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(SceneError::NoFrames(dir.display().to_string()));
    }
    let frames = paths
        .iter()
        .map(|p| ppm::read_frame(p))
        .collect::<Result<Vec<_>, _>>()?;

    let truth_path = dir.join("truth.csv");
    let truth = if truth_path.exists() {
        let text = fs::read_to_string(&truth_path)?;
        let mut points = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let parse = |tok: Option<&str>| -> Result<f64, SceneError> {
                tok.and_then(|t| t.trim().parse().ok())
                    .ok_or_else(|| SceneError::BadTruth {
                        line: i + 1,
                        reason: format!("expected `frame_index,x,y`, got {line:?}"),
                    })
            };
            let _index = parse(cols.next())?;
            let x = parse(cols.next())?;
            let y = parse(cols.next())?;
            points.push((x, y));
        }
        Some(points)
    } else {
        None
    };
    Ok((frames, truth))
}
