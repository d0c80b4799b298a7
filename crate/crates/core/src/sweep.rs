//! Window-multiple benchmark: track each object at every window size,
//! average trials, normalize the cost and error trends, fit the curves,
//! and locate the optimum multiple.
//!
//! Cells (object x multiple x trial) are independent and run in parallel;
//! aggregation is an index-ordered reduction, so reports are deterministic.
//! Wall-clock means are kept in memory and written to a separate timing
//! sidecar: every primary report file is byte-reproducible for a fixed
//! seed, which measured seconds can never be.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{self, ExpModel, OptimumPoint, PolyModel};
use crate::imaging::Frame;
use crate::numfmt::sig6;
use crate::synth::{self, SceneSpec};
use crate::tracker::{self, TrackerConfig};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Scene(#[from] synth::SceneError),
    #[error("sweep config: {0}")]
    Config(String),
    #[error("sweep i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// One benchmark subject: either a seeded spec regenerated per trial, or
/// fixed footage that every trial re-tracks (only its timing varies).
pub enum SweepObject {
    Synthetic(SceneSpec),
    Fixed {
        name: String,
        frames: Vec<Frame>,
        truth: Option<Vec<(f64, f64)>>,
    },
}

impl SweepObject {
    pub fn name(&self) -> &str {
        match self {
            SweepObject::Synthetic(spec) => &spec.name,
            SweepObject::Fixed { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Window multiples to benchmark, typically 0.5 to 9.5 in 0.5 steps.
    pub multiples: Vec<f64>,
    /// Tracking runs averaged per cell; synthetic trials use distinct seeds.
    pub trials: usize,
    /// Also benchmark whole-frame search as a full-window reference row.
    pub include_full_frame: bool,
    /// Base tracker settings; the window multiple is overridden per cell.
    pub tracker: TrackerConfig,
    /// Range for the intersection and argmin searches over the fitted curves.
    pub fit_range: (f64, f64),
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            multiples: default_multiples(),
            trials: 5,
            include_full_frame: true,
            tracker: TrackerConfig::default(),
            fit_range: (0.0, 10.0),
        }
    }
}

/// The default benchmark grid: 0.5, 1.0, ..., 9.5.
pub fn default_multiples() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.5).collect()
}

/// Per-multiple averages for one object. Failed trials are excluded from
/// the averages; `trials_ok == 0` marks a fully failed cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub window_multiple: f64,
    pub mean_window_side: f64,
    pub success_rate: f64,
    pub mean_pixels: f64,
    pub mean_distance_error: Option<f64>,
    #[serde(skip)]
    pub mean_elapsed: f64,
    pub trials_ok: usize,
    pub trials: usize,
}

/// The whole-frame-search row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FullFramePoint {
    pub success_rate: f64,
    pub mean_pixels: f64,
    pub mean_distance_error: Option<f64>,
    #[serde(skip)]
    pub mean_elapsed: f64,
    pub trials_ok: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectSweep {
    pub name: String,
    pub points: Vec<SweepPoint>,
    pub full_frame: Option<FullFramePoint>,
    /// Min-max normalized mean pixel cost over the multiple grid.
    pub normalized_pixels: Option<Vec<f64>>,
    /// Min-max normalized mean distance error over the multiple grid.
    pub normalized_error: Option<Vec<f64>>,
    pub poly_fit: Option<PolyModel>,
    pub exp_fit: Option<ExpModel>,
}

/// Pooled curves: per-object normalized series averaged across objects,
/// then fitted. Both optimum readings are reported; the intersection is
/// the headline number, the argmin of the summed curves sits beside it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PooledFit {
    pub normalized_pixels: Option<Vec<f64>>,
    pub normalized_error: Option<Vec<f64>>,
    pub poly_fit: Option<PolyModel>,
    pub exp_fit: Option<ExpModel>,
    pub intersection: Option<OptimumPoint>,
    pub argmin: Option<OptimumPoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub multiples: Vec<f64>,
    pub trials: usize,
    pub objects: Vec<ObjectSweep>,
    pub pooled: PooledFit,
}

struct CellStats {
    window_side: f64,
    success_rate: f64,
    mean_pixels: f64,
    mean_error: Option<f64>,
    mean_elapsed: f64,
}

enum Job {
    Multiple(usize),
    FullFrame,
}

/// Run the full benchmark. Tracking failures mark their cell and never
/// abort the sweep.
pub fn sweep(objects: &[SweepObject], cfg: &SweepConfig) -> Result<SweepReport, SweepError> {
    if cfg.multiples.is_empty() {
        return Err(SweepError::Config("multiples grid is empty".into()));
    }
    if cfg.multiples.iter().any(|&m| !(m > 0.0)) {
        return Err(SweepError::Config(
            "window multiples must be positive".into(),
        ));
    }
    if cfg.trials == 0 {
        return Err(SweepError::Config("trials must be >= 1".into()));
    }

    let mut jobs: Vec<Job> = (0..cfg.multiples.len()).map(Job::Multiple).collect();
    if cfg.include_full_frame {
        jobs.push(Job::FullFrame);
    }

    let mut object_sweeps = Vec::with_capacity(objects.len());
    for object in objects {
        let mut acc: Vec<Vec<CellStats>> = (0..jobs.len()).map(|_| Vec::new()).collect();
        for trial in 0..cfg.trials {
            // one scene per (object, trial); all multiples share it
            let (frames, truth): (Vec<Frame>, Option<Vec<(f64, f64)>>) = match object {
                SweepObject::Synthetic(spec) => {
                    let mut spec = spec.clone();
                    spec.seed = spec.seed.wrapping_add(trial as u64);
                    let scene = synth::generate_scene(&spec)?;
                    (scene.frames, Some(scene.truth))
                }
                SweepObject::Fixed { frames, truth, .. } => (frames.clone(), truth.clone()),
            };

            let outcomes: Vec<Option<CellStats>> = jobs
                .par_iter()
                .map(|job| {
                    let mut tracker_cfg = cfg.tracker;
                    match job {
                        Job::Multiple(i) => {
                            tracker_cfg.window_multiple = cfg.multiples[*i];
                            tracker_cfg.full_frame = false;
                        }
                        Job::FullFrame => tracker_cfg.full_frame = true,
                    }
                    tracker::track_video(&frames, &tracker_cfg, truth.as_deref())
                        .ok()
                        .map(|result| CellStats {
                            window_side: result.window_side as f64,
                            success_rate: result.success_rate,
                            mean_pixels: if result.records.is_empty() {
                                0.0
                            } else {
                                result.total_pixels as f64 / result.records.len() as f64
                            },
                            mean_error: result.mean_distance_error,
                            mean_elapsed: result.mean_elapsed,
                        })
                })
                .collect();
            for (slot, outcome) in acc.iter_mut().zip(outcomes) {
                if let Some(stats) = outcome {
                    slot.push(stats);
                }
            }
        }

        let average = |cells: &[CellStats]| -> (f64, f64, f64, Option<f64>, f64) {
            let n = cells.len() as f64;
            let side = cells.iter().map(|c| c.window_side).sum::<f64>() / n;
            let success = cells.iter().map(|c| c.success_rate).sum::<f64>() / n;
            let pixels = cells.iter().map(|c| c.mean_pixels).sum::<f64>() / n;
            let error = if cells.iter().all(|c| c.mean_error.is_some()) {
                Some(cells.iter().map(|c| c.mean_error.unwrap()).sum::<f64>() / n)
            } else {
                None
            };
            let elapsed = cells.iter().map(|c| c.mean_elapsed).sum::<f64>() / n;
            (side, success, pixels, error, elapsed)
        };

        let mut points = Vec::with_capacity(cfg.multiples.len());
        let mut full_frame = None;
        for (job, cells) in jobs.iter().zip(&acc) {
            if cells.is_empty() {
                match job {
                    Job::Multiple(i) => points.push(SweepPoint {
                        window_multiple: cfg.multiples[*i],
                        mean_window_side: f64::NAN,
                        success_rate: 0.0,
                        mean_pixels: f64::NAN,
                        mean_distance_error: None,
                        mean_elapsed: f64::NAN,
                        trials_ok: 0,
                        trials: cfg.trials,
                    }),
                    Job::FullFrame => {
                        full_frame = Some(FullFramePoint {
                            success_rate: 0.0,
                            mean_pixels: f64::NAN,
                            mean_distance_error: None,
                            mean_elapsed: f64::NAN,
                            trials_ok: 0,
                            trials: cfg.trials,
                        })
                    }
                }
                continue;
            }
            let (side, success, pixels, error, elapsed) = average(cells);
            match job {
                Job::Multiple(i) => points.push(SweepPoint {
                    window_multiple: cfg.multiples[*i],
                    mean_window_side: side,
                    success_rate: success,
                    mean_pixels: pixels,
                    mean_distance_error: error,
                    mean_elapsed: elapsed,
                    trials_ok: cells.len(),
                    trials: cfg.trials,
                }),
                Job::FullFrame => {
                    full_frame = Some(FullFramePoint {
                        success_rate: success,
                        mean_pixels: pixels,
                        mean_distance_error: error,
                        mean_elapsed: elapsed,
                        trials_ok: cells.len(),
                        trials: cfg.trials,
                    })
                }
            }
        }

        // normalize and fit over the cells that produced data
        let valid: Vec<&SweepPoint> = points.iter().filter(|p| p.trials_ok > 0).collect();
        let xs: Vec<f64> = valid.iter().map(|p| p.window_multiple).collect();
        let pixel_series: Vec<f64> = valid.iter().map(|p| p.mean_pixels).collect();
        let error_series: Option<Vec<f64>> = valid
            .iter()
            .map(|p| p.mean_distance_error)
            .collect::<Option<Vec<f64>>>();

        let normalized_pixels = analysis::normalize(&pixel_series).ok();
        let normalized_error = error_series
            .as_deref()
            .and_then(|s| analysis::normalize(s).ok());
        let poly_fit = normalized_pixels
            .as_deref()
            .and_then(|ys| analysis::polyfit(&xs, ys, 5).ok());
        let exp_fit = normalized_error
            .as_deref()
            .and_then(|ys| analysis::expfit(&xs, ys).ok());

        object_sweeps.push(ObjectSweep {
            name: object.name().to_string(),
            points,
            full_frame,
            normalized_pixels,
            normalized_error,
            poly_fit,
            exp_fit,
        });
    }

    let pooled = pool_and_fit(&object_sweeps, cfg);
    Ok(SweepReport {
        multiples: cfg.multiples.clone(),
        trials: cfg.trials,
        objects: object_sweeps,
        pooled,
    })
}

/// Average the per-object normalized series point-wise, fit the pooled
/// curves, and locate both optimum readings.
fn pool_and_fit(objects: &[ObjectSweep], cfg: &SweepConfig) -> PooledFit {
    let n_points = cfg.multiples.len();
    let pool = |select: fn(&ObjectSweep) -> Option<&Vec<f64>>| -> Option<Vec<f64>> {
        let series: Vec<&Vec<f64>> = objects.iter().filter_map(select).collect();
        if series.is_empty() || series.iter().any(|s| s.len() != n_points) {
            return None;
        }
        Some(
            (0..n_points)
                .map(|i| series.iter().map(|s| s[i]).sum::<f64>() / series.len() as f64)
                .collect(),
        )
    };
    let normalized_pixels = pool(|o| o.normalized_pixels.as_ref());
    let normalized_error = pool(|o| o.normalized_error.as_ref());
    let poly_fit = normalized_pixels
        .as_deref()
        .and_then(|ys| analysis::polyfit(&cfg.multiples, ys, 5).ok());
    let exp_fit = normalized_error
        .as_deref()
        .and_then(|ys| analysis::expfit(&cfg.multiples, ys).ok());
    let (lo, hi) = cfg.fit_range;
    let intersection = match (&poly_fit, &exp_fit) {
        (Some(p), Some(e)) => analysis::find_intersection(p, e, lo, hi),
        _ => None,
    };
    let argmin = match (&poly_fit, &exp_fit) {
        (Some(p), Some(e)) => Some(analysis::argmin_sum(p, e, lo, hi, 1e-3)),
        _ => None,
    };
    PooledFit {
        normalized_pixels,
        normalized_error,
        poly_fit,
        exp_fit,
        intersection,
        argmin,
    }
}

impl SweepReport {
    pub fn to_json(&self) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("SweepReport serializes");
        crate::numfmt::round_json_floats(&mut value);
        value
    }

    /// Tabular CSV, one row per object x multiple plus the full-window
    /// rows. Cost is the deterministic pixel count; wall clock is not here.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "object,window_multiple,mean_window_side,success_rate,mean_pixels,mean_error_px"
        )?;
        let opt = |v: Option<f64>| v.map(sig6).unwrap_or_default();
        let num = |v: f64| {
            if v.is_finite() {
                sig6(v)
            } else {
                String::new()
            }
        };
        for object in &self.objects {
            for p in &object.points {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    csv_field(&object.name),
                    sig6(p.window_multiple),
                    num(p.mean_window_side),
                    sig6(p.success_rate),
                    num(p.mean_pixels),
                    opt(p.mean_distance_error),
                )?;
            }
            if let Some(full) = &object.full_frame {
                writeln!(
                    w,
                    "{},full,,{},{},{}",
                    csv_field(&object.name),
                    sig6(full.success_rate),
                    num(full.mean_pixels),
                    opt(full.mean_distance_error),
                )?;
            }
        }
        Ok(())
    }

    /// Wall-clock sidecar; excluded from the reproducibility contract.
    pub fn write_timing_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "object,window_multiple,mean_elapsed_s_per_frame")?;
        let num = |v: f64| {
            if v.is_finite() {
                sig6(v)
            } else {
                String::new()
            }
        };
        for object in &self.objects {
            for p in &object.points {
                writeln!(
                    w,
                    "{},{},{}",
                    csv_field(&object.name),
                    sig6(p.window_multiple),
                    num(p.mean_elapsed)
                )?;
            }
            if let Some(full) = &object.full_frame {
                writeln!(
                    w,
                    "{},full,{}",
                    csv_field(&object.name),
                    num(full.mean_elapsed)
                )?;
            }
        }
        Ok(())
    }

    /// Write `report.json`, `report.csv`, `timing.csv`, and the plot-ready
    /// two-column series under `plots/`.
    pub fn write_files(&self, out_dir: &Path) -> Result<(), SweepError> {
        fs::create_dir_all(out_dir)?;
        let json = serde_json::to_string_pretty(&self.to_json()).expect("report renders");
        fs::write(out_dir.join("report.json"), json + "\n")?;
        let mut csv = Vec::new();
        self.write_csv(&mut csv)?;
        fs::write(out_dir.join("report.csv"), csv)?;
        let mut timing = Vec::new();
        self.write_timing_csv(&mut timing)?;
        fs::write(out_dir.join("timing.csv"), timing)?;
        write_plot_files(self, &out_dir.join("plots"))?;
        Ok(())
    }
}

/// Quote a CSV field when it contains separators, per RFC 4180.
fn csv_field(raw: &str) -> String {
    if raw.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}

/// Two-column `x,y` series for each trend and fitted curve.
pub fn write_plot_files(report: &SweepReport, dir: &Path) -> Result<(), SweepError> {
    fs::create_dir_all(dir)?;
    let write_series = |name: String, header: &str, rows: Vec<(f64, f64)>| -> std::io::Result<()> {
        let mut out = String::from(header);
        out.push('\n');
        for (x, y) in rows {
            out.push_str(&format!("{},{}\n", sig6(x), sig6(y)));
        }
        fs::write(dir.join(name), out)
    };

    for object in &report.objects {
        let xs: Vec<f64> = object.points.iter().map(|p| p.window_multiple).collect();
        write_series(
            format!("success_{}.csv", object.name),
            "window_multiple,success_rate",
            xs.iter()
                .zip(object.points.iter().map(|p| p.success_rate))
                .map(|(&x, y)| (x, y))
                .collect(),
        )?;
        if object
            .points
            .iter()
            .all(|p| p.mean_distance_error.is_some())
        {
            write_series(
                format!("mean_error_{}.csv", object.name),
                "window_multiple,mean_error_px",
                object
                    .points
                    .iter()
                    .map(|p| (p.window_multiple, p.mean_distance_error.unwrap()))
                    .collect(),
            )?;
        }
        if let Some(series) = &object.normalized_pixels {
            write_series(
                format!("norm_pixels_{}.csv", object.name),
                "window_multiple,normalized_pixels",
                xs.iter().zip(series).map(|(&x, &y)| (x, y)).collect(),
            )?;
        }
        if let Some(series) = &object.normalized_error {
            write_series(
                format!("norm_error_{}.csv", object.name),
                "window_multiple,normalized_error",
                xs.iter().zip(series).map(|(&x, &y)| (x, y)).collect(),
            )?;
        }
    }
    if let Some(series) = &report.pooled.normalized_pixels {
        write_series(
            "norm_pixels_pooled.csv".into(),
            "window_multiple,normalized_pixels",
            report
                .multiples
                .iter()
                .zip(series)
                .map(|(&x, &y)| (x, y))
                .collect(),
        )?;
    }
    if let Some(series) = &report.pooled.normalized_error {
        write_series(
            "norm_error_pooled.csv".into(),
            "window_multiple,normalized_error",
            report
                .multiples
                .iter()
                .zip(series)
                .map(|(&x, &y)| (x, y))
                .collect(),
        )?;
    }
    // sampled fitted curves and their sum over the search range
    if let (Some(poly), Some(exp)) = (&report.pooled.poly_fit, &report.pooled.exp_fit) {
        let (lo, hi) = (0.0, report.multiples.iter().cloned().fold(0.0, f64::max));
        let samples = 200;
        let xs: Vec<f64> = (0..=samples)
            .map(|i| lo + (hi - lo) * i as f64 / samples as f64)
            .collect();
        write_series(
            "fit_cost_curve.csv".into(),
            "window_multiple,fitted_cost",
            xs.iter().map(|&x| (x, poly.eval(x))).collect(),
        )?;
        write_series(
            "fit_error_curve.csv".into(),
            "window_multiple,fitted_error",
            xs.iter().map(|&x| (x, exp.eval(x))).collect(),
        )?;
        write_series(
            "fit_sum_curve.csv".into(),
            "window_multiple,cost_plus_error",
            xs.iter()
                .map(|&x| (x, poly.eval(x) + exp.eval(x)))
                .collect(),
        )?;
    }
    Ok(())
}
