//! Subcommand implementations.

use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use croptrack_core::analysis::{
    argmin_sum, expfit, find_intersection, polyfit, ExpModel, PolyModel,
};
use croptrack_core::numfmt::{round_json_floats, sig6};
use croptrack_core::sweep::{self, SweepConfig, SweepObject, SweepReport};
use croptrack_core::synth::{self, ClutterSpec, MotionSpec, ObjectSpec, SceneSpec, Shape};
use croptrack_core::tracker::{self, TrackerConfig};

use crate::config::KeyValues;
use crate::{FitArgs, OptimumArgs, ReportArgs, SweepArgs, SynthArgs, TrackArgs, TrackerFlags};

/// Marker for argument-level mistakes; `main` maps it to exit code 1.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

const SCENE_KEYS: &[&str] = &[
    "name",
    "width",
    "height",
    "frames",
    "shape",
    "object_w",
    "object_h",
    "color_r",
    "color_g",
    "color_b",
    "start_x",
    "start_y",
    "vel_x",
    "vel_y",
    "jitter_sigma",
    "bounce",
    "n_distractors",
    "noise_sigma",
    "seed",
];

/// Build a scene spec from a key=value file, starting from sane defaults.
fn scene_spec_from_file(path: &Path) -> Result<SceneSpec> {
    let kv = KeyValues::load(path)?;
    kv.check_keys(SCENE_KEYS)?;
    let mut spec = SceneSpec {
        name: path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scene".into()),
        frame_size: (640, 480),
        n_frames: 300,
        object: ObjectSpec {
            shape: Shape::Rect,
            size: (84, 84),
            color: [200, 30, 30],
        },
        motion: MotionSpec {
            start: (320.0, 240.0),
            velocity: (3.0, 2.0),
            jitter_sigma: 0.25,
            bounce: true,
        },
        clutter: ClutterSpec {
            n_distractors: 3,
            distractor_colors: vec![[120, 120, 120], [40, 60, 170], [40, 150, 70]],
        },
        noise_sigma: 0.02,
        seed: 1,
    };
    if let Some(name) = kv.get("name") {
        spec.name = name.to_string();
    }
    if let Some(v) = kv.get_usize("width")? {
        spec.frame_size.0 = v;
    }
    if let Some(v) = kv.get_usize("height")? {
        spec.frame_size.1 = v;
    }
    if let Some(v) = kv.get_usize("frames")? {
        spec.n_frames = v;
    }
    match kv.get("shape") {
        None => {}
        Some("rect") => spec.object.shape = Shape::Rect,
        Some("ellipse") => spec.object.shape = Shape::Ellipse,
        Some(other) => bail!("config key `shape`: expected rect or ellipse, got {other:?}"),
    }
    if let Some(v) = kv.get_usize("object_w")? {
        spec.object.size.0 = v;
    }
    if let Some(v) = kv.get_usize("object_h")? {
        spec.object.size.1 = v;
    }
    for (i, key) in ["color_r", "color_g", "color_b"].iter().enumerate() {
        if let Some(v) = kv.get_usize(key)? {
            spec.object.color[i] =
                u8::try_from(v).map_err(|_| anyhow!("config key `{key}`: must be 0..=255"))?;
        }
    }
    if let Some(v) = kv.get_f64("start_x")? {
        spec.motion.start.0 = v;
    }
    if let Some(v) = kv.get_f64("start_y")? {
        spec.motion.start.1 = v;
    }
    if let Some(v) = kv.get_f64("vel_x")? {
        spec.motion.velocity.0 = v;
    }
    if let Some(v) = kv.get_f64("vel_y")? {
        spec.motion.velocity.1 = v;
    }
    if let Some(v) = kv.get_f64("jitter_sigma")? {
        spec.motion.jitter_sigma = v;
    }
    if let Some(v) = kv.get_bool("bounce")? {
        spec.motion.bounce = v;
    }
    if let Some(v) = kv.get_usize("n_distractors")? {
        spec.clutter.n_distractors = v;
    }
    if let Some(v) = kv.get_f64("noise_sigma")? {
        spec.noise_sigma = v;
    }
    if let Some(v) = kv.get_u64("seed")? {
        spec.seed = v;
    }
    Ok(spec)
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let mut spec = match (&args.preset, &args.spec) {
        (Some(name), None) => synth::preset(name).expect("validated preset"),
        (None, Some(path)) => scene_spec_from_file(path)?,
        (None, None) => return Err(usage("synth needs --preset or --spec")),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(frames) = args.frames {
        spec.n_frames = frames;
    }
    let scene = synth::generate_scene(&spec).context("generating scene")?;
    synth::write_scene(&scene, &args.out).context("writing scene")?;
    println!(
        "wrote {} frames + truth.csv to {}",
        scene.frames.len(),
        args.out.display()
    );
    Ok(())
}

const TRACKER_KEYS: &[&str] = &[
    "threshold",
    "median_radius",
    "window_multiple",
    "q",
    "r",
    "p0_pos",
    "p0_vel",
    "gate_distance",
    "max_init_frames",
    "trials",
    "seed",
];

/// Resolve tracker settings: defaults, then the config file, then flags.
fn resolve_tracker(flags: &TrackerFlags) -> Result<(TrackerConfig, KeyValues)> {
    let kv = match &flags.config {
        Some(path) => {
            let kv = KeyValues::load(path)?;
            kv.check_keys(TRACKER_KEYS)?;
            kv
        }
        None => KeyValues::default(),
    };
    let mut cfg = TrackerConfig::default();
    cfg.detect_threshold = flags
        .threshold
        .or(kv.get_f64("threshold")?)
        .unwrap_or(cfg.detect_threshold);
    cfg.median_radius = flags
        .median_radius
        .or(kv.get_usize("median_radius")?)
        .unwrap_or(cfg.median_radius);
    cfg.kalman.q = flags.q.or(kv.get_f64("q")?).unwrap_or(cfg.kalman.q);
    cfg.kalman.r = flags.r.or(kv.get_f64("r")?).unwrap_or(cfg.kalman.r);
    if let Some(p) = kv.get_f64("p0_pos")? {
        cfg.kalman.p0_diag[0] = p;
        cfg.kalman.p0_diag[1] = p;
    }
    if let Some(p) = kv.get_f64("p0_vel")? {
        cfg.kalman.p0_diag[2] = p;
        cfg.kalman.p0_diag[3] = p;
    }
    cfg.gate_distance = flags.gate.or(kv.get_f64("gate_distance")?);
    cfg.max_init_frames = flags
        .max_init_frames
        .or(kv.get_usize("max_init_frames")?)
        .unwrap_or(cfg.max_init_frames);
    Ok((cfg, kv))
}

pub fn track(args: TrackArgs) -> Result<()> {
    let (mut cfg, kv) = resolve_tracker(&args.tracker)?;
    cfg.full_frame = args.full_frame;
    match args.window_multiple.or(kv.get_f64("window_multiple")?) {
        Some(m) if m > 0.0 => cfg.window_multiple = m,
        Some(m) => return Err(usage(format!("window multiple must be positive, got {m}"))),
        None if args.full_frame => {}
        None => return Err(usage("track needs --window-multiple or --full-frame")),
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;

    let (frames, truth) = synth::read_scene(&args.scene)
        .with_context(|| format!("reading {}", args.scene.display()))?;
    check_truth_len(&args.scene, frames.len(), truth.as_deref())?;
    let result = tracker::track_video(&frames, &cfg, truth.as_deref())?;

    fs::create_dir_all(&args.out)?;
    let json = serde_json::to_string_pretty(&result.to_json()).expect("result renders");
    fs::write(args.out.join("result.json"), json + "\n")?;
    let mut csv = Vec::new();
    result.write_csv(&mut csv)?;
    fs::write(args.out.join("result.csv"), csv)?;

    let mean_pixels = if result.records.is_empty() {
        0.0
    } else {
        result.total_pixels as f64 / result.records.len() as f64
    };
    let error_part = result
        .mean_distance_error
        .map(|e| format!(" mean_error_px={}", sig6(e)))
        .unwrap_or_default();
    println!(
        "frames={} window_side={} success_rate={}{} mean_pixels={}",
        result.records.len(),
        result.window_side,
        sig6(result.success_rate),
        error_part,
        sig6(mean_pixels),
    );
    Ok(())
}

fn check_truth_len(dir: &Path, frames: usize, truth: Option<&[(f64, f64)]>) -> Result<()> {
    if let Some(t) = truth {
        if t.len() != frames {
            bail!(
                "{}: truth.csv has {} rows but {} frames were found",
                dir.display(),
                t.len(),
                frames
            );
        }
    }
    Ok(())
}

/// Comma list (`0.5,1,2`) or inclusive range (`0.5:9.5:0.5`).
fn parse_multiples(text: &str) -> Result<Vec<f64>> {
    let parse_one = |tok: &str| -> Result<f64> {
        tok.trim()
            .parse::<f64>()
            .map_err(|_| usage(format!("bad window multiple `{tok}`")))
    };
    let values: Vec<f64> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(usage(format!("bad range `{text}`, expected lo:hi:step")));
        }
        let (lo, hi, step) = (
            parse_one(parts[0])?,
            parse_one(parts[1])?,
            parse_one(parts[2])?,
        );
        if step <= 0.0 || hi < lo {
            return Err(usage(format!("bad range `{text}`")));
        }
        let mut out = Vec::new();
        let mut k = 0;
        loop {
            let v = lo + step * k as f64;
            if v > hi + 1e-9 {
                break;
            }
            out.push(v);
            k += 1;
        }
        out
    } else {
        text.split(',').map(parse_one).collect::<Result<_>>()?
    };
    if values.is_empty() || values.iter().any(|&v| !(v > 0.0)) {
        return Err(usage("window multiples must be positive"));
    }
    Ok(values)
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let (tracker_cfg, kv) = resolve_tracker(&args.tracker)?;
    let multiples = match &args.multiples {
        Some(text) => parse_multiples(text)?,
        None => sweep::default_multiples(),
    };
    let trials = args.trials.or(kv.get_usize("trials")?).unwrap_or(5);
    let seed_offset = args.seed.or(kv.get_u64("seed")?).unwrap_or(0);

    let mut objects = Vec::new();
    let preset_names: Vec<String> = if args.preset.is_empty() && args.scene.is_empty() {
        synth::standard_objects()
            .into_iter()
            .map(|s| s.name)
            .collect()
    } else {
        args.preset.clone()
    };
    for name in &preset_names {
        let mut spec = synth::preset(name).expect("validated preset");
        spec.seed = spec.seed.wrapping_add(seed_offset);
        objects.push(SweepObject::Synthetic(spec));
    }
    for dir in &args.scene {
        let (frames, truth) =
            synth::read_scene(dir).with_context(|| format!("reading {}", dir.display()))?;
        check_truth_len(dir, frames.len(), truth.as_deref())?;
        let name = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        objects.push(SweepObject::Fixed {
            name,
            frames,
            truth,
        });
    }

    let cfg = SweepConfig {
        multiples,
        trials,
        include_full_frame: true,
        tracker: tracker_cfg,
        fit_range: (0.0, 10.0),
    };
    let report = sweep::sweep(&objects, &cfg)?;

    let all_failed = report
        .objects
        .iter()
        .all(|o| o.points.iter().all(|p| p.trials_ok == 0));
    if all_failed {
        bail!("every sweep cell failed; nothing to report");
    }

    report.write_files(&args.out)?;
    for object in &report.objects {
        let ok: Vec<&sweep::SweepPoint> =
            object.points.iter().filter(|p| p.trials_ok > 0).collect();
        if ok.is_empty() {
            println!("{}: all cells failed", object.name);
            continue;
        }
        let success_min = ok
            .iter()
            .map(|p| p.success_rate)
            .fold(f64::INFINITY, f64::min);
        let err_span = match (
            ok.first().and_then(|p| p.mean_distance_error),
            ok.last().and_then(|p| p.mean_distance_error),
        ) {
            (Some(a), Some(b)) => format!(", mean_error {} -> {} px", sig6(a), sig6(b)),
            _ => String::new(),
        };
        println!(
            "{}: {} multiples x {} trials, success_rate min {}{}",
            object.name,
            object.points.len(),
            report.trials,
            sig6(success_min),
            err_span
        );
    }
    print_optimum_lines(&report);
    println!("report written to {}", args.out.display());
    Ok(())
}

fn print_optimum_lines(report: &SweepReport) {
    match &report.pooled.intersection {
        Some(p) => println!("intersection: x = {}, value = {}", sig6(p.x), sig6(p.value)),
        None => println!("intersection: none in range"),
    }
    match &report.pooled.argmin {
        Some(p) => println!("argmin: x = {}, value = {}", sig6(p.x), sig6(p.value)),
        None => println!("argmin: unavailable (missing fits)"),
    }
}

/// Read a two-column numeric CSV, skipping a leading header row if present.
fn read_xy_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() < 2 {
            bail!(
                "{}: line {} has fewer than two columns",
                path.display(),
                i + 1
            );
        }
        match (
            record[0].trim().parse::<f64>(),
            record[1].trim().parse::<f64>(),
        ) {
            (Ok(x), Ok(y)) => {
                xs.push(x);
                ys.push(y);
            }
            _ if i == 0 => continue, // header row
            _ => bail!(
                "{}: line {} is not numeric: {:?}",
                path.display(),
                i + 1,
                record
            ),
        }
    }
    Ok((xs, ys))
}

pub fn fit(args: FitArgs) -> Result<()> {
    let (xs, ys) = read_xy_csv(&args.csv)?;
    let residual_norm =
        |residuals: Vec<f64>| -> f64 { residuals.iter().map(|r| r * r).sum::<f64>().sqrt() };
    let mut value = match args.model.as_str() {
        "poly5" => {
            let model = polyfit(&xs, &ys, 5)?;
            let res = residual_norm(
                xs.iter()
                    .zip(&ys)
                    .map(|(&x, &y)| model.eval(x) - y)
                    .collect(),
            );
            serde_json::json!({
                "model": "poly5",
                "coeffs": model.coeffs,
                "residual_norm": res,
            })
        }
        "exp" => {
            let model = expfit(&xs, &ys)?;
            let res = residual_norm(
                xs.iter()
                    .zip(&ys)
                    .map(|(&x, &y)| model.eval(x) - y)
                    .collect(),
            );
            serde_json::json!({
                "model": "exp",
                "a": model.a,
                "b": model.b,
                "residual_norm": res,
            })
        }
        other => return Err(usage(format!("unknown model `{other}`"))),
    };
    round_json_floats(&mut value);
    let rendered = serde_json::to_string_pretty(&value).expect("fit renders");
    println!("{rendered}");
    if let Some(out) = &args.out {
        fs::write(out, rendered + "\n")?;
    }
    Ok(())
}

pub fn optimum(args: OptimumArgs) -> Result<()> {
    let [a, b] = args.exp[..] else {
        return Err(usage("--exp expects exactly two values: a b"));
    };
    if !(a > 0.0) {
        return Err(usage(format!(
            "exponential amplitude a must be positive, got {a}"
        )));
    }
    let [lo, hi] = args.range[..] else {
        return Err(usage("--range expects exactly two values: lo hi"));
    };
    if !(hi > lo) {
        return Err(usage(format!("empty range [{lo}, {hi}]")));
    }
    let poly = PolyModel::new(args.poly.clone());
    let exp = ExpModel { a, b };
    match find_intersection(&poly, &exp, lo, hi) {
        Some(p) => println!("intersection: x = {}, value = {}", sig6(p.x), sig6(p.value)),
        None => println!("no intersection in [{}, {}]", sig6(lo), sig6(hi)),
    }
    let best = argmin_sum(&poly, &exp, lo, hi, 1e-3);
    println!("argmin: x = {}, value = {}", sig6(best.x), sig6(best.value));
    Ok(())
}

pub fn report(args: ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&args.report)
        .with_context(|| format!("reading {}", args.report.display()))?;
    let report: SweepReport = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", args.report.display()))?;

    for object in &report.objects {
        println!("== {} ({} trials per cell) ==", object.name, report.trials);
        println!("multiple  window  success  mean_pixels  mean_error_px");
        let opt = |v: Option<f64>| v.map(sig6).unwrap_or_else(|| "-".into());
        let num = |v: f64| if v.is_finite() { sig6(v) } else { "-".into() };
        for p in &object.points {
            println!(
                "{:<9} {:<7} {:<8} {:<12} {}",
                sig6(p.window_multiple),
                num(p.mean_window_side),
                sig6(p.success_rate),
                num(p.mean_pixels),
                opt(p.mean_distance_error),
            );
        }
        if let Some(full) = &object.full_frame {
            println!(
                "{:<9} {:<7} {:<8} {:<12} {}",
                "full",
                "-",
                sig6(full.success_rate),
                num(full.mean_pixels),
                opt(full.mean_distance_error),
            );
        }
        if let Some(poly) = &object.poly_fit {
            println!(
                "cost fit coeffs: [{}]",
                poly.coeffs
                    .iter()
                    .map(|&c| sig6(c))
                    .collect::<Vec<_>>()
                    .join(", ")
            );
        }
        if let Some(exp) = &object.exp_fit {
            println!("error fit: a = {}, b = {}", sig6(exp.a), sig6(exp.b));
        }
        println!();
    }
    println!("== pooled ==");
    if let Some(poly) = &report.pooled.poly_fit {
        println!(
            "cost fit coeffs: [{}]",
            poly.coeffs
                .iter()
                .map(|&c| sig6(c))
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    if let Some(exp) = &report.pooled.exp_fit {
        println!("error fit: a = {}, b = {}", sig6(exp.a), sig6(exp.b));
    }
    print_optimum_lines(&report);

    if let Some(out) = &args.out {
        sweep::write_plot_files(&report, out)?;
        println!("plot series written to {}", out.display());
    }
    Ok(())
}
