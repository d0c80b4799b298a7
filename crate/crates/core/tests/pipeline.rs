//! End-to-end checks over the public API: generate a scene, track it at
//! several window sizes, and inspect the aggregated trends.

use croptrack_core::sweep::{sweep, SweepConfig, SweepObject};
use croptrack_core::synth::{self, ClutterSpec, MotionSpec, ObjectSpec, SceneSpec, Shape};
use croptrack_core::tracker::{track_video, TrackerConfig};

fn scene_spec(seed: u64) -> SceneSpec {
    SceneSpec {
        name: "pipeline".into(),
        frame_size: (160, 120),
        n_frames: 60,
        object: ObjectSpec {
            shape: Shape::Rect,
            size: (16, 16),
            color: [200, 30, 30],
        },
        motion: MotionSpec {
            start: (50.0, 60.0),
            velocity: (2.5, -1.5),
            jitter_sigma: 0.3,
            bounce: true,
        },
        clutter: ClutterSpec {
            n_distractors: 2,
            distractor_colors: vec![[120, 120, 120], [40, 60, 170]],
        },
        noise_sigma: 0.015,
        seed,
    }
}

#[test]
fn tracked_scene_stays_close_to_truth() {
    let scene = synth::generate_scene(&scene_spec(9)).unwrap();
    let cfg = TrackerConfig {
        window_multiple: 2.0,
        ..Default::default()
    };
    let result = track_video(&scene.frames, &cfg, Some(&scene.truth)).unwrap();
    assert_eq!(result.success_rate, 1.0);
    assert!(result.mean_distance_error.unwrap() < 2.0);
    assert!(result
        .records
        .iter()
        .all(|r| r.corrected_center.0.is_finite() && r.corrected_center.1.is_finite()));
}

#[test]
fn success_rate_is_monotone_over_a_growing_window() {
    // averaged over a few seeds, success cannot drop as the window grows
    let multiples = [0.5, 1.0, 2.0, 3.0, 6.0];
    let seeds = [9u64, 10, 11];
    let mut averaged = Vec::new();
    for &m in &multiples {
        let mut total = 0.0;
        for &seed in &seeds {
            let scene = synth::generate_scene(&scene_spec(seed)).unwrap();
            let cfg = TrackerConfig {
                window_multiple: m,
                ..Default::default()
            };
            total += track_video(&scene.frames, &cfg, None).unwrap().success_rate;
        }
        averaged.push(total / seeds.len() as f64);
    }
    for pair in averaged.windows(2) {
        assert!(
            pair[1] >= pair[0] - 1e-12,
            "success must not decay with window size: {averaged:?}"
        );
    }
}

#[test]
fn sweep_report_round_trips_and_orders_cost() {
    let objects = vec![SweepObject::Synthetic(scene_spec(21))];
    let cfg = SweepConfig {
        multiples: vec![0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0],
        trials: 2,
        ..Default::default()
    };
    let report = sweep(&objects, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    report.write_files(dir.path()).unwrap();

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(json["multiples"].as_array().unwrap().len(), 7);
    let points = json["objects"][0]["points"].as_array().unwrap();
    let pixels: Vec<f64> = points
        .iter()
        .map(|p| p["mean_pixels"].as_f64().unwrap())
        .collect();
    let frame_area = 160.0 * 120.0;
    for pair in pixels.windows(2) {
        if pair[0] < frame_area {
            assert!(pair[1] > pair[0], "pixel cost must grow: {pixels:?}");
        } else {
            assert_eq!(pair[1], frame_area);
        }
    }
    let full = json["objects"][0]["full_frame"]["mean_pixels"]
        .as_f64()
        .unwrap();
    assert!(pixels.iter().all(|&p| p <= full));
}
