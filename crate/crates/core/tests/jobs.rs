use std::collections::BTreeMap;
use std::io::Read;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use copilot_core::jobs::executors::{
    parse_training, rank_candidates, run_in_temp, Candidate, TrainingRow, UqBounds, UqError,
};
use copilot_core::jobs::geometry::{describe, ellipse, Point};
use copilot_core::jobs::gp::{GaussianProcess, SquaredExponential};
use copilot_core::jobs::sim::{mean_size, simulate, SimConfig, SimError};
use copilot_core::jobs::*;
use copilot_core::runtime::schema::{ArgField, ArgType, SchemaError, ToolSpec};
use copilot_core::store::{get_artifact, MemoryObjectStore, ObjectStore};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn args(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn csv_column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| l.split(',').nth(i).unwrap().to_string())
        .collect()
}

// ------------------------------------------------------------- simulation

#[test]
fn sintering_law_matches_direct_evaluation() {
    // d0 = 2, k = 0.01, n = 3, t = 100: 2 * (1 + 1)^(1/3)
    let want = 2.0 * 2f64.cbrt();
    assert!((mean_size(2.0, 0.01, 3.0, 100.0) - want).abs() < 1e-12);
    assert!((mean_size(2.0f32, 0.01, 3.0, 100.0) - want as f32).abs() < 1e-5);
}

#[test]
fn size_at_time_zero_is_initial() {
    let cfg = SimConfig::default();
    for t in [150.0, 650.0, 1100.0] {
        let s = simulate(&cfg, t, &[0.0, 1.0]).unwrap();
        assert_eq!(s.mean_nm[0], cfg.params.d0_nm);
    }
}

#[test]
fn out_of_bounds_temperature() {
    let cfg = SimConfig::default();
    assert!(matches!(
        simulate(&cfg, 5000.0, &[0.0, 1.0]),
        Err(SimError::TemperatureOutOfBounds { .. })
    ));
    assert_eq!(simulate(&cfg, 500.0, &[1.0, 0.5]), Err(SimError::BadGrid));
}

proptest! {
    #[test]
    fn hotter_sinters_faster(t1 in 100.0f64..1200.0, dt in 0.0f64..500.0, time in 0.0f64..5000.0) {
        let t2 = (t1 + dt).min(1200.0);
        let cfg = SimConfig::default();
        let a = simulate(&cfg, t1, &[time]).unwrap();
        let b = simulate(&cfg, t2, &[time]).unwrap();
        prop_assert!(a.mean_nm[0] <= b.mean_nm[0]);
    }

    #[test]
    fn band_contains_mean(t in 100.0f64..1200.0, seed in 0u64..1000, steps in 2usize..40) {
        let mut cfg = SimConfig::default();
        cfg.spread.seed = seed;
        cfg.spread.members = 16;
        let grid: Vec<f64> = (0..steps).map(|i| i as f64 * 25.0).collect();
        let s = simulate(&cfg, t, &grid).unwrap();
        prop_assert!(s.time_min.windows(2).all(|w| w[0] < w[1]));
        for i in 0..grid.len() {
            prop_assert!(s.lower_nm[i] <= s.mean_nm[i] && s.mean_nm[i] <= s.upper_nm[i]);
        }
    }
}

#[test]
fn simulation_executor_outputs() {
    let exec = SimulationExecutor {
        config: SimConfig::default(),
    };
    let out = run_in_temp(
        &exec,
        &serde_json::json!({"temperature": 650.0, "points": 11}),
        &[],
    )
    .unwrap();
    let names: Vec<&str> = out.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        ["size_evolution.csv", "size_evolution.png", "summary.txt"]
    );
    let csv = String::from_utf8(out[0].1.clone()).unwrap();
    assert!(csv.starts_with("time_min,mean_nm,lower_nm,upper_nm\n"));
    assert_eq!(csv.lines().count(), 12);
    assert!(out[1].1.starts_with(b"\x89PNG"));
}

// ------------------------------------------------------------ segmentation

fn run_scene(exec: &dyn Executor, arg: &str, scene: serde_json::Value) -> Vec<(String, Vec<u8>)> {
    let bytes = serde_json::to_vec(&scene).unwrap();
    run_in_temp(
        exec,
        &serde_json::json!({ arg: "scene.json" }),
        &[("scene.json", &bytes)],
    )
    .unwrap()
}

#[test]
fn disk_and_ellipse_descriptors() {
    let scene = serde_json::json!({"frames": [{"particles": [
        {"shape": "ellipse", "cx": 30.0, "cy": 30.0, "a": 10.0, "b": 10.0},
        {"shape": "ellipse", "cx": 70.0, "cy": 60.0, "a": 12.0, "b": 6.0, "angle_deg": 35.0},
    ]}]});
    let out = run_scene(&ImageSegmentationExecutor, "input_image", scene);
    let csv = String::from_utf8(
        out.iter()
            .find(|(n, _)| n == "particles.csv")
            .unwrap()
            .1
            .clone(),
    )
    .unwrap();
    let ecc: Vec<f64> = csv_column(&csv, "eccentricity")
        .iter()
        .map(|v| v.parse().unwrap())
        .collect();
    let sol: Vec<f64> = csv_column(&csv, "solidity")
        .iter()
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(ecc[0].abs() < 1e-6, "{csv}");
    assert!((sol[0] - 1.0).abs() < 1e-6);
    // e = sqrt(1 - b^2/a^2) for a 2:1 ellipse
    let want = (1.0f64 - 0.25).sqrt();
    assert!((ecc[1] - want).abs() < 1e-5, "{} vs {want}", ecc[1]);
    assert!(out
        .iter()
        .any(|(n, b)| n == "annotated.png" && b.starts_with(b"\x89PNG")));
}

#[test]
fn descriptor_ranges_on_polygons() {
    let d = describe(&ellipse(Point { x: 0.0, y: 0.0 }, 9.0, 3.0, 0.4, 512)).unwrap();
    assert!((0.0..1.0).contains(&d.eccentricity));
    assert!(d.sphericity > 0.0 && d.sphericity <= 1.0);
    assert!(d.solidity > 0.0 && d.solidity <= 1.0);
    let circle = describe(&ellipse(Point { x: 5.0, y: 5.0 }, 4.0, 4.0, 0.0, 4096)).unwrap();
    assert!((circle.area - std::f64::consts::PI * 16.0).abs() < 1e-2);
}

#[test]
fn growing_disk_video() {
    let frames: Vec<serde_json::Value> = (0..6)
        .map(|i| {
            serde_json::json!({"particles": [
                {"shape": "ellipse", "cx": 50.0, "cy": 50.0, "a": 5.0 + 2.0 * i as f64, "b": 5.0 + 2.0 * i as f64},
                {"shape": "ellipse", "cx": 15.0, "cy": 15.0, "a": 4.0, "b": 3.0},
            ]})
        })
        .collect();
    let out = run_scene(
        &VideoTrackingExecutor,
        "input_video",
        serde_json::json!({ "frames": frames }),
    );
    let csv = String::from_utf8(
        out.iter()
            .find(|(n, _)| n == "tracks.csv")
            .unwrap()
            .1
            .clone(),
    )
    .unwrap();
    let frame = csv_column(&csv, "frame");
    let track = csv_column(&csv, "track_id");
    let area: Vec<f64> = csv_column(&csv, "area_nm2")
        .iter()
        .map(|v| v.parse().unwrap())
        .collect();
    let disk: Vec<f64> = (0..area.len())
        .filter(|&i| track[i] == track[0])
        .map(|i| area[i])
        .collect();
    assert_eq!(disk.len(), 6);
    assert!(disk.windows(2).all(|w| w[0] < w[1]), "{disk:?}");
    for f in 0..6 {
        assert_eq!(frame.iter().filter(|x| **x == f.to_string()).count(), 2);
    }
    let tar_bytes = &out
        .iter()
        .find(|(n, _)| n == "annotated_frames.tar")
        .unwrap()
        .1;
    let mut archive = tar::Archive::new(tar_bytes.as_slice());
    let mut names = Vec::new();
    for entry in archive.entries().unwrap() {
        let mut entry = entry.unwrap();
        let mut head = [0u8; 4];
        entry.read_exact(&mut head).unwrap();
        assert_eq!(&head, b"\x89PNG");
        names.push(entry.path().unwrap().display().to_string());
    }
    assert_eq!(names.len(), 6);
    assert_eq!(names[0], "frame_0000.png");
}

#[test]
fn unreadable_scene_is_input_error() {
    let r = run_in_temp(
        &ImageSegmentationExecutor,
        &serde_json::json!({"input_image": "x.json"}),
        &[("x.json", b"nope")],
    );
    assert!(matches!(r, Err(ExecError::Input { .. })));
}

// -------------------------------------------------------------------- UQ

fn one_d_config(temps: (f64, f64, usize)) -> UqConfig {
    UqConfig {
        temperature_grid: temps,
        loading_grid: (1.0, 1.0, 1),
        length_scales: (120.0, 1.0, 1.0),
        signal_variance: 1.0,
        top_k: 5,
    }
}

fn row(t: f64, y: f64) -> TrainingRow {
    TrainingRow {
        candidate: Candidate {
            temperature_c: t,
            metal_loading: 1.0,
            synthesis_method: "impregnation".into(),
        },
        target: y,
    }
}

fn all_bounds() -> UqBounds {
    UqBounds {
        temperature: (-1e9, 1e9),
        loading: (-1e9, 1e9),
        methods: vec![],
    }
}

/// Posterior variance by explicit dense inversion.
fn dense_variance(train: &[f64], x: f64, ell: f64, sf2: f64, jitter: f64) -> f64 {
    let k = |a: f64, b: f64| sf2 * (-0.5 * ((a - b) / ell).powi(2)).exp();
    let n = train.len();
    let kmat = DMatrix::from_fn(n, n, |i, j| {
        k(train[i], train[j]) + if i == j { jitter } else { 0.0 }
    });
    let kstar = DVector::from_fn(n, |i, _| k(train[i], x));
    let inv = kmat.try_inverse().unwrap();
    k(x, x) - (kstar.transpose() * inv * &kstar)[(0, 0)]
}

#[test]
fn ranking_matches_dense_oracle() {
    let train = [250.0, 400.0, 700.0];
    let rows: Vec<TrainingRow> = train
        .iter()
        .zip([0.1, 0.4, 0.2])
        .map(|(t, y)| row(*t, y))
        .collect();
    let cfg = one_d_config((200.0, 800.0, 25));
    let (ranked, _) = rank_candidates(&cfg, &rows, &all_bounds()).unwrap();
    assert_eq!(ranked.len(), 25);
    let mut oracle: Vec<(f64, f64)> = (0..25)
        .map(|i| {
            let t = 200.0 + 25.0 * i as f64;
            (t, dense_variance(&train, t, 120.0, 1.0, 1e-8))
        })
        .collect();
    oracle.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (r, (t, v)) in ranked.iter().zip(&oracle) {
        assert!((r.score - v).abs() < 1e-6, "{} vs {}", r.score, v);
        if (r.candidate.temperature_c - t).abs() > 1e-9 {
            // only ties may reorder
            assert!((r.score - v).abs() < 1e-9);
        }
    }
}

#[test]
fn training_point_has_zero_variance_and_ranks_last() {
    let rows = vec![row(200.0, 0.3), row(500.0, 0.5), row(800.0, 0.1)];
    let cfg = one_d_config((200.0, 800.0, 7));
    let (ranked, _) = rank_candidates(&cfg, &rows, &all_bounds()).unwrap();
    let last3: Vec<f64> = ranked[ranked.len() - 3..]
        .iter()
        .map(|r| r.candidate.temperature_c)
        .collect();
    for t in [200.0, 500.0, 800.0] {
        assert!(last3.contains(&t), "{last3:?}");
    }
    assert!(ranked.last().unwrap().score < 1e-6);
    assert!(ranked.windows(2).all(|w| w[0].score >= w[1].score));
}

#[test]
fn bounds_filter_and_empty_grid() {
    let rows = vec![row(300.0, 0.3), row(600.0, 0.5)];
    let cfg = UqConfig::default();
    let bounds = UqBounds {
        temperature: (350.0, 550.0),
        loading: (1.0, 2.0),
        methods: vec!["impregnation".into(), "colloidal".into()],
    };
    let (ranked, methods) = rank_candidates(&cfg, &rows, &bounds).unwrap();
    assert_eq!(methods, ["impregnation", "colloidal"]);
    for r in &ranked {
        assert!((350.0..=550.0).contains(&r.candidate.temperature_c));
        assert!((1.0..=2.0).contains(&r.candidate.metal_loading));
    }
    let none = UqBounds {
        temperature: (900.0, 950.0),
        loading: (1.0, 2.0),
        methods: vec![],
    };
    assert_eq!(
        rank_candidates(&cfg, &rows, &none).unwrap_err(),
        UqError::EmptyGrid
    );
}

#[test]
fn training_csv_requires_columns() {
    let ok = "temperature_c,metal_loading,synthesis_method,deactivation_rate\n300,1.0,impregnation,0.2\n";
    assert_eq!(parse_training(ok, "deactivation_rate").unwrap().len(), 1);
    assert!(matches!(parse_training(ok, "yield"), Err(UqError::Data(_))));
}

proptest! {
    #[test]
    fn posterior_variance_between_zero_and_prior(
        xs in proptest::collection::vec(-5.0f64..5.0, 1..8),
        q in -8.0f64..8.0,
        ell in 0.2f64..3.0,
    ) {
        let y: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let kernel = SquaredExponential { signal_variance: 1.5, length_scales: vec![ell] };
        let gp = GaussianProcess::fit(kernel, xs.iter().map(|x| vec![*x]).collect(), &y, 1e-8).unwrap();
        let p = gp.predict(&[q]).unwrap();
        prop_assert!(p.variance >= 0.0);
        prop_assert!(p.variance <= gp.prior_variance() + 1e-12);
    }
}

// -------------------------------------------------------------- scheduler

fn scheduler(parallelism: usize) -> (Scheduler, Arc<MemoryObjectStore>) {
    let store = Arc::new(MemoryObjectStore::new());
    let s = standard_scheduler(
        store.clone(),
        parallelism,
        SimConfig::default(),
        UqConfig::default(),
    );
    (s, store)
}

#[tokio::test]
async fn simulation_job_lifecycle() {
    let (s, store) = scheduler(2);
    let id = s
        .submit_job(
            JobKind::Simulation,
            &args(&[("temperature", "650")]),
            "alice",
        )
        .unwrap();
    let first = s.job_status(&id).unwrap();
    assert!(matches!(
        first.state,
        JobState::Submitted | JobState::Starting
    ));
    assert_eq!(
        first.args.get("temperature").unwrap().units.as_deref(),
        Some("°C")
    );

    let rec = s.wait_for(&id, Duration::from_secs(30)).await.unwrap();
    assert_eq!(rec.state, JobState::Succeeded);
    let states: Vec<JobState> = rec.history.iter().map(|h| h.state).collect();
    assert_eq!(
        states,
        [
            JobState::Submitted,
            JobState::Starting,
            JobState::Running,
            JobState::Succeeded
        ]
    );
    assert!(rec.history.windows(2).all(|w| w[0].at <= w[1].at));
    assert!(rec.submitted_at <= rec.started_at.unwrap() && rec.started_at <= rec.finished_at);

    let listed = s.list_jobs("alice");
    assert_eq!(listed.len(), 1);
    assert!(!listed[0].outputs.is_empty());
    for o in &listed[0].outputs {
        assert!(store.exists(&o.artifact.key()));
    }

    let collected = s.collect_outputs(&id).unwrap();
    let series = collected
        .text
        .iter()
        .find(|t| t.name == "size_evolution.csv")
        .unwrap();
    assert!(series.text.starts_with("time_min,mean_nm"));
    assert_eq!(collected.artifacts.len(), 1);
    let (png, ct) = get_artifact(store.as_ref(), &collected.artifacts[0].id).unwrap();
    assert_eq!(ct, "image/png");
    assert!(png.starts_with(b"\x89PNG"));
}

#[tokio::test]
async fn validation_and_unknown_ids() {
    let (s, _) = scheduler(1);
    let err = s
        .submit_job(JobKind::Simulation, &args(&[]), "a")
        .unwrap_err();
    assert!(matches!(err, JobError::Args(SchemaError::MissingField(f)) if f == "temperature"));
    let err = s
        .submit_job(JobKind::Simulation, &args(&[("temperature", "hot")]), "a")
        .unwrap_err();
    assert!(matches!(err, JobError::Args(_)));
    let err = s
        .submit_job(
            JobKind::ImageSegmentation,
            &args(&[("input_image", "missing.json")]),
            "a",
        )
        .unwrap_err();
    assert!(matches!(err, JobError::InputNotFound(_)));
    assert!(matches!(
        s.job_status("job-nope"),
        Err(JobError::NotFound(_))
    ));
    assert!(s.list_jobs("fresh").is_empty());

    let bare = Scheduler::new(Arc::new(MemoryObjectStore::new()), 1);
    assert!(matches!(
        bare.submit_job(JobKind::Simulation, &args(&[("temperature", "650")]), "a"),
        Err(JobError::UnknownKind(JobKind::Simulation))
    ));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn five_jobs_one_session_and_isolation() {
    let (s, _) = scheduler(3);
    let mut ids = Vec::new();
    for t in [300, 400, 500, 600, 700] {
        ids.push(
            s.submit_job(
                JobKind::Simulation,
                &args(&[("temperature", &t.to_string()), ("points", "5")]),
                "a",
            )
            .unwrap(),
        );
    }
    let other = s
        .submit_job(JobKind::Simulation, &args(&[("temperature", "650")]), "b")
        .unwrap();
    let mut unique = ids.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), 5);
    let listed: Vec<String> = s.list_jobs("a").into_iter().map(|j| j.id).collect();
    assert_eq!(listed.len(), 5);
    for id in &ids {
        assert!(listed.contains(id));
    }
    assert!(!listed.contains(&other));
    let b: Vec<String> = s.list_jobs("b").into_iter().map(|j| j.id).collect();
    assert_eq!(b, vec![other]);
    for id in &ids {
        assert_eq!(
            s.wait_for(id, Duration::from_secs(30)).await.unwrap().state,
            JobState::Succeeded
        );
    }
}

struct Gated(Arc<AtomicBool>);

impl Executor for Gated {
    fn run(&self, ctx: &ExecContext) -> Result<(), ExecError> {
        while !self.0.load(Ordering::SeqCst) {
            std::thread::sleep(Duration::from_millis(5));
        }
        ctx.write("done.txt", b"ok")
    }
}

struct Failing;

impl Executor for Failing {
    fn run(&self, _: &ExecContext) -> Result<(), ExecError> {
        Err(ExecError::Failed("solver diverged at step 12".into()))
    }
}

struct Silent;

impl Executor for Silent {
    fn run(&self, _: &ExecContext) -> Result<(), ExecError> {
        Ok(())
    }
}

fn custom(executor: Arc<dyn Executor>) -> Scheduler {
    let mut s = Scheduler::new(Arc::new(MemoryObjectStore::new()), 1);
    s.register_executor("custom", executor);
    s.define(JobDefinition {
        kind: JobKind::Simulation,
        executor: "custom".into(),
        resource: ResourceClass::Cpu,
        schema: ToolSpec::new("custom", "test")
            .arg(ArgField::new("x", ArgType::Number, "x").default_value("1")),
        input_args: vec![],
    });
    s
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn collect_on_running_job_is_not_finished() {
    let gate = Arc::new(AtomicBool::new(false));
    let s = custom(Arc::new(Gated(gate.clone())));
    let id = s.submit_job(JobKind::Simulation, &args(&[]), "a").unwrap();
    // a second job waits for the only slot
    let queued = s.submit_job(JobKind::Simulation, &args(&[]), "a").unwrap();
    let deadline = std::time::Instant::now() + Duration::from_secs(10);
    while s.job_status(&id).unwrap().state != JobState::Running {
        assert!(std::time::Instant::now() < deadline);
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    assert!(matches!(
        s.collect_outputs(&id),
        Err(JobError::NotFinished {
            state: JobState::Running,
            ..
        })
    ));
    assert_eq!(s.job_status(&queued).unwrap().state, JobState::Submitted);
    gate.store(true, Ordering::SeqCst);
    assert_eq!(
        s.wait_for(&id, Duration::from_secs(10))
            .await
            .unwrap()
            .state,
        JobState::Succeeded
    );
    assert_eq!(
        s.wait_for(&queued, Duration::from_secs(10))
            .await
            .unwrap()
            .state,
        JobState::Succeeded
    );
    assert_eq!(s.collect_outputs(&id).unwrap().text[0].text, "ok");
}

#[tokio::test]
async fn failed_job_returns_log() {
    let s = custom(Arc::new(Failing));
    let id = s.submit_job(JobKind::Simulation, &args(&[]), "a").unwrap();
    let rec = s.wait_for(&id, Duration::from_secs(10)).await.unwrap();
    assert_eq!(rec.state, JobState::Failed);
    let states: Vec<JobState> = rec.history.iter().map(|h| h.state).collect();
    assert_eq!(
        states,
        [
            JobState::Submitted,
            JobState::Starting,
            JobState::Running,
            JobState::Failed
        ]
    );
    match s.collect_outputs(&id) {
        Err(JobError::Failed { log, .. }) => assert!(log.contains("solver diverged")),
        other => panic!("{other:?}"),
    }
}

#[tokio::test]
async fn success_without_outputs_is_failure() {
    let s = custom(Arc::new(Silent));
    let id = s.submit_job(JobKind::Simulation, &args(&[]), "a").unwrap();
    let rec = s.wait_for(&id, Duration::from_secs(10)).await.unwrap();
    assert_eq!(rec.state, JobState::Failed);
    assert!(rec.outputs.is_empty());
}

#[tokio::test]
async fn segmentation_job_stages_input() {
    let (s, store) = scheduler(1);
    let scene = serde_json::json!({"frames": [{"particles": [{"shape": "ellipse", "cx": 50.0, "cy": 50.0, "a": 8.0, "b": 8.0}]}]});
    store
        .put("inputs/disk.json", &serde_json::to_vec(&scene).unwrap())
        .unwrap();
    let id = s
        .submit_job(
            JobKind::ImageSegmentation,
            &args(&[("input_image", "disk.json")]),
            "a",
        )
        .unwrap();
    let rec = s.wait_for(&id, Duration::from_secs(10)).await.unwrap();
    assert_eq!(rec.state, JobState::Succeeded, "{:?}", rec.failure_log);
    let out = s.collect_outputs(&id).unwrap();
    assert_eq!(out.text[0].name, "particles.csv");
    assert_eq!(out.artifacts[0].name, "annotated.png");
}

#[tokio::test]
async fn uq_job_end_to_end() {
    let (s, store) = scheduler(1);
    let csv = "temperature_c,metal_loading,synthesis_method,deactivation_rate\n\
               300,1.0,impregnation,0.12\n450,2.5,impregnation,0.30\n600,4.0,colloidal,0.55\n";
    store.put("inputs/tos.csv", csv.as_bytes()).unwrap();
    let id = s
        .submit_job(
            JobKind::UncertaintyQuantification,
            &args(&[
                ("training_data", "tos.csv"),
                ("temperature_min", "250"),
                ("temperature_max", "650"),
                ("loading_min", "0.5"),
                ("loading_max", "3"),
            ]),
            "a",
        )
        .unwrap();
    let rec = s.wait_for(&id, Duration::from_secs(10)).await.unwrap();
    assert_eq!(rec.state, JobState::Succeeded, "{:?}", rec.failure_log);
    let out = s.collect_outputs(&id).unwrap();
    let sugg = out
        .text
        .iter()
        .find(|t| t.name == "suggestions.csv")
        .unwrap();
    let scores: Vec<f64> = csv_column(&sugg.text, "posterior_variance")
        .iter()
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(scores.len(), 10);
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    assert!(out
        .artifacts
        .iter()
        .any(|a| a.name == "uncertainty_map.png"));
}
