//! Stand-in executors. Each reads an args document and a staged inputs
//! directory and writes files into an outputs directory, the same shape a
//! container job would have.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::geometry::{describe, ellipse, Point, ShapeDescriptors};
use super::gp::{GaussianProcess, SquaredExponential, DEFAULT_JITTER};
use super::plot::{self, Canvas};
use super::sim::{simulate, SimConfig};
use crate::numeric::linspace;

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("bad arguments: {0}")]
    Args(String),
    #[error("cannot read input {name:?}: {detail}")]
    Input { name: String, detail: String },
    #[error("{0}")]
    Failed(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub struct ExecContext {
    pub inputs_dir: PathBuf,
    pub args_path: PathBuf,
    pub outputs_dir: PathBuf,
}

impl ExecContext {
    pub fn args<T: DeserializeOwned>(&self) -> Result<T, ExecError> {
        let bytes = std::fs::read(&self.args_path)?;
        serde_json::from_slice(&bytes).map_err(|e| ExecError::Args(e.to_string()))
    }

    pub fn input(&self, name: &str) -> Result<Vec<u8>, ExecError> {
        if name.contains('/') || name.contains("..") {
            return Err(ExecError::Input {
                name: name.to_string(),
                detail: "not a plain file name".into(),
            });
        }
        std::fs::read(self.inputs_dir.join(name)).map_err(|e| ExecError::Input {
            name: name.to_string(),
            detail: e.to_string(),
        })
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<(), ExecError> {
        std::fs::write(self.outputs_dir.join(name), bytes)?;
        Ok(())
    }
}

pub trait Executor: Send + Sync {
    fn run(&self, ctx: &ExecContext) -> Result<(), ExecError>;
}

// ---------------------------------------------------------------- simulation

#[derive(Debug, Deserialize)]
struct SimArgs {
    temperature: f64,
    #[serde(default = "default_duration")]
    duration: f64,
    #[serde(default = "default_points")]
    points: i64,
}

fn default_duration() -> f64 {
    600.0
}

fn default_points() -> i64 {
    61
}

pub struct SimulationExecutor {
    pub config: SimConfig,
}

impl Executor for SimulationExecutor {
    fn run(&self, ctx: &ExecContext) -> Result<(), ExecError> {
        let args: SimArgs = ctx.args()?;
        if !(args.duration > 0.0) || args.points < 2 || args.points > 10_000 {
            return Err(ExecError::Args(
                "duration must be positive and points in 2..=10000".into(),
            ));
        }
        let grid = linspace(0.0, args.duration, args.points as usize);
        let series = simulate(&self.config, args.temperature, &grid)
            .map_err(|e| ExecError::Args(e.to_string()))?;
        ctx.write("size_evolution.csv", series.to_csv().as_bytes())?;
        let png = plot::line_chart(
            &series.time_min,
            &series.mean_nm,
            Some((&series.lower_nm, &series.upper_nm)),
        );
        ctx.write("size_evolution.png", &png)?;
        let last = series.mean_nm.len() - 1;
        ctx.write(
            "summary.txt",
            format!(
                "temperature_c={}\nduration_min={}\nfinal_mean_nm={:.4}\nfinal_band_nm=[{:.4}, {:.4}]\n",
                args.temperature, args.duration, series.mean_nm[last], series.lower_nm[last], series.upper_nm[last]
            )
            .as_bytes(),
        )?;
        Ok(())
    }
}

// -------------------------------------------------------------- segmentation

pub const ELLIPSE_VERTICES: usize = 4096;

/// One particle outline in a synthetic scene, in nm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum SceneShape {
    Ellipse {
        cx: f64,
        cy: f64,
        a: f64,
        b: f64,
        #[serde(default)]
        angle_deg: f64,
    },
    Polygon {
        points: Vec<[f64; 2]>,
    },
}

impl SceneShape {
    pub fn outline(&self) -> Vec<Point<f64>> {
        match self {
            SceneShape::Ellipse {
                cx,
                cy,
                a,
                b,
                angle_deg,
            } => ellipse(
                Point { x: *cx, y: *cy },
                *a,
                *b,
                angle_deg.to_radians(),
                ELLIPSE_VERTICES,
            ),
            SceneShape::Polygon { points } => {
                points.iter().map(|p| Point { x: p[0], y: p[1] }).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFrame {
    pub particles: Vec<SceneShape>,
}

/// Synthetic micrograph (one frame) or video (several frames).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    #[serde(default = "default_field")]
    pub field_nm: f64,
    pub frames: Vec<SceneFrame>,
}

fn default_field() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleRow {
    pub frame: usize,
    pub track_id: usize,
    pub descriptors: ShapeDescriptors<f64>,
}

fn describe_frame(
    frame: &SceneFrame,
    index: usize,
) -> Result<Vec<ShapeDescriptors<f64>>, ExecError> {
    frame
        .particles
        .iter()
        .enumerate()
        .map(|(i, s)| {
            describe(&s.outline())
                .ok_or_else(|| ExecError::Failed(format!("frame {index} particle {i} has no area")))
        })
        .collect()
}

/// Greedy nearest-centroid matching between consecutive frames. Tracks are
/// seeded by the particles of the first frame; later unmatched particles
/// start new tracks.
pub fn track(frames: &[Vec<ShapeDescriptors<f64>>]) -> Vec<ParticleRow> {
    let mut rows = Vec::new();
    let mut prev: Vec<(usize, Point<f64>)> = Vec::new();
    let mut next_id = 0;
    for (f, particles) in frames.iter().enumerate() {
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (i, p) in particles.iter().enumerate() {
            for (j, (_, c)) in prev.iter().enumerate() {
                let d = (p.centroid.x - c.x).hypot(p.centroid.y - c.y);
                pairs.push((d, i, j));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut ids: Vec<Option<usize>> = vec![None; particles.len()];
        let mut used = BTreeSet::new();
        for (_, i, j) in pairs {
            if ids[i].is_none() && !used.contains(&j) {
                ids[i] = Some(prev[j].0);
                used.insert(j);
            }
        }
        let mut current = Vec::new();
        for (i, p) in particles.iter().enumerate() {
            let id = ids[i].unwrap_or_else(|| {
                next_id += 1;
                next_id - 1
            });
            current.push((id, p.centroid));
            rows.push(ParticleRow {
                frame: f,
                track_id: id,
                descriptors: *p,
            });
        }
        prev = current;
    }
    rows
}

pub fn rows_to_csv(rows: &[ParticleRow]) -> String {
    let mut out = String::from(
        "frame,track_id,area_nm2,centroid_x_nm,centroid_y_nm,eccentricity,sphericity,solidity\n",
    );
    for r in rows {
        let d = &r.descriptors;
        out.push_str(&format!(
            "{},{},{:.4},{:.4},{:.4},{:.6},{:.6},{:.6}\n",
            r.frame,
            r.track_id,
            d.area,
            d.centroid.x,
            d.centroid.y,
            d.eccentricity,
            d.sphericity,
            d.solidity
        ));
    }
    out
}

fn render_frame(scene: &Scene, frame: &SceneFrame, rows: &[&ParticleRow]) -> Vec<u8> {
    let size = 256u32;
    let mut c = Canvas::new(size, size);
    let scale = size as f64 / scene.field_nm.max(1e-9);
    let colors = [
        plot::RED,
        plot::BLUE,
        [44, 160, 44],
        [148, 103, 189],
        [255, 127, 14],
    ];
    for (shape, row) in frame.particles.iter().zip(rows) {
        let pts = shape.outline();
        let color = colors[row.track_id % colors.len()];
        let step = (pts.len() / 256).max(1);
        let sampled: Vec<&Point<f64>> = pts.iter().step_by(step).collect();
        for k in 0..sampled.len() {
            let (p, q) = (sampled[k], sampled[(k + 1) % sampled.len()]);
            c.line(p.x * scale, p.y * scale, q.x * scale, q.y * scale, color);
        }
        let (cx, cy) = (
            row.descriptors.centroid.x * scale,
            row.descriptors.centroid.y * scale,
        );
        c.text(
            cx as i64 - 2,
            cy as i64 - 2,
            &row.track_id.to_string(),
            color,
        );
    }
    c.to_png()
}

#[derive(Debug, Deserialize)]
struct ImageArgs {
    input_image: String,
}

#[derive(Debug, Deserialize)]
struct VideoArgs {
    input_video: String,
}

fn load_scene(ctx: &ExecContext, name: &str) -> Result<Scene, ExecError> {
    let bytes = ctx.input(name)?;
    let scene: Scene = serde_json::from_slice(&bytes).map_err(|e| ExecError::Input {
        name: name.to_string(),
        detail: e.to_string(),
    })?;
    if scene.frames.is_empty() {
        return Err(ExecError::Input {
            name: name.to_string(),
            detail: "scene has no frames".into(),
        });
    }
    Ok(scene)
}

pub struct ImageSegmentationExecutor;

impl Executor for ImageSegmentationExecutor {
    fn run(&self, ctx: &ExecContext) -> Result<(), ExecError> {
        let args: ImageArgs = ctx.args()?;
        let scene = load_scene(ctx, &args.input_image)?;
        let frame = &scene.frames[0];
        let descriptors = describe_frame(frame, 0)?;
        let rows: Vec<ParticleRow> = descriptors
            .into_iter()
            .enumerate()
            .map(|(i, d)| ParticleRow {
                frame: 0,
                track_id: i,
                descriptors: d,
            })
            .collect();
        ctx.write("particles.csv", rows_to_csv(&rows).as_bytes())?;
        let refs: Vec<&ParticleRow> = rows.iter().collect();
        ctx.write("annotated.png", &render_frame(&scene, frame, &refs))?;
        Ok(())
    }
}

pub struct VideoTrackingExecutor;

impl Executor for VideoTrackingExecutor {
    fn run(&self, ctx: &ExecContext) -> Result<(), ExecError> {
        let args: VideoArgs = ctx.args()?;
        let scene = load_scene(ctx, &args.input_video)?;
        let per_frame = scene
            .frames
            .iter()
            .enumerate()
            .map(|(i, f)| describe_frame(f, i))
            .collect::<Result<Vec<_>, _>>()?;
        let rows = track(&per_frame);
        ctx.write("tracks.csv", rows_to_csv(&rows).as_bytes())?;

        let mut archive = tar::Builder::new(Vec::new());
        for (i, frame) in scene.frames.iter().enumerate() {
            let frame_rows: Vec<&ParticleRow> = rows.iter().filter(|r| r.frame == i).collect();
            let png = render_frame(&scene, frame, &frame_rows);
            let mut header = tar::Header::new_gnu();
            header.set_size(png.len() as u64);
            header.set_mode(0o644);
            header.set_cksum();
            archive.append_data(&mut header, format!("frame_{i:04}.png"), png.as_slice())?;
        }
        let bytes = archive.into_inner()?;
        std::fs::File::create(ctx.outputs_dir.join("annotated_frames.tar"))?.write_all(&bytes)?;
        Ok(())
    }
}

// ------------------------------------------------------------------------ UQ

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UqConfig {
    /// Candidate grid: temperatures (°C) and metal loadings (wt%).
    pub temperature_grid: (f64, f64, usize),
    pub loading_grid: (f64, f64, usize),
    pub length_scales: (f64, f64, f64),
    pub signal_variance: f64,
    pub top_k: usize,
}

impl Default for UqConfig {
    fn default() -> Self {
        Self {
            temperature_grid: (200.0, 800.0, 13),
            loading_grid: (0.5, 5.0, 10),
            length_scales: (150.0, 1.5, 1.0),
            signal_variance: 1.0,
            top_k: 10,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
struct UqArgs {
    training_data: String,
    #[serde(default = "default_metric")]
    target_metric: String,
    temperature_min: f64,
    temperature_max: f64,
    loading_min: f64,
    loading_max: f64,
    /// Comma-separated synthesis methods; empty means all in the data.
    #[serde(default)]
    synthesis_methods: String,
}

fn default_metric() -> String {
    "deactivation_rate".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub temperature_c: f64,
    pub metal_loading: f64,
    pub synthesis_method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub candidate: Candidate,
    pub predicted_mean: f64,
    /// Posterior predictive variance, the ranking score.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UqError {
    #[error("no candidate lies within the requested bounds")]
    EmptyGrid,
    #[error("bounds are malformed: {0}")]
    Bounds(String),
    #[error("training data: {0}")]
    Data(String),
    #[error(transparent)]
    Gp(#[from] super::gp::GpError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRow {
    pub candidate: Candidate,
    pub target: f64,
}

/// Parses CSV with columns temperature_c, metal_loading, synthesis_method
/// and the target column.
pub fn parse_training(csv: &str, target: &str) -> Result<Vec<TrainingRow>, UqError> {
    let mut lines = csv.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| UqError::Data("empty file".into()))?
        .split(',')
        .map(str::trim)
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| UqError::Data(format!("missing column {name:?}")))
    };
    let (ti, li, mi, yi) = (
        col("temperature_c")?,
        col("metal_loading")?,
        col("synthesis_method")?,
        col(target)?,
    );
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let num = |i: usize| -> Result<f64, UqError> {
            cells
                .get(i)
                .and_then(|c| c.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    UqError::Data(format!(
                        "row {} column {} is not a number",
                        n + 2,
                        header[i]
                    ))
                })
        };
        rows.push(TrainingRow {
            candidate: Candidate {
                temperature_c: num(ti)?,
                metal_loading: num(li)?,
                synthesis_method: cells.get(mi).copied().unwrap_or("").to_string(),
            },
            target: num(yi)?,
        });
    }
    if rows.is_empty() {
        return Err(UqError::Data("no rows".into()));
    }
    Ok(rows)
}

/// Feature vector: temperature, loading, then a one-hot synthesis method.
pub fn encode(c: &Candidate, methods: &[String]) -> Vec<f64> {
    let mut v = vec![c.temperature_c, c.metal_loading];
    v.extend(
        methods
            .iter()
            .map(|m| if *m == c.synthesis_method { 1.0 } else { 0.0 }),
    );
    v
}

pub struct UqBounds {
    pub temperature: (f64, f64),
    pub loading: (f64, f64),
    pub methods: Vec<String>,
}

/// Ranks grid candidates inside `bounds` by descending posterior variance.
pub fn rank_candidates(
    config: &UqConfig,
    training: &[TrainingRow],
    bounds: &UqBounds,
) -> Result<(Vec<RankedCandidate>, Vec<String>), UqError> {
    if bounds.temperature.0 > bounds.temperature.1 || bounds.loading.0 > bounds.loading.1 {
        return Err(UqError::Bounds("minimum exceeds maximum".into()));
    }
    let mut methods: Vec<String> = training
        .iter()
        .map(|r| r.candidate.synthesis_method.clone())
        .collect();
    methods.sort();
    methods.dedup();
    for m in &bounds.methods {
        if !methods.contains(m) {
            methods.push(m.clone());
        }
    }
    let wanted: Vec<String> = if bounds.methods.is_empty() {
        methods.clone()
    } else {
        bounds.methods.clone()
    };

    let (l_t, l_l, l_m) = config.length_scales;
    let mut scales = vec![l_t, l_l];
    scales.extend(std::iter::repeat_n(l_m, methods.len()));
    let kernel = SquaredExponential {
        signal_variance: config.signal_variance,
        length_scales: scales,
    };
    let x: Vec<Vec<f64>> = training
        .iter()
        .map(|r| encode(&r.candidate, &methods))
        .collect();
    let y: Vec<f64> = training.iter().map(|r| r.target).collect();
    let gp = GaussianProcess::fit(kernel, x, &y, DEFAULT_JITTER)?;

    let (t0, t1, tn) = config.temperature_grid;
    let (l0, l1, ln) = config.loading_grid;
    let mut ranked = Vec::new();
    for t in linspace(t0, t1, tn) {
        if t < bounds.temperature.0 || t > bounds.temperature.1 {
            continue;
        }
        for l in linspace(l0, l1, ln) {
            if l < bounds.loading.0 || l > bounds.loading.1 {
                continue;
            }
            for m in &wanted {
                let candidate = Candidate {
                    temperature_c: t,
                    metal_loading: l,
                    synthesis_method: m.clone(),
                };
                let p = gp.predict(&encode(&candidate, &methods))?;
                ranked.push(RankedCandidate {
                    candidate,
                    predicted_mean: p.mean,
                    score: p.variance,
                });
            }
        }
    }
    if ranked.is_empty() {
        return Err(UqError::EmptyGrid);
    }
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok((ranked, wanted))
}

fn uncertainty_map(ranked: &[RankedCandidate], methods: &[String]) -> Vec<u8> {
    let panel = 160u32;
    let mut c = Canvas::new(panel * methods.len().max(1) as u32 + 20, panel + 40);
    let max = ranked
        .iter()
        .map(|r| r.score)
        .fold(0.0, f64::max)
        .max(1e-12);
    let temps: BTreeSet<u64> = ranked
        .iter()
        .map(|r| r.candidate.temperature_c.to_bits())
        .collect();
    let loads: BTreeSet<u64> = ranked
        .iter()
        .map(|r| r.candidate.metal_loading.to_bits())
        .collect();
    let temps: Vec<f64> = temps.into_iter().map(f64::from_bits).collect::<Vec<_>>();
    let loads: Vec<f64> = loads.into_iter().map(f64::from_bits).collect::<Vec<_>>();
    let mut sorted_t = temps.clone();
    sorted_t.sort_by(f64::total_cmp);
    let mut sorted_l = loads.clone();
    sorted_l.sort_by(f64::total_cmp);
    let (cw, ch) = (
        panel as f64 / sorted_t.len() as f64,
        panel as f64 / sorted_l.len() as f64,
    );
    for (mi, m) in methods.iter().enumerate() {
        let ox = 10.0 + mi as f64 * panel as f64;
        for r in ranked.iter().filter(|r| &r.candidate.synthesis_method == m) {
            let ti = sorted_t
                .iter()
                .position(|t| *t == r.candidate.temperature_c)
                .unwrap_or(0);
            let li = sorted_l
                .iter()
                .position(|l| *l == r.candidate.metal_loading)
                .unwrap_or(0);
            let x0 = ox + ti as f64 * cw;
            let y0 = 10.0 + (sorted_l.len() - 1 - li) as f64 * ch;
            c.fill_rect(
                x0 as i64,
                y0 as i64,
                (x0 + cw) as i64 - 1,
                (y0 + ch) as i64 - 1,
                plot::heat(r.score / max),
            );
        }
        c.text(
            ox as i64,
            panel as i64 + 18,
            &format!("{}", mi + 1),
            plot::BLACK,
        );
    }
    c.to_png()
}

pub struct UqExecutor {
    pub config: UqConfig,
}

impl Executor for UqExecutor {
    fn run(&self, ctx: &ExecContext) -> Result<(), ExecError> {
        let args: UqArgs = ctx.args()?;
        let csv =
            String::from_utf8(ctx.input(&args.training_data)?).map_err(|e| ExecError::Input {
                name: args.training_data.clone(),
                detail: e.to_string(),
            })?;
        let training = parse_training(&csv, &args.target_metric)
            .map_err(|e| ExecError::Failed(e.to_string()))?;
        let bounds = UqBounds {
            temperature: (args.temperature_min, args.temperature_max),
            loading: (args.loading_min, args.loading_max),
            methods: args
                .synthesis_methods
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect(),
        };
        let (ranked, methods) = rank_candidates(&self.config, &training, &bounds)
            .map_err(|e| ExecError::Failed(e.to_string()))?;
        let mut csv = String::from(
            "rank,temperature_c,metal_loading,synthesis_method,predicted_mean,posterior_variance\n",
        );
        for (i, r) in ranked.iter().take(self.config.top_k).enumerate() {
            csv.push_str(&format!(
                "{},{},{},{},{:.6},{:.6}\n",
                i + 1,
                r.candidate.temperature_c,
                r.candidate.metal_loading,
                r.candidate.synthesis_method,
                r.predicted_mean,
                r.score
            ));
        }
        ctx.write("suggestions.csv", csv.as_bytes())?;
        let mut grid =
            String::from("temperature_c,metal_loading,synthesis_method,posterior_variance\n");
        for r in &ranked {
            grid.push_str(&format!(
                "{},{},{},{:.6}\n",
                r.candidate.temperature_c,
                r.candidate.metal_loading,
                r.candidate.synthesis_method,
                r.score
            ));
        }
        ctx.write("uncertainty_grid.csv", grid.as_bytes())?;
        ctx.write("uncertainty_map.png", &uncertainty_map(&ranked, &methods))?;
        let legend: Vec<String> = methods
            .iter()
            .enumerate()
            .map(|(i, m)| format!("panel {} = {m}", i + 1))
            .collect();
        ctx.write("uncertainty_map_legend.txt", legend.join("\n").as_bytes())?;
        Ok(())
    }
}

/// Convenience for tests and tools that run an executor outside the
/// scheduler.
pub fn run_in_temp(
    exec: &dyn Executor,
    args: &serde_json::Value,
    inputs: &[(&str, &[u8])],
) -> Result<Vec<(String, Vec<u8>)>, ExecError> {
    let dir = tempfile::tempdir()?;
    let ctx = ExecContext {
        inputs_dir: dir.path().join("inputs"),
        args_path: dir.path().join("args.json"),
        outputs_dir: dir.path().join("outputs"),
    };
    std::fs::create_dir_all(&ctx.inputs_dir)?;
    std::fs::create_dir_all(&ctx.outputs_dir)?;
    std::fs::write(
        &ctx.args_path,
        serde_json::to_vec(args).map_err(|e| ExecError::Args(e.to_string()))?,
    )?;
    for (name, bytes) in inputs {
        std::fs::write(ctx.inputs_dir.join(name), bytes)?;
    }
    exec.run(&ctx)?;
    read_outputs(&ctx.outputs_dir)
}

pub fn read_outputs(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, ExecError> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir)? {
        let e = e?;
        if e.file_type()?.is_file() {
            out.push((
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path())?,
            ));
        }
    }
    out.sort();
    Ok(out)
}
