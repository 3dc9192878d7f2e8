//! Batch jobs and the stand-in scientific executors.

pub mod executors;
pub mod geometry;
pub mod gp;
pub mod plot;
pub mod scheduler;
pub mod sim;

pub use executors::{
    ExecContext, ExecError, Executor, ImageSegmentationExecutor, SimulationExecutor, UqConfig,
    UqExecutor, VideoTrackingExecutor,
};
pub use scheduler::{
    CollectedOutputs, JobDefinition, JobError, JobKind, JobOutput, JobRecord, JobState,
    ResourceClass, Scheduler, StateChange, TextOutput, INPUT_PREFIX,
};

use std::sync::Arc;

use crate::runtime::schema::{ArgField, ArgType, ToolSpec};
use crate::store::ObjectStore;

pub const SIMULATION_EXECUTOR: &str = "sintering-ensemble";
pub const SEGMENTATION_EXECUTOR: &str = "scene-segmentation";
pub const TRACKING_EXECUTOR: &str = "scene-tracking";
pub const UQ_EXECUTOR: &str = "gp-uncertainty";

pub fn simulation_schema() -> ToolSpec {
    ToolSpec::new(
        "submit_simulation_job",
        "Submit a sintering simulation that predicts nanoparticle size evolution over time at a fixed temperature.",
    )
    .arg(ArgField::new("temperature", ArgType::Number, "Sintering temperature").units("°C"))
    .arg(ArgField::new("duration", ArgType::Number, "Simulated time span").units("min").default_value("600"))
    .arg(ArgField::new("points", ArgType::Integer, "Number of time points").default_value("61"))
}

pub fn segmentation_schema() -> ToolSpec {
    ToolSpec::new(
        "submit_image_segmentation_job",
        "Segment the particles in a micrograph and report area, centroid, eccentricity, sphericity and solidity per particle.",
    )
    .arg(ArgField::new("input_image", ArgType::String, "Name of an input file from list_inputs"))
}

pub fn tracking_schema() -> ToolSpec {
    ToolSpec::new(
        "submit_video_tracking_job",
        "Track particles across the frames of a microscopy video and report per-frame shape descriptors plus an annotated video.",
    )
    .arg(ArgField::new("input_video", ArgType::String, "Name of an input file from list_inputs"))
}

pub fn uq_schema() -> ToolSpec {
    ToolSpec::new(
        "submit_uncertainty_job",
        "Rank candidate experimental conditions by model uncertainty within the given bounds and draw an uncertainty map.",
    )
    .arg(ArgField::new("training_data", ArgType::String, "Name of a training CSV from list_inputs"))
    .arg(ArgField::new("target_metric", ArgType::String, "Column to model").default_value("deactivation_rate"))
    .arg(ArgField::new("temperature_min", ArgType::Number, "Lowest candidate temperature").units("°C"))
    .arg(ArgField::new("temperature_max", ArgType::Number, "Highest candidate temperature").units("°C"))
    .arg(ArgField::new("loading_min", ArgType::Number, "Lowest metal loading").units("wt%"))
    .arg(ArgField::new("loading_max", ArgType::Number, "Highest metal loading").units("wt%"))
    .arg(
        ArgField::new("synthesis_methods", ArgType::String, "Comma-separated synthesis methods; empty for all in the data")
            .default_value(""),
    )
}

/// Scheduler with the four built-in job kinds.
pub fn standard_scheduler(
    store: Arc<dyn ObjectStore>,
    parallelism: usize,
    sim: sim::SimConfig,
    uq: UqConfig,
) -> Scheduler {
    let mut s = Scheduler::new(store, parallelism);
    s.register_executor(
        SIMULATION_EXECUTOR,
        Arc::new(SimulationExecutor { config: sim }),
    );
    s.register_executor(SEGMENTATION_EXECUTOR, Arc::new(ImageSegmentationExecutor));
    s.register_executor(TRACKING_EXECUTOR, Arc::new(VideoTrackingExecutor));
    s.register_executor(UQ_EXECUTOR, Arc::new(UqExecutor { config: uq }));
    for (kind, executor, resource, schema, inputs) in [
        (
            JobKind::Simulation,
            SIMULATION_EXECUTOR,
            ResourceClass::Cpu,
            simulation_schema(),
            vec![],
        ),
        (
            JobKind::ImageSegmentation,
            SEGMENTATION_EXECUTOR,
            ResourceClass::GpuEmulated,
            segmentation_schema(),
            vec!["input_image"],
        ),
        (
            JobKind::VideoTracking,
            TRACKING_EXECUTOR,
            ResourceClass::GpuEmulated,
            tracking_schema(),
            vec!["input_video"],
        ),
        (
            JobKind::UncertaintyQuantification,
            UQ_EXECUTOR,
            ResourceClass::Cpu,
            uq_schema(),
            vec!["training_data"],
        ),
    ] {
        s.define(JobDefinition {
            kind,
            executor: executor.to_string(),
            resource,
            schema,
            input_args: inputs.into_iter().map(String::from).collect(),
        });
    }
    s
}
