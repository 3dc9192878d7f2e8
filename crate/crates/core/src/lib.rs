//! Multi-agent scientific copilot core: orchestration, agents, model
//! gateway, sandboxed analysis, data plane and batch jobs.

pub mod agents;
pub mod app;
pub mod config;
pub mod data;
pub mod gateway;
pub mod jobs;
pub mod message;
pub mod numeric;
pub mod orchestrator;
pub mod runtime;
pub mod safety;
pub mod store;
pub mod trace;

pub use app::App;
pub use config::CopilotConfig;

/// Batch-job numeric types at double precision.
pub type GaussianProcess = jobs::gp::GaussianProcess<f64>;
pub type ShapeDescriptors = jobs::geometry::ShapeDescriptors<f64>;
pub type SimSeries = jobs::sim::SimSeries<f64>;
pub type SinteringParams = jobs::sim::SinteringParams<f64>;
/// Single-precision variants for memory-bound grids.
pub type GaussianProcessF32 = jobs::gp::GaussianProcess<f32>;
pub type ShapeDescriptorsF32 = jobs::geometry::ShapeDescriptors<f32>;
pub type SimSeriesF32 = jobs::sim::SimSeries<f32>;
