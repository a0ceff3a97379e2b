//! Plan sampling, paired execution, manifests and dataset generation.

mod config;
mod dataset;
mod execute;
mod plan;

pub use config::{DegradeConfig, HqCrop, StageProbabilities};
pub use dataset::{generate_dataset, hq_window, list_pngs, prepare_source, DatasetRequest, DatasetSummary};
pub use execute::{execute_plan, execute_plan_traced, replay, PairSample, TraceEvent};
pub use plan::{
    sample_plan, CropSpec, DegradationPlan, SensorSpec, SourceInfo, StageKind, StageParams, StageRecord,
    SCHEMA_VERSION,
};
