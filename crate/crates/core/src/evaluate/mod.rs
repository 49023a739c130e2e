//! Cross-validation, confusion metrics and the reducer × classifier grid.

mod experiment;
mod folds;
mod metrics;
mod report;

pub use experiment::{
    run_experiment, AggregateResult, EvaluationReport, ExperimentConfig, FitRecord, FitStage, FoldResult,
    ReducerTrace,
};
pub use folds::{kfold_split, kfold_split_stratified, FoldPlan};
pub use metrics::{confusion, ConfusionMatrix, Metrics, Undefined};
pub use report::{write_report, Stamp, REFERENCE_TABLE};
