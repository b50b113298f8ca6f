//! Training, evaluation, metrics and experiment runners.

mod baseline;
mod experiments;
mod metrics;
mod run;
mod train;

pub use baseline::MeanPoolBaseline;
pub use experiments::{
    ablation_run, representation_sweep, variants_csv, variants_table, with_flags, VariantResult,
    ABLATION_ROWS,
};
pub use metrics::{auc, logloss, Metrics, MetricsReport, REPORT_CSV_HEADER};
pub use run::{DataSource, RunConfig};
pub use train::{
    evaluate, load_split, predict_all, train, train_epoch, train_scorer, EpochSummary,
    PreparedData, Scorer, TrainOutcome, TrainSettings,
};

#[cfg(test)]
mod tests;
