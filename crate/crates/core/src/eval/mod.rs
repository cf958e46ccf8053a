//! Subject-grouped cross-validation, metrics, intervals, signed-rank tests
//! and grid search.

mod crossval;
mod folds;
mod grid;
mod metrics;
mod report;
mod stats;

pub use crossval::{row_name, run_crossval, train_with_retries, CrossvalConfig, MAX_ATTEMPTS};
pub use folds::{make_fold_plan, Fold, FoldPlan};
pub use grid::{grid_indices, grid_search, GridConfig, GridResult, GridSpace, RankedSpec};
pub use metrics::{compute_metrics, Counts, MetricSet};
pub use report::{EvalReport, PairwiseP, ReportRow, RunRecord, Summary, CI_LEVEL};
pub use stats::{mean_ci, wilcoxon_signed_rank, EXACT_MAX_N, WILCOXON_MIN_N};
