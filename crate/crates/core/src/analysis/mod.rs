//! Deviation measures, the debt-aversion index and the statistics used to
//! compare them across treatments, orderings and countries.

mod dataset;
mod debt_aversion;
mod descriptive;
mod effect;
mod kde;
mod measures;
mod nonparam;
mod ols;
pub mod tables;

pub use dataset::{AnalysisDataset, AnalysisRow, Frame, ParticipantInfo, ParticipantRow, PeriodRow};
pub use debt_aversion::{compute_da, learning_deltas, DebtAversionIndex, LearningDeltas, DA_DEGENERATE_BELOW};
pub use descriptive::{describe, median, percentile_nearest_rank, quantile_linear, Summary};
pub use effect::cohens_d;
pub use kde::{kernel_density, padded_grid, silverman_bandwidth};
pub use measures::{compute_measures, DeviationMeasures, Measures};
pub use nonparam::{mann_whitney_u, mann_whitney_u_normal, midranks, wilcoxon_signed_rank, MannWhitney, PMethod, Wilcoxon, EXACT_MAX_N};
pub use ols::{ols_clustered, ols_clustered_matrix, RegressionResult};
pub use tables::{build_report, ReportOptions, ReportRequest, Table};
