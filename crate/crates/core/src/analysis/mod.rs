//! Report handling, cross-metric correlation, synthetic distortions and
//! translation registration.

mod correlation;
mod distort;
mod register;
mod report;

pub use correlation::{
    average_ranks, correlation_matrix, scatter_csv, scatter_export, spearman, CorrelationMatrix,
};
pub use distort::{crop_border, distort, translate, Distortion, Shift};
pub use register::register_translation;
pub use report::{
    format_value, parse_value, value_from_json, value_to_json, MetricReport, MetricSummary,
    ReportRow, PSNR,
};
