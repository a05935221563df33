//! Success rates, transfer grids, input selection and reports.

mod metrics;
mod report;
mod select;
mod trend;

pub use metrics::{format_rate, parse_rate, sr_transfer, sr_whitebox, SourceSet, TransferReport};
pub use report::{assemble_report, attack_summary, sweep_curve_csv, AttackSummary, ClassRate, Report, ReportMeta};
pub use select::{margin, representative_inputs};
pub use trend::{mann_kendall, Trend};
