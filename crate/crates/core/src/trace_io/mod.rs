//! Trace ingestion and report emission. Column layouts are documented in
//! the file formats chapter of the guide.

mod prices;
mod report;
pub mod synth;
mod workload;

pub use prices::{load_price_traces, price_traces_from_reader, write_price_traces, PriceTraces};
pub use report::{
    emit_report, summary_row, write_cost, write_decisions, write_response_times, write_summary, DecisionRecord,
    ExperimentResult, GroupSummary, PlanSummary, ResponseHistogram, SecondStats, Totals, HISTOGRAM_BIN, HISTOGRAM_MAX,
    SUMMARY_HEADER,
};
pub use workload::{ArrivalCursor, WorkloadTrace};
