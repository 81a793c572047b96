//! Experiment harness: ground truth, the training-subset study, the model
//! benchmark, significance tests and report files.

mod bench;
mod pipeline;
mod report;
mod stats;
mod study;

pub use bench::{benchmark_row, run_benchmark, BenchInstance, BenchmarkOutcome};
pub use pipeline::{evolve_all, population_dir_name, run_pipeline, PipelineOutcome, REPORT_FILES};
pub use report::{
    benchmark_markdown, format_k, format_k_signed, read_benchmark_csv, read_study_csv, study_markdown, write_benchmark_csv,
    write_study_csv, BenchmarkRow, StudyRow, BENCHMARK_CSV_HEADER, STUDY_CSV_HEADER,
};
pub use stats::{t_test_two_tail, welch_t_test, TTest};
pub use study::{
    actual_best, is_correct, run_subset_study, study_rows, study_test_set, LabelStore, StudyOutcome, TestInstance,
    TIE_TOLERANCE,
};
