//! Study and benchmark tables as csv (raw values) and markdown (FEN in K units).

use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::solvers::SolverKind;

/// One problem label of the model comparison. Model A is the candidate
/// (PFR-trained), model B the baseline (RO-trained).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub problem_label: String,
    pub repeats: usize,
    pub success_rate_b: usize,
    pub success_rate_a: usize,
    pub avg_fen_deviation_b: f64,
    pub avg_fen_deviation_a: f64,
    pub p_value: f64,
    /// Both deviation samples were constant; `p_value` is 1 by convention.
    pub p_degenerate: bool,
}

/// One test instance evaluated by one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub model: String,
    pub instance: String,
    pub instance_id: String,
    pub predicted_alg: SolverKind,
    pub actual_alg: SolverKind,
    /// True when the predicted solver is not among the measured best.
    pub error: bool,
    pub predicted_de: f64,
    pub actual_de: f64,
    pub predicted_es: f64,
    pub actual_es: f64,
    pub predicted_pso: f64,
    pub actual_pso: f64,
}

impl StudyRow {
    pub fn predicted(&self, kind: SolverKind) -> f64 {
        [self.predicted_de, self.predicted_es, self.predicted_pso][kind.index()]
    }

    pub fn actual(&self, kind: SolverKind) -> f64 {
        [self.actual_de, self.actual_es, self.actual_pso][kind.index()]
    }

    /// Predicted minus actual, sign kept.
    pub fn fen_error(&self, kind: SolverKind) -> f64 {
        self.predicted(kind) - self.actual(kind)
    }
}

/// `83200` becomes `83.2K`.
pub fn format_k(v: f64) -> String {
    format!("{:.1}K", v / 1000.0)
}

/// Like [`format_k`] with an explicit sign: `-3.1K`, `+2.2K`.
pub fn format_k_signed(v: f64) -> String {
    format!("{:+.1}K", v / 1000.0)
}

fn write_rows<T: Serialize, W: Write>(rows: &[T], header: &[&str], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>, R: Read>(input: R) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

pub const BENCHMARK_CSV_HEADER: [&str; 8] = [
    "problem_label",
    "repeats",
    "success_rate_b",
    "success_rate_a",
    "avg_fen_deviation_b",
    "avg_fen_deviation_a",
    "p_value",
    "p_degenerate",
];

pub const STUDY_CSV_HEADER: [&str; 12] = [
    "model",
    "instance",
    "instance_id",
    "predicted_alg",
    "actual_alg",
    "error",
    "predicted_de",
    "actual_de",
    "predicted_es",
    "actual_es",
    "predicted_pso",
    "actual_pso",
];

pub fn write_benchmark_csv<W: Write>(rows: &[BenchmarkRow], out: W) -> Result<()> {
    write_rows(rows, &BENCHMARK_CSV_HEADER, out)
}

pub fn read_benchmark_csv<R: Read>(input: R) -> Result<Vec<BenchmarkRow>> {
    read_rows(input)
}

pub fn write_study_csv<W: Write>(rows: &[StudyRow], out: W) -> Result<()> {
    write_rows(rows, &STUDY_CSV_HEADER, out)
}

pub fn read_study_csv<R: Read>(input: R) -> Result<Vec<StudyRow>> {
    read_rows(input)
}

/// Markdown comparison table; `name_a`/`name_b` label the two models.
pub fn benchmark_markdown(rows: &[BenchmarkRow], name_a: &str, name_b: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "| Problem | Success Rate {name_b} | Success Rate {name_a} | Average deviation of FEN for {name_b} | Average deviation of FEN for {name_a} | P value |"
    );
    s.push_str("|---|---|---|---|---|---|\n");
    for r in rows {
        let flag = if r.p_degenerate { " (constant)" } else { "" };
        let _ = writeln!(
            s,
            "| {} | {}/{} | {}/{} | {} | {} | {:.3}{flag} |",
            r.problem_label,
            r.success_rate_b,
            r.repeats,
            r.success_rate_a,
            r.repeats,
            format_k(r.avg_fen_deviation_b),
            format_k(r.avg_fen_deviation_a),
            r.p_value
        );
    }
    s
}

/// Markdown per-instance table. `skipped` instances lacked ground truth.
pub fn study_markdown(rows: &[StudyRow], skipped: usize) -> String {
    let mut s = String::new();
    s.push_str("| Model | Instance | Predicted alg. | Actual alg. | Error |");
    for k in SolverKind::ALL {
        let _ = write!(s, " Predicted FEN for {k} | Actual FEN for {k} | Error for {k} |");
    }
    s.push('\n');
    s.push_str(&"|---".repeat(5 + 9));
    s.push_str("|\n");
    for r in rows {
        let _ = write!(
            s,
            "| {} | {} | {} | {} | {} |",
            r.model,
            r.instance,
            r.predicted_alg,
            r.actual_alg,
            if r.error { "YES" } else { "NO" }
        );
        for k in SolverKind::ALL {
            let _ = write!(s, " {} | {} | {} |", format_k(r.predicted(k)), format_k(r.actual(k)), format_k_signed(r.fen_error(k)));
        }
        s.push('\n');
    }
    if skipped > 0 {
        let _ = writeln!(s, "\n{skipped} test instance(s) skipped: no ground-truth measurement.");
    }
    s
}
