//! Repeated seeded runs and the performance batch file.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{solve, Problem, SolverKind, SolverSuite};
use crate::error::{Error, Result};

/// Aggregate of `repeats` runs of one solver on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverPerformance {
    pub mean_fen: f64,
    pub success_fraction: f64,
    pub repeats: usize,
    /// Per-run FEN in run order; unsolved runs are censored at the budget.
    pub fens: Vec<u64>,
}

/// Measurements of all three solvers on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceRecord {
    pub instance_id: String,
    pub per_solver: BTreeMap<SolverKind, SolverPerformance>,
}

impl PerformanceRecord {
    /// Mean FEN in model output order (DE, ES, PSO).
    pub fn mean_fens(&self) -> [f64; 3] {
        SolverKind::ALL.map(|k| self.per_solver.get(&k).map_or(f64::NAN, |p| p.mean_fen))
    }
}

/// Runs `repeats` independent runs with seeds `seed + run_index`.
pub fn measure<P: Problem>(
    problem: &P,
    config: &super::SolverConfig,
    budget: u64,
    precision: f64,
    repeats: usize,
    seed: u64,
) -> Result<SolverPerformance> {
    if repeats == 0 {
        return Err(Error::config("repeats must be at least 1"));
    }
    let mut fens = Vec::with_capacity(repeats);
    let mut solved = 0usize;
    for run in 0..repeats {
        let r = solve(problem, config, budget, precision, seed.wrapping_add(run as u64))?;
        solved += usize::from(r.solved);
        fens.push(r.fen);
    }
    let mean_fen = fens.iter().map(|f| *f as f64).sum::<f64>() / repeats as f64;
    Ok(SolverPerformance { mean_fen, success_fraction: solved as f64 / repeats as f64, repeats, fens })
}

/// Measures every solver of the suite on one instance.
pub fn measure_all(
    instance: &crate::cop::CopInstance,
    suite: &SolverSuite,
    budget: u64,
    precision: f64,
    repeats: usize,
    seed: u64,
) -> Result<PerformanceRecord> {
    let mut per_solver = BTreeMap::new();
    for kind in SolverKind::ALL {
        per_solver.insert(kind, measure(instance, suite.get(kind), budget, precision, repeats, seed)?);
    }
    Ok(PerformanceRecord { instance_id: instance.id().to_string(), per_solver })
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct Row {
    instance_id: String,
    solver: SolverKind,
    repeats: usize,
    mean_fen: f64,
    success_fraction: f64,
    budget: u64,
    seed: u64,
}

/// Writes the batch file, rows ordered by instance id then solver.
pub fn write_performance_csv<W: Write>(records: &[PerformanceRecord], budget: u64, seed: u64, out: W) -> Result<()> {
    let mut sorted: Vec<&PerformanceRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    let mut w = csv::Writer::from_writer(out);
    for rec in sorted {
        for (kind, perf) in &rec.per_solver {
            w.serialize(Row {
                instance_id: rec.instance_id.clone(),
                solver: *kind,
                repeats: perf.repeats,
                mean_fen: perf.mean_fen,
                success_fraction: perf.success_fraction,
                budget,
                seed,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a batch file back. Per-run FENs are not stored, so `fens` is empty.
pub fn read_performance_csv<R: Read>(input: R) -> Result<Vec<PerformanceRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let mut records: Vec<PerformanceRecord> = Vec::new();
    for row in r.deserialize::<Row>() {
        let row = row?;
        let perf = SolverPerformance {
            mean_fen: row.mean_fen,
            success_fraction: row.success_fraction,
            repeats: row.repeats,
            fens: Vec::new(),
        };
        match records.last_mut() {
            Some(rec) if rec.instance_id == row.instance_id => {
                rec.per_solver.insert(row.solver, perf);
            }
            _ => records.push(PerformanceRecord {
                instance_id: row.instance_id,
                per_solver: BTreeMap::from([(row.solver, perf)]),
            }),
        }
    }
    Ok(records)
}
