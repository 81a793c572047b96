//! The full experiment: evolve, label, train, study, benchmark, write reports.
//!
//! Seeds hang off the master seed: `["evolve", label, target, sense]` for
//! each evolver run, `["study"]` for the subset study and `["bench"]` for
//! the benchmark.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use log::info;

use super::bench::{run_benchmark, BenchmarkOutcome};
use super::report::{benchmark_markdown, study_markdown, write_benchmark_csv, write_study_csv};
use super::study::{run_subset_study, StudyOutcome};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::evolver::{evolve_with, slug, write_population, EvolvedPopulation, Sense, SubsetKind};
use crate::features::write_feature_table;
use crate::model::save_model;
use crate::rng::derive_seed;
use crate::solvers::{write_performance_csv, SolverKind};

/// Csv reports a pipeline run writes; byte-identical for equal seeds.
pub const REPORT_FILES: [&str; 4] = ["performance.csv", "features.csv", "study.csv", "benchmark.csv"];

pub fn population_dir_name(label: &str, target: SolverKind, sense: Sense) -> String {
    format!("{}-{target}-{sense}", slug(label))
}

/// One evolver run per base label, target solver and sense.
pub fn evolve_all(config: &ExperimentConfig, seed: u64) -> Result<Vec<EvolvedPopulation>> {
    let suite = config.suite();
    let mut out = Vec::new();
    for label in &config.experiment.evolver_bases {
        let spec = config.spec_for(label)?;
        for target in SolverKind::ALL {
            for sense in Sense::ALL {
                let start = Instant::now();
                let run_seed = derive_seed(seed, &[label.as_str(), target.as_str(), sense.as_str()]);
                let pop = evolve_with(&config.evolver_config(target, sense), &spec, &suite, run_seed)?;
                info!(
                    "evolved {label} {target} {sense}: front {} of {}, archive {} ({:.1}s)",
                    pop.front().count(),
                    pop.members.len(),
                    pop.archive.len(),
                    start.elapsed().as_secs_f64()
                );
                out.push(pop);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub populations: Vec<EvolvedPopulation>,
    pub study: StudyOutcome,
    /// Present when both PFR and RO models were trained.
    pub benchmark: Option<BenchmarkOutcome>,
}

/// Runs everything and writes into `out`: `config.resolved.toml`,
/// `populations/`, `performance.csv`, `features.csv`, `models/<kind>.model`,
/// `study.csv`/`.md` and, with PFR and RO models, `benchmark.csv`/`.md`.
pub fn run_pipeline(config: &ExperimentConfig, out: &Path) -> Result<PipelineOutcome> {
    config.validate()?;
    fs::create_dir_all(out)?;
    config.echo(out)?;
    let master = config.experiment.seed;

    let populations = evolve_all(config, derive_seed(master, &["evolve"]))?;
    for pop in &populations {
        write_population(&out.join("populations").join(population_dir_name(&pop.label, pop.target, pop.sense)), pop)?;
    }

    let start = Instant::now();
    let study = run_subset_study(config, &populations, derive_seed(master, &["study"]))?;
    info!("subset study done in {:.1}s", start.elapsed().as_secs_f64());

    let records: Vec<_> = study.labels.records.values().cloned().collect();
    write_performance_csv(&records, config.experiment.budget, master, BufWriter::new(File::create(out.join("performance.csv"))?))?;
    let features: Vec<_> = study.labels.features.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    write_feature_table(&features, BufWriter::new(File::create(out.join("features.csv"))?))?;
    fs::create_dir_all(out.join("models"))?;
    for (kind, model) in &study.models {
        save_model(model, &out.join("models").join(format!("{kind}.model")))?;
    }
    write_study_csv(&study.rows, BufWriter::new(File::create(out.join("study.csv"))?))?;
    fs::write(out.join("study.md"), study_markdown(&study.rows, study.skipped))?;

    let benchmark = match (study.model(SubsetKind::PFR), study.model(SubsetKind::RO)) {
        (Some(pfr), Some(ro)) => {
            let start = Instant::now();
            let outcome = run_benchmark(config, pfr, ro, derive_seed(master, &["bench"]))?;
            info!("benchmark done in {:.1}s", start.elapsed().as_secs_f64());
            write_benchmark_csv(&outcome.rows, BufWriter::new(File::create(out.join("benchmark.csv"))?))?;
            fs::write(out.join("benchmark.md"), benchmark_markdown(&outcome.rows, "PFR-PM", "RO-PM"))?;
            Some(outcome)
        }
        _ => None,
    };
    Ok(PipelineOutcome { populations, study, benchmark })
}
