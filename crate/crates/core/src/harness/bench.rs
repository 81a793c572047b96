//! Candidate-versus-baseline model comparison on fresh instances.

use log::info;

use super::report::BenchmarkRow;
use super::stats::welch_t_test;
use super::study::{actual_best, is_correct};
use crate::config::ExperimentConfig;
use crate::cop::random_instance;
use crate::error::{Error, Result};
use crate::features::extract_features;
use crate::model::{PredictionModel, PredictionResult};
use crate::rng::derive_seed;
use crate::solvers::{measure_all, SolverKind};

/// Per-instance outcome behind a [`BenchmarkRow`].
#[derive(Debug, Clone, PartialEq)]
pub struct BenchInstance {
    pub problem_label: String,
    pub instance_id: String,
    pub actual: [f64; 3],
    pub actual_best: SolverKind,
    pub prediction_a: PredictionResult,
    pub prediction_b: PredictionResult,
}

impl BenchInstance {
    fn deviation(p: &PredictionResult, actual: &[f64; 3]) -> f64 {
        (p.get(p.best) - actual[p.best.index()]).abs()
    }

    pub fn deviation_a(&self) -> f64 {
        Self::deviation(&self.prediction_a, &self.actual)
    }

    pub fn deviation_b(&self) -> f64 {
        Self::deviation(&self.prediction_b, &self.actual)
    }
}

/// Aggregates instances of one label into a row.
pub fn benchmark_row(label: &str, instances: &[BenchInstance]) -> Result<BenchmarkRow> {
    let dev_a: Vec<f64> = instances.iter().map(BenchInstance::deviation_a).collect();
    let dev_b: Vec<f64> = instances.iter().map(BenchInstance::deviation_b).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let test = welch_t_test(&dev_a, &dev_b)?;
    let row = BenchmarkRow {
        problem_label: label.to_string(),
        repeats: instances.len(),
        success_rate_b: instances.iter().filter(|i| is_correct(i.prediction_b.best, &i.actual)).count(),
        success_rate_a: instances.iter().filter(|i| is_correct(i.prediction_a.best, &i.actual)).count(),
        avg_fen_deviation_b: mean(&dev_b),
        avg_fen_deviation_a: mean(&dev_a),
        p_value: test.p_value,
        p_degenerate: test.degenerate,
    };
    assert!(row.success_rate_a <= row.repeats && row.success_rate_b <= row.repeats);
    Ok(row)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOutcome {
    pub rows: Vec<BenchmarkRow>,
    pub instances: Vec<BenchInstance>,
}

/// Compares `model_a` (candidate) with `model_b` (baseline) on
/// `bench_instances` fresh instances per configured label.
pub fn run_benchmark(config: &ExperimentConfig, model_a: &PredictionModel, model_b: &PredictionModel, seed: u64) -> Result<BenchmarkOutcome> {
    let settings = model_a.metadata.feature_settings;
    if settings != model_b.metadata.feature_settings {
        return Err(Error::config("benchmark models were trained with different feature settings"));
    }
    let e = &config.experiment;
    if e.bench_instances < 2 {
        return Err(Error::config("experiment.bench_instances must be at least 2 for the t-test"));
    }
    let suite = config.suite();
    let mut rows = Vec::new();
    let mut all = Vec::new();
    for label in &e.bench_labels {
        let spec = config.spec_for(label)?;
        let mut instances = Vec::with_capacity(e.bench_instances);
        for i in 0..e.bench_instances {
            let path = |stage: &str| derive_seed(seed, &[label.as_str(), stage, &i.to_string()]);
            let instance = random_instance(&spec, path("instance"))?;
            let actual = measure_all(&instance, &suite, e.budget, e.precision, e.repeats, path("truth"))?.mean_fens();
            let features = extract_features(&instance, settings.n_samples, settings.vicinity_radius_fraction, path("features"))?;
            instances.push(BenchInstance {
                problem_label: label.clone(),
                instance_id: instance.id().to_string(),
                actual,
                actual_best: actual_best(&actual),
                prediction_a: model_a.predict_features(&features, &suite)?,
                prediction_b: model_b.predict_features(&features, &suite)?,
            });
        }
        let row = benchmark_row(label, &instances)?;
        info!(
            "{label}: success {}/{} vs {}/{}, deviation {:.0} vs {:.0}, p = {:.3}",
            row.success_rate_a, row.repeats, row.success_rate_b, row.repeats, row.avg_fen_deviation_a, row.avg_fen_deviation_b, row.p_value
        );
        rows.push(row);
        all.extend(instances);
    }
    Ok(BenchmarkOutcome { rows, instances: all })
}
