//! Ground-truth labels and the training-subset comparison.

use std::collections::{BTreeMap, HashSet};

use log::{info, warn};

use super::report::StudyRow;
use crate::config::ExperimentConfig;
use crate::cop::{random_instance, CopInstance};
use crate::error::Result;
use crate::evolver::{select_subset, without_ids, EvolvedPopulation, SubsetKind};
use crate::features::{extract_features, FeatureVector};
use crate::model::{train_model, LabelledExample, PredictionModel, PredictionResult, TrainReport};
use crate::rng::derive_seed;
use crate::solvers::{measure_all, PerformanceRecord, SolverKind, SolverSuite};

/// Relative slack within which measured means count as tied for best.
pub const TIE_TOLERANCE: f64 = 0.02;

/// Measured best solver (ties: DE, then ES, then PSO).
pub fn actual_best(mean_fen: &[f64; 3]) -> SolverKind {
    PredictionResult::from_fens(*mean_fen).best
}

/// True when `predicted` is within [`TIE_TOLERANCE`] of the measured minimum.
pub fn is_correct(predicted: SolverKind, mean_fen: &[f64; 3]) -> bool {
    let min = mean_fen.iter().copied().fold(f64::INFINITY, f64::min);
    mean_fen[predicted.index()] <= min * (1.0 + TIE_TOLERANCE)
}

/// Measured performance and features per instance id, computed once each.
#[derive(Debug, Clone, Default)]
pub struct LabelStore {
    pub records: BTreeMap<String, PerformanceRecord>,
    pub features: BTreeMap<String, FeatureVector>,
}

impl LabelStore {
    /// Measures and extracts features for `instance` unless already known.
    /// Seeds depend only on `seed` and the instance id.
    pub fn ensure(&mut self, instance: &CopInstance, config: &ExperimentConfig, suite: &SolverSuite, seed: u64) -> Result<()> {
        let id = instance.id();
        if !self.records.contains_key(id) {
            let e = &config.experiment;
            let rec = measure_all(instance, suite, e.budget, e.precision, e.repeats, derive_seed(seed, &["truth", id]))?;
            self.records.insert(id.to_string(), rec);
        }
        if !self.features.contains_key(id) {
            let s = &config.features;
            let f = extract_features(instance, s.n_samples, s.vicinity_radius_fraction, derive_seed(seed, &["features", id]))?;
            self.features.insert(id.to_string(), f);
        }
        Ok(())
    }

    pub fn example(&self, id: &str) -> Option<LabelledExample> {
        Some(LabelledExample { features: self.features.get(id)?.clone(), mean_fen: self.records.get(id)?.mean_fens() })
    }
}

#[derive(Debug, Clone)]
pub struct TestInstance {
    /// Display name such as `DE hard (Sphere, 2lin)`.
    pub name: String,
    pub instance: CopInstance,
}

/// Extreme member of every evolver run plus fresh random instances per base.
pub fn study_test_set(config: &ExperimentConfig, populations: &[EvolvedPopulation], seed: u64) -> Result<Vec<TestInstance>> {
    let mut out = Vec::new();
    for pop in populations {
        if let Some(m) = pop.extreme() {
            out.push(TestInstance { name: format!("{} {} ({})", pop.target, pop.sense, pop.label), instance: m.instance.clone() });
        }
    }
    for label in &config.experiment.evolver_bases {
        let spec = config.spec_for(label)?;
        for i in 0..config.experiment.study_random_instances {
            let instance = random_instance(&spec, derive_seed(seed, &["study-random".to_string(), label.clone(), i.to_string()]))?;
            out.push(TestInstance { name: format!("random {} ({label})", i + 1), instance });
        }
    }
    Ok(out)
}

/// Rows for one model over the test set. Tests without labels are skipped and counted.
pub fn study_rows(model_name: &str, model: &PredictionModel, tests: &[TestInstance], labels: &LabelStore, suite: &SolverSuite) -> Result<(Vec<StudyRow>, usize)> {
    let mut rows = Vec::new();
    let mut skipped = 0;
    for t in tests {
        let Some(ex) = labels.example(t.instance.id()) else {
            warn!("no ground truth for test instance {}; skipping", t.instance.id());
            skipped += 1;
            continue;
        };
        let p = model.predict_features(&ex.features, suite)?;
        let a = ex.mean_fen;
        rows.push(StudyRow {
            model: model_name.to_string(),
            instance: t.name.clone(),
            instance_id: t.instance.id().to_string(),
            predicted_alg: p.best,
            actual_alg: actual_best(&a),
            error: !is_correct(p.best, &a),
            predicted_de: p.predicted_fen[0],
            actual_de: a[0],
            predicted_es: p.predicted_fen[1],
            actual_es: a[1],
            predicted_pso: p.predicted_fen[2],
            actual_pso: a[2],
        });
    }
    Ok((rows, skipped))
}

#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub tests: Vec<TestInstance>,
    pub rows: Vec<StudyRow>,
    pub skipped: usize,
    pub models: Vec<(SubsetKind, PredictionModel)>,
    pub train_reports: Vec<(SubsetKind, Vec<TrainReport>)>,
    pub labels: LabelStore,
}

impl StudyOutcome {
    pub fn model(&self, kind: SubsetKind) -> Option<&PredictionModel> {
        self.models.iter().find(|(k, _)| *k == kind).map(|(_, m)| m)
    }
}

/// Trains one model per configured subset kind on instances drawn from
/// `populations` (test instances excluded) and evaluates all of them on a
/// shared test set.
pub fn run_subset_study(config: &ExperimentConfig, populations: &[EvolvedPopulation], seed: u64) -> Result<StudyOutcome> {
    let suite = config.suite();
    let truth_seed = derive_seed(seed, &["labels"]);
    let tests = study_test_set(config, populations, derive_seed(seed, &["tests"]))?;
    let mut labels = LabelStore::default();
    for t in &tests {
        labels.ensure(&t.instance, config, &suite, truth_seed)?;
    }
    let exclude: HashSet<String> = tests.iter().map(|t| t.instance.id().to_string()).collect();
    let pools = without_ids(populations, &exclude);

    let mut rows = Vec::new();
    let mut skipped = 0;
    let mut models = Vec::new();
    let mut train_reports = Vec::new();
    for kind in &config.experiment.subset_kinds {
        let selected = select_subset(&pools, *kind, config.training_sizes.get(*kind), derive_seed(seed, &["select"]))?;
        let mut examples = Vec::with_capacity(selected.len());
        for s in &selected {
            labels.ensure(&s.member.instance, config, &suite, truth_seed)?;
            examples.extend(labels.example(s.member.instance.id()));
        }
        info!("training {kind} model on {} instances", examples.len());
        let model_config = config.model_config(derive_seed(seed, &["train", kind.as_str()]));
        let (model, reports) =
            train_model(&examples, &suite, config.experiment.budget, config.features, kind.as_str(), &model_config)?;
        let (r, s) = study_rows(kind.as_str(), &model, &tests, &labels, &suite)?;
        rows.extend(r);
        skipped += s;
        models.push((*kind, model));
        train_reports.push((*kind, reports));
    }
    Ok(StudyOutcome { tests, rows, skipped, models, train_reports, labels })
}
