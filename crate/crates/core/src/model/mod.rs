//! Performance predictor: an MLP mapping constraint features plus the
//! solver-parameter encoding to the expected FEN of each solver.
//!
//! Inputs are z-scored with statistics fitted on the training set. Targets
//! are FEN divided by the budget, then z-scored per solver.

mod file;
mod lm;
mod mlp;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

pub use file::{load_model, model_from_bytes, model_to_bytes, save_model, MODEL_FORMAT_VERSION, MODEL_MAGIC};
pub use lm::{lm_step, sse, train_lm, LmConfig, StopReason, TrainReport, TrainingExample};
pub use mlp::Mlp;

use crate::cop::CopInstance;
use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureSettings, FeatureVector, NormStats, FEATURE_LEN};
use crate::rng::derive_seed;
use crate::solvers::{SolverKind, SolverSuite, SOLVER_ENCODING_LEN};

pub const HIDDEN_SIZES: [usize; 2] = [10, 10];
pub const MODEL_INPUT_LEN: usize = FEATURE_LEN + 3 * SOLVER_ENCODING_LEN;

/// Raw model input: the feature vector followed by the suite encoding.
pub fn model_input(features: &FeatureVector, suite: &SolverSuite) -> Vec<f64> {
    let mut x = features.to_array().to_vec();
    x.extend(suite.encode());
    debug_assert_eq!(x.len(), MODEL_INPUT_LEN);
    x
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    /// Training subset label (`EP`, `PF`, `RO`, `PFR` or free text).
    pub subset: String,
    pub seed: u64,
    pub epochs: usize,
    pub final_sse: f64,
    /// FEN budget used to scale the targets.
    pub budget: u64,
    pub feature_settings: FeatureSettings,
    pub independent_nets: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionModel {
    /// One 3-output net, or one 1-output net per solver.
    pub nets: Vec<Mlp>,
    pub input_norm: NormStats,
    pub output_norm: NormStats,
    pub metadata: ModelMetadata,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionResult {
    /// Predicted FEN in evaluations, indexed DE, ES, PSO.
    pub predicted_fen: [f64; 3],
    pub best: SolverKind,
}

impl PredictionResult {
    /// Picks the argmin; ties go to the earlier kind in DE, ES, PSO order.
    pub fn from_fens(predicted_fen: [f64; 3]) -> Self {
        let mut best = SolverKind::DE;
        for kind in SolverKind::ALL {
            if predicted_fen[kind.index()].total_cmp(&predicted_fen[best.index()]) == Ordering::Less {
                best = kind;
            }
        }
        Self { predicted_fen, best }
    }

    pub fn get(&self, kind: SolverKind) -> f64 {
        self.predicted_fen[kind.index()]
    }
}

/// One labelled instance: its features and measured mean FEN per solver.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledExample {
    pub features: FeatureVector,
    pub mean_fen: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub lm: LmConfig,
    pub independent_nets: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { lm: LmConfig::default(), independent_nets: false }
    }
}

impl PredictionModel {
    pub fn n_inputs(&self) -> usize {
        self.input_norm.len()
    }

    /// Checks the shape invariants a usable model must satisfy.
    pub fn validate(&self) -> Result<()> {
        if self.input_norm.is_empty() || self.output_norm.is_empty() {
            return Err(Error::Model("normalization statistics are missing".into()));
        }
        if self.output_norm.len() != 3 {
            return Err(Error::Model(format!("output normalization has {} fields, expected 3", self.output_norm.len())));
        }
        let outputs = match self.nets.len() {
            1 => 3,
            3 => 1,
            n => return Err(Error::Model(format!("expected 1 or 3 networks, found {n}"))),
        };
        for net in &self.nets {
            let sizes = net.sizes();
            if sizes.len() != 4 || sizes[1..3] != HIDDEN_SIZES || sizes[0] != self.n_inputs() || sizes[3] != outputs {
                return Err(Error::Model(format!("network shape {sizes:?} does not match the model")));
            }
        }
        if (self.nets.len() == 3) != self.metadata.independent_nets {
            return Err(Error::Model("network count disagrees with metadata".into()));
        }
        if self.metadata.budget == 0 {
            return Err(Error::Model("budget in metadata is zero".into()));
        }
        Ok(())
    }

    /// Forward pass on an already normalized input; returns normalized outputs.
    pub fn forward_normalized(&self, z: &[f64]) -> Result<[f64; 3]> {
        let mut out = [0.0; 3];
        if self.nets.len() == 1 {
            out.copy_from_slice(&self.nets[0].forward(z)?);
        } else {
            for (o, net) in out.iter_mut().zip(&self.nets) {
                *o = net.forward(z)?[0];
            }
        }
        Ok(out)
    }

    /// Prediction from a raw (unnormalized) model input.
    pub fn predict_input(&self, raw: &[f64]) -> Result<PredictionResult> {
        let z = self.input_norm.apply(raw)?;
        let y = self.output_norm.invert(&self.forward_normalized(&z)?)?;
        let budget = self.metadata.budget as f64;
        let mut fens = [0.0; 3];
        for (f, v) in fens.iter_mut().zip(&y) {
            *f = v * budget;
        }
        if fens.iter().any(|f| !f.is_finite()) {
            return Err(Error::Numeric("model produced a non-finite prediction".into()));
        }
        Ok(PredictionResult::from_fens(fens))
    }

    pub fn predict_features(&self, features: &FeatureVector, suite: &SolverSuite) -> Result<PredictionResult> {
        self.predict_input(&model_input(features, suite))
    }

    /// Extracts features with the model's own settings and predicts.
    pub fn predict(&self, instance: &CopInstance, suite: &SolverSuite, feature_seed: u64) -> Result<PredictionResult> {
        let s = self.metadata.feature_settings;
        let features = extract_features(instance, s.n_samples, s.vicinity_radius_fraction, feature_seed)?;
        self.predict_features(&features, suite)
    }
}

/// Fits normalization and trains the network(s) on `examples`.
pub fn train_model(
    examples: &[LabelledExample],
    suite: &SolverSuite,
    budget: u64,
    feature_settings: FeatureSettings,
    subset: &str,
    config: &ModelConfig,
) -> Result<(PredictionModel, Vec<TrainReport>)> {
    if examples.is_empty() {
        return Err(Error::contract("cannot train on an empty example set"));
    }
    if budget == 0 {
        return Err(Error::config("budget must be positive"));
    }
    let raw_in: Vec<Vec<f64>> = examples.iter().map(|e| model_input(&e.features, suite)).collect();
    let raw_out: Vec<Vec<f64>> =
        examples.iter().map(|e| e.mean_fen.iter().map(|f| f / budget as f64).collect()).collect();
    let input_norm = NormStats::fit(&raw_in)?;
    let output_norm = NormStats::fit(&raw_out)?;
    let inputs: Vec<Vec<f64>> = raw_in.iter().map(|r| input_norm.apply(r)).collect::<Result<_>>()?;
    let targets: Vec<Vec<f64>> = raw_out.iter().map(|r| output_norm.apply(r)).collect::<Result<_>>()?;

    let n_in = MODEL_INPUT_LEN;
    let mut nets = Vec::new();
    let mut reports = Vec::new();
    if config.independent_nets {
        for kind in SolverKind::ALL {
            let data: Vec<TrainingExample> = inputs
                .iter()
                .zip(&targets)
                .map(|(x, t)| TrainingExample { input: x.clone(), target: vec![t[kind.index()]] })
                .collect();
            let lm = LmConfig { seed: derive_seed(config.lm.seed, &["net", kind.as_str()]), ..config.lm.clone() };
            let (net, report) = train_lm(&data, &[n_in, HIDDEN_SIZES[0], HIDDEN_SIZES[1], 1], &lm)?;
            nets.push(net);
            reports.push(report);
        }
    } else {
        let data: Vec<TrainingExample> = inputs
            .iter()
            .zip(&targets)
            .map(|(x, t)| TrainingExample { input: x.clone(), target: t.clone() })
            .collect();
        let (net, report) = train_lm(&data, &[n_in, HIDDEN_SIZES[0], HIDDEN_SIZES[1], 3], &config.lm)?;
        nets.push(net);
        reports.push(report);
    }

    let metadata = ModelMetadata {
        subset: subset.to_string(),
        seed: config.lm.seed,
        epochs: reports.iter().map(|r| r.epochs).max().unwrap_or(0),
        final_sse: reports.iter().map(|r| r.train_sse).sum(),
        budget,
        feature_settings,
        independent_nets: config.independent_nets,
    };
    let model = PredictionModel { nets, input_norm, output_norm, metadata };
    model.validate()?;
    Ok((model, reports))
}
