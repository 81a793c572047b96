//! Experiment configuration: profile presets, layered TOML loading and the
//! resolved-config echo.
//!
//! Resolution order is preset < file < `key=value` overrides. The preset is
//! chosen by an `experiment.profile` override, else the file's
//! `experiment.profile`, else the caller's default.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::cop::{GeneratorSpec, ObjectiveTag};
use crate::error::{Error, Result};
use crate::evolver::{EvolverConfig, Sense, SubsetKind};
use crate::features::FeatureSettings;
use crate::model::{LmConfig, ModelConfig};
use crate::solvers::{SolverKind, SolverSuite};

pub use crate::rng::derive_seed;

/// File name of the echoed configuration inside an output directory.
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileName {
    Desk,
    Full,
}

impl ProfileName {
    pub fn as_str(self) -> &'static str {
        match self {
            ProfileName::Desk => "desk",
            ProfileName::Full => "full",
        }
    }
}

impl fmt::Display for ProfileName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProfileName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "desk" => Ok(ProfileName::Desk),
            "full" => Ok(ProfileName::Full),
            other => Err(Error::config(format!("unknown profile `{other}` (expected desk or full)"))),
        }
    }
}

/// Cost-bearing settings that differ between the presets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profile {
    pub name: ProfileName,
    pub dimension: usize,
    pub budget: u64,
    pub repeats: usize,
    pub population_size: usize,
    pub generations: usize,
    pub n_samples: usize,
    pub bench_instances: usize,
    /// Training-set size for PF, RO and PFR; EP uses half.
    pub training_size: usize,
}

impl Profile {
    pub fn desk() -> Self {
        Self {
            name: ProfileName::Desk,
            dimension: 5,
            budget: 30_000,
            repeats: 5,
            population_size: 40,
            generations: 25,
            n_samples: 5_000,
            bench_instances: 30,
            training_size: 300,
        }
    }

    pub fn full() -> Self {
        Self {
            name: ProfileName::Full,
            dimension: 10,
            budget: 200_000,
            repeats: 30,
            population_size: 100,
            generations: 100,
            n_samples: 10_000,
            bench_instances: 30,
            training_size: 3_000,
        }
    }

    pub fn get(name: ProfileName) -> Self {
        match name {
            ProfileName::Desk => Self::desk(),
            ProfileName::Full => Self::full(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub profile: ProfileName,
    /// Master seed; must fit in a signed 64-bit integer (TOML integers are signed).
    pub seed: u64,
    pub dimension: usize,
    pub budget: u64,
    pub precision: f64,
    /// Runs per solver when measuring ground truth.
    pub repeats: usize,
    /// Problem labels the evolver starts from, e.g. `Sphere, 2lin`.
    pub evolver_bases: Vec<String>,
    pub subset_kinds: Vec<SubsetKind>,
    /// Fresh random instances per evolver base added to the study test set.
    pub study_random_instances: usize,
    pub bench_labels: Vec<String>,
    /// Fresh test instances per benchmark label.
    pub bench_instances: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSizes {
    pub ep: usize,
    pub pf: usize,
    pub ro: usize,
    pub pfr: usize,
}

impl TrainingSizes {
    pub fn get(&self, kind: SubsetKind) -> usize {
        match kind {
            SubsetKind::EP => self.ep,
            SubsetKind::PF => self.pf,
            SubsetKind::RO => self.ro,
            SubsetKind::PFR => self.pfr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolverSection {
    pub population_size: usize,
    pub generations: usize,
    pub inner_repeats: usize,
    pub de_scale: f64,
    pub de_crossover: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub lambda_max: f64,
    pub max_epochs: usize,
    pub sse_tol: f64,
    pub patience: usize,
    pub validation_fraction: f64,
    pub independent_nets: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub training_sizes: TrainingSizes,
    pub evolver: EvolverSection,
    pub features: FeatureSettings,
    pub model: ModelSection,
}

pub const DEFAULT_BENCH_LABELS: [&str; 6] =
    ["Sphere, 2lin", "Sphere, 2Quad", "Ackley, 2lin", "Ackley, 2Quad", "Rosenbrock, 2lin", "Rosenbrock, 2Quad"];

impl ExperimentConfig {
    pub fn preset(name: ProfileName) -> Self {
        let p = Profile::get(name);
        let lm = LmConfig::default();
        Self {
            experiment: ExperimentSection {
                profile: name,
                seed: 1,
                dimension: p.dimension,
                budget: p.budget,
                precision: crate::solvers::DEFAULT_TARGET_PRECISION,
                repeats: p.repeats,
                evolver_bases: vec!["Sphere, 2lin".into(), "Sphere, 2Quad".into()],
                subset_kinds: SubsetKind::ALL.to_vec(),
                study_random_instances: 3,
                bench_labels: DEFAULT_BENCH_LABELS.iter().map(|s| s.to_string()).collect(),
                bench_instances: p.bench_instances,
            },
            training_sizes: TrainingSizes {
                ep: p.training_size / 2,
                pf: p.training_size,
                ro: p.training_size,
                pfr: p.training_size,
            },
            evolver: EvolverSection {
                population_size: p.population_size,
                generations: p.generations,
                inner_repeats: 3,
                de_scale: 0.5,
                de_crossover: 0.9,
            },
            features: FeatureSettings { n_samples: p.n_samples, ..FeatureSettings::default() },
            model: ModelSection {
                lambda0: lm.lambda0,
                lambda_up: lm.lambda_up,
                lambda_down: lm.lambda_down,
                lambda_max: lm.lambda_max,
                max_epochs: lm.max_epochs,
                sse_tol: lm.sse_tol,
                patience: lm.patience,
                validation_fraction: lm.validation_fraction,
                independent_nets: false,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.seed > i64::MAX as u64 {
            return Err(Error::config("experiment.seed must be at most 2^63 - 1"));
        }
        if e.repeats < 2 {
            return Err(Error::config("experiment.repeats must be at least 2"));
        }
        if e.budget == 0 || e.dimension == 0 {
            return Err(Error::config("experiment.budget and experiment.dimension must be positive"));
        }
        if !(e.precision > 0.0 && e.precision.is_finite()) {
            return Err(Error::config("experiment.precision must be a positive number"));
        }
        if e.evolver_bases.is_empty() {
            return Err(Error::config("experiment.evolver_bases must name at least one problem"));
        }
        for label in e.evolver_bases.iter().chain(&e.bench_labels) {
            self.spec_for(label)?;
        }
        for kind in &e.subset_kinds {
            if self.training_sizes.get(*kind) == 0 {
                return Err(Error::config(format!("training_sizes.{} must be positive", kind.as_str().to_lowercase())));
            }
        }
        self.features.validate()?;
        self.lm_config(0).validate()?;
        for target in SolverKind::ALL {
            self.evolver_config(target, Sense::Hard).validate()?;
        }
        self.suite().validate()
    }

    /// Generator spec for a problem label at the configured dimension.
    pub fn spec_for(&self, label: &str) -> Result<GeneratorSpec> {
        let spec = GeneratorSpec::new(ObjectiveTag::Sphere, self.experiment.dimension).with_label(label)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn suite(&self) -> SolverSuite {
        SolverSuite::defaults(self.experiment.dimension)
    }

    pub fn evolver_config(&self, target: SolverKind, sense: Sense) -> EvolverConfig {
        EvolverConfig {
            population_size: self.evolver.population_size,
            generations: self.evolver.generations,
            inner_repeats: self.evolver.inner_repeats,
            de_scale: self.evolver.de_scale,
            de_crossover: self.evolver.de_crossover,
            inner_budget: self.experiment.budget,
            precision: self.experiment.precision,
            ..EvolverConfig::new(target, sense)
        }
    }

    pub fn lm_config(&self, seed: u64) -> LmConfig {
        let m = &self.model;
        LmConfig {
            lambda0: m.lambda0,
            lambda_up: m.lambda_up,
            lambda_down: m.lambda_down,
            lambda_max: m.lambda_max,
            max_epochs: m.max_epochs,
            sse_tol: m.sse_tol,
            patience: m.patience,
            validation_fraction: m.validation_fraction,
            seed,
        }
    }

    pub fn model_config(&self, seed: u64) -> ModelConfig {
        ModelConfig { lm: self.lm_config(seed), independent_nets: self.model.independent_nets }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("cannot serialize configuration: {e}")))
    }

    /// Writes the resolved configuration to `dir/config.resolved.toml`.
    pub fn echo(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(RESOLVED_CONFIG_FILE), self.to_toml()?)?;
        Ok(())
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "a string",
        Value::Integer(_) => "an integer",
        Value::Float(_) => "a float",
        Value::Boolean(_) => "a boolean",
        Value::Datetime(_) => "a datetime",
        Value::Array(_) => "an array",
        Value::Table(_) => "a table",
    }
}

/// `value` coerced to the type of `template`, or a type-mismatch error.
fn coerce(key: &str, template: &Value, value: Value) -> Result<Value> {
    match (template, value) {
        (Value::Float(_), Value::Integer(i)) => Ok(Value::Float(i as f64)),
        (t, v) if std::mem::discriminant(t) == std::mem::discriminant(&v) => Ok(v),
        (t, v) => Err(Error::config(format!("key `{key}` expects {}, got {}", type_name(t), type_name(&v)))),
    }
}

/// Every leaf key as `section.key`.
fn leaf_keys(table: &Table) -> Vec<String> {
    let mut out = Vec::new();
    for (section, v) in table {
        match v {
            Value::Table(inner) => out.extend(inner.keys().map(|k| format!("{section}.{k}"))),
            _ => out.push(section.clone()),
        }
    }
    out
}

fn unknown_key(key: &str, known: &Table) -> Error {
    let bare = key.rsplit('.').next().unwrap_or(key);
    let best = leaf_keys(known)
        .into_iter()
        .map(|full| {
            let leaf = full.rsplit('.').next().unwrap_or(&full).to_string();
            let d = strsim::levenshtein(bare, &leaf).min(strsim::levenshtein(key, &full));
            (d, leaf, full)
        })
        .min();
    match best {
        Some((d, leaf, full)) if d <= 3 => {
            let name = if bare == key { leaf } else { full };
            Error::config(format!("unknown key `{key}`; did you mean `{name}`?"))
        }
        _ => Error::config(format!("unknown key `{key}`")),
    }
}

fn merge(base: &mut Table, over: Table, prefix: &str, known: &Table) -> Result<()> {
    for (k, v) in over {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        let Some(slot) = base.get_mut(&k) else { return Err(unknown_key(&path, known)) };
        match (slot, v) {
            (Value::Table(inner), Value::Table(o)) => merge(inner, o, &path, known)?,
            (Value::Table(_), other) => {
                return Err(Error::config(format!("key `{path}` is a section, got {}", type_name(&other))))
            }
            (slot, v) => *slot = coerce(&path, slot, v)?,
        }
    }
    Ok(())
}

/// Resolves `key` (dotted or bare) to `(section, key)` within `table`.
fn resolve_key(key: &str, table: &Table) -> Result<(String, String)> {
    if let Some((section, leaf)) = key.split_once('.') {
        let found = table.get(section).and_then(Value::as_table).is_some_and(|t| t.contains_key(leaf));
        return if found { Ok((section.to_string(), leaf.to_string())) } else { Err(unknown_key(key, table)) };
    }
    let matches: Vec<&String> =
        table.iter().filter(|(_, v)| v.as_table().is_some_and(|t| t.contains_key(key))).map(|(s, _)| s).collect();
    match matches.as_slice() {
        [one] => Ok(((*one).clone(), key.to_string())),
        [] => Err(unknown_key(key, table)),
        many => {
            let names: Vec<String> = many.iter().map(|s| format!("{s}.{key}")).collect();
            Err(Error::config(format!("key `{key}` is ambiguous; use one of {}", names.join(", "))))
        }
    }
}

/// Parses an override value as a TOML literal; unparsable text becomes a string.
fn parse_value(text: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {text}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(text.to_string()))
}

fn split_override(s: &str) -> Result<(&str, &str)> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| Error::config(format!("override `{s}` is not of the form key=value")))
}

fn profile_override(overrides: &[String]) -> Result<Option<ProfileName>> {
    let mut out = None;
    for o in overrides {
        let (k, v) = split_override(o)?;
        if k == "profile" || k == "experiment.profile" {
            out = Some(v.trim_matches('"').parse()?);
        }
    }
    Ok(out)
}

fn to_table(config: &ExperimentConfig) -> Result<Table> {
    Table::try_from(config).map_err(|e| Error::config(format!("cannot build preset table: {e}")))
}

/// Resolves a configuration from a preset, an optional file and overrides.
pub fn load_config(default_profile: ProfileName, path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig> {
    let file: Option<Table> = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::config(format!("cannot read config file {}: {e}", p.display())))?;
            Some(text.parse::<Table>().map_err(|e| Error::config(format!("{}: {e}", p.display())))?)
        }
        None => None,
    };
    let file_profile = file
        .as_ref()
        .and_then(|t| t.get("experiment"))
        .and_then(|e| e.get("profile"))
        .and_then(Value::as_str)
        .map(str::parse::<ProfileName>)
        .transpose()?;
    let profile = profile_override(overrides)?.or(file_profile).unwrap_or(default_profile);

    let known = to_table(&ExperimentConfig::preset(profile))?;
    let mut table = known.clone();
    if let Some(f) = file {
        merge(&mut table, f, "", &known)?;
    }
    for o in overrides {
        let (k, v) = split_override(o)?;
        let (section, leaf) = resolve_key(k, &known)?;
        let slot = table
            .get_mut(&section)
            .and_then(Value::as_table_mut)
            .and_then(|t| t.get_mut(&leaf))
            .expect("resolved key exists");
        *slot = coerce(&format!("{section}.{leaf}"), slot, parse_value(v))?;
    }
    let config: ExperimentConfig =
        Value::Table(table).try_into().map_err(|e| Error::config(format!("invalid configuration: {e}")))?;
    config.validate()?;
    Ok(config)
}
