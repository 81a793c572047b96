//! The solver portfolio: an epsilon-constrained DE, a constrained (1+1)-CMA-ES
//! and a multi-swarm PSO. All three count one function evaluation per
//! evaluated point and report the count at which they first met the success
//! criterion.
//!
//! Population-based solvers assess success at generation boundaries: a
//! generation cut short by the budget earns no credit. This keeps the
//! accounting monotone in the budget.

mod de;
mod es;
mod measure;
mod pso;

use std::cell::Cell;
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use de::{eps_level_schedule, solve_de};
pub use es::{solve_es, solve_es_traced, EsTrace};
pub use measure::{measure, measure_all, read_performance_csv, write_performance_csv, PerformanceRecord, SolverPerformance};
pub use pso::{solve_pso, solve_pso_from, subswarms};

use crate::cop::{epsilon_compare, CopInstance, EvaluatedPoint, Fitness, SearchSpace};
use crate::error::{Error, Result};

/// Default success tolerance on `|f - f*|`.
pub const DEFAULT_TARGET_PRECISION: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SolverKind {
    DE,
    ES,
    PSO,
}

impl SolverKind {
    /// Model output order.
    pub const ALL: [SolverKind; 3] = [SolverKind::DE, SolverKind::ES, SolverKind::PSO];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::DE => "DE",
            SolverKind::ES => "ES",
            SolverKind::PSO => "PSO",
        }
    }

    /// The two kinds other than `self`.
    pub fn others(self) -> [SolverKind; 2] {
        match self {
            SolverKind::DE => [SolverKind::ES, SolverKind::PSO],
            SolverKind::ES => [SolverKind::DE, SolverKind::PSO],
            SolverKind::PSO => [SolverKind::DE, SolverKind::ES],
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "DE" => Ok(SolverKind::DE),
            "ES" => Ok(SolverKind::ES),
            "PSO" => Ok(SolverKind::PSO),
            other => Err(Error::contract(format!("unknown solver `{other}`"))),
        }
    }
}

/// Parameters of one solver. Fields that do not apply to `kind` are ignored
/// and zero-filled in [`SolverConfig::encode`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub population_size: usize,
    pub de_scale: f64,
    pub de_crossover: f64,
    pub eps_level_initial: f64,
    pub eps_level_decay_exponent: f64,
    /// Generation at which the DE epsilon level reaches zero.
    pub eps_cutoff_generation: usize,
    pub archive_size: usize,
    pub gradient_repair_prob: f64,
    /// Initial ES step size as a fraction of the mean box width.
    pub es_initial_step: f64,
    pub es_covariance_learning: f64,
    pub pso_subswarm_count: usize,
    pub pso_subswarm_size: usize,
    pub pso_regroup_period: usize,
    pub pso_inertia: f64,
    pub pso_c1: f64,
    pub pso_c2: f64,
}

/// Length of [`SolverConfig::encode`].
pub const SOLVER_ENCODING_LEN: usize = 19;

impl SolverConfig {
    fn blank(kind: SolverKind) -> Self {
        Self {
            kind,
            population_size: 1,
            de_scale: 0.0,
            de_crossover: 0.0,
            eps_level_initial: 0.0,
            eps_level_decay_exponent: 0.0,
            eps_cutoff_generation: 0,
            archive_size: 0,
            gradient_repair_prob: 0.0,
            es_initial_step: 0.0,
            es_covariance_learning: 0.0,
            pso_subswarm_count: 0,
            pso_subswarm_size: 0,
            pso_regroup_period: 0,
            pso_inertia: 0.0,
            pso_c1: 0.0,
            pso_c2: 0.0,
        }
    }

    pub fn default_de(dimension: usize) -> Self {
        let population_size = (4 * dimension).max(10);
        Self {
            population_size,
            de_scale: 0.5,
            de_crossover: 0.9,
            eps_level_initial: 1.0,
            eps_level_decay_exponent: 5.0,
            eps_cutoff_generation: 200,
            archive_size: population_size,
            gradient_repair_prob: 0.01,
            ..Self::blank(SolverKind::DE)
        }
    }

    pub fn default_es(dimension: usize) -> Self {
        let n = dimension as f64;
        Self { es_initial_step: 0.2, es_covariance_learning: 2.0 / (n * n + 6.0), ..Self::blank(SolverKind::ES) }
    }

    pub fn default_pso(dimension: usize) -> Self {
        let size = dimension.max(5);
        Self {
            population_size: 4 * size,
            pso_subswarm_count: 4,
            pso_subswarm_size: size,
            pso_regroup_period: 5,
            pso_inertia: 0.729,
            pso_c1: 1.49445,
            pso_c2: 1.49445,
            ..Self::blank(SolverKind::PSO)
        }
    }

    pub fn default_for(kind: SolverKind, dimension: usize) -> Self {
        match kind {
            SolverKind::DE => Self::default_de(dimension),
            SolverKind::ES => Self::default_es(dimension),
            SolverKind::PSO => Self::default_pso(dimension),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config(format!("{} config: {m}", self.kind)));
        if self.population_size == 0 {
            return bad("population_size must be positive");
        }
        match self.kind {
            SolverKind::DE => {
                if self.population_size < 4 {
                    return bad("DE needs at least 4 individuals");
                }
                if !(self.de_scale > 0.0 && self.de_scale <= 2.0) {
                    return bad("de_scale must lie in (0, 2]");
                }
                if !(0.0..=1.0).contains(&self.de_crossover) {
                    return bad("de_crossover must lie in [0, 1]");
                }
                if !(0.0..=1.0).contains(&self.gradient_repair_prob) {
                    return bad("gradient_repair_prob must lie in [0, 1]");
                }
                if !(self.eps_level_initial >= 0.0) || !(self.eps_level_decay_exponent >= 0.0) {
                    return bad("epsilon schedule parameters must be non-negative");
                }
            }
            SolverKind::ES => {
                if self.population_size != 1 {
                    return bad("ES population_size must be 1");
                }
                if !(self.es_initial_step > 0.0) {
                    return bad("es_initial_step must be positive");
                }
                if !(self.es_covariance_learning > 0.0 && self.es_covariance_learning < 1.0) {
                    return bad("es_covariance_learning must lie in (0, 1)");
                }
            }
            SolverKind::PSO => {
                if self.pso_subswarm_count == 0 || self.pso_subswarm_size == 0 {
                    return bad("sub-swarm count and size must be positive");
                }
                if self.pso_subswarm_count * self.pso_subswarm_size != self.population_size {
                    return bad("pso_subswarm_count * pso_subswarm_size must equal population_size");
                }
                if self.pso_regroup_period == 0 {
                    return bad("pso_regroup_period must be positive");
                }
            }
        }
        Ok(())
    }

    /// Fixed-order numeric encoding used as model input.
    pub fn encode(&self) -> [f64; SOLVER_ENCODING_LEN] {
        let de = self.kind == SolverKind::DE;
        let es = self.kind == SolverKind::ES;
        let pso = self.kind == SolverKind::PSO;
        let on = |flag: bool, v: f64| if flag { v } else { 0.0 };
        [
            on(de, 1.0),
            on(es, 1.0),
            on(pso, 1.0),
            self.population_size as f64,
            on(de, self.de_scale),
            on(de, self.de_crossover),
            on(de, self.eps_level_initial),
            on(de, self.eps_level_decay_exponent),
            on(de, self.eps_cutoff_generation as f64),
            on(de, self.archive_size as f64),
            on(de, self.gradient_repair_prob),
            on(es, self.es_initial_step),
            on(es, self.es_covariance_learning),
            on(pso, self.pso_subswarm_count as f64),
            on(pso, self.pso_subswarm_size as f64),
            on(pso, self.pso_regroup_period as f64),
            on(pso, self.pso_inertia),
            on(pso, self.pso_c1),
            on(pso, self.pso_c2),
        ]
    }
}

/// One configuration per solver kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSuite {
    pub de: SolverConfig,
    pub es: SolverConfig,
    pub pso: SolverConfig,
}

impl SolverSuite {
    pub fn defaults(dimension: usize) -> Self {
        Self {
            de: SolverConfig::default_de(dimension),
            es: SolverConfig::default_es(dimension),
            pso: SolverConfig::default_pso(dimension),
        }
    }

    pub fn get(&self, kind: SolverKind) -> &SolverConfig {
        match kind {
            SolverKind::DE => &self.de,
            SolverKind::ES => &self.es,
            SolverKind::PSO => &self.pso,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for kind in SolverKind::ALL {
            let c = self.get(kind);
            if c.kind != kind {
                return Err(Error::config(format!("{kind} slot holds a {} config", c.kind)));
            }
            c.validate()?;
        }
        Ok(())
    }

    /// DE, ES and PSO encodings concatenated.
    pub fn encode(&self) -> Vec<f64> {
        SolverKind::ALL.iter().flat_map(|k| self.get(*k).encode()).collect()
    }
}

/// Outcome of one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub solved: bool,
    pub fen: u64,
    pub best_f: f64,
    pub best_phi: f64,
    pub seed: u64,
}

/// What a solver needs from a problem.
pub trait Problem {
    fn space(&self) -> &SearchSpace;
    fn n_constraints(&self) -> usize;
    fn optimum_value(&self) -> f64;
    /// One function evaluation: objective and violation of `x`.
    fn evaluate(&self, x: &[f64]) -> Result<EvaluatedPoint>;
}

impl Problem for CopInstance {
    fn space(&self) -> &SearchSpace {
        CopInstance::space(self)
    }

    fn n_constraints(&self) -> usize {
        self.constraints().len()
    }

    fn optimum_value(&self) -> f64 {
        self.objective().known_optimum_value()
    }

    fn evaluate(&self, x: &[f64]) -> Result<EvaluatedPoint> {
        CopInstance::evaluate(self, x)
    }
}

/// Wraps a problem and counts every evaluation independently of the solver.
pub struct CountingProblem<'a, P> {
    inner: &'a P,
    count: Cell<u64>,
}

impl<'a, P: Problem> CountingProblem<'a, P> {
    pub fn new(inner: &'a P) -> Self {
        Self { inner, count: Cell::new(0) }
    }

    pub fn count(&self) -> u64 {
        self.count.get()
    }
}

impl<P: Problem> Problem for CountingProblem<'_, P> {
    fn space(&self) -> &SearchSpace {
        self.inner.space()
    }

    fn n_constraints(&self) -> usize {
        self.inner.n_constraints()
    }

    fn optimum_value(&self) -> f64 {
        self.inner.optimum_value()
    }

    fn evaluate(&self, x: &[f64]) -> Result<EvaluatedPoint> {
        self.count.set(self.count.get() + 1);
        self.inner.evaluate(x)
    }
}

/// Budget, FEN counter, success tracking and best-so-far of a single run.
pub(crate) struct Tracker<'a, P> {
    problem: &'a P,
    budget: u64,
    precision: f64,
    fen: u64,
    best: Option<Fitness>,
    pending_success: bool,
    solved_at: Option<u64>,
}

impl<'a, P: Problem> Tracker<'a, P> {
    pub(crate) fn new(problem: &'a P, budget: u64, precision: f64, min_budget: usize) -> Result<Self> {
        if budget < min_budget as u64 || budget == 0 {
            return Err(Error::config(format!("budget {budget} is smaller than the population size {min_budget}")));
        }
        if !(precision >= 0.0) {
            return Err(Error::config("target precision must be non-negative"));
        }
        Ok(Self { problem, budget, precision, fen: 0, best: None, pending_success: false, solved_at: None })
    }

    pub(crate) fn space(&self) -> &SearchSpace {
        self.problem.space()
    }

    /// Evaluates `x`, or returns `None` once the budget is spent.
    pub(crate) fn eval(&mut self, x: &[f64]) -> Result<Option<EvaluatedPoint>> {
        if self.fen >= self.budget {
            return Ok(None);
        }
        assert!(self.problem.space().contains(x), "solver iterate left the box");
        let p = self.problem.evaluate(x)?;
        self.fen += 1;
        let fit = p.fitness();
        let better = match self.best {
            None => true,
            Some(b) => epsilon_compare(fit, b, 0.0)? == Ordering::Less,
        };
        if better {
            self.best = Some(fit);
        }
        if p.phi == 0.0 && (p.f - self.problem.optimum_value()).abs() <= self.precision {
            self.pending_success = true;
        }
        Ok(Some(p))
    }

    /// Closes a fully evaluated generation.
    pub(crate) fn end_generation(&mut self) {
        if self.pending_success && self.solved_at.is_none() {
            self.solved_at = Some(self.fen);
        }
    }

    pub(crate) fn done(&self) -> bool {
        self.solved_at.is_some() || self.fen >= self.budget
    }

    pub(crate) fn finish(self, seed: u64) -> RunResult {
        let best = self.best.unwrap_or(Fitness::new(f64::INFINITY, f64::INFINITY));
        RunResult {
            solved: self.solved_at.is_some(),
            fen: self.solved_at.unwrap_or(self.budget),
            best_f: best.f,
            best_phi: best.phi,
            seed,
        }
    }
}

/// Runs the solver named by `config.kind`.
pub fn solve<P: Problem>(problem: &P, config: &SolverConfig, budget: u64, precision: f64, seed: u64) -> Result<RunResult> {
    match config.kind {
        SolverKind::DE => solve_de(problem, config, budget, precision, seed),
        SolverKind::ES => solve_es(problem, config, budget, precision, seed),
        SolverKind::PSO => solve_pso(problem, config, budget, precision, seed),
    }
}

fn uniform_point(space: &SearchSpace, rng: &mut impl rand::Rng) -> Vec<f64> {
    space.lower().iter().zip(space.upper()).map(|(l, u)| rng.random_range(*l..*u)).collect()
}

fn check_kind(config: &SolverConfig, kind: SolverKind) -> Result<()> {
    if config.kind != kind {
        return Err(Error::config(format!("expected a {kind} config, got {}", config.kind)));
    }
    config.validate()
}
