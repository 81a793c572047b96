//! Bi-objective DE over constraint coefficients. A "hard" run looks for
//! instances that cost the target solver many evaluations while staying cheap
//! for the other two; an "easy" run swaps both senses.
//!
//! Variation follows DEMO: a trial replaces its parent if it dominates it, is
//! dropped if the parent dominates it, and otherwise joins the population.
//! After each generation the population is cut back by non-dominated sorting
//! and crowding distance. Every scored candidate is kept in an archive.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use log::{info, warn};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cop::{from_document, to_document, Constraint, ConstraintKind, CopInstance, GeneratorSpec, random_instance};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};
use crate::solvers::{measure_all, SolverKind, SolverSuite, DEFAULT_TARGET_PRECISION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Hard,
    Easy,
}

impl Sense {
    pub const ALL: [Sense; 2] = [Sense::Hard, Sense::Easy];

    pub fn as_str(self) -> &'static str {
        match self {
            Sense::Hard => "hard",
            Sense::Easy => "easy",
        }
    }
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sense {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hard" => Ok(Sense::Hard),
            "easy" => Ok(Sense::Easy),
            other => Err(Error::contract(format!("unknown sense `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SubsetTag {
    ExtremePoint,
    ParetoFront,
    RandomPool,
}

impl SubsetTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SubsetTag::ExtremePoint => "EP",
            SubsetTag::ParetoFront => "PF",
            SubsetTag::RandomPool => "RO",
        }
    }
}

impl FromStr for SubsetTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "EP" => Ok(SubsetTag::ExtremePoint),
            "PF" => Ok(SubsetTag::ParetoFront),
            "RO" => Ok(SubsetTag::RandomPool),
            other => Err(Error::contract(format!("unknown subset tag `{other}`"))),
        }
    }
}

/// Training-subset regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SubsetKind {
    EP,
    PF,
    RO,
    PFR,
}

impl SubsetKind {
    pub const ALL: [SubsetKind; 4] = [SubsetKind::EP, SubsetKind::PF, SubsetKind::RO, SubsetKind::PFR];

    pub fn as_str(self) -> &'static str {
        match self {
            SubsetKind::EP => "EP",
            SubsetKind::PF => "PF",
            SubsetKind::RO => "RO",
            SubsetKind::PFR => "PFR",
        }
    }
}

impl fmt::Display for SubsetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SubsetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "EP" => Ok(SubsetKind::EP),
            "PF" => Ok(SubsetKind::PF),
            "RO" => Ok(SubsetKind::RO),
            "PFR" => Ok(SubsetKind::PFR),
            other => Err(Error::config(format!("unknown subset kind `{other}` (expected EP, PF, RO or PFR)"))),
        }
    }
}

/// Mean FEN per solver, indexed in [`SolverKind::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores(pub [f64; 3]);

impl Scores {
    pub fn get(&self, kind: SolverKind) -> f64 {
        self.0[kind.index()]
    }

    /// `(fen(target), mean fen of the other two)`.
    pub fn objectives(&self, target: SolverKind) -> (f64, f64) {
        let [a, b] = target.others();
        (self.get(target), (self.get(a) + self.get(b)) / 2.0)
    }

    /// `fen(target) / mean fen(others)`.
    pub fn hardness_gap(&self, target: SolverKind) -> f64 {
        let (o1, o2) = self.objectives(target);
        o1 / o2
    }
}

/// Pareto dominance for a hard run: `a` costs the target at least as much and
/// the others at most as much as `b`, strictly better in one of the two.
pub fn dominates(a: &Scores, b: &Scores, target: SolverKind) -> bool {
    dominates_in(a, b, target, Sense::Hard)
}

pub fn dominates_in(a: &Scores, b: &Scores, target: SolverKind, sense: Sense) -> bool {
    let (a1, a2) = a.objectives(target);
    let (b1, b2) = b.objectives(target);
    let (a1, a2, b1, b2) = match sense {
        Sense::Hard => (a1, a2, b1, b2),
        Sense::Easy => (-a1, -a2, -b1, -b2),
    };
    a1 >= b1 && a2 <= b2 && (a1 > b1 || a2 < b2)
}

/// Pareto rank (1 = non-dominated) of each entry.
pub fn pareto_ranks(scores: &[Scores], target: SolverKind, sense: Sense) -> Vec<usize> {
    let n = scores.len();
    let mut ranks = vec![0usize; n];
    let mut dominated_by = vec![0usize; n];
    let mut dominating: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && dominates_in(&scores[i], &scores[j], target, sense) {
                dominating[i].push(j);
                dominated_by[j] += 1;
            }
        }
    }
    let mut current: Vec<usize> = (0..n).filter(|i| dominated_by[*i] == 0).collect();
    let mut rank = 1;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            ranks[i] = rank;
            for &j in &dominating[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        current = next;
        rank += 1;
    }
    ranks
}

/// Crowding distance of each member of one front; boundary members get infinity.
pub fn crowding_distance(scores: &[Scores], target: SolverKind) -> Vec<f64> {
    let n = scores.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let objs: Vec<(f64, f64)> = scores.iter().map(|s| s.objectives(target)).collect();
    for pick in [0usize, 1] {
        let value = |i: usize| if pick == 0 { objs[i].0 } else { objs[i].1 };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|a, b| value(*a).total_cmp(&value(*b)).then(a.cmp(b)));
        let lo = value(order[0]);
        let hi = value(order[n - 1]);
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        if hi > lo {
            for k in 1..n - 1 {
                dist[order[k]] += (value(order[k + 1]) - value(order[k - 1])) / (hi - lo);
            }
        }
    }
    dist
}

/// Indices of the `keep` survivors under non-dominated sorting with crowding
/// distance, in ascending index order.
pub fn truncate_indices(scores: &[Scores], target: SolverKind, sense: Sense, keep: usize) -> Vec<usize> {
    if scores.len() <= keep {
        return (0..scores.len()).collect();
    }
    let ranks = pareto_ranks(scores, target, sense);
    let mut chosen = Vec::with_capacity(keep);
    let mut rank = 1;
    while chosen.len() < keep {
        let front: Vec<usize> = (0..scores.len()).filter(|i| ranks[*i] == rank).collect();
        if chosen.len() + front.len() <= keep {
            chosen.extend(front);
        } else {
            let fs: Vec<Scores> = front.iter().map(|i| scores[*i]).collect();
            let cd = crowding_distance(&fs, target);
            let mut order: Vec<usize> = (0..front.len()).collect();
            order.sort_by(|a, b| cd[*b].total_cmp(&cd[*a]).then(a.cmp(b)));
            chosen.extend(order.into_iter().take(keep - chosen.len()).map(|k| front[k]));
        }
        rank += 1;
    }
    chosen.sort_unstable();
    chosen
}

/// Evolvable coefficient slots and their bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenomeSpec {
    pub evolve_quad: bool,
    pub evolve_lin: bool,
    pub evolve_offset: bool,
    pub quad_bounds: (f64, f64),
    pub lin_bounds: (f64, f64),
    pub offset_bounds: (f64, f64),
}

impl Default for GenomeSpec {
    fn default() -> Self {
        Self {
            evolve_quad: true,
            evolve_lin: true,
            evolve_offset: true,
            quad_bounds: (-1.0, 1.0),
            lin_bounds: (-1.0, 1.0),
            offset_bounds: (-5.0, 5.0),
        }
    }
}

/// Largest coefficient magnitude accepted as a genome bound.
const MAX_COEFFICIENT: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolverConfig {
    pub target: SolverKind,
    pub sense: Sense,
    pub population_size: usize,
    pub generations: usize,
    pub de_scale: f64,
    pub de_crossover: f64,
    pub genome: GenomeSpec,
    pub inner_budget: u64,
    pub inner_repeats: usize,
    pub precision: f64,
    /// Attempts per parent to produce a valid trial before skipping it.
    pub variation_retries: usize,
}

impl EvolverConfig {
    pub fn new(target: SolverKind, sense: Sense) -> Self {
        Self {
            target,
            sense,
            population_size: 40,
            generations: 25,
            de_scale: 0.5,
            de_crossover: 0.9,
            genome: GenomeSpec::default(),
            inner_budget: 30_000,
            inner_repeats: 3,
            precision: DEFAULT_TARGET_PRECISION,
            variation_retries: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config(format!("evolver: {m}")));
        if self.population_size < 4 {
            return bad("population_size must be at least 4");
        }
        if !(self.de_scale > 0.0 && self.de_scale <= 2.0) {
            return bad("de_scale must lie in (0, 2]");
        }
        if !(0.0..=1.0).contains(&self.de_crossover) {
            return bad("de_crossover must lie in [0, 1]");
        }
        if self.inner_repeats == 0 {
            return bad("inner_repeats must be at least 1");
        }
        if self.inner_budget == 0 {
            return bad("inner_budget must be positive");
        }
        let g = &self.genome;
        for (name, (lo, hi)) in [("quad", g.quad_bounds), ("lin", g.lin_bounds), ("offset", g.offset_bounds)] {
            if !(lo < hi && lo.abs() <= MAX_COEFFICIENT && hi.abs() <= MAX_COEFFICIENT) {
                return bad(&format!("{name} bounds must satisfy lo < hi within +-{MAX_COEFFICIENT}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolvedInstance {
    pub instance: CopInstance,
    pub scores: Scores,
    pub target: SolverKind,
    pub sense: Sense,
    /// Rank within the final population; 0 for archive entries that are not members.
    pub pareto_rank: usize,
    pub subset_tags: BTreeSet<SubsetTag>,
    /// Generation in which the instance was created (0 = initial population).
    pub generation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    /// Best objective-1 value on the rank-1 front (max for hard runs, min for easy ones).
    pub front_extreme_objective1: f64,
    /// Largest hardness gap on the rank-1 front.
    pub front_max_gap: f64,
    pub population_size: usize,
    pub front_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolvedPopulation {
    pub target: SolverKind,
    pub sense: Sense,
    pub label: String,
    pub members: Vec<EvolvedInstance>,
    /// Every scored candidate in (generation, candidate) order.
    pub archive: Vec<EvolvedInstance>,
    pub history: Vec<GenerationStats>,
}

impl EvolvedPopulation {
    pub fn front(&self) -> impl Iterator<Item = &EvolvedInstance> {
        self.members.iter().filter(|m| m.pareto_rank == 1)
    }

    /// Front member that is best on objective 1 (ties: first in member order).
    pub fn extreme(&self) -> Option<&EvolvedInstance> {
        let (target, sense) = (self.target, self.sense);
        self.front().reduce(|best, m| {
            let (b, v) = (best.scores.objectives(target).0, m.scores.objectives(target).0);
            let better = match sense {
                Sense::Hard => v > b,
                Sense::Easy => v < b,
            };
            if better {
                m
            } else {
                best
            }
        })
    }
}

/// Flattens the evolvable slots of a constraint set.
fn encode_genome(constraints: &[Constraint], g: &GenomeSpec) -> Vec<f64> {
    let mut out = Vec::new();
    for c in constraints {
        if g.evolve_quad && c.kind == ConstraintKind::QuadraticInequality {
            out.extend(&c.quad);
        }
        if g.evolve_lin {
            out.extend(&c.lin);
        }
        if g.evolve_offset && c.kind.is_inequality() {
            out.push(c.offset);
        }
    }
    out
}

/// Bounds of each genome slot, aligned with [`encode_genome`].
fn genome_bounds(constraints: &[Constraint], g: &GenomeSpec) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for c in constraints {
        let d = c.lin.len();
        if g.evolve_quad && c.kind == ConstraintKind::QuadraticInequality {
            out.extend(std::iter::repeat_n(g.quad_bounds, d));
        }
        if g.evolve_lin {
            out.extend(std::iter::repeat_n(g.lin_bounds, d));
        }
        if g.evolve_offset && c.kind.is_inequality() {
            out.push(g.offset_bounds);
        }
    }
    out
}

fn decode_genome(template: &[Constraint], genome: &[f64], g: &GenomeSpec) -> Vec<Constraint> {
    let mut k = 0;
    let mut take = |n: usize| {
        let s = &genome[k..k + n];
        k += n;
        s.to_vec()
    };
    template
        .iter()
        .map(|c| {
            let mut c = c.clone();
            let d = c.lin.len();
            if g.evolve_quad && c.kind == ConstraintKind::QuadraticInequality {
                c.quad = take(d);
            }
            if g.evolve_lin {
                c.lin = take(d);
            }
            if g.evolve_offset && c.kind.is_inequality() {
                c.offset = take(1)[0];
            }
            c
        })
        .collect()
}

/// Restores feasibility of the optimum: equalities are shifted through it,
/// violated inequalities are shifted until active. Fails when a shift leaves
/// the offset bounds.
fn repair_offsets(constraints: &mut [Constraint], optimum: &[f64], g: &GenomeSpec) -> bool {
    for c in constraints.iter_mut() {
        let value = c.value(optimum);
        match c.kind {
            ConstraintKind::Equality => c.offset -= value,
            _ if value > 0.0 => {
                c.offset -= value;
                if c.offset < g.offset_bounds.0 || c.offset > g.offset_bounds.1 {
                    return false;
                }
            }
            _ => {}
        }
    }
    true
}

pub(crate) fn slug(label: &str) -> String {
    label
        .split(',')
        .map(|p| p.trim().to_ascii_lowercase().replace(' ', ""))
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join("-")
}

/// Runs the evolver with the default solver suite for the base dimension.
pub fn evolve(config: &EvolverConfig, base: &GeneratorSpec, seed: u64) -> Result<EvolvedPopulation> {
    evolve_with(config, base, &SolverSuite::defaults(base.dimension), seed)
}

pub fn evolve_with(config: &EvolverConfig, base: &GeneratorSpec, suite: &SolverSuite, seed: u64) -> Result<EvolvedPopulation> {
    config.validate()?;
    base.validate()?;
    suite.validate()?;
    let (target, sense) = (config.target, config.sense);
    let label = base.label();
    let prefix = format!("{}-{}-{}", slug(&label), target, sense);
    let mut rng = seeded(derive_seed(seed, &["variation"]));
    let optimum = base.objective.optimum(base.dimension);

    // Each candidate gets its own run seeds. Shared seeds would let the
    // evolver tune coefficients to one unlucky run.
    let score = |instance: CopInstance, generation: usize| -> Option<EvolvedInstance> {
        let score_seed = derive_seed(seed, &["score", instance.id()]);
        match measure_all(&instance, suite, config.inner_budget, config.precision, config.inner_repeats, score_seed) {
            Ok(rec) => Some(EvolvedInstance {
                instance,
                scores: Scores(rec.mean_fens()),
                target,
                sense,
                pareto_rank: 0,
                subset_tags: BTreeSet::from([SubsetTag::RandomPool]),
                generation,
            }),
            Err(e) => {
                warn!("discarding candidate {}: {e}", instance.id());
                None
            }
        }
    };

    let mut archive = Vec::new();
    let mut population = Vec::with_capacity(config.population_size);
    let mut counter = 0usize;
    for i in 0..config.population_size {
        let inst = random_instance(base, derive_seed(seed, &["init".to_string(), i.to_string()]))?;
        let inst = inst.with_id(format!("{prefix}-g000-{counter:05}"));
        counter += 1;
        if let Some(e) = score(inst, 0) {
            archive.push(e.clone());
            population.push(e);
        }
    }
    if population.len() < 4 {
        return Err(Error::Numeric(format!("evolver {prefix}: too few initial candidates could be scored")));
    }

    let mut history = vec![generation_stats(0, &population, target, sense)];
    for generation in 1..=config.generations {
        let parents = population.len();
        for i in 0..parents {
            let Some(trial) = make_trial(&population, i, config, &optimum, &mut rng) else { continue };
            let trial = match population[i].instance.with_constraints(trial) {
                Ok(inst) => inst.with_id(format!("{prefix}-g{generation:03}-{counter:05}")),
                Err(e) => {
                    warn!("invalid trial instance: {e}");
                    continue;
                }
            };
            counter += 1;
            let Some(trial) = score(trial, generation) else { continue };
            archive.push(trial.clone());
            if dominates_in(&trial.scores, &population[i].scores, target, sense) {
                population[i] = trial;
            } else if !dominates_in(&population[i].scores, &trial.scores, target, sense) {
                population.push(trial);
            }
        }
        let scores: Vec<Scores> = population.iter().map(|m| m.scores).collect();
        let keep = truncate_indices(&scores, target, sense, config.population_size);
        let mut slots: Vec<Option<EvolvedInstance>> = population.into_iter().map(Some).collect();
        population = keep.into_iter().map(|k| slots[k].take().expect("indices are unique")).collect();
        let stats = generation_stats(generation, &population, target, sense);
        info!(
            "{prefix} generation {generation}: front {} extreme objective1 {:.0} max gap {:.3}",
            stats.front_size, stats.front_extreme_objective1, stats.front_max_gap
        );
        history.push(stats);
    }

    let scores: Vec<Scores> = population.iter().map(|m| m.scores).collect();
    let ranks = pareto_ranks(&scores, target, sense);
    for (m, r) in population.iter_mut().zip(&ranks) {
        m.pareto_rank = *r;
        if *r == 1 {
            m.subset_tags.insert(SubsetTag::ParetoFront);
        }
    }
    let mut result = EvolvedPopulation { target, sense, label, members: population, archive, history };
    for k in front_endpoints(&result) {
        result.members[k].subset_tags.insert(SubsetTag::ExtremePoint);
    }
    Ok(result)
}

/// Member indices of the two front endpoints: best on objective 1 and best on objective 2.
fn front_endpoints(pop: &EvolvedPopulation) -> Vec<usize> {
    let (target, sense) = (pop.target, pop.sense);
    let front: Vec<usize> = (0..pop.members.len()).filter(|k| pop.members[*k].pareto_rank == 1).collect();
    if front.is_empty() {
        return Vec::new();
    }
    let key = |k: usize| {
        let (o1, o2) = pop.members[k].scores.objectives(target);
        match sense {
            Sense::Hard => (o1, -o2),
            Sense::Easy => (-o1, o2),
        }
    };
    // On a front, best objective 1 and best objective 2 are opposite ends.
    let by_first = |a: &usize, b: &usize| key(*a).0.total_cmp(&key(*b).0).then(key(*a).1.total_cmp(&key(*b).1));
    let by_second = |a: &usize, b: &usize| key(*a).1.total_cmp(&key(*b).1).then(key(*a).0.total_cmp(&key(*b).0));
    let first = *front.iter().max_by(|a, b| by_first(a, b).then(b.cmp(a))).expect("front is non-empty");
    let second = *front.iter().max_by(|a, b| by_second(a, b).then(b.cmp(a))).expect("front is non-empty");
    let mut ends = vec![first, second];
    ends.dedup();
    ends
}

fn generation_stats(generation: usize, population: &[EvolvedInstance], target: SolverKind, sense: Sense) -> GenerationStats {
    let scores: Vec<Scores> = population.iter().map(|m| m.scores).collect();
    let ranks = pareto_ranks(&scores, target, sense);
    let front: Vec<&Scores> = scores.iter().zip(&ranks).filter(|(_, r)| **r == 1).map(|(s, _)| s).collect();
    let o1 = front.iter().map(|s| s.objectives(target).0);
    let front_extreme_objective1 = match sense {
        Sense::Hard => o1.fold(f64::NEG_INFINITY, f64::max),
        Sense::Easy => o1.fold(f64::INFINITY, f64::min),
    };
    GenerationStats {
        generation,
        front_extreme_objective1,
        front_max_gap: front.iter().map(|s| s.hardness_gap(target)).fold(f64::NEG_INFINITY, f64::max),
        population_size: population.len(),
        front_size: front.len(),
    }
}

/// DE/rand/1/bin on the coefficient genome followed by clipping and offset repair.
fn make_trial(
    population: &[EvolvedInstance],
    i: usize,
    config: &EvolverConfig,
    optimum: &[f64],
    rng: &mut impl Rng,
) -> Option<Vec<Constraint>> {
    let template = population[i].instance.constraints();
    let g = &config.genome;
    let bounds = genome_bounds(template, g);
    if bounds.is_empty() {
        return None;
    }
    let parent = encode_genome(template, g);
    let candidates: Vec<usize> = (0..population.len()).filter(|k| *k != i).collect();
    for _ in 0..config.variation_retries.max(1) {
        let picks: Vec<usize> = candidates.choose_multiple(rng, 3).copied().collect();
        let [a, b, c] = [0, 1, 2].map(|k| encode_genome(population[picks[k]].instance.constraints(), g));
        let jrand = rng.random_range(0..parent.len());
        let mut trial = parent.clone();
        for j in 0..parent.len() {
            if j == jrand || rng.random::<f64>() < config.de_crossover {
                trial[j] = (a[j] + config.de_scale * (b[j] - c[j])).clamp(bounds[j].0, bounds[j].1);
            }
        }
        let mut constraints = decode_genome(template, &trial, g);
        if repair_offsets(&mut constraints, optimum, g) {
            return Some(constraints);
        }
    }
    None
}

/// A selected training instance and the pool it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct Selected {
    pub member: EvolvedInstance,
    pub pool: SubsetTag,
}

fn sample(pool: Vec<&EvolvedInstance>, n: usize, tag: SubsetTag, rng: &mut impl Rng) -> Vec<Selected> {
    let mut pool = pool;
    pool.shuffle(rng);
    pool.into_iter().take(n).map(|m| Selected { member: m.clone(), pool: tag }).collect()
}

/// Draws a training list of size `n` (or everything available) from the
/// populations of all evolver runs.
pub fn select_subset(populations: &[EvolvedPopulation], kind: SubsetKind, n: usize, seed: u64) -> Result<Vec<Selected>> {
    let mut rng = seeded(derive_seed(seed, &["select", kind.as_str()]));
    let front: Vec<&EvolvedInstance> = populations.iter().flat_map(|p| p.front()).collect();
    let extremes: Vec<&EvolvedInstance> =
        populations.iter().flat_map(|p| p.members.iter()).filter(|m| m.subset_tags.contains(&SubsetTag::ExtremePoint)).collect();
    let archive: Vec<&EvolvedInstance> = populations.iter().flat_map(|p| p.archive.iter()).collect();
    let check = |pool: &[&EvolvedInstance], wanted: usize, name: &str| -> Result<()> {
        if pool.is_empty() {
            return Err(Error::Selection { kind: name.to_string() });
        }
        if pool.len() < wanted {
            warn!("subset {name}: requested {wanted} instances but only {} are available", pool.len());
        }
        Ok(())
    };
    let out = match kind {
        SubsetKind::EP => {
            check(&extremes, n, "EP")?;
            sample(extremes, n, SubsetTag::ExtremePoint, &mut rng)
        }
        SubsetKind::PF => {
            check(&front, n, "PF")?;
            sample(front, n, SubsetTag::ParetoFront, &mut rng)
        }
        SubsetKind::RO => {
            check(&archive, n, "RO")?;
            sample(archive, n, SubsetTag::RandomPool, &mut rng)
        }
        SubsetKind::PFR => {
            let half = n / 2;
            check(&front, half, "PFR")?;
            check(&archive, n - half, "PFR")?;
            let mut out = sample(front, half, SubsetTag::ParetoFront, &mut rng);
            out.extend(sample(archive, n - half, SubsetTag::RandomPool, &mut rng));
            out
        }
    };
    Ok(out)
}

/// Copies of `populations` with every instance whose id is in `exclude` removed.
pub fn without_ids(populations: &[EvolvedPopulation], exclude: &HashSet<String>) -> Vec<EvolvedPopulation> {
    populations
        .iter()
        .map(|p| EvolvedPopulation {
            members: p.members.iter().filter(|m| !exclude.contains(m.instance.id())).cloned().collect(),
            archive: p.archive.iter().filter(|m| !exclude.contains(m.instance.id())).cloned().collect(),
            ..p.clone()
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestRow {
    id: String,
    target: SolverKind,
    sense: Sense,
    de: f64,
    es: f64,
    pso: f64,
    pareto_rank: usize,
    subset_tags: String,
    generation: usize,
}

fn manifest_row(m: &EvolvedInstance) -> ManifestRow {
    ManifestRow {
        id: m.instance.id().to_string(),
        target: m.target,
        sense: m.sense,
        de: m.scores.0[0],
        es: m.scores.0[1],
        pso: m.scores.0[2],
        pareto_rank: m.pareto_rank,
        subset_tags: m.subset_tags.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(";"),
        generation: m.generation,
    }
}

/// Writes `dir/instances/<id>.json`, `dir/members.csv`, `dir/archive.csv`
/// and `dir/run.json` (target, sense, label, history).
pub fn write_population(dir: &Path, pop: &EvolvedPopulation) -> Result<()> {
    let inst_dir = dir.join("instances");
    fs::create_dir_all(&inst_dir)?;
    for m in pop.archive.iter().chain(&pop.members) {
        fs::write(inst_dir.join(format!("{}.json", m.instance.id())), to_document(&m.instance))?;
    }
    for (name, list) in [("members.csv", &pop.members), ("archive.csv", &pop.archive)] {
        let mut w = csv::Writer::from_path(dir.join(name))?;
        for m in list {
            w.serialize(manifest_row(m))?;
        }
        w.flush()?;
    }
    let run = RunInfo { target: pop.target, sense: pop.sense, label: pop.label.clone(), history: pop.history.clone() };
    let text = serde_json::to_string_pretty(&run).map_err(|e| Error::contract(e.to_string()))?;
    fs::write(dir.join("run.json"), text + "\n")?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct RunInfo {
    target: SolverKind,
    sense: Sense,
    label: String,
    history: Vec<GenerationStats>,
}

pub fn read_population(dir: &Path) -> Result<EvolvedPopulation> {
    let run_text = fs::read_to_string(dir.join("run.json"))?;
    let run: RunInfo = serde_json::from_str(&run_text).map_err(|e| Error::Parse {
        line: e.line(),
        field: "run.json".into(),
        message: e.to_string(),
    })?;
    let load = |name: &str| -> Result<Vec<EvolvedInstance>> {
        let mut r = csv::Reader::from_path(dir.join(name))?;
        let mut out = Vec::new();
        for row in r.deserialize::<ManifestRow>() {
            let row = row?;
            let text = fs::read_to_string(dir.join("instances").join(format!("{}.json", row.id)))?;
            let subset_tags = row
                .subset_tags
                .split(';')
                .filter(|s| !s.is_empty())
                .map(str::parse)
                .collect::<Result<BTreeSet<SubsetTag>>>()?;
            out.push(EvolvedInstance {
                instance: from_document(&text)?,
                scores: Scores([row.de, row.es, row.pso]),
                target: row.target,
                sense: row.sense,
                pareto_rank: row.pareto_rank,
                subset_tags,
                generation: row.generation,
            });
        }
        Ok(out)
    };
    Ok(EvolvedPopulation {
        target: run.target,
        sense: run.sense,
        label: run.label,
        members: load("members.csv")?,
        archive: load("archive.csv")?,
        history: run.history,
    })
}
