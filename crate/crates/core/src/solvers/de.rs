//! Epsilon-constrained DE/rand/1/bin with an archive of replaced individuals
//! and occasional gradient-based repair of infeasible trials.

use std::cmp::Ordering;

use rand::Rng;

use super::{check_kind, uniform_point, Problem, RunResult, SolverConfig, SolverKind, Tracker};
use crate::cop::{epsilon_compare, EvaluatedPoint};
use crate::error::Result;
use crate::rng::seeded;

/// Relative finite-difference step for the repair gradient.
const FD_STEP: f64 = 1e-6;

/// Epsilon level at `generation`: `eps0 * (1 - t / Tc)^cp` before the cutoff, zero after.
pub fn eps_level_schedule(config: &SolverConfig, generation: usize) -> f64 {
    let cutoff = config.eps_cutoff_generation;
    if generation >= cutoff {
        return 0.0;
    }
    let frac = 1.0 - generation as f64 / cutoff as f64;
    config.eps_level_initial * frac.powf(config.eps_level_decay_exponent)
}

pub fn solve_de<P: Problem>(problem: &P, config: &SolverConfig, budget: u64, precision: f64, seed: u64) -> Result<RunResult> {
    check_kind(config, SolverKind::DE)?;
    let np = config.population_size;
    let mut tracker = Tracker::new(problem, budget, precision, np)?;
    let mut rng = seeded(seed);
    let space = problem.space().clone();
    let d = space.dimension();

    let mut pop: Vec<EvaluatedPoint> = Vec::with_capacity(np);
    for _ in 0..np {
        let x = uniform_point(&space, &mut rng);
        match tracker.eval(&x)? {
            Some(p) => pop.push(p),
            None => return Ok(tracker.finish(seed)),
        }
    }
    tracker.end_generation();

    let mut archive: Vec<Vec<f64>> = Vec::with_capacity(config.archive_size);
    let mut generation = 0usize;
    let mut trial = vec![0.0; d];
    'run: while !tracker.done() {
        generation += 1;
        let eps = eps_level_schedule(config, generation);
        for i in 0..np {
            let r1 = pick_distinct(&mut rng, np, &[i]);
            let r2 = pick_distinct(&mut rng, np, &[i, r1]);
            // Third vector from population plus archive.
            let r3 = loop {
                let k = rng.random_range(0..np + archive.len());
                if k >= np || (k != i && k != r1 && k != r2) {
                    break k;
                }
            };
            let x3 = if r3 < np { &pop[r3].x } else { &archive[r3 - np] };
            let jrand = rng.random_range(0..d);
            for j in 0..d {
                trial[j] = if j == jrand || rng.random::<f64>() < config.de_crossover {
                    pop[r1].x[j] + config.de_scale * (pop[r2].x[j] - x3[j])
                } else {
                    pop[i].x[j]
                };
            }
            space.clamp(&mut trial);
            let Some(mut candidate) = tracker.eval(&trial)? else { break 'run };

            if candidate.phi > 0.0 && candidate.phi.is_finite() && rng.random::<f64>() < config.gradient_repair_prob {
                match repair(&mut tracker, &candidate)? {
                    Repair::Done(Some(r)) => {
                        if epsilon_compare(r.fitness(), candidate.fitness(), 0.0)? != Ordering::Greater {
                            candidate = r;
                        }
                    }
                    Repair::Done(None) => {}
                    Repair::OutOfBudget => break 'run,
                }
            }

            if epsilon_compare(candidate.fitness(), pop[i].fitness(), eps)? != Ordering::Greater {
                let replaced = std::mem::replace(&mut pop[i], candidate);
                if config.archive_size > 0 {
                    if archive.len() < config.archive_size {
                        archive.push(replaced.x);
                    } else {
                        let slot = rng.random_range(0..archive.len());
                        archive[slot] = replaced.x;
                    }
                }
            }
        }
        tracker.end_generation();
    }
    Ok(tracker.finish(seed))
}

fn pick_distinct(rng: &mut impl Rng, n: usize, exclude: &[usize]) -> usize {
    loop {
        let k = rng.random_range(0..n);
        if !exclude.contains(&k) {
            return k;
        }
    }
}

enum Repair {
    Done(Option<EvaluatedPoint>),
    OutOfBudget,
}

/// One Gauss-Newton step on `phi` using a forward-difference gradient.
/// Every probe is a counted evaluation.
fn repair<P: Problem>(tracker: &mut Tracker<'_, P>, point: &EvaluatedPoint) -> Result<Repair> {
    let space = tracker.space().clone();
    let d = space.dimension();
    let mut grad = vec![0.0; d];
    let mut probe = point.x.clone();
    for j in 0..d {
        let h = FD_STEP * space.width(j);
        let step = if probe[j] + h <= space.upper()[j] { h } else { -h };
        probe[j] = point.x[j] + step;
        let Some(p) = tracker.eval(&probe)? else { return Ok(Repair::OutOfBudget) };
        grad[j] = (p.phi - point.phi) / step;
        probe[j] = point.x[j];
    }
    let norm2: f64 = grad.iter().map(|g| g * g).sum();
    if !(norm2 > 0.0 && norm2.is_finite()) {
        return Ok(Repair::Done(None));
    }
    let scale = point.phi / norm2;
    let mut repaired: Vec<f64> = point.x.iter().zip(&grad).map(|(x, g)| x - scale * g).collect();
    space.clamp(&mut repaired);
    match tracker.eval(&repaired)? {
        Some(p) => Ok(Repair::Done(Some(p))),
        None => Ok(Repair::OutOfBudget),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cop::{Constraint, CopInstance, ObjectiveTag, SearchSpace};

    fn sphere(d: usize) -> CopInstance {
        CopInstance::new("s", ObjectiveTag::Sphere, vec![], SearchSpace::cube(d, -5.0, 5.0).unwrap(), 1e-4).unwrap()
    }

    #[test]
    fn schedule_decreases_to_zero_at_cutoff() {
        let c = SolverConfig::default_de(5);
        let levels: Vec<f64> = (0..=c.eps_cutoff_generation + 10).map(|t| eps_level_schedule(&c, t)).collect();
        assert_eq!(levels[0], c.eps_level_initial);
        assert!(levels.windows(2).all(|w| w[1] <= w[0]));
        assert!(levels[c.eps_cutoff_generation - 1] > 0.0);
        assert_eq!(levels[c.eps_cutoff_generation], 0.0);
    }

    #[test]
    fn one_generation_budget() {
        let c = SolverConfig::default_de(5);
        let r = solve_de(&sphere(5), &c, c.population_size as u64, 1e-4, 3).unwrap();
        assert_eq!(r.fen, c.population_size as u64);
        assert!(!r.solved);
    }

    #[test]
    fn budget_below_population_is_rejected() {
        let c = SolverConfig::default_de(5);
        assert!(solve_de(&sphere(5), &c, c.population_size as u64 - 1, 1e-4, 3).unwrap_err().is_config());
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let c = SolverConfig::default_de(5);
        let a = solve_de(&sphere(5), &c, 20_000, 1e-4, 9).unwrap();
        let b = solve_de(&sphere(5), &c, 20_000, 1e-4, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn repair_moves_toward_feasibility() {
        let space = SearchSpace::cube(3, -5.0, 5.0).unwrap();
        let inst = CopInstance::new("r", ObjectiveTag::Sphere, vec![Constraint::linear(vec![1.0, 2.0, -1.0], -1.0)], space, 1e-4).unwrap();
        let mut tracker = Tracker::new(&inst, 100, 1e-4, 1).unwrap();
        let p = tracker.eval(&[3.0, 1.0, 0.0]).unwrap().unwrap();
        assert!(p.phi > 0.0);
        let Repair::Done(Some(r)) = repair(&mut tracker, &p).unwrap() else { panic!("no repair") };
        // A linear constraint is fixed in one Gauss-Newton step (up to FD error).
        assert!(r.phi < 1e-6, "phi after repair {}", r.phi);
        assert_eq!(tracker.fen, 1 + 3 + 1);
    }
}
