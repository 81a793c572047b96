//! Multi-swarm PSO: particles follow their personal best and the best of
//! their sub-swarm; sub-swarms are re-drawn at random every few generations.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{check_kind, uniform_point, Problem, RunResult, SolverConfig, SolverKind, Tracker};
use crate::cop::{epsilon_compare, EvaluatedPoint, Fitness};
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Maximum velocity per coordinate as a fraction of the box width.
const VELOCITY_CLAMP: f64 = 0.5;

/// Random partition of `count * size` particle indices into `count` groups.
pub fn subswarms(count: usize, size: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..count * size).collect();
    order.shuffle(rng);
    order.chunks(size).map(|c| c.to_vec()).collect()
}

pub fn solve_pso<P: Problem>(problem: &P, config: &SolverConfig, budget: u64, precision: f64, seed: u64) -> Result<RunResult> {
    solve_pso_from(problem, config, budget, precision, seed, None)
}

/// Like [`solve_pso`], optionally with explicit initial positions.
pub fn solve_pso_from<P: Problem>(
    problem: &P,
    config: &SolverConfig,
    budget: u64,
    precision: f64,
    seed: u64,
    initial: Option<&[Vec<f64>]>,
) -> Result<RunResult> {
    check_kind(config, SolverKind::PSO)?;
    let np = config.population_size;
    let mut tracker = Tracker::new(problem, budget, precision, np)?;
    let mut rng = seeded(seed);
    let space = problem.space().clone();
    let d = space.dimension();
    let vmax: Vec<f64> = (0..d).map(|j| VELOCITY_CLAMP * space.width(j)).collect();

    if let Some(init) = initial {
        if init.len() != np || init.iter().any(|x| !space.contains(x)) {
            return Err(Error::contract("initial positions must be population_size points inside the box"));
        }
    }

    let mut positions: Vec<Vec<f64>> = Vec::with_capacity(np);
    let mut velocities: Vec<Vec<f64>> = Vec::with_capacity(np);
    let mut bests: Vec<EvaluatedPoint> = Vec::with_capacity(np);
    for i in 0..np {
        let x = match initial {
            Some(init) => init[i].clone(),
            None => uniform_point(&space, &mut rng),
        };
        let v: Vec<f64> = vmax.iter().map(|m| 0.2 * m * rng.random_range(-1.0..1.0)).collect();
        let Some(p) = tracker.eval(&x)? else { return Ok(tracker.finish(seed)) };
        positions.push(x);
        velocities.push(v);
        bests.push(p);
    }
    tracker.end_generation();

    let mut groups = subswarms(config.pso_subswarm_count, config.pso_subswarm_size, &mut rng);
    let mut generation = 0usize;
    'run: while !tracker.done() {
        generation += 1;
        if generation % config.pso_regroup_period == 0 {
            groups = subswarms(config.pso_subswarm_count, config.pso_subswarm_size, &mut rng);
        }
        let mut leaders = vec![0usize; np];
        for group in &groups {
            let mut leader = group[0];
            for &k in &group[1..] {
                if better(bests[k].fitness(), bests[leader].fitness())? {
                    leader = k;
                }
            }
            for &k in group {
                leaders[k] = leader;
            }
        }
        let leader_pos: Vec<Vec<f64>> = leaders.iter().map(|l| bests[*l].x.clone()).collect();

        for i in 0..np {
            for j in 0..d {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let v = config.pso_inertia * velocities[i][j]
                    + config.pso_c1 * r1 * (bests[i].x[j] - positions[i][j])
                    + config.pso_c2 * r2 * (leader_pos[i][j] - positions[i][j]);
                velocities[i][j] = v.clamp(-vmax[j], vmax[j]);
                positions[i][j] += velocities[i][j];
            }
            space.clamp(&mut positions[i]);
            let Some(p) = tracker.eval(&positions[i])? else { break 'run };
            if !better(bests[i].fitness(), p.fitness())? {
                bests[i] = p;
            }
        }
        tracker.end_generation();
    }
    Ok(tracker.finish(seed))
}

fn better(a: Fitness, b: Fitness) -> Result<bool> {
    Ok(epsilon_compare(a, b, 0.0)? == Ordering::Less)
}
