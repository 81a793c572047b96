//! (1+1)-CMA-ES with constraint handling by variance reduction.
//!
//! Each constraint keeps a low-pass filtered vector of the steps that
//! violated it. When an offspring of a feasible parent violates a
//! constraint, the Cholesky factor of the offspring distribution is shrunk
//! along the filtered directions and the offspring is rejected.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{check_kind, uniform_point, Problem, RunResult, SolverConfig, SolverKind, Tracker};
use crate::cop::{epsilon_compare, EvaluatedPoint};
use crate::error::Result;
use crate::rng::seeded;

/// Internal state exposed for inspection after a run.
#[derive(Debug, Clone)]
pub struct EsTrace {
    /// Filtered constraint-violating step per constraint.
    pub constraint_vectors: Vec<Vec<f64>>,
    /// Row-major factor `A` of the offspring covariance `A Aᵀ`.
    pub transform: Vec<Vec<f64>>,
    pub step_size: f64,
    pub restarts: usize,
}

pub fn solve_es<P: Problem>(problem: &P, config: &SolverConfig, budget: u64, precision: f64, seed: u64) -> Result<RunResult> {
    solve_es_traced(problem, config, budget, precision, seed).map(|(r, _)| r)
}

struct EsState {
    parent: EvaluatedPoint,
    sigma: f64,
    a: DMatrix<f64>,
    path: DVector<f64>,
    p_succ: f64,
    constraint_vectors: Vec<DVector<f64>>,
}

pub fn solve_es_traced<P: Problem>(
    problem: &P,
    config: &SolverConfig,
    budget: u64,
    precision: f64,
    seed: u64,
) -> Result<(RunResult, EsTrace)> {
    check_kind(config, SolverKind::ES)?;
    let mut tracker = Tracker::new(problem, budget, precision, 1)?;
    let mut rng = seeded(seed);
    let space = problem.space().clone();
    let n = space.dimension();
    let nf = n as f64;
    let m = problem.n_constraints();

    let damping = 1.0 + nf / 2.0;
    let c_path = 2.0 / (nf + 2.0);
    let c_p = 1.0 / 12.0;
    let p_target = 2.0 / 11.0;
    let c_cov = config.es_covariance_learning;
    let c_c = 1.0 / (nf + 2.0);
    let beta = 0.1 / (nf + 2.0);
    let sigma0 = config.es_initial_step * space.mean_width();
    let min_sigma = 1e-12 * space.mean_width();

    let fresh = |parent: EvaluatedPoint| EsState {
        parent,
        sigma: sigma0,
        a: DMatrix::identity(n, n),
        path: DVector::zeros(n),
        p_succ: p_target,
        constraint_vectors: vec![DVector::zeros(n); m],
    };

    let x0 = uniform_point(&space, &mut rng);
    let Some(p0) = tracker.eval(&x0)? else { unreachable!("budget is at least one") };
    tracker.end_generation();
    let mut state = fresh(p0);
    let mut restarts = 0;

    let mut y = vec![0.0; n];
    while !tracker.done() {
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let step = &state.a * &z;
        for i in 0..n {
            y[i] = state.parent.x[i] + state.sigma * step[i];
        }
        space.clamp(&mut y);
        let Some(child) = tracker.eval(&y)? else { break };
        tracker.end_generation();

        if state.parent.phi == 0.0 && child.phi > 0.0 {
            let violated: Vec<usize> = (0..m).filter(|j| child.per_constraint[*j] > 0.0).collect();
            if !violated.is_empty() {
                let mut shrink = DMatrix::zeros(n, n);
                let lu = state.a.clone().lu();
                for &j in &violated {
                    let v = &mut state.constraint_vectors[j];
                    *v = &*v * (1.0 - c_c) + &step * c_c;
                    if let Some(w) = lu.solve(v) {
                        let ww = w.dot(&w);
                        if ww > 0.0 {
                            shrink += &*v * w.transpose() / ww;
                        }
                    }
                }
                state.a -= shrink * (beta / violated.len() as f64);
            }
        } else if epsilon_compare(child.fitness(), state.parent.fitness(), 0.0)? != Ordering::Greater {
            state.parent = child;
            state.p_succ = (1.0 - c_p) * state.p_succ + c_p;
            state.path = &state.path * (1.0 - c_path) + &step * (c_path * (2.0 - c_path)).sqrt();
            if let Some(w) = state.a.clone().lu().solve(&state.path) {
                let ww = w.dot(&w);
                if ww > 0.0 {
                    let keep = (1.0 - c_cov).sqrt();
                    let coef = keep / ww * ((1.0 + c_cov * ww / (1.0 - c_cov)).sqrt() - 1.0);
                    state.a = &state.a * keep + &state.path * w.transpose() * coef;
                }
            }
            state.sigma *= ((state.p_succ - p_target) / (damping * (1.0 - p_target))).exp();
        } else {
            state.p_succ *= 1.0 - c_p;
            state.sigma *= ((state.p_succ - p_target) / (damping * (1.0 - p_target))).exp();
        }

        let spread = state.sigma * state.a.amax();
        if !(spread > min_sigma) || !spread.is_finite() {
            // Stagnation: restart from a fresh uniform point.
            let x = uniform_point(&space, &mut rng);
            let Some(p) = tracker.eval(&x)? else { break };
            tracker.end_generation();
            state = fresh(p);
            restarts += 1;
        }
    }

    let trace = EsTrace {
        constraint_vectors: state.constraint_vectors.iter().map(|v| v.iter().copied().collect()).collect(),
        transform: state.a.row_iter().map(|r| r.iter().copied().collect()).collect(),
        step_size: state.sigma,
        restarts,
    };
    Ok((tracker.finish(seed), trace))
}
