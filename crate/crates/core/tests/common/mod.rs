//! Independent reference implementations used by several test targets.
#![allow(dead_code)]

use std::cmp::Ordering;

use copsel::cop::{random_instance, CopInstance, Fitness, GeneratorSpec, ObjectiveTag, SearchSpace};
use copsel::model::{Mlp, TrainingExample};
use copsel::rng::{seeded, SeededRng as R};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

// ---------------------------------------------------------------------------
// Epsilon order

/// Sort key equivalent to the epsilon rule: violations within the level
/// collapse to zero, then `(violation, objective)` lexicographically.
pub fn eps_key(a: Fitness, eps: f64) -> (f64, f64) {
    (if a.phi <= eps { 0.0 } else { a.phi }, a.f)
}

pub fn eps_oracle(a: Fitness, b: Fitness, eps: f64) -> Ordering {
    let (ka, kb) = (eps_key(a, eps), eps_key(b, eps));
    ka.0.partial_cmp(&kb.0).unwrap().then(ka.1.partial_cmp(&kb.1).unwrap())
}

/// Random fitness values with many exact ties and zero violations.
pub fn random_fitness(rng: &mut impl Rng) -> Fitness {
    let f = match rng.random_range(0..4) {
        0 => rng.random_range(0..5) as f64,
        1 => f64::INFINITY,
        _ => rng.random_range(-100.0..100.0),
    };
    let phi = match rng.random_range(0..5) {
        0 | 1 => 0.0,
        2 => rng.random_range(0..4) as f64 * 0.25,
        3 => f64::INFINITY,
        _ => rng.random_range(0.0..10.0),
    };
    if f.is_infinite() {
        // Non-finite objectives always come with the sentinel violation.
        Fitness::new(f, f64::INFINITY)
    } else {
        Fitness::new(f, phi)
    }
}

/// Counts violations of the total-preorder laws and of agreement with the
/// key oracle over `triples` random triples. Returns the number of failures.
pub fn check_epsilon_laws(triples: usize, seed: u64) -> usize {
    use copsel::cop::epsilon_compare;
    let mut rng = seeded(seed);
    let mut failures = 0;
    let levels = [0.0, 0.25, 0.5, 1.0, 3.0, f64::INFINITY];
    for _ in 0..triples {
        let (a, b, c) = (random_fitness(&mut rng), random_fitness(&mut rng), random_fitness(&mut rng));
        let eps = levels[rng.random_range(0..levels.len())];
        let cmp = |x, y| epsilon_compare(x, y, eps).unwrap();
        let mut bad = |ok: bool| failures += usize::from(!ok);
        bad(cmp(a, a) == Ordering::Equal);
        bad(cmp(a, b) == cmp(b, a).reverse());
        for (x, y) in [(a, b), (b, c), (a, c)] {
            bad(cmp(x, y) == eps_oracle(x, y, eps));
        }
        // Transitivity of "not worse".
        let le = |x, y| cmp(x, y) != Ordering::Greater;
        for (x, y, z) in [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
            if le(x, y) && le(y, z) {
                bad(le(x, z));
            }
        }
        // Level 0: plain lexicographic (phi, f).
        let lex = a.phi.partial_cmp(&b.phi).unwrap().then(a.f.partial_cmp(&b.f).unwrap());
        bad(epsilon_compare(a, b, 0.0).unwrap() == lex);
        // Infinite level: objective only.
        bad(epsilon_compare(a, b, f64::INFINITY).unwrap() == a.f.partial_cmp(&b.f).unwrap());
    }
    failures
}

// ---------------------------------------------------------------------------
// Welch t-test

/// ln Γ(x) for x > 0, Lanczos approximation (g = 7, nine terms).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta function, modified Lentz.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b).
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front = (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Welch statistic, degrees of freedom and two-tailed p.
pub fn welch_oracle(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let stats = |s: &[f64]| {
        let n = s.len() as f64;
        let m = s.iter().sum::<f64>() / n;
        (m, s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) / n, n)
    };
    let (ma, qa, na) = stats(a);
    let (mb, qb, nb) = stats(b);
    let t = (ma - mb) / (qa + qb).sqrt();
    let df = (qa + qb).powi(2) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    let p = inc_beta(df / 2.0, 0.5, df / (df + t * t));
    (t, df, p)
}

pub fn random_sample(rng: &mut impl Rng, n: usize, mean: f64, sd: f64) -> Vec<f64> {
    (0..n).map(|_| mean + sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Two normal samples with random sizes, means and spreads.
pub fn random_pair<G: Rng>(rng: &mut G) -> (Vec<f64>, Vec<f64>) {
    let one = |rng: &mut G| {
        let (n, mean, sd) = (rng.random_range(2..40), rng.random_range(-5.0..5.0), rng.random_range(0.1..5.0));
        random_sample(rng, n, mean, sd)
    };
    (one(rng), one(rng))
}

// ---------------------------------------------------------------------------
// Network numerics

/// Largest relative difference between the analytic output Jacobian and a
/// central difference with step `h`. The denominator is floored at 1 so that
/// entries near zero are judged absolutely.
pub fn jacobian_fd_error(net: &Mlp, x: &[f64], h: f64) -> f64 {
    let (_, jac) = net.jacobian(x).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..net.params().len() {
        let mut plus = net.clone();
        plus.params_mut()[k] += h;
        let mut minus = net.clone();
        minus.params_mut()[k] -= h;
        let (fp, fm) = (plus.forward(x).unwrap(), minus.forward(x).unwrap());
        for o in 0..net.n_outputs() {
            let fd = (fp[o] - fm[o]) / (2.0 * h);
            let a = jac[(o, k)];
            worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1.0));
        }
    }
    worst
}

/// Noisy affine map `t = A x + b + noise` with inputs uniform in `[-1, 1]`.
pub struct LinearDataset {
    pub train: Vec<TrainingExample>,
    pub test: Vec<TrainingExample>,
}

pub const LINEAR_INPUTS: usize = 4;
pub const LINEAR_OUTPUTS: usize = 3;

/// Targets are z-scored with training-set statistics, so errors are in
/// normalized units.
pub fn linear_dataset(n: usize, n_test: usize, noise: f64, seed: u64) -> LinearDataset {
    let mut rng = seeded(seed);
    let a: Vec<f64> = (0..LINEAR_OUTPUTS * LINEAR_INPUTS).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..LINEAR_OUTPUTS).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut all: Vec<TrainingExample> = (0..n + n_test)
        .map(|_| {
            let input: Vec<f64> = (0..LINEAR_INPUTS).map(|_| rng.random_range(-1.0..1.0)).collect();
            let target = (0..LINEAR_OUTPUTS)
                .map(|o| {
                    let row = &a[o * LINEAR_INPUTS..(o + 1) * LINEAR_INPUTS];
                    row.iter().zip(&input).map(|(w, x)| w * x).sum::<f64>() + b[o] + noise * rng.sample::<f64, _>(StandardNormal)
                })
                .collect();
            TrainingExample { input, target }
        })
        .collect();
    for o in 0..LINEAR_OUTPUTS {
        let col: Vec<f64> = all[..n].iter().map(|e| e.target[o]).collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        for e in &mut all {
            e.target[o] = (e.target[o] - mean) / sd;
        }
    }
    let test = all.split_off(n);
    LinearDataset { train: all, test }
}

pub fn rmse(pred: impl Fn(&[f64]) -> Vec<f64>, data: &[TrainingExample]) -> f64 {
    let mut s = 0.0;
    let mut count = 0;
    for e in data {
        for (p, t) in pred(&e.input).iter().zip(&e.target) {
            s += (p - t).powi(2);
            count += 1;
        }
    }
    (s / count as f64).sqrt()
}

/// Ordinary least squares with an intercept; returns the predictor.
pub fn least_squares(train: &[TrainingExample]) -> impl Fn(&[f64]) -> Vec<f64> {
    let k = train[0].input.len() + 1;
    let m = train[0].target.len();
    let x = DMatrix::from_fn(train.len(), k, |i, j| if j == 0 { 1.0 } else { train[i].input[j - 1] });
    let coefs: Vec<DVector<f64>> = (0..m)
        .map(|o| {
            let y = DVector::from_fn(train.len(), |i, _| train[i].target[o]);
            x.clone().svd(true, true).solve(&y, 1e-12).unwrap()
        })
        .collect();
    move |input: &[f64]| {
        coefs.iter().map(|c| c[0] + input.iter().enumerate().map(|(j, v)| c[j + 1] * v).sum::<f64>()).collect()
    }
}

// ---------------------------------------------------------------------------
// Plain baseline optimizers for the unconstrained sanity check. Each returns
// the evaluation count at which `f <= target` was first seen.

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn clamp_box(x: &mut [f64], lo: f64, hi: f64) {
    for v in x {
        *v = v.clamp(lo, hi);
    }
}

/// DE/rand/1/bin with F = 0.5, CR = 0.9 and ten members per dimension.
pub fn plain_de(f: impl Fn(&[f64]) -> f64, d: usize, lo: f64, hi: f64, budget: usize, target: f64, seed: u64) -> Option<usize> {
    let mut rng = seeded(seed);
    let np = 10 * d;
    let mut pop: Vec<Vec<f64>> = (0..np).map(|_| (0..d).map(|_| rng.random_range(lo..hi)).collect()).collect();
    let mut fit: Vec<f64> = pop.iter().map(|x| f(x)).collect();
    let mut evals = np;
    if fit.iter().any(|v| *v <= target) {
        return Some(evals);
    }
    while evals < budget {
        for i in 0..np {
            let pick = |rng: &mut R, not: &[usize]| loop {
                let k = rng.random_range(0..np);
                if !not.contains(&k) {
                    break k;
                }
            };
            let r1 = pick(&mut rng, &[i]);
            let r2 = pick(&mut rng, &[i, r1]);
            let r3 = pick(&mut rng, &[i, r1, r2]);
            let jr = rng.random_range(0..d);
            let mut y = pop[i].clone();
            for j in 0..d {
                if j == jr || rng.random::<f64>() < 0.9 {
                    y[j] = pop[r1][j] + 0.5 * (pop[r2][j] - pop[r3][j]);
                }
            }
            clamp_box(&mut y, lo, hi);
            let fy = f(&y);
            evals += 1;
            if fy <= fit[i] {
                pop[i] = y;
                fit[i] = fy;
            }
            if fy <= target {
                return Some(evals);
            }
            if evals >= budget {
                return None;
            }
        }
    }
    None
}

/// (1+1)-ES with the one-fifth success rule.
pub fn plain_es(f: impl Fn(&[f64]) -> f64, d: usize, lo: f64, hi: f64, budget: usize, target: f64, seed: u64) -> Option<usize> {
    let mut rng = seeded(seed);
    let mut x: Vec<f64> = (0..d).map(|_| rng.random_range(lo..hi)).collect();
    let mut fx = f(&x);
    let mut sigma = 0.2 * (hi - lo);
    let (up, down) = (1.5f64, 1.5f64.powf(-0.25));
    for evals in 1..=budget {
        if fx <= target {
            return Some(evals);
        }
        let mut y: Vec<f64> = x.iter().map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal)).collect();
        clamp_box(&mut y, lo, hi);
        let fy = f(&y);
        if fy <= fx {
            x = y;
            fx = fy;
            sigma *= up;
        } else {
            sigma *= down;
        }
    }
    None
}

/// Global-best PSO with constriction coefficients.
pub fn plain_pso(f: impl Fn(&[f64]) -> f64, d: usize, lo: f64, hi: f64, budget: usize, target: f64, seed: u64) -> Option<usize> {
    let mut rng = seeded(seed);
    let np = 20;
    let vmax = 0.5 * (hi - lo);
    let mut x: Vec<Vec<f64>> = (0..np).map(|_| (0..d).map(|_| rng.random_range(lo..hi)).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..np).map(|_| (0..d).map(|_| 0.0).collect()).collect();
    let mut pbest = x.clone();
    let mut pfit: Vec<f64> = x.iter().map(|p| f(p)).collect();
    let mut evals = np;
    let mut g = (0..np).min_by(|a, b| pfit[*a].total_cmp(&pfit[*b])).unwrap();
    if pfit[g] <= target {
        return Some(evals);
    }
    while evals < budget {
        for i in 0..np {
            for j in 0..d {
                let (r1, r2): (f64, f64) = (rng.random(), rng.random());
                v[i][j] = (0.729 * v[i][j] + 1.494 * r1 * (pbest[i][j] - x[i][j]) + 1.494 * r2 * (pbest[g][j] - x[i][j])).clamp(-vmax, vmax);
                x[i][j] += v[i][j];
            }
            clamp_box(&mut x[i], lo, hi);
            let fx = f(&x[i]);
            evals += 1;
            if fx < pfit[i] {
                pfit[i] = fx;
                pbest[i] = x[i].clone();
                if fx < pfit[g] {
                    g = i;
                }
            }
            if fx <= target {
                return Some(evals);
            }
            if evals >= budget {
                return None;
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Instances

pub fn unconstrained_sphere(d: usize) -> CopInstance {
    CopInstance::new("sphere", ObjectiveTag::Sphere, vec![], SearchSpace::cube(d, -5.0, 5.0).unwrap(), 1e-4).unwrap()
}

/// Twenty varied random instances in five dimensions.
pub fn varied_instances() -> Vec<CopInstance> {
    let objectives = [ObjectiveTag::Sphere, ObjectiveTag::Ackley, ObjectiveTag::Rosenbrock];
    (0..20)
        .map(|i| {
            let mut spec = GeneratorSpec::new(objectives[i % 3], 5);
            spec.n_linear = i % 4;
            spec.n_quadratic = (i / 4) % 3;
            spec.n_equality = usize::from(i % 7 == 3);
            spec.optimum_feasible = i % 5 != 4;
            random_instance(&spec, 1000 + i as u64).unwrap()
        })
        .collect()
}
