//! Levenberg-Marquardt training of an [`Mlp`] on a sum-of-squares loss.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmConfig {
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub lambda_max: f64,
    pub max_epochs: usize,
    pub sse_tol: f64,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    /// Share of examples held out for early stopping; 0 disables it.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            lambda0: 1e-3,
            lambda_up: 10.0,
            lambda_down: 0.1,
            lambda_max: 1e10,
            max_epochs: 500,
            sse_tol: 1e-12,
            patience: 20,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda0 > 0.0
            && self.lambda_up > 1.0
            && self.lambda_down > 0.0
            && self.lambda_down < 1.0
            && self.lambda_max > self.lambda0
            && self.sse_tol >= 0.0
            && (0.0..1.0).contains(&self.validation_fraction);
        if !ok {
            return Err(Error::config(
                "LM settings need lambda0 > 0, lambda_up > 1, 0 < lambda_down < 1, lambda_max > lambda0, sse_tol >= 0 and validation_fraction in [0, 1)",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxEpochs,
    SseTolerance,
    LambdaOverflow,
    EarlyStopping,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: usize,
    /// Training SSE before the first epoch and after each accepted epoch.
    pub history: Vec<f64>,
    pub train_sse: f64,
    pub validation_sse: Option<f64>,
    pub stop: StopReason,
}

fn check_dataset(data: &[TrainingExample], n_in: usize, n_out: usize) -> Result<()> {
    if data.is_empty() {
        return Err(Error::contract("training set is empty"));
    }
    for (i, ex) in data.iter().enumerate() {
        if ex.input.len() != n_in || ex.target.len() != n_out {
            return Err(Error::contract(format!("example {i} has the wrong input or target length")));
        }
        if ex.input.iter().chain(&ex.target).any(|v| !v.is_finite()) {
            return Err(Error::contract(format!("example {i} has non-finite entries")));
        }
    }
    Ok(())
}

pub fn sse(net: &Mlp, data: &[TrainingExample]) -> Result<f64> {
    let mut total = 0.0;
    for ex in data {
        let y = net.forward(&ex.input)?;
        total += y.iter().zip(&ex.target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(total)
}

/// Parameters LM updates: everything except first-layer weights of inputs
/// that are zero in every example. Those Jacobian columns are zero, so the
/// LM step leaves them unchanged anyway.
fn active_params(net: &Mlp, data: &[TrainingExample]) -> Vec<usize> {
    let n_in = net.n_inputs();
    let dead: Vec<bool> = (0..n_in).map(|j| data.iter().all(|ex| ex.input[j] == 0.0)).collect();
    let hidden = net.sizes()[1];
    let mut frozen = vec![false; net.params().len()];
    for unit in 0..hidden {
        for (j, d) in dead.iter().enumerate() {
            if *d {
                frozen[net.first_layer_weight_index(unit, j)] = true;
            }
        }
    }
    (0..frozen.len()).filter(|k| !frozen[*k]).collect()
}

/// `J^T J` and `J^T r` over `data`, restricted to `active` parameters.
fn normal_equations(net: &Mlp, data: &[TrainingExample], active: &[usize]) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n_out = net.n_outputs();
    let mut j = DMatrix::zeros(data.len() * n_out, active.len());
    let mut r = DVector::zeros(data.len() * n_out);
    for (e, ex) in data.iter().enumerate() {
        let (y, jac) = net.jacobian(&ex.input)?;
        for k in 0..n_out {
            let row = e * n_out + k;
            r[row] = y[k] - ex.target[k];
            for (c, &p) in active.iter().enumerate() {
                j[(row, c)] = jac[(k, p)];
            }
        }
    }
    Ok((j.tr_mul(&j), j.tr_mul(&r)))
}

fn solve_step(jtj: &DMatrix<f64>, jtr: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
    let mut a = jtj.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += lambda;
    }
    let step = a.cholesky()?.solve(jtr);
    step.iter().all(|v| v.is_finite()).then(|| -step)
}

/// One LM step `(J^T J + lambda I) dw = -J^T r` over all parameters.
pub fn lm_step(net: &Mlp, data: &[TrainingExample], lambda: f64) -> Result<Vec<f64>> {
    check_dataset(data, net.n_inputs(), net.n_outputs())?;
    let all: Vec<usize> = (0..net.params().len()).collect();
    let (jtj, jtr) = normal_equations(net, data, &all)?;
    solve_step(&jtj, &jtr, lambda)
        .map(|s| s.iter().copied().collect())
        .ok_or_else(|| Error::Numeric("normal matrix is not positive definite".into()))
}

/// Trains a fresh network of shape `sizes` on `data`.
pub fn train_lm(data: &[TrainingExample], sizes: &[usize], config: &LmConfig) -> Result<(Mlp, TrainReport)> {
    config.validate()?;
    let net = Mlp::init(sizes, derive_seed(config.seed, &["init"]))?;
    check_dataset(data, net.n_inputs(), net.n_outputs())?;

    let mut order: Vec<usize> = (0..data.len()).collect();
    let n_val = if data.len() >= 5 { (data.len() as f64 * config.validation_fraction).round() as usize } else { 0 };
    if n_val > 0 {
        order.shuffle(&mut seeded(derive_seed(config.seed, &["split"])));
    }
    let (val_idx, train_idx) = order.split_at(n_val);
    let train: Vec<TrainingExample> = train_idx.iter().map(|i| data[*i].clone()).collect();
    let val: Vec<TrainingExample> = val_idx.iter().map(|i| data[*i].clone()).collect();
    train_split(net, &train, &val, config)
}

fn train_split(mut net: Mlp, train: &[TrainingExample], val: &[TrainingExample], config: &LmConfig) -> Result<(Mlp, TrainReport)> {
    let active = active_params(&net, train);
    let mut current = sse(&net, train)?;
    if !current.is_finite() {
        return Err(Error::Model("initialization gave a non-finite training SSE".into()));
    }
    let mut history = vec![current];
    let mut lambda = config.lambda0;
    let mut best_val = if val.is_empty() { None } else { Some(sse(&net, val)?) };
    let mut best_net = net.clone();
    let mut since_best = 0;
    let mut epochs = 0;
    let mut stop = StopReason::MaxEpochs;

    'epochs: while epochs < config.max_epochs {
        if current <= config.sse_tol {
            stop = StopReason::SseTolerance;
            break;
        }
        let (jtj, jtr) = normal_equations(&net, train, &active)?;
        loop {
            if lambda > config.lambda_max {
                stop = StopReason::LambdaOverflow;
                break 'epochs;
            }
            let Some(step) = solve_step(&jtj, &jtr, lambda) else {
                lambda *= config.lambda_up;
                if lambda > config.lambda_max {
                    return Err(Error::Numeric("normal matrix stayed singular up to lambda_max".into()));
                }
                continue;
            };
            let mut trial = net.clone();
            for (k, d) in active.iter().zip(step.iter()) {
                trial.params_mut()[*k] += d;
            }
            let trial_sse = sse(&trial, train)?;
            if trial_sse < current {
                net = trial;
                current = trial_sse;
                lambda = (lambda * config.lambda_down).max(f64::MIN_POSITIVE);
                break;
            }
            lambda *= config.lambda_up;
        }
        epochs += 1;
        history.push(current);

        if let Some(best) = best_val {
            let v = sse(&net, val)?;
            if v < best {
                best_val = Some(v);
                best_net = net.clone();
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= config.patience {
                    stop = StopReason::EarlyStopping;
                    break;
                }
            }
        }
    }

    let net = if val.is_empty() { net } else { best_net };
    let report = TrainReport { epochs, train_sse: sse(&net, train)?, history, validation_sse: best_val, stop };
    Ok((net, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_a_single_example() {
        let data = vec![TrainingExample { input: vec![0.3, -0.7], target: vec![0.5, -0.25, 1.0] }];
        let cfg = LmConfig { max_epochs: 200, ..LmConfig::default() };
        let (net, report) = train_lm(&data, &[2, 10, 10, 3], &cfg).unwrap();
        assert!(report.train_sse < 1e-10, "{report:?}");
        assert!(report.epochs <= 200);
        assert!(sse(&net, &data).unwrap() < 1e-10);
    }

    #[test]
    fn accepted_epochs_decrease_sse() {
        let data: Vec<TrainingExample> = (0..30)
            .map(|i| {
                let x = i as f64 / 30.0;
                TrainingExample { input: vec![x, 1.0 - x], target: vec![(3.0 * x).sin(), x * x, -x] }
            })
            .collect();
        let (_, report) = train_lm(&data, &[2, 10, 10, 3], &LmConfig { max_epochs: 50, ..LmConfig::default() }).unwrap();
        assert!(report.history.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn huge_lambda_gives_tiny_step() {
        let net = Mlp::init(&[3, 10, 10, 3], 2).unwrap();
        let data = vec![TrainingExample { input: vec![0.1, 0.2, 0.3], target: vec![1.0, 0.0, -1.0] }];
        let norm = |l: f64| lm_step(&net, &data, l).unwrap().iter().map(|v| v * v).sum::<f64>().sqrt();
        let (a, b, c) = (norm(1e2), norm(1e6), norm(1e10));
        assert!(b < a && c < b && c < 1e-8, "{a} {b} {c}");
    }

    #[test]
    fn dead_inputs_are_frozen() {
        let data: Vec<TrainingExample> =
            (0..10).map(|i| TrainingExample { input: vec![i as f64 / 10.0, 0.0], target: vec![i as f64 / 5.0] }).collect();
        let net = Mlp::init(&[2, 10, 10, 1], 4).unwrap();
        let active = active_params(&net, &data);
        assert_eq!(active.len(), net.params().len() - 10);
        let cfg = LmConfig { max_epochs: 5, validation_fraction: 0.0, ..LmConfig::default() };
        let (trained, _) = train_lm(&data, &[2, 10, 10, 1], &cfg).unwrap();
        let init = Mlp::init(&[2, 10, 10, 1], derive_seed(cfg.seed, &["init"])).unwrap();
        for unit in 0..10 {
            let k = init.first_layer_weight_index(unit, 1);
            assert_eq!(trained.params()[k], init.params()[k]);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(train_lm(&[], &[2, 10, 10, 3], &LmConfig::default()).is_err());
        let bad = vec![TrainingExample { input: vec![f64::NAN, 0.0], target: vec![0.0; 3] }];
        assert!(train_lm(&bad, &[2, 10, 10, 3], &LmConfig::default()).is_err());
        let cfg = LmConfig { lambda_up: 0.5, ..LmConfig::default() };
        assert!(train_lm(&bad, &[2, 10, 10, 3], &cfg).unwrap_err().is_config());
    }

    #[test]
    fn deterministic() {
        let data: Vec<TrainingExample> =
            (0..20).map(|i| TrainingExample { input: vec![i as f64 / 20.0], target: vec![(i as f64).cos()] }).collect();
        let cfg = LmConfig { max_epochs: 30, ..LmConfig::default() };
        let a = train_lm(&data, &[1, 10, 10, 1], &cfg).unwrap();
        let b = train_lm(&data, &[1, 10, 10, 1], &cfg).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }
}
