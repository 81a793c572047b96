//! Fully connected network with tanh hidden layers and a linear output layer.
//!
//! Parameters live in one flat vector. Layer `l` stores its weight matrix
//! row-major (`out x in`) followed by its bias vector.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

impl Mlp {
    /// Network with every weight and bias set to zero.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::contract("a network needs at least two non-empty layers"));
        }
        let n = sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        Ok(Self { sizes: sizes.to_vec(), params: vec![0.0; n] })
    }

    /// Weights and biases uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn init(sizes: &[usize], seed: u64) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        let mut rng = seeded(seed);
        let mut k = 0;
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..w[1] * (w[0] + 1) {
                net.params[k] = rng.random_range(-bound..=bound);
                k += 1;
            }
        }
        Ok(net)
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let net = Self::zeros(sizes)?;
        if params.len() != net.params.len() {
            return Err(Error::contract(format!("expected {} parameters, got {}", net.params.len(), params.len())));
        }
        Ok(Self { params, ..net })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.sizes.last().expect("at least two layers")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Start of each layer's block in the parameter vector.
    fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.sizes.len() - 1);
        let mut k = 0;
        for w in self.sizes.windows(2) {
            out.push(k);
            k += w[1] * (w[0] + 1);
        }
        out
    }

    /// Parameter index of the first-layer weight from input `input` to hidden unit `unit`.
    pub fn first_layer_weight_index(&self, unit: usize, input: usize) -> usize {
        unit * self.sizes[0] + input
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_inputs() {
            return Err(Error::contract(format!("network expects {} inputs, got {}", self.n_inputs(), x.len())));
        }
        Ok(())
    }

    /// Activations of every layer, input first.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let last = self.sizes.len() - 2;
        let mut acts = vec![x.to_vec()];
        for (l, (w, off)) in self.sizes.windows(2).zip(self.offsets()).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let prev = &acts[l];
            let bias = off + n_out * n_in;
            let next: Vec<f64> = (0..n_out)
                .map(|i| {
                    let row = &self.params[off + i * n_in..off + (i + 1) * n_in];
                    let z = self.params[bias + i] + row.iter().zip(prev).map(|(a, b)| a * b).sum::<f64>();
                    if l == last {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
            acts.push(next);
        }
        acts
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.activations(x).pop().expect("output layer"))
    }

    /// Outputs and their Jacobian with respect to the parameters
    /// (`n_outputs x n_params`), by backpropagation.
    pub fn jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        self.check_input(x)?;
        let acts = self.activations(x);
        let offsets = self.offsets();
        let n_out = self.n_outputs();
        let n_layers = self.sizes.len() - 1;
        let mut jac = DMatrix::zeros(n_out, self.params.len());
        for k in 0..n_out {
            let mut delta = vec![0.0; n_out];
            delta[k] = 1.0;
            for l in (0..n_layers).rev() {
                let (n_in, n_o) = (self.sizes[l], self.sizes[l + 1]);
                let off = offsets[l];
                let prev = &acts[l];
                for i in 0..n_o {
                    for j in 0..n_in {
                        jac[(k, off + i * n_in + j)] = delta[i] * prev[j];
                    }
                    jac[(k, off + n_o * n_in + i)] = delta[i];
                }
                if l > 0 {
                    delta = (0..n_in)
                        .map(|j| {
                            let back: f64 = (0..n_o).map(|i| self.params[off + i * n_in + j] * delta[i]).sum();
                            back * (1.0 - prev[j] * prev[j])
                        })
                        .collect();
                }
            }
        }
        let out = acts[n_layers].clone();
        Ok((out, jac))
    }
}
