use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Huber, Predictor};
use crate::error::{Error, Result};

/// Dense layer `a -> W a + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

/// Feed-forward network with sigmoid hidden layers and a scalar identity
/// output. The same type doubles as the container for its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

impl MlpModel {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("network needs at least one layer".into()));
        }
        for (k, layer) in layers.iter().enumerate() {
            if layer.b.len() != layer.w.nrows() {
                return Err(Error::DimensionMismatch { expected: layer.w.nrows(), got: layer.b.len() });
            }
            if k > 0 && layer.w.ncols() != layers[k - 1].w.nrows() {
                return Err(Error::DimensionMismatch { expected: layers[k - 1].w.nrows(), got: layer.w.ncols() });
            }
        }
        let out = layers.last().unwrap().w.nrows();
        if out != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: out });
        }
        Ok(Self { layers })
    }

    /// Weights uniform in `±1/sqrt(fan_in)` and zero biases, fixed by `seed`.
    pub fn init(input_dim: usize, hidden: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
                Layer {
                    w: DMatrix::from_fn(fan_out, fan_in, |_, _| rng.random_range(-bound..=bound)),
                    b: DVector::zeros(fan_out),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    fn activations(&self, x: &[f64]) -> Vec<DVector<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(DVector::from_column_slice(x));
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.w * &acts[k] + &layer.b;
            if k < last {
                z.apply(|v| *v = sigmoid(*v));
            }
            acts.push(z);
        }
        acts
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        Ok(self.activations(x).last().unwrap()[0])
    }

    /// Exact gradient of `loss(y, forward(x))` with respect to every weight
    /// and bias, by backpropagation.
    pub fn gradient(&self, x: &[f64], y: f64, loss: &Huber) -> Result<MlpModel> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        let acts = self.activations(x);
        let out = acts.last().unwrap()[0];
        let mut delta = DVector::from_element(1, loss.dz(y, out));
        let mut grads = Vec::with_capacity(self.layers.len());
        for k in (0..self.layers.len()).rev() {
            let gw = &delta * acts[k].transpose();
            grads.push(Layer { w: gw, b: delta.clone() });
            if k > 0 {
                let back = self.layers[k].w.transpose() * &delta;
                // acts[k] is a sigmoid output: derivative a (1 - a)
                delta = back.zip_map(&acts[k], |g, a| g * a * (1.0 - a));
            }
        }
        grads.reverse();
        Ok(MlpModel { layers: grads })
    }

    /// `self -= step * grad`.
    pub fn descend(&mut self, grad: &MlpModel, step: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grad.layers) {
            layer.w -= &g.w * step;
            layer.b.axpy(-step, &g.b, 1.0);
        }
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.w.iter().chain(l.b.iter()).copied()).collect()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut it = p.iter().copied();
        for l in &mut self.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v = it.next().expect("parameter vector too short");
            }
        }
    }
}

impl Predictor for MlpModel {
    fn predict(&self, x: &[f64]) -> f64 {
        self.activations(x).last().unwrap()[0]
    }
}
