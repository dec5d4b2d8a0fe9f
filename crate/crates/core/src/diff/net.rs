//! Fully connected feedforward networks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{Parameters, Tensor};
use super::tape::{dense_dot, Tape, Var};
use crate::real::Real;

/// Floor added after the output softplus so concentrations stay positive.
pub const POSITIVE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Softplus,
    Tanh,
    /// softplus(x) + [`POSITIVE_FLOOR`].
    SoftplusFloor,
}

impl Activation {
    fn apply_scalar<T: Real>(self, x: T) -> T {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(T::zero()),
            Activation::Softplus => x.max(T::zero()) + (-x.abs()).exp().ln_1p(),
            Activation::Tanh => x.tanh(),
            Activation::SoftplusFloor => x.max(T::zero()) + (-x.abs()).exp().ln_1p() + T::lit(POSITIVE_FLOOR),
        }
    }

    fn apply_tape<T: Real>(self, tape: &mut Tape<'_, T>, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::Relu => tape.relu(x),
            Activation::Softplus => tape.softplus(x),
            Activation::Tanh => tape.tanh(x),
            Activation::SoftplusFloor => {
                let s = tape.softplus(x);
                tape.offset(s, T::lit(POSITIVE_FLOOR))
            }
        }
    }
}

/// Multilayer perceptron `sizes[0] → … → sizes[n]`.
///
/// Weights are row-major `out × in`; initialization is Glorot-uniform with
/// zero biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet<T> {
    sizes: Vec<usize>,
    hidden: Activation,
    output: Activation,
    params: Vec<Tensor<T>>,
}

/// Tape handles of a network's parameters, in [`Parameters::tensors`] order.
#[derive(Debug, Clone)]
pub struct BoundNet {
    pub vars: Vec<Var>,
}

impl<T: Real> DenseNet<T> {
    pub fn new<R: Rng + ?Sized>(
        name: &str,
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "invalid layer sizes {sizes:?}");
        let mut params = Vec::with_capacity(2 * (sizes.len() - 1));
        for (l, w) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut weight = Tensor::zeros(format!("{name}.{l}.weight"), vec![fan_out, fan_in]);
            for v in &mut weight.data {
                *v = T::lit(rng.random_range(-limit..limit));
            }
            params.push(weight);
            params.push(Tensor::zeros(format!("{name}.{l}.bias"), vec![fan_out]));
        }
        Self { sizes: sizes.to_vec(), hidden, output, params }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    fn depth(&self) -> usize {
        self.sizes.len() - 1
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.depth() {
            self.output
        } else {
            self.hidden
        }
    }

    /// Tape-free evaluation.
    pub fn forward(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.input_dim(), "network input length");
        let mut cur = x.to_vec();
        for l in 0..self.depth() {
            let (w, b) = (&self.params[2 * l], &self.params[2 * l + 1]);
            let cols = self.sizes[l];
            let act = self.activation(l);
            cur = w
                .data
                .chunks_exact(cols)
                .zip(&b.data)
                .map(|(row, &bi)| act.apply_scalar(dense_dot(row, &cur) + bi))
                .collect();
        }
        cur
    }

    /// Registers the parameters as trainable leaves.
    pub fn bind<'a>(&'a self, tape: &mut Tape<'a, T>) -> BoundNet {
        BoundNet { vars: self.params.iter().map(|p| tape.param(&p.data)).collect() }
    }

    /// Registers the parameters as constants (no gradient is computed).
    pub fn bind_frozen<'a>(&'a self, tape: &mut Tape<'a, T>) -> BoundNet {
        BoundNet { vars: self.params.iter().map(|p| tape.frozen(&p.data)).collect() }
    }

    /// Applies the network to a tape node using previously bound parameters.
    pub fn apply(&self, tape: &mut Tape<'_, T>, bound: &BoundNet, x: Var) -> Var {
        let mut cur = x;
        for l in 0..self.depth() {
            let (rows, cols) = (self.sizes[l + 1], self.sizes[l]);
            let wx = tape.matvec(bound.vars[2 * l], cur, rows, cols);
            let pre = tape.add(wx, bound.vars[2 * l + 1]);
            cur = self.activation(l).apply_tape(tape, pre);
        }
        cur
    }

    /// Scales every output-layer parameter, e.g. to zero for tests.
    pub fn scale_output_layer(&mut self, c: T) {
        let n = self.params.len();
        for p in &mut self.params[n - 2..] {
            p.data.iter_mut().for_each(|v| *v = *v * c);
        }
    }
}

impl<T: Real> Parameters<T> for DenseNet<T> {
    fn tensors(&self) -> Vec<&Tensor<T>> {
        self.params.iter().collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.params.iter_mut().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tape_and_direct_forward_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for hidden in [Activation::Relu, Activation::Softplus, Activation::Tanh] {
            let net = DenseNet::<f64>::new("n", &[5, 7, 3], hidden, Activation::SoftplusFloor, &mut rng);
            let x: Vec<f64> = (0..5).map(|i| i as f64 * 0.3 - 0.5).collect();
            let mut tape = Tape::new();
            let b = net.bind(&mut tape);
            let xv = tape.constant(x.clone());
            let y = net.apply(&mut tape, &b, xv);
            assert_eq!(tape.value(y), net.forward(&x).as_slice());
            assert!(net.forward(&x).iter().all(|&v| v >= POSITIVE_FLOOR));
        }
    }

    #[test]
    fn glorot_bounds_and_zero_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = DenseNet::<f64>::new("n", &[10, 6], Activation::Relu, Activation::Identity, &mut rng);
        let limit = (6.0_f64 / 16.0).sqrt();
        let t = net.tensors();
        assert!(t[0].data.iter().all(|w| w.abs() <= limit));
        assert!(t[1].data.iter().all(|&b| b == 0.0));
        assert_eq!(net.num_params(), 66);
    }
}
