//! Monte-Carlo information value of a fixation and the action network
//! trained to maximize it.

use rand::Rng;

use super::vae::{HierarchicalVae, VaeBound};
use crate::diff::{Activation, BoundNet, DenseNet, Optimizer, Parameters, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::numerics::sampling::standard_normal;

pub const ACTION_HIDDEN: [usize; 2] = [64, 32];
pub const DEFAULT_SIGMA_ACTION: f64 = 0.15;
pub const DEFAULT_MC_SAMPLES: usize = 5;

/// Common random numbers for one Ṽ evaluation: K draws of s̃ and z′ noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueNoise {
    pub eps_s: Vec<Vec<f64>>,
    pub eps_z: Vec<Vec<f64>>,
}

impl ValueNoise {
    pub fn draw<R: Rng + ?Sized>(k: usize, s_dim: usize, z_dim: usize, rng: &mut R) -> Self {
        let mut eps_s = Vec::with_capacity(k);
        let mut eps_z = Vec::with_capacity(k);
        for _ in 0..k {
            eps_s.push((0..s_dim).map(|_| standard_normal(rng)).collect());
            eps_z.push((0..z_dim).map(|_| standard_normal(rng)).collect());
        }
        Self { eps_s, eps_z }
    }

    pub fn k(&self) -> usize {
        self.eps_s.len()
    }
}

/// Ṽ(l) = H(q₂(s | h)) − (1/K) Σₖ H(q₂(s | h + μ₁(x⁽ᵏ⁾, l))) on `tape`,
/// where s̃ₖ ~ q₂(s | h), z′ₖ ~ p(z | s̃ₖ, l) and x⁽ᵏ⁾ = dec₁(z′ₖ).
///
/// `loc` is a tape node of length 2; gradients reach it through every
/// network the imagined glimpse passes through.
pub fn approx_value_on_tape(
    vae: &HierarchicalVae,
    tape: &mut Tape<'_, f64>,
    b: &VaeBound,
    h: &[f64],
    loc: Var,
    noise: &ValueNoise,
) -> Result<Var> {
    let k = noise.k();
    if k == 0 {
        return Err(Error::InvalidParams("at least one MC sample is required".into()));
    }
    let q2 = vae.posterior_s(h)?;
    let h0 = q2.entropy();
    let h_const = tape.constant(h.to_vec());
    let mut total = None;
    for (es, ez) in noise.eps_s.iter().zip(&noise.eps_z) {
        let s = tape.constant(q2.transform_noise(es));
        let (mp, lsp) = vae.dec2_on_tape(tape, b, s, loc);
        let z = tape.reparam(mp, lsp, ez);
        let x = vae.dec1_on_tape(tape, b, z);
        let (mz, _) = vae.enc1_on_tape(tape, b, x, loc);
        let h_next = tape.add(h_const, mz);
        let (_, ls) = vae.enc2_on_tape(tape, b, h_next);
        let ent = tape.gaussian_entropy(ls);
        total = Some(match total {
            None => ent,
            Some(t) => tape.add(t, ent),
        });
    }
    let mean = tape.scale(total.expect("k ≥ 1"), -1.0 / k as f64);
    Ok(tape.offset(mean, h0))
}

/// Tape-free Ṽ at a fixed location.
pub fn approx_value(vae: &HierarchicalVae, h: &[f64], l: [f64; 2], noise: &ValueNoise) -> Result<f64> {
    let mut tape = Tape::new();
    let b = vae.bind_frozen(&mut tape);
    let loc = tape.constant(l.to_vec());
    let v = approx_value_on_tape(vae, &mut tape, &b, h, loc, noise)?;
    Ok(tape.scalar(v))
}

/// Maps E[q₂(s)] to the mean of a Gaussian over fixation locations.
///
/// The output layer is tanh so the mean lies inside the image; sampled
/// locations are clamped to [−1, 1]².
#[derive(Debug, Clone)]
pub struct ActionNet {
    net: DenseNet<f64>,
    sigma: f64,
    optimizer: Optimizer<f64>,
}

/// Outcome of one BAS call.
#[derive(Debug, Clone, PartialEq)]
pub struct BasStep {
    /// Location to execute, clamped to [−1, 1]².
    pub l: [f64; 2],
    /// Ṽ at `l` before the action-network update; only computed when learning.
    pub value: Option<f64>,
}

impl ActionNet {
    pub fn new<R: Rng + ?Sized>(s_dim: usize, sigma: f64, learning_rate: f64, rng: &mut R) -> Result<Self> {
        Self::with_activation(s_dim, sigma, learning_rate, Activation::Relu, rng)
    }

    pub fn with_activation<R: Rng + ?Sized>(
        s_dim: usize,
        sigma: f64,
        learning_rate: f64,
        hidden: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParams(format!("sigma_action must be positive, got {sigma}")));
        }
        let sizes = [s_dim, ACTION_HIDDEN[0], ACTION_HIDDEN[1], 2];
        let net = DenseNet::new("action", &sizes, hidden, Activation::Tanh, rng);
        Ok(Self { net, sigma, optimizer: Optimizer::adam(learning_rate) })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mean_location(&self, s_mean: &[f64]) -> [f64; 2] {
        let m = self.net.forward(s_mean);
        [m[0], m[1]]
    }

    pub fn bind<'a>(&'a self, tape: &mut Tape<'a, f64>) -> BoundNet {
        self.net.bind(tape)
    }

    /// Location node `clamp(net(s) + σ·eps)`; clamped coordinates become
    /// constants.
    pub fn location_on_tape(&self, tape: &mut Tape<'_, f64>, bound: &BoundNet, s_mean: &[f64], eps: [f64; 2]) -> Var {
        let s = tape.constant(s_mean.to_vec());
        let mean = self.net.apply(tape, bound, s);
        let noise = tape.constant(vec![self.sigma * eps[0], self.sigma * eps[1]]);
        let raw = tape.add(mean, noise);
        let vals = tape.value(raw).to_vec();
        let parts: Vec<Var> = (0..2)
            .map(|i| if vals[i].abs() > 1.0 { tape.constant(vec![vals[i].signum()]) } else { tape.slice(raw, i, 1) })
            .collect();
        tape.concat(&parts)
    }

    /// Ṽ at the sampled location, its gradient with respect to the network
    /// parameters, and the executed location.
    pub fn value_gradients(
        &self,
        vae: &HierarchicalVae,
        h: &[f64],
        eps: [f64; 2],
        noise: &ValueNoise,
    ) -> Result<(BasStep, Vec<Vec<f64>>)> {
        let s_mean = vae.posterior_s(h)?.mean().to_vec();
        let mut tape = Tape::new();
        let vb = vae.bind_frozen(&mut tape);
        let ab = self.net.bind(&mut tape);
        let loc = self.location_on_tape(&mut tape, &ab, &s_mean, eps);
        let l = [tape.value(loc)[0], tape.value(loc)[1]];
        let v = approx_value_on_tape(vae, &mut tape, &vb, h, loc, noise)?;
        let g = tape.backward(v)?;
        let grads = ab.vars.iter().zip(self.net.tensors()).map(|(&var, t)| g.wrt(var, t.len())).collect();
        Ok((BasStep { l, value: Some(tape.scalar(v)) }, grads))
    }

    /// Samples a fixation for the running sum `h` and, if `learn`, takes one
    /// ascent step on Ṽ with the same random numbers.
    pub fn bas_select<R: Rng + ?Sized>(
        &mut self,
        vae: &HierarchicalVae,
        h: &[f64],
        k: usize,
        learn: bool,
        rng: &mut R,
    ) -> Result<BasStep> {
        let eps = [standard_normal(rng), standard_normal(rng)];
        if !learn {
            let s_mean = vae.posterior_s(h)?.mean().to_vec();
            let m = self.mean_location(&s_mean);
            let l = [(m[0] + self.sigma * eps[0]).clamp(-1.0, 1.0), (m[1] + self.sigma * eps[1]).clamp(-1.0, 1.0)];
            return Ok(BasStep { l, value: None });
        }
        let d = vae.dims();
        let noise = ValueNoise::draw(k, d.s, d.z, rng);
        let (step, mut grads) = self.value_gradients(vae, h, eps, &noise)?;
        grads.iter_mut().flatten().for_each(|g| *g = -*g);
        self.optimizer.step(self.net.tensors_mut(), &grads)?;
        Ok(step)
    }
}

impl Parameters<f64> for ActionNet {
    fn tensors(&self) -> Vec<&Tensor<f64>> {
        self.net.tensors()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor<f64>> {
        self.net.tensors_mut()
    }
}

/// Uniform location on [−1, 1]².
pub fn uniform_location<R: Rng + ?Sized>(rng: &mut R) -> [f64; 2] {
    [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)]
}
