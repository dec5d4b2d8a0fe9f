//! Amortized Dirichlet perception for controllable Markov chains.
//!
//! The network maps `(onehot(s), onehot(a), h[s][a])` to the concentration
//! of q(z | h), the posterior over the transition distribution of `(s, a)`.
//! Training minimizes the negated ELBO
//! `−E_q[Σᵢ hᵢ log zᵢ] + β · KL(Dir(α) ‖ Dir(1))` one `(s, a)` term at a time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diff::{Activation, DenseNet, Optimizer, OptimizerKind, Parameters, Tape, Var};
use crate::error::{Error, Result};
use crate::numerics::DirichletParams;
use crate::Dirichlet;

/// Hidden layer widths of the perception network.
pub const HIDDEN_UNITS: [usize; 2] = [16, 16];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElboMode {
    /// E_q[log zᵢ] = ψ(αᵢ) − ψ(α₀) in closed form.
    Analytic,
    /// One Dirichlet sample z̃ per step, held constant under differentiation.
    /// Only the KL term then carries gradient, so this variant is biased.
    Mc,
}

/// How raw counts are presented to the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountEncoding {
    Raw,
    Log1p,
}

/// Source of Dirichlet posteriors over transition distributions.
pub trait PosteriorModel {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn posterior(&self, s: usize, a: usize, h: &[f64]) -> Result<Dirichlet>;
}

/// Exact conjugate posterior Dir(h + prior) of the multinomial model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugatePosterior {
    pub n_states: usize,
    pub n_actions: usize,
    pub prior: f64,
}

impl PosteriorModel for ConjugatePosterior {
    fn n_states(&self) -> usize {
        self.n_states
    }

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn posterior(&self, _s: usize, _a: usize, h: &[f64]) -> Result<Dirichlet> {
        DirichletParams::new(h.iter().map(|c| c + self.prior).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerceptionConfig {
    pub learning_rate: f64,
    pub beta: f64,
    pub optimizer: OptimizerKind,
    pub encoding: CountEncoding,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta: 1.0, optimizer: OptimizerKind::Adam, encoding: CountEncoding::Raw }
    }
}

#[derive(Debug, Clone)]
pub struct CmcPerception {
    net: DenseNet<f64>,
    n_states: usize,
    n_actions: usize,
    config: PerceptionConfig,
    optimizer: Optimizer<f64>,
}

/// Negated ELBO for one `(s, a)` term, evaluated without a tape.
pub fn cmc_elbo<R: Rng + ?Sized>(alpha: &Dirichlet, h: &[f64], beta: f64, mode: ElboMode, rng: &mut R) -> Result<f64> {
    check_counts(alpha.dim(), h)?;
    let kl = alpha.kl(&DirichletParams::symmetric(alpha.dim(), 1.0)?)?;
    let likelihood: f64 = match mode {
        ElboMode::Analytic => h.iter().zip(alpha.expected_log()).map(|(c, e)| c * e).sum(),
        ElboMode::Mc => {
            let z = alpha.sample(rng);
            h.iter().zip(z.probs()).map(|(c, zi)| c * zi.max(f64::MIN_POSITIVE).ln()).sum()
        }
    };
    Ok(beta * kl - likelihood)
}

fn check_counts(n: usize, h: &[f64]) -> Result<()> {
    if h.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: h.len() });
    }
    if h.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(Error::InvalidParams("history counts must be finite and nonnegative".into()));
    }
    Ok(())
}

impl CmcPerception {
    pub fn new<R: Rng + ?Sized>(
        n_states: usize,
        n_actions: usize,
        config: PerceptionConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if n_states < 2 || n_actions < 1 {
            return Err(Error::InvalidParams("perception needs ≥2 states and ≥1 action".into()));
        }
        if !(config.beta >= 0.0 && config.beta.is_finite()) {
            return Err(Error::InvalidParams(format!("beta must be ≥ 0, got {}", config.beta)));
        }
        let sizes = [2 * n_states + n_actions, HIDDEN_UNITS[0], HIDDEN_UNITS[1], n_states];
        let net = DenseNet::new("perception", &sizes, Activation::Softplus, Activation::SoftplusFloor, rng);
        let optimizer = Optimizer::new(config.optimizer, config.learning_rate)?;
        Ok(Self { net, n_states, n_actions, config, optimizer })
    }

    pub fn config(&self) -> &PerceptionConfig {
        &self.config
    }

    pub fn net(&self) -> &DenseNet<f64> {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut DenseNet<f64> {
        &mut self.net
    }

    /// Network input for `(s, a, h)`.
    pub fn encode_input(&self, s: usize, a: usize, h: &[f64]) -> Result<Vec<f64>> {
        if s >= self.n_states {
            return Err(Error::IndexOutOfRange { index: s, bound: self.n_states });
        }
        if a >= self.n_actions {
            return Err(Error::IndexOutOfRange { index: a, bound: self.n_actions });
        }
        check_counts(self.n_states, h)?;
        let mut x = vec![0.0; 2 * self.n_states + self.n_actions];
        x[s] = 1.0;
        x[self.n_states + a] = 1.0;
        for (dst, &c) in x[self.n_states + self.n_actions..].iter_mut().zip(h) {
            *dst = match self.config.encoding {
                CountEncoding::Raw => c,
                CountEncoding::Log1p => c.ln_1p(),
            };
        }
        Ok(x)
    }

    /// q(z_{s,a} | h) as Dirichlet concentrations.
    pub fn infer_posterior(&self, s: usize, a: usize, h: &[f64]) -> Result<Dirichlet> {
        let alpha = self.net.forward(&self.encode_input(s, a, h)?);
        if alpha.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node: 0 });
        }
        DirichletParams::new(alpha)
    }

    /// Builds the negated ELBO on `tape`, returning the loss node and the
    /// bound network parameters.
    pub fn loss_on_tape<'a, R: Rng + ?Sized>(
        &'a self,
        tape: &mut Tape<'a, f64>,
        s: usize,
        a: usize,
        h: &[f64],
        mode: ElboMode,
        rng: &mut R,
    ) -> Result<(Var, Vec<Var>)> {
        let x = self.encode_input(s, a, h)?;
        let bound = self.net.bind(tape);
        let xv = tape.constant(x);
        let alpha = self.net.apply(tape, &bound, xv);
        let kl = tape.dirichlet_kl(alpha, &vec![1.0; self.n_states]);
        let kl = tape.scale(kl, self.config.beta);
        let loss = match mode {
            ElboMode::Analytic => {
                let elog = tape.dirichlet_expected_log(alpha);
                let hv = tape.constant(h.to_vec());
                let like = tape.dot(hv, elog);
                tape.sub(kl, like)
            }
            ElboMode::Mc => {
                let q = DirichletParams::new(tape.value(alpha).to_vec())?;
                let z = q.sample(rng);
                let like: f64 = h.iter().zip(z.probs()).map(|(c, zi)| c * zi.max(f64::MIN_POSITIVE).ln()).sum();
                tape.offset(kl, -like)
            }
        };
        Ok((loss, bound.vars))
    }

    /// One optimizer step on the `(s, a)` ELBO term. Returns the loss
    /// before the update.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        s: usize,
        a: usize,
        h: &[f64],
        mode: ElboMode,
        rng: &mut R,
    ) -> Result<f64> {
        let (loss, grads) = {
            let mut tape = Tape::new();
            let (out, vars) = self.loss_on_tape(&mut tape, s, a, h, mode, rng)?;
            let g = tape.backward(out)?;
            let sizes: Vec<usize> = self.net.tensors().iter().map(|t| t.len()).collect();
            (tape.scalar(out), vars.iter().zip(sizes).map(|(&v, n)| g.wrt(v, n)).collect::<Vec<_>>())
        };
        self.optimizer.step(self.net.tensors_mut(), &grads)?;
        Ok(loss)
    }

    /// One optimizer step on the mean of several `(s, a, h)` terms. Returns
    /// the mean loss before the update.
    pub fn train_batch<R: Rng + ?Sized>(
        &mut self,
        batch: &[(usize, usize, Vec<f64>)],
        mode: ElboMode,
        rng: &mut R,
    ) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidParams("empty batch".into()));
        }
        let sizes: Vec<usize> = self.net.tensors().iter().map(|t| t.len()).collect();
        let mut grads: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![0.0; n]).collect();
        let mut total = 0.0;
        let w = 1.0 / batch.len() as f64;
        for (s, a, h) in batch {
            let mut tape = Tape::new();
            let (out, vars) = self.loss_on_tape(&mut tape, *s, *a, h, mode, rng)?;
            let g = tape.backward(out)?;
            total += tape.scalar(out);
            for ((acc, &v), &n) in grads.iter_mut().zip(&vars).zip(&sizes) {
                acc.iter_mut().zip(g.wrt(v, n)).for_each(|(x, y)| *x += w * y);
            }
        }
        self.optimizer.step(self.net.tensors_mut(), &grads)?;
        Ok(total * w)
    }
}

impl PosteriorModel for CmcPerception {
    fn n_states(&self) -> usize {
        self.n_states
    }

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn posterior(&self, s: usize, a: usize, h: &[f64]) -> Result<Dirichlet> {
        self.infer_posterior(s, a, h)
    }
}

impl Parameters<f64> for CmcPerception {
    fn tensors(&self) -> Vec<&crate::diff::Tensor<f64>> {
        self.net.tensors()
    }

    fn tensors_mut(&mut self) -> Vec<&mut crate::diff::Tensor<f64>> {
        self.net.tensors_mut()
    }
}
