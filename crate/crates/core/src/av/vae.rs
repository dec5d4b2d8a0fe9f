//! Two-level Gaussian VAE over glimpse sequences.
//!
//! Low level: q₁(z | x, l) and p(x | z) = N(dec₁(z), I). High level:
//! q₂(s | h) with h = Σₜ zₜ, prior p(s) = N(0, I), and p(z | s, l).
//! Every encoder emits `[mean, raw]` with σ = exp(½·raw).

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::foveate::Glimpse;
use crate::diff::{Activation, BoundNet, DenseNet, Parameters, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::numerics::sampling::standard_normal;
use crate::numerics::GaussianParams;
use crate::Gaussian;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VaeDims {
    pub glimpse: usize,
    pub z: usize,
    pub s: usize,
    pub hidden: usize,
}

/// How the running sum fed to the high-level encoder is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialMode {
    /// Sum of reparameterized samples.
    Train,
    /// Sum of posterior means.
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalVae {
    dims: VaeDims,
    enc1: DenseNet<f64>,
    dec1: DenseNet<f64>,
    enc2: DenseNet<f64>,
    dec2: DenseNet<f64>,
}

/// Tape handles of all four networks.
#[derive(Debug, Clone)]
pub struct VaeBound {
    enc1: BoundNet,
    dec1: BoundNet,
    enc2: BoundNet,
    dec2: BoundNet,
}

impl VaeBound {
    /// Parameter handles in [`Parameters::tensors`] order.
    pub fn vars(&self) -> Vec<Var> {
        [&self.enc1, &self.dec1, &self.enc2, &self.dec2].iter().flat_map(|b| b.vars.iter().copied()).collect()
    }
}

/// Result of encoding one glimpse.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodeStep {
    pub q1: Gaussian,
    pub eps: Vec<f64>,
    pub z: Vec<f64>,
}

/// One completed (or partial) fixation sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub glimpses: Vec<Vec<f64>>,
    pub locations: Vec<[f64; 2]>,
    pub eps_z: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub z_mean: Vec<Vec<f64>>,
    /// Running sum fed to the high-level encoder.
    pub h: Vec<f64>,
    /// Noise for the reparameterized s̃ in the ELBO.
    pub eps_s: Vec<f64>,
    pub mode: TrialMode,
    pub label: Option<usize>,
}

impl TrialRecord {
    pub fn new<R: Rng + ?Sized>(dims: &VaeDims, mode: TrialMode, label: Option<usize>, rng: &mut R) -> Self {
        Self {
            glimpses: Vec::new(),
            locations: Vec::new(),
            eps_z: Vec::new(),
            z: Vec::new(),
            z_mean: Vec::new(),
            h: vec![0.0; dims.z],
            eps_s: (0..dims.s).map(|_| standard_normal(rng)).collect(),
            mode,
            label,
        }
    }

    pub fn len(&self) -> usize {
        self.glimpses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.glimpses.is_empty()
    }
}

fn split_gaussian(out: &[f64]) -> Result<Gaussian> {
    let d = out.len() / 2;
    GaussianParams::new(out[..d].to_vec(), out[d..].iter().map(|r| 0.5 * r).collect())
}

fn with_location(v: &[f64], l: [f64; 2]) -> Vec<f64> {
    let mut x = Vec::with_capacity(v.len() + 2);
    x.extend_from_slice(v);
    x.extend_from_slice(&l);
    x
}

impl HierarchicalVae {
    /// Networks with two ReLU hidden layers of `dims.hidden` units.
    pub fn new<R: Rng + ?Sized>(dims: VaeDims, rng: &mut R) -> Result<Self> {
        Self::with_activation(dims, Activation::Relu, rng)
    }

    pub fn with_activation<R: Rng + ?Sized>(dims: VaeDims, hidden: Activation, rng: &mut R) -> Result<Self> {
        if dims.glimpse == 0 || dims.z == 0 || dims.s == 0 || dims.hidden == 0 {
            return Err(Error::InvalidParams(format!("invalid VAE dimensions {dims:?}")));
        }
        let hd = dims.hidden;
        let id = Activation::Identity;
        Ok(Self {
            dims,
            enc1: DenseNet::new("enc1", &[dims.glimpse + 2, hd, hd, 2 * dims.z], hidden, id, rng),
            dec1: DenseNet::new("dec1", &[dims.z, hd, hd, dims.glimpse], hidden, id, rng),
            enc2: DenseNet::new("enc2", &[dims.z, hd, hd, 2 * dims.s], hidden, id, rng),
            dec2: DenseNet::new("dec2", &[dims.s + 2, hd, hd, 2 * dims.z], hidden, id, rng),
        })
    }

    pub fn dims(&self) -> &VaeDims {
        &self.dims
    }

    /// q₁(z | x, l).
    pub fn encode_glimpse(&self, x: &[f64], l: [f64; 2]) -> Result<Gaussian> {
        self.check_len(x.len(), self.dims.glimpse)?;
        split_gaussian(&self.enc1.forward(&with_location(x, l)))
    }

    /// Mean of p(x | z).
    pub fn decode_glimpse(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_len(z.len(), self.dims.z)?;
        Ok(self.dec1.forward(z))
    }

    /// q₂(s | h).
    pub fn posterior_s(&self, h: &[f64]) -> Result<Gaussian> {
        self.check_len(h.len(), self.dims.z)?;
        split_gaussian(&self.enc2.forward(h))
    }

    /// p(z | s, l).
    pub fn prior_z(&self, s: &[f64], l: [f64; 2]) -> Result<Gaussian> {
        self.check_len(s.len(), self.dims.s)?;
        split_gaussian(&self.dec2.forward(&with_location(s, l)))
    }

    fn check_len(&self, got: usize, expected: usize) -> Result<()> {
        if got != expected {
            return Err(Error::DimensionMismatch { expected, got });
        }
        Ok(())
    }

    /// Encodes `glimpse`, samples z by reparameterization and adds either
    /// the sample or the mean (per `mode`) to `h`.
    pub fn encode_step<R: Rng + ?Sized>(
        &self,
        glimpse: &Glimpse,
        h: &mut [f64],
        mode: TrialMode,
        rng: &mut R,
    ) -> Result<EncodeStep> {
        self.check_len(h.len(), self.dims.z)?;
        let q1 = self.encode_glimpse(&glimpse.x, glimpse.l)?;
        let eps: Vec<f64> = (0..self.dims.z).map(|_| standard_normal(rng)).collect();
        let z = q1.transform_noise(&eps);
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node: 0 });
        }
        let add = match mode {
            TrialMode::Train => &z,
            TrialMode::Eval => q1.mean(),
        };
        h.iter_mut().zip(add).for_each(|(a, b)| *a += b);
        Ok(EncodeStep { q1, eps, z })
    }

    /// Appends a glimpse to `trial` through [`Self::encode_step`].
    pub fn observe<R: Rng + ?Sized>(&self, trial: &mut TrialRecord, glimpse: &Glimpse, rng: &mut R) -> Result<()> {
        let step = self.encode_step(glimpse, &mut trial.h, trial.mode, rng)?;
        trial.glimpses.push(glimpse.x.clone());
        trial.locations.push(glimpse.l);
        trial.eps_z.push(step.eps);
        trial.z.push(step.z);
        trial.z_mean.push(step.q1.mean().to_vec());
        Ok(())
    }

    pub fn bind<'a>(&'a self, tape: &mut Tape<'a, f64>) -> VaeBound {
        VaeBound {
            enc1: self.enc1.bind(tape),
            dec1: self.dec1.bind(tape),
            enc2: self.enc2.bind(tape),
            dec2: self.dec2.bind(tape),
        }
    }

    pub fn bind_frozen<'a>(&'a self, tape: &mut Tape<'a, f64>) -> VaeBound {
        VaeBound {
            enc1: self.enc1.bind_frozen(tape),
            dec1: self.dec1.bind_frozen(tape),
            enc2: self.enc2.bind_frozen(tape),
            dec2: self.dec2.bind_frozen(tape),
        }
    }

    fn gaussian_on_tape(tape: &mut Tape<'_, f64>, out: Var, d: usize) -> (Var, Var) {
        let mean = tape.slice(out, 0, d);
        let raw = tape.slice(out, d, d);
        (mean, tape.scale(raw, 0.5))
    }

    /// (mean, log σ) of q₁(z | x, l) for a tape input `x` and location `l`.
    pub fn enc1_on_tape(&self, tape: &mut Tape<'_, f64>, b: &VaeBound, x: Var, l: Var) -> (Var, Var) {
        let inp = tape.concat(&[x, l]);
        let out = self.enc1.apply(tape, &b.enc1, inp);
        Self::gaussian_on_tape(tape, out, self.dims.z)
    }

    pub fn dec1_on_tape(&self, tape: &mut Tape<'_, f64>, b: &VaeBound, z: Var) -> Var {
        self.dec1.apply(tape, &b.dec1, z)
    }

    /// (mean, log σ) of q₂(s | h).
    pub fn enc2_on_tape(&self, tape: &mut Tape<'_, f64>, b: &VaeBound, h: Var) -> (Var, Var) {
        let out = self.enc2.apply(tape, &b.enc2, h);
        Self::gaussian_on_tape(tape, out, self.dims.s)
    }

    /// (mean, log σ) of p(z | s, l).
    pub fn dec2_on_tape(&self, tape: &mut Tape<'_, f64>, b: &VaeBound, s: Var, l: Var) -> (Var, Var) {
        let inp = tape.concat(&[s, l]);
        let out = self.dec2.apply(tape, &b.dec2, inp);
        Self::gaussian_on_tape(tape, out, self.dims.z)
    }

    /// Negated ELBO of `trial` on `tape`.
    ///
    /// The reconstruction term is evaluated at the reparameterized zₜ, the
    /// z-level KL against p(z | s̃, l) at the reparameterized s̃, and the
    /// s-level KL against N(0, I) is weighted by `beta`. All noise comes
    /// from the trial, so the loss is a deterministic function of the
    /// parameters. The high-level input is always the sum of sampled zₜ.
    pub fn elbo_on_tape(&self, tape: &mut Tape<'_, f64>, b: &VaeBound, trial: &TrialRecord, beta: f64) -> Result<Var> {
        if trial.is_empty() {
            return Err(Error::InvalidParams("ELBO of an empty trial".into()));
        }
        let t_len = trial.len();
        if trial.locations.len() != t_len || trial.eps_z.len() != t_len {
            return Err(Error::DimensionMismatch {
                expected: t_len,
                got: trial.locations.len().min(trial.eps_z.len()),
            });
        }
        for x in &trial.glimpses {
            self.check_len(x.len(), self.dims.glimpse)?;
        }
        self.check_len(trial.eps_s.len(), self.dims.s)?;

        let mut q1 = Vec::with_capacity(t_len);
        let mut locs = Vec::with_capacity(t_len);
        let mut recon = None;
        let mut h = None;
        for t in 0..t_len {
            let x = tape.constant(trial.glimpses[t].clone());
            let l = tape.constant(trial.locations[t].to_vec());
            let (m, ls) = self.enc1_on_tape(tape, b, x, l);
            let z = tape.reparam(m, ls, &trial.eps_z[t]);
            let xh = self.dec1_on_tape(tape, b, z);
            let lp = tape.unit_gaussian_log_pdf(x, xh);
            recon = Some(match recon {
                None => lp,
                Some(r) => tape.add(r, lp),
            });
            h = Some(match h {
                None => z,
                Some(acc) => tape.add(acc, z),
            });
            q1.push((m, ls));
            locs.push(l);
        }
        let (ms, lss) = self.enc2_on_tape(tape, b, h.expect("non-empty trial"));
        let s = tape.reparam(ms, lss, &trial.eps_s);
        let mut loss = tape.neg(recon.expect("non-empty trial"));
        for (t, &(m, ls)) in q1.iter().enumerate() {
            let (mp, lsp) = self.dec2_on_tape(tape, b, s, locs[t]);
            let kl = tape.gaussian_kl(m, ls, mp, lsp);
            loss = tape.add(loss, kl);
        }
        let kl_s = tape.gaussian_kl_std_normal(ms, lss);
        let kl_s = tape.scale(kl_s, beta);
        Ok(tape.add(loss, kl_s))
    }

    /// Negated ELBO of `trial`.
    pub fn av_elbo(&self, trial: &TrialRecord, beta: f64) -> Result<f64> {
        let mut tape = Tape::new();
        let b = self.bind_frozen(&mut tape);
        let loss = self.elbo_on_tape(&mut tape, &b, trial, beta)?;
        Ok(tape.scalar(loss))
    }

    /// Loss and per-tensor gradients of the negated ELBO.
    pub fn elbo_gradients(&self, trial: &TrialRecord, beta: f64) -> Result<(f64, Vec<Vec<f64>>)> {
        let mut tape = Tape::new();
        let b = self.bind(&mut tape);
        let loss = self.elbo_on_tape(&mut tape, &b, trial, beta)?;
        let g = tape.backward(loss)?;
        let grads = b.vars().into_iter().zip(self.tensors()).map(|(v, t)| g.wrt(v, t.len())).collect();
        Ok((tape.scalar(loss), grads))
    }

    /// Mean squared error between each glimpse and its reconstruction from
    /// the posterior mean of z.
    pub fn reconstruction_mse(&self, trial: &TrialRecord) -> Result<f64> {
        let mut se = 0.0;
        let mut n = 0usize;
        for (x, m) in trial.glimpses.iter().zip(&trial.z_mean) {
            let xh = self.decode_glimpse(m)?;
            se += x.iter().zip(&xh).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            n += x.len();
        }
        if n == 0 {
            return Err(Error::InvalidParams("reconstruction error of an empty trial".into()));
        }
        Ok(se / n as f64)
    }
}

impl Parameters<f64> for HierarchicalVae {
    fn tensors(&self) -> Vec<&Tensor<f64>> {
        [&self.enc1, &self.dec1, &self.enc2, &self.dec2].into_iter().flat_map(|n| n.tensors()).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor<f64>> {
        let Self { enc1, dec1, enc2, dec2, .. } = self;
        [enc1, dec1, enc2, dec2].into_iter().flat_map(|n| n.tensors_mut()).collect()
    }
}
