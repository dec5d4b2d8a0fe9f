//! Trial protocol and the training loop.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::corpus::ImageCorpus;
use super::decision::DecisionNet;
use super::foveate::{foveate, FoveationSpec};
use super::vae::{HierarchicalVae, TrialMode, TrialRecord, VaeDims};
use super::value::{uniform_location, ActionNet, DEFAULT_MC_SAMPLES, DEFAULT_SIGMA_ACTION};
use crate::cmc::episode::csv_err;
use crate::diff::{Optimizer, Parameters};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AvStrategy {
    Bas,
    Random,
}

impl AvStrategy {
    pub fn name(self) -> &'static str {
        match self {
            AvStrategy::Bas => "bas",
            AvStrategy::Random => "random",
        }
    }
}

impl std::str::FromStr for AvStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bas" => Ok(AvStrategy::Bas),
            "random" => Ok(AvStrategy::Random),
            other => Err(Error::InvalidParams(format!("unknown active-vision strategy {other:?}"))),
        }
    }
}

impl std::fmt::Display for AvStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvConfig {
    /// Fixations per trial.
    pub fixations: usize,
    pub foveation: FoveationSpec,
    pub z_dim: usize,
    pub s_dim: usize,
    pub hidden: usize,
    pub beta: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub sigma_action: f64,
    pub mc_samples: usize,
    /// Epochs with uniformly random fixations before `epochs` strategy epochs.
    pub pretrain_epochs: usize,
    pub epochs: usize,
    /// Test images evaluated after every epoch; 0 means all of them.
    pub eval_trials: usize,
}

impl AvConfig {
    pub fn centered() -> Self {
        Self {
            fixations: 3,
            foveation: FoveationSpec { patch: 8, n_fov: 1, scale: 2 },
            z_dim: 32,
            s_dim: 64,
            hidden: 256,
            beta: 0.1,
            batch_size: 64,
            learning_rate: 1e-3,
            sigma_action: DEFAULT_SIGMA_ACTION,
            mc_samples: DEFAULT_MC_SAMPLES,
            pretrain_epochs: 0,
            epochs: 10,
            eval_trials: 0,
        }
    }

    pub fn translated() -> Self {
        Self {
            fixations: 4,
            foveation: FoveationSpec { patch: 12, n_fov: 3, scale: 2 },
            z_dim: 64,
            s_dim: 128,
            pretrain_epochs: 10,
            ..Self::centered()
        }
    }

    pub fn dims(&self) -> VaeDims {
        VaeDims { glimpse: self.foveation.glimpse_len(), z: self.z_dim, s: self.s_dim, hidden: self.hidden }
    }

    pub fn validate(&self) -> Result<()> {
        self.foveation.validate()?;
        let positive = [
            ("fixations", self.fixations),
            ("z_dim", self.z_dim),
            ("s_dim", self.s_dim),
            ("hidden", self.hidden),
            ("batch_size", self.batch_size),
            ("mc_samples", self.mc_samples),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidParams(format!("{name} must be ≥ 1")));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParams("beta must be ≥ 0".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParams("learning_rate must be positive".into()));
        }
        if !(self.sigma_action > 0.0 && self.sigma_action.is_finite()) {
            return Err(Error::InvalidParams("sigma_action must be positive".into()));
        }
        Ok(())
    }
}

/// The three trainable modules of one run.
#[derive(Debug, Clone)]
pub struct AvModel {
    pub vae: HierarchicalVae,
    pub action: ActionNet,
    pub decision: DecisionNet,
}

impl AvModel {
    pub fn new<R: Rng + ?Sized>(config: &AvConfig, n_classes: usize, rng: &mut R) -> Result<Self> {
        let vae = HierarchicalVae::new(config.dims(), rng)?;
        let action = ActionNet::new(config.s_dim, config.sigma_action, config.learning_rate, rng)?;
        let decision = DecisionNet::new(config.s_dim, n_classes, config.learning_rate, rng)?;
        Ok(Self { vae, action, decision })
    }
}

/// Runs one trial on `image`. The first fixation is uniform; later ones
/// follow `strategy`. BAS updates the action network when `learn` is set.
#[allow(clippy::too_many_arguments)]
pub fn run_trial<R: Rng + ?Sized>(
    vae: &HierarchicalVae,
    action: &mut ActionNet,
    image: &[f64],
    height: usize,
    width: usize,
    label: Option<usize>,
    config: &AvConfig,
    strategy: AvStrategy,
    mode: TrialMode,
    learn: bool,
    rng: &mut R,
) -> Result<TrialRecord> {
    let mut trial = TrialRecord::new(vae.dims(), mode, label, rng);
    for t in 0..config.fixations {
        let l = if t == 0 || strategy == AvStrategy::Random {
            uniform_location(rng)
        } else {
            action.bas_select(vae, &trial.h, config.mc_samples, learn, rng)?.l
        };
        let g = foveate(image, height, width, l, &config.foveation)?;
        vae.observe(&mut trial, &g, rng)?;
    }
    Ok(trial)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalMetrics {
    /// Mean ELBO per trial (not negated).
    pub elbo: f64,
    pub recon_mse: f64,
    pub accuracy: f64,
    /// Second fixation of every trial, when there is one.
    pub second_fixations: Vec<[f64; 2]>,
}

/// Evaluation-mode trials on the first `n` images of `corpus` (all if 0).
/// No parameter is modified.
pub fn evaluate<R: Rng + ?Sized>(
    model: &AvModel,
    corpus: &ImageCorpus,
    config: &AvConfig,
    strategy: AvStrategy,
    n: usize,
    rng: &mut R,
) -> Result<EvalMetrics> {
    let n = if n == 0 { corpus.len() } else { n.min(corpus.len()) };
    if n == 0 {
        return Err(Error::InvalidParams("evaluation on an empty corpus".into()));
    }
    let mut action = model.action.clone();
    let (mut elbo, mut mse, mut hits) = (0.0, 0.0, 0usize);
    let mut second = Vec::with_capacity(n);
    for i in 0..n {
        let label = corpus.label(i);
        let trial = run_trial(
            &model.vae,
            &mut action,
            corpus.image(i),
            corpus.height(),
            corpus.width(),
            Some(label),
            config,
            strategy,
            TrialMode::Eval,
            false,
            rng,
        )?;
        elbo -= model.vae.av_elbo(&trial, config.beta)?;
        mse += model.vae.reconstruction_mse(&trial)?;
        let s = model.vae.posterior_s(&trial.h)?;
        if model.decision.predict(s.mean()) == label {
            hits += 1;
        }
        if let Some(l) = trial.locations.get(1) {
            second.push(*l);
        }
    }
    let n = n as f64;
    Ok(EvalMetrics { elbo: elbo / n, recon_mse: mse / n, accuracy: hits as f64 / n, second_fixations: second })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvLogRow {
    pub epoch: usize,
    pub elbo: f64,
    pub recon_mse: f64,
    pub accuracy: f64,
    pub strategy: AvStrategy,
    pub seed: u64,
}

pub const AV_RUNLOG_HEADER: [&str; 6] = ["epoch", "elbo", "recon_mse", "accuracy", "strategy", "seed"];

#[derive(Debug, Clone, Default)]
pub struct AvRunLog {
    /// Row 0 is the untrained model; row `e` follows epoch `e`.
    pub rows: Vec<AvLogRow>,
}

impl AvRunLog {
    pub fn initial(&self) -> Option<&AvLogRow> {
        self.rows.first()
    }

    pub fn last(&self) -> Option<&AvLogRow> {
        self.rows.last()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(AV_RUNLOG_HEADER).map_err(csv_err)?;
        for r in &self.rows {
            out.write_record([
                r.epoch.to_string(),
                r.elbo.to_string(),
                r.recon_mse.to_string(),
                r.accuracy.to_string(),
                r.strategy.to_string(),
                r.seed.to_string(),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AvRun {
    pub model: AvModel,
    pub log: AvRunLog,
}

/// Trains perception, action and decision networks on `train`, evaluating
/// on `test` before training and after every epoch.
///
/// Each minibatch takes one optimizer step on the summed negated ELBO. The
/// decision network takes a cross-entropy step on E[q₂(s)] of the same
/// trials, with the perception output treated as a constant.
pub fn run_av_training(
    config: &AvConfig,
    strategy: AvStrategy,
    run_seed: u64,
    train: &ImageCorpus,
    test: &ImageCorpus,
) -> Result<AvRun> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidParams("empty training corpus".into()));
    }
    if (train.height(), train.width()) != (test.height(), test.width()) {
        return Err(Error::InvalidParams("train and test images differ in size".into()));
    }
    let mut init_rng = seed::stream(run_seed, "av.init");
    let mut trial_rng = seed::stream(run_seed, "av.trial");
    let mut order_rng = seed::stream(run_seed, "av.order");
    let n_classes = train.n_classes().max(test.n_classes());
    let mut model = AvModel::new(config, n_classes, &mut init_rng)?;
    let mut vae_opt = Optimizer::adam(config.learning_rate);

    let mut log = AvRunLog::default();
    let eval_row = |model: &AvModel, epoch: usize| -> Result<AvLogRow> {
        let mut rng = seed::stream(seed::derive_seed(run_seed, &format!("av.eval.{epoch}")), "av.eval");
        let m = evaluate(model, test, config, strategy, config.eval_trials, &mut rng)?;
        Ok(AvLogRow { epoch, elbo: m.elbo, recon_mse: m.recon_mse, accuracy: m.accuracy, strategy, seed: run_seed })
    };
    log.rows.push(eval_row(&model, 0)?);

    let mut order: Vec<usize> = (0..train.len()).collect();
    let total = config.pretrain_epochs + config.epochs;
    for epoch in 1..=total {
        let phase = if epoch <= config.pretrain_epochs { AvStrategy::Random } else { strategy };
        order.shuffle(&mut order_rng);
        for batch in order.chunks(config.batch_size) {
            let mut grads: Vec<Vec<f64>> = model.vae.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
            let mut features = Vec::with_capacity(batch.len());
            let mut labels = Vec::with_capacity(batch.len());
            for &i in batch {
                let trial = run_trial(
                    &model.vae,
                    &mut model.action,
                    train.image(i),
                    train.height(),
                    train.width(),
                    Some(train.label(i)),
                    config,
                    phase,
                    TrialMode::Train,
                    true,
                    &mut trial_rng,
                )?;
                let (_, g) = model.vae.elbo_gradients(&trial, config.beta)?;
                for (acc, gi) in grads.iter_mut().zip(g) {
                    acc.iter_mut().zip(gi).for_each(|(a, b)| *a += b);
                }
                features.push(model.vae.posterior_s(&trial.h)?.mean().to_vec());
                labels.push(train.label(i));
            }
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().flatten().for_each(|g| *g *= scale);
            vae_opt.step(model.vae.tensors_mut(), &grads)?;
            let xs: Vec<&[f64]> = features.iter().map(Vec::as_slice).collect();
            model.decision.train_step(&xs, &labels)?;
        }
        log.rows.push(eval_row(&model, epoch)?);
    }
    Ok(AvRun { model, log })
}
