//! Supervised read-out of the perception state.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::diff::{Activation, DenseNet, Optimizer, Parameters, Tape, Tensor};
use crate::error::{Error, Result};

pub const DECISION_HIDDEN: usize = 256;

/// Classifier on E[q₂(s)]. Only its own parameters are ever updated.
#[derive(Debug, Clone)]
pub struct DecisionNet {
    net: DenseNet<f64>,
    n_classes: usize,
    optimizer: Optimizer<f64>,
}

impl DecisionNet {
    pub fn new<R: Rng + ?Sized>(s_dim: usize, n_classes: usize, learning_rate: f64, rng: &mut R) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::InvalidParams("a classifier needs ≥ 2 classes".into()));
        }
        let sizes = [s_dim, DECISION_HIDDEN, DECISION_HIDDEN, n_classes];
        let net = DenseNet::new("decision", &sizes, Activation::Relu, Activation::Identity, rng);
        Ok(Self { net, n_classes, optimizer: Optimizer::adam(learning_rate) })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn classify(&self, s_mean: &[f64]) -> Vec<f64> {
        self.net.forward(s_mean)
    }

    pub fn predict(&self, s_mean: &[f64]) -> usize {
        crate::cmc::policy::argmax(&self.classify(s_mean))
    }

    /// Mean cross-entropy over the batch followed by one optimizer step.
    /// Returns the pre-step loss.
    pub fn train_step(&mut self, features: &[&[f64]], labels: &[usize]) -> Result<f64> {
        if features.is_empty() || features.len() != labels.len() {
            return Err(Error::InvalidParams("batch features and labels must be non-empty and equal in length".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= self.n_classes) {
            return Err(Error::IndexOutOfRange { index: bad, bound: self.n_classes });
        }
        let n = features.len() as f64;
        let sizes: Vec<usize> = self.net.tensors().iter().map(|t| t.len()).collect();
        let mut grads: Vec<Vec<f64>> = sizes.iter().map(|&k| vec![0.0; k]).collect();
        let mut loss = 0.0;
        for (x, &y) in features.iter().zip(labels) {
            let mut tape = Tape::new();
            let b = self.net.bind(&mut tape);
            let xv = tape.constant(x.to_vec());
            let logits = self.net.apply(&mut tape, &b, xv);
            let ce = tape.softmax_cross_entropy(logits, y);
            loss += tape.scalar(ce);
            let g = tape.backward(ce)?;
            for ((acc, &v), &k) in grads.iter_mut().zip(&b.vars).zip(&sizes) {
                for (a, gi) in acc.iter_mut().zip(g.wrt(v, k)) {
                    *a += gi / n;
                }
            }
        }
        self.optimizer.step(self.net.tensors_mut(), &grads)?;
        Ok(loss / n)
    }

    pub fn accuracy(&self, features: &[Vec<f64>], labels: &[usize]) -> f64 {
        if features.is_empty() {
            return 0.0;
        }
        let hits = features.iter().zip(labels).filter(|(x, &y)| self.predict(x) == y).count();
        hits as f64 / features.len() as f64
    }
}

impl Parameters<f64> for DecisionNet {
    fn tensors(&self) -> Vec<&Tensor<f64>> {
        self.net.tensors()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor<f64>> {
        self.net.tensors_mut()
    }
}

/// `steps` minibatch steps on fixed features. The frozen modules are only
/// borrowed; their checksums are compared before and after as a contract
/// check.
pub fn train_classifier<R: Rng + ?Sized>(
    decision: &mut DecisionNet,
    frozen: &[&dyn Parameters<f64>],
    features: &[Vec<f64>],
    labels: &[usize],
    steps: usize,
    batch_size: usize,
    rng: &mut R,
) -> Result<f64> {
    if features.is_empty() || batch_size == 0 {
        return Err(Error::InvalidParams("classifier training needs data and a positive batch size".into()));
    }
    let before: Vec<u64> = frozen.iter().map(|m| m.checksum()).collect();
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut cursor = order.len();
    let mut last = f64::NAN;
    for _ in 0..steps {
        let mut idx = Vec::with_capacity(batch_size);
        while idx.len() < batch_size.min(features.len()) {
            if cursor == order.len() {
                order.shuffle(rng);
                cursor = 0;
            }
            idx.push(order[cursor]);
            cursor += 1;
        }
        let xs: Vec<&[f64]> = idx.iter().map(|&i| features[i].as_slice()).collect();
        let ys: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        last = decision.train_step(&xs, &ys)?;
    }
    let after: Vec<u64> = frozen.iter().map(|m| m.checksum()).collect();
    if before != after {
        return Err(Error::InvalidParams("classifier training modified perception or action parameters".into()));
    }
    Ok(last)
}
