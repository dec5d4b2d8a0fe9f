//! Loss building blocks assembled from the tape primitives.

use super::tape::{Tape, Var};
use crate::real::Real;

impl<T: Real> Tape<'_, T> {
    /// μ + exp(log σ) ⊙ ε for constant noise `eps`.
    pub fn reparam(&mut self, mean: Var, log_std: Var, eps: &[T]) -> Var {
        let sigma = self.exp(log_std);
        let e = self.constant(eps.to_vec());
        let scaled = self.mul(sigma, e);
        self.add(mean, scaled)
    }

    /// Σ log σᵢ + (D/2) log(2πe).
    pub fn gaussian_entropy(&mut self, log_std: Var) -> Var {
        let d = self.value(log_std).len();
        let s = self.sum(log_std);
        let c = T::from_usize_lossy(d) * T::lit(0.5) * (T::lit(2.0) * T::PI() * T::E()).ln();
        self.offset(s, c)
    }

    /// KL(N(μ, σ²) ‖ N(0, I)).
    pub fn gaussian_kl_std_normal(&mut self, mean: Var, log_std: Var) -> Var {
        let m2 = self.square(mean);
        let two_l = self.scale(log_std, T::lit(2.0));
        let var = self.exp(two_l);
        let a = self.add(m2, var);
        let b = self.sub(a, two_l);
        let s = self.sum(b);
        let d = T::from_usize_lossy(self.value(mean).len());
        let s = self.offset(s, -d);
        self.scale(s, T::lit(0.5))
    }

    /// KL(q ‖ p) between diagonal Gaussians given means and log-stds.
    pub fn gaussian_kl(&mut self, mean_q: Var, log_std_q: Var, mean_p: Var, log_std_p: Var) -> Var {
        let dl = self.sub(log_std_q, log_std_p);
        let two_dl = self.scale(dl, T::lit(2.0));
        let ratio = self.exp(two_dl);
        let dm = self.sub(mean_q, mean_p);
        let neg_lp = self.neg(log_std_p);
        let inv_sp = self.exp(neg_lp);
        let z = self.mul(dm, inv_sp);
        let z2 = self.square(z);
        let a = self.add(ratio, z2);
        let half = self.scale(a, T::lit(0.5));
        let terms = self.sub(half, dl);
        let s = self.sum(terms);
        let d = T::from_usize_lossy(self.value(mean_q).len());
        self.offset(s, -d * T::lit(0.5))
    }

    /// log N(x; mean, I).
    pub fn unit_gaussian_log_pdf(&mut self, x: Var, mean: Var) -> Var {
        let r = self.sub(x, mean);
        let r2 = self.square(r);
        let s = self.sum(r2);
        let s = self.scale(s, T::lit(-0.5));
        let d = T::from_usize_lossy(self.value(x).len());
        self.offset(s, -d * T::lit(0.5) * (T::lit(2.0) * T::PI()).ln())
    }

    /// −log softmax(logits)[label].
    pub fn softmax_cross_entropy(&mut self, logits: Var, label: usize) -> Var {
        let max = self.value(logits).iter().copied().fold(T::neg_infinity(), T::max);
        let shifted = self.offset(logits, -max);
        let e = self.exp(shifted);
        let s = self.sum(e);
        let lse = self.log(s);
        let picked = self.slice(shifted, label, 1);
        self.sub(lse, picked)
    }

    /// Σ lnΓ(αᵢ) − lnΓ(Σ αᵢ).
    pub fn dirichlet_log_beta(&mut self, alpha: Var) -> Var {
        let lg = self.lgamma(alpha);
        let a = self.sum(lg);
        let a0 = self.sum(alpha);
        let b = self.lgamma(a0);
        self.sub(a, b)
    }

    /// ψ(αᵢ) − ψ(α₀) for every component.
    pub fn dirichlet_expected_log(&mut self, alpha: Var) -> Var {
        let n = self.value(alpha).len();
        let a0 = self.sum(alpha);
        let p0 = self.digamma(a0);
        let p0 = self.expand(p0, n);
        let p = self.digamma(alpha);
        self.sub(p, p0)
    }

    /// KL(Dir(α) ‖ Dir(prior)) for a constant prior.
    pub fn dirichlet_kl(&mut self, alpha: Var, prior: &[T]) -> Var {
        let prior_lb = {
            let lg: T = prior.iter().map(|&p| crate::numerics::special::ln_gamma(p)).sum();
            lg - crate::numerics::special::ln_gamma(prior.iter().copied().sum())
        };
        let lb_q = self.dirichlet_log_beta(alpha);
        let elog = self.dirichlet_expected_log(alpha);
        let p = self.constant(prior.to_vec());
        let diff = self.sub(alpha, p);
        let cross = self.dot(diff, elog);
        let kl = self.sub(cross, lb_q);
        self.offset(kl, prior_lb)
    }
}
